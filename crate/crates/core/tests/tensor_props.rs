use pno_core::fft::{fft_real, ifft_real};
use pno_core::gradcheck::{check_function, PRIMITIVE_TOLERANCE};
use pno_core::{NodeId, Result, Tape, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn signal() -> impl Strategy<Value = Vec<f64>> {
    prop::sample::select(vec![8usize, 16, 32, 64])
        .prop_flat_map(|n| prop::collection::vec(-10.0..10.0f64, n))
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn random_complex(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    Tensor::complex_from_interleaved(shape, (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Lift, spectral convolution, activations and a norm, chained the way a Fourier layer uses them.
fn composition(tape: &mut Tape<f64>, ids: &[NodeId]) -> Result<NodeId> {
    let (x, w, r) = (ids[0], ids[1], ids[2]);
    let h = tape.channel_linear(x, w, None)?;
    let f = tape.fft_real(h)?;
    let t = tape.truncate_modes(f, 4)?;
    let m = tape.mode_multiply(t, r)?;
    let p = tape.pad_modes(m, 9)?;
    let y = tape.ifft_real(p, 16)?;
    let g = tape.gelu(y)?;
    let s = tape.softplus(y)?;
    let d = tape.sub(g, s)?;
    let e = tape.mul(d, g)?;
    let n = tape.norm(e, 1.0 / 16.0)?;
    let total = tape.sum(g)?;
    let sum = tape.add(n, total)?;
    tape.scale(sum, 0.5)
}

proptest! {
    #[test]
    fn parseval_holds(x in signal()) {
        let n = x.len();
        let spec = fft_real(&x).unwrap();
        let energy: f64 = x.iter().map(|v| v * v).sum();
        let mut s = spec[0].norm_sqr() + spec[n / 2].norm_sqr();
        s += 2.0 * spec[1..n / 2].iter().map(|z| z.norm_sqr()).sum::<f64>();
        prop_assert!((energy - s / n as f64).abs() <= 1e-10 * energy.max(1e-300));
    }

    #[test]
    fn inverse_undoes_forward(x in signal()) {
        let back = ifft_real(&fft_real(&x).unwrap(), x.len()).unwrap();
        for (a, b) in x.iter().zip(&back) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn random_compositions_match_finite_differences(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs = vec![
            random_tensor(&mut rng, vec![3, 16]),
            random_tensor(&mut rng, vec![3, 2]),
            random_complex(&mut rng, vec![4, 2, 2]),
        ];
        let err = check_function(&inputs, composition).unwrap();
        prop_assert!(err < PRIMITIVE_TOLERANCE, "relative error {err}");
    }
}

#[test]
fn repeated_evaluation_is_bit_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let inputs = [
        random_tensor(&mut rng, vec![3, 16]),
        random_tensor(&mut rng, vec![3, 2]),
        random_complex(&mut rng, vec![4, 2, 2]),
    ];
    let run = || {
        let mut tape = Tape::new();
        let ids: Vec<NodeId> = inputs.iter().map(|x| tape.param(x.clone())).collect();
        let root = composition(&mut tape, &ids).unwrap();
        let grads = tape.backward(root).unwrap();
        let mut out = vec![tape.value(root).item().unwrap()];
        for (id, x) in ids.iter().zip(&inputs) {
            out.extend_from_slice(grads.get_or_zeros(*id, x).data());
        }
        out
    };
    let (a, b) = (run(), run());
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}
