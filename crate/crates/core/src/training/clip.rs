use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// L2 norm over every stored scalar of every tensor.
pub fn global_norm<T: Scalar>(grads: &[Tensor<T>]) -> T {
    grads
        .iter()
        .flat_map(|g| g.data().iter())
        .map(|&v| v * v)
        .sum::<T>()
        .sqrt()
}

/// Rescales all gradients by `max_norm / g` when their global norm `g` exceeds `max_norm`.
/// Returns the global norm after clipping.
pub fn clip_gradients<T: Scalar>(grads: &mut [Tensor<T>], max_norm: T) -> T {
    let g = global_norm(grads);
    if g > max_norm {
        let s = max_norm / g;
        for t in grads.iter_mut() {
            t.data_mut().iter_mut().for_each(|v| *v *= s);
        }
        global_norm(grads)
    } else {
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grads(v: &[f64]) -> Vec<Tensor<f64>> {
        vec![
            Tensor::from_vec(vec![1], vec![v[0]]).unwrap(),
            Tensor::from_vec(vec![v.len() - 1], v[1..].to_vec()).unwrap(),
        ]
    }

    #[test]
    fn large_gradients_are_scaled() {
        let mut g = grads(&[6.0, 8.0]);
        let post = clip_gradients(&mut g, 1.0);
        assert!((g[0].data()[0] - 0.6).abs() < 1e-15);
        assert!((g[1].data()[0] - 0.8).abs() < 1e-15);
        assert!((post - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_gradients_are_untouched() {
        let mut g = grads(&[0.3, 0.4]);
        let post = clip_gradients(&mut g, 1.0);
        assert_eq!(g, grads(&[0.3, 0.4]));
        assert!((post - 0.5).abs() < 1e-15);
    }
}
