use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Bias-corrected Adam; complex parameters are updated as independent real pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    /// Zeroed moments shaped like `params`, with `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`.
    pub fn new(params: &[&Tensor<T>]) -> Self {
        let zeros: Vec<Vec<T>> = params.iter().map(|p| vec![T::zero(); p.data().len()]).collect();
        Self {
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [&mut Tensor<T>], grads: &[Tensor<T>], lr: T) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::config(format!(
                "optimizer holds {} moments, got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.data().len() != self.m[i].len() || g.data().len() != self.m[i].len() {
                return Err(Error::config(format!("parameter {i} changed shape since optimizer creation")));
            }
        }
        self.step += 1;
        let t = i32::try_from(self.step).unwrap_or(i32::MAX);
        let c1 = T::one() - self.beta1.powi(t);
        let c2 = T::one() - self.beta2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for (((x, &gi), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
                *mi = self.beta1 * *mi + (T::one() - self.beta1) * gi;
                *vi = self.beta2 * *vi + (T::one() - self.beta2) * gi * gi;
                let mhat = *mi / c1;
                let vhat = *vi / c2;
                *x -= lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_about_lr() {
        let mut p = Tensor::from_vec(vec![1], vec![0.0f64]).unwrap();
        let mut adam = Adam::new(&[&p]);
        let g = Tensor::from_vec(vec![1], vec![0.3]).unwrap();
        adam.step(&mut [&mut p], &[g], 1e-3).unwrap();
        // -lr * 0.3 / (0.3 + 1e-8)
        assert!((p.data()[0] - (-9.999_999_666_666_68e-4)).abs() < 1e-16);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = Tensor::from_vec(vec![3], vec![1.0f64, -2.0, 0.5]).unwrap();
        let before = p.clone();
        let mut adam = Adam::new(&[&p]);
        for _ in 0..5 {
            adam.step(&mut [&mut p], &[before.zeros_like()], 1e-2).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn shape_change_is_rejected() {
        let mut p = Tensor::from_vec(vec![2], vec![0.0f64, 0.0]).unwrap();
        let mut adam = Adam::new(&[&p]);
        let g = Tensor::from_vec(vec![3], vec![0.0, 0.0, 0.0]).unwrap();
        assert!(adam.step(&mut [&mut p], &[g], 1e-3).is_err());
    }
}
