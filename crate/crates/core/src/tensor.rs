//! Dense row-major real and complex arrays.
//!
//! Complex tensors store interleaved `(re, im)` pairs, so `data.len()` is twice the
//! element count. Tensors are plain values: operations return new tensors.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
    complex: bool,
}

impl<T: Scalar> Tensor<T> {
    pub fn from_vec(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::config(format!(
                "shape {shape:?} holds {n} scalars, got {}",
                data.len()
            )));
        }
        Ok(Self {
            shape,
            data,
            complex: false,
        })
    }

    /// Builds a complex tensor from interleaved `(re, im)` storage.
    pub fn complex_from_interleaved(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if 2 * n != data.len() {
            return Err(Error::config(format!(
                "complex shape {shape:?} needs {} scalars, got {}",
                2 * n,
                data.len()
            )));
        }
        Ok(Self {
            shape,
            data,
            complex: true,
        })
    }

    pub fn complex_from_values(shape: Vec<usize>, values: &[Complex<T>]) -> Result<Self> {
        let data = values.iter().flat_map(|z| [z.re, z.im]).collect();
        Self::complex_from_interleaved(shape, data)
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![T::zero(); n],
            complex: false,
        }
    }

    pub fn complex_zeros(shape: Vec<usize>) -> Self {
        let n: usize = shape.iter().product();
        Self {
            shape,
            data: vec![T::zero(); 2 * n],
            complex: true,
        }
    }

    pub fn full(shape: Vec<usize>, value: T) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![value; n],
            complex: false,
        }
    }

    pub fn scalar(value: T) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![value],
            complex: false,
        }
    }

    /// Same shape and complexity, all zeros.
    pub fn zeros_like(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            data: vec![T::zero(); self.data.len()],
            complex: self.complex,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn is_complex(&self) -> bool {
        self.complex
    }

    /// Number of (possibly complex) elements.
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    /// The value of a one-element real tensor.
    pub fn item(&self) -> Result<T> {
        if self.complex || self.data.len() != 1 {
            return Err(Error::config(format!(
                "item() needs a real one-element tensor, got shape {:?}",
                self.shape
            )));
        }
        Ok(self.data[0])
    }

    pub fn complex_at(&self, index: usize) -> Complex<T> {
        debug_assert!(self.complex);
        Complex::new(self.data[2 * index], self.data[2 * index + 1])
    }

    pub fn complex_values(&self) -> Vec<Complex<T>> {
        debug_assert!(self.complex);
        self.data
            .chunks_exact(2)
            .map(|p| Complex::new(p[0], p[1]))
            .collect()
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        if shape.iter().product::<usize>() != self.numel() {
            return Err(Error::config(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    /// Row `i` of the leading axis as a flat slice of scalars.
    pub fn row(&self, i: usize) -> &[T] {
        let width = self.data.len() / self.shape[0];
        &self.data[i * width..(i + 1) * width]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
            complex: self.complex,
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Converts the scalar type.
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
            complex: self.complex,
        }
    }

    pub(crate) fn same_layout(&self, other: &Self) -> bool {
        self.shape == other.shape && self.complex == other.complex
    }

    pub(crate) fn expect_layout(&self, shape: &[usize], complex: bool, what: &str) -> Result<()> {
        if self.shape != shape || self.complex != complex {
            return Err(Error::config(format!(
                "{what}: expected {}shape {shape:?}, got {}shape {:?}",
                if complex { "complex " } else { "real " },
                if self.complex { "complex " } else { "real " },
                self.shape
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn element_count_matches_storage() {
        assert!(Tensor::<f64>::from_vec(vec![2, 3], vec![0.0; 6]).is_ok());
        assert!(Tensor::<f64>::from_vec(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::<f64>::complex_from_interleaved(vec![2], vec![0.0; 4]).is_ok());
        assert!(Tensor::<f64>::complex_from_interleaved(vec![2], vec![0.0; 2]).is_err());
    }

    #[test]
    fn scalar_tensor_has_empty_shape() {
        let t = Tensor::scalar(2.5f64);
        assert_eq!(t.numel(), 1);
        assert_eq!(t.ndim(), 0);
        assert_eq!(t.item().unwrap(), 2.5);
    }
}
