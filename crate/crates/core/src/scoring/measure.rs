//! Finitely supported measures on R^d and exact population scores over them.
//!
//! These evaluate expectations exactly (double sums over atoms) and back the propriety
//! checks: the energy score equals the kernel score of the distance-induced kernel
//! `k(x, y) = d(x, z0) + d(y, z0) - d(x, y)` for every anchor `z0`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure<T> {
    atoms: Vec<Vec<T>>,
    weights: Vec<T>,
}

fn euclid<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<T>()
        .sqrt()
}

impl<T: Scalar> DiscreteMeasure<T> {
    pub fn new(atoms: Vec<Vec<T>>, weights: Vec<T>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(Error::config(format!(
                "measure needs matching non-empty atoms/weights, got {} and {}",
                atoms.len(),
                weights.len()
            )));
        }
        let d = atoms[0].len();
        if d == 0 || atoms.iter().any(|a| a.len() != d) {
            return Err(Error::config("atoms must share a positive dimension"));
        }
        if atoms.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::config("atoms must be finite"));
        }
        if weights.iter().any(|&w| !(w >= T::zero())) {
            return Err(Error::config("weights must be non-negative"));
        }
        let total: T = weights.iter().copied().sum();
        if (total - T::one()).abs() > T::lit(1e-12) {
            return Err(Error::config(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { atoms, weights })
    }

    pub fn dirac(point: Vec<T>) -> Result<Self> {
        Self::new(vec![point], vec![T::one()])
    }

    pub fn uniform(atoms: Vec<Vec<T>>) -> Result<Self> {
        let w = T::one() / T::from_usize_lossy(atoms.len().max(1));
        let n = atoms.len();
        Self::new(atoms, vec![w; n])
    }

    pub fn atoms(&self) -> &[Vec<T>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    fn check_point(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::config(format!(
                "point of dimension {} against a measure on R^{}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// `E_P d(X, x)`.
    fn mean_distance(&self, x: &[T]) -> T {
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(a, &w)| w * euclid(a, x))
            .sum()
    }

    /// `E_P d(X, X')` over independent copies, equal-index pairs included.
    fn mean_pair_distance(&self) -> T {
        let mut acc = T::zero();
        for (a, &wa) in self.atoms.iter().zip(&self.weights) {
            for (b, &wb) in self.atoms.iter().zip(&self.weights) {
                acc += wa * wb * euclid(a, b);
            }
        }
        acc
    }

    /// Merges coincident atoms and drops zero weights, in a canonical order.
    pub fn canonical(&self) -> Vec<(Vec<T>, T)> {
        let mut merged: Vec<(Vec<T>, T)> = Vec::new();
        for (a, &w) in self.atoms.iter().zip(&self.weights) {
            if w == T::zero() {
                continue;
            }
            match merged.iter_mut().find(|(b, _)| b == a) {
                Some((_, acc)) => *acc += w,
                None => merged.push((a.clone(), w)),
            }
        }
        merged.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite atoms"));
        merged
    }

    /// Whether both measures put the same mass (within `tol`) on the same points.
    pub fn same_measure(&self, other: &Self, tol: T) -> bool {
        let (a, b) = (self.canonical(), other.canonical());
        a.len() == b.len()
            && a.iter()
                .zip(&b)
                .all(|((pa, wa), (pb, wb))| pa == pb && (*wa - *wb).abs() <= tol)
    }
}

/// `ES(P, x) = E_P ||X - x|| - 1/2 E_P ||X - X'||`, exact over atoms.
pub fn energy_score_population<T: Scalar>(p: &DiscreteMeasure<T>, x: &[T]) -> Result<T> {
    p.check_point(x)?;
    Ok(p.mean_distance(x) - T::lit(0.5) * p.mean_pair_distance())
}

/// Distance-induced kernel anchored at `z0`.
pub fn induced_kernel<T: Scalar>(x: &[T], y: &[T], z0: &[T]) -> T {
    euclid(x, z0) + euclid(y, z0) - euclid(x, y)
}

/// `S_k(P, x) = 1/2 E k(X, X') - E k(X, x) + 1/2 k(x, x)` with the induced kernel.
pub fn kernel_score_induced<T: Scalar>(p: &DiscreteMeasure<T>, x: &[T], z0: &[T]) -> Result<T> {
    p.check_point(x)?;
    p.check_point(z0)?;
    let mut pair = T::zero();
    for (a, &wa) in p.atoms.iter().zip(&p.weights) {
        for (b, &wb) in p.atoms.iter().zip(&p.weights) {
            pair += wa * wb * induced_kernel(a, b, z0);
        }
    }
    let cross: T = p
        .atoms
        .iter()
        .zip(&p.weights)
        .map(|(a, &w)| w * induced_kernel(a, x, z0))
        .sum();
    let half = T::lit(0.5);
    Ok(half * pair - cross + half * induced_kernel(x, x, z0))
}

/// Expected score `S(Q, P) = sum_i P(x_i) ES(Q, x_i)` of forecast `q` under truth `p`.
pub fn expected_energy_score<T: Scalar>(q: &DiscreteMeasure<T>, p: &DiscreteMeasure<T>) -> Result<T> {
    if q.dim() != p.dim() {
        return Err(Error::config("measures live in different dimensions"));
    }
    let spread = T::lit(0.5) * q.mean_pair_distance();
    Ok(p.atoms
        .iter()
        .zip(&p.weights)
        .map(|(x, &w)| w * (q.mean_distance(x) - spread))
        .sum())
}

/// `S(Q, P) - S(P, P)`; non-negative for a proper score.
pub fn propriety_gap<T: Scalar>(p: &DiscreteMeasure<T>, q: &DiscreteMeasure<T>) -> Result<T> {
    Ok(expected_energy_score(q, p)? - expected_energy_score(p, p)?)
}
