use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The standard complex structure on `R^{2m̄}`:
/// `J ∂_{x^i} = ∂_{x^{i+m̄}}`, `J ∂_{x^{i+m̄}} = -∂_{x^i}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ComplexStructure {
    pub mbar: usize,
}

impl ComplexStructure {
    pub fn new(mbar: usize) -> Self {
        Self { mbar }
    }

    pub fn real_dim(&self) -> usize {
        2 * self.mbar
    }

    /// Row-major matrix with `(J v)^k = J[k][l] v^l`.
    pub fn matrix(&self) -> Vec<f64> {
        let n = self.real_dim();
        let mut j = vec![0.0; n * n];
        for i in 0..self.mbar {
            j[(i + self.mbar) * n + i] = 1.0;
            j[i * n + i + self.mbar] = -1.0;
        }
        j
    }

    /// Image of basis vector `e_axis` as `(target_axis, sign)`.
    pub fn apply_basis(&self, axis: usize) -> (usize, f64) {
        if axis < self.mbar {
            (axis + self.mbar, 1.0)
        } else {
            (axis - self.mbar, -1.0)
        }
    }

    /// `J^T A J` for a row-major `n×n` matrix, i.e. `(J^*A)(x,y) = A(Jx,Jy)`.
    pub fn pullback(&self, a: &[Complex64]) -> Vec<Complex64> {
        let n = self.real_dim();
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            let (ti, si) = self.apply_basis(i);
            for j in 0..n {
                let (tj, sj) = self.apply_basis(j);
                out[i * n + j] = a[ti * n + tj] * (si * sj);
            }
        }
        out
    }

    /// `½(A + J^T A J)`, the J-invariant part.
    pub fn average(&self, a: &[Complex64]) -> Vec<Complex64> {
        self.pullback(a)
            .iter()
            .zip(a)
            .map(|(p, q)| 0.5 * (p + q))
            .collect()
    }
}

/// Metric signature `(2p̄, 2q̄)`: `neg` negative directions, `pos` positive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub neg: usize,
    pub pos: usize,
}

impl Signature {
    pub fn new(neg: usize, pos: usize) -> Result<Self> {
        if neg % 2 != 0 || pos % 2 != 0 || neg + pos == 0 {
            return Err(Error::InvalidSignature {
                neg,
                pos,
                mbar: (neg + pos) / 2,
            });
        }
        Ok(Self { neg, pos })
    }

    pub fn definite(mbar: usize) -> Self {
        Self {
            neg: 0,
            pos: 2 * mbar,
        }
    }

    pub fn mbar(&self) -> usize {
        (self.neg + self.pos) / 2
    }

    pub fn is_definite(&self) -> bool {
        self.neg == 0
    }

    /// Flat background diagonal with the negative directions in J-pairs:
    /// axes `a` and `a + m̄` are negative for `a < p̄`.
    pub fn background(&self) -> Vec<Complex64> {
        let mbar = self.mbar();
        let pbar = self.neg / 2;
        let mut d = vec![Complex64::new(1.0, 0.0); 2 * mbar];
        for a in 0..pbar {
            d[a] = Complex64::new(-1.0, 0.0);
            d[a + mbar] = Complex64::new(-1.0, 0.0);
        }
        d
    }
}

impl std::fmt::Display for Signature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.neg, self.pos)
    }
}
