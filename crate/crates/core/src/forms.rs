//! Dense exterior algebra over the coordinate coframe `dx^1, …, dx^n`.
//!
//! A basis `d`-form `dx^{i_1}∧…∧dx^{i_d}` (`i_1 < … < i_d`) is identified with
//! the bitmask of its indices. Coefficients follow the increasing-index
//! convention: `α = Σ_{I increasing} α_I dx^I`, and a 2-form built from an
//! antisymmetric matrix `A` is `Σ_{i<j} A_{ij} dx^i∧dx^j`.
//!
//! The inner product on `d`-forms is the Gram-determinant extension of the
//! inverse metric, `⟨dx^I, dx^J⟩ = det(h^{I,J})`, with no absolute values so
//! indefinite and complex metrics pass through untouched.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Basis bookkeeping for the exterior algebra of `R^n`.
#[derive(Debug)]
pub struct Exterior {
    pub n: usize,
    masks_by_degree: Vec<Vec<u16>>,
    index_in_degree: Vec<usize>,
    // sign of dx^I ∧ dx^J relative to dx^{I∪J}, 0 when I∩J ≠ ∅
    sign: Vec<i8>,
}

impl Exterior {
    fn build(n: usize) -> Self {
        let size = 1usize << n;
        let mut masks_by_degree = vec![Vec::new(); n + 1];
        let mut index_in_degree = vec![0; size];
        for mask in 0..size {
            let d = (mask as u32).count_ones() as usize;
            index_in_degree[mask] = masks_by_degree[d].len();
            masks_by_degree[d].push(mask as u16);
        }
        let mut sign = vec![0i8; size * size];
        for a in 0..size {
            for b in 0..size {
                if a & b != 0 {
                    continue;
                }
                // count pairs (i in a, j in b) with i > j
                let mut swaps = 0u32;
                for j in 0..n {
                    if b >> j & 1 == 1 {
                        swaps += (a >> (j + 1)).count_ones();
                    }
                }
                sign[a * size + b] = if swaps % 2 == 0 { 1 } else { -1 };
            }
        }
        Self {
            n,
            masks_by_degree,
            index_in_degree,
            sign,
        }
    }

    pub fn get(n: usize) -> &'static Exterior {
        static TABLES: [OnceLock<Exterior>; MAX_DIM + 1] = [
            OnceLock::new(),
            OnceLock::new(),
            OnceLock::new(),
            OnceLock::new(),
            OnceLock::new(),
            OnceLock::new(),
            OnceLock::new(),
            OnceLock::new(),
            OnceLock::new(),
        ];
        assert!(n <= MAX_DIM, "exterior algebra supports n <= {MAX_DIM}");
        TABLES[n].get_or_init(|| Exterior::build(n))
    }

    pub fn masks(&self, degree: usize) -> &[u16] {
        &self.masks_by_degree[degree]
    }

    pub fn dim_of_degree(&self, degree: usize) -> usize {
        if degree > self.n {
            0
        } else {
            self.masks_by_degree[degree].len()
        }
    }

    pub fn index_of(&self, mask: u16) -> usize {
        self.index_in_degree[mask as usize]
    }

    #[inline]
    pub fn wedge_sign(&self, a: u16, b: u16) -> i8 {
        self.sign[((a as usize) << self.n) + b as usize]
    }
}

/// Sign of the permutation sorting `indices`, together with their bitmask.
/// Returns `None` if an index repeats.
pub fn sort_sign(indices: &[usize]) -> Option<(u16, f64)> {
    let mut mask = 0u16;
    let mut inversions = 0usize;
    for (p, &i) in indices.iter().enumerate() {
        if mask >> i & 1 == 1 {
            return None;
        }
        mask |= 1 << i;
        inversions += indices[..p].iter().filter(|&&j| j > i).count();
    }
    Some((mask, if inversions % 2 == 0 { 1.0 } else { -1.0 }))
}

/// A homogeneous complex-coefficient differential form of fixed degree.
#[derive(Clone, Debug, PartialEq)]
pub struct GradedForm {
    n: usize,
    degree: usize,
    coeffs: Vec<Complex64>,
}

impl GradedForm {
    pub fn zero(n: usize, degree: usize) -> Self {
        let len = Exterior::get(n).dim_of_degree(degree);
        Self {
            n,
            degree,
            coeffs: vec![ZERO; len],
        }
    }

    /// The constant function 1 as a 0-form.
    pub fn one(n: usize) -> Self {
        let mut f = Self::zero(n, 0);
        f.coeffs[0] = Complex64::new(1.0, 0.0);
        f
    }

    /// Basis element `dx^{i_1}∧…∧dx^{i_d}` for an arbitrary index tuple (0-based).
    pub fn basis(n: usize, indices: &[usize]) -> Self {
        let mut f = Self::zero(n, indices.len());
        if let Some((mask, s)) = sort_sign(indices) {
            let ext = Exterior::get(n);
            f.coeffs[ext.index_of(mask)] = Complex64::new(s, 0.0);
        }
        f
    }

    /// 1-form `Σ c_i dx^i`.
    pub fn one_form(coeffs: &[Complex64]) -> Self {
        let n = coeffs.len();
        let mut f = Self::zero(n, 1);
        for (i, &c) in coeffs.iter().enumerate() {
            f.coeffs[i] = c;
        }
        f
    }

    /// 2-form `Σ_{i<j} a[i][j] dx^i∧dx^j` from a row-major `n×n` matrix.
    /// Only the strict upper triangle is read.
    pub fn two_form_from_matrix(n: usize, a: &[Complex64]) -> Self {
        let ext = Exterior::get(n);
        let mut f = Self::zero(n, 2);
        for i in 0..n {
            for j in i + 1..n {
                let mask = (1u16 << i) | (1u16 << j);
                f.coeffs[ext.index_of(mask)] = a[i * n + j];
            }
        }
        f
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn is_empty_degree(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficient on the increasing basis element with this mask.
    pub fn get_mask(&self, mask: u16) -> Complex64 {
        self.coeffs[Exterior::get(self.n).index_of(mask)]
    }

    pub fn set_mask(&mut self, mask: u16, v: Complex64) {
        let idx = Exterior::get(self.n).index_of(mask);
        self.coeffs[idx] = v;
    }

    /// Fully antisymmetric component `α(e_{i_1}, …, e_{i_d})`.
    pub fn component(&self, indices: &[usize]) -> Complex64 {
        debug_assert_eq!(indices.len(), self.degree);
        match sort_sign(indices) {
            Some((mask, s)) => self.get_mask(mask) * s,
            None => ZERO,
        }
    }

    /// Coefficient on `dx^1∧…∧dx^n`; zero unless the form is top degree.
    pub fn top_coefficient(&self) -> Complex64 {
        if self.degree == self.n {
            self.coeffs[0]
        } else {
            ZERO
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= s);
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.add_assign(other)?;
        Ok(out)
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.add_scaled(other, Complex64::new(1.0, 0.0))
    }

    /// `self += s · other`.
    pub fn add_scaled(&mut self, other: &Self, s: Complex64) -> Result<()> {
        if other.degree != self.degree {
            return Err(Error::FormDegreeMismatch {
                left: self.degree,
                right: other.degree,
            });
        }
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += s * b;
        }
        Ok(())
    }

    /// Exterior product. Degrees above `n` collapse to an empty top-overflow form.
    pub fn wedge(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.n, self.degree + other.degree);
        self.wedge_acc(other, Complex64::new(1.0, 0.0), &mut out);
        out
    }

    /// `out += s · (self ∧ other)`; `out` must have the sum degree.
    pub fn wedge_acc(&self, other: &Self, s: Complex64, out: &mut Self) {
        let d = self.degree + other.degree;
        debug_assert_eq!(out.degree, d);
        if d > self.n {
            return;
        }
        let ext = Exterior::get(self.n);
        let ma = ext.masks(self.degree);
        let mb = ext.masks(other.degree);
        for (ia, &a) in self.coeffs.iter().enumerate() {
            if a == ZERO {
                continue;
            }
            let mask_a = ma[ia];
            let sa = a * s;
            for (ib, &b) in other.coeffs.iter().enumerate() {
                if b == ZERO {
                    continue;
                }
                let mask_b = mb[ib];
                let sg = ext.wedge_sign(mask_a, mask_b);
                if sg == 0 {
                    continue;
                }
                let idx = ext.index_of(mask_a | mask_b);
                if sg > 0 {
                    out.coeffs[idx] += sa * b;
                } else {
                    out.coeffs[idx] -= sa * b;
                }
            }
        }
    }

    /// `k`-fold exterior power; `k = 0` gives the constant 1.
    pub fn wedge_power(&self, k: usize) -> Self {
        let mut acc = Self::one(self.n);
        for _ in 0..k {
            acc = acc.wedge(self);
        }
        acc
    }
}

/// Gram matrix `G[I][J] = det(h^{I,J})` on increasing `d`-subsets, built from
/// the inverse metric `hinv` (row-major `n×n`).
#[derive(Clone, Debug)]
pub struct GramTable {
    pub n: usize,
    pub degree: usize,
    pub entries: Vec<Complex64>,
}

impl GramTable {
    pub fn new(hinv: &[Complex64], n: usize, degree: usize) -> Self {
        let ext = Exterior::get(n);
        let masks = ext.masks(degree);
        let len = masks.len();
        let mut entries = vec![ZERO; len * len];
        let idx: Vec<Vec<usize>> = masks
            .iter()
            .map(|&m| (0..n).filter(|&i| m >> i & 1 == 1).collect())
            .collect();
        let mut sub = vec![ZERO; degree * degree];
        for a in 0..len {
            for b in a..len {
                for (r, &i) in idx[a].iter().enumerate() {
                    for (c, &j) in idx[b].iter().enumerate() {
                        sub[r * degree + c] = hinv[i * n + j];
                    }
                }
                let d = small_det(&mut sub.clone(), degree);
                entries[a * len + b] = d;
                // hinv symmetric, so the Gram matrix is symmetric
                entries[b * len + a] = d;
            }
        }
        Self { n, degree, entries }
    }

    /// Bilinear pairing `⟨α, β⟩ = Σ_{I,J} α_I β_J det(h^{I,J})`.
    pub fn pair(&self, a: &GradedForm, b: &GradedForm) -> Complex64 {
        let len = a.coeffs.len();
        let mut acc = ZERO;
        for (i, &ai) in a.coeffs.iter().enumerate() {
            if ai == ZERO {
                continue;
            }
            let row = &self.entries[i * len..(i + 1) * len];
            let s: Complex64 = row.iter().zip(&b.coeffs).map(|(g, bj)| g * bj).sum();
            acc += ai * s;
        }
        acc
    }
}

/// Gram-determinant inner product of two forms of equal degree.
pub fn form_inner_with_inverse(
    a: &GradedForm,
    b: &GradedForm,
    hinv: &[Complex64],
) -> Result<Complex64> {
    if a.degree != b.degree {
        return Err(Error::FormDegreeMismatch {
            left: a.degree,
            right: b.degree,
        });
    }
    Ok(GramTable::new(hinv, a.n, a.degree).pair(a, b))
}

/// Determinant by Gaussian elimination with partial pivoting; destroys `m`.
pub fn small_det(m: &mut [Complex64], n: usize) -> Complex64 {
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..n {
        let mut piv = col;
        let mut best = m[col * n + col].norm();
        for r in col + 1..n {
            let v = m[r * n + col].norm();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 {
            return ZERO;
        }
        if piv != col {
            for c in 0..n {
                m.swap(col * n + c, piv * n + c);
            }
            det = -det;
        }
        let p = m[col * n + col];
        det *= p;
        for r in col + 1..n {
            let f = m[r * n + col] / p;
            if f == ZERO {
                continue;
            }
            for c in col..n {
                let v = m[col * n + c];
                m[r * n + c] -= f * v;
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn random_form(rng: &mut ChaCha8Rng, n: usize, d: usize) -> GradedForm {
        let mut f = GradedForm::zero(n, d);
        for v in f.coeffs_mut() {
            *v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        f
    }

    /// Brute-force wedge via antisymmetrised components.
    fn wedge_oracle(a: &GradedForm, b: &GradedForm) -> GradedForm {
        let n = a.n();
        let (p, q) = (a.degree(), b.degree());
        let mut out = GradedForm::zero(n, p + q);
        let ext = Exterior::get(n);
        for &mask in ext.masks(p + q) {
            let idx: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
            // (α∧β)(e_I) = Σ_{shuffles} sgn α(..)β(..)
            let mut acc = ZERO;
            let total = idx.len();
            for sub in 0u32..(1 << total) {
                if sub.count_ones() as usize != p {
                    continue;
                }
                let first: Vec<usize> = (0..total)
                    .filter(|&t| sub >> t & 1 == 1)
                    .map(|t| idx[t])
                    .collect();
                let second: Vec<usize> = (0..total)
                    .filter(|&t| sub >> t & 1 == 0)
                    .map(|t| idx[t])
                    .collect();
                let mut perm = first.clone();
                perm.extend(&second);
                let (_, s) = sort_sign(&perm).unwrap();
                acc += a.component(&first) * b.component(&second) * s;
            }
            out.set_mask(mask, acc);
        }
        out
    }

    #[test]
    fn wedge_matches_shuffle_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (p, q) in [(1, 1), (2, 1), (2, 2), (1, 3), (2, 3)] {
            let a = random_form(&mut rng, 6, p);
            let b = random_form(&mut rng, 6, q);
            let w = a.wedge(&b);
            let o = wedge_oracle(&a, &b);
            for (x, y) in w.coeffs().iter().zip(o.coeffs()) {
                assert!((x - y).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn graded_commutativity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_form(&mut rng, 5, 1);
        let b = random_form(&mut rng, 5, 1);
        let ab = a.wedge(&b);
        let ba = b.wedge(&a);
        for (x, y) in ab.coeffs().iter().zip(ba.coeffs()) {
            assert!((x + y).norm() < 1e-14);
        }
        let two = random_form(&mut rng, 5, 2);
        let left = two.wedge(&a);
        let right = a.wedge(&two);
        for (x, y) in left.coeffs().iter().zip(right.coeffs()) {
            assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn overflow_degree_is_zero_form() {
        let a = GradedForm::basis(2, &[0, 1]);
        let w = a.wedge(&a);
        assert_eq!(w.degree(), 4);
        assert!(w.is_empty_degree());
    }

    #[test]
    fn component_antisymmetry() {
        let f = GradedForm::basis(4, &[2, 0]);
        assert_eq!(f.component(&[0, 2]), c(-1.0));
        assert_eq!(f.component(&[2, 0]), c(1.0));
        assert_eq!(f.component(&[2, 2]), ZERO);
    }

    #[test]
    fn gram_pairing_brute_force() {
        // ⟨α,β⟩ = (1/d!) Σ_{ordered I,J} α_I β_J Π h^{i_a j_a}
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 4;
        let mut hinv = vec![ZERO; n * n];
        for i in 0..n {
            for j in i..n {
                let v = c(rng.gen_range(-1.0..1.0)) + if i == j { c(2.0) } else { ZERO };
                hinv[i * n + j] = v;
                hinv[j * n + i] = v;
            }
        }
        let a = random_form(&mut rng, n, 2);
        let b = random_form(&mut rng, n, 2);
        let fast = form_inner_with_inverse(&a, &b, &hinv).unwrap();
        let mut slow = ZERO;
        for i1 in 0..n {
            for i2 in 0..n {
                for j1 in 0..n {
                    for j2 in 0..n {
                        slow += a.component(&[i1, i2])
                            * b.component(&[j1, j2])
                            * hinv[i1 * n + j1]
                            * hinv[i2 * n + j2];
                    }
                }
            }
        }
        slow /= 2.0;
        assert!((fast - slow).norm() < 1e-12);
    }

    #[test]
    fn determinant_of_permutation_and_diag() {
        let mut m = vec![ZERO, c(1.0), c(1.0), ZERO];
        assert_eq!(small_det(&mut m, 2), c(-1.0));
        let mut d = vec![c(2.0), ZERO, ZERO, ZERO, c(-3.0), ZERO, ZERO, ZERO, c(0.5)];
        assert!((small_det(&mut d, 3) - c(-3.0)).norm() < 1e-15);
    }
}
