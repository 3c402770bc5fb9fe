//! Scalar fields on the flat torus `[0, 2π)^d` stored as finite Fourier sums.
//!
//! A field is a map from integer wave vectors to complex coefficients. Real
//! differentiation multiplies each coefficient by `i ν_axis`, so every
//! derivative of a field is again an exact field and integration over the
//! torus just reads off the zero mode. Products convolve the supports; a hard
//! degree cap turns runaway products into an error instead of a silent
//! truncation.
//!
//! Integrands that contain `h⁻¹` are not trigonometric polynomials. Those are
//! sampled on a uniform grid ([`GridSampling`]) and summed with the periodic
//! trapezoid rule, which is spectrally accurate for smooth periodic data.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Default cap on `max_a |ν_a|` for any field.
pub const DEFAULT_DEGREE_CAP: i32 = 24;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Integer wave vector, one entry per real coordinate axis.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FrequencyVector(Vec<i32>);

impl FrequencyVector {
    pub fn new(entries: Vec<i32>) -> Self {
        Self(entries)
    }

    pub fn zero(dim: usize) -> Self {
        Self(vec![0; dim])
    }

    /// Unit wave vector `k · e_axis`.
    pub fn axis(dim: usize, axis: usize, k: i32) -> Self {
        let mut v = vec![0; dim];
        v[axis] = k;
        Self(v)
    }

    pub fn entries(&self) -> &[i32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `max_a |ν_a|`.
    pub fn degree(&self) -> i32 {
        self.0.iter().map(|k| k.abs()).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&k| k == 0)
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.0.iter().zip(x).map(|(&k, &xi)| k as f64 * xi).sum()
    }
}

impl Add for &FrequencyVector {
    type Output = FrequencyVector;
    fn add(self, rhs: &FrequencyVector) -> FrequencyVector {
        FrequencyVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Neg for &FrequencyVector {
    type Output = FrequencyVector;
    fn neg(self) -> FrequencyVector {
        FrequencyVector(self.0.iter().map(|k| -k).collect())
    }
}

impl fmt::Display for FrequencyVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// Which algebraic operation [`field_algebra`] applies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FieldOp {
    Add,
    Mul,
    /// Scale the first operand; the second is ignored.
    Scale(Complex64),
}

/// A finite Fourier sum `Σ c_ν e^{i ν·x}` on the torus of dimension `dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    dim: usize,
    cap: i32,
    real: bool,
    coeffs: BTreeMap<FrequencyVector, Complex64>,
}

impl ScalarField {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            cap: DEFAULT_DEGREE_CAP,
            real: true,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, value: Complex64) -> Self {
        let mut f = Self::zero(dim);
        f.real = value.im == 0.0;
        if value != Complex64::new(0.0, 0.0) {
            f.coeffs.insert(FrequencyVector::zero(dim), value);
        }
        f
    }

    /// Single exponential `c e^{i ν·x}`.
    pub fn mode(freq: FrequencyVector, c: Complex64) -> Result<Self> {
        Self::from_modes(freq.dim(), [(freq, c)])
    }

    /// Builds a field from `(ν, c_ν)` pairs; repeated frequencies accumulate.
    /// The reality flag is set when the coefficients satisfy `c_{-ν} = conj(c_ν)`.
    pub fn from_modes<It>(dim: usize, modes: It) -> Result<Self>
    where
        It: IntoIterator<Item = (FrequencyVector, Complex64)>,
    {
        let mut f = Self::zero(dim);
        for (nu, c) in modes {
            if nu.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: nu.dim(),
                });
            }
            if nu.degree() > f.cap {
                return Err(Error::DegreeOverflow {
                    degree: nu.degree(),
                    cap: f.cap,
                });
            }
            *f.coeffs.entry(nu).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        f.prune();
        f.real = f.check_reality(0.0);
        Ok(f)
    }

    /// `cos(k x^axis)`.
    pub fn cos_axis(dim: usize, axis: usize, k: i32) -> Self {
        let half = Complex64::new(0.5, 0.0);
        Self::from_modes(
            dim,
            [
                (FrequencyVector::axis(dim, axis, k), half),
                (FrequencyVector::axis(dim, axis, -k), half),
            ],
        )
        .expect("single-axis mode within cap")
    }

    /// `sin(k x^axis)`.
    pub fn sin_axis(dim: usize, axis: usize, k: i32) -> Self {
        let c = Complex64::new(0.0, -0.5);
        Self::from_modes(
            dim,
            [
                (FrequencyVector::axis(dim, axis, k), c),
                (FrequencyVector::axis(dim, axis, -k), -c),
            ],
        )
        .expect("single-axis mode within cap")
    }

    /// `sin(x^axis - shift)`, which vanishes at `x^axis = shift` with unit slope.
    pub fn shifted_sin_axis(dim: usize, axis: usize, shift: f64) -> Self {
        let e = Complex64::from_polar(1.0, -shift);
        let c = Complex64::new(0.0, -0.5) * e;
        Self::from_modes(
            dim,
            [
                (FrequencyVector::axis(dim, axis, 1), c),
                (FrequencyVector::axis(dim, axis, -1), c.conj()),
            ],
        )
        .expect("single-axis mode within cap")
    }

    pub fn with_cap(mut self, cap: i32) -> Result<Self> {
        let d = self.degree();
        if d > cap {
            return Err(Error::DegreeOverflow { degree: d, cap });
        }
        self.cap = cap;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cap(&self) -> i32 {
        self.cap
    }

    /// Reality flag: set when the coefficients are known to be conjugate-symmetric.
    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn coeffs(&self) -> &BTreeMap<FrequencyVector, Complex64> {
        &self.coeffs
    }

    pub fn coeff(&self, nu: &FrequencyVector) -> Complex64 {
        self.coeffs
            .get(nu)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn num_modes(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> i32 {
        self.coeffs.keys().map(|k| k.degree()).max().unwrap_or(0)
    }

    fn prune(&mut self) {
        self.coeffs.retain(|_, c| c.re != 0.0 || c.im != 0.0);
    }

    fn check_reality(&self, tol: f64) -> bool {
        self.coeffs.iter().all(|(nu, c)| {
            let partner = self.coeff(&-nu);
            (partner - c.conj()).norm() <= tol
        })
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let mut out = self.clone();
        out.cap = self.cap.max(other.cap);
        for (nu, c) in &other.coeffs {
            *out.coeffs
                .entry(nu.clone())
                .or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        out.prune();
        out.real = self.real && other.real;
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        for c in out.coeffs.values_mut() {
            *c *= s;
        }
        out.prune();
        out.real = self.real && s.im == 0.0;
        out
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    /// Product of two fields; the support is the Minkowski sum of the supports.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let cap = self.cap.max(other.cap);
        let mut out = BTreeMap::new();
        for (nu, a) in &self.coeffs {
            for (mu, b) in &other.coeffs {
                let sum = nu + mu;
                let d = sum.degree();
                if d > cap {
                    return Err(Error::DegreeOverflow { degree: d, cap });
                }
                *out.entry(sum).or_insert(Complex64::new(0.0, 0.0)) += a * b;
            }
        }
        let mut f = Self {
            dim: self.dim,
            cap,
            real: self.real && other.real,
            coeffs: out,
        };
        f.prune();
        Ok(f)
    }

    /// Complex conjugate field.
    pub fn conj(&self) -> Self {
        let coeffs = self.coeffs.iter().map(|(nu, c)| (-nu, c.conj())).collect();
        Self {
            dim: self.dim,
            cap: self.cap,
            real: self.real,
            coeffs,
        }
    }

    /// Real part `½(f + conj f)`.
    pub fn real_part(&self) -> Self {
        let mut f = self
            .add(&self.conj())
            .expect("same dimension")
            .scale_real(0.5);
        f.real = true;
        f
    }

    /// Exact partial derivative along a real axis (0-based).
    pub fn differentiate(&self, axis: usize) -> Result<Self> {
        if axis >= self.dim {
            return Err(Error::AxisOutOfRange {
                axis,
                dim: self.dim,
            });
        }
        let mut out = self.clone();
        for (nu, c) in out.coeffs.iter_mut() {
            *c *= I * nu.entries()[axis] as f64;
        }
        out.prune();
        Ok(out)
    }

    /// Wirtinger derivative along holomorphic index `alpha` (1-based):
    /// `½(∂_{x^α} - i ∂_{x^{m̄+α}})`, or the conjugated version with `+ i`.
    pub fn wirtinger(&self, alpha: usize, conjugated: bool) -> Result<Self> {
        let mbar = self.dim / 2;
        if self.dim % 2 != 0 {
            return Err(Error::DimensionMismatch {
                expected: 2 * mbar + 2,
                got: self.dim,
            });
        }
        if alpha == 0 || alpha > mbar {
            return Err(Error::IndexOutOfRange {
                index: alpha,
                max: mbar,
            });
        }
        let sign = if conjugated { 1.0 } else { -1.0 };
        let (ax, ay) = (alpha - 1, mbar + alpha - 1);
        let mut out = self.clone();
        for (nu, c) in out.coeffs.iter_mut() {
            let e = nu.entries();
            // ∂_x ↦ i ν_x, ∂_y ↦ i ν_y
            let symbol = 0.5 * (I * e[ax] as f64 + sign * I * (I * e[ay] as f64));
            *c *= symbol;
        }
        out.prune();
        out.real = false;
        Ok(out)
    }

    pub fn evaluate(&self, x: &[f64]) -> Complex64 {
        self.coeffs
            .iter()
            .map(|(nu, c)| c * Complex64::from_polar(1.0, nu.dot(x)))
            .sum()
    }

    /// `∫_{T^d} f = (2π)^d c_0`, exact.
    pub fn integrate_torus(&self) -> Complex64 {
        self.coeff(&FrequencyVector::zero(self.dim)) * torus_volume(self.dim)
    }

    /// Samples the field on the uniform grid with `n` points per axis.
    pub fn sample(&self, n: usize) -> GridSampling<Complex64> {
        GridSampling::from_fn(self.dim, n, |x| self.evaluate(x))
    }
}

/// Applies one of the elementary field operations.
pub fn field_algebra(a: &ScalarField, b: &ScalarField, op: FieldOp) -> Result<ScalarField> {
    match op {
        FieldOp::Add => a.add(b),
        FieldOp::Mul => a.mul(b),
        FieldOp::Scale(s) => Ok(a.scale(s)),
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &ScalarField) -> ScalarField {
        ScalarField::add(self, rhs).expect("field dimensions agree")
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        ScalarField::sub(self, rhs).expect("field dimensions agree")
    }
}

pub fn torus_volume(dim: usize) -> f64 {
    (2.0 * PI).powi(dim as i32)
}

/// Values on the uniform `n^dim` grid over `[0, 2π)^dim`.
///
/// Linear index `idx` maps to grid coordinates with the last axis varying
/// fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSampling<T> {
    pub dim: usize,
    pub points_per_axis: usize,
    pub values: Vec<T>,
}

impl<T: Send> GridSampling<T> {
    pub fn from_fn<F>(dim: usize, n: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> T + Sync,
    {
        let total = n.pow(dim as u32);
        let values = (0..total)
            .into_par_iter()
            .map(|idx| f(&grid_point(idx, n, dim)))
            .collect();
        Self {
            dim,
            points_per_axis: n,
            values,
        }
    }

    /// Like [`GridSampling::from_fn`] but the closure may fail; the first
    /// failure in index order is returned.
    pub fn try_from_fn<F>(dim: usize, n: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Result<T> + Sync,
    {
        let total = n.pow(dim as u32);
        let values: Vec<Result<T>> = (0..total)
            .into_par_iter()
            .map(|idx| f(&grid_point(idx, n, dim)))
            .collect();
        let values = values.into_iter().collect::<Result<Vec<T>>>()?;
        Ok(Self {
            dim,
            points_per_axis: n,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cell_volume(&self) -> f64 {
        (2.0 * PI / self.points_per_axis as f64).powi(self.dim as i32)
    }
}

/// Coordinates of grid point `idx` (last axis fastest).
pub fn grid_point(mut idx: usize, n: usize, dim: usize) -> Vec<f64> {
    let h = 2.0 * PI / n as f64;
    let mut x = vec![0.0; dim];
    for a in (0..dim).rev() {
        x[a] = (idx % n) as f64 * h;
        idx /= n;
    }
    x
}

/// Pairwise summation with a fixed split order, independent of thread count.
pub fn pairwise_sum<T>(values: &[T]) -> T
where
    T: Copy + Add<Output = T> + Default,
{
    const BLOCK: usize = 16;
    if values.len() <= BLOCK {
        return values.iter().fold(T::default(), |acc, &v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Periodic trapezoid rule: `(2π/N)^d Σ values`.
pub fn quadrature(values: &GridSampling<f64>) -> Result<f64> {
    if let Some(index) = values.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(pairwise_sum(&values.values) * values.cell_volume())
}

/// Complex-valued variant of [`quadrature`].
pub fn quadrature_complex(values: &GridSampling<Complex64>) -> Result<Complex64> {
    if let Some(index) = values.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(pairwise_sum(&values.values) * values.cell_volume())
}

/// Points per deterministic reduction chunk in [`integrate_grid`].
const CHUNK: usize = 1024;

/// Periodic trapezoid rule for a vector-valued integrand on the `N^dim` grid.
///
/// Points are processed in fixed chunks that are summed in index order, so
/// the result does not depend on the number of worker threads. The first
/// failing point in index order is reported.
pub fn integrate_grid<F>(dim: usize, n: usize, slots: usize, f: F) -> Result<Vec<Complex64>>
where
    F: Fn(&[f64]) -> Result<Vec<Complex64>> + Sync,
{
    let total = n.pow(dim as u32);
    let chunks = total.div_ceil(CHUNK);
    let partial: Vec<Result<Vec<Complex64>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(total);
            let mut cols = vec![Vec::with_capacity(hi - lo); slots];
            for idx in lo..hi {
                let v = f(&grid_point(idx, n, dim))?;
                if v.iter().any(|z| !z.is_finite()) {
                    return Err(Error::NonFinite { index: idx });
                }
                for (col, z) in cols.iter_mut().zip(v) {
                    col.push(z);
                }
            }
            Ok(cols.iter().map(|col| pairwise_sum(col)).collect())
        })
        .collect();
    let partial = partial.into_iter().collect::<Result<Vec<_>>>()?;
    let cell = (2.0 * PI / n as f64).powi(dim as i32);
    Ok((0..slots)
        .map(|s| {
            let col: Vec<Complex64> = partial.iter().map(|p| p[s]).collect();
            pairwise_sum(&col) * cell
        })
        .collect())
}

/// Per-point phase evaluator for a fixed list of wave vectors.
///
/// Used in the hot loops where many fields share one frequency support:
/// `phases(x)[u] = e^{i ν_u·x}`.
#[derive(Clone, Debug)]
pub struct PhaseTable {
    dim: usize,
    max_degree: i32,
    freqs: Vec<Vec<i32>>,
}

impl PhaseTable {
    pub fn new(dim: usize, freqs: Vec<FrequencyVector>) -> Self {
        let max_degree = freqs.iter().map(|f| f.degree()).max().unwrap_or(0);
        Self {
            dim,
            max_degree,
            freqs: freqs.into_iter().map(|f| f.0).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn freq(&self, u: usize) -> &[i32] {
        &self.freqs[u]
    }

    pub fn phases(&self, x: &[f64], out: &mut Vec<Complex64>) {
        let d = self.max_degree as usize;
        // powers[a][d + k] = e^{i k x_a}, k in -d..=d
        let width = 2 * d + 1;
        let mut powers = vec![Complex64::new(1.0, 0.0); self.dim * width];
        for a in 0..self.dim {
            let w = Complex64::from_polar(1.0, x[a]);
            let wi = w.conj();
            let row = &mut powers[a * width..(a + 1) * width];
            for k in 1..=d {
                row[d + k] = row[d + k - 1] * w;
                row[d - k] = row[d - k + 1] * wi;
            }
        }
        out.clear();
        out.extend(self.freqs.iter().map(|nu| {
            let mut p = Complex64::new(1.0, 0.0);
            for (a, &k) in nu.iter().enumerate() {
                if k != 0 {
                    p *= powers[a * width + (d as i64 + k as i64) as usize];
                }
            }
            p
        }));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    pub(crate) fn random_field(
        rng: &mut ChaCha8Rng,
        dim: usize,
        modes: usize,
        deg: i32,
    ) -> ScalarField {
        let mut list = Vec::new();
        for _ in 0..modes {
            let nu: Vec<i32> = (0..dim).map(|_| rng.gen_range(-deg..=deg)).collect();
            let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let nu = FrequencyVector::new(nu);
            list.push((-&nu, z.conj()));
            list.push((nu, z));
        }
        ScalarField::from_modes(dim, list).unwrap()
    }

    #[test]
    fn add_zero_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_field(&mut rng, 4, 5, 2);
        let z = ScalarField::zero(4);
        assert_eq!(field_algebra(&z, &f, FieldOp::Add).unwrap(), f);
    }

    #[test]
    fn single_mode_product() {
        let nu = FrequencyVector::new(vec![1, -2]);
        let mu = FrequencyVector::new(vec![3, 1]);
        let a = ScalarField::mode(nu.clone(), c(1.0)).unwrap();
        let b = ScalarField::mode(mu.clone(), c(1.0)).unwrap();
        let p = a.mul(&b).unwrap();
        assert_eq!(p.num_modes(), 1);
        assert_eq!(p.coeff(&(&nu + &mu)), c(1.0));
    }

    #[test]
    fn cos_squared_matches_pointwise_product() {
        let f = ScalarField::cos_axis(2, 0, 1);
        let sq = f.mul(&f).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..11 {
            let x: [f64; 2] = [rng.gen_range(0.0..6.3), rng.gen_range(0.0..6.3)];
            let direct = x[0].cos() * x[0].cos();
            assert!((sq.evaluate(&x).re - direct).abs() < 1e-14);
            // ½ + ½ cos 2x
            assert!((sq.evaluate(&x).re - (0.5 + 0.5 * (2.0 * x[0]).cos())).abs() < 1e-14);
        }
    }

    #[test]
    fn degree_cap_overflow_is_an_error() {
        let f = ScalarField::cos_axis(1, 0, 20);
        assert!(matches!(f.mul(&f), Err(Error::DegreeOverflow { .. })));
        let g = ScalarField::cos_axis(1, 0, 3).with_cap(4).unwrap();
        assert!(g.mul(&g).is_err());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = ScalarField::zero(2);
        let b = ScalarField::zero(3);
        assert!(matches!(a.add(&b), Err(Error::DimensionMismatch { .. })));
        assert!(a.mul(&b).is_err());
    }

    #[test]
    fn derivative_basics() {
        let k = ScalarField::constant(2, c(3.0));
        assert!(k.differentiate(0).unwrap().is_zero());
        let s = ScalarField::sin_axis(2, 0, 1);
        let ds = s.differentiate(0).unwrap();
        assert_eq!(ds, ScalarField::cos_axis(2, 0, 1));
        assert!(s.differentiate(2).is_err());
    }

    #[test]
    fn mixed_partials_commute_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let f = random_field(&mut rng, 4, 6, 3);
            let a = f.differentiate(0).unwrap().differentiate(1).unwrap();
            let b = f.differentiate(1).unwrap().differentiate(0).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn wirtinger_of_single_exponential() {
        let f = ScalarField::mode(FrequencyVector::axis(2, 0, 1), c(1.0)).unwrap();
        let d = f.wirtinger(1, false).unwrap();
        assert_eq!(
            d.coeff(&FrequencyVector::axis(2, 0, 1)),
            Complex64::new(0.0, 0.5)
        );
        // independent of x: zero
        let g = ScalarField::constant(2, c(2.0));
        assert!(g.wirtinger(1, false).unwrap().is_zero());
        assert!(g.wirtinger(2, false).is_err());
    }

    #[test]
    fn wirtinger_sum_and_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_field(&mut rng, 4, 6, 2);
        for alpha in 1..=2 {
            let d = f.wirtinger(alpha, false).unwrap();
            let db = f.wirtinger(alpha, true).unwrap();
            let sum = d.add(&db).unwrap();
            let dx = f.differentiate(alpha - 1).unwrap();
            for (nu, v) in dx.coeffs() {
                assert!((sum.coeff(nu) - v).norm() < 1e-15);
            }
            let diff = d.sub(&db).unwrap();
            let dy = f
                .differentiate(alpha + 1)
                .unwrap()
                .scale(Complex64::new(0.0, -1.0));
            for (nu, v) in dy.coeffs() {
                assert!((diff.coeff(nu) - v).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn complex_hessian_of_real_field_is_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let phi = random_field(&mut rng, 4, 5, 2);
        for _ in 0..10 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..6.3)).collect();
            for a in 1..=2 {
                for b in 1..=2 {
                    let hab = phi.wirtinger(a, false).unwrap().wirtinger(b, true).unwrap();
                    let hba = phi.wirtinger(b, false).unwrap().wirtinger(a, true).unwrap();
                    assert!((hab.evaluate(&x).conj() - hba.evaluate(&x)).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn torus_integrals() {
        let one = ScalarField::constant(3, c(1.0));
        assert!((one.integrate_torus().re - torus_volume(3)).abs() < 1e-12);
        let cs = ScalarField::cos_axis(3, 0, 1);
        assert_eq!(cs.integrate_torus(), c(0.0));
        let sq = cs.mul(&cs).unwrap();
        // trapezoid oracle at N = 16
        let grid = GridSampling::from_fn(3, 16, |x| x[0].cos().powi(2));
        let trap = quadrature(&grid).unwrap();
        assert!((sq.integrate_torus().re - trap).abs() < 1e-10);
        assert!((sq.integrate_torus().re - 0.5 * torus_volume(3)).abs() < 1e-10);
    }

    #[test]
    fn quadrature_constant_and_nyquist() {
        let g = GridSampling::from_fn(2, 8, |_| 2.5);
        assert_eq!(quadrature(&g).unwrap(), 2.5 * torus_volume(2));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = random_field(&mut rng, 2, 6, 3);
        let n = 2 * 3 + 2;
        let s = GridSampling::from_fn(2, n, |x| f.evaluate(x).re);
        assert!((quadrature(&s).unwrap() - f.integrate_torus().re).abs() < 1e-12);
    }

    #[test]
    fn quadrature_self_convergence() {
        // 1/(2 + cos x) = (2/√3) Σ (-r)^|k| e^{ikx}, r = 2 - √3, so the N-point
        // trapezoid error is exactly (2π/√3)·2r^N/(1 - r^N) for even N.
        let f = |x: &[f64]| 1.0 / (2.0 + x[0].cos());
        let exact = 2.0 * PI / 3f64.sqrt();
        let r = 2.0 - 3f64.sqrt();
        for n in [16usize, 20, 32, 40] {
            let q = quadrature(&GridSampling::from_fn(1, n, f)).unwrap();
            let predicted = exact * 2.0 * r.powi(n as i32) / (1.0 - r.powi(n as i32));
            assert!((q - exact - predicted).abs() < 1e-14, "n = {n}");
        }
        let q20 = quadrature(&GridSampling::from_fn(1, 20, f)).unwrap();
        let q40 = quadrature(&GridSampling::from_fn(1, 40, f)).unwrap();
        assert!((q20 - q40).abs() < 1e-10);
    }

    #[test]
    fn quadrature_rejects_non_finite() {
        let g = GridSampling::from_fn(1, 4, |x| if x[0] > 3.0 { f64::NAN } else { 1.0 });
        assert!(matches!(quadrature(&g), Err(Error::NonFinite { index: 2 })));
    }

    #[test]
    fn real_fields_evaluate_real() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let f = random_field(&mut rng, 4, 8, 3);
        assert!(f.is_real());
        for _ in 0..20 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..6.3)).collect();
            assert!(f.evaluate(&x).im.abs() < 1e-14);
        }
    }

    #[test]
    fn phase_table_matches_direct_evaluation() {
        let freqs = vec![
            FrequencyVector::new(vec![1, -2, 0]),
            FrequencyVector::new(vec![0, 0, 3]),
        ];
        let t = PhaseTable::new(3, freqs.clone());
        let x = [0.3, 1.7, 4.2];
        let mut out = Vec::new();
        t.phases(&x, &mut out);
        for (nu, p) in freqs.iter().zip(&out) {
            assert!((p - Complex64::from_polar(1.0, nu.dot(&x))).norm() < 1e-14);
        }
    }

    #[test]
    fn pairwise_sum_is_order_fixed() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        assert_eq!(
            pairwise_sum(&v).to_bits(),
            pairwise_sum(&v.clone()).to_bits()
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn leibniz_rule_holds(seed in 0u64..1000, axis in 0usize..4) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let f = random_field(&mut rng, 4, 4, 2);
                let g = random_field(&mut rng, 4, 4, 2);
                let lhs = f.mul(&g).unwrap().differentiate(axis).unwrap();
                let rhs = f.differentiate(axis).unwrap().mul(&g).unwrap()
                    .add(&f.mul(&g.differentiate(axis).unwrap()).unwrap()).unwrap();
                let diff = lhs.sub(&rhs).unwrap();
                for v in diff.coeffs().values() {
                    prop_assert!(v.norm() < 1e-12);
                }
            }

            #[test]
            fn quadrature_agrees_with_exact_integral(seed in 0u64..1000) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let f = random_field(&mut rng, 2, 5, 3);
                let s = GridSampling::from_fn(2, 8, |x| f.evaluate(x).re);
                prop_assert!((quadrature(&s).unwrap() - f.integrate_torus().re).abs() < 1e-12);
            }
        }
    }
}
