//! J-invariant symmetric 2-tensor fields and metrics on the torus.
//!
//! A [`MetricField`] is a constant diagonal background plus a
//! [`SymmetricTensorField`] of Fourier components. The potential route adds
//! the realified complex Hessian `∂∂̄φ`; the raw route adds arbitrary
//! J-invariant symmetric component fields (used for non-Kähler variations).
//!
//! Pointwise work goes through [`TensorJet`]: values, first and second real
//! derivatives of every component at one point, all exact.

use std::collections::BTreeSet;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::structure::{ComplexStructure, Signature};
use crate::error::{Error, Result};
use crate::field::{FrequencyVector, PhaseTable, ScalarField};
use crate::forms::small_det;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Number of pseudo-random probe points used for the nondegeneracy check.
pub const PROBE_POINTS: usize = 17;
/// Minimum `|det h|` accepted at a probe point.
pub const DEGENERACY_THRESHOLD: f64 = 1e-8;

/// Value, gradient and Hessian of a symmetric `n×n` tensor at one point.
///
/// Layout: `h[i*n+j]`, `dh[(k*n+i)*n+j] = ∂_k h_ij`,
/// `d2h[((k*n+l)*n+i)*n+j] = ∂_k ∂_l h_ij`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorJet {
    pub n: usize,
    pub h: Vec<Complex64>,
    pub dh: Vec<Complex64>,
    pub d2h: Vec<Complex64>,
}

impl TensorJet {
    pub fn zero(n: usize) -> Self {
        Self {
            n,
            h: vec![ZERO; n * n],
            dh: vec![ZERO; n * n * n],
            d2h: vec![ZERO; n * n * n * n],
        }
    }

    /// `self + s · other`.
    pub fn axpy(&self, s: Complex64, other: &TensorJet) -> TensorJet {
        let comb = |a: &[Complex64], b: &[Complex64]| -> Vec<Complex64> {
            a.iter().zip(b).map(|(x, y)| x + s * y).collect()
        };
        TensorJet {
            n: self.n,
            h: comb(&self.h, &other.h),
            dh: comb(&self.dh, &other.dh),
            d2h: comb(&self.d2h, &other.d2h),
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.h
            .iter()
            .chain(&self.dh)
            .chain(&self.d2h)
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }
}

/// Symmetric `n×n` matrix of scalar fields with a compiled evaluator.
#[derive(Clone, Debug)]
pub struct SymmetricTensorField {
    n: usize,
    comps: Vec<ScalarField>,
    phases: PhaseTable,
    // for each packed (i<=j) component: (phase index, coefficient)
    terms: Vec<Vec<(usize, Complex64)>>,
}

fn packed(n: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            v.push((i, j));
        }
    }
    v
}

impl SymmetricTensorField {
    /// Builds from a full row-major `n×n` component matrix.
    pub fn new(n: usize, comps: Vec<ScalarField>) -> Result<Self> {
        if comps.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: comps.len(),
            });
        }
        for c in &comps {
            if c.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: c.dim(),
                });
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                if comps[i * n + j] != comps[j * n + i] {
                    return Err(Error::NotSymmetric);
                }
            }
        }
        let mut freqs = BTreeSet::new();
        for c in &comps {
            freqs.extend(c.coeffs().keys().cloned());
        }
        let freqs: Vec<FrequencyVector> = freqs.into_iter().collect();
        let terms = packed(n)
            .into_iter()
            .map(|(i, j)| {
                comps[i * n + j]
                    .coeffs()
                    .iter()
                    .map(|(nu, c)| (freqs.binary_search(nu).expect("frequency present"), *c))
                    .collect()
            })
            .collect();
        Ok(Self {
            n,
            comps,
            phases: PhaseTable::new(n, freqs),
            terms,
        })
    }

    pub fn zero(n: usize) -> Self {
        Self::new(n, vec![ScalarField::zero(n); n * n]).expect("zero tensor is valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn component(&self, i: usize, j: usize) -> &ScalarField {
        &self.comps[i * self.n + j]
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.comps
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(|c| c.is_zero())
    }

    pub fn degree(&self) -> i32 {
        self.comps.iter().map(|c| c.degree()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.add(b))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.n, comps)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.n, self.comps.iter().map(|c| c.scale(s)).collect())
            .expect("scaling keeps symmetry")
    }

    pub fn value(&self, x: &[f64]) -> Vec<Complex64> {
        self.comps.iter().map(|c| c.evaluate(x)).collect()
    }

    /// Exact value, gradient and Hessian at `x`.
    pub fn jet(&self, x: &[f64]) -> TensorJet {
        let n = self.n;
        let mut jet = TensorJet::zero(n);
        if self.phases.is_empty() {
            return jet;
        }
        let mut phase = Vec::with_capacity(self.phases.len());
        self.phases.phases(x, &mut phase);
        for (p, &(i, j)) in packed(n).iter().enumerate() {
            let mut v = ZERO;
            let mut d = [ZERO; 8];
            let mut d2 = [ZERO; 64];
            for &(u, c) in &self.terms[p] {
                let e = c * phase[u];
                v += e;
                let nu = self.phases.freq(u);
                for k in 0..n {
                    if nu[k] == 0 {
                        continue;
                    }
                    let nk = nu[k] as f64;
                    d[k] += I * nk * e;
                    for l in k..n {
                        if nu[l] != 0 {
                            d2[k * 8 + l] -= nk * nu[l] as f64 * e;
                        }
                    }
                }
            }
            jet.h[i * n + j] = v;
            jet.h[j * n + i] = v;
            for k in 0..n {
                jet.dh[(k * n + i) * n + j] = d[k];
                jet.dh[(k * n + j) * n + i] = d[k];
                for l in k..n {
                    let w = d2[k * 8 + l];
                    for (a, b) in [(k, l), (l, k)] {
                        jet.d2h[((a * n + b) * n + i) * n + j] = w;
                        jet.d2h[((a * n + b) * n + j) * n + i] = w;
                    }
                }
            }
        }
        jet
    }
}

/// Realifies a complex Hessian `H_{ab̄}` (given as fields) into real components.
///
/// With `∂_x = ∂_z + ∂_z̄` and `∂_y = i(∂_z - ∂_z̄)`:
/// `g(x_a,x_b) = g(y_a,y_b) = H_{ab̄} + H_{bā}`,
/// `g(x_a,y_b) = i(H_{bā} - H_{ab̄})`. No conjugation is used, so complex
/// continuations of the metric stay polynomial.
pub fn realify_hermitian(mbar: usize, herm: &[ScalarField]) -> Result<Vec<ScalarField>> {
    let n = 2 * mbar;
    let mut g = vec![ScalarField::zero(n); n * n];
    for a in 0..mbar {
        for b in 0..mbar {
            let hab = &herm[a * mbar + b];
            let hba = &herm[b * mbar + a];
            let sym = hab.add(hba)?;
            g[a * n + b] = sym.clone();
            g[(a + mbar) * n + b + mbar] = sym;
            let xy = hba.sub(hab)?.scale(I);
            g[a * n + b + mbar] = xy.clone();
            g[(b + mbar) * n + a] = xy;
        }
    }
    Ok(g)
}

/// Complex Hessian `∂_{z^a} ∂_{z̄^b} φ` as an `m̄×m̄` matrix of fields.
pub fn complex_hessian(phi: &ScalarField) -> Result<Vec<ScalarField>> {
    let mbar = phi.dim() / 2;
    let mut out = Vec::with_capacity(mbar * mbar);
    for a in 1..=mbar {
        let da = phi.wirtinger(a, false)?;
        for b in 1..=mbar {
            out.push(da.wirtinger(b, true)?);
        }
    }
    Ok(out)
}

/// A J-invariant symmetric 2-tensor field `h = background + components`.
#[derive(Clone, Debug)]
pub struct MetricField {
    mbar: usize,
    signature: Signature,
    background: Vec<Complex64>,
    potential: Option<ScalarField>,
    has_raw: bool,
    tensor: SymmetricTensorField,
}

impl MetricField {
    pub fn mbar(&self) -> usize {
        self.mbar
    }

    pub fn n(&self) -> usize {
        2 * self.mbar
    }

    pub fn signature(&self) -> Signature {
        self.signature
    }

    pub fn background(&self) -> &[Complex64] {
        &self.background
    }

    pub fn potential(&self) -> Option<&ScalarField> {
        self.potential.as_ref()
    }

    pub fn has_raw_components(&self) -> bool {
        self.has_raw
    }

    /// Non-background part of the metric.
    pub fn perturbation(&self) -> &SymmetricTensorField {
        &self.tensor
    }

    pub fn structure(&self) -> ComplexStructure {
        ComplexStructure::new(self.mbar)
    }

    /// Full component field `h_ij` including the background.
    pub fn component_field(&self, i: usize, j: usize) -> ScalarField {
        let c = self.tensor.component(i, j).clone();
        if i == j {
            c.add(&ScalarField::constant(self.n(), self.background[i]))
                .expect("same dimension")
        } else {
            c
        }
    }

    /// Exact jet of the full metric at `x`.
    pub fn jet(&self, x: &[f64]) -> TensorJet {
        let mut jet = self.tensor.jet(x);
        let n = self.n();
        for i in 0..n {
            jet.h[i * n + i] += self.background[i];
        }
        jet
    }

    pub fn value(&self, x: &[f64]) -> Vec<Complex64> {
        self.jet_value_only(x)
    }

    fn jet_value_only(&self, x: &[f64]) -> Vec<Complex64> {
        let n = self.n();
        let mut h = self.tensor.value(x);
        for i in 0..n {
            h[i * n + i] += self.background[i];
        }
        h
    }

    pub fn det(&self, x: &[f64]) -> Complex64 {
        let mut h = self.value(x);
        small_det(&mut h, self.n())
    }

    /// Same metric with a different constant background diagonal.
    pub fn with_background(&self, background: Vec<Complex64>) -> Result<Self> {
        if background.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: background.len(),
            });
        }
        let out = Self {
            background,
            ..self.clone()
        };
        out.check_nondegenerate()?;
        Ok(out)
    }

    /// `h + s·κ` as a new metric field (the result is tagged as carrying raw
    /// components unless `κ` is zero).
    pub fn add_tensor(&self, kappa: &SymmetricTensorField, s: Complex64) -> Result<Self> {
        let tensor = self.tensor.add(&kappa.scale(s))?;
        let out = Self {
            tensor,
            has_raw: self.has_raw || !kappa.is_zero(),
            ..self.clone()
        };
        out.check_nondegenerate()?;
        Ok(out)
    }

    /// Deterministic pseudo-random probe points.
    pub fn probe_points(n: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0017);
        (0..PROBE_POINTS)
            .map(|_| {
                (0..n)
                    .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
                    .collect()
            })
            .collect()
    }

    pub fn check_nondegenerate(&self) -> Result<()> {
        for p in Self::probe_points(self.n()) {
            let det = self.det(&p).norm();
            if !(det >= DEGENERACY_THRESHOLD) {
                return Err(Error::Degenerate { det, point: p });
            }
        }
        Ok(())
    }
}

/// Max-norm of `J^T A J - A`.
pub fn j_invariance_defect(mbar: usize, a: &[Complex64]) -> f64 {
    let j = ComplexStructure::new(mbar);
    j.pullback(a)
        .iter()
        .zip(a)
        .map(|(p, q)| (p - q).norm())
        .fold(0.0, f64::max)
}

/// Builds `h = background(signature) + realify(∂∂̄φ) + raw`.
///
/// The potential must be real; raw components must be symmetric and
/// J-invariant. The result is probed for nondegeneracy at
/// [`PROBE_POINTS`] points.
pub fn build_metric(
    signature: Signature,
    potential: Option<&ScalarField>,
    raw: Option<&[ScalarField]>,
) -> Result<MetricField> {
    let mbar = signature.mbar();
    let n = 2 * mbar;
    let mut tensor = SymmetricTensorField::zero(n);
    if let Some(phi) = potential {
        if phi.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: phi.dim(),
            });
        }
        if !phi.is_real() {
            return Err(Error::Scenario(
                "Kähler potential must be a real field".into(),
            ));
        }
        let herm = complex_hessian(phi)?;
        let comps = realify_hermitian(mbar, &herm)?;
        tensor = SymmetricTensorField::new(n, comps)?;
    }
    let has_raw = raw.is_some_and(|r| r.iter().any(|c| !c.is_zero()));
    if let Some(raw) = raw {
        let raw_tensor = SymmetricTensorField::new(n, raw.to_vec())?;
        check_j_invariant_fields(mbar, &raw_tensor)?;
        tensor = tensor.add(&raw_tensor)?;
    }
    let metric = MetricField {
        mbar,
        signature,
        background: signature.background(),
        potential: potential.cloned(),
        has_raw,
        tensor,
    };
    metric.check_nondegenerate()?;
    Ok(metric)
}

/// Verifies `J^T κ J = κ` coefficient-wise on a field matrix.
pub fn check_j_invariant_fields(mbar: usize, t: &SymmetricTensorField) -> Result<()> {
    let j = ComplexStructure::new(mbar);
    let n = 2 * mbar;
    let mut defect: f64 = 0.0;
    for a in 0..n {
        let (ta, sa) = j.apply_basis(a);
        for b in 0..n {
            let (tb, sb) = j.apply_basis(b);
            let pulled = t.component(ta, tb).scale_real(sa * sb);
            let diff = pulled.sub(t.component(a, b))?;
            for c in diff.coeffs().values() {
                defect = defect.max(c.norm());
            }
        }
    }
    if defect > 1e-12 {
        return Err(Error::NotJInvariant { defect });
    }
    Ok(())
}

/// J-averages an arbitrary symmetric field matrix: `½(κ + J^T κ J)`.
pub fn j_average_fields(mbar: usize, comps: &[ScalarField]) -> Result<Vec<ScalarField>> {
    let j = ComplexStructure::new(mbar);
    let n = 2 * mbar;
    let mut out = Vec::with_capacity(n * n);
    for a in 0..n {
        let (ta, sa) = j.apply_basis(a);
        for b in 0..n {
            let (tb, sb) = j.apply_basis(b);
            let pulled = comps[ta * n + tb].scale_real(sa * sb);
            out.push(pulled.add(&comps[a * n + b])?.scale_real(0.5));
        }
    }
    Ok(out)
}
