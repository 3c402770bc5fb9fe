//! Invariant polynomials in trace-monomial form and their Chern–Weil
//! evaluation on curvature, plus the Euler integrand.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::field::grid_point;
use crate::forms::{Exterior, GradedForm};
use crate::geometry::connection::{CurvatureEndomorphism, PointGeometry};
use crate::geometry::kahler::{kahler_defect, kahler_form_at};
use crate::geometry::metric::MetricField;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// `i / 2π`.
pub fn chern_scale() -> Complex64 {
    Complex64::new(0.0, 1.0 / (2.0 * PI))
}

/// A polynomial `Σ_λ c_λ Π_i tr(A^{λ_i})` over partitions `λ` of `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct InvariantPolynomial {
    k: usize,
    ell: usize,
    /// Partitions stored with parts in decreasing order.
    terms: BTreeMap<Vec<usize>, Complex64>,
}

fn normalize(mut parts: Vec<usize>) -> Vec<usize> {
    parts.sort_unstable_by(|a, b| b.cmp(a));
    parts
}

/// All partitions of `k` with parts in decreasing order.
pub fn partitions(k: usize) -> Vec<Vec<usize>> {
    fn rec(left: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for p in (1..=left.min(max)).rev() {
            cur.push(p);
            rec(left - p, p, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, k, &mut Vec::new(), &mut out);
    out
}

impl InvariantPolynomial {
    pub fn new(k: usize, ell: usize, terms: BTreeMap<Vec<usize>, Complex64>) -> Result<Self> {
        let mut norm = BTreeMap::new();
        for (p, c) in terms {
            if p.iter().sum::<usize>() != k || p.contains(&0) {
                return Err(Error::Scenario(format!(
                    "partition {p:?} does not sum to degree {k}"
                )));
            }
            *norm.entry(normalize(p)).or_insert(ZERO) += c;
        }
        Ok(Self {
            k,
            ell,
            terms: norm,
        })
    }

    /// `(i/2π)^k Π tr(A^{λ_i})` for one partition `λ`.
    pub fn trace_monomial(parts: &[usize], ell: usize) -> Result<Self> {
        let k = parts.iter().sum();
        let mut t = BTreeMap::new();
        t.insert(parts.to_vec(), chern_scale().powu(k as u32));
        Self::new(k, ell, t)
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn matrix_size(&self) -> usize {
        self.ell
    }

    pub fn terms(&self) -> &BTreeMap<Vec<usize>, Complex64> {
        &self.terms
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            terms: self.terms.iter().map(|(p, c)| (p.clone(), c * s)).collect(),
            ..self.clone()
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.k != other.k || self.ell != other.ell {
            return Err(Error::FormDegreeMismatch {
                left: self.k,
                right: other.k,
            });
        }
        let mut terms = self.terms.clone();
        for (p, c) in &other.terms {
            *terms.entry(p.clone()).or_insert(ZERO) += c;
        }
        Ok(Self {
            terms,
            ..self.clone()
        })
    }

    /// Product of invariant polynomials; degrees add.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.ell != other.ell {
            return Err(Error::DimensionMismatch {
                expected: self.ell,
                got: other.ell,
            });
        }
        let mut terms = BTreeMap::new();
        for (p, c) in &self.terms {
            for (q, d) in &other.terms {
                let mut r = p.clone();
                r.extend_from_slice(q);
                *terms.entry(normalize(r)).or_insert(ZERO) += c * d;
            }
        }
        Self::new(self.k + other.k, self.ell, terms)
    }

    /// Value on a plain complex matrix (row-major `ℓ×ℓ`).
    pub fn evaluate_matrix(&self, a: &[Complex64]) -> Complex64 {
        let l = self.ell;
        let mut traces = vec![ZERO; self.k + 1];
        let mut power = vec![ZERO; l * l];
        for i in 0..l {
            power[i * l + i] = ONE;
        }
        for tr in traces.iter_mut().skip(1) {
            let mut next = vec![ZERO; l * l];
            for r in 0..l {
                for c in 0..l {
                    for e in 0..l {
                        next[r * l + c] += power[r * l + e] * a[e * l + c];
                    }
                }
            }
            power = next;
            *tr = (0..l).map(|i| power[i * l + i]).sum();
        }
        self.terms
            .iter()
            .map(|(p, c)| c * p.iter().map(|&j| traces[j]).product::<Complex64>())
            .sum()
    }
}

impl fmt::Display for InvariantPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(p, c)| {
                let tr: Vec<String> = p.iter().map(|j| format!("tr(A^{j})")).collect();
                format!("({c}) {}", tr.join(" "))
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Degree-`j` Chern polynomial `e_j((i/2π) A)` in trace-monomial form
/// (Newton identities: `e_j = Σ_λ (-1)^{j-len λ} p_λ / z_λ`).
pub fn chern_polynomial(j: usize, ell: usize) -> Result<InvariantPolynomial> {
    if j == 0 || j > ell {
        return Err(Error::ChernIndex { j, l: ell });
    }
    let scale = chern_scale().powu(j as u32);
    let mut terms = BTreeMap::new();
    for p in partitions(j) {
        let mut z = 1.0;
        let mut counts = BTreeMap::new();
        for &part in &p {
            *counts.entry(part).or_insert(0usize) += 1;
        }
        for (&part, &m) in &counts {
            z *= (part as f64).powi(m as i32) * (1..=m).map(|i| i as f64).product::<f64>();
        }
        let sign = if (j - p.len()) % 2 == 0 { 1.0 } else { -1.0 };
        terms.insert(p, scale * (sign / z));
    }
    InvariantPolynomial::new(j, ell, terms)
}

/// Product of form-valued matrices, `(AB)_{ab} = Σ_c A_{ac} ∧ B_{cb}`.
fn form_matrix_mul(a: &[GradedForm], b: &[GradedForm], l: usize) -> Vec<GradedForm> {
    let n = a[0].n();
    let d = a[0].degree() + b[0].degree();
    let mut out = vec![GradedForm::zero(n, d); l * l];
    for r in 0..l {
        for c in 0..l {
            for e in 0..l {
                a[r * l + e].wedge_acc(&b[e * l + c], ONE, &mut out[r * l + c]);
            }
        }
    }
    out
}

/// Power traces `tr(R^j)` for `j = 1..=k` as forms of degree `2j`.
pub fn power_traces(r: &CurvatureEndomorphism, k: usize) -> Vec<GradedForm> {
    let l = r.mbar;
    let n = r.n;
    let mut traces = vec![GradedForm::one(n)];
    let mut power = r.entries.clone();
    for j in 1..=k {
        if j > 1 {
            power = form_matrix_mul(&power, &r.entries, l);
        }
        let mut t = GradedForm::zero(n, 2 * j);
        for i in 0..l {
            t.add_assign(&power[i * l + i]).expect("same degree");
        }
        traces.push(t);
    }
    traces
}

/// `Θ(R)` as a `2k`-form.
pub fn evaluate_invariant(
    theta: &InvariantPolynomial,
    r: &CurvatureEndomorphism,
) -> Result<GradedForm> {
    if theta.ell != r.mbar {
        return Err(Error::DimensionMismatch {
            expected: theta.ell,
            got: r.mbar,
        });
    }
    let traces = power_traces(r, theta.k);
    Ok(evaluate_with_traces(theta, &traces, r.n))
}

/// `Θ` from precomputed power traces (`traces[j] = tr(R^j)`).
pub fn evaluate_with_traces(
    theta: &InvariantPolynomial,
    traces: &[GradedForm],
    n: usize,
) -> GradedForm {
    let mut out = GradedForm::zero(n, 2 * theta.k);
    if 2 * theta.k > n {
        return out;
    }
    for (p, c) in &theta.terms {
        let mut prod = GradedForm::one(n);
        for &j in p {
            prod = prod.wedge(&traces[j]);
        }
        out.add_scaled(&prod, *c).expect("same degree");
    }
    out
}

/// Spectral derivative along one grid axis of a periodic sample array
/// (last axis fastest), Nyquist mode dropped.
fn spectral_derivative(values: &[Complex64], n: usize, dim: usize, axis: usize) -> Vec<Complex64> {
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let stride = n.pow((dim - 1 - axis) as u32);
    let total = values.len();
    let mut out = vec![ZERO; total];
    let mut line = vec![ZERO; n];
    for start in 0..total {
        // line starts are indices whose axis coordinate is zero
        if (start / stride) % n != 0 {
            continue;
        }
        for (t, v) in line.iter_mut().enumerate() {
            *v = values[start + t * stride];
        }
        fwd.process(&mut line);
        for (t, v) in line.iter_mut().enumerate() {
            let k = if t < n / 2 {
                t as f64
            } else if t == n / 2 && n % 2 == 0 {
                0.0
            } else {
                t as f64 - n as f64
            };
            *v *= Complex64::new(0.0, k / n as f64);
        }
        inv.process(&mut line);
        for (t, v) in line.iter().enumerate() {
            out[start + t * stride] = *v;
        }
    }
    out
}

/// Exterior derivative of a grid-sampled form, by spectral differentiation.
pub fn spectral_exterior_derivative(
    samples: &[GradedForm],
    n_grid: usize,
    dim: usize,
) -> Result<Vec<GradedForm>> {
    let degree = samples[0].degree();
    let mut out = vec![GradedForm::zero(dim, degree + 1); samples.len()];
    if degree + 1 > dim {
        return Ok(out);
    }
    for (idx, s) in samples.iter().enumerate() {
        if s.coeffs().iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite { index: idx });
        }
    }
    let ext = Exterior::get(dim);
    let masks = ext.masks(degree).to_vec();
    for (ci, &mask) in masks.iter().enumerate() {
        let column: Vec<Complex64> = samples.iter().map(|s| s.coeffs()[ci]).collect();
        if column.iter().all(|c| *c == ZERO) {
            continue;
        }
        for axis in 0..dim {
            if mask & (1 << axis) != 0 {
                continue;
            }
            let sign = ext.wedge_sign(1 << axis, mask) as f64;
            let target = ext.index_of(mask | (1 << axis));
            let deriv = spectral_derivative(&column, n_grid, dim, axis);
            for (o, d) in out.iter_mut().zip(&deriv) {
                o.coeffs_mut()[target] += sign * d;
            }
        }
    }
    Ok(out)
}

/// Samples `Θ(R_c)` of the projected connection on the `N^{2m̄}` grid.
pub fn sample_characteristic_form(
    theta: &InvariantPolynomial,
    h: &MetricField,
    n_grid: usize,
) -> Result<Vec<GradedForm>> {
    let dim = h.n();
    let total = n_grid.pow(dim as u32);
    let values: Vec<Result<GradedForm>> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let x = grid_point(idx, n_grid, dim);
            let pg = PointGeometry::new(&h.jet(&x), &x)?;
            evaluate_invariant(theta, &pg.complex_curvature())
        })
        .collect();
    values.into_iter().collect()
}

/// Max-norm of `dΘ(R_c)` on an `N`-point-per-axis grid.
pub fn closedness_defect(
    theta: &InvariantPolynomial,
    h: &MetricField,
    n_grid: usize,
) -> Result<f64> {
    let samples = sample_characteristic_form(theta, h, n_grid)?;
    let d = spectral_exterior_derivative(&samples, n_grid, h.n())?;
    Ok(d.iter().map(|f| f.max_norm()).fold(0.0, f64::max))
}

/// Sign of `dx^1 ∧ dy^1 ∧ … ∧ dx^m̄ ∧ dy^m̄` relative to `dx^1 ∧ … ∧ dx^n`
/// in the axis order `(x^1…x^m̄, y^1…y^m̄)`.
pub fn complex_orientation_sign(mbar: usize) -> f64 {
    if (mbar * mbar.saturating_sub(1) / 2) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Density of a top form with respect to the complex orientation.
pub fn top_density(form: &GradedForm) -> Complex64 {
    form.top_coefficient() * complex_orientation_sign(form.n() / 2)
}

/// Density of `(-Ω)^m̄ / m̄!`, the volume form of the complex orientation
/// (`√det h` on a positive definite metric).
pub fn volume_density(mbar: usize, h: &[Complex64]) -> Complex64 {
    let om = kahler_form_at(mbar, h);
    let fact: f64 = (1..=mbar).map(|i| i as f64).product();
    let sign = if mbar % 2 == 0 { 1.0 } else { -1.0 };
    top_density(&om.wedge_power(mbar)) * (sign / fact)
}

fn permutations(n: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(
        cur: &mut Vec<usize>,
        used: &mut Vec<bool>,
        sign: f64,
        out: &mut Vec<(Vec<usize>, f64)>,
    ) {
        let n = used.len();
        if cur.len() == n {
            out.push((cur.clone(), sign));
            return;
        }
        for i in 0..n {
            if used[i] {
                continue;
            }
            // sign flips once per smaller unused index skipped over
            let inversions = (0..i).filter(|&j| !used[j]).count();
            used[i] = true;
            cur.push(i);
            rec(
                cur,
                used,
                if inversions % 2 == 0 { sign } else { -sign },
                out,
            );
            cur.pop();
            used[i] = false;
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], 1.0, &mut out);
    out
}

/// Euler integrand `E_m` from the Levi-Civita curvature at a point.
///
/// The Gram extension on top forms is `det(h⁻¹)` times the permutation
/// signs, so
/// `E_m = det(h⁻¹) / ((8π)^m̄ m̄!) Σ_{π,σ} sgn π sgn σ Π_a R_{π(2a-1) π(2a) σ(2a) σ(2a-1)}`.
pub fn euler_integrand_at(pg: &PointGeometry) -> Complex64 {
    let n = pg.n;
    let mbar = pg.mbar;
    let r = pg.riemann_lowered();
    let perms = permutations(n);
    // pair blocks: P[(i,j)] over ordered pairs for each σ-pair slot
    let mut total = ZERO;
    for (p, sp) in &perms {
        for (s, ss) in &perms {
            let mut prod = Complex64::new(sp * ss, 0.0);
            for a in 0..mbar {
                let (i, j) = (p[2 * a], p[2 * a + 1]);
                let (k, l) = (s[2 * a + 1], s[2 * a]);
                prod *= r[((i * n + j) * n + k) * n + l];
                if prod == ZERO {
                    break;
                }
            }
            total += prod;
        }
    }
    let det_inv = 1.0 / pg.det;
    let fact: f64 = (1..=mbar).map(|i| i as f64).product();
    total * det_inv / ((8.0 * PI).powi(mbar as i32) * fact)
}

pub fn euler_integrand(h: &MetricField, x: &[f64]) -> Result<Complex64> {
    let pg = PointGeometry::new(&h.jet(x), x)?;
    Ok(euler_integrand_at(&pg))
}

/// `(E_m · dvol, c_m̄(R_c))` as densities with respect to the complex orientation.
pub fn pfaffian_vs_top_chern(h: &MetricField, x: &[f64]) -> Result<(Complex64, Complex64)> {
    let defect = kahler_defect(h);
    if defect > 1e-10 {
        return Err(Error::NotKahler { defect });
    }
    let mbar = h.mbar();
    let pg = PointGeometry::new(&h.jet(x), x)?;
    let e = euler_integrand_at(&pg) * volume_density(mbar, &pg.h);
    let c = evaluate_invariant(&chern_polynomial(mbar, mbar)?, &pg.complex_curvature())?;
    Ok((e, top_density(&c)))
}
