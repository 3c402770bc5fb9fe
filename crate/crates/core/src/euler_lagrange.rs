//! The closed-form tensor `F_Θ`, the finite-difference variation of the
//! action, perturbation generators and the residual between the two.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::action::{check_degree, factorial, lovelock_densities_at, omega_powers};
use crate::char_forms::{chern_polynomial, evaluate_with_traces, power_traces, top_density, InvariantPolynomial};
use crate::error::{Error, Result};
use crate::field::{integrate_grid, FrequencyVector, ScalarField};
use crate::forms::{GradedForm, GramTable};
use crate::geometry::connection::PointGeometry;
use crate::geometry::kahler::{complexify_metric, kahler_defect, kahler_form_at};
use crate::geometry::metric::{
    complex_hessian, j_average_fields, realify_hermitian, MetricField, SymmetricTensorField, TensorJet,
};
use crate::geometry::structure::Signature;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Normalization of `F_Θ = -c·(i/(k+1))·h(Θ ∧ dz^α ∧ dz̄^β, Ω^{k+1})`.
///
/// Fixed once against the variational oracle on `(c₁, k=1, m̄=2, definite)`;
/// see `calibrate_normalization`.
pub const F_NORMALIZATION: f64 = 1.0;

/// Floor in the relative residual denominator.
pub const RESIDUAL_FLOOR: f64 = 1e-12;

/// Kähler-condition tolerance for inputs to `f_theta`.
pub const KAHLER_TOLERANCE: f64 = 1e-10;

/// A named invariant polynomial.
#[derive(Clone, Debug, PartialEq)]
pub struct Theta {
    pub name: String,
    pub poly: InvariantPolynomial,
}

impl Theta {
    /// Parses `c1`, `c2`, `c3`, `c1^2`, `c1c2`, `c1^3`, `tr2`, `tr3`, `tr1tr1`...
    pub fn parse(name: &str, mbar: usize) -> Result<Self> {
        let bad = || Error::Scenario(format!("unknown characteristic polynomial '{name}'"));
        let mut poly: Option<InvariantPolynomial> = None;
        let mut rest = name.trim();
        while !rest.is_empty() {
            let (factor, tail) = if let Some(r) = rest.strip_prefix("tr") {
                let digits: String = r.chars().take_while(|c| c.is_ascii_digit()).collect();
                let j: usize = digits.parse().map_err(|_| bad())?;
                (InvariantPolynomial::trace_monomial(&[j], mbar)?, &r[digits.len()..])
            } else if let Some(r) = rest.strip_prefix('c') {
                let digits: String = r.chars().take_while(|c| c.is_ascii_digit()).collect();
                let j: usize = digits.parse().map_err(|_| bad())?;
                (chern_polynomial(j, mbar)?, &r[digits.len()..])
            } else {
                return Err(bad());
            };
            let (power, tail) = if let Some(t) = tail.strip_prefix('^') {
                let digits: String = t.chars().take_while(|c| c.is_ascii_digit()).collect();
                let p: usize = digits.parse().map_err(|_| bad())?;
                (p, &t[digits.len()..])
            } else {
                (1, tail)
            };
            for _ in 0..power {
                poly = Some(match poly {
                    None => factor.clone(),
                    Some(p) => p.mul(&factor)?,
                });
            }
            rest = tail.trim_start_matches('*').trim();
        }
        Ok(Self {
            name: name.to_string(),
            poly: poly.ok_or_else(bad)?,
        })
    }

    pub fn degree(&self) -> usize {
        self.poly.degree()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbationKind {
    Potential,
    General,
}

/// A J-invariant symmetric 2-tensor `κ` on the torus.
#[derive(Clone, Debug)]
pub struct Perturbation {
    pub kind: PerturbationKind,
    pub amplitude: f64,
    pub seed: u64,
    /// `ψ` for the potential kind.
    pub potential: Option<ScalarField>,
    pub tensor: SymmetricTensorField,
}

impl Perturbation {
    pub fn label(&self) -> String {
        let kind = match self.kind {
            PerturbationKind::Potential => "potential",
            PerturbationKind::General => "general",
        };
        format!("{kind}#{}", self.seed)
    }

    pub fn zero(mbar: usize, kind: PerturbationKind) -> Self {
        Self {
            kind,
            amplitude: 0.0,
            seed: 0,
            potential: None,
            tensor: SymmetricTensorField::zero(2 * mbar),
        }
    }
}

fn random_real_field(
    rng: &mut ChaCha8Rng,
    dim: usize,
    modes: usize,
    pool: Option<&[FrequencyVector]>,
) -> Result<ScalarField> {
    let mut f = ScalarField::zero(dim);
    for _ in 0..modes {
        let nu = match pool {
            Some(p) if !p.is_empty() => p[rng.gen_range(0..p.len())].clone(),
            _ => {
                let mut nu = vec![0i32; dim];
                let axes = rng.gen_range(1..=2);
                for _ in 0..axes {
                    nu[rng.gen_range(0..dim)] = if rng.gen_bool(0.5) { 1 } else { -1 };
                }
                FrequencyVector::new(nu)
            }
        };
        let c = Complex64::from_polar(rng.gen_range(0.3..1.0), rng.gen_range(0.0..2.0 * PI));
        f = f.add(&ScalarField::mode(nu, c)?)?;
    }
    Ok(f.real_part())
}

/// Nonzero frequencies of the metric components together with their
/// pairwise sums and differences, so that perturbations overlap both the
/// linear and the quadratic part of the curvature.
pub fn frequency_pool(h: &MetricField) -> Vec<FrequencyVector> {
    let n = h.n();
    let mut base = std::collections::BTreeSet::new();
    for i in 0..n {
        for j in 0..n {
            for nu in h.component_field(i, j).coeffs().keys() {
                if !nu.is_zero() {
                    base.insert(nu.clone());
                }
            }
        }
    }
    let base: Vec<FrequencyVector> = base.into_iter().collect();
    let mut pool: std::collections::BTreeSet<FrequencyVector> = base.iter().cloned().collect();
    for a in &base {
        for b in &base {
            let sum: Vec<i32> = a.entries().iter().zip(b.entries()).map(|(x, y)| x + y).collect();
            let nu = FrequencyVector::new(sum);
            if !nu.is_zero() {
                pool.insert(nu);
            }
        }
    }
    pool.into_iter().collect()
}

fn max_coefficient(fields: &[ScalarField]) -> f64 {
    fields
        .iter()
        .flat_map(|f| f.coeffs().values())
        .map(|c| c.norm())
        .fold(0.0, f64::max)
}

/// Deterministic random perturbation. The largest Fourier coefficient of
/// any component of `κ` equals `amplitude`.
pub fn make_perturbation(
    kind: PerturbationKind,
    mbar: usize,
    seed: u64,
    amplitude: f64,
) -> Result<Perturbation> {
    make_perturbation_from(kind, mbar, seed, amplitude, None)
}

/// As [`make_perturbation`], drawing Fourier modes from `pool` (typically
/// [`frequency_pool`] of the background metric) when given.
pub fn make_perturbation_from(
    kind: PerturbationKind,
    mbar: usize,
    seed: u64,
    amplitude: f64,
    pool: Option<&[FrequencyVector]>,
) -> Result<Perturbation> {
    let n = 2 * mbar;
    if amplitude == 0.0 {
        return Ok(Perturbation {
            seed,
            ..Perturbation::zero(mbar, kind)
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6b61_7070_61);
    match kind {
        PerturbationKind::Potential => {
            let mut psi = ScalarField::zero(n);
            while psi.is_zero() || complex_hessian(&psi)?.iter().all(|f| f.is_zero()) {
                psi = random_real_field(&mut rng, n, 3, pool)?;
            }
            let comps = realify_hermitian(mbar, &complex_hessian(&psi)?)?;
            let scale = amplitude / max_coefficient(&comps);
            let psi = psi.scale_real(scale);
            let comps = realify_hermitian(mbar, &complex_hessian(&psi)?)?;
            Ok(Perturbation {
                kind,
                amplitude,
                seed,
                potential: Some(psi),
                tensor: SymmetricTensorField::new(n, comps)?,
            })
        }
        PerturbationKind::General => {
            let mut comps = vec![ScalarField::zero(n); n * n];
            for i in 0..n {
                for j in i..n {
                    let f = random_real_field(&mut rng, n, 2, pool)?;
                    comps[i * n + j] = f.clone();
                    comps[j * n + i] = f;
                }
            }
            let comps = j_average_fields(mbar, &comps)?;
            let scale = amplitude / max_coefficient(&comps);
            let comps: Vec<ScalarField> = comps.iter().map(|f| f.scale_real(scale)).collect();
            Ok(Perturbation {
                kind,
                amplitude,
                seed,
                potential: None,
                tensor: SymmetricTensorField::new(n, comps)?,
            })
        }
    }
}

/// `dz^α` (0-based `alpha`) as a 1-form over the real axes.
fn dz(n: usize, alpha: usize, conjugate: bool) -> GradedForm {
    let m = n / 2;
    let mut c = vec![ZERO; n];
    c[alpha] = Complex64::new(1.0, 0.0);
    c[alpha + m] = if conjugate { -I } else { I };
    GradedForm::one_form(&c)
}

/// `F^{αβ̄}` (row-major `m̄×m̄`) from precomputed curvature traces.
fn f_theta_with(
    pg: &PointGeometry,
    theta: &InvariantPolynomial,
    traces: &[GradedForm],
    omega_power: &GradedForm,
    gram: &GramTable,
) -> Vec<Complex64> {
    let n = pg.n;
    let m = pg.mbar;
    let k = theta.degree();
    let form = evaluate_with_traces(theta, traces, n);
    let scale = -I * (F_NORMALIZATION / (k + 1) as f64);
    let mut out = vec![ZERO; m * m];
    for a in 0..m {
        let fa = form.wedge(&dz(n, a, false));
        for b in 0..m {
            let fab = fa.wedge(&dz(n, b, true));
            out[a * m + b] = scale * gram.pair(&fab, omega_power);
        }
    }
    out
}

/// `F_Θ(h)` at a point as the Hermitian matrix `F^{αβ̄}`.
pub fn f_theta(h: &MetricField, theta: &InvariantPolynomial, x: &[f64]) -> Result<Vec<Complex64>> {
    check_degree(theta, h.mbar())?;
    let defect = kahler_defect(h);
    if defect > KAHLER_TOLERANCE {
        return Err(Error::NotKahler { defect });
    }
    let pg = PointGeometry::new(&h.jet(x), x)?;
    let k = theta.degree();
    let traces = power_traces(&pg.complex_curvature(), k);
    let omega = kahler_form_at(pg.mbar, &pg.h).wedge_power(k + 1);
    let gram = GramTable::new(&pg.hinv, pg.n, 2 * k + 2);
    Ok(f_theta_with(&pg, theta, &traces, &omega, &gram))
}

/// Real-index symmetric tensor `F^{ij} = sym(F^{αβ̄} ∂_{z^α} ⊗ ∂_{z̄^β})`.
pub fn real_tensor(mbar: usize, f: &[Complex64]) -> Vec<Complex64> {
    let n = 2 * mbar;
    let half = Complex64::new(0.5, 0.0);
    let dz_vec = |a: usize, conj: bool| {
        let mut v = vec![ZERO; n];
        v[a] = half;
        v[a + mbar] = if conj { 0.5 * I } else { -0.5 * I };
        v
    };
    let mut t = vec![ZERO; n * n];
    for a in 0..mbar {
        let u = dz_vec(a, false);
        for b in 0..mbar {
            let w = dz_vec(b, true);
            let c = f[a * mbar + b];
            for i in 0..n {
                for j in 0..n {
                    t[i * n + j] += c * u[i] * w[j];
                }
            }
        }
    }
    let mut s = vec![ZERO; n * n];
    for i in 0..n {
        for j in 0..n {
            s[i * n + j] = 0.5 * (t[i * n + j] + t[j * n + i]);
        }
    }
    s
}

/// `F^{ij} κ_{ij}`.
pub fn pair_real(f_real: &[Complex64], kappa: &[Complex64]) -> Complex64 {
    f_real.iter().zip(kappa).map(|(a, b)| a * b).sum()
}

/// Finite-difference schedule for the variation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsSchedule(pub Vec<f64>);

impl Default for EpsSchedule {
    fn default() -> Self {
        Self(vec![1e-2, 5e-3, 2.5e-3])
    }
}

/// Central differences `D_j`, one Richardson level, observed slope.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteDifference {
    pub central: Vec<Complex64>,
    pub richardson: Vec<Complex64>,
    /// `log2(|D_0 - D_1| / |D_1 - D_2|)`, `None` when the differences are at
    /// the roundoff level of the action.
    pub slope: Option<f64>,
    pub noise: f64,
}

impl FiniteDifference {
    pub fn value(&self) -> Complex64 {
        *self
            .richardson
            .last()
            .or(self.central.last())
            .expect("non-empty schedule")
    }
}

/// Noise level of a central difference at step `eps` given the `L¹` mass
/// of the action integrand.
fn difference_noise(mass: f64, eps: f64) -> f64 {
    1e-14 * mass.max(f64::MIN_POSITIVE) / eps
}

/// Combines `S(±ε_j)` into central differences and a Richardson estimate.
pub fn richardson(eps: &[f64], plus: &[Complex64], minus: &[Complex64], mass: f64) -> Result<FiniteDifference> {
    if eps.is_empty() || eps.len() != plus.len() || eps.len() != minus.len() {
        return Err(Error::Richardson("schedule and samples differ in length".into()));
    }
    let central: Vec<Complex64> = eps
        .iter()
        .zip(plus.iter().zip(minus))
        .map(|(e, (p, m))| (p - m) / (2.0 * e))
        .collect();
    let mut rich = Vec::new();
    for j in 0..central.len().saturating_sub(1) {
        let ratio = (eps[j] / eps[j + 1]).powi(2);
        rich.push((ratio * central[j + 1] - central[j]) / (ratio - 1.0));
    }
    let noise = difference_noise(mass, *eps.last().expect("non-empty"));
    let slope = if central.len() >= 3 {
        let d01 = (central[0] - central[1]).norm();
        let d12 = (central[1] - central[2]).norm();
        if d12 > 100.0 * noise && d01 > 100.0 * noise {
            Some((d01 / d12).log2() / (eps[0] / eps[1]).log2())
        } else {
            None
        }
    } else {
        None
    };
    if let Some(s) = slope {
        if !(1.0..=3.0).contains(&s) {
            return Err(Error::Richardson(format!(
                "observed order {s:.3} is far from 2 (ε too small for roundoff or too large for truncation)"
            )));
        }
    }
    Ok(FiniteDifference {
        central,
        richardson: rich,
        slope,
        noise,
    })
}

/// `F_Θ^{αβ̄} · Ω^m̄/m̄!` density, via
/// `h(β, Ω^{k+1}) Ω^m̄/m̄! = (k+1)!/(m̄-k-1)! · β ∧ Ω^{m̄-k-1}`.
fn weighted_f(
    n: usize,
    theta_form: &GradedForm,
    k: usize,
    omega_power: &GradedForm,
) -> Vec<Complex64> {
    let m = n / 2;
    let scale = -I * (F_NORMALIZATION * factorial(k) / factorial(m - k - 1));
    let mut out = vec![ZERO; m * m];
    for a in 0..m {
        let fa = theta_form.wedge(&dz(n, a, false));
        for b in 0..m {
            let fab = fa.wedge(&dz(n, b, true));
            out[a * m + b] = scale * top_density(&fab.wedge(omega_power));
        }
    }
    out
}

/// `⟨F_Θ, κ_q⟩ · Ω^m̄/m̄!` for every `(Θ, κ)` at one point, `Θ`-major.
fn pairings_at(
    pg: &PointGeometry,
    thetas: &[InvariantPolynomial],
    kappa_values: &[Vec<Complex64>],
) -> Vec<Complex64> {
    let n = pg.n;
    let mbar = pg.mbar;
    let max_k = thetas.iter().map(|t| t.degree()).max().unwrap_or(0);
    let traces = power_traces(&pg.complex_curvature(), max_k);
    let powers = omega_powers(&kahler_form_at(mbar, &pg.h), mbar);
    let mut out = Vec::with_capacity(thetas.len() * kappa_values.len());
    for theta in thetas {
        let k = theta.degree();
        let form = evaluate_with_traces(theta, &traces, n);
        let fr = real_tensor(mbar, &weighted_f(n, &form, k, &powers[mbar - k - 1]));
        for kv in kappa_values {
            out.push(pair_real(&fr, kv));
        }
    }
    out
}

/// Raw integrals for every `(Θ, κ)` pair on one grid pass.
#[derive(Clone, Debug)]
pub struct VariationData {
    /// `[theta][kappa]` finite differences of the action.
    pub el: Vec<Vec<FiniteDifference>>,
    /// `[theta][kappa]` `(1/m̄!) ∫ ⟨F_Θ, κ⟩ Ω^m̄`.
    pub pairing: Vec<Vec<Complex64>>,
    /// `[theta][kappa]` `L¹` mass of the pairing integrand.
    pub pairing_mass: Vec<Vec<f64>>,
    /// `[theta][kappa]` `L¹` mass of the variation integrand `∂_ε` of the
    /// weighted density at the smallest step.
    pub el_mass: Vec<Vec<f64>>,
    /// `[theta]` action at `h` and its integrand mass.
    pub action: Vec<Complex64>,
    pub action_mass: Vec<f64>,
}

/// Evaluates the action at `h ± ε_j κ_q` and the pairing integral for all
/// `(Θ, κ)` on the `N^{2m̄}` grid in a single deterministic pass.
pub fn variation_data(
    h: &MetricField,
    thetas: &[InvariantPolynomial],
    kappas: &[Perturbation],
    eps: &EpsSchedule,
    n_grid: usize,
) -> Result<VariationData> {
    let mbar = h.mbar();
    let n = h.n();
    for t in thetas {
        check_degree(t, mbar)?;
    }
    let nt = thetas.len();
    let nk = kappas.len();
    let ne = eps.0.len();
    let signed: Vec<f64> = eps.0.iter().flat_map(|&e| [e, -e]).collect();
    let var_slots = nt * nk * signed.len();
    let pair_base = var_slots;
    let mass_base = pair_base + nt * nk;
    let el_mass_base = mass_base + nt * nk;
    let act_base = el_mass_base + nt * nk;
    let slots = act_base + 2 * nt;
    let last = eps.0.len().checked_sub(1).ok_or_else(|| Error::Richardson("empty ε schedule".into()))?;
    let integrals = integrate_grid(n, n_grid, slots, |x| {
        let mut out = vec![ZERO; slots];
        let jet_h = h.jet(x);
        let pg = PointGeometry::new(&jet_h, x)?;
        let (dens, _) = lovelock_densities_at(&pg, thetas)?;
        for (t, d) in dens.iter().enumerate() {
            out[act_base + t] = *d;
            out[act_base + nt + t] = Complex64::new(d.norm(), 0.0);
        }
        let kappa_values: Vec<Vec<Complex64>> = kappas.iter().map(|q| q.tensor.value(x)).collect();
        let pairs = pairings_at(&pg, thetas, &kappa_values);
        for (i, v) in pairs.into_iter().enumerate() {
            out[pair_base + i] = v;
            out[mass_base + i] = Complex64::new(v.norm(), 0.0);
        }
        // action along h + εκ
        for (q, kappa) in kappas.iter().enumerate() {
            if kappa.tensor.is_zero() {
                for t in 0..nt {
                    let base = (t * nk + q) * signed.len();
                    let v = out[act_base + t];
                    out[base..base + signed.len()].fill(v);
                }
                continue;
            }
            let jet_k: TensorJet = kappa.tensor.jet(x);
            for (s, &e) in signed.iter().enumerate() {
                let jet = jet_h.axpy(Complex64::new(e, 0.0), &jet_k);
                let pge = PointGeometry::new(&jet, x)?;
                let (dens, _) = lovelock_densities_at(&pge, thetas)?;
                for (t, d) in dens.iter().enumerate() {
                    out[(t * nk + q) * signed.len() + s] = *d;
                }
            }
            for t in 0..nt {
                let base = (t * nk + q) * signed.len() + 2 * last;
                let slope = (out[base] - out[base + 1]) / (2.0 * eps.0[last]);
                out[el_mass_base + t * nk + q] = Complex64::new(slope.norm(), 0.0);
            }
        }
        Ok(out)
    })?;
    let mut el = Vec::with_capacity(nt);
    let mut pairing = Vec::with_capacity(nt);
    let mut pairing_mass = Vec::with_capacity(nt);
    let mut el_mass = Vec::with_capacity(nt);
    for t in 0..nt {
        let mut el_t = Vec::with_capacity(nk);
        let mut p_t = Vec::with_capacity(nk);
        let mut m_t = Vec::with_capacity(nk);
        for q in 0..nk {
            let base = (t * nk + q) * signed.len();
            let plus: Vec<Complex64> = (0..ne).map(|j| integrals[base + 2 * j]).collect();
            let minus: Vec<Complex64> = (0..ne).map(|j| integrals[base + 2 * j + 1]).collect();
            let mass = integrals[act_base + nt + t].re + eps.0[last] * integrals[el_mass_base + t * nk + q].re;
            el_t.push(richardson(&eps.0, &plus, &minus, mass)?);
            p_t.push(integrals[pair_base + t * nk + q]);
            m_t.push(integrals[mass_base + t * nk + q].re);
        }
        el_mass.push((0..nk).map(|q| integrals[el_mass_base + t * nk + q].re).collect());
        el.push(el_t);
        pairing.push(p_t);
        pairing_mass.push(m_t);
    }
    Ok(VariationData {
        el,
        pairing,
        pairing_mass,
        el_mass,
        action: (0..nt).map(|t| integrals[act_base + t]).collect(),
        action_mass: (0..nt).map(|t| integrals[act_base + nt + t].re).collect(),
    })
}

/// Finite-difference variation `d/dε S(h + εκ)` at `ε = 0`.
pub fn el_variational(
    h: &MetricField,
    theta: &InvariantPolynomial,
    kappa: &Perturbation,
    eps: &EpsSchedule,
    n_grid: usize,
) -> Result<FiniteDifference> {
    let data = variation_data(h, std::slice::from_ref(theta), std::slice::from_ref(kappa), eps, n_grid)?;
    Ok(data.el[0][0].clone())
}

/// `(1/m̄!) ∫ ⟨F_Θ(h), κ⟩ Ω^m̄`.
pub fn pairing_integral(
    h: &MetricField,
    theta: &InvariantPolynomial,
    kappa: &Perturbation,
    n_grid: usize,
) -> Result<Complex64> {
    check_degree(theta, h.mbar())?;
    let thetas = std::slice::from_ref(theta);
    let v = integrate_grid(h.n(), n_grid, 1, |x| {
        let pg = PointGeometry::new(&h.jet(x), x)?;
        Ok(pairings_at(&pg, thetas, &[kappa.tensor.value(x)]))
    })?;
    Ok(v[0])
}

/// Comparison of the variational and closed-form sides for one `(Θ, κ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResidualReport {
    pub theta_name: String,
    pub kappa: String,
    pub signature: String,
    pub el_value: f64,
    pub el_value_imag: f64,
    pub pairing_value: f64,
    pub pairing_value_imag: f64,
    pub relative_residual: f64,
    /// Denominator floor actually used (see [`residual_floor`]).
    pub floor: f64,
    pub eps_schedule: Vec<f64>,
    pub quadrature_n: usize,
    pub convergence_slope: Option<f64>,
    pub central_differences: Vec<f64>,
    /// `L¹` mass of the pairing integrand.
    pub pairing_mass: f64,
    /// `L¹` mass of the variation integrand.
    pub variation_mass: f64,
}

/// Quadrature noise allowance relative to the `L¹` mass of the integrands.
pub const MASS_FLOOR: f64 = 1e-6;

/// Floor for the residual denominator: the fixed `1e-12` plus
/// [`MASS_FLOOR`] times the larger integrand mass. Only matters when both
/// sides vanish (potential perturbations of topological actions).
pub fn residual_floor(mass: f64) -> f64 {
    RESIDUAL_FLOOR + MASS_FLOOR * mass
}

pub fn relative_residual(el: Complex64, pairing: Complex64, floor: f64) -> f64 {
    (el - pairing).norm() / (el.norm() + pairing.norm() + floor)
}

/// Settings for a residual run.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualConfig {
    pub n_grid: usize,
    pub eps: EpsSchedule,
}

/// One report per `(Θ, κ)`.
pub fn theorem2_residual(
    h: &MetricField,
    thetas: &[Theta],
    kappas: &[Perturbation],
    config: &ResidualConfig,
) -> Result<Vec<ResidualReport>> {
    let polys: Vec<InvariantPolynomial> = thetas.iter().map(|t| t.poly.clone()).collect();
    let defect = kahler_defect(h);
    if defect > KAHLER_TOLERANCE {
        return Err(Error::NotKahler { defect });
    }
    let data = variation_data(h, &polys, kappas, &config.eps, config.n_grid)?;
    let mut out = Vec::new();
    for (t, theta) in thetas.iter().enumerate() {
        for (q, kappa) in kappas.iter().enumerate() {
            let fd = &data.el[t][q];
            let el = fd.value();
            let p = data.pairing[t][q];
            let pm = data.pairing_mass[t][q];
            let vm = data.el_mass[t][q];
            let floor = residual_floor(pm.max(vm));
            out.push(ResidualReport {
                theta_name: theta.name.clone(),
                kappa: kappa.label(),
                signature: h.signature().to_string(),
                el_value: el.re,
                el_value_imag: el.im,
                pairing_value: p.re,
                pairing_value_imag: p.im,
                relative_residual: relative_residual(el, p, floor),
                floor,
                eps_schedule: config.eps.0.clone(),
                quadrature_n: config.n_grid,
                convergence_slope: fd.slope,
                central_differences: fd.central.iter().map(|c| c.re).collect(),
                pairing_mass: pm,
                variation_mass: vm,
            });
        }
    }
    Ok(out)
}

/// Background with the first J-pair rotated to `e^{iπt}`: `t = 0` is the
/// definite metric, `t = 1` has signature `(2, 2m̄-2)`.
pub fn continuation_background(mbar: usize, t: f64) -> Vec<Complex64> {
    let mut bg = vec![Complex64::new(1.0, 0.0); 2 * mbar];
    let z = Complex64::from_polar(1.0, PI * t);
    bg[0] = z;
    bg[mbar] = z;
    bg
}

/// Residuals along the complex path `h_t` of backgrounds.
pub fn continuation_path_residual(
    h: &MetricField,
    theta: &Theta,
    kappas: &[Perturbation],
    samples: &[f64],
    config: &ResidualConfig,
) -> Result<Vec<(f64, Vec<ResidualReport>)>> {
    let mbar = h.mbar();
    samples
        .iter()
        .map(|&t| {
            let ht = h.with_background(continuation_background(mbar, t))?;
            let mut reports = theorem2_residual(&ht, std::slice::from_ref(theta), kappas, config)?;
            for r in reports.iter_mut() {
                r.signature = format!("path t={t}");
            }
            Ok((t, reports))
        })
        .collect()
}

/// Ratio `EL / pairing` computed with unit normalization on the calibration
/// scenario. The frozen [`F_NORMALIZATION`] is validated against it.
pub fn calibrate_normalization(n_grid: usize) -> Result<Complex64> {
    let mbar = 2;
    let n = 2 * mbar;
    let phi = ScalarField::shifted_sin_axis(n, 0, 0.3)
        .mul(&ScalarField::shifted_sin_axis(n, 3, 1.1))?
        .scale_real(0.1)
        .add(&ScalarField::shifted_sin_axis(n, 1, 0.7).scale_real(0.12))?;
    let h = crate::geometry::metric::build_metric(Signature::definite(mbar), Some(&phi), None)?;
    let kappa = make_perturbation(PerturbationKind::General, mbar, 1, 0.05)?;
    let c1 = chern_polynomial(1, mbar)?;
    let data = variation_data(&h, std::slice::from_ref(&c1), std::slice::from_ref(&kappa), &EpsSchedule::default(), n_grid)?;
    Ok(data.el[0][0].value() / (data.pairing[0][0] / F_NORMALIZATION))
}

/// `κ_{αβ̄}` at a point (used by the Hermitian form of the pairing).
pub fn kappa_hermitian(kappa: &Perturbation, x: &[f64]) -> Vec<Complex64> {
    let n = kappa.tensor.n();
    complexify_metric(n / 2, &kappa.tensor.value(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::metric::{build_metric, check_j_invariant_fields, j_invariance_defect};

    fn potential(n: usize, a: f64) -> ScalarField {
        ScalarField::shifted_sin_axis(n, 0, 0.3)
            .mul(&ScalarField::shifted_sin_axis(n, n - 1, 1.1))
            .unwrap()
            .scale_real(0.1 * a)
            .add(&ScalarField::shifted_sin_axis(n, 1, 0.7).scale_real(0.12 * a))
            .unwrap()
    }

    fn quick() -> ResidualConfig {
        ResidualConfig {
            n_grid: 8,
            eps: EpsSchedule::default(),
        }
    }

    #[test]
    fn theta_names() {
        let c1 = chern_polynomial(1, 3).unwrap();
        assert_eq!(Theta::parse("c1^2", 3).unwrap().poly, c1.mul(&c1).unwrap());
        assert_eq!(Theta::parse("c1c1", 3).unwrap().poly, c1.mul(&c1).unwrap());
        assert_eq!(
            Theta::parse("tr2", 3).unwrap().poly,
            InvariantPolynomial::trace_monomial(&[2], 3).unwrap()
        );
        assert_eq!(Theta::parse("c2", 3).unwrap().degree(), 2);
        assert!(Theta::parse("p1", 3).is_err());
        assert!(Theta::parse("", 3).is_err());
    }

    #[test]
    fn perturbations_are_j_invariant_and_scaled() {
        for kind in [PerturbationKind::Potential, PerturbationKind::General] {
            let k = make_perturbation(kind, 2, 11, 0.05).unwrap();
            check_j_invariant_fields(2, &k.tensor).unwrap();
            for x in MetricField::probe_points(4) {
                assert!(j_invariance_defect(2, &k.tensor.value(&x)) < 1e-14);
            }
            let top = k
                .tensor
                .components()
                .iter()
                .flat_map(|f| f.coeffs().values())
                .map(|c| c.norm())
                .fold(0.0, f64::max);
            assert!((top - 0.05).abs() < 1e-15);
            let again = make_perturbation(kind, 2, 11, 0.05).unwrap();
            assert_eq!(k.tensor.components(), again.tensor.components());
        }
        assert!(make_perturbation(PerturbationKind::General, 2, 3, 0.0)
            .unwrap()
            .tensor
            .is_zero());
    }

    #[test]
    fn potential_perturbation_stays_kahler() {
        let h = build_metric(Signature::definite(2), Some(&potential(4, 1.0)), None).unwrap();
        let k = make_perturbation(PerturbationKind::Potential, 2, 5, 0.05).unwrap();
        assert!(kahler_defect(&h.add_tensor(&k.tensor, Complex64::new(0.01, 0.0)).unwrap()) < 1e-10);
        let g = make_perturbation(PerturbationKind::General, 2, 5, 0.05).unwrap();
        assert!(kahler_defect(&h.add_tensor(&g.tensor, Complex64::new(0.01, 0.0)).unwrap()) > 1e-6);
    }

    #[test]
    fn flat_f_vanishes() {
        let h = build_metric(Signature::new(2, 2).unwrap(), None, None).unwrap();
        let c1 = chern_polynomial(1, 2).unwrap();
        let f = f_theta(&h, &c1, &[0.2, 0.4, 0.1, 0.9]).unwrap();
        assert!(f.iter().all(|v| v.norm() < 1e-15));
    }

    #[test]
    fn f_is_hermitian_and_real_form_is_j_invariant() {
        for sig in [Signature::definite(2), Signature::new(2, 2).unwrap()] {
            let h = build_metric(sig, Some(&potential(4, 1.0)), None).unwrap();
            let c1 = chern_polynomial(1, 2).unwrap();
            for x in MetricField::probe_points(4).into_iter().take(5) {
                let f = f_theta(&h, &c1, &x).unwrap();
                assert!(f.iter().any(|v| v.norm() > 1e-4));
                for a in 0..2 {
                    for b in 0..2 {
                        assert!((f[a * 2 + b] - f[b * 2 + a].conj()).norm() < 1e-11);
                    }
                }
                let r = real_tensor(2, &f);
                assert!(j_invariance_defect(2, &r) < 1e-12);
                assert!(r.iter().all(|v| v.im.abs() < 1e-12));
            }
        }
    }

    #[test]
    fn f_rejects_non_kahler_and_top_degree() {
        let h = build_metric(Signature::definite(2), Some(&potential(4, 1.0)), None).unwrap();
        let g = make_perturbation(PerturbationKind::General, 2, 2, 0.05).unwrap();
        let raw = h.add_tensor(&g.tensor, Complex64::new(1.0, 0.0)).unwrap();
        let c1 = chern_polynomial(1, 2).unwrap();
        assert!(matches!(f_theta(&raw, &c1, &[0.0; 4]), Err(Error::NotKahler { .. })));
        let c2 = chern_polynomial(2, 2).unwrap();
        assert!(matches!(
            f_theta(&h, &c2, &[0.0; 4]),
            Err(Error::DegreeNotBelowDimension { k: 2, mbar: 2 })
        ));
    }

    #[test]
    fn weighted_wedge_route_matches_gram_route() {
        let sig = Signature::new(2, 4).unwrap();
        let h = build_metric(sig, Some(&potential(6, 0.5)), None).unwrap();
        for name in ["c1", "c2", "tr2"] {
            let theta = Theta::parse(name, 3).unwrap();
            for x in MetricField::probe_points(6).into_iter().take(2) {
                let f = f_theta(&h, &theta.poly, &x).unwrap();
                let pg = PointGeometry::new(&h.jet(&x), &x).unwrap();
                let k = theta.degree();
                let traces = power_traces(&pg.complex_curvature(), k);
                let form = evaluate_with_traces(&theta.poly, &traces, 6);
                let powers = omega_powers(&kahler_form_at(3, &pg.h), 3);
                let w = weighted_f(6, &form, k, &powers[3 - k - 1]);
                let measure = crate::action::measure_density(3, &pg.h);
                for (a, b) in f.iter().zip(&w) {
                    assert!((a * measure - b).norm() < 1e-13, "{name}: {a} {b}");
                }
            }
        }
    }

    #[test]
    fn real_pairing_matches_bilinear_extension() {
        let h = build_metric(Signature::definite(2), Some(&potential(4, 1.0)), None).unwrap();
        let c1 = chern_polynomial(1, 2).unwrap();
        let k = make_perturbation(PerturbationKind::General, 2, 4, 0.05).unwrap();
        let x = [0.7, -0.3, 1.9, 0.4];
        let f = f_theta(&h, &c1, &x).unwrap();
        let kv = k.tensor.value(&x);
        // κ(∂_α, ∂_β̄) by explicit bilinear extension
        let vec = |a: usize, conj: bool| {
            let mut v = [ZERO; 4];
            v[a] = Complex64::new(0.5, 0.0);
            v[a + 2] = Complex64::new(0.0, if conj { 0.5 } else { -0.5 });
            v
        };
        let mut expect = ZERO;
        for a in 0..2 {
            for b in 0..2 {
                let (u, w) = (vec(a, false), vec(b, true));
                let mut kab = ZERO;
                for i in 0..4 {
                    for j in 0..4 {
                        kab += u[i] * w[j] * kv[i * 4 + j];
                    }
                }
                expect += f[a * 2 + b] * kab;
            }
        }
        let got = pair_real(&real_tensor(2, &f), &kv);
        assert!((got - expect).norm() < 1e-14);
        let herm = kappa_hermitian(&k, &x);
        let via_herm: Complex64 = f.iter().zip(&herm).map(|(a, b)| a * b).sum();
        assert!((got - via_herm).norm() < 1e-14);
    }

    #[test]
    fn richardson_on_polynomial() {
        let eps = [1e-2, 5e-3, 2.5e-3];
        let s = |e: f64| Complex64::new(0.7 * e + 3.0 * e.powi(3) - 40.0 * e.powi(5) + 5.0 * e * e, 0.0);
        let plus: Vec<_> = eps.iter().map(|&e| s(e)).collect();
        let minus: Vec<_> = eps.iter().map(|&e| s(-e)).collect();
        let fd = richardson(&eps, &plus, &minus, 1.0).unwrap();
        assert!((fd.value().re - 0.7).abs() < 40.0 * 5e-3f64.powi(4));
        assert!((fd.slope.unwrap() - 2.0).abs() < 0.01);
        let jagged = [plus[0], plus[1] + 1e-6, plus[2]];
        assert!(matches!(richardson(&eps, &jagged, &minus, 1.0), Err(Error::Richardson(_))));
        let flat = vec![ZERO; 3];
        assert!(richardson(&eps, &flat, &flat, 1.0).unwrap().slope.is_none());
    }

    #[test]
    fn zero_kappa_gives_zero_variation() {
        let h = build_metric(Signature::definite(2), Some(&potential(4, 1.0)), None).unwrap();
        let c1 = chern_polynomial(1, 2).unwrap();
        let k = make_perturbation(PerturbationKind::General, 2, 1, 0.0).unwrap();
        let fd = el_variational(&h, &c1, &k, &EpsSchedule::default(), 6).unwrap();
        assert_eq!(fd.value(), ZERO);
    }

    #[test]
    fn pairing_is_linear() {
        let h = build_metric(Signature::definite(2), Some(&potential(4, 1.0)), None).unwrap();
        let c1 = chern_polynomial(1, 2).unwrap();
        let a = make_perturbation(PerturbationKind::General, 2, 1, 0.05).unwrap();
        let b = make_perturbation(PerturbationKind::General, 2, 2, 0.03).unwrap();
        let sum = Perturbation {
            tensor: a.tensor.add(&b.tensor).unwrap(),
            ..a.clone()
        };
        let pa = pairing_integral(&h, &c1, &a, 8).unwrap();
        let pb = pairing_integral(&h, &c1, &b, 8).unwrap();
        let ps = pairing_integral(&h, &c1, &sum, 8).unwrap();
        assert!((ps - pa - pb).norm() < 1e-10 * ps.norm());
    }

    #[test]
    fn calibration_gives_unit_ratio() {
        let r = calibrate_normalization(8).unwrap();
        assert!((r - 1.0).norm() < 1e-6, "{r}");
    }

    #[test]
    fn residual_small_in_both_signatures() {
        let c1 = vec![Theta::parse("c1", 2).unwrap()];
        for sig in [Signature::definite(2), Signature::new(2, 2).unwrap()] {
            let h = build_metric(sig, Some(&potential(4, 1.0)), None).unwrap();
            let pool = frequency_pool(&h);
            let kappas = [
                make_perturbation_from(PerturbationKind::General, 2, 7, 0.05, Some(&pool)).unwrap(),
                make_perturbation_from(PerturbationKind::Potential, 2, 8, 0.05, Some(&pool)).unwrap(),
            ];
            let reps = theorem2_residual(&h, &c1, &kappas, &ResidualConfig { n_grid: 12, ..quick() }).unwrap();
            for r in &reps {
                assert!(r.relative_residual < 1e-3, "{sig} {}: {:?}", r.kappa, r);
            }
            assert!(reps[0].el_value.abs() > 1e-3);
            assert!((reps[0].convergence_slope.unwrap() - 2.0).abs() < 0.2);
        }
    }

    #[test]
    fn flat_variation_vanishes() {
        let c1 = vec![Theta::parse("c1", 2).unwrap()];
        let h = build_metric(Signature::new(2, 2).unwrap(), None, None).unwrap();
        let kappas = [make_perturbation(PerturbationKind::General, 2, 9, 0.05).unwrap()];
        let r = &theorem2_residual(&h, &c1, &kappas, &quick()).unwrap()[0];
        assert!(r.el_value.abs() < 1e-12 && r.pairing_value.abs() < 1e-12, "{r:?}");
    }

    #[test]
    fn continuation_endpoints_match_real_signatures() {
        let c1 = Theta::parse("c1", 2).unwrap();
        let h = build_metric(Signature::definite(2), Some(&potential(4, 1.0)), None).unwrap();
        let kappas = [make_perturbation_from(PerturbationKind::General, 2, 3, 0.05, Some(&frequency_pool(&h))).unwrap()];
        let cfg = ResidualConfig {
            n_grid: 6,
            eps: EpsSchedule::default(),
        };
        let path = continuation_path_residual(&h, &c1, &kappas, &[0.0, 0.5, 1.0], &cfg).unwrap();
        let def = &theorem2_residual(&h, std::slice::from_ref(&c1), &kappas, &cfg).unwrap()[0];
        let ind_h = h
            .with_background(Signature::new(2, 2).unwrap().background())
            .unwrap();
        let ind = &theorem2_residual(&ind_h, std::slice::from_ref(&c1), &kappas, &cfg).unwrap()[0];
        assert!((path[0].1[0].el_value - def.el_value).abs() < 1e-12);
        assert!((path[2].1[0].el_value - ind.el_value).abs() < 1e-9 * ind.el_value.abs());
        assert!(path[2].1[0].el_value_imag.abs() < 1e-9);
        let mid = &path[1].1[0];
        assert!(mid.el_value_imag.abs() > 1e-6);
    }
}
