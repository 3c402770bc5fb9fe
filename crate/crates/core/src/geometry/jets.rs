//! Jet variables `h(A;B)` of a metric in complex coordinates, holomorphic
//! normal coordinates, and metrics with prescribed jets at the origin.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use super::connection::invert;
use super::metric::{build_metric, MetricField};
use super::structure::Signature;
use crate::error::{Error, Result};
use crate::field::ScalarField;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Highest derivative order `|A| + |B| - 2` accepted by [`jet_extract`].
pub const MAX_JET_ORDER: usize = 10;

/// Multisets `A` (holomorphic) and `B` (anti-holomorphic) of 1-based
/// indices, stored sorted.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JetKey {
    a: Vec<usize>,
    b: Vec<usize>,
}

impl JetKey {
    pub fn new(mut a: Vec<usize>, mut b: Vec<usize>) -> Result<Self> {
        if a.is_empty() || b.is_empty() || a.iter().chain(&b).any(|&i| i == 0) {
            return Err(Error::InvalidJetKey(format!("{a:?};{b:?}")));
        }
        a.sort_unstable();
        b.sort_unstable();
        Ok(Self { a, b })
    }

    pub fn a(&self) -> &[usize] {
        &self.a
    }

    pub fn b(&self) -> &[usize] {
        &self.b
    }

    /// `(B; A)`, the key of the conjugate jet.
    pub fn swapped(&self) -> Self {
        Self {
            a: self.b.clone(),
            b: self.a.clone(),
        }
    }

    pub fn order(&self) -> usize {
        self.a.len() + self.b.len() - 2
    }

    fn max_index(&self) -> usize {
        self.a.iter().chain(&self.b).copied().max().unwrap_or(0)
    }
}

impl fmt::Display for JetKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[usize]| {
            v.iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        write!(f, "{};{}", join(&self.a), join(&self.b))
    }
}

impl FromStr for JetKey {
    type Err = Error;

    /// Parses `"1,1;2,1"` (or `"11;21"` when all indices are single digits).
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidJetKey(s.to_string());
        let (a, b) = s.split_once(';').ok_or_else(bad)?;
        let parse = |part: &str| -> Result<Vec<usize>> {
            let part = part.trim();
            if part.contains(',') {
                part.split(',')
                    .map(|t| t.trim().parse::<usize>().map_err(|_| bad()))
                    .collect()
            } else {
                part.chars()
                    .map(|c| c.to_digit(10).map(|d| d as usize).ok_or_else(bad))
                    .collect()
            }
        };
        Self::new(parse(a)?, parse(b)?)
    }
}

/// The field `h_{αβ̄} = ¼[h(x_α,x_β) + h(y_α,y_β) + i h(x_α,y_β) - i h(y_α,x_β)]`
/// (1-based indices).
pub fn hermitian_component_field(
    h: &MetricField,
    alpha: usize,
    beta: usize,
) -> Result<ScalarField> {
    let m = h.mbar();
    let (a, b) = (alpha - 1, beta - 1);
    let xx = h.component_field(a, b);
    let yy = h.component_field(a + m, b + m);
    let xy = h.component_field(a, b + m);
    let yx = h.component_field(a + m, b);
    Ok(xx
        .add(&yy)?
        .add(&xy.scale(I))?
        .sub(&yx.scale(I))?
        .scale_real(0.25))
}

fn derive(f: &ScalarField, hol: &[usize], antihol: &[usize]) -> Result<ScalarField> {
    let mut g = f.clone();
    for &a in hol {
        g = g.wirtinger(a, false)?;
    }
    for &b in antihol {
        g = g.wirtinger(b, true)?;
    }
    Ok(g)
}

/// `h(A;B) = ∂_{z^{α_2}}…∂_{z^{α_k}} ∂_{z̄^{β_2}}…∂_{z̄^{β_μ}} h_{α_1 β̄_1}` at `x`.
pub fn jet_extract(h: &MetricField, key: &JetKey, x: &[f64]) -> Result<Complex64> {
    if key.order() > MAX_JET_ORDER {
        return Err(Error::JetOrder {
            order: key.order(),
            max: MAX_JET_ORDER,
        });
    }
    if key.max_index() > h.mbar() {
        return Err(Error::IndexOutOfRange {
            index: key.max_index(),
            max: h.mbar(),
        });
    }
    let base = hermitian_component_field(h, key.a[0], key.b[0])?;
    Ok(derive(&base, &key.a[1..], &key.b[1..])?.evaluate(x))
}

/// Truncated polynomial in `2m̄` variables: `w^1…w^m̄` then `w̄^1…w̄^m̄`.
#[derive(Clone, Debug, PartialEq)]
struct Poly {
    vars: usize,
    max_degree: usize,
    terms: BTreeMap<Vec<u8>, Complex64>,
}

impl Poly {
    fn zero(vars: usize, max_degree: usize) -> Self {
        Self {
            vars,
            max_degree,
            terms: BTreeMap::new(),
        }
    }

    fn monomial(vars: usize, max_degree: usize, exp: Vec<u8>, c: Complex64) -> Self {
        let mut p = Self::zero(vars, max_degree);
        p.add_term(exp, c);
        p
    }

    fn one(vars: usize, max_degree: usize) -> Self {
        Self::monomial(vars, max_degree, vec![0; vars], Complex64::new(1.0, 0.0))
    }

    fn variable(vars: usize, max_degree: usize, v: usize) -> Self {
        let mut e = vec![0; vars];
        e[v] = 1;
        Self::monomial(vars, max_degree, e, Complex64::new(1.0, 0.0))
    }

    fn add_term(&mut self, exp: Vec<u8>, c: Complex64) {
        let deg: usize = exp.iter().map(|&e| e as usize).sum();
        if deg > self.max_degree || c == ZERO {
            return;
        }
        *self.terms.entry(exp).or_insert(ZERO) += c;
    }

    fn add_scaled(&mut self, other: &Poly, s: Complex64) {
        for (e, c) in &other.terms {
            self.add_term(e.clone(), s * c);
        }
    }

    fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero(self.vars, self.max_degree);
        for (ea, ca) in &self.terms {
            let da: usize = ea.iter().map(|&e| e as usize).sum();
            for (eb, cb) in &other.terms {
                let db: usize = eb.iter().map(|&e| e as usize).sum();
                if da + db > self.max_degree {
                    continue;
                }
                let e = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }

    fn differentiate(&self, v: usize) -> Poly {
        let mut out = Poly::zero(self.vars, self.max_degree);
        for (e, c) in &self.terms {
            if e[v] > 0 {
                let mut f = e.clone();
                f[v] -= 1;
                out.add_term(f, c * e[v] as f64);
            }
        }
        out
    }

    fn coeff(&self, exp: &[u8]) -> Complex64 {
        self.terms.get(exp).copied().unwrap_or(ZERO)
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn multi_factorial(exp: &[u8]) -> f64 {
    exp.iter().map(|&e| factorial(e as usize)).product()
}

/// All exponent vectors of length `vars` and total degree exactly `d`.
fn exponents(vars: usize, d: usize) -> Vec<Vec<u8>> {
    fn rec(vars: usize, left: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if cur.len() == vars - 1 {
            cur.push(left as u8);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in (0..=left).rev() {
            cur.push(k as u8);
            rec(vars, left - k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if vars == 0 {
        return out;
    }
    rec(vars, d, &mut Vec::new(), &mut out);
    out
}

fn exponent_to_indices(exp: &[u8]) -> Vec<usize> {
    let mut v = Vec::new();
    for (i, &e) in exp.iter().enumerate() {
        v.extend(std::iter::repeat(i + 1).take(e as usize));
    }
    v
}

/// A holomorphic change of coordinates `z = P + w + q(w)` putting a
/// pseudo-Kähler metric in normal form at `P`.
#[derive(Clone, Debug)]
pub struct NormalCoordinates {
    pub mbar: usize,
    pub order: usize,
    pub point: Vec<f64>,
    /// `q^γ` coefficients keyed by `(γ, exponent of w)`, `γ` 1-based.
    pub coefficients: BTreeMap<(usize, Vec<u8>), Complex64>,
    /// Pulled-back `h̃_{αβ̄}` as truncated polynomials in `(w, w̄)`.
    transformed: Vec<Poly>,
}

impl NormalCoordinates {
    /// Largest solved coefficient of `q`.
    pub fn max_coefficient(&self) -> f64 {
        self.coefficients
            .values()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// `h̃(A;B)` at `P` for the transformed metric.
    pub fn jet(&self, key: &JetKey) -> Result<Complex64> {
        let m = self.mbar;
        if key.max_index() > m {
            return Err(Error::IndexOutOfRange {
                index: key.max_index(),
                max: m,
            });
        }
        let trunc = self.transformed[0].max_degree;
        if key.order() > trunc {
            return Err(Error::JetOrder {
                order: key.order(),
                max: trunc,
            });
        }
        let mut exp = vec![0u8; 2 * m];
        for &a in &key.a[1..] {
            exp[a - 1] += 1;
        }
        for &b in &key.b[1..] {
            exp[m + b - 1] += 1;
        }
        let p = &self.transformed[(key.a[0] - 1) * m + key.b[0] - 1];
        Ok(p.coeff(&exp) * multi_factorial(&exp))
    }

    /// Max `|h̃(A;B)(P)|` over `|B| = 1`, `2 ≤ |A| ≤ order`.
    pub fn max_unit_b_jet(&self) -> f64 {
        let m = self.mbar;
        let mut worst: f64 = 0.0;
        for size in 2..=self.order {
            for e in exponents(m, size) {
                let a = exponent_to_indices(&e);
                for beta in 1..=m {
                    let key = JetKey::new(a.clone(), vec![beta]).expect("nonempty");
                    worst = worst.max(self.jet(&key).expect("within truncation").norm());
                }
            }
        }
        worst
    }
}

/// Taylor data `∂^C ∂̄^D h_{γδ̄}(P) / (C! D!)` of every Hermitian component.
fn hermitian_taylor(h: &MetricField, x: &[f64], max_degree: usize) -> Result<Vec<Poly>> {
    let m = h.mbar();
    let vars = 2 * m;
    let mut out = Vec::with_capacity(m * m);
    for g in 1..=m {
        for d in 1..=m {
            let base = hermitian_component_field(h, g, d)?;
            let mut p = Poly::zero(vars, max_degree);
            for deg in 0..=max_degree {
                for e in exponents(vars, deg) {
                    let hol = exponent_to_indices(&e[..m]);
                    let anti = exponent_to_indices(&e[m..]);
                    let v = derive(&base, &hol, &anti)?.evaluate(x);
                    p.add_term(e.clone(), v / multi_factorial(&e));
                }
            }
            out.push(p);
        }
    }
    Ok(out)
}

/// Pulls back the Taylor data along `z = P + w + q(w)`.
fn pull_back(
    m: usize,
    taylor: &[Poly],
    coefficients: &BTreeMap<(usize, Vec<u8>), Complex64>,
) -> Vec<Poly> {
    let vars = 2 * m;
    let trunc = taylor[0].max_degree;
    // Z^γ = w^γ + q^γ(w), Z̄^γ = w̄^γ + conj q^γ(w̄)
    let mut z = Vec::with_capacity(m);
    let mut zb = Vec::with_capacity(m);
    for g in 0..m {
        let mut p = Poly::variable(vars, trunc, g);
        let mut pb = Poly::variable(vars, trunc, m + g);
        for ((gamma, e), c) in coefficients {
            if *gamma == g + 1 {
                let mut full = e.clone();
                full.resize(vars, 0);
                p.add_term(full, *c);
                let mut fb = vec![0u8; m];
                fb.extend_from_slice(e);
                pb.add_term(fb, c.conj());
            }
        }
        z.push(p);
        zb.push(pb);
    }
    // powers[v][k] = (variable v)^k for the substituted variables
    let subs: Vec<&Poly> = z.iter().chain(zb.iter()).collect();
    let powers: Vec<Vec<Poly>> = subs
        .iter()
        .map(|s| {
            let mut v = vec![Poly::one(vars, trunc)];
            for k in 1..=trunc {
                let next = v[k - 1].mul(s);
                v.push(next);
            }
            v
        })
        .collect();
    let substituted: Vec<Poly> = taylor
        .iter()
        .map(|t| {
            let mut out = Poly::zero(vars, trunc);
            for (e, c) in &t.terms {
                let mut term = Poly::one(vars, trunc);
                for (v, &k) in e.iter().enumerate() {
                    if k > 0 {
                        term = term.mul(&powers[v][k as usize]);
                    }
                }
                out.add_scaled(&term, *c);
            }
            out
        })
        .collect();
    // Jacobians ∂Z^γ/∂w^α and ∂Z̄^δ/∂w̄^β
    let jac: Vec<Poly> = (0..m)
        .flat_map(|g| (0..m).map(move |a| (g, a)))
        .map(|(g, a)| z[g].differentiate(a))
        .collect();
    let jacb: Vec<Poly> = (0..m)
        .flat_map(|d| (0..m).map(move |b| (d, b)))
        .map(|(d, b)| zb[d].differentiate(m + b))
        .collect();
    let mut out = Vec::with_capacity(m * m);
    for a in 0..m {
        for b in 0..m {
            let mut acc = Poly::zero(vars, trunc);
            for g in 0..m {
                for d in 0..m {
                    let t = substituted[g * m + d]
                        .mul(&jac[g * m + a])
                        .mul(&jacb[d * m + b]);
                    acc.add_scaled(&t, Complex64::new(1.0, 0.0));
                }
            }
            out.push(acc);
        }
    }
    out
}

/// Solves for a holomorphic polynomial change of coordinates of degree
/// `≤ order` after which every `h̃(A;B)(P)` with `|B| = 1`,
/// `2 ≤ |A| ≤ order` vanishes.
pub fn normal_coordinates(h: &MetricField, x: &[f64], order: usize) -> Result<NormalCoordinates> {
    if order < 2 {
        return Err(Error::JetOrder { order, max: 2 });
    }
    if order > MAX_JET_ORDER / 2 {
        return Err(Error::JetOrder {
            order,
            max: MAX_JET_ORDER / 2,
        });
    }
    let m = h.mbar();
    let trunc = 2 * order - 2;
    let taylor = hermitian_taylor(h, x, trunc)?;
    let mut hp = vec![ZERO; m * m];
    for g in 0..m {
        for d in 0..m {
            hp[g * m + d] = taylor[g * m + d].coeff(&vec![0; 2 * m]);
        }
    }
    let hinv = invert(&hp, m).ok_or(Error::SingularSystem)?;
    let mut coefficients = BTreeMap::new();
    for d in 2..=order {
        let current = pull_back(m, &taylor, &coefficients);
        // u^γ_α(M) = -Σ_β E_{αβ̄}(M) (H⁻¹)[β][γ] over holomorphic monomials M of degree d-1
        for c in exponents(m, d) {
            let alpha = c.iter().position(|&e| e > 0).expect("degree ≥ 2");
            let mut prev = c.clone();
            prev[alpha] -= 1;
            let mut full = prev.clone();
            full.resize(2 * m, 0);
            for gamma in 0..m {
                let mut u = ZERO;
                for beta in 0..m {
                    u -= current[alpha * m + beta].coeff(&full) * hinv[beta * m + gamma];
                }
                let v = u / c[alpha] as f64;
                if v != ZERO {
                    coefficients.insert((gamma + 1, c.clone()), v);
                }
            }
        }
    }
    let transformed = pull_back(m, &taylor, &coefficients);
    Ok(NormalCoordinates {
        mbar: m,
        order,
        point: x.to_vec(),
        coefficients,
        transformed,
    })
}

/// Builds a potential-route metric of the given signature whose jets at the
/// origin satisfy `h(A;B) = c(A;B)` for every target, `h(A;B) = 0` for every
/// other key with `1 ≤ |A|, |B| ≤ n` and `|A| + |B| ≥ 3`, where `n` is the
/// largest `|A|` or `|B|` among the targets.
///
/// The potential is a polynomial in `Z^a = sin x^a + i sin y^a`, corrected
/// degree by degree against the exact jets of the partial result.
pub fn jet_prescribe(
    targets: &BTreeMap<JetKey, Complex64>,
    signature: Signature,
) -> Result<MetricField> {
    let m = signature.mbar();
    let n = 2 * m;
    let mut order = 1;
    for (key, c) in targets {
        if key.a.len() < 2 || key.b.len() < 2 || key.max_index() > m {
            return Err(Error::InvalidJetKey(key.to_string()));
        }
        let partner = targets.get(&key.swapped()).copied().unwrap_or(ZERO);
        if (partner - c.conj()).norm() > 1e-12 {
            return Err(Error::NonHermitianTargets {
                a: key.a.clone(),
                b: key.b.clone(),
            });
        }
        order = order.max(key.a.len()).max(key.b.len());
    }
    if order > MAX_JET_ORDER / 2 {
        return Err(Error::JetOrder {
            order,
            max: MAX_JET_ORDER / 2,
        });
    }
    let origin = vec![0.0; n];
    let zs: Vec<ScalarField> = (0..m)
        .map(|a| {
            ScalarField::sin_axis(n, a, 1)
                .add(&ScalarField::sin_axis(n, a + m, 1).scale(I))
                .expect("same dimension")
        })
        .collect();
    let zbs: Vec<ScalarField> = zs.iter().map(|z| z.conj()).collect();
    let power = |base: &[ScalarField], e: &[u8]| -> Result<ScalarField> {
        let mut f = ScalarField::constant(n, Complex64::new(1.0, 0.0));
        for (a, &k) in e.iter().enumerate() {
            for _ in 0..k {
                f = f.mul(&base[a])?;
            }
        }
        Ok(f)
    };
    let mut phi = ScalarField::zero(n);
    for d in 3..=2 * order {
        let mut update = ScalarField::zero(n);
        for na in 1..=order.min(d - 1) {
            let nb = d - na;
            if nb < 1 || nb > order || na > nb {
                continue;
            }
            for ea in exponents(m, na) {
                for eb in exponents(m, nb) {
                    if na == nb && ea > eb {
                        continue;
                    }
                    let a = exponent_to_indices(&ea);
                    let b = exponent_to_indices(&eb);
                    let key = JetKey::new(a.clone(), b.clone())?;
                    let target = targets.get(&key).copied().unwrap_or(ZERO);
                    let current = derive(&phi, &a, &b)?.evaluate(&origin);
                    let c = (target - current) / (multi_factorial(&ea) * multi_factorial(&eb));
                    if c.norm() < 1e-300 {
                        continue;
                    }
                    let term = power(&zs, &ea)?.mul(&power(&zbs, &eb)?)?;
                    if ea == eb {
                        update = update.add(&term.scale_real(c.re))?;
                    } else {
                        update = update
                            .add(&term.scale(c))?
                            .add(&term.conj().scale(c.conj()))?;
                    }
                }
            }
        }
        phi = phi.add(&update)?;
    }
    let phi = phi.real_part();
    build_metric(signature, Some(&phi), None)
}
