//! Complex-coordinate views of a J-invariant metric: the Hermitian matrix
//! `h_{αβ̄}`, the Kähler condition, and the Chern curvature of a potential.

use num_complex::Complex64;

use super::connection::{invert, CurvatureEndomorphism};
use super::metric::MetricField;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::forms::{Exterior, GradedForm};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// `h_{αβ̄} = h(∂_{z^α}, ∂_{z̄^β})` from real components (row-major `n×n`).
pub fn complexify_metric(mbar: usize, h: &[Complex64]) -> Vec<Complex64> {
    let n = 2 * mbar;
    let mut out = vec![ZERO; mbar * mbar];
    for a in 0..mbar {
        for b in 0..mbar {
            let xx = h[a * n + b];
            let yy = h[(a + mbar) * n + b + mbar];
            let xy = h[a * n + b + mbar];
            let yx = h[(a + mbar) * n + b];
            out[a * mbar + b] = 0.25 * (xx + yy + I * xy - I * yx);
        }
    }
    out
}

/// Max-norm of `h_{αβ̄} - conj(h_{βᾱ})`; zero for a real J-invariant metric.
pub fn hermitian_defect(mbar: usize, herm: &[Complex64]) -> f64 {
    let mut worst: f64 = 0.0;
    for a in 0..mbar {
        for b in 0..mbar {
            worst = worst.max((herm[a * mbar + b] - herm[b * mbar + a].conj()).norm());
        }
    }
    worst
}

/// Components `Ω_{ij} = h(e_i, J e_j)` of the fundamental 2-form at a
/// point, from the metric value and gradient. Returns `(Ω, ∂Ω)` with
/// `∂Ω[(k*n+i)*n+j] = ∂_k Ω_{ij}`.
fn fundamental_jet(
    mbar: usize,
    h: &[Complex64],
    dh: &[Complex64],
) -> (Vec<Complex64>, Vec<Complex64>) {
    let n = 2 * mbar;
    let j = super::structure::ComplexStructure::new(mbar);
    let mut om = vec![ZERO; n * n];
    let mut dom = vec![ZERO; n * n * n];
    for i in 0..n {
        for c in 0..n {
            let (t, s) = j.apply_basis(c);
            om[i * n + c] = h[i * n + t] * s;
            for k in 0..n {
                dom[(k * n + i) * n + c] = dh[(k * n + i) * n + t] * s;
            }
        }
    }
    (om, dom)
}

/// Max over probe points of the components of `dΩ`.
pub fn kahler_defect(metric: &MetricField) -> f64 {
    let mbar = metric.mbar();
    let n = 2 * mbar;
    let mut worst: f64 = 0.0;
    for p in MetricField::probe_points(n) {
        let jet = metric.jet(&p);
        let (_, dom) = fundamental_jet(mbar, &jet.h, &jet.dh);
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let v = dom[(i * n + j) * n + k]
                        + dom[(j * n + k) * n + i]
                        + dom[(k * n + i) * n + j];
                    worst = worst.max(v.norm());
                }
            }
        }
    }
    worst
}

/// Rejects metrics with `|dΩ| > tol`.
pub fn require_kahler(metric: &MetricField, tol: f64) -> Result<()> {
    let defect = kahler_defect(metric);
    if defect > tol {
        return Err(Error::NotKahler { defect });
    }
    Ok(())
}

/// Fundamental 2-form `Ω(x, y) = h(x, J y)` at a point.
pub fn kahler_form_at(mbar: usize, h: &[Complex64]) -> GradedForm {
    let n = 2 * mbar;
    let (om, _) = fundamental_jet(mbar, h, &vec![ZERO; n * n * n]);
    GradedForm::two_form_from_matrix(n, &om)
}

/// `h_{αβ̄}` of the flat background diagonal.
pub fn hermitian_background(background: &[Complex64]) -> Vec<Complex64> {
    let m = background.len() / 2;
    let mut out = vec![ZERO; m * m];
    for a in 0..m {
        out[a * m + a] = 0.5 * background[a];
    }
    out
}

/// Chern curvature of the metric with potential `φ` and constant Hermitian
/// background `b_{αβ̄}`, computed directly in complex coordinates:
/// `R^α_β = -∂̄(h^{-1} ∂h)` with entries
/// `Σ R^α_{βγδ̄} dz^γ ∧ dz̄^δ`. Independent of the real-coordinate route.
pub fn kahler_curvature_direct(
    phi: &ScalarField,
    background: &[Complex64],
    x: &[f64],
) -> Result<CurvatureEndomorphism> {
    let n = phi.dim();
    let m = n / 2;
    // H[b][s] = h_{b s̄}, dH[g][b][s] = ∂_g h_{b s̄}, dbH[d][b][s] = ∂_{d̄} h_{b s̄},
    // ddH[g][d][b][s] = ∂_g ∂_{d̄} h_{b s̄}
    let mut hm = vec![ZERO; m * m];
    let mut dh = vec![ZERO; m * m * m];
    let mut dbh = vec![ZERO; m * m * m];
    let mut ddh = vec![ZERO; m * m * m * m];
    for b in 0..m {
        let fb = phi.wirtinger(b + 1, false)?;
        for s in 0..m {
            let f = fb.wirtinger(s + 1, true)?;
            hm[b * m + s] = f.evaluate(x) + background[b * m + s];
            for g in 0..m {
                let fg = f.wirtinger(g + 1, false)?;
                dh[(g * m + b) * m + s] = fg.evaluate(x);
                dbh[(g * m + b) * m + s] = f.wirtinger(g + 1, true)?.evaluate(x);
                for d in 0..m {
                    ddh[((g * m + d) * m + b) * m + s] = fg.wirtinger(d + 1, true)?.evaluate(x);
                }
            }
        }
    }
    let k = invert(&hm, m).ok_or(Error::SingularSystem)?;
    let mul = |a: &[Complex64], b: &[Complex64]| -> Vec<Complex64> {
        let mut o = vec![ZERO; m * m];
        for r in 0..m {
            for c in 0..m {
                for e in 0..m {
                    o[r * m + c] += a[r * m + e] * b[e * m + c];
                }
            }
        }
        o
    };
    let ext = Exterior::get(n);
    let mut out = CurvatureEndomorphism::zero(m);
    for g in 0..m {
        let dg = &dh[g * m * m..(g + 1) * m * m];
        let dgk = mul(dg, &k);
        for d in 0..m {
            let db = &dbh[d * m * m..(d + 1) * m * m];
            let dd = &ddh[(g * m + d) * m * m..(g * m + d + 1) * m * m];
            let first = mul(dd, &k);
            let second = mul(&dgk, &mul(db, &k));
            // dz^g ∧ dz̄^d = (dx^g + i dy^g) ∧ (dx^d - i dy^d)
            let pieces = [
                (g, d, Complex64::new(1.0, 0.0)),
                (g, d + m, -I),
                (g + m, d, I),
                (g + m, d + m, Complex64::new(1.0, 0.0)),
            ];
            for a in 0..m {
                for b in 0..m {
                    // R^a_b = -(∂_g∂_d̄ H K - ∂_g H K ∂_d̄ H K)^T [a][b]
                    let r = -(first[b * m + a] - second[b * m + a]);
                    if r == ZERO {
                        continue;
                    }
                    let e = &mut out.entries[a * m + b];
                    for &(p, q, w) in &pieces {
                        if p == q {
                            continue;
                        }
                        let sign = if p < q { 1.0 } else { -1.0 };
                        e.coeffs_mut()[ext.index_of((1u16 << p) | (1u16 << q))] += r * w * sign;
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::connection::PointGeometry;
    use crate::geometry::metric::build_metric;
    use crate::geometry::structure::Signature;

    fn potential(n: usize) -> ScalarField {
        let mut phi = ScalarField::cos_axis(n, 0, 1).scale_real(0.15);
        phi = phi
            .add(
                &ScalarField::sin_axis(n, 1, 1)
                    .mul(&ScalarField::cos_axis(n, n / 2, 1))
                    .unwrap()
                    .scale_real(0.1),
            )
            .unwrap();
        if n > 2 {
            phi = phi
                .add(
                    &ScalarField::cos_axis(n, n - 1, 1)
                        .mul(&ScalarField::sin_axis(n, 0, 1))
                        .unwrap()
                        .scale_real(0.08),
                )
                .unwrap();
        }
        phi
    }

    #[test]
    fn flat_complexification_is_half_identity() {
        let h = build_metric(Signature::definite(2), None, None).unwrap();
        let c = complexify_metric(2, &h.value(&[0.0; 4]));
        assert_eq!(c[0], Complex64::new(0.5, 0.0));
        assert_eq!(c[1], ZERO);
        assert_eq!(c[3], Complex64::new(0.5, 0.0));
    }

    #[test]
    fn complexify_inverts_realify() {
        let phi = potential(4);
        let h = build_metric(Signature::definite(2), Some(&phi), None).unwrap();
        let x = [0.3, 1.1, -0.4, 2.0];
        let c = complexify_metric(2, &h.value(&x));
        let hess = crate::geometry::metric::complex_hessian(&phi).unwrap();
        let bg = hermitian_background(h.background());
        for i in 0..4 {
            assert!((c[i] - hess[i].evaluate(&x) - bg[i]).norm() < 1e-14);
        }
        assert!(hermitian_defect(2, &c) < 1e-14);
    }

    #[test]
    fn potential_metrics_are_kahler_and_raw_ones_need_not_be() {
        let phi = potential(4);
        let h = build_metric(Signature::definite(2), Some(&phi), None).unwrap();
        assert!(kahler_defect(&h) < 1e-13);
        let n = 4;
        let mut raw = vec![ScalarField::zero(n); n * n];
        let f = ScalarField::cos_axis(n, 1, 1).scale_real(0.1);
        for a in [0, 2] {
            raw[a * n + a] = f.clone();
        }
        let g = build_metric(Signature::definite(2), None, Some(&raw)).unwrap();
        assert!(kahler_defect(&g) > 1e-3);
        assert!(require_kahler(&g, 1e-10).is_err());
    }

    #[test]
    fn flat_fundamental_form_orientation() {
        let om = kahler_form_at(
            1,
            &[
                Complex64::new(1.0, 0.0),
                ZERO,
                ZERO,
                Complex64::new(1.0, 0.0),
            ],
        );
        // Ω(e_1, e_2) = h(e_1, J e_2) = h(e_1, -e_1) = -1
        assert_eq!(om.component(&[0, 1]), Complex64::new(-1.0, 0.0));
    }

    #[test]
    fn real_route_curvature_matches_complex_route() {
        for sig in [
            Signature::definite(2),
            Signature::new(2, 2).unwrap(),
            Signature::definite(3),
        ] {
            let n = 2 * sig.mbar();
            let phi = potential(n);
            let h = build_metric(sig, Some(&phi), None).unwrap();
            let bg = hermitian_background(h.background());
            for x in MetricField::probe_points(n).into_iter().take(4) {
                let pg = PointGeometry::new(&h.jet(&x), &x).unwrap();
                let real = pg.complex_curvature();
                let direct = kahler_curvature_direct(&phi, &bg, &x).unwrap();
                assert!(direct.max_norm() > 1e-3);
                for (a, b) in real.entries.iter().zip(&direct.entries) {
                    let d = a.add(&b.scale(Complex64::new(-1.0, 0.0))).unwrap();
                    assert!(d.max_norm() < 1e-12, "{sig}: {}", d.max_norm());
                }
                // Levi-Civita already preserves J on a Kähler metric
                let proj = pg.projected();
                for (p, g) in proj.iter().zip(&pg.gamma) {
                    assert!((p - g).norm() < 1e-12);
                }
            }
        }
    }
}
