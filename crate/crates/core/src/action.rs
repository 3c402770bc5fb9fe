//! The Kähler form, the Gram pairing of forms, the Lovelock density
//! `h(Θ(h), Ω^k)` and the action `(1/m̄!) ∫ h(Θ(h), Ω^k) Ω^m̄`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::char_forms::{evaluate_invariant, top_density, InvariantPolynomial};
use crate::error::{Error, Result};
use crate::field::integrate_grid;
use crate::forms::{form_inner_with_inverse, GradedForm};
use crate::geometry::connection::{invert, PointGeometry};
use crate::geometry::kahler::kahler_form_at;
use crate::geometry::metric::MetricField;

/// `Ω(x, y) = h(x, J y)` at a point.
pub fn kahler_form(h: &MetricField, x: &[f64]) -> GradedForm {
    kahler_form_at(h.mbar(), &h.value(x))
}

/// Gram-determinant pairing of two forms with indices raised by `h⁻¹`.
pub fn form_inner(a: &GradedForm, b: &GradedForm, h: &MetricField, x: &[f64]) -> Result<Complex64> {
    let n = h.n();
    let value = h.value(x);
    let hinv = invert(&value, n).ok_or_else(|| Error::Degenerate {
        det: h.det(x).norm(),
        point: x.to_vec(),
    })?;
    form_inner_with_inverse(a, b, &hinv)
}

/// `k`-fold wedge power of a 2-form.
pub fn wedge_power(omega: &GradedForm, k: usize) -> GradedForm {
    omega.wedge_power(k)
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Density of `Ω^m̄ / m̄!` with respect to the complex orientation.
pub fn measure_density(mbar: usize, h: &[Complex64]) -> Complex64 {
    top_density(&kahler_form_at(mbar, h).wedge_power(mbar)) / factorial(mbar)
}

pub fn check_degree(theta: &InvariantPolynomial, mbar: usize) -> Result<()> {
    if theta.degree() >= mbar || theta.degree() == 0 {
        return Err(Error::DegreeNotBelowDimension {
            k: theta.degree(),
            mbar,
        });
    }
    if theta.matrix_size() != mbar {
        return Err(Error::DimensionMismatch {
            expected: mbar,
            got: theta.matrix_size(),
        });
    }
    Ok(())
}

/// Pointwise weighted densities `h(Θ_t, Ω^{k_t}) · Ω^m̄/m̄!` for several `Θ`
/// sharing one metric point, plus the measure density.
///
/// Uses `h(α, Ω^k) Ω^m̄/m̄! = k!/(m̄-k)! · α ∧ Ω^{m̄-k}`, which holds for every
/// `2k`-form and every J-invariant `h`; [`lovelock_density`] evaluates the
/// Gram pairing directly.
pub fn lovelock_densities_at(
    pg: &PointGeometry,
    thetas: &[InvariantPolynomial],
) -> Result<(Vec<Complex64>, Complex64)> {
    let mbar = pg.mbar;
    let n = pg.n;
    let rc = pg.complex_curvature();
    let omega = kahler_form_at(mbar, &pg.h);
    let max_k = thetas.iter().map(|t| t.degree()).max().unwrap_or(0);
    let traces = crate::char_forms::power_traces(&rc, max_k);
    let powers = omega_powers(&omega, mbar);
    let mut out = Vec::with_capacity(thetas.len());
    for theta in thetas {
        let k = theta.degree();
        let form = crate::char_forms::evaluate_with_traces(theta, &traces, n);
        let top = top_density(&form.wedge(&powers[mbar - k]));
        out.push(top * (factorial(k) / factorial(mbar - k)));
    }
    let measure = top_density(&powers[mbar]) / factorial(mbar);
    Ok((out, measure))
}

/// `[1, Ω, Ω², …, Ω^m̄]`.
pub fn omega_powers(omega: &GradedForm, mbar: usize) -> Vec<GradedForm> {
    let mut powers = vec![GradedForm::one(omega.n())];
    for j in 1..=mbar {
        powers.push(powers[j - 1].wedge(omega));
    }
    powers
}

/// `h(Θ(R_c), Ω^k)` at a point.
pub fn lovelock_density(
    h: &MetricField,
    theta: &InvariantPolynomial,
    x: &[f64],
) -> Result<Complex64> {
    check_degree(theta, h.mbar())?;
    let pg = PointGeometry::new(&h.jet(x), x)?;
    let form = evaluate_invariant(theta, &pg.complex_curvature())?;
    let omega = kahler_form_at(h.mbar(), &pg.h).wedge_power(theta.degree());
    form_inner_with_inverse(&form, &omega, &pg.hinv)
}

/// Action value with its quadrature estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ActionReport {
    pub value: f64,
    pub imaginary_part: f64,
    pub quadrature_n: usize,
    /// `|value(N) - value(N-4)|`.
    pub estimated_error: f64,
}

/// `(1/m̄!) ∫ h(Θ, Ω^k) Ω^m̄` for several `Θ` on one grid.
pub fn action_values(
    h: &MetricField,
    thetas: &[InvariantPolynomial],
    n_grid: usize,
) -> Result<Vec<Complex64>> {
    for t in thetas {
        check_degree(t, h.mbar())?;
    }
    integrate_grid(h.n(), n_grid, thetas.len(), |x| {
        let pg = PointGeometry::new(&h.jet(x), x)?;
        Ok(lovelock_densities_at(&pg, thetas)?.0)
    })
}

pub fn action(h: &MetricField, theta: &InvariantPolynomial, n_grid: usize) -> Result<ActionReport> {
    let thetas = std::slice::from_ref(theta);
    let v = action_values(h, thetas, n_grid)?[0];
    let coarse_n = n_grid.saturating_sub(4).max(2);
    let coarse = action_values(h, thetas, coarse_n)?[0];
    Ok(ActionReport {
        value: v.re,
        imaginary_part: v.im,
        quadrature_n: n_grid,
        estimated_error: (v - coarse).norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::char_forms::chern_polynomial;
    use crate::field::ScalarField;
    use crate::geometry::metric::build_metric;
    use crate::geometry::structure::Signature;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const ONE: Complex64 = Complex64::new(1.0, 0.0);

    fn kahler(sig: Signature, seed: u64) -> MetricField {
        let n = 2 * sig.mbar();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut phi = ScalarField::zero(n);
        for _ in 0..3 {
            let t = ScalarField::shifted_sin_axis(n, rng.gen_range(0..n), rng.gen_range(0.0..6.0))
                .mul(&ScalarField::shifted_sin_axis(
                    n,
                    rng.gen_range(0..n),
                    rng.gen_range(0.0..6.0),
                ))
                .unwrap()
                .scale_real(rng.gen_range(0.03..0.07));
            phi = phi.add(&t).unwrap();
        }
        build_metric(sig, Some(&phi), None).unwrap()
    }

    #[test]
    fn flat_kahler_form_coefficients() {
        let h = build_metric(Signature::definite(1), None, None).unwrap();
        assert_eq!(kahler_form(&h, &[0.0, 0.0]).component(&[0, 1]), -ONE);
        let h = build_metric(Signature::new(2, 2).unwrap(), None, None).unwrap();
        let om = kahler_form(&h, &[0.0; 4]);
        assert_eq!(om.component(&[0, 2]), ONE);
        assert_eq!(om.component(&[1, 3]), -ONE);
    }

    #[test]
    fn flat_inner_products() {
        let h = build_metric(Signature::definite(2), None, None).unwrap();
        let x = [0.0; 4];
        let e = GradedForm::basis(4, &[0, 1]);
        assert_eq!(form_inner(&e, &e, &h, &x).unwrap(), ONE);
        let om = kahler_form(&h, &x);
        assert_eq!(form_inner(&om, &om, &h, &x).unwrap(), ONE * 2.0);
        let hi = build_metric(Signature::new(2, 2).unwrap(), None, None).unwrap();
        // axes 0 and 2 are the negative pair
        let e02 = GradedForm::basis(4, &[0, 2]);
        let e01 = GradedForm::basis(4, &[0, 1]);
        assert_eq!(form_inner(&e02, &e02, &hi, &x).unwrap(), ONE);
        assert_eq!(form_inner(&e01, &e01, &hi, &x).unwrap(), -ONE);
        assert!(form_inner(&e01, &GradedForm::basis(4, &[0]), &hi, &x).is_err());
    }

    #[test]
    fn flat_volume_form_is_coordinate_volume_up_to_orientation() {
        for mbar in 1..=3 {
            let n = 2 * mbar;
            let mut h = vec![Complex64::new(0.0, 0.0); n * n];
            for i in 0..n {
                h[i * n + i] = ONE;
            }
            let sign = if mbar % 2 == 0 { 1.0 } else { -1.0 };
            assert!((measure_density(mbar, &h) - ONE * sign).norm() < 1e-15);
        }
    }

    #[test]
    fn lefschetz_identity_holds_pointwise() {
        // ⟨α, Ω⟩ Ω^m̄/m̄! = α ∧ Ω^{m̄-1}/(m̄-1)! for every 2-form α
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for sig in [
            Signature::definite(3),
            Signature::new(2, 4).unwrap(),
            Signature::new(2, 2).unwrap(),
        ] {
            let h = kahler(sig, 4);
            let mbar = sig.mbar();
            let n = 2 * mbar;
            for x in MetricField::probe_points(n).into_iter().take(4) {
                let mut alpha = GradedForm::zero(n, 2);
                for c in alpha.coeffs_mut() {
                    *c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                }
                let om = kahler_form(&h, &x);
                let lhs = form_inner(&alpha, &om, &h, &x).unwrap()
                    * om.wedge_power(mbar).top_coefficient()
                    / factorial(mbar);
                let rhs =
                    alpha.wedge(&om.wedge_power(mbar - 1)).top_coefficient() / factorial(mbar - 1);
                assert!((lhs - rhs).norm() < 1e-11, "{sig}: {lhs} {rhs}");
            }
        }
    }

    #[test]
    fn density_requires_k_below_mbar() {
        let h = build_metric(Signature::definite(2), None, None).unwrap();
        let c2 = chern_polynomial(2, 2).unwrap();
        assert!(matches!(
            lovelock_density(&h, &c2, &[0.0; 4]),
            Err(Error::DegreeNotBelowDimension { k: 2, mbar: 2 })
        ));
        let c1 = chern_polynomial(1, 2).unwrap();
        assert_eq!(
            lovelock_density(&h, &c1, &[0.0; 4]).unwrap(),
            Complex64::new(0.0, 0.0)
        );
    }

    #[test]
    fn first_chern_density_is_real_and_frame_invariant() {
        let h = kahler(Signature::new(2, 2).unwrap(), 2);
        let c1 = chern_polynomial(1, 2).unwrap();
        for x in MetricField::probe_points(4).into_iter().take(5) {
            let d = lovelock_density(&h, &c1, &x).unwrap();
            assert!(d.im.abs() < 1e-10);
            assert!(d.norm() > 1e-5);
            let pg = PointGeometry::new(&h.jet(&x), &x).unwrap();
            let rot = [
                Complex64::new(0.6, 0.0),
                Complex64::new(0.0, 0.8),
                Complex64::new(0.0, 0.8),
                Complex64::new(0.6, 0.0),
            ];
            let rc = pg.complex_curvature().conjugate_by(&rot).unwrap();
            let form = evaluate_invariant(&c1, &rc).unwrap();
            let om = kahler_form_at(2, &pg.h);
            let d2 = form_inner_with_inverse(&form, &om, &pg.hinv).unwrap();
            assert!((d - d2).norm() < 1e-11);
        }
    }

    #[test]
    fn first_chern_action_vanishes_on_torus() {
        for sig in [Signature::definite(2), Signature::new(2, 2).unwrap()] {
            let h = kahler(sig, 6);
            let c1 = chern_polynomial(1, 2).unwrap();
            let report = action(&h, &c1, 12).unwrap();
            assert!(report.value.abs() < 1e-8, "{sig}: {report:?}");
            let flat = build_metric(sig, None, None).unwrap();
            assert_eq!(action(&flat, &c1, 4).unwrap().value, 0.0);
        }
    }

    fn raw_metric(shift: f64) -> MetricField {
        let n = 4;
        let mut raw = vec![ScalarField::zero(n); n * n];
        let f = ScalarField::shifted_sin_axis(n, 1, 0.3 + shift)
            .mul(&ScalarField::shifted_sin_axis(n, 2, 1.0))
            .unwrap()
            .scale_real(0.1);
        let g = ScalarField::shifted_sin_axis(n, 3, 0.2)
            .mul(&ScalarField::shifted_sin_axis(n, 1, shift))
            .unwrap()
            .scale_real(0.08);
        for a in [0, 2] {
            raw[a * n + a] = f.clone();
        }
        raw[1] = g.clone();
        raw[4] = g.clone();
        raw[2 * n + 3] = g.clone();
        raw[3 * n + 2] = g;
        build_metric(Signature::definite(2), None, Some(&raw)).unwrap()
    }

    #[test]
    fn action_is_translation_invariant() {
        let c1 = chern_polynomial(1, 2).unwrap();
        let a = action(&raw_metric(0.0), &c1, 12).unwrap();
        let b = action(&raw_metric(std::f64::consts::PI / 12.0), &c1, 12).unwrap();
        assert!(a.value.abs() > 1e-4, "{a:?}");
        assert!((a.value - b.value).abs() < 1e-8, "{a:?} {b:?}");
        assert!(a.estimated_error < 1e-5);
    }

    #[test]
    fn wedge_densities_match_gram_pairing() {
        let sig3 = Signature::new(2, 4).unwrap();
        let c1 = chern_polynomial(1, 3).unwrap();
        let cases = [
            (raw_metric(0.4), vec![chern_polynomial(1, 2).unwrap()]),
            (kahler(Signature::new(2, 2).unwrap(), 3), vec![chern_polynomial(1, 2).unwrap()]),
            (
                kahler(sig3, 4),
                vec![
                    c1.clone(),
                    chern_polynomial(2, 3).unwrap(),
                    c1.mul(&c1).unwrap(),
                    InvariantPolynomial::trace_monomial(&[2], 3).unwrap(),
                ],
            ),
        ];
        for (h, thetas) in cases {
            for x in MetricField::probe_points(h.n()).into_iter().take(3) {
                let pg = PointGeometry::new(&h.jet(&x), &x).unwrap();
                let (dens, measure) = lovelock_densities_at(&pg, &thetas).unwrap();
                assert!((measure - measure_density(h.mbar(), &pg.h)).norm() < 1e-14);
                for (t, d) in thetas.iter().zip(dens) {
                    let direct = lovelock_density(&h, t, &x).unwrap() * measure;
                    assert!(direct.norm() > 1e-8);
                    assert!((d - direct).norm() < 1e-12 * (1.0 + direct.norm()), "{d} {direct}");
                }
            }
        }
    }
}
