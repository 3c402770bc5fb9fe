//! Conformal metrics `(1 + f) δ` on T², checked against closed forms in `u = ½ log(1 + f)`.

use num_complex::Complex64;

use lovelock_core::char_forms::euler_integrand_at;
use lovelock_core::field::{integrate_grid, ScalarField};
use lovelock_core::geometry::{build_metric, MetricField, PointGeometry, Signature};

const A: f64 = 0.3;
const B: f64 = 0.2;

// f = A cos x + B sin 2y
fn f(x: &[f64]) -> [f64; 6] {
    let (cx, sx) = (x[0].cos(), x[0].sin());
    let (s2, c2) = ((2.0 * x[1]).sin(), (2.0 * x[1]).cos());
    // f, f_x, f_y, f_xx, f_yy, f_xy
    [A * cx + B * s2, -A * sx, 2.0 * B * c2, -A * cx, -4.0 * B * s2, 0.0]
}

fn conformal() -> MetricField {
    let n = 2;
    let g = ScalarField::cos_axis(n, 0, 1)
        .scale_real(A)
        .add(&ScalarField::sin_axis(n, 1, 2).scale_real(B))
        .unwrap();
    let z = ScalarField::zero(n);
    build_metric(Signature::definite(1), None, Some(&[g.clone(), z.clone(), z, g])).unwrap()
}

const POINTS: [[f64; 2]; 4] = [[0.1, 0.7], [1.9, 4.4], [3.3, 2.2], [5.6, 0.05]];

#[test]
fn christoffel_symbols_match_conformal_formula() {
    let h = conformal();
    for x in POINTS {
        let [v, vx, vy, ..] = f(&x);
        let (ux, uy) = (0.5 * vx / (1.0 + v), 0.5 * vy / (1.0 + v));
        let pg = PointGeometry::new(&h.jet(&x), &x).unwrap();
        // Γ^x_xx = u_x, Γ^x_yy = -u_x, Γ^y_xy = u_x, Γ^y_xx = -u_y
        let expect = [(0, 0, 0, ux), (0, 1, 1, -ux), (1, 0, 1, ux), (1, 0, 0, -uy), (1, 1, 1, uy)];
        for (k, i, j, value) in expect {
            assert!((pg.gamma(k, i, j) - value).norm() < 1e-14, "Γ^{k}_{i}{j} at {x:?}");
        }
    }
}

#[test]
fn gaussian_curvature_matches_conformal_formula() {
    let h = conformal();
    for x in POINTS {
        let [v, vx, vy, vxx, vyy, _] = f(&x);
        let w = 1.0 + v;
        let lap_u = 0.5 * ((vxx * w - vx * vx) + (vyy * w - vy * vy)) / (w * w);
        let k = -lap_u / w;
        let pg = PointGeometry::new(&h.jet(&x), &x).unwrap();
        let r = pg.riemann_lowered();
        let from_tensor = r[6] / pg.det;
        assert!((from_tensor - k).norm() < 1e-13, "{from_tensor} vs {k}");
        let e = euler_integrand_at(&pg);
        assert!((e - k / (2.0 * std::f64::consts::PI)).norm() < 1e-13);
    }
}

#[test]
fn gauss_bonnet_on_the_torus() {
    let h = conformal();
    let v = integrate_grid(2, 64, 2, |x| {
        let pg = PointGeometry::new(&h.jet(x), x)?;
        let density = euler_integrand_at(&pg) * pg.det.sqrt();
        Ok(vec![density, Complex64::new(density.norm(), 0.0)])
    })
    .unwrap();
    assert!(v[1].re > 1e-2);
    assert!(v[0].norm() < 1e-12 * v[1].re, "{} / {}", v[0], v[1]);
}
