//! Verification suites. Each pushes rows into a collector as results
//! arrive so that a failure mid-run still leaves a partial report.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::report::{CheckRow, ResidualRow, Row};
use super::scenario::{Axis, Scenario, Suite};
use crate::char_forms::{closedness_defect, pfaffian_vs_top_chern};
use crate::error::{Error, Result};
use crate::euler_lagrange::{
    continuation_path_residual, theorem2_residual, EpsSchedule, ResidualConfig, ResidualReport,
};
use crate::geometry::jets::{jet_extract, jet_prescribe, normal_coordinates, JetKey};
use crate::geometry::kahler::require_kahler;

fn residual_pass(r: &ResidualReport, s: &Scenario) -> bool {
    let slope_ok = r
        .convergence_slope
        .map_or(true, |v| (v - 2.0).abs() <= s.tolerances.slope);
    r.relative_residual < s.tolerances.residual && slope_ok
}

fn residual_row(r: ResidualReport, s: &Scenario, t: Option<f64>, level: Option<f64>) -> Row {
    let pass = residual_pass(&r, s);
    Row::Residual(ResidualRow {
        t,
        level,
        report: r,
        fitted_slope: None,
        pass,
    })
}

/// Deterministic points on the torus.
pub fn random_points(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7031_6e74);
    (0..count)
        .map(|_| (0..n).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect())
        .collect()
}

fn label_point(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v:.3}")).collect();
    format!("x=[{}]", parts.join(","))
}

/// Runs the scenario's suite, appending rows to `rows`.
pub fn run_suite(s: &Scenario, rows: &mut Vec<Row>) -> Result<()> {
    match s.suite {
        Suite::Theorem2 => theorem2(s, rows),
        Suite::Pfaffian => pfaffian(s, rows),
        Suite::Closedness => closedness(s, rows),
        Suite::NormalCoords => normal_coords(s, rows),
        Suite::Continuation => continuation(s, rows),
        Suite::Convergence => convergence(s, s.convergence.axis, rows),
    }
}

fn theorem2(s: &Scenario, rows: &mut Vec<Row>) -> Result<()> {
    let h = s.build_metric()?;
    let kappas = s.build_perturbations(&h)?;
    let thetas = s.parsed_thetas()?;
    for r in theorem2_residual(&h, &thetas, &kappas, &s.residual_config())? {
        rows.push(residual_row(r, s, None, None));
    }
    Ok(())
}

fn pfaffian(s: &Scenario, rows: &mut Vec<Row>) -> Result<()> {
    let h = s.build_metric()?;
    require_kahler(&h, 1e-10)?;
    for x in random_points(h.n(), s.points, s.seed) {
        let (e, c) = pfaffian_vs_top_chern(&h, &x)?;
        let error = (e - c).norm() / c.norm().max(f64::MIN_POSITIVE);
        rows.push(Row::Check(CheckRow {
            check: "pfaffian".into(),
            label: label_point(&x),
            value: e.re,
            reference: c.re,
            error,
            tolerance: s.tolerances.pointwise,
            pass: error < s.tolerances.pointwise,
        }));
    }
    Ok(())
}

fn closedness(s: &Scenario, rows: &mut Vec<Row>) -> Result<()> {
    let h = s.build_metric()?;
    let fine_n = s.n_refine.unwrap_or(s.n_grid + 4);
    for theta in s.parsed_thetas()? {
        let coarse = closedness_defect(&theta.poly, &h, s.n_grid)?;
        rows.push(Row::Check(CheckRow {
            check: "closedness".into(),
            label: format!("{} N={}", theta.name, s.n_grid),
            value: coarse,
            reference: 0.0,
            error: coarse,
            tolerance: s.tolerances.closedness,
            pass: coarse < s.tolerances.closedness,
        }));
        let fine = closedness_defect(&theta.poly, &h, fine_n)?;
        let ratio = coarse / fine.max(f64::MIN_POSITIVE);
        rows.push(Row::Check(CheckRow {
            check: "closedness-refinement".into(),
            label: format!("{} N={}->{}", theta.name, s.n_grid, fine_n),
            value: fine,
            reference: coarse,
            error: ratio,
            tolerance: s.tolerances.closedness_ratio,
            pass: ratio >= s.tolerances.closedness_ratio,
        }));
    }
    Ok(())
}

/// Multisets of `{1..=m}` of the given size, as sorted index lists.
fn multisets(m: usize, size: usize) -> Vec<Vec<usize>> {
    if size == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in multisets(m, size - 1) {
        let start = rest.last().copied().unwrap_or(1);
        for i in start..=m {
            let mut v = rest.clone();
            v.push(i);
            out.push(v);
        }
    }
    out
}

/// Random Hermitian targets `c(A;B)` for all `2 ≤ |A|, |B| ≤ size`.
pub fn random_jet_targets(mbar: usize, size: usize, seed: u64, scale: f64) -> Result<BTreeMap<JetKey, Complex64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6a65_7473);
    let sets: Vec<Vec<usize>> = (2..=size).flat_map(|k| multisets(mbar, k)).collect();
    let mut targets = BTreeMap::new();
    for (i, a) in sets.iter().enumerate() {
        for b in &sets[i..] {
            let key = JetKey::new(a.clone(), b.clone())?;
            let c = if a == b {
                Complex64::new(rng.gen_range(-scale..scale), 0.0)
            } else {
                Complex64::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale))
            };
            targets.insert(key.swapped(), c.conj());
            targets.insert(key, c);
        }
    }
    Ok(targets)
}

fn normal_coords(s: &Scenario, rows: &mut Vec<Row>) -> Result<()> {
    let h = s.build_metric()?;
    require_kahler(&h, 1e-10)?;
    for x in random_points(h.n(), s.points, s.seed) {
        let nc = normal_coordinates(&h, &x, s.order)?;
        let worst = nc.max_unit_b_jet();
        rows.push(Row::Check(CheckRow {
            check: "normal-coordinates".into(),
            label: label_point(&x),
            value: worst,
            reference: 0.0,
            error: worst,
            tolerance: s.tolerances.jet,
            pass: worst < s.tolerances.jet,
        }));
    }
    let sig = s.signature()?;
    let origin = vec![0.0; 2 * s.mbar];
    for size in 2..=s.order.min(3) {
        let targets = random_jet_targets(s.mbar, size, s.seed + size as u64, 0.05)?;
        let g = jet_prescribe(&targets, sig)?;
        let mut worst: f64 = 0.0;
        for (key, c) in &targets {
            worst = worst.max((jet_extract(&g, key, &origin)? - c).norm());
        }
        rows.push(Row::Check(CheckRow {
            check: "jet-prescribe".into(),
            label: format!("|A|,|B| <= {size}, {} targets", targets.len()),
            value: worst,
            reference: 0.0,
            error: worst,
            tolerance: s.tolerances.jet,
            pass: worst < s.tolerances.jet,
        }));
    }
    Ok(())
}

/// Interior samples `i/(count+1)`.
pub fn interior_samples(count: usize) -> Vec<f64> {
    (1..=count).map(|i| i as f64 / (count + 1) as f64).collect()
}

fn continuation(s: &Scenario, rows: &mut Vec<Row>) -> Result<()> {
    let h = s.build_metric()?;
    if !h.signature().is_definite() {
        return Err(Error::Scenario(
            "field 'signature': the continuation path starts at a definite background".into(),
        ));
    }
    let kappas = s.build_perturbations(&h)?;
    let thetas = s.parsed_thetas()?;
    let cfg = s.residual_config();
    for theta in &thetas {
        for t in interior_samples(s.samples) {
            for (t, reps) in continuation_path_residual(&h, theta, &kappas, &[t], &cfg)? {
                for r in reps {
                    rows.push(residual_row(r, s, Some(t), None));
                }
            }
        }
    }
    Ok(())
}

fn default_levels(s: &Scenario, axis: Axis) -> Vec<f64> {
    match axis {
        Axis::N if !s.convergence.n_levels.is_empty() => {
            s.convergence.n_levels.iter().map(|&n| n as f64).collect()
        }
        Axis::N => [6, 4, 2, 0]
            .iter()
            .filter(|&&d| s.n_grid >= d + 2)
            .map(|&d| (s.n_grid - d) as f64)
            .collect(),
        Axis::Eps if !s.convergence.eps_scales.is_empty() => s.convergence.eps_scales.clone(),
        Axis::Eps => vec![1.0, 0.5, 0.25],
    }
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .map(|(a, b)| (*a, *b))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Residuals at each refinement level of `axis` with a fitted slope per
/// `(Θ, κ)`: `d log₁₀(residual) / dN` on the `N` axis and the order of the
/// pre-extrapolation error `|D(ε_min) - pairing|` on the `eps` axis.
pub fn convergence(s: &Scenario, axis: Axis, rows: &mut Vec<Row>) -> Result<()> {
    let h = s.build_metric()?;
    let kappas = s.build_perturbations(&h)?;
    let thetas = s.parsed_thetas()?;
    let levels = default_levels(s, axis);
    let start = rows.len();
    for &level in &levels {
        let cfg = match axis {
            Axis::N => ResidualConfig {
                n_grid: level as usize,
                eps: EpsSchedule(s.eps.clone()),
            },
            Axis::Eps => ResidualConfig {
                n_grid: s.n_grid,
                eps: EpsSchedule(s.eps.iter().map(|e| e * level).collect()),
            },
        };
        for r in theorem2_residual(&h, &thetas, &kappas, &cfg)? {
            rows.push(residual_row(r, s, None, Some(level)));
        }
    }
    // group rows by (theta, kappa) and fit
    let per_level = thetas.len() * kappas.len();
    for g in 0..per_level {
        let idx: Vec<usize> = (0..levels.len()).map(|l| start + l * per_level + g).collect();
        let reports: Vec<&ResidualRow> = idx
            .iter()
            .map(|&i| match &rows[i] {
                Row::Residual(r) => r,
                Row::Check(_) => unreachable!("convergence rows are residual rows"),
            })
            .collect();
        let (fit, ok) = match axis {
            Axis::N => {
                let y: Vec<f64> = reports.iter().map(|r| r.report.relative_residual.max(1e-300).log10()).collect();
                let fit = fit_slope(&levels, &y);
                // non-increasing until the floor is reached
                let res: Vec<f64> = reports.iter().map(|r| r.report.relative_residual).collect();
                let ok = res
                    .windows(2)
                    .all(|w| w[1] <= w[0] * 1.5 || w[1] < s.tolerances.residual * 1e-3);
                (fit, ok)
            }
            Axis::Eps => {
                let x: Vec<f64> = levels
                    .iter()
                    .map(|l| (s.eps.last().copied().unwrap_or(1.0) * l).log10())
                    .collect();
                let measurable = reports.iter().all(|r| r.report.convergence_slope.is_some());
                let y: Vec<f64> = reports
                    .iter()
                    .map(|r| {
                        let d = r.report.central_differences.last().copied().unwrap_or(0.0);
                        (d - r.report.pairing_value).abs().max(1e-300).log10()
                    })
                    .collect();
                let fit = if measurable { fit_slope(&x, &y) } else { None };
                let ok = fit.map_or(true, |f| (f - 2.0).abs() <= s.tolerances.slope);
                (fit, ok)
            }
        };
        for &i in &idx {
            if let Row::Residual(r) = &mut rows[i] {
                r.fitted_slope = fit;
                r.pass = r.pass && ok;
            }
        }
    }
    Ok(())
}
