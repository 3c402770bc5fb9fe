//! Scenario files: TOML schema, dotted-key overrides and validation.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::euler_lagrange::{
    frequency_pool, make_perturbation_from, EpsSchedule, Perturbation, PerturbationKind, ResidualConfig,
    Theta,
};
use crate::field::{FrequencyVector, ScalarField};
use crate::geometry::metric::{build_metric, MetricField};
use crate::geometry::structure::Signature;

/// Largest metric potential amplitude accepted by validation.
pub const METRIC_AMPLITUDE_BUDGET: f64 = 0.2;
/// Largest perturbation amplitude accepted by validation.
pub const KAPPA_AMPLITUDE_BUDGET: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Theorem2,
    Pfaffian,
    Closedness,
    NormalCoords,
    Continuation,
    Convergence,
}

impl Suite {
    /// Suites that evaluate the action and therefore need `k < m̄`.
    pub fn needs_action(self) -> bool {
        matches!(self, Suite::Theorem2 | Suite::Continuation | Suite::Convergence)
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Suite::Theorem2 => "theorem2",
            Suite::Pfaffian => "pfaffian",
            Suite::Closedness => "closedness",
            Suite::NormalCoords => "normal-coords",
            Suite::Continuation => "continuation",
            Suite::Convergence => "convergence",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    #[serde(rename = "N")]
    N,
    #[serde(rename = "eps")]
    Eps,
}

impl FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "N" | "n" => Ok(Axis::N),
            "eps" | "epsilon" => Ok(Axis::Eps),
            other => Err(Error::Scenario(format!("unknown convergence axis '{other}' (expected N or eps)"))),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::N => "N",
            Axis::Eps => "eps",
        })
    }
}

/// One explicit potential mode `c·e^{iν·x}` (the real part is taken).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub freq: Vec<i32>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct MetricSpec {
    /// `flat`, `random` or `modes`.
    #[serde(default = "default_metric_kind")]
    pub kind: String,
    #[serde(default = "default_metric_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_terms")]
    pub terms: usize,
    /// Defaults to the scenario seed.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub modes: Vec<ModeSpec>,
}

fn default_metric_kind() -> String {
    "random".into()
}
fn default_metric_amplitude() -> f64 {
    0.05
}
fn default_terms() -> usize {
    3
}

impl Default for MetricSpec {
    fn default() -> Self {
        Self {
            kind: default_metric_kind(),
            amplitude: default_metric_amplitude(),
            terms: default_terms(),
            seed: None,
            modes: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub seed: u64,
    #[serde(default = "default_kappa_amplitude")]
    pub amplitude: f64,
    /// Draw modes from the metric's frequency pool.
    #[serde(default = "default_true")]
    pub matched: bool,
}

fn default_kappa_amplitude() -> f64 {
    0.05
}
fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Tolerances {
    #[serde(default = "tol_residual")]
    pub residual: f64,
    #[serde(default = "tol_slope")]
    pub slope: f64,
    #[serde(default = "tol_pointwise")]
    pub pointwise: f64,
    #[serde(default = "tol_closedness")]
    pub closedness: f64,
    #[serde(default = "tol_ratio")]
    pub closedness_ratio: f64,
    #[serde(default = "tol_jet")]
    pub jet: f64,
}

fn tol_residual() -> f64 {
    1e-3
}
fn tol_slope() -> f64 {
    0.2
}
fn tol_pointwise() -> f64 {
    1e-10
}
fn tol_closedness() -> f64 {
    1e-6
}
fn tol_ratio() -> f64 {
    10.0
}
fn tol_jet() -> f64 {
    1e-9
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            residual: tol_residual(),
            slope: tol_slope(),
            pointwise: tol_pointwise(),
            closedness: tol_closedness(),
            closedness_ratio: tol_ratio(),
            jet: tol_jet(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConvergenceSpec {
    #[serde(default = "default_axis")]
    pub axis: Axis,
    /// Grid sizes for the `N` axis.
    #[serde(default)]
    pub n_levels: Vec<usize>,
    /// Scale factors applied to the ε schedule for the `eps` axis.
    #[serde(default)]
    pub eps_scales: Vec<f64>,
}

fn default_axis() -> Axis {
    Axis::N
}

impl Default for ConvergenceSpec {
    fn default() -> Self {
        Self {
            axis: Axis::N,
            n_levels: Vec::new(),
            eps_scales: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Scenario {
    pub name: String,
    pub suite: Suite,
    pub mbar: usize,
    /// `[neg, pos]` real dimensions.
    pub signature: [usize; 2],
    #[serde(default)]
    pub thetas: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_n")]
    pub n_grid: usize,
    /// Refined grid for the closedness suite; defaults to `n_grid + 4`.
    #[serde(default)]
    pub n_refine: Option<usize>,
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
    #[serde(default)]
    pub metric: MetricSpec,
    #[serde(default)]
    pub perturbations: Vec<PerturbationSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Probe points for pointwise suites.
    #[serde(default = "default_points")]
    pub points: usize,
    /// Interior samples of the continuation path.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Jet order for the normal-coords suite.
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default)]
    pub convergence: ConvergenceSpec,
}

fn default_n() -> usize {
    12
}
fn default_eps() -> Vec<f64> {
    EpsSchedule::default().0
}
fn default_points() -> usize {
    20
}
fn default_samples() -> usize {
    9
}
fn default_order() -> usize {
    3
}

/// Parses `value` as a TOML literal, falling back to a bare string.
fn parse_override_value(value: &str) -> toml::Value {
    let doc = format!("v = {value}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(value.into())),
        Err(_) => toml::Value::String(value.into()),
    }
}

/// Applies `a.b.c=value` to a TOML table.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Scenario(format!("override '{assignment}' is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Scenario(format!("override key '{key}' is malformed")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Scenario(format!("override key '{key}': '{p}' is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_override_value(value.trim()));
    Ok(())
}

impl Scenario {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Scenario(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let s: Scenario = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text, overrides).map_err(|e| match e {
            Error::Scenario(msg) => Error::Scenario(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn signature(&self) -> Result<Signature> {
        let [neg, pos] = self.signature;
        if neg + pos != 2 * self.mbar {
            return Err(Error::Scenario(format!(
                "field 'signature': entries must sum to 2·mbar = {}, got {neg} + {pos}",
                2 * self.mbar
            )));
        }
        Signature::new(neg, pos).map_err(|_| {
            Error::Scenario(format!(
                "field 'signature': entries must be even, got [{neg}, {pos}]"
            ))
        })
    }

    pub fn parsed_thetas(&self) -> Result<Vec<Theta>> {
        self.thetas.iter().map(|t| Theta::parse(t, self.mbar)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::Scenario(format!("field '{field}': {msg}")));
        if self.name.trim().is_empty() {
            return bad("name", "must be non-empty".into());
        }
        if !(1..=4).contains(&self.mbar) {
            return bad("mbar", format!("must be between 1 and 4, got {}", self.mbar));
        }
        self.signature()?;
        let thetas = self
            .parsed_thetas()
            .map_err(|e| Error::Scenario(format!("field 'thetas': {e}")))?;
        let needs_theta = matches!(
            self.suite,
            Suite::Theorem2 | Suite::Continuation | Suite::Convergence | Suite::Closedness
        );
        if needs_theta && thetas.is_empty() {
            return bad("thetas", format!("suite {} needs at least one polynomial", self.suite));
        }
        if self.suite.needs_action() {
            for t in &thetas {
                if t.degree() >= self.mbar {
                    return bad(
                        "thetas",
                        format!(
                            "'{}' has degree k = {} but the action requires k < mbar = {}",
                            t.name,
                            t.degree(),
                            self.mbar
                        ),
                    );
                }
            }
            if self.perturbations.is_empty() {
                return bad("perturbations", format!("suite {} needs at least one perturbation", self.suite));
            }
        }
        if self.n_grid < 2 {
            return bad("n-grid", format!("must be at least 2, got {}", self.n_grid));
        }
        if let Some(r) = self.n_refine {
            if r <= self.n_grid {
                return bad("n-refine", format!("must exceed n-grid = {}", self.n_grid));
            }
        }
        if self.eps.is_empty() || self.eps.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
            return bad("eps", "must be a non-empty list of positive steps".into());
        }
        if self.eps.windows(2).any(|w| w[1] >= w[0]) {
            return bad("eps", "must be strictly decreasing".into());
        }
        match self.metric.kind.as_str() {
            "flat" | "random" | "modes" => {}
            other => return bad("metric.kind", format!("unknown kind '{other}' (flat, random, modes)")),
        }
        if !(self.metric.amplitude >= 0.0) || self.metric.amplitude > METRIC_AMPLITUDE_BUDGET {
            return bad(
                "metric.amplitude",
                format!("{} outside the nondegeneracy budget [0, {METRIC_AMPLITUDE_BUDGET}]", self.metric.amplitude),
            );
        }
        for (i, m) in self.metric.modes.iter().enumerate() {
            if m.freq.len() != 2 * self.mbar {
                return bad(&format!("metric.modes[{i}].freq"), format!("needs {} entries", 2 * self.mbar));
            }
            if m.re.hypot(m.im) > METRIC_AMPLITUDE_BUDGET {
                return bad(&format!("metric.modes[{i}]"), "coefficient outside the nondegeneracy budget".into());
            }
        }
        for (i, p) in self.perturbations.iter().enumerate() {
            if !(p.amplitude >= 0.0) || p.amplitude > KAPPA_AMPLITUDE_BUDGET {
                return bad(
                    &format!("perturbations[{i}].amplitude"),
                    format!("{} outside the nondegeneracy budget [0, {KAPPA_AMPLITUDE_BUDGET}]", p.amplitude),
                );
            }
        }
        if self.suite == Suite::NormalCoords && !(2..=4).contains(&self.order) {
            return bad("order", format!("must be between 2 and 4, got {}", self.order));
        }
        if self.samples == 0 {
            return bad("samples", "must be positive".into());
        }
        Ok(())
    }

    pub fn metric_seed(&self) -> u64 {
        self.metric.seed.unwrap_or(self.seed)
    }

    /// Real potential described by the metric spec (`None` for flat).
    pub fn potential(&self) -> Result<Option<ScalarField>> {
        let n = 2 * self.mbar;
        match self.metric.kind.as_str() {
            "flat" => Ok(None),
            "random" => Ok(Some(random_potential(
                self.mbar,
                self.metric_seed(),
                self.metric.amplitude,
                self.metric.terms,
            )?)),
            _ => {
                let mut phi = ScalarField::zero(n);
                for m in &self.metric.modes {
                    let mode = ScalarField::mode(FrequencyVector::new(m.freq.clone()), Complex64::new(m.re, m.im))?;
                    phi = phi.add(&mode)?;
                }
                Ok(Some(phi.real_part()))
            }
        }
    }

    pub fn build_metric(&self) -> Result<MetricField> {
        build_metric(self.signature()?, self.potential()?.as_ref(), None)
    }

    pub fn build_perturbations(&self, h: &MetricField) -> Result<Vec<Perturbation>> {
        let pool = frequency_pool(h);
        self.perturbations
            .iter()
            .map(|p| {
                let pool = if p.matched && !pool.is_empty() { Some(pool.as_slice()) } else { None };
                make_perturbation_from(p.kind, self.mbar, p.seed, p.amplitude, pool)
            })
            .collect()
    }

    pub fn residual_config(&self) -> ResidualConfig {
        ResidualConfig {
            n_grid: self.n_grid,
            eps: EpsSchedule(self.eps.clone()),
        }
    }

    /// Flat `key → value` view of the tolerances for reports.
    pub fn tolerance_map(&self) -> BTreeMap<String, f64> {
        let t = &self.tolerances;
        BTreeMap::from([
            ("residual".to_string(), t.residual),
            ("slope".to_string(), t.slope),
            ("pointwise".to_string(), t.pointwise),
            ("closedness".to_string(), t.closedness),
            ("closednessRatio".to_string(), t.closedness_ratio),
            ("jet".to_string(), t.jet),
        ])
    }
}

/// Sum of `terms` products `a·sin(x^α + s)·sin(y^β + t)` with random phases,
/// `β ≠ α` when `m̄ > 1`, and coefficients in `[0.7, 1]·amplitude`.
pub fn random_potential(mbar: usize, seed: u64, amplitude: f64, terms: usize) -> Result<ScalarField> {
    let n = 2 * mbar;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x706f_7465_6e74);
    let mut phi = ScalarField::zero(n);
    for t in 0..terms {
        let alpha = t % mbar;
        let beta = if mbar > 1 { (alpha + 1 + rng.gen_range(0..mbar - 1)) % mbar } else { alpha };
        let f = ScalarField::shifted_sin_axis(n, alpha, rng.gen_range(0.0..2.0 * PI))
            .mul(&ScalarField::shifted_sin_axis(n, mbar + beta, rng.gen_range(0.0..2.0 * PI)))?
            .scale_real(amplitude * rng.gen_range(0.7..1.0));
        phi = phi.add(&f)?;
    }
    Ok(phi)
}
