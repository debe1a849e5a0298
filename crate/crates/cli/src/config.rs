//! Run configuration: a flat TOML key/value file plus `--set key=value` overrides.
//!
//! Parsing resolves every default, so the canonical form (the serialized
//! [`RunConfig`]) names every parameter in effect and keys the cache.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use cocycle_lab::angle::IntervalRule;
use cocycle_lab::arithmetic::Frequency;
use cocycle_lab::cocycle::{CocycleSpec, ConstantCocycle, Gain, PeriodicSpline, Potential};
use cocycle_lab::regularity::{LeEstimator, LeSettings, Side};
use cocycle_lab::spectrum::UhThresholds;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: &str, message: impl Into<String>) -> Self {
        Self { field: field.to_string(), message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormKind {
    Schrodinger,
    Rescaled,
    /// `diag(λ, 1/λ)` at every phase; only `le` and `sweep` accept it.
    ConstantDiagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Extrapolated,
    Strip,
}

/// Fully resolved configuration. Field order fixes the canonical form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub frequency: String,
    pub lambda: f64,
    pub form: FormKind,
    pub potential_a: f64,
    pub potential_b: f64,
    /// Uniform samples of a tabulated potential; overrides `potential_a`, `potential_b`.
    pub potential_table: Vec<f64>,
    pub energy: f64,
    pub grid: usize,
    pub n_base: usize,
    pub max_level: usize,
    pub tau: f64,
    /// Replaces `2τ` in the interval radius when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_exponent: Option<f64>,
    pub e_min: f64,
    pub e_max: f64,
    pub e_points: usize,
    pub offset_max: f64,
    pub offset_min: f64,
    pub offset_ratio: f64,
    pub side: String,
    pub exactness_r: f64,
    pub tol: f64,
    pub n0: usize,
    pub max_n: usize,
    pub estimator: EstimatorKind,
    pub strip_eps: f64,
    pub strip_burn_in: usize,
    pub uh_n: usize,
    pub uh_grid: usize,
    pub uh_gap_floor: f64,
    pub uh_drift_ceiling: f64,
    pub bisect_tol: f64,
    pub gaps_max: usize,
    pub ids_n: usize,
    pub ids_phases: Vec<f64>,
    pub beta_first_level: usize,
    pub ldt_fraction: f64,
    pub ldt_lengths: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub ap_mu: f64,
    pub ap_n: usize,
    pub ap_c: f64,
    pub appendix_q: f64,
    pub out_dir: String,
}

/// Keys that must be present; every other key has a default.
const REQUIRED: [&str; 3] = ["frequency", "lambda", "potential"];

/// Known keys without a default.
const OPTIONAL: [&str; 1] = ["radius_exponent"];

impl RunConfig {
    /// Parses a config file's text with overrides applied on top.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::new("<file>", e.message()))?;
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| ConfigError::new(o, "override must be key=value"))?;
            let (k, v) = (k.trim(), v.trim());
            let value = parse_value(v);
            table.insert(k.to_string(), value);
        }
        Self::resolve(table)
    }

    pub fn from_path(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new("<file>", format!("{}: {e}", path.display())))?;
        Self::parse(&text, overrides)
    }

    fn resolve(mut t: toml::Table) -> Result<Self, ConfigError> {
        // A canonical form carries the potential as coefficients, so accept both.
        let has_potential = t.contains_key("potential") || t.contains_key("potential_a") || t.contains_key("potential_table");
        for key in REQUIRED {
            if key == "potential" && has_potential {
                continue;
            }
            if !t.contains_key(key) {
                return Err(ConfigError::new(key, "required key is missing"));
            }
        }
        if let Some(p) = t.remove("potential") {
            apply_potential(&mut t, p)?;
        }
        let lambda = get_f64(&t, "lambda")?;
        let (a, b) = (
            t.get("potential_a").map(|_| get_f64(&t, "potential_a")).transpose()?.unwrap_or(1.0),
            t.get("potential_b").map(|_| get_f64(&t, "potential_b")).transpose()?.unwrap_or(0.0),
        );
        // The default scan window covers λ·v ± 2.5 for the named potential.
        let range = if let Some(toml::Value::Array(xs)) = t.get("potential_table") {
            let v: Vec<f64> = xs.iter().filter_map(as_f64).collect();
            (v.iter().copied().fold(f64::INFINITY, f64::min), v.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        } else {
            Potential::cos_family(a, b).range()
        };
        let (lo, hi) = if lambda >= 0.0 { (lambda * range.0, lambda * range.1) } else { (lambda * range.1, lambda * range.0) };
        let defaults = Defaults { e_min: round_window(lo - 2.5), e_max: round_window(hi + 2.5) };
        let base = defaults.table();
        let mut full = base.clone();
        for (k, v) in &t {
            if !full.contains_key(k) && !OPTIONAL.contains(&k.as_str()) {
                return Err(ConfigError::new(k, "unknown key"));
            }
            full.insert(k.clone(), v.clone());
        }
        let cfg: RunConfig = deserialize(full).map_err(|e| ConfigError::new(&offending_key(&base, &t), e.message()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        Frequency::parse(&self.frequency).map_err(|e| ConfigError::new("frequency", e.to_string()))?;
        let positive = [
            ("lambda", self.lambda),
            ("tol", self.tol),
            ("offset_max", self.offset_max),
            ("offset_min", self.offset_min),
            ("bisect_tol", self.bisect_tol),
            ("ap_mu", self.ap_mu),
            ("ap_c", self.ap_c),
            ("appendix_q", self.appendix_q),
            ("uh_gap_floor", self.uh_gap_floor),
            ("uh_drift_ceiling", self.uh_drift_ceiling),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::new(k, format!("must be positive and finite, got {v}")));
            }
        }
        if !(self.tau > 2.0) {
            return Err(ConfigError::new("tau", format!("τ must exceed 2, got {}", self.tau)));
        }
        if self.n_base == 0 {
            return Err(ConfigError::new("n_base", "must be at least 1"));
        }
        if self.form == FormKind::Rescaled && self.lambda <= 1.0 {
            return Err(ConfigError::new("lambda", "the rescaled form needs λ > 1"));
        }
        if !(self.e_min < self.e_max) || self.e_points < 2 {
            return Err(ConfigError::new("e_points", "need e_min < e_max and at least two points"));
        }
        if !(self.offset_min < self.offset_max) || !(self.offset_ratio > 0.0 && self.offset_ratio < 1.0) {
            return Err(ConfigError::new("offset_ratio", "need offset_min < offset_max and a ratio in (0, 1)"));
        }
        if self.side != "above" && self.side != "below" {
            return Err(ConfigError::new("side", "must be \"above\" or \"below\""));
        }
        if !(self.strip_eps >= 0.0) {
            return Err(ConfigError::new("strip_eps", "must be nonnegative"));
        }
        if !(self.ldt_fraction > 0.0 && self.ldt_fraction < 1.0) {
            return Err(ConfigError::new("ldt_fraction", "must lie in (0, 1)"));
        }
        if self.ids_phases.is_empty() {
            return Err(ConfigError::new("ids_phases", "must be nonempty"));
        }
        if !self.potential_table.is_empty() {
            PeriodicSpline::new(self.potential_table.clone()).map_err(|e| ConfigError::new("potential_table", e.to_string()))?;
        }
        Ok(())
    }

    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Cache key of a command run under this configuration.
    pub fn hash(&self, command: &str) -> String {
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update([0]);
        h.update(self.canonical().as_bytes());
        hex::encode(h.finalize())
    }

    pub fn frequency(&self) -> Frequency {
        Frequency::parse(&self.frequency).expect("validated")
    }

    pub fn potential(&self) -> Potential {
        if self.potential_table.is_empty() {
            Potential::cos_family(self.potential_a, self.potential_b)
        } else {
            Potential::Table(PeriodicSpline::new(self.potential_table.clone()).expect("validated"))
        }
    }

    /// The cocycle at `energy`; `None` for the constant fixture.
    pub fn spec(&self, energy: f64) -> Option<CocycleSpec> {
        match self.form {
            FormKind::Schrodinger => Some(CocycleSpec::schrodinger(self.frequency(), self.lambda, self.potential(), energy)),
            FormKind::Rescaled => {
                Some(CocycleSpec::rescaled(self.frequency(), self.lambda, self.potential(), energy, Gain::Constant).expect("constant gain"))
            }
            FormKind::ConstantDiagonal => None,
        }
    }

    pub fn constant(&self) -> ConstantCocycle {
        ConstantCocycle::diagonal(self.lambda)
    }

    pub fn energies(&self) -> Vec<f64> {
        let h = (self.e_max - self.e_min) / (self.e_points - 1) as f64;
        (0..self.e_points).map(|k| self.e_min + h * k as f64).collect()
    }

    pub fn side(&self) -> Side {
        if self.side == "below" {
            Side::Below
        } else {
            Side::Above
        }
    }

    pub fn le_settings(&self) -> LeSettings {
        let estimator = match self.estimator {
            EstimatorKind::Extrapolated => LeEstimator::Extrapolated,
            EstimatorKind::Strip => LeEstimator::Strip { eps: self.strip_eps, burn_in: self.strip_burn_in },
        };
        LeSettings { n0: self.n0, grid_size: self.grid, tol: self.tol, max_n: self.max_n, estimator }
    }

    pub fn interval_rule(&self) -> IntervalRule {
        IntervalRule { n_base: self.n_base, tau: self.tau, exponent: self.radius_exponent }
    }

    pub fn uh_thresholds(&self) -> UhThresholds {
        UhThresholds { gap_floor: self.uh_gap_floor, drift_ceiling: self.uh_drift_ceiling }
    }
}

struct Defaults {
    e_min: f64,
    e_max: f64,
}

impl Defaults {
    fn table(&self) -> toml::Table {
        let text = format!(
            r#"
form = "schrodinger"
potential_a = 1.0
potential_b = 0.0
potential_table = []
energy = 0.0
grid = 8192
n_base = 3
max_level = 4
tau = 2.5
e_min = {e_min:?}
e_max = {e_max:?}
e_points = 201
offset_max = 1e-3
offset_min = 1e-8
offset_ratio = 0.5
side = "above"
exactness_r = 0.5
tol = 1e-4
n0 = 256
max_n = 65536
estimator = "extrapolated"
strip_eps = 0.02
strip_burn_in = 400
uh_n = 1024
uh_grid = 2048
uh_gap_floor = 1e-12
uh_drift_ceiling = 1e-6
bisect_tol = 1e-11
gaps_max = 4
ids_n = 4096
ids_phases = [0.1, 0.37]
beta_first_level = 2
ldt_fraction = 0.98
ldt_lengths = [50, 100, 200]
trials = 1000
seed = 0
ap_mu = 1000.0
ap_n = 100
ap_c = 10.0
appendix_q = 10.0
out_dir = "out"
frequency = ""
lambda = 0.0
"#,
            e_min = self.e_min,
            e_max = self.e_max
        );
        text.parse().expect("defaults parse")
    }
}

fn round_window(x: f64) -> f64 {
    (x * 4.0).round() / 4.0
}

fn apply_potential(t: &mut toml::Table, p: toml::Value) -> Result<(), ConfigError> {
    match p {
        toml::Value::String(s) if s == "almost_mathieu" => {
            t.insert("potential_a".into(), 2.0.into());
            t.insert("potential_b".into(), 0.0.into());
        }
        toml::Value::Table(inner) => {
            for (k, v) in inner {
                match k.as_str() {
                    "a" | "b" => {
                        t.insert(format!("potential_{k}"), v);
                    }
                    "table" => {
                        t.insert("potential_table".into(), v);
                    }
                    _ => return Err(ConfigError::new(&format!("potential.{k}"), "unknown key")),
                }
            }
        }
        _ => return Err(ConfigError::new("potential", "expected \"almost_mathieu\", { a, b } or { table }")),
    }
    Ok(())
}

fn parse_value(v: &str) -> toml::Value {
    format!("x = {v}").parse::<toml::Table>().ok().and_then(|mut t| t.remove("x")).unwrap_or_else(|| toml::Value::String(v.to_string()))
}

fn as_f64(v: &toml::Value) -> Option<f64> {
    match v {
        toml::Value::Float(x) => Some(*x),
        toml::Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn get_f64(t: &toml::Table, key: &str) -> Result<f64, ConfigError> {
    t.get(key).and_then(as_f64).ok_or_else(|| ConfigError::new(key, "expected a number"))
}

fn deserialize(t: toml::Table) -> Result<RunConfig, toml::de::Error> {
    toml::Value::Table(t).try_into()
}

/// Type errors carry no key, so find the first user key that fails on its own.
fn offending_key(base: &toml::Table, user: &toml::Table) -> String {
    for (k, v) in user {
        let mut one = base.clone();
        one.insert(k.clone(), v.clone());
        if deserialize(one).is_err() {
            return k.clone();
        }
    }
    "<config>".into()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "frequency = \"golden\"\nlambda = 10.0\npotential = \"almost_mathieu\"\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::parse(MINIMAL, &[]).unwrap();
        assert_eq!(c.grid, 8192);
        assert_eq!(c.n_base, 3);
        assert_eq!(c.tau, 2.5);
        assert_eq!(c.tol, 1e-4);
        assert_eq!((c.potential_a, c.potential_b), (2.0, 0.0));
        assert_eq!((c.e_min, c.e_max), (-22.5, 22.5));
    }

    #[test]
    fn tau_at_most_two_is_rejected() {
        let e = RunConfig::parse(MINIMAL, &["tau=2.0".into()]).unwrap_err();
        assert_eq!(e.field, "tau");
    }

    #[test]
    fn canonical_form_round_trips() {
        let c = RunConfig::parse(MINIMAL, &["radius_exponent=5.5".into(), "potential={a=1.0, b=0.2}".into()]).unwrap();
        let again = RunConfig::parse(&c.canonical(), &[]).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.canonical(), again.canonical());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = RunConfig::parse(&format!("{MINIMAL}gird = 3\n"), &[]).unwrap_err();
        assert_eq!(e.field, "gird");
        let e = RunConfig::parse(MINIMAL, &["potential={c=1.0}".into()]).unwrap_err();
        assert_eq!(e.field, "potential.c");
    }

    #[test]
    fn missing_required_key_names_the_field() {
        let e = RunConfig::parse("lambda = 10.0\npotential = \"almost_mathieu\"\n", &[]).unwrap_err();
        assert_eq!(e.field, "frequency");
    }

    #[test]
    fn wrong_type_names_the_field() {
        let e = RunConfig::parse(MINIMAL, &["grid=\"big\"".into()]).unwrap_err();
        assert_eq!(e.field, "grid", "{e}");
    }

    #[test]
    fn overrides_change_the_hash() {
        let a = RunConfig::parse(MINIMAL, &[]).unwrap();
        let b = RunConfig::parse(MINIMAL, &["energy=1.5".into()]).unwrap();
        assert_ne!(a.hash("le"), b.hash("le"));
        assert_ne!(a.hash("le"), a.hash("sweep"));
        assert_eq!(a.hash("le"), RunConfig::parse(MINIMAL, &[]).unwrap().hash("le"));
    }

    #[test]
    fn bad_frequency_is_a_config_error() {
        let e = RunConfig::parse("frequency = \"[0, 1]\"\nlambda = 10.0\npotential = \"almost_mathieu\"\n", &[]).unwrap_err();
        assert_eq!(e.field, "frequency");
    }
}
