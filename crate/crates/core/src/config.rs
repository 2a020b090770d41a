//! Run configuration: a flat key-value text format with dotted section
//! names, diff-able and hashable for resumable pipelines.
//!
//! Floating-point values serialize with 17 significant digits so that
//! parse → serialize → parse is the identity.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{derive_scales, ModelSpec, ScaleSet};
use crate::pde::{CglStepper, PerturbationSupport, StepperOptions};

/// Parsed key-value file, keys sorted canonically.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::validation(format!(
                    "line {}: expected `key = value`, got `{raw}`",
                    lineno + 1
                ))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() || value.is_empty() {
                return Err(Error::validation(format!(
                    "line {}: empty key or value",
                    lineno + 1
                )));
            }
            if entries.insert(key.clone(), value).is_some() {
                return Err(Error::validation(format!(
                    "line {}: duplicate key `{key}`",
                    lineno + 1
                )));
            }
        }
        Ok(Config { entries })
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn set_f64(&mut self, key: &str, value: f64) {
        self.entries.insert(key.to_string(), format_f64(value));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|k| k.as_str())
    }

    /// Canonical serialization: sorted `key = value` lines.
    pub fn to_canonical_string(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::validation(format!("missing key `{key}`")))
    }

    fn require_f64(&self, key: &str) -> Result<f64> {
        self.require(key)?.parse::<f64>().map_err(|_| {
            Error::validation(format!(
                "key `{key}` must be a number, got `{}`",
                self.get(key).unwrap_or("")
            ))
        })
    }

    fn optional_f64(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<f64>().map(Some).map_err(|_| {
                Error::validation(format!("key `{key}` must be a number, got `{v}`"))
            }),
        }
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.optional_f64(key)?.unwrap_or(default))
    }

    fn require_u64(&self, key: &str) -> Result<u64> {
        self.require(key)?.parse::<u64>().map_err(|_| {
            Error::validation(format!(
                "key `{key}` must be a non-negative integer, got `{}`",
                self.get(key).unwrap_or("")
            ))
        })
    }

    fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse::<u64>().map_err(|_| {
                Error::validation(format!(
                    "key `{key}` must be a non-negative integer, got `{v}`"
                ))
            }),
        }
    }
}

/// 17 significant digits: enough to round-trip any f64.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum ExperimentMode {
    Dissipative,
    Forward,
    Sampling,
}

impl ExperimentMode {
    pub fn parse(s: &str) -> Result<ExperimentMode> {
        match s {
            "dissipative" => Ok(ExperimentMode::Dissipative),
            "forward" => Ok(ExperimentMode::Forward),
            "sampling" => Ok(ExperimentMode::Sampling),
            other => Err(Error::validation(format!(
                "experiment.mode must be one of dissipative|forward|sampling, \
                 got `{other}`"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentMode::Dissipative => "dissipative",
            ExperimentMode::Forward => "forward",
            ExperimentMode::Sampling => "sampling",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum NormChoice {
    Grid,
    Lattice,
}

impl NormChoice {
    pub fn parse(s: &str) -> Result<NormChoice> {
        match s {
            "grid" => Ok(NormChoice::Grid),
            "lattice" => Ok(NormChoice::Lattice),
            other => Err(Error::validation(format!(
                "norm must be `grid` or `lattice`, got `{other}`"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            NormChoice::Grid => "grid",
            NormChoice::Lattice => "lattice",
        }
    }
}

/// Fully validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub alpha: f64,
    pub beta: f64,
    pub q_star: f64,
    pub m_star_override: Option<f64>,
    pub k_star_prefactor: f64,

    pub domain_length: f64,
    pub grid_points: usize,
    pub dt: f64,
    pub t_transient: f64,
    pub t_final: f64,
    pub snapshot_every: f64,
    pub seed: u64,

    pub twin_epsilon0: f64,
    pub twin_support: PerturbationSupport,
    pub twin_seed: u64,
    pub twin_t_final: f64,

    pub experiment_mode: ExperimentMode,
    pub experiment_epsilon: f64,
    pub experiment_ell: f64,
    pub experiment_l_inner: f64,
    pub experiment_e_hat: f64,
    pub experiment_f_hat: f64,
    pub experiment_prefactors: Vec<f64>,
    pub experiment_lambda: f64,

    pub entropy_norm: NormChoice,
    pub entropy_n_max: usize,
    pub entropy_eps_min: f64,
    pub entropy_eps_max: f64,
    pub entropy_per_decade: usize,
    pub entropy_fit_lo: usize,
    pub entropy_fit_hi: usize,
    pub entropy_window: f64,

    pub output_dir: Option<String>,
}

const KNOWN_KEYS: &[&str] = &[
    "model.type",
    "model.alpha",
    "model.beta",
    "model.q_star",
    "model.m_star_override",
    "scales.k_star_prefactor",
    "simulation.domain_length",
    "simulation.grid_points",
    "simulation.dt",
    "simulation.t_transient",
    "simulation.t_final",
    "simulation.snapshot_every",
    "simulation.seed",
    "twin.epsilon0",
    "twin.support",
    "twin.seed",
    "twin.t_final",
    "experiment.mode",
    "experiment.epsilon",
    "experiment.ell",
    "experiment.l_inner",
    "experiment.e_hat",
    "experiment.f_hat",
    "experiment.k_star_prefactors",
    "experiment.lambda",
    "entropy.norm",
    "entropy.n_max",
    "entropy.eps_min",
    "entropy.eps_max",
    "entropy.per_decade",
    "entropy.fit_lo",
    "entropy.fit_hi",
    "entropy.window",
    "output.dir",
];

impl RunConfig {
    pub fn from_config(cfg: &Config) -> Result<RunConfig> {
        for key in cfg.keys() {
            if !KNOWN_KEYS.contains(&key) {
                return Err(Error::validation(format!("unknown configuration key `{key}`")));
            }
        }
        let model_type = cfg.require("model.type")?;
        if model_type != "cgl" {
            return Err(Error::validation(format!(
                "model.type must be `cgl`, got `{model_type}`"
            )));
        }
        let alpha = cfg.require_f64("model.alpha")?;
        let beta = cfg.require_f64("model.beta")?;
        let q_star = cfg.require_f64("model.q_star")?;
        let m_star_override = cfg.optional_f64("model.m_star_override")?;
        let k_star_prefactor = cfg.f64_or("scales.k_star_prefactor", 4.0)?;

        let domain_length = cfg.require_f64("simulation.domain_length")?;
        let grid_points = cfg.require_u64("simulation.grid_points")? as usize;
        let dt = cfg.require_f64("simulation.dt")?;
        let t_transient = cfg.f64_or("simulation.t_transient", 0.0)?;
        let t_final = cfg.require_f64("simulation.t_final")?;
        let snapshot_every = cfg.require_f64("simulation.snapshot_every")?;
        let seed = cfg.u64_or("simulation.seed", 0)?;

        let twin_epsilon0 = cfg.f64_or("twin.epsilon0", 1e-4)?;
        let twin_support = match cfg.get("twin.support").unwrap_or("lattice-only") {
            "lattice-only" => PerturbationSupport::LatticeOnly,
            "everywhere" => PerturbationSupport::Everywhere,
            other => {
                return Err(Error::validation(format!(
                    "twin.support must be `lattice-only` or `everywhere`, got `{other}`"
                )))
            }
        };
        let twin_seed = cfg.u64_or("twin.seed", seed.wrapping_add(1))?;

        let run = RunConfig {
            alpha,
            beta,
            q_star,
            m_star_override,
            k_star_prefactor,
            domain_length,
            grid_points,
            dt,
            t_transient,
            t_final,
            snapshot_every,
            seed,
            twin_epsilon0,
            twin_support,
            twin_seed,
            twin_t_final: 0.0, // placeholder, set below with scale knowledge
            experiment_mode: ExperimentMode::parse(
                cfg.get("experiment.mode").unwrap_or("dissipative"),
            )?,
            experiment_epsilon: cfg.f64_or("experiment.epsilon", 1e-4)?,
            experiment_ell: 0.0, // set below
            experiment_l_inner: 0.0,
            experiment_e_hat: cfg.f64_or("experiment.e_hat", 0.05)?,
            experiment_f_hat: cfg.f64_or("experiment.f_hat", 1.0)?,
            experiment_prefactors: parse_list(
                cfg.get("experiment.k_star_prefactors").unwrap_or("2,4,8"),
            )?,
            experiment_lambda: 0.0,
            entropy_norm: NormChoice::parse(cfg.get("entropy.norm").unwrap_or("lattice"))?,
            entropy_n_max: cfg.u64_or("entropy.n_max", 12)? as usize,
            entropy_eps_min: cfg.f64_or("entropy.eps_min", 1e-3)?,
            entropy_eps_max: cfg.f64_or("entropy.eps_max", 1.0)?,
            entropy_per_decade: cfg.u64_or("entropy.per_decade", 16)? as usize,
            entropy_fit_lo: cfg.u64_or("entropy.fit_lo", 2)? as usize,
            entropy_fit_hi: cfg.u64_or("entropy.fit_hi", 8)? as usize,
            entropy_window: 0.0,
            output_dir: cfg.get("output.dir").map(|s| s.to_string()),
        };
        let scales = run.scales()?;
        let quarter = domain_length / 4.0;
        let mut run = run;
        run.twin_t_final = cfg.f64_or("twin.t_final", 20.0 * scales.tau_star)?;
        run.experiment_ell = cfg.f64_or("experiment.ell", 2.0 * scales.delta_star)?;
        run.experiment_l_inner = cfg.f64_or("experiment.l_inner", quarter / 2.0)?;
        run.experiment_lambda = cfg.f64_or("experiment.lambda", quarter)?;
        run.entropy_window = cfg.f64_or("entropy.window", quarter)?;
        run.validate()?;
        Ok(run)
    }

    pub fn parse_str(text: &str) -> Result<RunConfig> {
        RunConfig::from_config(&Config::parse(text)?)
    }

    pub fn model_spec(&self) -> ModelSpec {
        let mut spec = ModelSpec::cgl(self.alpha, self.beta, self.q_star);
        spec.m_star_override = self.m_star_override;
        spec
    }

    pub fn scales(&self) -> Result<ScaleSet> {
        derive_scales(&self.model_spec(), self.k_star_prefactor)
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.model_spec();
        let scales = self.scales()?;
        if !self.grid_points.is_power_of_two() || self.grid_points < 8 {
            return Err(Error::validation(format!(
                "simulation.grid_points must be a power of two >= 8, got {}",
                self.grid_points
            )));
        }
        let h = self.domain_length / self.grid_points as f64;
        // The sampling lattice must fall on grid points.
        let ratio = scales.delta_star / h;
        if (ratio - ratio.round()).abs() > 1e-6 * ratio.max(1.0) || ratio.round() < 1.0 {
            return Err(Error::validation(format!(
                "delta_star/h = {ratio} must be an integer: adjust \
                 simulation.domain_length or grid_points (delta_star = {})",
                scales.delta_star
            )));
        }
        if h > scales.delta_star / 8.0 * (1.0 + 1e-9) {
            return Err(Error::validation(format!(
                "grid spacing h = {h} must be at most delta_star/8 = {}",
                scales.delta_star / 8.0
            )));
        }
        // The stepper constructor checks dt against the stability limit.
        CglStepper::new(
            &spec,
            &scales,
            self.grid_points,
            self.domain_length,
            self.dt,
            StepperOptions::default(),
        )?;
        for (name, interval) in [
            ("simulation.snapshot_every", self.snapshot_every),
            ("natural time unit tau_star", scales.tau_star),
        ] {
            let steps = interval / self.dt;
            if (steps - steps.round()).abs() > 1e-6 * steps.max(1.0) {
                return Err(Error::validation(format!(
                    "{name} = {interval} must be an integer multiple of dt = {}",
                    self.dt
                )));
            }
        }
        if self.t_final < self.t_transient {
            return Err(Error::validation(
                "simulation.t_final must not precede simulation.t_transient",
            ));
        }
        let quarter = self.domain_length / 4.0;
        if self.experiment_lambda > quarter + 1e-12 {
            return Err(Error::validation(format!(
                "experiment.lambda = {} exceeds a quarter period {quarter}",
                self.experiment_lambda
            )));
        }
        if self.entropy_window > quarter + 1e-12 {
            return Err(Error::validation(format!(
                "entropy.window = {} exceeds a quarter period {quarter}",
                self.entropy_window
            )));
        }
        if self.entropy_fit_lo < 1
            || self.entropy_fit_hi > self.entropy_n_max
            || self.entropy_fit_lo + 2 > self.entropy_fit_hi + 1
        {
            return Err(Error::validation(format!(
                "entropy fit range ({}, {}) must span at least 3 window \
                 lengths within 1..=n_max = {}",
                self.entropy_fit_lo, self.entropy_fit_hi, self.entropy_n_max
            )));
        }
        if !(self.entropy_eps_min > 0.0) || self.entropy_eps_max <= self.entropy_eps_min {
            return Err(Error::validation(
                "entropy.eps_min must be positive and below entropy.eps_max",
            ));
        }
        if self.experiment_prefactors.is_empty() {
            return Err(Error::validation("experiment.k_star_prefactors must be non-empty"));
        }
        Ok(())
    }

    /// Canonical config carrying every effective value.
    pub fn to_config(&self) -> Config {
        let mut c = Config::default();
        c.set("model.type", "cgl");
        c.set_f64("model.alpha", self.alpha);
        c.set_f64("model.beta", self.beta);
        c.set_f64("model.q_star", self.q_star);
        if let Some(m) = self.m_star_override {
            c.set_f64("model.m_star_override", m);
        }
        c.set_f64("scales.k_star_prefactor", self.k_star_prefactor);
        c.set_f64("simulation.domain_length", self.domain_length);
        c.set("simulation.grid_points", self.grid_points.to_string());
        c.set_f64("simulation.dt", self.dt);
        c.set_f64("simulation.t_transient", self.t_transient);
        c.set_f64("simulation.t_final", self.t_final);
        c.set_f64("simulation.snapshot_every", self.snapshot_every);
        c.set("simulation.seed", self.seed.to_string());
        c.set_f64("twin.epsilon0", self.twin_epsilon0);
        c.set(
            "twin.support",
            match self.twin_support {
                PerturbationSupport::LatticeOnly => "lattice-only",
                PerturbationSupport::Everywhere => "everywhere",
            },
        );
        c.set("twin.seed", self.twin_seed.to_string());
        c.set_f64("twin.t_final", self.twin_t_final);
        c.set("experiment.mode", self.experiment_mode.as_str());
        c.set_f64("experiment.epsilon", self.experiment_epsilon);
        c.set_f64("experiment.ell", self.experiment_ell);
        c.set_f64("experiment.l_inner", self.experiment_l_inner);
        c.set_f64("experiment.e_hat", self.experiment_e_hat);
        c.set_f64("experiment.f_hat", self.experiment_f_hat);
        c.set(
            "experiment.k_star_prefactors",
            self.experiment_prefactors
                .iter()
                .map(|p| format_f64(*p))
                .collect::<Vec<_>>()
                .join(","),
        );
        c.set_f64("experiment.lambda", self.experiment_lambda);
        c.set("entropy.norm", self.entropy_norm.as_str());
        c.set("entropy.n_max", self.entropy_n_max.to_string());
        c.set_f64("entropy.eps_min", self.entropy_eps_min);
        c.set_f64("entropy.eps_max", self.entropy_eps_max);
        c.set("entropy.per_decade", self.entropy_per_decade.to_string());
        c.set("entropy.fit_lo", self.entropy_fit_lo.to_string());
        c.set("entropy.fit_hi", self.entropy_fit_hi.to_string());
        c.set_f64("entropy.window", self.entropy_window);
        if let Some(dir) = &self.output_dir {
            c.set("output.dir", dir.clone());
        }
        c
    }

    /// Standard amplitude-turbulent instance used by the examples and tests:
    /// alpha = 2, beta = -2, q_star = 2 on a 64·delta_star domain.
    pub fn chaotic_default() -> RunConfig {
        let model = ModelSpec::cgl(2.0, -2.0, 2.0);
        let scales = derive_scales(&model, 4.0).unwrap();
        let grid_points = 1024usize;
        let domain_length = 64.0 * scales.delta_star;
        let dt = scales.tau_star / 512.0;
        let quarter = domain_length / 4.0;
        RunConfig {
            alpha: 2.0,
            beta: -2.0,
            q_star: 2.0,
            m_star_override: None,
            k_star_prefactor: 4.0,
            domain_length,
            grid_points,
            dt,
            t_transient: 20.0 * scales.tau_star,
            t_final: 20.0 * scales.tau_star + 40.0 * scales.tau_star,
            snapshot_every: scales.tau_star,
            seed: 7,
            twin_epsilon0: 1e-4,
            twin_support: PerturbationSupport::LatticeOnly,
            twin_seed: 8,
            twin_t_final: 20.0 * scales.tau_star + 50.0 * scales.tau_star,
            experiment_mode: ExperimentMode::Dissipative,
            experiment_epsilon: 1e-4,
            experiment_ell: 2.0 * scales.delta_star,
            experiment_l_inner: quarter / 2.0,
            experiment_e_hat: 0.05,
            experiment_f_hat: 1.0,
            experiment_prefactors: vec![2.0, 4.0, 8.0],
            experiment_lambda: quarter,
            entropy_norm: NormChoice::Lattice,
            entropy_n_max: 12,
            entropy_eps_min: 1e-3,
            entropy_eps_max: 1.0,
            entropy_per_decade: 16,
            entropy_fit_lo: 2,
            entropy_fit_hi: 8,
            entropy_window: quarter,
            output_dir: None,
        }
    }

    /// Non-cryptographic hash of the canonical form, for provenance records.
    pub fn quick_hash(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.to_config().to_canonical_string().hash(&mut h);
        h.finish()
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| {
            p.trim().parse::<f64>().map_err(|_| {
                Error::validation(format!("list entry `{p}` is not a number"))
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_rejects_malformed_lines() {
        assert!(Config::parse("model.type cgl").is_err());
        assert!(Config::parse("model.type =").is_err());
        assert!(Config::parse("a = 1\na = 2").is_err());
        let c = Config::parse("# comment\n\nmodel.type = cgl # trailing\n").unwrap();
        assert_eq!(c.get("model.type"), Some("cgl"));
    }

    #[test]
    fn run_config_round_trips_through_text() {
        let run = RunConfig::chaotic_default();
        let text = run.to_config().to_canonical_string();
        let back = RunConfig::parse_str(&text).unwrap();
        assert_eq!(run, back);
        // Second round trip is textually identical.
        let text2 = back.to_config().to_canonical_string();
        assert_eq!(text, text2);
    }

    #[test]
    fn missing_q_star_names_the_key() {
        let run = RunConfig::chaotic_default();
        let mut cfg = run.to_config();
        let text = cfg
            .to_canonical_string()
            .lines()
            .filter(|l| !l.starts_with("model.q_star"))
            .collect::<Vec<_>>()
            .join("\n");
        cfg = Config::parse(&text).unwrap();
        let err = RunConfig::from_config(&cfg).unwrap_err();
        assert!(err.to_string().contains("model.q_star"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let run = RunConfig::chaotic_default();
        let mut cfg = run.to_config();
        cfg.set("model.gamma", "1.0");
        let err = RunConfig::from_config(&cfg).unwrap_err();
        assert!(err.to_string().contains("model.gamma"));
    }

    #[test]
    fn validation_enforces_lattice_alignment() {
        let mut run = RunConfig::chaotic_default();
        run.domain_length *= 1.01; // breaks delta_star/h integrality
        let err = run.validate().unwrap_err();
        assert!(err.to_string().contains("must be an integer"), "{err}");
    }

    #[test]
    fn validation_enforces_dt_divisibility_of_tau_star() {
        let mut run = RunConfig::chaotic_default();
        run.dt *= 0.97;
        assert!(run.validate().is_err());
    }

    #[test]
    fn m_star_override_round_trips() {
        let mut run = RunConfig::chaotic_default();
        run.m_star_override = Some(10.0);
        // Keep the derived quantities consistent with the new scales.
        let text = run.to_config().to_canonical_string();
        let back = RunConfig::parse_str(&text).unwrap();
        assert_eq!(back.m_star_override, Some(10.0));
        assert!((back.scales().unwrap().tau_star - 0.1).abs() < 1e-15);
    }

    #[test]
    fn format_f64_round_trips_awkward_values() {
        for v in [std::f64::consts::PI, 1e-300, 0.1 + 0.2, 6.02e23, -0.0] {
            let s = format_f64(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "{v} -> {s} -> {back}");
        }
    }
}
