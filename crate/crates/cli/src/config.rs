//! Flat key-value configuration for the benchmark harness.
//!
//! The format is deliberately plain: one `key = value` per line, `#`
//! starts a comment, unknown keys are errors. Every key is optional and
//! falls back to the double-well benchmark defaults.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use driftrelax::sampler::HmcConfig;
use thiserror::Error;

/// Observation times sit on the unit grid `T_k = k`.
pub const OBS_SPACING: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkConfig {
    /// Ensemble size of the plain bootstrap filter.
    pub n_particles_generic: usize,
    /// Ensemble size of the MCMC-rejuvenated filter.
    pub n_particles_mcmc: usize,
    /// Well-depth factor of the modified drift, in (0, 1].
    pub alpha: f64,
    /// Rung count of the relaxation ladder (epsilon = l / levels).
    pub levels: usize,
    /// Euler–Maruyama step size.
    pub dt: f64,
    /// Steps per observation gap; `steps_per_obs * dt` must equal 1.
    pub steps_per_obs: usize,
    /// Observation noise variance.
    pub obs_var: f64,
    /// Diffusion coefficient of both drifts.
    pub sigma: f64,
    /// Common starting point of all particles.
    pub x0: f64,
    /// Number of observations.
    pub n_obs: usize,
    /// Per-rung HMC settings.
    pub hmc: HmcConfig,
    /// Master seed for every random stream of the run.
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            n_particles_generic: 5000,
            n_particles_mcmc: 10,
            alpha: 0.1,
            levels: 10,
            dt: 0.01,
            steps_per_obs: 100,
            obs_var: 0.01,
            sigma: 0.5,
            x0: -1.0,
            n_obs: 10,
            hmc: HmcConfig::default(),
            seed: 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config line {line} is not `key = value`: `{text}`")]
    Malformed { line: usize, text: String },
    #[error("unknown config key `{key}`")]
    UnknownKey { key: String },
    #[error("invalid value for `{key}`: `{value}`")]
    InvalidValue { key: String, value: String },
    #[error("config constraint violated: {reason}")]
    Constraint { reason: String },
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
    })
}

impl BenchmarkConfig {
    /// Parses the key-value text and validates the result.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Malformed {
                line: idx + 1,
                text: raw.trim().to_string(),
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "n_particles_generic" => self.n_particles_generic = parse_value(key, value)?,
            "n_particles_mcmc" => self.n_particles_mcmc = parse_value(key, value)?,
            "alpha" => self.alpha = parse_value(key, value)?,
            "levels" => self.levels = parse_value(key, value)?,
            "dt" => self.dt = parse_value(key, value)?,
            "steps_per_obs" => self.steps_per_obs = parse_value(key, value)?,
            "obs_var" => self.obs_var = parse_value(key, value)?,
            "sigma" => self.sigma = parse_value(key, value)?,
            "x0" => self.x0 = parse_value(key, value)?,
            "n_obs" => self.n_obs = parse_value(key, value)?,
            "hmc_trials_per_level" => {
                self.hmc.metropolis_trials_per_level = parse_value(key, value)?
            }
            "hmc_leapfrog_steps" => self.hmc.leapfrog_steps_per_trial = parse_value(key, value)?,
            "hmc_step_size" => self.hmc.step_size = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let constraint = |reason: String| Err(ConfigError::Constraint { reason });
        if self.n_particles_generic == 0 {
            return constraint("n_particles_generic must be positive".into());
        }
        if self.n_particles_mcmc == 0 {
            return constraint("n_particles_mcmc must be positive".into());
        }
        if self.levels == 0 {
            return constraint("levels must be positive".into());
        }
        if self.steps_per_obs == 0 {
            return constraint("steps_per_obs must be positive".into());
        }
        if self.n_obs == 0 {
            return constraint("n_obs must be positive".into());
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return constraint(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        for (key, v) in [("dt", self.dt), ("obs_var", self.obs_var), ("sigma", self.sigma)] {
            if !(v > 0.0) || !v.is_finite() {
                return constraint(format!("{key} must be positive and finite, got {v}"));
            }
        }
        if !self.x0.is_finite() {
            return constraint(format!("x0 must be finite, got {}", self.x0));
        }
        if let Err(e) = self.hmc.validate() {
            return constraint(format!("hmc settings: {e}"));
        }
        let gap = self.steps_per_obs as f64 * self.dt;
        if (gap - OBS_SPACING).abs() > 1e-12 {
            return constraint(format!(
                "steps_per_obs * dt must equal the observation spacing {OBS_SPACING} \
                 (got {} * {} = {gap})",
                self.steps_per_obs, self.dt
            ));
        }
        Ok(())
    }

    /// Echoes the effective configuration in the same key-value format
    /// the loader accepts.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n_particles_generic = {}", self.n_particles_generic);
        let _ = writeln!(s, "n_particles_mcmc = {}", self.n_particles_mcmc);
        let _ = writeln!(s, "alpha = {}", self.alpha);
        let _ = writeln!(s, "levels = {}", self.levels);
        let _ = writeln!(s, "dt = {}", self.dt);
        let _ = writeln!(s, "steps_per_obs = {}", self.steps_per_obs);
        let _ = writeln!(s, "obs_var = {}", self.obs_var);
        let _ = writeln!(s, "sigma = {}", self.sigma);
        let _ = writeln!(s, "x0 = {}", self.x0);
        let _ = writeln!(s, "n_obs = {}", self.n_obs);
        let _ = writeln!(s, "hmc_trials_per_level = {}", self.hmc.metropolis_trials_per_level);
        let _ = writeln!(s, "hmc_leapfrog_steps = {}", self.hmc.leapfrog_steps_per_trial);
        let _ = writeln!(s, "hmc_step_size = {}", self.hmc.step_size);
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }
}

/// Reads and parses a config file; every absent key takes its default.
pub fn load_config(path: &Path) -> Result<BenchmarkConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    BenchmarkConfig::parse(&text)
}
