//! Filter runs over the double-well observation sequence.

use driftrelax::filter::{
    pf_step_generic, pf_step_mcmc, FilterRecord, ObservationModel, ParticleEnsemble,
};
use driftrelax::sampler::RelaxationLadder;
use driftrelax::sde::{propagate, sample_increments, SdeModel};
use driftrelax::streams::{StreamFactory, StreamPhase};
use rand::Rng;
use thiserror::Error;

use crate::config::{BenchmarkConfig, OBS_SPACING};

/// Stream-domain tags so the two filters (and the observation generator)
/// never share random streams within one master seed.
const DOMAIN_GENERIC: u8 = 1;
const DOMAIN_MCMC: u8 = 2;
const DOMAIN_OBSERVE: u8 = 3;

/// Observation times and values, index-aligned.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationSequence {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl ObservationSequence {
    /// The benchmark sequence: `T_k = k`, values alternating `-1` for
    /// odd `k` and `+1` for even `k`, forcing a well transition at every
    /// observation.
    pub fn alternating(n_obs: usize) -> Self {
        let times = (1..=n_obs).map(|k| k as f64 * OBS_SPACING).collect();
        let values = (1..=n_obs)
            .map(|k| if k % 2 == 1 { -1.0 } else { 1.0 })
            .collect();
        Self { times, values }
    }

    /// Synthetic observations: a hidden double-well trajectory evolved
    /// from `x0`, observed with Gaussian noise at every `T_k`.
    pub fn simulated(cfg: &BenchmarkConfig) -> driftrelax::Result<Self> {
        let model = SdeModel::double_well(cfg.sigma)?;
        let streams = StreamFactory::new(cfg.seed).domain(DOMAIN_OBSERVE);
        let mut x = cfg.x0;
        let mut times = Vec::with_capacity(cfg.n_obs);
        let mut values = Vec::with_capacity(cfg.n_obs);
        for k in 1..=cfg.n_obs {
            let mut rng = streams.stream(StreamPhase::Observe, k, 0);
            let path = sample_increments(&mut rng, cfg.steps_per_obs, cfg.dt);
            x = propagate(x, &path, &model)?.endpoint();
            let noise: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal);
            times.push(k as f64 * OBS_SPACING);
            values.push(x + cfg.obs_var.sqrt() * noise);
        }
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FilterVariant {
    Generic,
    Mcmc,
}

impl FilterVariant {
    pub fn name(self) -> &'static str {
        match self {
            FilterVariant::Generic => "generic",
            FilterVariant::Mcmc => "mcmc",
        }
    }
}

#[derive(Debug, Error)]
#[error("{variant} filter failed at observation {k}: {source}")]
pub struct RunError {
    pub variant: &'static str,
    pub k: usize,
    #[source]
    pub source: driftrelax::Error,
}

/// Records of both filters over the same observations.
#[derive(Clone, Debug)]
pub struct BenchmarkOutput {
    pub generic: Vec<FilterRecord>,
    pub mcmc: Vec<FilterRecord>,
}

/// Runs one filter over the observation sequence, one record per
/// observation. The config is read-only; all randomness derives from
/// `cfg.seed` through per-(phase, observation, particle) streams.
pub fn run_filter(
    variant: FilterVariant,
    cfg: &BenchmarkConfig,
    obs_seq: &ObservationSequence,
) -> Result<Vec<FilterRecord>, RunError> {
    let wrap = |k: usize| {
        move |source: driftrelax::Error| RunError {
            variant: variant.name(),
            k,
            source,
        }
    };
    let fail = |source| RunError {
        variant: variant.name(),
        k: 0,
        source,
    };

    let target = SdeModel::double_well(cfg.sigma).map_err(fail)?;
    let base = SdeModel::scaled_well(cfg.alpha, cfg.sigma).map_err(fail)?;
    let obs_model = ObservationModel::new(cfg.obs_var).map_err(fail)?;
    let ladder = RelaxationLadder::uniform(cfg.levels);

    let (n, domain) = match variant {
        FilterVariant::Generic => (cfg.n_particles_generic, DOMAIN_GENERIC),
        FilterVariant::Mcmc => (cfg.n_particles_mcmc, DOMAIN_MCMC),
    };
    let streams = StreamFactory::new(cfg.seed).domain(domain);
    let mut ensemble = ParticleEnsemble::init(n, cfg.x0);

    let mut records = Vec::with_capacity(obs_seq.len());
    for (idx, (&t, &z)) in obs_seq.times().iter().zip(obs_seq.values()).enumerate() {
        let k = idx + 1;
        let record = match variant {
            FilterVariant::Generic => pf_step_generic(
                &mut ensemble,
                k,
                t,
                z,
                &target,
                &obs_model,
                cfg.steps_per_obs,
                cfg.dt,
                &streams,
            ),
            FilterVariant::Mcmc => pf_step_mcmc(
                &mut ensemble,
                k,
                t,
                z,
                &base,
                &target,
                &ladder,
                &cfg.hmc,
                &obs_model,
                cfg.steps_per_obs,
                cfg.dt,
                &streams,
            ),
        }
        .map_err(wrap(k))?;
        records.push(record);
    }
    Ok(records)
}

/// Runs both filters over the given observations.
pub fn run_benchmark_with(
    cfg: &BenchmarkConfig,
    obs_seq: &ObservationSequence,
) -> Result<BenchmarkOutput, RunError> {
    Ok(BenchmarkOutput {
        generic: run_filter(FilterVariant::Generic, cfg, obs_seq)?,
        mcmc: run_filter(FilterVariant::Mcmc, cfg, obs_seq)?,
    })
}

/// Runs both filters over the alternating benchmark observations.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkOutput, RunError> {
    run_benchmark_with(cfg, &ObservationSequence::alternating(cfg.n_obs))
}
