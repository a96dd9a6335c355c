//! Bootstrap particle filtering and an MCMC-rejuvenated variant.
//!
//! Both filters share the predict / weight / resample skeleton. The
//! plain bootstrap filter reports its estimate from the weighted
//! particles and then resamples. The rejuvenated filter resamples
//! (prev, curr) *pairs* so that ancestors which evolved into
//! well-weighted endpoints survive, then replaces every endpoint by a
//! conditional-path sample started from its resampled ancestor; the
//! replacement chain targets `g(Y, z) p(Y | prev)`, which preserves the
//! filtering posterior while moving particles into the region the
//! observation actually supports.
//!
//! Weights live in log space end to end; raw likelihoods are
//! materialized only for the effective-sample-size diagnostic, after a
//! max-shift that the ESS is invariant to by construction.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sampler::{sample_conditional_path, ConditionalProblem, HmcConfig, RelaxationLadder};
use crate::sde::{propagate, sample_increments, SdeModel};
use crate::streams::{Stream, StreamFactory, StreamPhase};

/// Additive Gaussian observation noise with a fixed variance.
#[derive(Clone, Copy, Debug)]
pub struct ObservationModel {
    obs_var: f64,
}

impl ObservationModel {
    pub fn new(obs_var: f64) -> Result<Self> {
        if !(obs_var > 0.0) {
            return Err(Error::invalid("obs_var", format!("must be positive, got {obs_var}")));
        }
        Ok(Self { obs_var })
    }

    pub fn obs_var(&self) -> f64 {
        self.obs_var
    }

    pub fn log_likelihood(&self, x: f64, z: f64) -> f64 {
        log_likelihood(x, z, self.obs_var)
    }
}

/// Unnormalized Gaussian log likelihood `-(z - x)^2 / (2 obs_var)`.
pub fn log_likelihood(x: f64, z: f64, obs_var: f64) -> f64 {
    let r = z - x;
    -(r * r) / (2.0 * obs_var)
}

/// The particle population: values at the previous and current
/// observation times plus per-particle log likelihoods and normalized
/// weights, all index-aligned.
#[derive(Clone, Debug)]
pub struct ParticleEnsemble {
    pub prev: Vec<f64>,
    pub curr: Vec<f64>,
    pub log_lik: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ParticleEnsemble {
    /// All particles at the common starting point, uniformly weighted.
    pub fn init(n: usize, x0: f64) -> Self {
        assert!(n >= 1, "need at least one particle");
        Self {
            prev: vec![x0; n],
            curr: vec![x0; n],
            log_lik: vec![0.0; n],
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn len(&self) -> usize {
        self.curr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curr.is_empty()
    }

    /// Raw (unshifted) likelihoods `exp(log_lik)`. These underflow to
    /// zero when every particle sits far from the observation; callers
    /// treat that case explicitly.
    pub fn raw_likelihoods(&self) -> Vec<f64> {
        self.log_lik.iter().map(|l| l.exp()).collect()
    }

    /// Likelihoods shifted so the best particle has value 1. The shift
    /// is a common positive factor, which the ESS and the
    /// self-normalized mean are invariant to.
    fn shifted_likelihoods(&self) -> Vec<f64> {
        let max = self.log_lik.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        self.log_lik.iter().map(|l| (l - max).exp()).collect()
    }

    /// Current values become the ancestors of the next step.
    fn advance(&mut self) {
        std::mem::swap(&mut self.prev, &mut self.curr);
    }
}

/// Normalizes log likelihoods into probability weights via a max-shift
/// (log-sum-exp). Errors when every entry is minus infinity.
pub fn normalize_weights(log_lik: &[f64]) -> Result<Vec<f64>> {
    assert!(!log_lik.is_empty(), "need at least one weight");
    let max = log_lik.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    let mut w: Vec<f64> = log_lik.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = w.iter().sum();
    for wj in &mut w {
        *wj /= sum;
    }
    Ok(w)
}

/// Effective sample size `N / (1 + C^2)` where `C` is the coefficient of
/// variation (population standard deviation over mean) of the raw
/// likelihoods. `N` for uniform likelihoods, 1 when a single particle
/// carries everything; scale-free in between.
pub fn effective_sample_size(raw_lik: &[f64]) -> Result<f64> {
    assert!(!raw_lik.is_empty(), "need at least one likelihood");
    debug_assert!(raw_lik.iter().all(|&g| g >= 0.0), "raw likelihoods must be nonnegative");
    let n = raw_lik.len() as f64;
    let mean = raw_lik.iter().sum::<f64>() / n;
    if !(mean > 0.0) {
        return Err(Error::DegenerateWeights);
    }
    let var = raw_lik.iter().map(|&g| (g - mean) * (g - mean)).sum::<f64>() / n;
    Ok(n / (1.0 + var / (mean * mean)))
}

/// Self-normalized posterior mean `sum(x g) / sum(g)`.
pub fn posterior_mean(curr: &[f64], raw_lik: &[f64]) -> Result<f64> {
    assert_eq!(curr.len(), raw_lik.len(), "values and likelihoods must align");
    let den: f64 = raw_lik.iter().sum();
    if !(den > 0.0) {
        return Err(Error::DegenerateWeights);
    }
    let num: f64 = curr.iter().zip(raw_lik).map(|(&x, &g)| x * g).sum();
    Ok(num / den)
}

/// Multinomial pair resampling: one independent uniform per output slot,
/// selected through the cumulative weight brackets, copying the
/// (prev, curr) pair jointly. Weights come out uniform.
pub fn resample_pairs<R: rand::Rng + ?Sized>(ensemble: &mut ParticleEnsemble, rng: &mut R) {
    let n = ensemble.len();
    debug_assert!(
        (ensemble.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-9,
        "weights must be normalized before resampling"
    );
    let mut cum = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &w in &ensemble.weights {
        acc += w;
        cum.push(acc);
    }

    let mut prev = Vec::with_capacity(n);
    let mut curr = Vec::with_capacity(n);
    let mut log_lik = Vec::with_capacity(n);
    for _ in 0..n {
        let theta: f64 = rng.random();
        // First bracket whose cumulative weight exceeds theta; zero-width
        // brackets (zero weight) can never contain it.
        let j = cum.partition_point(|&c| c <= theta).min(n - 1);
        prev.push(ensemble.prev[j]);
        curr.push(ensemble.curr[j]);
        log_lik.push(ensemble.log_lik[j]);
    }
    ensemble.prev = prev;
    ensemble.curr = curr;
    ensemble.log_lik = log_lik;
    ensemble.weights = vec![1.0 / n as f64; n];
}

/// Propagates every particle from `prev` to a fresh endpoint in `curr`
/// with its own increment stream; `prev` is untouched. Particles are
/// independent, so this runs in parallel without affecting the result.
pub fn predict<F>(
    ensemble: &mut ParticleEnsemble,
    model: &SdeModel,
    steps: usize,
    dt: f64,
    stream_for: F,
) -> Result<()>
where
    F: Fn(usize) -> Stream + Sync,
{
    let endpoints: Result<Vec<f64>> = ensemble
        .prev
        .par_iter()
        .enumerate()
        .map(|(n, &x)| {
            let mut rng = stream_for(n);
            let path = sample_increments(&mut rng, steps, dt);
            propagate(x, &path, model)
                .map(|p| p.endpoint())
                .map_err(|e| Error::Particle {
                    index: n,
                    source: Box::new(e),
                })
        })
        .collect();
    ensemble.curr = endpoints?;
    Ok(())
}

/// One filter step's diagnostics row.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterRecord {
    /// Observation index (1-based).
    pub k: usize,
    /// Observation time.
    pub t: f64,
    /// Observed value.
    pub z: f64,
    /// Posterior-mean estimate of the state at `t`.
    pub post_mean: f64,
    /// Effective sample size in `[1, N]`.
    pub ess: f64,
    /// Ensemble size the step ran with.
    pub n_particles: usize,
    /// Overall HMC acceptance rate of the rejuvenation pass, when one ran.
    pub accept_rate: Option<f64>,
    /// Set when every raw likelihood underflowed to zero and the
    /// uniform-weights fallback fired (ess is reported as 1).
    pub degenerate: bool,
}

impl FilterRecord {
    /// ESS as a percentage of the ensemble size.
    pub fn ess_pct(&self) -> f64 {
        100.0 * self.ess / self.n_particles as f64
    }
}

/// Weighting outcome: normalized weights plus the diagnostics the record
/// needs, with the all-underflowed fallback applied.
struct Weighting {
    weights: Vec<f64>,
    ess: f64,
    degenerate: bool,
}

fn weigh(ensemble: &ParticleEnsemble) -> Weighting {
    let n = ensemble.len();
    let degenerate = ensemble.raw_likelihoods().iter().all(|&g| g == 0.0);
    if degenerate {
        return Weighting {
            weights: vec![1.0 / n as f64; n],
            ess: 1.0,
            degenerate: true,
        };
    }
    let weights = normalize_weights(&ensemble.log_lik).expect("some likelihood is nonzero");
    let ess = effective_sample_size(&ensemble.shifted_likelihoods()).expect("shifted max is 1");
    Weighting {
        weights,
        ess,
        degenerate: false,
    }
}

/// One step of the plain bootstrap filter: predict under the model,
/// weight against the observation, record the weighted estimate and ESS,
/// then resample pairs down to uniform weights.
#[allow(clippy::too_many_arguments)]
pub fn pf_step_generic(
    ensemble: &mut ParticleEnsemble,
    k: usize,
    t: f64,
    z: f64,
    model: &SdeModel,
    obs: &ObservationModel,
    steps: usize,
    dt: f64,
    streams: &StreamFactory,
) -> Result<FilterRecord> {
    ensemble.advance();
    predict(ensemble, model, steps, dt, |n| {
        streams.stream(StreamPhase::Predict, k, n)
    })?;
    for (l, &x) in ensemble.log_lik.iter_mut().zip(&ensemble.curr) {
        *l = obs.log_likelihood(x, z);
    }

    let weighting = weigh(ensemble);
    ensemble.weights = weighting.weights;
    let post_mean = if weighting.degenerate {
        ensemble.curr.iter().sum::<f64>() / ensemble.len() as f64
    } else {
        posterior_mean(&ensemble.curr, &ensemble.shifted_likelihoods())?
    };

    let record = FilterRecord {
        k,
        t,
        z,
        post_mean,
        ess: weighting.ess,
        n_particles: ensemble.len(),
        accept_rate: None,
        degenerate: weighting.degenerate,
    };
    resample_pairs(ensemble, &mut streams.stream(StreamPhase::Resample, k, 0));
    Ok(record)
}

/// One step of the filter with MCMC rejuvenation, with a per-particle
/// choice of the modified (base) drift.
///
/// Predict and weight as in the bootstrap filter, resample pairs, then
/// rebuild every endpoint by running the drift-relaxation sampler from
/// the particle's resampled ancestor toward the observation. The
/// post-rejuvenation ensemble is unweighted; its ESS is still measured
/// from the raw likelihoods as a quality diagnostic.
#[allow(clippy::too_many_arguments)]
pub fn pf_step_mcmc_with<F>(
    ensemble: &mut ParticleEnsemble,
    k: usize,
    t: f64,
    z: f64,
    base_for: F,
    target: &SdeModel,
    ladder: &RelaxationLadder,
    hmc: &HmcConfig,
    obs: &ObservationModel,
    steps: usize,
    dt: f64,
    streams: &StreamFactory,
) -> Result<FilterRecord>
where
    F: Fn(usize) -> SdeModel + Sync,
{
    ensemble.advance();
    predict(ensemble, target, steps, dt, |n| {
        streams.stream(StreamPhase::Predict, k, n)
    })?;
    for (l, &x) in ensemble.log_lik.iter_mut().zip(&ensemble.curr) {
        *l = obs.log_likelihood(x, z);
    }
    let weighting = weigh(ensemble);
    let predict_degenerate = weighting.degenerate;
    ensemble.weights = weighting.weights;
    resample_pairs(ensemble, &mut streams.stream(StreamPhase::Resample, k, 0));

    // Per-particle chains are independent given their streams.
    let rejuvenated: Result<Vec<(f64, usize, usize)>> = ensemble
        .prev
        .par_iter()
        .enumerate()
        .map(|(n, &x_prev)| {
            let wrap = |e: Error| Error::Particle {
                index: n,
                source: Box::new(e),
            };
            let problem = ConditionalProblem::new(
                x_prev,
                z,
                obs.obs_var(),
                base_for(n),
                target.clone(),
                steps,
                dt,
            )
            .map_err(wrap)?;
            let mut rng = streams.stream(StreamPhase::Rejuvenate, k, n);
            let (_, trajectory, diag) =
                sample_conditional_path(&problem, ladder, hmc, None, &mut rng).map_err(wrap)?;
            Ok((trajectory.endpoint(), diag.total_accepted(), diag.total_trials()))
        })
        .collect();
    let rejuvenated = rejuvenated?;

    let mut accepted = 0usize;
    let mut trials = 0usize;
    for (n, (endpoint, acc, tri)) in rejuvenated.into_iter().enumerate() {
        ensemble.curr[n] = endpoint;
        ensemble.log_lik[n] = obs.log_likelihood(endpoint, z);
        accepted += acc;
        trials += tri;
    }
    let n = ensemble.len();
    ensemble.weights = vec![1.0 / n as f64; n];

    let raw = ensemble.raw_likelihoods();
    let post_degenerate = raw.iter().all(|&g| g == 0.0);
    let ess = if post_degenerate {
        1.0
    } else {
        effective_sample_size(&ensemble.shifted_likelihoods())?
    };
    let post_mean = ensemble.curr.iter().sum::<f64>() / n as f64;

    Ok(FilterRecord {
        k,
        t,
        z,
        post_mean,
        ess,
        n_particles: n,
        accept_rate: (trials > 0).then(|| accepted as f64 / trials as f64),
        degenerate: predict_degenerate || post_degenerate,
    })
}

/// [`pf_step_mcmc_with`] using the same modified drift for every particle.
#[allow(clippy::too_many_arguments)]
pub fn pf_step_mcmc(
    ensemble: &mut ParticleEnsemble,
    k: usize,
    t: f64,
    z: f64,
    base: &SdeModel,
    target: &SdeModel,
    ladder: &RelaxationLadder,
    hmc: &HmcConfig,
    obs: &ObservationModel,
    steps: usize,
    dt: f64,
    streams: &StreamFactory,
) -> Result<FilterRecord> {
    pf_step_mcmc_with(
        ensemble,
        k,
        t,
        z,
        |_| base.clone(),
        target,
        ladder,
        hmc,
        obs,
        steps,
        dt,
        streams,
    )
}
