//! Distribution-level checks of the conditional sampler.

use driftrelax::sampler::{
    hmc_trial, sample_conditional_path, ConditionalProblem, HmcConfig, RelaxationLadder,
};
use driftrelax::sde::{propagate, IncrementPath, SdeModel};
use driftrelax::streams::{StreamFactory, StreamPhase};
use rand::Rng;
use rayon::prelude::*;

fn zero_drift_problem() -> ConditionalProblem {
    let base = SdeModel::zero_drift(0.5).unwrap();
    let target = SdeModel::zero_drift(0.5).unwrap();
    ConditionalProblem::new(0.0, 1.0, 0.01, base, target, 100, 0.01).unwrap()
}

/// Draws one exact sample of the zero-drift increment posterior
/// exp(-V(q)), a Gaussian whose precision is (1/dt) I + (sigma^2/ov) 11^T.
/// The all-ones direction carries the likelihood; the complement stays at
/// the prior scale.
fn exact_posterior_increments<R: Rng + ?Sized>(p: &ConditionalProblem, rng: &mut R) -> Vec<f64> {
    let len = p.path_len();
    let dt = p.dt();
    let sigma = 0.5;
    let prec_par = 1.0 / dt + sigma * sigma * len as f64 / p.obs_var();
    let mean = sigma * (p.z() - p.x0()) / p.obs_var() / prec_par;

    let w: Vec<f64> = (0..len)
        .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect();
    let along = w.iter().sum::<f64>() / (len as f64).sqrt();
    let root_len = (len as f64).sqrt();
    w.iter()
        .map(|&wj| {
            let perp = wj - along / root_len;
            mean + dt.sqrt() * perp + along / (root_len * prec_par.sqrt())
        })
        .collect()
}

fn two_sample_ks(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Starting from an exact sample of the fixed-rung target, any number of
/// HMC trials must leave the endpoint distribution unchanged.
#[test]
fn hmc_trials_preserve_the_target_measure() {
    let problem = zero_drift_problem();
    let cfg = HmcConfig::default();
    let streams = StreamFactory::new(424242);
    let runs = 5000usize;

    let ensembles: Vec<(f64, f64)> = (0..runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.stream(StreamPhase::Standalone, 0, i);
            let q0 = exact_posterior_increments(&problem, &mut rng);
            let path0 = IncrementPath::new(q0.clone(), problem.dt()).unwrap();
            let model = problem.relaxed(0.5).unwrap();
            let e0 = propagate(problem.x0(), &path0, &model).unwrap().endpoint();

            let mut q = q0;
            for _ in 0..50 {
                hmc_trial(&mut q, &problem, 0.5, &cfg, &mut rng).unwrap();
            }
            let path1 = IncrementPath::new(q, problem.dt()).unwrap();
            let e1 = propagate(problem.x0(), &path1, &model).unwrap().endpoint();
            (e0, e1)
        })
        .collect();

    let before: Vec<f64> = ensembles.iter().map(|&(a, _)| a).collect();
    let after: Vec<f64> = ensembles.iter().map(|&(_, b)| b).collect();
    let d = two_sample_ks(before, after);
    // 1% two-sample critical value: 1.62762 * sqrt((n + m) / (n m)).
    let crit = 1.62762 * (2.0 / runs as f64).sqrt();
    assert!(d < crit, "KS statistic {d} exceeds the 1% critical value {crit}");
}

/// The whole point of the ladder: conditioned on an observation in the
/// opposite well, sampled double-well paths actually cross over.
#[test]
fn double_well_paths_reach_the_opposite_well() {
    let base = SdeModel::scaled_well(0.1, 0.5).unwrap();
    let target = SdeModel::double_well(0.5).unwrap();
    let problem = ConditionalProblem::new(-1.0, 1.0, 0.01, base, target, 100, 0.01).unwrap();
    let ladder = RelaxationLadder::uniform(10);
    let cfg = HmcConfig::default();
    let streams = StreamFactory::new(99);

    let endpoints: Vec<f64> = (0..100)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.stream(StreamPhase::Standalone, 0, i);
            let (_, trajectory, _) =
                sample_conditional_path(&problem, &ladder, &cfg, None, &mut rng).unwrap();
            trajectory.endpoint()
        })
        .collect();

    let mean = endpoints.iter().sum::<f64>() / endpoints.len() as f64;
    assert!(mean > 0.0, "mean endpoint {mean} did not move toward the observation");
}
