//! Conditional path sampling through a drift-relaxation ladder, with
//! Hybrid Monte Carlo over the Brownian increments at each rung.
//!
//! The problem: draw discrete SDE trajectories that start at a fixed
//! point `x0` and are consistent with a noisy observation `z` of the
//! endpoint. Because every increment path determines a unique
//! trajectory, sampling trajectories reduces to sampling the increments
//! `q = (dB_0 .. dB_{I-1})` from the density `exp(-V(q))` with
//!
//! `V(q) = (z - X_I(q))^2 / (2 obs_var) + sum_i q_i^2 / (2 dt)`,
//!
//! where `X_I(q)` is the Euler–Maruyama endpoint under the drift in
//! force. Attacking the target drift directly mixes poorly when the
//! conditioning asks for rare excursions, so the sampler walks a ladder
//! of interpolated drifts `(1 - eps) * base + eps * target` from an easy
//! base (`eps = 0`) to the real dynamics (`eps = 1`), seeding each rung
//! with the last sample of the previous one.
//!
//! Each rung runs a fixed number of HMC trials: fresh standard-normal
//! momenta, a few leapfrog steps of `H = V + p.p/2`, then a Metropolis
//! accept/reject; momenta are discarded afterwards. The gradient of `V`
//! is computed exactly for the discrete map by a backward (adjoint)
//! sweep over the forward states, which costs `O(I)` per evaluation.

use rand::Rng;

use crate::error::{Error, Result};
use crate::sde::{
    propagate, propagate_into, sample_increments, DiscretePath, Drift, IncrementPath, RelaxedModel,
    SdeModel,
};

/// One endpoint-conditioning problem: fixed start, observed endpoint,
/// and the pair of drifts the relaxation ladder interpolates between.
#[derive(Clone, Debug)]
pub struct ConditionalProblem {
    x0: f64,
    z: f64,
    obs_var: f64,
    base: SdeModel,
    target: SdeModel,
    path_len: usize,
    dt: f64,
}

impl ConditionalProblem {
    pub fn new(
        x0: f64,
        z: f64,
        obs_var: f64,
        base: SdeModel,
        target: SdeModel,
        path_len: usize,
        dt: f64,
    ) -> Result<Self> {
        if !x0.is_finite() {
            return Err(Error::invalid("x0", format!("must be finite, got {x0}")));
        }
        if !z.is_finite() {
            return Err(Error::invalid("z", format!("must be finite, got {z}")));
        }
        // +inf is allowed: it disables the likelihood term entirely.
        if !(obs_var > 0.0) {
            return Err(Error::invalid("obs_var", format!("must be positive, got {obs_var}")));
        }
        if path_len == 0 {
            return Err(Error::invalid("path_len", "must be at least 1"));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid("dt", format!("must be positive and finite, got {dt}")));
        }
        if base.sigma() != target.sigma() {
            return Err(Error::invalid(
                "sigma",
                "base and target models must share one diffusion coefficient",
            ));
        }
        Ok(Self {
            x0,
            z,
            obs_var,
            base,
            target,
            path_len,
            dt,
        })
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn obs_var(&self) -> f64 {
        self.obs_var
    }

    pub fn base(&self) -> &SdeModel {
        &self.base
    }

    pub fn target(&self) -> &SdeModel {
        &self.target
    }

    pub fn path_len(&self) -> usize {
        self.path_len
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Conditioning horizon `I * dt`.
    pub fn horizon(&self) -> f64 {
        self.path_len as f64 * self.dt
    }

    /// The interpolated model at a given ladder position.
    pub fn relaxed(&self, epsilon: f64) -> Result<RelaxedModel> {
        RelaxedModel::new(self.base.clone(), self.target.clone(), epsilon)
    }
}

/// Strictly increasing interpolation weights from exactly 0 to exactly 1.
#[derive(Clone, Debug, PartialEq)]
pub struct RelaxationLadder {
    epsilons: Vec<f64>,
}

impl RelaxationLadder {
    pub fn new(epsilons: Vec<f64>) -> Result<Self> {
        if epsilons.len() < 2 {
            return Err(Error::invalid("epsilons", "need at least the two endpoints"));
        }
        if epsilons[0] != 0.0 {
            return Err(Error::invalid("epsilons", "first entry must be exactly 0"));
        }
        if *epsilons.last().unwrap() != 1.0 {
            return Err(Error::invalid("epsilons", "last entry must be exactly 1"));
        }
        if epsilons.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("epsilons", "entries must be strictly increasing"));
        }
        Ok(Self { epsilons })
    }

    /// The uniform ladder `{l / levels : l = 0 .. levels}`.
    pub fn uniform(levels: usize) -> Self {
        assert!(levels >= 1, "need at least one other rung besides 0");
        let epsilons = (0..=levels).map(|l| l as f64 / levels as f64).collect();
        Self { epsilons }
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }

    /// Number of rungs, endpoints included.
    pub fn len(&self) -> usize {
        self.epsilons.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Chain settings for the per-rung HMC sweeps.
#[derive(Clone, Debug, PartialEq)]
pub struct HmcConfig {
    /// Metropolis accept/reject trials per ladder rung. Zero disables
    /// the chain entirely (useful for tests); configuration loaders
    /// should call [`HmcConfig::validate`] which requires at least 1.
    pub metropolis_trials_per_level: usize,
    /// Leapfrog steps per trial trajectory.
    pub leapfrog_steps_per_trial: usize,
    /// Leapfrog step size in fictitious time.
    pub step_size: f64,
}

impl Default for HmcConfig {
    fn default() -> Self {
        Self {
            metropolis_trials_per_level: 10,
            leapfrog_steps_per_trial: 1,
            step_size: 1e-2,
        }
    }
}

impl HmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.metropolis_trials_per_level == 0 {
            return Err(Error::invalid("metropolis_trials_per_level", "must be positive"));
        }
        if self.leapfrog_steps_per_trial == 0 {
            return Err(Error::invalid("leapfrog_steps_per_trial", "must be positive"));
        }
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(Error::invalid(
                "step_size",
                format!("must be positive and finite, got {}", self.step_size),
            ));
        }
        Ok(())
    }
}

/// Position/momentum pair for the Hamiltonian dynamics. Positions are
/// the `I` Brownian increments (including `dB_0`); the start point `x0`
/// is a fixed parameter, never a coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct HmcState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl HmcState {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::invalid("p", "momenta must match positions in length"));
        }
        Ok(Self { q, p })
    }
}

/// Per-rung acceptance bookkeeping for one sampler run.
#[derive(Clone, Debug, Default)]
pub struct SamplerDiagnostics {
    /// Accepted trials per ladder rung, `epsilons()` order.
    pub accepted_per_level: Vec<usize>,
    /// Trials attempted at every rung.
    pub trials_per_level: usize,
}

impl SamplerDiagnostics {
    pub fn total_accepted(&self) -> usize {
        self.accepted_per_level.iter().sum()
    }

    pub fn total_trials(&self) -> usize {
        self.trials_per_level * self.accepted_per_level.len()
    }

    /// Overall acceptance fraction; `None` when no trials ran.
    pub fn acceptance_rate(&self) -> Option<f64> {
        let trials = self.total_trials();
        (trials > 0).then(|| self.total_accepted() as f64 / trials as f64)
    }
}

/// Scratch buffers shared across evaluations of one chain.
struct Workspace {
    states: Vec<f64>,
    grad: Vec<f64>,
}

impl Workspace {
    fn new(path_len: usize) -> Self {
        Self {
            states: Vec::with_capacity(path_len + 1),
            grad: vec![0.0; path_len],
        }
    }
}

/// Computes `V(q)` and, in the same pass, its exact gradient for the
/// discrete propagation map.
///
/// Forward: one Euler–Maruyama sweep records the grid states. Backward:
/// the scalar adjoint `lambda_I = (X_I - z)/obs_var`,
/// `lambda_i = lambda_{i+1} (1 + drift'(X_i) dt)`, turns into
/// `dV/dq_j = q_j/dt + sigma * lambda_{j+1}` without ever forming the
/// dense sensitivity matrix.
fn eval_potential<M: Drift>(
    problem: &ConditionalProblem,
    model: &M,
    q: &[f64],
    ws: &mut Workspace,
) -> Result<f64> {
    debug_assert_eq!(q.len(), problem.path_len);
    let dt = problem.dt;
    propagate_into(problem.x0, q, dt, model, &mut ws.states)?;
    let endpoint = *ws.states.last().unwrap();

    let resid = problem.z - endpoint;
    let v = resid * resid / (2.0 * problem.obs_var)
        + q.iter().map(|&qi| qi * qi).sum::<f64>() / (2.0 * dt);

    let sigma = model.sigma();
    let last = q.len() - 1;
    let mut lambda = (endpoint - problem.z) / problem.obs_var;
    ws.grad[last] = q[last] / dt + lambda * sigma;
    for i in (1..=last).rev() {
        lambda *= 1.0 + model.drift_deriv(ws.states[i]) * dt;
        ws.grad[i - 1] = q[i - 1] / dt + lambda * sigma;
    }
    Ok(v)
}

/// The conditioning potential `V_eps(q)`.
pub fn potential(problem: &ConditionalProblem, epsilon: f64, q: &[f64]) -> Result<f64> {
    assert_eq!(q.len(), problem.path_len, "increment count must match the problem");
    let model = problem.relaxed(epsilon)?;
    let mut ws = Workspace::new(problem.path_len);
    eval_potential(problem, &model, q, &mut ws)
}

/// Gradient of [`potential`] with respect to every increment.
pub fn potential_gradient(problem: &ConditionalProblem, epsilon: f64, q: &[f64]) -> Result<Vec<f64>> {
    assert_eq!(q.len(), problem.path_len, "increment count must match the problem");
    let model = problem.relaxed(epsilon)?;
    let mut ws = Workspace::new(problem.path_len);
    eval_potential(problem, &model, q, &mut ws)?;
    Ok(ws.grad)
}

/// Kick-drift-kick Verlet for `H = V + p.p/2` (unit masses). Returns the
/// final potential value so callers get `H` without an extra sweep.
fn leapfrog_inner<M: Drift>(
    problem: &ConditionalProblem,
    model: &M,
    q: &mut [f64],
    p: &mut [f64],
    steps: usize,
    dtau: f64,
    ws: &mut Workspace,
) -> Result<f64> {
    let half = 0.5 * dtau;
    let mut v = eval_potential(problem, model, q, ws)?;
    for _ in 0..steps {
        for (pj, gj) in p.iter_mut().zip(&ws.grad) {
            *pj -= half * gj;
        }
        for (qj, pj) in q.iter_mut().zip(p.iter()) {
            *qj += dtau * pj;
        }
        v = eval_potential(problem, model, q, ws)?;
        for (pj, gj) in p.iter_mut().zip(&ws.grad) {
            *pj -= half * gj;
        }
    }
    Ok(v)
}

/// Runs `steps` Verlet steps of size `dtau` on the given state under
/// `V_eps`. Reversible and symplectic; the error in `H` is second order
/// in `dtau`.
pub fn leapfrog(
    state: &HmcState,
    problem: &ConditionalProblem,
    epsilon: f64,
    steps: usize,
    dtau: f64,
) -> Result<HmcState> {
    assert_eq!(state.q.len(), problem.path_len, "state size must match the problem");
    assert_eq!(state.q.len(), state.p.len());
    let model = problem.relaxed(epsilon)?;
    let mut ws = Workspace::new(problem.path_len);
    let mut q = state.q.clone();
    let mut p = state.p.clone();
    leapfrog_inner(problem, &model, &mut q, &mut p, steps, dtau, &mut ws)?;
    Ok(HmcState { q, p })
}

fn kinetic(p: &[f64]) -> f64 {
    0.5 * p.iter().map(|&pj| pj * pj).sum::<f64>()
}

/// One HMC trial: fresh momenta, a leapfrog trajectory, a Metropolis
/// decision. Mutates `q` only on acceptance. A proposal that blows up
/// numerically counts as a rejection; a current state that cannot even
/// be evaluated is an error.
#[allow(clippy::too_many_arguments)]
fn trial_inner<M: Drift, R: Rng + ?Sized>(
    problem: &ConditionalProblem,
    model: &M,
    q: &mut Vec<f64>,
    cfg: &HmcConfig,
    rng: &mut R,
    ws: &mut Workspace,
    q_prop: &mut Vec<f64>,
    p: &mut Vec<f64>,
) -> Result<bool> {
    let v_old = eval_potential(problem, model, q, ws)?;

    p.clear();
    p.extend((0..q.len()).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)));
    let h_old = v_old + kinetic(p);

    q_prop.clear();
    q_prop.extend_from_slice(q);
    let proposal = leapfrog_inner(
        problem,
        model,
        q_prop,
        p,
        cfg.leapfrog_steps_per_trial,
        cfg.step_size,
        ws,
    );

    // Momenta are discarded after the decision either way.
    let u: f64 = rng.random();
    let accepted = match proposal {
        Err(_) => false,
        Ok(v_new) => {
            let log_ratio = h_old - (v_new + kinetic(p));
            log_ratio >= 0.0 || u < log_ratio.exp()
        }
    };
    if accepted {
        std::mem::swap(q, q_prop);
    }
    Ok(accepted)
}

/// One Metropolis-corrected HMC trial against `exp(-V_eps)`; returns
/// whether the proposal was accepted. See [`sample_conditional_path`]
/// for the full ladder.
pub fn hmc_trial<R: Rng + ?Sized>(
    q: &mut Vec<f64>,
    problem: &ConditionalProblem,
    epsilon: f64,
    cfg: &HmcConfig,
    rng: &mut R,
) -> Result<bool> {
    assert_eq!(q.len(), problem.path_len, "increment count must match the problem");
    let model = problem.relaxed(epsilon)?;
    let mut ws = Workspace::new(problem.path_len);
    let mut q_prop = Vec::with_capacity(q.len());
    let mut p = Vec::with_capacity(q.len());
    trial_inner(problem, &model, q, cfg, rng, &mut ws, &mut q_prop, &mut p)
}

/// Runs the full relaxation ladder and returns the final increments,
/// their trajectory under the target drift, and per-rung acceptance
/// counts.
///
/// When `init` is absent the chain starts from unconditional increments,
/// i.e. a free path of the base SDE that the first rung then conditions.
/// Each subsequent rung starts from the last sample of the previous one.
pub fn sample_conditional_path<R: Rng + ?Sized>(
    problem: &ConditionalProblem,
    ladder: &RelaxationLadder,
    cfg: &HmcConfig,
    init: Option<IncrementPath>,
    rng: &mut R,
) -> Result<(IncrementPath, DiscretePath, SamplerDiagnostics)> {
    let mut q = match init {
        Some(path) => {
            if path.len() != problem.path_len {
                return Err(Error::invalid(
                    "init",
                    format!("has {} increments, problem expects {}", path.len(), problem.path_len),
                ));
            }
            if path.dt() != problem.dt {
                return Err(Error::invalid("init", "step size differs from the problem"));
            }
            path.into_increments()
        }
        None => sample_increments(rng, problem.path_len, problem.dt).into_increments(),
    };

    let mut diag = SamplerDiagnostics {
        accepted_per_level: vec![0; ladder.len()],
        trials_per_level: cfg.metropolis_trials_per_level,
    };
    let mut ws = Workspace::new(problem.path_len);
    let mut q_prop = Vec::with_capacity(q.len());
    let mut p = Vec::with_capacity(q.len());

    for (level, &eps) in ladder.epsilons().iter().enumerate() {
        let model = problem.relaxed(eps)?;
        for trial in 0..cfg.metropolis_trials_per_level {
            let accepted = trial_inner(problem, &model, &mut q, cfg, rng, &mut ws, &mut q_prop, &mut p)
                .map_err(|e| Error::Sampler {
                    level,
                    trial,
                    source: Box::new(e),
                })?;
            if accepted {
                diag.accepted_per_level[level] += 1;
            }
        }
    }

    let path = IncrementPath::new(q, problem.dt)?;
    let trajectory = propagate(problem.x0, &path, &problem.relaxed(1.0)?).map_err(|e| Error::Sampler {
        level: ladder.len(),
        trial: 0,
        source: Box::new(e),
    })?;
    Ok((path, trajectory, diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_problem(path_len: usize, dt: f64, x0: f64, z: f64, obs_var: f64) -> ConditionalProblem {
        let base = SdeModel::zero_drift(0.5).unwrap();
        let target = SdeModel::zero_drift(0.5).unwrap();
        ConditionalProblem::new(x0, z, obs_var, base, target, path_len, dt).unwrap()
    }

    fn double_well_problem() -> ConditionalProblem {
        let base = SdeModel::scaled_well(0.1, 0.5).unwrap();
        let target = SdeModel::double_well(0.5).unwrap();
        ConditionalProblem::new(-1.0, 1.0, 0.01, base, target, 100, 0.01).unwrap()
    }

    #[test]
    fn potential_vanishes_at_exact_hit() {
        let p = zero_problem(100, 0.01, 0.7, 0.7, 0.01);
        let q = vec![0.0; 100];
        assert_eq!(potential(&p, 0.5, &q).unwrap(), 0.0);
    }

    #[test]
    fn potential_pure_likelihood_term() {
        let p = zero_problem(100, 0.01, 0.0, 1.0, 0.01);
        let q = vec![0.0; 100];
        assert!((potential(&p, 0.0, &q).unwrap() - 50.0).abs() < 1e-12);
    }

    #[test]
    fn potential_is_nonnegative() {
        let p = double_well_problem();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let q: Vec<f64> = (0..100).map(|_| rng.random::<f64>() * 0.4 - 0.2).collect();
            assert!(potential(&p, 0.5, &q).unwrap() >= 0.0);
        }
    }

    #[test]
    fn gradient_zero_at_minimum() {
        let p = zero_problem(50, 0.02, 0.3, 0.3, 0.01);
        let g = potential_gradient(&p, 1.0, &vec![0.0; 50]).unwrap();
        assert!(g.iter().all(|&gj| gj == 0.0));
    }

    #[test]
    fn gradient_constant_when_drift_free() {
        // lambda stays constant when drift' = 0, so each component is
        // sigma * (X_I - z) / obs_var = 0.5 * (0 - 1) / 0.01 = -50.
        let p = zero_problem(100, 0.01, 0.0, 1.0, 0.01);
        let g = potential_gradient(&p, 0.0, &vec![0.0; 100]).unwrap();
        for &gj in &g {
            assert!((gj + 50.0).abs() < 1e-12, "component {gj}");
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = double_well_problem();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        const H: f64 = 1e-6;
        for &eps in &[0.0, 0.5, 1.0] {
            for _ in 0..20 {
                let dt = p.dt();
                let q: Vec<f64> = (0..p.path_len())
                    .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal) * dt.sqrt())
                    .collect();
                let grad = potential_gradient(&p, eps, &q).unwrap();
                for j in 0..q.len() {
                    let mut qp = q.clone();
                    let mut qm = q.clone();
                    qp[j] += H;
                    qm[j] -= H;
                    let fd = (potential(&p, eps, &qp).unwrap() - potential(&p, eps, &qm).unwrap())
                        / (2.0 * H);
                    let rel = (grad[j] - fd).abs() / grad[j].abs().max(1.0);
                    assert!(rel <= 1e-6, "eps {eps}, component {j}: {} vs {fd}", grad[j]);
                }
            }
        }
    }

    #[test]
    fn leapfrog_free_particle() {
        // A huge dt kills the prior term and an infinite obs_var kills
        // the likelihood, leaving V flat: pure drift at constant p.
        let p = zero_problem(20, 1e300, 0.0, 0.0, f64::INFINITY);
        let q0 = vec![0.1; 20];
        let p0 = vec![0.3; 20];
        let state = HmcState::new(q0.clone(), p0.clone()).unwrap();
        let out = leapfrog(&state, &p, 0.5, 7, 0.25).unwrap();
        for j in 0..20 {
            assert!((out.q[j] - (q0[j] + 0.3 * 0.25 * 7.0)).abs() < 1e-12);
            assert!((out.p[j] - p0[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn leapfrog_is_reversible() {
        let p = double_well_problem();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for &(steps, dtau) in &[(1usize, 0.01), (10, 0.05), (25, 0.02)] {
            let q: Vec<f64> = (0..100).map(|_| rng.random::<f64>() * 0.2 - 0.1).collect();
            let mom: Vec<f64> = (0..100)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect();
            let start = HmcState::new(q, mom).unwrap();
            let fwd = leapfrog(&start, &p, 0.5, steps, dtau).unwrap();
            let flipped = HmcState::new(fwd.q, fwd.p.iter().map(|&x| -x).collect()).unwrap();
            let back = leapfrog(&flipped, &p, 0.5, steps, dtau).unwrap();
            for j in 0..100 {
                assert!((back.q[j] - start.q[j]).abs() <= 1e-10, "q drift at {j}");
                assert!((-back.p[j] - start.p[j]).abs() <= 1e-10, "p drift at {j}");
            }
        }
    }

    fn hamiltonian(problem: &ConditionalProblem, eps: f64, s: &HmcState) -> f64 {
        potential(problem, eps, &s.q).unwrap() + kinetic(&s.p)
    }

    #[test]
    fn leapfrog_energy_error_is_second_order() {
        let p = double_well_problem();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut err_coarse = 0.0;
        let mut err_fine = 0.0;
        for _ in 0..20 {
            let q: Vec<f64> = (0..100).map(|_| rng.random::<f64>() * 0.2 - 0.1).collect();
            let mom: Vec<f64> = (0..100)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect();
            let start = HmcState::new(q, mom).unwrap();
            let h0 = hamiltonian(&p, 1.0, &start);
            let coarse = leapfrog(&start, &p, 1.0, 8, 0.01).unwrap();
            let fine = leapfrog(&start, &p, 1.0, 16, 0.005).unwrap();
            err_coarse += (hamiltonian(&p, 1.0, &coarse) - h0).abs();
            err_fine += (hamiltonian(&p, 1.0, &fine) - h0).abs();
        }
        let factor = err_coarse / err_fine;
        assert!(
            (3.5..=4.5).contains(&factor),
            "energy error should shrink ~4x when halving dtau, got {factor}"
        );
    }

    #[test]
    fn zero_step_size_always_accepts() {
        let p = double_well_problem();
        let cfg = HmcConfig {
            metropolis_trials_per_level: 1,
            leapfrog_steps_per_trial: 1,
            step_size: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut q = vec![0.05; 100];
        for _ in 0..50 {
            assert!(hmc_trial(&mut q, &p, 0.5, &cfg, &mut rng).unwrap());
        }
    }

    #[test]
    fn acceptance_rate_in_sane_band() {
        let p = double_well_problem();
        let cfg = HmcConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut q = sample_increments(&mut rng, 100, 0.01).into_increments();
        let mut accepted = 0usize;
        let trials = 1000usize;
        for _ in 0..trials {
            if hmc_trial(&mut q, &p, 1.0, &cfg, &mut rng).unwrap() {
                accepted += 1;
            }
        }
        let rate = accepted as f64 / trials as f64;
        assert!((0.05..=0.999).contains(&rate), "acceptance rate {rate}");
    }

    #[test]
    fn gaussian_stationarity_of_trials() {
        // Flat likelihood: the target is exactly iid N(0, dt) increments,
        // so the long-run per-coordinate variance must approach dt.
        let dims = 4usize;
        let dt = 0.25;
        let p = zero_problem(dims, dt, 0.0, 0.0, f64::INFINITY);
        let cfg = HmcConfig {
            metropolis_trials_per_level: 1,
            leapfrog_steps_per_trial: 8,
            step_size: 0.3,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut q = sample_increments(&mut rng, dims, dt).into_increments();
        let trials = 100_000usize;
        let mut sumsq = vec![0.0f64; dims];
        for _ in 0..trials {
            hmc_trial(&mut q, &p, 0.0, &cfg, &mut rng).unwrap();
            for (s, &qj) in sumsq.iter_mut().zip(&q) {
                *s += qj * qj;
            }
        }
        // 3 standard errors of a variance estimate from n draws.
        let tol = 3.0 * dt * (2.0 / trials as f64).sqrt();
        for (j, &s) in sumsq.iter().enumerate() {
            let var = s / trials as f64;
            assert!((var - dt).abs() < tol, "coordinate {j}: var {var} vs {dt} (tol {tol})");
        }
    }

    #[test]
    fn uniform_ladder_values() {
        let ladder = RelaxationLadder::uniform(10);
        let expected: Vec<f64> = (0..=10).map(|l| l as f64 / 10.0).collect();
        assert_eq!(ladder.epsilons(), expected.as_slice());

        let minimal = RelaxationLadder::uniform(1);
        assert_eq!(minimal.epsilons(), &[0.0, 1.0]);

        for levels in 1..=40 {
            let l = RelaxationLadder::uniform(levels);
            assert!(RelaxationLadder::new(l.epsilons().to_vec()).is_ok());
        }
    }

    #[test]
    fn ladder_validation() {
        assert!(RelaxationLadder::new(vec![0.0, 0.5, 1.0]).is_ok());
        assert!(RelaxationLadder::new(vec![0.0]).is_err());
        assert!(RelaxationLadder::new(vec![0.1, 1.0]).is_err());
        assert!(RelaxationLadder::new(vec![0.0, 0.9]).is_err());
        assert!(RelaxationLadder::new(vec![0.0, 0.5, 0.5, 1.0]).is_err());
    }

    #[test]
    fn ladder_of_identical_targets_matches_flat_chain() {
        // With base == target every rung has the same potential, so the
        // full ladder must reproduce, draw for draw, a single-level chain
        // run for (levels * trials) trials.
        let model = SdeModel::double_well(0.5).unwrap();
        let p = ConditionalProblem::new(-1.0, 1.0, 0.01, model.clone(), model, 100, 0.01).unwrap();
        let ladder = RelaxationLadder::uniform(1);
        let cfg = HmcConfig::default();

        let mut rng_a = ChaCha8Rng::seed_from_u64(77);
        let (path_a, _, _) = sample_conditional_path(&p, &ladder, &cfg, None, &mut rng_a).unwrap();

        let mut rng_b = ChaCha8Rng::seed_from_u64(77);
        let mut q = sample_increments(&mut rng_b, 100, 0.01).into_increments();
        for _ in 0..(ladder.len() * cfg.metropolis_trials_per_level) {
            hmc_trial(&mut q, &p, 1.0, &cfg, &mut rng_b).unwrap();
        }
        assert_eq!(path_a.increments(), q.as_slice());
    }

    #[test]
    fn endpoint_rungs_never_touch_the_other_drift() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        use std::sync::Arc;

        let base_calls = Arc::new(AtomicUsize::new(0));
        let target_calls = Arc::new(AtomicUsize::new(0));
        let bc = base_calls.clone();
        let tc = target_calls.clone();
        let base = SdeModel::new(
            0.5,
            move |y| {
                bc.fetch_add(1, Ordering::Relaxed);
                scaled_well_drift_for_test(y)
            },
            |y| 0.1 * crate::sde::double_well_drift_deriv(y),
        )
        .unwrap();
        let target = SdeModel::new(
            0.5,
            move |y| {
                tc.fetch_add(1, Ordering::Relaxed);
                crate::sde::double_well_drift(y)
            },
            crate::sde::double_well_drift_deriv,
        )
        .unwrap();
        let p = ConditionalProblem::new(-1.0, 1.0, 0.01, base, target, 50, 0.02).unwrap();
        let cfg = HmcConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut q = vec![0.0; 50];

        let t0 = target_calls.load(Ordering::Relaxed);
        for _ in 0..5 {
            hmc_trial(&mut q, &p, 0.0, &cfg, &mut rng).unwrap();
        }
        assert_eq!(target_calls.load(Ordering::Relaxed), t0, "eps = 0 must not evaluate the target drift");

        let b0 = base_calls.load(Ordering::Relaxed);
        for _ in 0..5 {
            hmc_trial(&mut q, &p, 1.0, &cfg, &mut rng).unwrap();
        }
        assert_eq!(base_calls.load(Ordering::Relaxed), b0, "eps = 1 must not evaluate the base drift");
    }

    fn scaled_well_drift_for_test(y: f64) -> f64 {
        crate::sde::scaled_well_drift(0.1, y)
    }

    #[test]
    fn sampler_is_seed_deterministic() {
        let p = double_well_problem();
        let ladder = RelaxationLadder::uniform(10);
        let cfg = HmcConfig::default();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(123);
            sample_conditional_path(&p, &ladder, &cfg, None, &mut rng).unwrap()
        };
        let (path_a, traj_a, diag_a) = run();
        let (path_b, traj_b, diag_b) = run();
        assert_eq!(path_a, path_b);
        assert_eq!(traj_a, traj_b);
        assert_eq!(diag_a.accepted_per_level, diag_b.accepted_per_level);
    }

    #[test]
    fn sampler_rejects_mismatched_init() {
        let p = double_well_problem();
        let ladder = RelaxationLadder::uniform(2);
        let cfg = HmcConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let init = IncrementPath::new(vec![0.0; 10], 0.01).unwrap();
        assert!(sample_conditional_path(&p, &ladder, &cfg, Some(init), &mut rng).is_err());
    }

    #[test]
    fn sampler_abort_reports_level_and_trial() {
        // An initial increment path far up the quartic wall blows up the
        // very first current-state evaluation.
        let p = double_well_problem();
        let ladder = RelaxationLadder::uniform(2);
        let cfg = HmcConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut bad = vec![0.0; 100];
        bad[0] = 1e3;
        let init = IncrementPath::new(bad, 0.01).unwrap();
        match sample_conditional_path(&p, &ladder, &cfg, Some(init), &mut rng).unwrap_err() {
            Error::Sampler { level, trial, source } => {
                assert_eq!(level, 0);
                assert_eq!(trial, 0);
                assert!(matches!(*source, Error::NumericalBlowup { .. }));
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn hmc_state_rejects_length_mismatch() {
        assert!(HmcState::new(vec![0.0; 4], vec![0.0; 3]).is_err());
    }
}
