//! SDE models and deterministic Euler–Maruyama propagation driven by
//! explicit Brownian increments.
//!
//! Everything here is scalar: states, drifts and increments are `f64`.
//! The diffusion coefficient is constant per model. Models carry an
//! analytic drift derivative because downstream gradient computations
//! differentiate through the propagation map; derivatives are checked
//! against finite differences when constructed in debug builds.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Drift of the gradient flow for the quartic double-well potential
/// `U(x) = x^4 - 2x^2`: returns `-4x(x^2 - 1)`. Vanishes at the well
/// minima `x = ±1` and at the saddle `x = 0`.
pub fn double_well_drift(x: f64) -> f64 {
    -4.0 * x * (x * x - 1.0)
}

/// Derivative of [`double_well_drift`]: `-4(3x^2 - 1)`.
pub fn double_well_drift_deriv(x: f64) -> f64 {
    -4.0 * (3.0 * x * x - 1.0)
}

/// Double-well drift scaled by `alpha`. The wells become shallower but
/// the minima stay at `±1`, so transitions between wells get easier
/// without moving the targets.
pub fn scaled_well_drift(alpha: f64, y: f64) -> f64 {
    alpha * double_well_drift(y)
}

/// Anything that can drive an Euler–Maruyama step: a drift, its
/// derivative, and a constant diffusion coefficient.
pub trait Drift {
    fn drift(&self, x: f64) -> f64;
    fn drift_deriv(&self, x: f64) -> f64;
    fn sigma(&self) -> f64;
}

/// A scalar SDE `dX = a(X) dt + sigma dB` with constant diffusion.
///
/// Immutable after construction and cheap to clone (the drift closures
/// are shared). The drift derivative must be analytically consistent
/// with the drift; debug builds verify this against centered finite
/// differences on a probe grid in `[-3, 3]`.
#[derive(Clone)]
pub struct SdeModel {
    drift: ScalarFn,
    drift_deriv: ScalarFn,
    sigma: f64,
}

impl SdeModel {
    pub fn new(
        sigma: f64,
        drift: impl Fn(f64) -> f64 + Send + Sync + 'static,
        drift_deriv: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::invalid("sigma", format!("must be positive and finite, got {sigma}")));
        }
        let model = Self {
            drift: Arc::new(drift),
            drift_deriv: Arc::new(drift_deriv),
            sigma,
        };
        #[cfg(debug_assertions)]
        model.check_drift_deriv()?;
        Ok(model)
    }

    /// The double-well model `dX = -4X(X^2 - 1) dt + sigma dB`.
    pub fn double_well(sigma: f64) -> Result<Self> {
        Self::new(sigma, double_well_drift, double_well_drift_deriv)
    }

    /// The shallow-well model `dY = -alpha 4Y(Y^2 - 1) dt + sigma dB`,
    /// `alpha` in `(0, 1]`.
    pub fn scaled_well(alpha: f64, sigma: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::invalid("alpha", format!("must lie in (0, 1], got {alpha}")));
        }
        Self::new(
            sigma,
            move |y| scaled_well_drift(alpha, y),
            move |y| alpha * double_well_drift_deriv(y),
        )
    }

    /// Pure diffusion `dX = sigma dB`.
    pub fn zero_drift(sigma: f64) -> Result<Self> {
        Self::new(sigma, |_| 0.0, |_| 0.0)
    }

    pub fn drift(&self, x: f64) -> f64 {
        (self.drift)(x)
    }

    pub fn drift_deriv(&self, x: f64) -> f64 {
        (self.drift_deriv)(x)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    #[cfg(debug_assertions)]
    fn check_drift_deriv(&self) -> Result<()> {
        const H: f64 = 1e-6;
        // Probe grid over the working range; construction must be cheap,
        // so a coarse deterministic grid rather than random draws.
        for i in 0..=12 {
            let x = -3.0 + 0.5 * i as f64;
            let fd = ((self.drift)(x + H) - (self.drift)(x - H)) / (2.0 * H);
            let d = (self.drift_deriv)(x);
            if (d - fd).abs() / d.abs().max(1.0) > 1e-6 {
                return Err(Error::invalid(
                    "drift_deriv",
                    format!("disagrees with finite differences at x = {x}: analytic {d}, fd {fd}"),
                ));
            }
        }
        Ok(())
    }
}

impl fmt::Debug for SdeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeModel").field("sigma", &self.sigma).finish()
    }
}

impl Drift for SdeModel {
    fn drift(&self, x: f64) -> f64 {
        SdeModel::drift(self, x)
    }

    fn drift_deriv(&self, x: f64) -> f64 {
        SdeModel::drift_deriv(self, x)
    }

    fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Convex combination of two drifts sharing one diffusion coefficient:
/// `(1 - epsilon) * base + epsilon * target`.
///
/// The endpoints are exact by construction: at `epsilon == 0` only the
/// base drift is evaluated, at `epsilon == 1` only the target drift.
#[derive(Clone, Debug)]
pub struct RelaxedModel {
    base: SdeModel,
    target: SdeModel,
    epsilon: f64,
}

impl RelaxedModel {
    pub fn new(base: SdeModel, target: SdeModel, epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::invalid("epsilon", format!("must lie in [0, 1], got {epsilon}")));
        }
        if base.sigma != target.sigma {
            return Err(Error::invalid(
                "sigma",
                format!(
                    "base and target must share one diffusion coefficient ({} vs {})",
                    base.sigma, target.sigma
                ),
            ));
        }
        Ok(Self { base, target, epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl Drift for RelaxedModel {
    fn drift(&self, y: f64) -> f64 {
        if self.epsilon == 0.0 {
            self.base.drift(y)
        } else if self.epsilon == 1.0 {
            self.target.drift(y)
        } else {
            (1.0 - self.epsilon) * self.base.drift(y) + self.epsilon * self.target.drift(y)
        }
    }

    fn drift_deriv(&self, y: f64) -> f64 {
        if self.epsilon == 0.0 {
            self.base.drift_deriv(y)
        } else if self.epsilon == 1.0 {
            self.target.drift_deriv(y)
        } else {
            (1.0 - self.epsilon) * self.base.drift_deriv(y) + self.epsilon * self.target.drift_deriv(y)
        }
    }

    fn sigma(&self) -> f64 {
        self.base.sigma
    }
}

/// The convex combination of the two drifts at a point.
pub fn relaxed_drift(model: &RelaxedModel, y: f64) -> f64 {
    model.drift(y)
}

/// A block of Brownian increments `dB_0 .. dB_{I-1}` with their step
/// size. This is the coordinate system for conditional sampling: a
/// start point plus an increment path determines a discrete trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct IncrementPath {
    increments: Vec<f64>,
    dt: f64,
}

impl IncrementPath {
    pub fn new(increments: Vec<f64>, dt: f64) -> Result<Self> {
        if increments.is_empty() {
            return Err(Error::invalid("increments", "must contain at least one step"));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid("dt", format!("must be positive and finite, got {dt}")));
        }
        Ok(Self { increments, dt })
    }

    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn into_increments(self) -> Vec<f64> {
        self.increments
    }

    /// Total time spanned: `len * dt`.
    pub fn horizon(&self) -> f64 {
        self.increments.len() as f64 * self.dt
    }
}

/// A discrete trajectory `X_0 .. X_I` on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretePath {
    states: Vec<f64>,
    dt: f64,
}

impl DiscretePath {
    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// The final grid value `X_I`.
    pub fn endpoint(&self) -> f64 {
        *self.states.last().expect("paths have at least one state")
    }
}

/// Euler–Maruyama recursion driven by the given increments:
/// `X_i = X_{i-1} + drift(X_{i-1}) dt + sigma dB_{i-1}`.
///
/// Fully deterministic given its inputs. Fails with the offending step
/// index if any state turns non-finite.
pub fn propagate<M: Drift>(x0: f64, path: &IncrementPath, model: &M) -> Result<DiscretePath> {
    let mut states = Vec::with_capacity(path.len() + 1);
    propagate_into(x0, path.increments(), path.dt(), model, &mut states)?;
    Ok(DiscretePath {
        states,
        dt: path.dt(),
    })
}

/// Propagation core reused by the sampler's hot loop; fills `states`
/// with `I + 1` grid values.
pub(crate) fn propagate_into<M: Drift>(
    x0: f64,
    increments: &[f64],
    dt: f64,
    model: &M,
    states: &mut Vec<f64>,
) -> Result<()> {
    states.clear();
    if !x0.is_finite() {
        return Err(Error::NumericalBlowup { step: 0 });
    }
    states.push(x0);
    let sigma = model.sigma();
    let mut x = x0;
    for (i, &db) in increments.iter().enumerate() {
        x = x + model.drift(x) * dt + sigma * db;
        if !x.is_finite() {
            return Err(Error::NumericalBlowup { step: i + 1 });
        }
        states.push(x);
    }
    Ok(())
}

/// Draws `count` independent Gaussian increments of variance `dt`.
pub fn sample_increments<R: Rng + ?Sized>(rng: &mut R, count: usize, dt: f64) -> IncrementPath {
    assert!(count >= 1, "need at least one increment");
    assert!(dt > 0.0, "step size must be positive");
    let scale = dt.sqrt();
    let increments = (0..count)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    IncrementPath { increments, dt }
}
