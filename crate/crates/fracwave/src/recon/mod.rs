//! Recovery of damping parameters from time-trace observations.
//!
//! Three complementary identification strategies are provided:
//!
//! * [`fulltime`] — Newton iteration on Laplace-domain samples of the whole
//!   trace, recovering orders, coefficients, and the composite stiffness.
//! * [`largetime`] — fits the algebraic decay tail of the trace, whose
//!   exponents are the fractional orders; includes a sequential peel-off
//!   estimator that needs no starting guesses.
//! * [`smalltime`] — fits the short-time expansion of the damping forcing
//!   `g = -Lambda h - h''` extracted from the first instants of the trace.
//!
//! All three fix the eigenvalue power `beta` at 1 and report the damping
//! coefficients in the composite normalization `lambda = 1`, since only the
//! products `b_k lambda^{beta_k}` and `Lambda = c^2 lambda` are identifiable
//! from a single mode.

pub mod fulltime;
pub mod largetime;
pub mod smalltime;

pub use fulltime::{fulltime_newton, fulltime_system, FulltimeOptions, FulltimeParams};
pub use largetime::{
    largetime_model, largetime_newton, sequential_peel, AsymptoticTermSet, LargetimeInitial,
    LargetimeOptions, PeelOptions,
};
pub use smalltime::{
    smalltime_model, smalltime_newton, smalltime_preprocess, SmalltimeInitial, SmalltimeOptions,
};

use crate::model::ModelError;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Terminal state of an identification run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconstructionStatus {
    /// Residual dropped below the requested tolerance.
    Converged,
    /// Iteration stalled with the residual above tolerance — the expected
    /// outcome when the fitted expansion cannot represent the data exactly
    /// (truncated asymptotics, differenced data).
    ResidualSaturated,
    /// Residual grew without an accepted decrease.
    Diverged,
    /// At least one requested term was absorbed by the remainder of the
    /// asymptotic expansion and could not be identified.
    TermMasked,
}

/// One Newton/fit iteration: parameter vector after the step and the
/// residual 2-norm evaluated there. Iteration 0 holds the starting guess
/// with no residual recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub params: Vec<f64>,
    pub residual: Option<f64>,
}

/// A term dropped, merged, or flagged during the iteration, with the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct PruningRecord {
    pub iteration: usize,
    pub term: String,
    pub reason: String,
}

/// Outcome of an identification run.
#[derive(Debug, Clone)]
pub struct ReconstructionReport {
    pub recovered: crate::model::DampingModel,
    pub history: Vec<IterationRecord>,
    pub status: ReconstructionStatus,
    pub pruning_log: Vec<PruningRecord>,
}

impl ReconstructionReport {
    /// Final recorded residual, if any iteration ran.
    pub fn final_residual(&self) -> Option<f64> {
        self.history.iter().rev().find_map(|r| r.residual)
    }
    pub fn iterations(&self) -> usize {
        self.history.last().map_or(0, |r| r.iteration)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReconError {
    #[error("transform sample {index} is zero; the data carries no signal there")]
    DataZero { index: usize },
    #[error("denominator vanishes at s = {s}; data is inconsistent with the displacement excitation")]
    DenominatorZero { s: f64 },
    #[error("only displacement, velocity, and constant-source excitations are identifiable")]
    UnsupportedExcitation,
    #[error("residual grew over 3 consecutive damped steps (iteration {iteration})")]
    Diverged { iteration: usize },
    #[error("observation window ratio {ratio:.3} < 2; tail exponents are not separable")]
    WindowTooNarrow { ratio: f64 },
    #[error("residual trace changed sign before reaching the noise floor ({terms} terms recovered)")]
    SignLoss { terms: usize },
    #[error("trace grid is not uniform")]
    NonUniformGrid,
    #[error("need at least {need} samples, got {n}")]
    TooFewSamples { n: usize, need: usize },
    #[error("infeasible parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Minimum-norm least-squares solution of `J d = -r` via SVD, with singular
/// values below `cutoff * sigma_max` treated as zero. A cutoff well above
/// machine precision acts as a truncated-SVD regularizer: it suppresses
/// motion along near-flat directions of the objective, which matters for the
/// severely ill-conditioned fits on twice-differenced data.
pub(crate) fn gauss_newton_step(
    jac: &DMatrix<f64>,
    res: &DVector<f64>,
    cutoff: f64,
) -> DVector<f64> {
    let svd = jac.clone().svd(true, true);
    let smax = svd.singular_values.max();
    svd.solve(&(-res), cutoff * smax)
        .unwrap_or_else(|_| DVector::zeros(jac.ncols()))
}

/// Shared damped-step acceptance: tries the full step and up to 20 halvings,
/// taking the first candidate that reduces `norm_of`; falls back to the best
/// candidate tried. Candidates pass through `project` first so a long step
/// that merely grazes the feasible boundary is clamped rather than wasted.
/// Returns `(params, norm, improved)`.
pub(crate) fn damped_update(
    params: &[f64],
    step: &DVector<f64>,
    current_norm: f64,
    project: impl Fn(&mut [f64]),
    mut norm_of: impl FnMut(&[f64]) -> Option<f64>,
) -> (Vec<f64>, f64, bool) {
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut scale = 1.0;
    for _ in 0..=20 {
        let mut cand: Vec<f64> =
            params.iter().zip(step.iter()).map(|(p, d)| p + scale * d).collect();
        project(&mut cand);
        if let Some(norm) = norm_of(&cand) {
            if best.as_ref().is_none_or(|(_, b)| norm < *b) {
                best = Some((cand, norm));
            }
        }
        scale *= 0.5;
    }
    match best {
        Some((p, n)) => {
            let improved = n < current_norm;
            (p, n, improved)
        }
        None => (params.to_vec(), current_norm, false),
    }
}
