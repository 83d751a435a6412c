//! Identification from Laplace-domain samples of the full trace.
//!
//! With `beta = 1` and `lambda = 1` the transfer function depends on the
//! unknowns only through `F(s) = sum_k b_k s^{alpha_k}`. Each excitation
//! admits an algebraic rearrangement `G(s)` of the sampled transform such
//! that `F(s_m) = G(s_m)` at the true parameters, so the fit is a damped
//! Gauss-Newton iteration on `F - G` with an analytic Jacobian.

use super::{
    gauss_newton_step, IterationRecord, PruningRecord, ReconError,
    ReconstructionReport, ReconstructionStatus,
};
use crate::laplace::LaplaceSamples;
use crate::model::{DampingModel, ExcitationKind};
use nalgebra::{DMatrix, DVector};

/// Unknowns of the full-time fit: damping coefficients, fractional orders,
/// and the composite stiffness `Lambda = c^2 lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct FulltimeParams {
    pub b: Vec<f64>,
    pub alpha: Vec<f64>,
    pub big_lambda: f64,
}

impl FulltimeParams {
    pub fn new(b: Vec<f64>, alpha: Vec<f64>, big_lambda: f64) -> Result<Self, ReconError> {
        if b.is_empty() || b.len() != alpha.len() {
            return Err(ReconError::BadParams("need matching, nonempty b and alpha".into()));
        }
        if b.iter().any(|&x| x <= 0.0) {
            return Err(ReconError::BadParams("coefficients must be positive".into()));
        }
        if alpha.windows(2).any(|w| w[1] <= w[0]) || alpha[0] <= 0.0 || *alpha.last().unwrap() > 1.0
        {
            return Err(ReconError::BadParams(
                "orders must be strictly increasing in (0, 1]".into(),
            ));
        }
        if big_lambda <= 0.0 {
            return Err(ReconError::BadParams("Lambda must be positive".into()));
        }
        Ok(FulltimeParams { b, alpha, big_lambda })
    }

    fn to_vec(&self) -> Vec<f64> {
        let mut v = self.b.clone();
        v.extend_from_slice(&self.alpha);
        v.push(self.big_lambda);
        v
    }

    fn from_vec(v: &[f64]) -> FulltimeParams {
        let n = (v.len() - 1) / 2;
        FulltimeParams {
            b: v[..n].to_vec(),
            alpha: v[n..2 * n].to_vec(),
            big_lambda: v[2 * n],
        }
    }

    fn feasible(&self) -> bool {
        self.b.iter().all(|&x| x > 0.0)
            && self.alpha.iter().all(|&a| a > 0.0 && a <= 1.0)
            && self.big_lambda > 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FulltimeOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Keep `Lambda` at its initial value instead of solving for it.
    pub fix_lambda: bool,
    /// Relative truncation level for singular values of the Jacobian. The
    /// system has nearly flat directions; on data with quadrature or noise
    /// error the untruncated step explodes along them, so imperfect data
    /// needs a cutoff at roughly the relative data accuracy.
    pub svd_cutoff: f64,
}

impl Default for FulltimeOptions {
    fn default() -> Self {
        FulltimeOptions { tol: 1e-8, max_iter: 30, fix_lambda: false, svd_cutoff: 1e-12 }
    }
}

struct SystemParts {
    /// `F(s_m)` — the damping symbol at the current parameters.
    f: DVector<f64>,
    /// `G(s_m)` — the data rearrangement.
    g: DVector<f64>,
    /// Columns `dF/db_k`, `dF/dalpha_k` (and a zero `Lambda` column).
    jf: DMatrix<f64>,
    /// `dG/dLambda` per sample.
    dg_dlambda: DVector<f64>,
}

fn system_parts(
    params: &FulltimeParams,
    samples: &LaplaceSamples,
    kind: ExcitationKind,
) -> Result<SystemParts, ReconError> {
    let n = params.b.len();
    let m = samples.abscissae.len();
    let hmax = samples.values.iter().fold(0.0, |a: f64, &v| a.max(v.abs()));
    let mut f = DVector::zeros(m);
    let mut g = DVector::zeros(m);
    let mut jf = DMatrix::zeros(m, 2 * n + 1);
    let mut dg_dlambda = DVector::zeros(m);
    for i in 0..m {
        let s = samples.abscissae[i];
        let hhat = samples.values[i];
        if hhat == 0.0 || hhat.abs() <= 1e-15 * hmax {
            return Err(ReconError::DataZero { index: i });
        }
        for k in 0..n {
            let pw = s.powf(params.alpha[k]);
            f[i] += params.b[k] * pw;
            jf[(i, k)] = pw;
            jf[(i, n + k)] = params.b[k] * s.ln() * pw;
        }
        let lam = params.big_lambda;
        match kind {
            ExcitationKind::InitialVelocity => {
                g[i] = 1.0 / hhat - s * s - lam;
                dg_dlambda[i] = -1.0;
            }
            ExcitationKind::Source => {
                // unit constant source: sigma_hat = 1/s
                g[i] = 1.0 / (s * hhat) - s * s - lam;
                dg_dlambda[i] = -1.0;
            }
            ExcitationKind::InitialDisplacement => {
                let d = 1.0 - s * hhat;
                if d.abs() < 1e-12 {
                    return Err(ReconError::DenominatorZero { s });
                }
                g[i] = lam / d - s * s - lam;
                dg_dlambda[i] = 1.0 / d - 1.0;
            }
            ExcitationKind::InitialAcceleration => return Err(ReconError::UnsupportedExcitation),
        }
    }
    Ok(SystemParts { f, g, jf, dg_dlambda })
}

/// Residual `F(s_m) - G(s_m)` and its Jacobian with columns ordered
/// `(b_1..b_N, alpha_1..alpha_N, Lambda)`.
pub fn fulltime_system(
    params: &FulltimeParams,
    samples: &LaplaceSamples,
    kind: ExcitationKind,
) -> Result<(DVector<f64>, DMatrix<f64>), ReconError> {
    let n = params.b.len();
    let m = samples.abscissae.len();
    if m < 2 * n + 1 {
        return Err(ReconError::TooFewSamples { n: m, need: 2 * n + 1 });
    }
    let parts = system_parts(params, samples, kind)?;
    let r = &parts.f - &parts.g;
    let mut jac = parts.jf;
    for i in 0..m {
        jac[(i, 2 * n)] = -parts.dg_dlambda[i];
    }
    Ok((r, jac))
}

fn direct_norm(
    v: &[f64],
    samples: &LaplaceSamples,
    kind: ExcitationKind,
) -> Option<f64> {
    let p = FulltimeParams::from_vec(v);
    if !p.feasible() {
        return None;
    }
    let parts = system_parts(&p, samples, kind).ok()?;
    Some((&parts.f - &parts.g).norm())
}

/// Largest accepted parameter-step length; longer minimum-norm steps are
/// first regularized harder, then clipped.
const TRUST_RADIUS: f64 = 2.0;

/// Gauss-Newton identification of `(b, alpha, Lambda)` from transform
/// samples. The first two iterations solve the log form `ln F - ln G`, which
/// is linear in `ln b` and much less nonlinear in the orders; subsequent
/// iterations use the direct residual. Orders are kept sorted (with paired
/// coefficients) after every step, and near-coincident orders are merged
/// into a single term, logged in the pruning log.
pub fn fulltime_newton(
    initial: &FulltimeParams,
    samples: &LaplaceSamples,
    kind: ExcitationKind,
    opts: &FulltimeOptions,
) -> Result<ReconstructionReport, ReconError> {
    let mut v = initial.to_vec();
    let mut history =
        vec![IterationRecord { iteration: 0, params: v.clone(), residual: None }];
    let mut pruning_log = Vec::new();
    let mut status = ReconstructionStatus::ResidualSaturated;
    let mut grow_count = 0usize;
    let mut best_norm = f64::INFINITY;
    for iter in 1..=opts.max_iter {
        let p = FulltimeParams::from_vec(&v);
        let (r, jac) = fulltime_system(&p, samples, kind)?;
        let norm = r.norm();
        if norm < opts.tol {
            history.push(IterationRecord { iteration: iter, params: v.clone(), residual: Some(norm) });
            status = ReconstructionStatus::Converged;
            break;
        }
        let active = if opts.fix_lambda { v.len() - 1 } else { v.len() };
        let take_step = |r_sys: &DVector<f64>, jac_sys: &DMatrix<f64>| {
            let jac_active = jac_sys.columns(0, active).into_owned();
            let mut step_active = gauss_newton_step(&jac_active, r_sys, opts.svd_cutoff);
            // degenerate directions can blow the minimum-norm step up; raise
            // the spectral cutoff until the step fits the trust radius, then
            // scale whatever excess length remains
            for cut in [1e-10, 1e-8, 1e-6, 1e-4] {
                if step_active.norm() <= TRUST_RADIUS || cut <= opts.svd_cutoff {
                    break;
                }
                step_active = gauss_newton_step(&jac_active, r_sys, cut);
            }
            let len = step_active.norm();
            if len > TRUST_RADIUS {
                step_active *= TRUST_RADIUS / len;
            }
            let mut cand: Vec<f64> =
                v.iter().enumerate().map(|(i, &x)| x + step_active.get(i).copied().unwrap_or(0.0)).collect();
            project(&mut cand);
            let n = direct_norm(&cand, samples, kind).unwrap_or(f64::INFINITY);
            (cand, n)
        };
        // During the first two iterations the log-linearized system widens
        // the convergence basin; its step competes against the direct one
        // and the candidate with the smaller direct residual wins. Steps are
        // taken at full length: a monotone line search crawls through the
        // curved valley of this objective, while the full Newton step
        // restores quadratic convergence near the solution.
        let direct_cand = take_step(&r, &jac);
        let (mut v_new, norm_new) = if iter <= 2 {
            match log_system(&p, samples, kind) {
                Some((rl, jl)) => {
                    let log_cand = take_step(&rl, &jl);
                    if log_cand.1 < direct_cand.1 { log_cand } else { direct_cand }
                }
                None => direct_cand,
            }
        } else {
            direct_cand
        };
        sort_orders(&mut v_new);
        merge_collisions(&mut v_new, iter, &mut pruning_log);
        let step_size = v_new
            .iter()
            .zip(v.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        v = v_new;
        history.push(IterationRecord { iteration: iter, params: v.clone(), residual: Some(norm_new) });
        if norm_new < opts.tol {
            status = ReconstructionStatus::Converged;
            break;
        }
        // transient residual growth is part of the path to the minimum;
        // only sustained growth far above the best iterate is divergence
        if norm_new < best_norm * (1.0 - 1e-12) {
            best_norm = norm_new;
            grow_count = 0;
        } else {
            grow_count += 1;
            if norm_new > 1e6 * best_norm && grow_count >= 6 {
                return Err(ReconError::Diverged { iteration: iter });
            }
            if grow_count >= 12 {
                status = ReconstructionStatus::ResidualSaturated;
                break;
            }
        }
        if step_size < 1e-10 {
            status = ReconstructionStatus::ResidualSaturated;
            break;
        }
    }
    let p = FulltimeParams::from_vec(&v);
    let recovered = DampingModel::with_unit_beta(p.big_lambda, &p.alpha, &p.b)?;
    Ok(ReconstructionReport { recovered, history, status, pruning_log })
}

/// Clamps a trial iterate back into the feasible region so long Newton
/// directions that overshoot the positivity constraints stay usable.
fn project(v: &mut [f64]) {
    let n = (v.len() - 1) / 2;
    for b in &mut v[..n] {
        *b = b.max(1e-6);
    }
    for a in &mut v[n..2 * n] {
        *a = a.clamp(1e-4, 1.0);
    }
    v[2 * n] = v[2 * n].max(1e-6);
}

/// `ln F - ln G` residual with matching Jacobian, valid only while both
/// sides are positive at every sample.
fn log_system(
    params: &FulltimeParams,
    samples: &LaplaceSamples,
    kind: ExcitationKind,
) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let parts = system_parts(params, samples, kind).ok()?;
    let n = params.b.len();
    let m = samples.abscissae.len();
    if parts.f.iter().any(|&x| x <= 0.0) || parts.g.iter().any(|&x| x <= 0.0) {
        return None;
    }
    let mut r = DVector::zeros(m);
    let mut jac = DMatrix::zeros(m, 2 * n + 1);
    for i in 0..m {
        r[i] = parts.f[i].ln() - parts.g[i].ln();
        for k in 0..2 * n {
            jac[(i, k)] = parts.jf[(i, k)] / parts.f[i];
        }
        jac[(i, 2 * n)] = -parts.dg_dlambda[i] / parts.g[i];
    }
    Some((r, jac))
}

/// Sorts `alpha` ascending, carrying each coefficient with its order.
fn sort_orders(v: &mut [f64]) {
    let n = (v.len() - 1) / 2;
    let mut pairs: Vec<(f64, f64)> = (0..n).map(|k| (v[n + k], v[k])).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (k, (a, b)) in pairs.into_iter().enumerate() {
        v[k] = b;
        v[n + k] = a;
    }
}

/// Merges pairs of orders closer than 1e-4 into a single term with the
/// summed coefficient, shrinking the parameter vector.
fn merge_collisions(v: &mut Vec<f64>, iter: usize, log: &mut Vec<PruningRecord>) {
    loop {
        let n = (v.len() - 1) / 2;
        let Some(k) = (0..n - 1).find(|&k| (v[n + k + 1] - v[n + k]).abs() < 1e-4) else {
            return;
        };
        log.push(PruningRecord {
            iteration: iter,
            term: format!("alpha = {:.6} / {:.6}", v[n + k], v[n + k + 1]),
            reason: "order collision within 1e-4; terms merged".into(),
        });
        let merged_alpha = 0.5 * (v[n + k] + v[n + k + 1]);
        let merged_b = v[k] + v[k + 1];
        let lam = v[2 * n];
        let mut b: Vec<f64> = v[..n].to_vec();
        let mut alpha: Vec<f64> = v[n..2 * n].to_vec();
        b[k] = merged_b;
        alpha[k] = merged_alpha;
        b.remove(k + 1);
        alpha.remove(k + 1);
        v.clear();
        v.extend_from_slice(&b);
        v.extend_from_slice(&alpha);
        v.push(lam);
    }
}
