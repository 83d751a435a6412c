//! Identification from the algebraic decay tail of the trace.
//!
//! For large times the trace behaves as a sum of powers `t^{-q}` where the
//! exponents `q` are sums `sum_j p_j i_j < 1` of the fractional orders. The
//! Newton fit works on the truncated expansion with the exponent set
//! re-derived every iteration; the peel-off estimator instead extracts one
//! power at a time from log-log slopes, requiring no starting guesses.

use super::{
    gauss_newton_step, IterationRecord, PruningRecord, ReconError, ReconstructionReport,
    ReconstructionStatus,
};
use crate::forward::TimeTrace;
use crate::model::DampingModel;
use crate::special::{digamma, gamma};
use nalgebra::{DMatrix, DVector};

/// The retained multi-index set of the tail expansion for given orders
/// `p_1 < ... < p_N`: all `i` with `|i| = m <= m_max = floor(1/p_1)` and
/// `sum_j p_j i_j < 1` strictly, ordered by `(m, lexicographic)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticTermSet {
    pub orders: Vec<f64>,
    pub indices: Vec<Vec<usize>>,
}

/// Hard cap on the expansion depth `m`. `floor(1/p_1)` explodes
/// combinatorially when an iterate pushes the smallest order toward zero;
/// beyond this depth the omitted terms carry extra factors
/// `(b/Lambda)^m` and are negligible for any sane strength.
const MAX_EXPANSION_DEPTH: usize = 12;

/// Cap on the parameter-space length of a single Newton step; see
/// `largetime_newton` for how over-long steps are truncated spectrally.
const TRUST_RADIUS: f64 = 0.5;

impl AsymptoticTermSet {
    pub fn derive(p: &[f64]) -> Self {
        let m_max = ((1.0 / p[0]).floor() as usize).min(MAX_EXPANSION_DEPTH);
        let mut indices = Vec::new();
        for m in 1..=m_max {
            let mut stack = vec![(Vec::new(), m)];
            let mut level = Vec::new();
            while let Some((prefix, rest)) = stack.pop() {
                if prefix.len() == p.len() - 1 {
                    let mut idx = prefix;
                    idx.push(rest);
                    level.push(idx);
                } else {
                    for take in (0..=rest).rev() {
                        let mut next = prefix.clone();
                        next.push(take);
                        stack.push((next, rest - take));
                    }
                }
            }
            level.sort();
            for idx in level {
                let q: f64 = idx.iter().zip(p).map(|(&i, &pj)| i as f64 * pj).sum();
                // strict inequality with a guard so Gamma(1 - q) is never
                // evaluated arbitrarily close to its pole
                if q < 1.0 - 1e-9 {
                    indices.push(idx);
                }
            }
        }
        AsymptoticTermSet { orders: p.to_vec(), indices }
    }

    pub fn exponent(&self, k: usize) -> f64 {
        self.indices[k].iter().zip(&self.orders).map(|(&i, &p)| i as f64 * p).sum()
    }

    /// Composite coefficient implied by a damping model with `lambda = 1`:
    /// the expansion of the displacement-excitation transfer function gives
    /// `(-1)^{m-1} Lambda^{-m} * multinomial(m; i) * prod_j b_j^{i_j}`.
    pub fn coefficient_from(&self, k: usize, b: &[f64], big_lambda: f64) -> f64 {
        let idx = &self.indices[k];
        let m: usize = idx.iter().sum();
        let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
        sign * big_lambda.powi(-(m as i32))
            * multinomial(m, idx)
            * idx.iter().zip(b).map(|(&i, &bj)| bj.powi(i as i32)).product::<f64>()
    }
}

fn multinomial(m: usize, idx: &[usize]) -> f64 {
    let mut v = ln_factorial(m);
    for &i in idx {
        v -= ln_factorial(i);
    }
    v.exp().round()
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Value and gradient of the tail model
/// `sum_k C_k(b, Lambda) t^{-q_k} / Gamma(1 - q_k)` at one time. Every
/// composite coefficient is tied analytically to the damping strengths, so
/// the free parameters are only `(p_1..p_N, b_1..b_N)` and the gradient has
/// length `2N`. Leaving the composite coefficients free instead makes the
/// fit non-identifiable: over a window spanning a factor of a few in `t`
/// the powers are collinear enough that wrong orders reproduce the data
/// to ten digits.
pub fn largetime_model(
    p: &[f64],
    b: &[f64],
    big_lambda: f64,
    t: f64,
    terms: &AsymptoticTermSet,
) -> (f64, Vec<f64>) {
    let n = p.len();
    let mut value = 0.0;
    let mut grad = vec![0.0; 2 * n];
    let lt = t.ln();
    for (k, idx) in terms.indices.iter().enumerate() {
        let q = terms.exponent(k);
        debug_assert!(1.0 - q > 1e-9);
        let m: usize = idx.iter().sum();
        let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
        let front = sign * big_lambda.powi(-(m as i32)) * multinomial(m, idx);
        let coeff = front * idx.iter().zip(b).map(|(&i, &bj)| bj.powi(i as i32)).product::<f64>();
        let basis = t.powf(-q) / gamma(1.0 - q);
        value += coeff * basis;
        let dq = coeff * basis * (digamma(1.0 - q) - lt);
        for (j, &i) in idx.iter().enumerate() {
            grad[j] += dq * i as f64;
            if i > 0 {
                let dcoeff = front
                    * idx
                        .iter()
                        .zip(b)
                        .enumerate()
                        .map(|(l, (&il, &bl))| {
                            if l == j {
                                il as f64 * bl.powi(il as i32 - 1)
                            } else {
                                bl.powi(il as i32)
                            }
                        })
                        .product::<f64>();
                grad[n + j] += dcoeff * basis;
            }
        }
    }
    (value, grad)
}

/// Starting point for the tail Newton fit, given as order/coefficient
/// guesses of the damping terms themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct LargetimeInitial {
    pub alpha: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LargetimeOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Known composite stiffness `Lambda = c^2 lambda`.
    pub big_lambda: f64,
    /// Relative truncation level for singular values of the Jacobian.
    pub svd_cutoff: f64,
}

impl LargetimeOptions {
    pub fn new(big_lambda: f64) -> Self {
        LargetimeOptions { tol: 1e-8, max_iter: 30, big_lambda, svd_cutoff: 1e-12 }
    }
}

fn relative_residual(
    p: &[f64],
    b: &[f64],
    big_lambda: f64,
    t: &[f64],
    h: &[f64],
    with_jacobian: bool,
) -> (DVector<f64>, Option<DMatrix<f64>>) {
    let terms = AsymptoticTermSet::derive(p);
    let mut r = DVector::zeros(t.len());
    let mut jac = with_jacobian.then(|| DMatrix::zeros(t.len(), 2 * p.len()));
    for (i, (&ti, &hi)) in t.iter().zip(h).enumerate() {
        let (val, grad) = largetime_model(p, b, big_lambda, ti, &terms);
        let w = 1.0 / hi.abs().max(1e-300);
        r[i] = (val - hi) * w;
        if let Some(j) = jac.as_mut() {
            for (c, g) in grad.iter().enumerate() {
                j[(i, c)] = g * w;
            }
        }
    }
    (r, jac)
}

fn feasible_orders(p: &[f64]) -> bool {
    p.iter().all(|&x| x > 0.0 && x < 1.0)
}

/// Newton fit of the tail expansion on a trace restricted to
/// `[t_min, t_max]`, with relative residual weighting over the free
/// parameters `(p_1..p_N, b_1..b_N)` (with `lambda = 1`, `beta = 1`).
///
/// Steps are taken at full length: the objective is a narrow curved valley
/// in which the residual must transiently rise on the way to the minimum,
/// so a monotone line search stalls far from it. Divergence is declared
/// only when the residual keeps growing well past the best iterate. The
/// retained exponent set is re-derived from the current orders before every
/// evaluation, which keeps all `Gamma(1 - q)` arguments positive.
///
/// A requested order that ends beyond twice the smallest order while its
/// strength collapses below `1e-3` of the first is reported as masked by
/// the expansion remainder.
pub fn largetime_newton(
    initial: &LargetimeInitial,
    trace: &TimeTrace,
    opts: &LargetimeOptions,
) -> Result<ReconstructionReport, ReconError> {
    let t = &trace.t;
    let h = &trace.h;
    let n = initial.alpha.len();
    if t.len() < 2 * n + 1 {
        return Err(ReconError::TooFewSamples { n: t.len(), need: 2 * n + 1 });
    }
    let ratio = t.last().unwrap() / t[0];
    if ratio < 2.0 {
        return Err(ReconError::WindowTooNarrow { ratio });
    }
    if !feasible_orders(&initial.alpha) || initial.alpha.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ReconError::BadParams("orders must be strictly increasing in (0,1)".into()));
    }
    if initial.b.len() != n {
        return Err(ReconError::BadParams("one strength guess per order".into()));
    }
    let lam = opts.big_lambda;
    let mut p = initial.alpha.clone();
    let mut b = initial.b.clone();
    let mapped = |p: &[f64], b: &[f64]| {
        let mut out = p.to_vec();
        out.extend_from_slice(b);
        out
    };
    let mut history =
        vec![IterationRecord { iteration: 0, params: mapped(&p, &b), residual: None }];
    let mut pruning_log = Vec::new();
    let mut status = ReconstructionStatus::ResidualSaturated;
    let mut best_norm = f64::INFINITY;
    let mut grow_count = 0usize;
    for iter in 1..=opts.max_iter {
        let old_count = AsymptoticTermSet::derive(&p).indices.len();
        let (r, jac) = relative_residual(&p, &b, lam, t, h, true);
        let norm = r.norm();
        // the residual belongs to the parameters of the previous record
        history.last_mut().unwrap().residual = Some(norm);
        if norm < opts.tol {
            status = ReconstructionStatus::Converged;
            break;
        }
        // the residual is allowed to rise transiently — the path to the
        // minimum crosses ridges of this objective — but a long stretch
        // far above the best iterate is divergence
        if norm < best_norm * (1.0 - 1e-12) {
            best_norm = norm;
            grow_count = 0;
        } else {
            grow_count += 1;
            if norm > 1e6 * best_norm && grow_count >= 6 {
                return Err(ReconError::Diverged { iteration: iter });
            }
            if grow_count >= 12 {
                status = ReconstructionStatus::ResidualSaturated;
                break;
            }
        }
        // trust-radius step via spectral truncation: when the min-norm step
        // is wild (masked terms give near-null Jacobian columns), escalate
        // the singular-value cutoff instead of shrinking along the same bad
        // direction, which preserves progress on the well-determined part
        let jac = jac.unwrap();
        let mut step = gauss_newton_step(&jac, &r, opts.svd_cutoff);
        for cut in [1e-10, 1e-8, 1e-6, 1e-4] {
            if step.norm() <= TRUST_RADIUS || cut <= opts.svd_cutoff {
                break;
            }
            step = gauss_newton_step(&jac, &r, cut);
        }
        let len = step.norm();
        if len > TRUST_RADIUS {
            step *= TRUST_RADIUS / len;
        }
        let step_size = step.norm();
        for j in 0..n {
            p[j] = (p[j] + step[j]).clamp(1e-4, 1.0 - 1e-4);
            b[j] = (b[j] + step[n + j]).max(0.0);
        }
        // keep the orders ascending, carrying strengths alongside
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &c| p[a].total_cmp(&p[c]));
        if order.iter().enumerate().any(|(i, &j)| i != j) {
            p = order.iter().map(|&j| p[j]).collect();
            b = order.iter().map(|&j| b[j]).collect();
        }
        let new_count = AsymptoticTermSet::derive(&p).indices.len();
        if new_count != old_count {
            pruning_log.push(PruningRecord {
                iteration: iter,
                term: format!("retained multi-indices {old_count} -> {new_count}"),
                reason: "exponent set re-derived after order update".into(),
            });
        }
        history.push(IterationRecord {
            iteration: iter,
            params: mapped(&p, &b),
            residual: None,
        });
        if step_size < 1e-12 {
            status = ReconstructionStatus::ResidualSaturated;
            break;
        }
    }
    // give the final parameters their own residual when the loop ended
    // right after a step
    if history.last().map(|rec| rec.residual.is_none()).unwrap_or(false) {
        let (r, _) = relative_residual(&p, &b, lam, t, h, false);
        history.last_mut().unwrap().residual = Some(r.norm());
    }
    // Masking check: a term whose order sits beyond twice the smallest one
    // lives inside the expansion remainder; when on top of that its relative
    // contribution to the signal is negligible over the whole window, the
    // data carries no information about it and the fitted value is
    // arbitrary. (Checking the fitted strength itself is useless here: in
    // the degenerate directions it can end up at any size.)
    let t0 = t[0];
    let h0 = h[0].abs().max(1e-300);
    let mut masked = false;
    for i in 1..n {
        let contribution =
            (b[i] / lam * t0.powf(-p[i]) / gamma(1.0 - p[i])).abs() / h0;
        if p[i] >= 2.0 * p[0] && contribution < 1e-3 {
            masked = true;
            pruning_log.push(PruningRecord {
                iteration: history.last().unwrap().iteration,
                term: format!("p_{} = {:.4}", i + 1, p[i]),
                reason: format!(
                    "order beyond 2 p_1 = {:.4} with relative signal contribution {contribution:.1e}; masked by the expansion remainder",
                    2.0 * p[0]
                ),
            });
        }
    }
    if masked {
        status = ReconstructionStatus::TermMasked;
    }
    let recovered = DampingModel::with_unit_beta(lam, &p, &b)?;
    Ok(ReconstructionReport { recovered, history, status, pruning_log })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeelOptions {
    pub max_terms: usize,
    /// Window shrink factor: each refit uses `[delta * T, T]`.
    pub delta: f64,
    pub big_lambda: f64,
    /// Stop when the residual trace magnitude falls below this; by default
    /// 10x the noise level estimated from second differences.
    pub floor: Option<f64>,
}

impl PeelOptions {
    pub fn new(big_lambda: f64) -> Self {
        PeelOptions { max_terms: 3, delta: 0.25, big_lambda, floor: None }
    }
}

/// Sequential peel-off estimation: the smallest order from the log-log slope
/// over the top decade of the window, its coefficient from the 5 largest
/// times, then the fitted power is subtracted and the procedure repeats on
/// `[delta T, T]`. Works without starting guesses but degrades quickly with
/// the number of terms.
pub fn sequential_peel(
    trace: &TimeTrace,
    opts: &PeelOptions,
) -> Result<ReconstructionReport, ReconError> {
    let t = &trace.t;
    if t.len() < 16 {
        return Err(ReconError::TooFewSamples { n: t.len(), need: 16 });
    }
    let t_end = *t.last().unwrap();
    let ratio = t_end / t[0];
    if ratio < 2.0 {
        return Err(ReconError::WindowTooNarrow { ratio });
    }
    let lam = opts.big_lambda;
    let hmax = trace.h.iter().fold(0.0, |a: f64, &v| a.max(v.abs()));
    let floor = opts.floor.unwrap_or_else(|| {
        // second-difference noise estimate: for white noise, |d2 h| has
        // standard deviation sqrt(6) sigma
        let mut d2: Vec<f64> = trace
            .h
            .windows(3)
            .map(|w| (w[0] - 2.0 * w[1] + w[2]).abs())
            .collect();
        d2.sort_by(f64::total_cmp);
        let med = d2[d2.len() / 2] / 6.0f64.sqrt();
        (10.0 * med).max(1e-13 * hmax)
    });

    let mut h_cur = trace.h.clone();
    let mut alphas: Vec<f64> = Vec::new();
    let mut bs: Vec<f64> = Vec::new();
    let mut history =
        vec![IterationRecord { iteration: 0, params: Vec::new(), residual: None }];
    let mut pruning_log = Vec::new();
    let mut status = ReconstructionStatus::ResidualSaturated;
    for round in 0..opts.max_terms {
        let t_lo = if round == 0 { t[0] } else { opts.delta * t_end };
        let window: Vec<usize> = (0..t.len()).filter(|&i| t[i] >= t_lo).collect();
        let peak = window.iter().map(|&i| h_cur[i].abs()).fold(0.0, f64::max);
        if peak < floor {
            status = ReconstructionStatus::Converged;
            break;
        }
        // the log-log slope needs one sign throughout the fit decade
        let decade: Vec<usize> = window
            .iter()
            .copied()
            .filter(|&i| t[i] >= t_end / 10.0)
            .collect();
        if h_cur[decade[0]] <= 0.0
            || decade.iter().any(|&i| h_cur[i].signum() != h_cur[decade[0]].signum())
        {
            if round == 0 {
                return Err(ReconError::SignLoss { terms: 0 });
            }
            pruning_log.push(PruningRecord {
                iteration: round,
                term: format!("term {}", round + 1),
                reason: "residual trace changed sign before the noise floor; further terms are masked"
                    .into(),
            });
            status = ReconstructionStatus::TermMasked;
            break;
        }
        // least-squares line of ln h against ln t
        let xs: Vec<f64> = decade.iter().map(|&i| t[i].ln()).collect();
        let ys: Vec<f64> = decade.iter().map(|&i| h_cur[i].ln()).collect();
        let xm = xs.iter().sum::<f64>() / xs.len() as f64;
        let ym = ys.iter().sum::<f64>() / ys.len() as f64;
        let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
        let alpha = -(sxy / sxx);
        if !(0.0..1.0).contains(&alpha) {
            if round == 0 {
                return Err(ReconError::BadParams(format!(
                    "log-log slope gives order {alpha:.3} outside (0,1)"
                )));
            }
            pruning_log.push(PruningRecord {
                iteration: round,
                term: format!("term {}", round + 1),
                reason: format!("slope estimate {alpha:.3} left (0,1); stopping"),
            });
            status = ReconstructionStatus::TermMasked;
            break;
        }
        // coefficient from the 5 largest times, averaged
        let tail = &decade[decade.len().saturating_sub(5)..];
        let b = tail
            .iter()
            .map(|&i| h_cur[i] * t[i].powf(alpha) * lam * gamma(1.0 - alpha))
            .sum::<f64>()
            / tail.len() as f64;
        let c = b / (lam * gamma(1.0 - alpha));
        for i in 0..t.len() {
            h_cur[i] -= c * t[i].powf(-alpha);
        }
        alphas.push(alpha);
        bs.push(b);
        let resid = window.iter().map(|&i| h_cur[i].abs()).fold(0.0, f64::max);
        let mut params = alphas.clone();
        params.extend_from_slice(&bs);
        history.push(IterationRecord { iteration: round + 1, params, residual: Some(resid) });
        if resid < floor {
            status = ReconstructionStatus::Converged;
            break;
        }
    }
    if alphas.is_empty() {
        return Err(ReconError::SignLoss { terms: 0 });
    }
    // sort ascending and merge orders too close to coexist in a model
    let mut pairs: Vec<(f64, f64)> = alphas.iter().copied().zip(bs.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (a, b) in pairs {
        match merged.last_mut() {
            Some(last) if a - last.0 < 1e-4 => last.1 += b,
            _ => merged.push((a, b)),
        }
    }
    let p: Vec<f64> = merged.iter().map(|x| x.0).collect();
    let b: Vec<f64> = merged.iter().map(|x| x.1.max(0.0)).collect();
    let recovered = DampingModel::with_unit_beta(opts.big_lambda, &p, &b)?;
    Ok(ReconstructionReport { recovered, history, status, pruning_log })
}
