//! Numerical Laplace transforms of sampled traces, and pole/residue
//! extraction from the transfer function.
//!
//! The transform is the *exact* transform of the piecewise-linear
//! interpolant of the samples, so no quadrature error enters beyond the
//! interpolation itself. The truncation tail beyond the trace horizon is
//! deliberately not estimated; callers restrict to abscissae where it is
//! negligible.

use crate::forward::TimeTrace;
use crate::model::{cpow, transfer_numerator, DampingModel, EvalError, Excitation};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LaplaceError {
    #[error("trace must have at least 32 samples on a strictly increasing grid")]
    BadTraceGrid,
    #[error("grid too coarse: {hint}")]
    GridTooCoarse { hint: String },
    #[error("abscissae must be strictly increasing positive reals, matching values in length")]
    BadAbscissae,
    #[error("pole Newton iteration did not converge; last iterate {last} with |omega| = {omega_abs:.2e}")]
    NewtonDiverged { last: Complex64, omega_abs: f64 },
    #[error("pole with non-negative real part at {0}; parameter set is not dissipative")]
    RightHalfPlanePole(Complex64),
    #[error("symbol derivative vanishes at {0}; residue is undefined")]
    ZeroDerivative(Complex64),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Laplace-domain samples `(s_m, hhat(s_m))` of a trace truncated at `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceSamples {
    pub abscissae: Vec<f64>,
    pub values: Vec<f64>,
    pub truncation_horizon: f64,
}

impl LaplaceSamples {
    pub fn new(
        abscissae: Vec<f64>,
        values: Vec<f64>,
        truncation_horizon: f64,
    ) -> Result<Self, LaplaceError> {
        let ok = abscissae.len() == values.len()
            && !abscissae.is_empty()
            && abscissae[0] > 0.0
            && abscissae.windows(2).all(|w| w[1] > w[0]);
        if !ok {
            return Err(LaplaceError::BadAbscissae);
        }
        Ok(LaplaceSamples { abscissae, values, truncation_horizon })
    }

    /// Transforms a time trace on a geometric abscissa grid (the full-time
    /// reconstruction default is 24 points on [0.5, 16]).
    ///
    /// On a uniform grid the piecewise-linear quadrature carries an `O(dt^2)`
    /// interpolation error which is large enough to drag the downstream
    /// parameter fit along its flat valley; it is cancelled here by Richardson
    /// extrapolation against the half-resolution subgrid.
    pub fn from_trace(
        trace: &TimeTrace,
        s_min: f64,
        s_max: f64,
        count: usize,
        lambda_hint: Option<f64>,
    ) -> Result<Self, LaplaceError> {
        let ratio = (s_max / s_min).powf(1.0 / (count - 1) as f64);
        let abscissae: Vec<f64> = (0..count).map(|k| s_min * ratio.powi(k as i32)).collect();
        let coarse = uniform_stride2(trace);
        let values = abscissae
            .iter()
            .map(|&s| {
                let fine = laplace_numeric(trace, s, lambda_hint)?;
                Ok(match &coarse {
                    Some(c) => {
                        (4.0 * fine - transform_at(c, Complex64::new(s, 0.0)).re) / 3.0
                    }
                    None => fine,
                })
            })
            .collect::<Result<Vec<f64>, LaplaceError>>()?;
        LaplaceSamples::new(abscissae, values, *trace.t.last().unwrap())
    }
}

fn check_trace(trace: &TimeTrace, lambda_hint: Option<f64>) -> Result<(), LaplaceError> {
    if trace.t.len() < 32
        || trace.t.len() != trace.h.len()
        || trace.t.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(LaplaceError::BadTraceGrid);
    }
    if let Some(big_lambda) = lambda_hint {
        let period = 2.0 * std::f64::consts::PI / big_lambda.sqrt();
        let dt_max = trace.t.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        if dt_max > period / 4.0 {
            return Err(LaplaceError::GridTooCoarse {
                hint: format!(
                    "largest step {dt_max:.3e} gives fewer than 4 samples per principal period {period:.3e}"
                ),
            });
        }
    }
    Ok(())
}

/// `integral_0^dt exp(-s tau) * (f0 + (f1 - f0) tau/dt) dtau`, in closed form.
pub(crate) fn linear_segment_transform(s: Complex64, dt: f64, f0: f64, f1: f64) -> Complex64 {
    let x = s * dt;
    let (phi, psi) = if x.norm() < 1e-2 {
        // Taylor forms; the closed forms lose digits to cancellation here
        let x2 = x * x;
        let x3 = x2 * x;
        let phi = 1.0 - x / 2.0 + x2 / 6.0 - x3 / 24.0 + x2 * x2 / 120.0 - x2 * x3 / 720.0;
        let psi = 0.5 - x / 3.0 + x2 / 8.0 - x3 / 30.0 + x2 * x2 / 144.0 - x2 * x3 / 840.0;
        (phi, psi)
    } else {
        let ex = (-x).exp();
        ((1.0 - ex) / x, (1.0 - (1.0 + x) * ex) / (x * x))
    };
    dt * (f0 * phi + (f1 - f0) * psi)
}

/// Exact transform of the piecewise-linear interpolant at complex `s`.
/// The stride-2 subgrid of a uniform trace (used for quadrature-error
/// extrapolation), or `None` when the grid is nonuniform or too short.
fn uniform_stride2(trace: &TimeTrace) -> Option<TimeTrace> {
    let t = &trace.t;
    if t.len() < 9 {
        return None;
    }
    let dt = t[1] - t[0];
    let uniform = t.windows(2).all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt);
    if !uniform {
        return None;
    }
    let idx: Vec<usize> = (0..t.len()).step_by(2).collect();
    Some(TimeTrace::from_samples(
        idx.iter().map(|&i| t[i]).collect(),
        idx.iter().map(|&i| trace.h[i]).collect(),
    ))
}

pub fn transform_at(trace: &TimeTrace, s: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..trace.t.len() - 1 {
        let dt = trace.t[i + 1] - trace.t[i];
        acc +=
            (-s * trace.t[i]).exp() * linear_segment_transform(s, dt, trace.h[i], trace.h[i + 1]);
    }
    acc
}

/// `integral_0^T e^{-st} h(t) dt` for real `s`, by exact integration against
/// the piecewise-linear interpolant. The optional hint enables the sampling
/// check against the principal oscillation period `2 pi / sqrt(Lambda)`.
pub fn laplace_numeric(
    trace: &TimeTrace,
    s: f64,
    lambda_hint: Option<f64>,
) -> Result<f64, LaplaceError> {
    check_trace(trace, lambda_hint)?;
    Ok(transform_at(trace, Complex64::new(s, 0.0)).re)
}

/// A pole of the transfer function together with its residue and the
/// achieved symbol residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoleData {
    pub pole: Complex64,
    pub residue: Complex64,
    pub omega_residual: f64,
}

/// Residue of `hhat` at a simple pole `p` of the symbol:
/// `numerator(p) * weight / omega'(p)`.
pub fn residue_at(
    model: &DampingModel,
    exc: &Excitation,
    p: Complex64,
) -> Result<Complex64, LaplaceError> {
    let dw = model.omega_prime(p)?;
    if dw.norm() < 1e-14 {
        return Err(LaplaceError::ZeroDerivative(p));
    }
    Ok(transfer_numerator(model, exc, p)? * exc.weight() / dw)
}

/// Locates the dominant conjugate pole pair of the transfer function by a
/// damped Newton iteration on `omega(s) = 0` started at `i sqrt(Lambda)`.
pub fn find_poles(
    model: &DampingModel,
    exc: &Excitation,
    max_iter: usize,
) -> Result<(PoleData, PoleData), LaplaceError> {
    let mut s = Complex64::new(0.0, model.big_lambda.sqrt());
    let mut w = model.omega(s)?;
    for _ in 0..max_iter {
        if w.norm() < model.pole_tolerance(s) {
            break;
        }
        let dw = model.omega_prime(s)?;
        if dw.norm() < 1e-14 {
            return Err(LaplaceError::ZeroDerivative(s));
        }
        let full = -w / dw;
        // step halving keeps the iterate off the branch cut and monotone
        let mut lam = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand = s + lam * full;
            if let Ok(wc) = model.omega(cand) {
                if wc.norm() < w.norm() {
                    s = cand;
                    w = wc;
                    accepted = true;
                    break;
                }
            }
            lam *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if w.norm() >= model.pole_tolerance(s) {
        return Err(LaplaceError::NewtonDiverged { last: s, omega_abs: w.norm() });
    }
    if s.re > 1e-10 * (1.0 + s.norm()) {
        return Err(LaplaceError::RightHalfPlanePole(s));
    }
    let upper = if s.im >= 0.0 { s } else { s.conj() };
    let res = residue_at(model, exc, upper)?;
    let residual = model.omega(upper)?.norm();
    Ok((
        PoleData { pole: upper, residue: res, omega_residual: residual },
        PoleData { pole: upper.conj(), residue: res.conj(), omega_residual: residual },
    ))
}

/// `sum_k b_k lambda^{beta_k} s^{alpha_k}`, the part of the symbol the
/// reconstruction paradigms identify.
pub fn damping_symbol(model: &DampingModel, s: Complex64) -> Complex64 {
    model
        .damping_terms
        .iter()
        .enumerate()
        .map(|(k, t)| model.effective_coeff(k) * cpow(s, t.alpha))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ExcitationKind;
    use crate::special::gamma;
    use std::f64::consts::PI;

    fn trace_from(f: impl Fn(f64) -> f64, n: usize, t_end: f64) -> TimeTrace {
        let t: Vec<f64> = (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect();
        let h = t.iter().map(|&x| f(x)).collect();
        TimeTrace::from_samples(t, h)
    }

    #[test]
    fn constant_and_exponential_references() {
        let tr = trace_from(|_| 1.0, 4000, 40.0);
        let got = laplace_numeric(&tr, 1.0, None).unwrap();
        assert!((got - (1.0 - (-40.0f64).exp())).abs() < 1e-12);

        let tr = trace_from(|t| (-t).exp(), 4000, 40.0);
        let got = laplace_numeric(&tr, 1.0, None).unwrap();
        let want = (1.0 - (-80.0f64).exp()) / 2.0;
        // piecewise-linear interpolation error O(dt^2)
        assert!((got - want).abs() < 1e-5, "{got} vs {want}");
    }

    #[test]
    fn truncated_sine_reference() {
        let tr = trace_from(|t| (2.0 * t).sin() / 2.0, 4000, 40.0);
        let s = 1.0;
        let got = laplace_numeric(&tr, s, Some(4.0)).unwrap();
        // exact transform of the truncated signal
        let t_end = 40.0f64;
        let want = (2.0 / (s * s + 4.0)
            - (-s * t_end).exp() * (s * (2.0 * t_end).sin() + 2.0 * (2.0 * t_end).cos())
                / (s * s + 4.0))
            / 2.0;
        // interpolation error ~ dt^2/8 * max|h''| integrated against e^{-st}
        assert!((got - want).abs() < 5e-5, "{got} vs {want}");
    }

    #[test]
    fn rejects_bad_grids() {
        let tr = trace_from(|_| 0.0, 10, 1.0);
        assert!(matches!(laplace_numeric(&tr, 1.0, None), Err(LaplaceError::BadTraceGrid)));
        // 40 points over [0,100] cannot resolve the Lambda = 4 oscillation
        let tr = trace_from(|_| 0.0, 40, 100.0);
        assert!(matches!(
            laplace_numeric(&tr, 1.0, Some(4.0)),
            Err(LaplaceError::GridTooCoarse { .. })
        ));
        assert!(laplace_numeric(&tr, 1.0, None).is_ok());
    }

    #[test]
    fn samples_validation() {
        assert!(LaplaceSamples::new(vec![0.5, 1.0], vec![1.0, 2.0], 40.0).is_ok());
        assert!(LaplaceSamples::new(vec![-0.5, 1.0], vec![1.0, 2.0], 40.0).is_err());
        assert!(LaplaceSamples::new(vec![1.0, 1.0], vec![1.0, 2.0], 40.0).is_err());
        assert!(LaplaceSamples::new(vec![1.0], vec![1.0, 2.0], 40.0).is_err());
    }

    #[test]
    fn segment_transform_matches_quadrature_across_branches() {
        // Simpson quadrature of the integrand, on both sides of the
        // small-argument switch at |s dt| = 1e-2
        let (f0, f1, dt) = (0.7, -0.2, 1.0);
        for &s in &[
            Complex64::new(5e-4, 2e-4),
            Complex64::new(2e-2, 0.0),
            Complex64::new(1.5, -0.8),
        ] {
            let n = 2000;
            let h = dt / n as f64;
            let f = |tau: f64| (-s * tau).exp() * (f0 + (f1 - f0) * tau / dt);
            let mut q = f(0.0) + f(dt);
            for k in 1..n {
                q += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
            }
            q *= h / 3.0;
            let got = linear_segment_transform(s, dt, f0, f1);
            // the Simpson reference itself carries ~n*eps of summation noise
            assert!((got - q).norm() <= 1e-11 * q.norm(), "s = {s}");
        }
    }

    #[test]
    fn linearity() {
        let n = 64;
        let t: Vec<f64> = (0..n).map(|i| 5.0 * i as f64 / (n - 1) as f64).collect();
        let h1: Vec<f64> = t.iter().map(|&x| (1.3 * x).sin()).collect();
        let h2: Vec<f64> = t.iter().map(|&x| (-0.4 * x).exp()).collect();
        let combo: Vec<f64> = h1.iter().zip(&h2).map(|(a, b)| 2.0 * a - 0.5 * b).collect();
        let tr1 = TimeTrace::from_samples(t.clone(), h1);
        let tr2 = TimeTrace::from_samples(t.clone(), h2);
        let trc = TimeTrace::from_samples(t, combo);
        let s = 0.8;
        let lhs = laplace_numeric(&trc, s, None).unwrap();
        let rhs = 2.0 * laplace_numeric(&tr1, s, None).unwrap()
            - 0.5 * laplace_numeric(&tr2, s, None).unwrap();
        assert!((lhs - rhs).abs() <= 1e-13 * lhs.abs().max(1.0));
    }

    #[test]
    fn undamped_pole_pair() {
        let m = DampingModel::with_unit_beta(4.0, &[], &[]).unwrap();
        let exc = Excitation::unit(ExcitationKind::InitialVelocity);
        let (p, pc) = find_poles(&m, &exc, 100).unwrap();
        assert!((p.pole - Complex64::new(0.0, 2.0)).norm() < 1e-10);
        assert!((pc.pole - Complex64::new(0.0, -2.0)).norm() < 1e-10);
        // hhat = 1/(s^2 + 4): residue at 2i is 1/(4i) = -i/4
        assert!((p.residue - Complex64::new(0.0, -0.25)).norm() < 1e-12);
        // displacement data: residue d(p)/omega'(p) = p/(2p) = 1/2
        let exc0 = Excitation::unit(ExcitationKind::InitialDisplacement);
        let r0 = residue_at(&m, &exc0, p.pole).unwrap();
        assert!((r0 - Complex64::new(0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn classical_damping_pole_matches_quadratic_formula() {
        let m = DampingModel::with_unit_beta(4.0, &[1.0], &[0.4]).unwrap();
        let exc = Excitation::unit(ExcitationKind::InitialVelocity);
        let (p, _) = find_poles(&m, &exc, 100).unwrap();
        let want = Complex64::new(-0.2, 3.96f64.sqrt());
        assert!((p.pole - want).norm() < 1e-12, "{} vs {want}", p.pole);
    }

    #[test]
    fn fractional_pole_is_dissipative_and_matches_quartic_roots() {
        // alpha = 1/2, b = 0.1, Lambda = 4: on the z = s^{1/2} sheet the
        // symbol is z^4 + 0.1 z + 4
        let m = DampingModel::with_unit_beta(4.0, &[0.5], &[0.1]).unwrap();
        let exc = Excitation::unit(ExcitationKind::InitialVelocity);
        let (p, pc) = find_poles(&m, &exc, 100).unwrap();
        assert!(p.pole.re < 0.0);
        assert!(p.omega_residual < 1e-10 * (p.pole.norm_sqr() + 4.0));
        assert!((p.pole - pc.pole.conj()).norm() <= 1e-12 * p.pole.norm());
        assert!((p.residue - pc.residue.conj()).norm() <= 1e-12 * p.residue.norm());
        let z = p.pole.sqrt();
        let quartic = z.powu(4) + 0.1 * z + 4.0;
        assert!(quartic.norm() < 1e-10, "quartic residual {quartic}");
    }

    #[test]
    fn residue_matches_contour_integral() {
        // (1/2 pi i) circled integral of hhat around the pole, trapezoid rule
        let m = DampingModel::with_unit_beta(4.0, &[0.5], &[0.1]).unwrap();
        let exc = Excitation::unit(ExcitationKind::InitialVelocity);
        let (p, _) = find_poles(&m, &exc, 100).unwrap();
        let r = 0.01;
        let n = 256;
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..n {
            let th = 2.0 * PI * k as f64 / n as f64;
            let z = p.pole + Complex64::from_polar(r, th);
            let dz = Complex64::from_polar(r, th) * Complex64::new(0.0, 1.0);
            acc += crate::model::hhat_analytic(&m, &exc, z).unwrap() * dz;
        }
        let contour = acc * (2.0 * PI / n as f64) / Complex64::new(0.0, 2.0 * PI);
        assert!((contour - p.residue).norm() <= 1e-6 * p.residue.norm());
    }

    #[test]
    fn trace_minus_pole_pair_decays_like_branch_cut_tail() {
        let m = DampingModel::with_unit_beta(4.0, &[0.5], &[0.1]).unwrap();
        let exc = Excitation::unit(ExcitationKind::InitialVelocity);
        let (p, _) = find_poles(&m, &exc, 100).unwrap();
        let t = 20.0;
        let trace = crate::forward::solve_trace(&m, &exc, &[t]).unwrap();
        let osc = 2.0 * (p.residue * (p.pole * t).exp()).re;
        let alpha1 = 0.5;
        // branch-cut magnitude b1 lambda^{beta-1} t^{-alpha1} / (Gamma(1-alpha1) c^2 lambda),
        // i.e. (b1/Lambda) t^{-alpha1}/Gamma(1-alpha1) with lambda = 1
        let tail = 0.1 / 4.0 * t.powf(-alpha1) / gamma(1.0 - alpha1);
        assert!((trace.h[0] - osc).abs() < 10.0 * tail, "{} vs tail {tail}", trace.h[0] - osc);
    }
}
