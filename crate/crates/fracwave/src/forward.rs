//! Forward solver: reduces the scalar fractional equation to a first-order
//! companion system of commensurate base order and evaluates the observed
//! trace through a modal (eigenvalue) expansion.
//!
//! All differentiation orders are rationalized to multiples of `1/M`; the
//! state `y_j = D^{j/M} u` then satisfies `D^{1/M} Y = A Y + e_N g(t)` with
//! `A` in companion form, and
//!
//! ```text
//! Y(t) = E_{g,1}(t^g A) Y0
//!      + \int_0^t (t-s)^{g-1} E_{g,g}((t-s)^g A) e_N g(s) ds,   g = 1/M.
//! ```
//!
//! Because companion eigenvectors are Vandermonde columns whose first entry
//! is 1, the observation collapses to `h(t) = sum_i c_i E_{g,1}(mu_i t^g)`
//! with one complex LU solve per model.

use crate::ml::{ml_scalar, MlAccuracy, MlError};
use crate::model::{DampingModel, Excitation, ExcitationKind, SourceProfile};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

/// Hard cap on the companion dimension.
pub const MAX_DIMENSION: usize = 256;
/// Hard cap on the denominator of any rationalized order.
pub const MAX_DENOMINATOR: u64 = 64;
const RATIONAL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForwardError {
    #[error("order {0} has no rational approximation with denominator <= {MAX_DENOMINATOR} within {RATIONAL_TOL:.0e}")]
    NotCommensurate(f64),
    #[error("companion dimension {0} exceeds the cap {MAX_DIMENSION}; orders are too finely incommensurate")]
    DimensionTooLarge(usize),
    #[error("evaluation times must be finite, non-negative and increasing")]
    BadTimeGrid,
    #[error("companion matrix stayed near-defective after perturbation retries")]
    Defective,
    #[error("source excitation requires a source profile")]
    MissingSource,
    #[error(transparent)]
    Ml(#[from] MlError),
}

/// Best rational `p/q` with `q <= q_max`, by the continued-fraction
/// convergents of `x`. Errors if no convergent lands within `RATIONAL_TOL`.
pub fn rationalize(x: f64) -> Result<(u64, u64), ForwardError> {
    let mut a = x;
    let (mut p0, mut q0, mut p1, mut q1): (i64, i64, i64, i64) = (1, 0, a.floor() as i64, 1);
    for _ in 0..40 {
        if (p1 as f64 / q1 as f64 - x).abs() <= RATIONAL_TOL {
            return Ok((p1 as u64, q1 as u64));
        }
        let frac = a - a.floor();
        if frac.abs() < 1e-15 {
            break;
        }
        a = 1.0 / frac;
        let ai = a.floor() as i64;
        let (p2, q2) = (ai * p1 + p0, ai * q1 + q0);
        if q2 as u64 > MAX_DENOMINATOR {
            break;
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
    }
    if (p1 as f64 / q1 as f64 - x).abs() <= RATIONAL_TOL {
        Ok((p1 as u64, q1 as u64))
    } else {
        Err(ForwardError::NotCommensurate(x))
    }
}

fn lcm(a: u64, b: u64) -> u64 {
    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 { a } else { gcd(b, a % b) }
    }
    a / gcd(a, b) * b
}

/// The rationalized first-order companion reduction of a model.
#[derive(Debug, Clone)]
pub struct CompanionSystem {
    /// Base-order denominator; the system order is `1/m`.
    pub m: u64,
    /// State dimension `N`.
    pub n: usize,
    /// Companion matrix (superdiagonal ones, coefficients in the last row).
    pub a: DMatrix<f64>,
    /// Leading coefficient divided out of the top-order term.
    pub lead: f64,
    /// `(differentiation order, state slot)` for every coefficient placed in
    /// the last row.
    pub order_map: Vec<(f64, usize)>,
}

/// Builds the companion system for a validated model.
pub fn build_companion(model: &DampingModel) -> Result<CompanionSystem, ForwardError> {
    let mut m = 1;
    for t in &model.damping_terms {
        m = lcm(m, rationalize(t.alpha)?.1);
    }
    for t in &model.higher_terms {
        m = lcm(m, rationalize(t.gamma + 2.0)?.1);
    }
    let top_order = model.higher_terms.last().map_or(2.0, |t| t.gamma + 2.0);
    let n = (top_order * m as f64).round() as usize;
    if n > MAX_DIMENSION {
        return Err(ForwardError::DimensionTooLarge(n));
    }
    let lead = model.higher_terms.last().map_or(1.0, |t| t.coeff);

    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n - 1 {
        a[(i, i + 1)] = 1.0;
    }
    let mut order_map = Vec::new();
    let place = |a: &mut DMatrix<f64>, order: f64, coeff: f64, map: &mut Vec<(f64, usize)>| {
        let slot = (order * m as f64).round() as usize;
        a[(n - 1, slot)] -= coeff / lead;
        map.push((order, slot));
    };
    place(&mut a, 0.0, model.big_lambda, &mut order_map);
    for (k, t) in model.damping_terms.iter().enumerate() {
        place(&mut a, t.alpha, model.effective_coeff(k), &mut order_map);
    }
    let higher = model.higher_terms.len();
    if higher > 0 {
        // the bare u'' term joins the last row only when it is not the leader
        place(&mut a, 2.0, 1.0, &mut order_map);
        for t in &model.higher_terms[..higher - 1] {
            place(&mut a, t.gamma + 2.0, t.coeff, &mut order_map);
        }
    }
    Ok(CompanionSystem { m, n, a, lead, order_map })
}

impl CompanionSystem {
    /// Base order `1/m`.
    pub fn base_order(&self) -> f64 {
        1.0 / self.m as f64
    }

    /// Initial state: integer-order derivatives of `u` at slots `j*m`,
    /// zeros everywhere else.
    pub fn initial_state(&self, exc: &Excitation) -> DVector<f64> {
        let mut y0 = DVector::zeros(self.n);
        let m = self.m as usize;
        match exc.kind {
            ExcitationKind::InitialDisplacement => y0[0] = exc.mode_coefficient,
            ExcitationKind::InitialVelocity => y0[m] = exc.mode_coefficient,
            ExcitationKind::InitialAcceleration => y0[2 * m] = exc.mode_coefficient,
            ExcitationKind::Source => {}
        }
        y0
    }

    /// Characteristic polynomial `z^N - sum_j r_j z^j` of the companion
    /// matrix and its derivative, by Horner evaluation.
    pub fn char_poly(&self, z: Complex64) -> (Complex64, Complex64) {
        let n = self.n;
        let mut p = Complex64::new(1.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for j in (0..n).rev() {
            dp = dp * z + p;
            p = p * z - self.a[(n - 1, j)];
        }
        (p, dp)
    }
}

/// Observed trace with solver metadata.
#[derive(Debug, Clone)]
pub struct TimeTrace {
    pub t: Vec<f64>,
    pub h: Vec<f64>,
    pub meta: SolveMeta,
}

impl TimeTrace {
    /// Wraps externally produced samples (measurements, references) so they
    /// can flow through the transform and reconstruction pipeline.
    pub fn from_samples(t: Vec<f64>, h: Vec<f64>) -> Self {
        TimeTrace {
            t,
            h,
            meta: SolveMeta {
                base_order: 0.0,
                dimension: 0,
                eigenvalues: Vec::new(),
                imag_residual: 0.0,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveMeta {
    pub base_order: f64,
    pub dimension: usize,
    pub eigenvalues: Vec<Complex64>,
    /// Relative size of the discarded imaginary part, worst over the grid.
    pub imag_residual: f64,
}

struct ModalSolution {
    gamma: f64,
    eigs: Vec<Complex64>,
    /// `Bphi * (V^-1 Y0)_i` for the homogeneous part.
    coeffs: Vec<Complex64>,
    /// `Bphi * g / lead * (V^-1 e_N)_i` for a constant source.
    source_weights: Option<Vec<Complex64>>,
    table: Option<Vec<(f64, f64)>>,
    acc: MlAccuracy,
}

impl ModalSolution {
    fn eval(&self, t: f64) -> Result<Complex64, MlError> {
        let tg = t.powf(self.gamma);
        let mut h = Complex64::new(0.0, 0.0);
        for (mu, c) in self.eigs.iter().zip(&self.coeffs) {
            if c.norm() == 0.0 {
                continue;
            }
            h += c * ml_scalar(self.gamma, 1.0, mu * tg, &self.acc)?;
        }
        if let Some(w) = &self.source_weights {
            match &self.table {
                None => {
                    // \int_0^t s^{g-1} E_{g,g}(mu s^g) ds = t^g E_{g,g+1}(mu t^g)
                    for (mu, wi) in self.eigs.iter().zip(w) {
                        h += wi * tg * ml_scalar(self.gamma, self.gamma + 1.0, mu * tg, &self.acc)?;
                    }
                }
                Some(tbl) => {
                    h += self.table_convolution(t, w, tbl)?;
                }
            }
        }
        Ok(h)
    }

    /// Product integration of the source convolution against the
    /// piecewise-linear interpolant of the table, using the closed-form
    /// fractional moments
    /// `\int_0^U u^{g-1} E_{g,g}(mu u^g) du = U^g E_{g,g+1}(mu U^g)` and
    /// `\int_0^U u^g E_{g,g}(mu u^g) du = U^{g+1} (E_{g,g+1} - E_{g,g+2})(mu U^g)`.
    fn table_convolution(
        &self,
        t: f64,
        w: &[Complex64],
        tbl: &[(f64, f64)],
    ) -> Result<Complex64, MlError> {
        let g = self.gamma;
        let mut total = Complex64::new(0.0, 0.0);
        for (mu, wi) in self.eigs.iter().zip(w) {
            let f1 = |u: f64| -> Result<Complex64, MlError> {
                if u <= 0.0 {
                    return Ok(Complex64::new(0.0, 0.0));
                }
                let ug = u.powf(g);
                Ok(ug * ml_scalar(g, g + 1.0, mu * ug, &self.acc)?)
            };
            let f2 = |u: f64| -> Result<Complex64, MlError> {
                if u <= 0.0 {
                    return Ok(Complex64::new(0.0, 0.0));
                }
                let ug = u.powf(g);
                Ok(u.powf(g + 1.0)
                    * (ml_scalar(g, g + 1.0, mu * ug, &self.acc)?
                        - ml_scalar(g, g + 2.0, mu * ug, &self.acc)?))
            };
            let mut acc = Complex64::new(0.0, 0.0);
            for seg in tbl.windows(2) {
                let (t0, s0) = seg[0];
                let (t1, s1) = seg[1];
                if t0 >= t {
                    break;
                }
                let t1c = t1.min(t);
                if t1c <= t0 {
                    continue;
                }
                // sigma(tau) = a + b tau on the segment; substitute u = t - tau
                let b = (s1 - s0) / (t1 - t0);
                let a = s0 - b * t0;
                let (u_hi, u_lo) = (t - t0, t - t1c);
                let m1 = f1(u_hi)? - f1(u_lo)?;
                let m2 = f2(u_hi)? - f2(u_lo)?;
                acc += (a + b * t) * m1 - b * m2;
            }
            total += wi * acc;
        }
        Ok(total)
    }
}

fn modal_decomposition(
    model: &DampingModel,
    exc: &Excitation,
    acc: &MlAccuracy,
) -> Result<(CompanionSystem, ModalSolution), ForwardError> {
    // near-defective spectra are broken up by nudging the stiffness
    for attempt in 0..4 {
        let mut m = model.clone();
        m.big_lambda *= 1.0 + attempt as f64 * 1e-7;
        let sys = build_companion(&m)?;
        match modal_from_system(&sys, exc, acc) {
            Ok(sol) => return Ok((sys, sol)),
            Err(ForwardError::Defective) if attempt < 3 => continue,
            Err(e) => return Err(e),
        }
    }
    Err(ForwardError::Defective)
}

fn modal_from_system(
    sys: &CompanionSystem,
    exc: &Excitation,
    acc: &MlAccuracy,
) -> Result<ModalSolution, ForwardError> {
    let n = sys.n;
    let mut eigs: Vec<Complex64> = sys.a.clone().complex_eigenvalues().iter().copied().collect();
    // polish each eigenvalue on the characteristic polynomial
    for z in &mut eigs {
        let mut zi = *z;
        for _ in 0..8 {
            let (p, dp) = sys.char_poly(zi);
            if dp.norm() < 1e-300 {
                break;
            }
            let step = p / dp;
            zi -= step;
            if step.norm() <= 1e-15 * (1.0 + zi.norm()) {
                break;
            }
        }
        if sys.char_poly(zi).0.norm() <= sys.char_poly(*z).0.norm() {
            *z = zi;
        }
    }

    // Vandermonde eigenvector basis: column i is (1, mu_i, ..., mu_i^{N-1})
    let v = DMatrix::<Complex64>::from_fn(n, n, |r, c| eigs[c].powu(r as u32));
    let lu = v.clone().lu();
    let v_inv = match lu.try_inverse() {
        Some(inv) => inv,
        None => return Err(ForwardError::Defective),
    };
    let cond = one_norm(&v) * one_norm(&v_inv);
    if !cond.is_finite() || cond > 1e12 {
        return Err(ForwardError::Defective);
    }

    let y0 = sys.initial_state(exc).map(|x| Complex64::new(x, 0.0));
    let coeffs: Vec<Complex64> =
        (&v_inv * y0).iter().map(|c| c * exc.observation_weight).collect();

    let (source_weights, table) = if exc.kind == ExcitationKind::Source {
        let scale = exc.weight() / sys.lead;
        let mut en = DVector::<Complex64>::zeros(n);
        en[n - 1] = Complex64::new(scale, 0.0);
        let w: Vec<Complex64> = (&v_inv * en).iter().copied().collect();
        match &exc.sigma {
            SourceProfile::Constant => (Some(w), None),
            SourceProfile::Table(tbl) => (Some(w), Some(tbl.clone())),
            SourceProfile::None => return Err(ForwardError::MissingSource),
        }
    } else {
        (None, None)
    };

    Ok(ModalSolution {
        gamma: sys.base_order(),
        eigs,
        coeffs,
        source_weights,
        table,
        acc: *acc,
    })
}

fn one_norm(m: &DMatrix<Complex64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|c| c.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves the forward problem on the given time grid.
pub fn solve_trace(
    model: &DampingModel,
    exc: &Excitation,
    times: &[f64],
) -> Result<TimeTrace, ForwardError> {
    solve_trace_with(model, exc, times, &MlAccuracy::default())
}

/// As [`solve_trace`] with explicit special-function accuracy knobs.
pub fn solve_trace_with(
    model: &DampingModel,
    exc: &Excitation,
    times: &[f64],
    acc: &MlAccuracy,
) -> Result<TimeTrace, ForwardError> {
    if times.is_empty()
        || times.iter().any(|t| !t.is_finite() || *t < 0.0)
        || times.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(ForwardError::BadTimeGrid);
    }
    let (sys, sol) = modal_decomposition(model, exc, acc)?;
    let values: Result<Vec<Complex64>, MlError> =
        times.par_iter().map(|&t| sol.eval(t)).collect();
    let values = values?;
    let scale = values.iter().map(|c| c.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let imag_residual = values.iter().map(|c| c.im.abs()).fold(0.0, f64::max) / scale;
    Ok(TimeTrace {
        t: times.to_vec(),
        h: values.iter().map(|c| c.re).collect(),
        meta: SolveMeta {
            base_order: sys.base_order(),
            dimension: sys.n,
            eigenvalues: sol.eigs.clone(),
            imag_residual,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform(n: usize, t_end: f64) -> Vec<f64> {
        (0..n).map(|i| t_end * (i + 1) as f64 / n as f64).collect()
    }

    #[test]
    fn rationalize_basics() {
        assert_eq!(rationalize(0.25).unwrap(), (1, 4));
        assert_eq!(rationalize(1.0 / 3.0).unwrap(), (1, 3));
        assert_eq!(rationalize(0.75).unwrap(), (3, 4));
        assert_eq!(rationalize(1.0).unwrap(), (1, 1));
        assert!(rationalize(1.0 / 97.0).is_err());
    }

    #[test]
    fn companion_dimensions() {
        let m = DampingModel::with_unit_beta(4.0, &[0.25, 0.5, 0.75], &[0.2, 0.25, 0.1]).unwrap();
        let sys = build_companion(&m).unwrap();
        assert_eq!((sys.m, sys.n), (4, 8));

        let m = DampingModel::with_unit_beta(4.0, &[0.25, 1.0 / 3.0, 2.0 / 3.0], &[0.1; 3]).unwrap();
        let sys = build_companion(&m).unwrap();
        assert_eq!((sys.m, sys.n), (12, 24));

        let m = DampingModel::with_unit_beta(4.0, &[], &[]).unwrap();
        let sys = build_companion(&m).unwrap();
        assert_eq!((sys.m, sys.n), (1, 2));
        assert_eq!(sys.a, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -4.0, 0.0]));
    }

    #[test]
    fn companion_last_row_single_term() {
        let m = DampingModel::with_unit_beta(4.0, &[0.5], &[0.1]).unwrap();
        let sys = build_companion(&m).unwrap();
        assert_eq!((sys.m, sys.n), (2, 4));
        let last: Vec<f64> = (0..4).map(|j| sys.a[(3, j)]).collect();
        assert_eq!(last, vec![-4.0, -0.1, 0.0, 0.0]);
        for i in 0..3 {
            assert_eq!(sys.a[(i, i + 1)], 1.0);
        }
    }

    #[test]
    fn eigenvalues_solve_symbol_after_unfolding() {
        // z is an eigenvalue of A iff omega(z^{?}) = 0 where z plays the role
        // of s^{1/m}; check omega at z treating the state order directly
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let alphas = [
                (rng.gen_range(1..=3) as f64) / 4.0,
                1.0,
            ];
            let bs = [rng.gen_range(0.01..0.5), rng.gen_range(0.01..0.5)];
            let m = DampingModel::with_unit_beta(rng.gen_range(1.0..9.0), &alphas, &bs).unwrap();
            let sys = build_companion(&m).unwrap();
            let eigs = sys.a.clone().complex_eigenvalues();
            for z in eigs.iter() {
                // s = z^m on the sheet picked by the companion unfolding;
                // only roots with |arg z| <= pi/m land on the principal sheet
                if z.arg().abs() > std::f64::consts::PI / sys.m as f64 {
                    continue;
                }
                let s = z.powu(sys.m as u32);
                let w = m.omega(s).unwrap();
                assert!(
                    w.norm() <= 1e-8 * (s.norm_sqr() + m.big_lambda),
                    "omega({s}) = {w} for eigenvalue {z}"
                );
            }
        }
    }

    #[test]
    fn undamped_is_a_sine() {
        let m = DampingModel::with_unit_beta(4.0, &[], &[]).unwrap();
        let exc = Excitation::unit(ExcitationKind::InitialVelocity);
        let t = uniform(80, 8.0);
        let trace = solve_trace(&m, &exc, &t).unwrap();
        for (ti, hi) in trace.t.iter().zip(&trace.h) {
            assert_relative_eq!(*hi, (2.0 * ti).sin() / 2.0, epsilon = 1e-9);
        }
        assert!(trace.meta.imag_residual < 1e-9);
    }

    #[test]
    fn classically_damped_oscillator_closed_form() {
        // u'' + 0.4 u' + 4 u = 0, u(0)=0, u'(0)=1
        let m = DampingModel::with_unit_beta(4.0, &[1.0], &[0.4]).unwrap();
        let exc = Excitation::unit(ExcitationKind::InitialVelocity);
        let t = uniform(60, 12.0);
        let trace = solve_trace(&m, &exc, &t).unwrap();
        let wd = 3.96f64.sqrt();
        for (ti, hi) in trace.t.iter().zip(&trace.h) {
            let want = (-0.2 * ti).exp() * (wd * ti).sin() / wd;
            assert!((hi - want).abs() <= 1e-8, "t={ti}: {hi} vs {want}");
        }
    }

    #[test]
    fn displacement_start_is_attained() {
        let m = DampingModel::with_unit_beta(4.0, &[0.5], &[0.2]).unwrap();
        let exc = Excitation::unit(ExcitationKind::InitialDisplacement);
        let t: Vec<f64> = (1..=6).map(|k| 10f64.powi(-(k as i32))).rev().collect();
        let trace = solve_trace(&m, &exc, &t).unwrap();
        // h(t) -> mode_coefficient * observation_weight as t -> 0+
        assert!((trace.h[0] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn constant_source_matches_step_response() {
        // undamped with unit step source: u = (1 - cos(2t))/4
        let m = DampingModel::with_unit_beta(4.0, &[], &[]).unwrap();
        let exc = Excitation::unit(ExcitationKind::Source);
        let t = uniform(40, 6.0);
        let trace = solve_trace(&m, &exc, &t).unwrap();
        for (ti, hi) in trace.t.iter().zip(&trace.h) {
            let want = (1.0 - (2.0 * ti).cos()) / 4.0;
            assert!((hi - want).abs() <= 1e-8, "t={ti}: {hi} vs {want}");
        }
    }

    #[test]
    fn table_source_matches_constant_source() {
        let m = DampingModel::with_unit_beta(4.0, &[0.5], &[0.2]).unwrap();
        let mut exc = Excitation::unit(ExcitationKind::Source);
        let t = uniform(25, 4.0);
        let constant = solve_trace(&m, &exc, &t).unwrap();
        exc.sigma = SourceProfile::Table(vec![(0.0, 1.0), (10.0, 1.0)]);
        let tabled = solve_trace(&m, &exc, &t).unwrap();
        for (a, b) in constant.h.iter().zip(&tabled.h) {
            assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn damped_traces_stay_bounded() {
        let m = DampingModel::with_unit_beta(4.0, &[0.25, 0.5, 0.75], &[0.2, 0.25, 0.1]).unwrap();
        let exc = Excitation::unit(ExcitationKind::InitialVelocity);
        let short = solve_trace(&m, &exc, &uniform(200, 100.0)).unwrap();
        let long = solve_trace(&m, &exc, &uniform(400, 1000.0)).unwrap();
        let sup_short = short.h.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let sup_long = long.h.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        assert!(sup_long <= sup_short * (1.0 + 1e-9));
        // and the tail really decays
        assert!(long.h.last().unwrap().abs() < 1e-2 * sup_short);
    }

    #[test]
    fn higher_order_term_in_leader_position() {
        let m = DampingModel {
            big_lambda: 4.0,
            eigenvalue: None,
            damping_terms: vec![crate::model::DampingTerm { alpha: 0.5, beta: 1.0, coeff: 0.2 }],
            higher_terms: vec![crate::model::HigherTerm { gamma: 0.5, coeff: 0.1 }],
        }
        .validated()
        .unwrap();
        let sys = build_companion(&m).unwrap();
        assert_eq!((sys.m, sys.n), (2, 5));
        assert_eq!(sys.lead, 0.1);
        let last: Vec<f64> = (0..5).map(|j| sys.a[(4, j)]).collect();
        // -Lambda/d, -b/d at slot 1, -1/d at slot 4 (the u'' term)
        assert_relative_eq!(last[0], -40.0, max_relative = 1e-14);
        assert_relative_eq!(last[1], -2.0, max_relative = 1e-14);
        assert_eq!(last[2], 0.0);
        assert_eq!(last[3], 0.0);
        assert_relative_eq!(last[4], -10.0, max_relative = 1e-14);
    }

    #[test]
    fn bad_time_grids_rejected() {
        let m = DampingModel::with_unit_beta(4.0, &[], &[]).unwrap();
        let exc = Excitation::unit(ExcitationKind::InitialVelocity);
        assert!(matches!(solve_trace(&m, &exc, &[]), Err(ForwardError::BadTimeGrid)));
        assert!(matches!(solve_trace(&m, &exc, &[1.0, 0.5]), Err(ForwardError::BadTimeGrid)));
        assert!(matches!(solve_trace(&m, &exc, &[-1.0, 0.5]), Err(ForwardError::BadTimeGrid)));
    }
}
