//! The damping model and its Laplace-domain symbol.
//!
//! A `DampingModel` describes the scalar single-mode equation
//!
//! ```text
//! u'' + Lambda u + sum_j d_j D^{2+gamma_j} u + sum_k b_k lambda^{beta_k} D^{alpha_k} u = f
//! ```
//!
//! with `Lambda = c^2 lambda` stored as the primitive composite quantity.
//! All three reconstruction paradigms identify only this composite, so `c`
//! and `lambda` never appear separately except through the optional
//! `eigenvalue` field needed when some `beta_k != 1`.

use num_complex::Complex64;
use thiserror::Error;

/// One fractional damping term `b_k lambda^{beta_k} D^{alpha_k}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampingTerm {
    /// Differentiation order, in (0, 1].
    pub alpha: f64,
    /// Fractional power of the elliptic operator, in (1/2, 1].
    pub beta: f64,
    /// Non-negative coefficient `b_k`.
    pub coeff: f64,
}

/// One higher-order term `d_j D^{2+gamma_j}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HigherTerm {
    /// Fractional excess over second order, in (0, 1].
    pub gamma: f64,
    /// Non-negative coefficient `d_j`.
    pub coeff: f64,
}

/// Validated single-mode damping model.
#[derive(Debug, Clone, PartialEq)]
pub struct DampingModel {
    /// Composite `Lambda = c^2 lambda`, strictly positive.
    pub big_lambda: f64,
    /// Eigenvalue `lambda`; required only when some `beta_k != 1`.
    pub eigenvalue: Option<f64>,
    /// Damping terms with strictly increasing `alpha`.
    pub damping_terms: Vec<DampingTerm>,
    /// Higher-order terms with strictly increasing `gamma`.
    pub higher_terms: Vec<HigherTerm>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("duplicate differentiation order {0}")]
    DuplicateOrder(f64),
    #[error("differentiation orders must be strictly increasing")]
    NonMonotoneOrders,
    #[error("stability violated: gamma_J = {gamma} exceeds alpha_N = {alpha}")]
    StabilityViolation { gamma: f64, alpha: f64 },
    #[error("Lambda must be strictly positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("negative coefficient {0}")]
    NegativeCoefficient(f64),
    #[error("beta_k != 1 requires the eigenvalue field")]
    MissingEigenvalue,
    #[error("order {0} outside its admissible interval")]
    OrderOutOfRange(f64),
}

/// Errors from evaluating the symbol or the transfer function.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("s = {0} lies on the branch cut (negative real axis); perturb by +/- i*eps")]
    BranchCut(Complex64),
    #[error("|omega(s)| = {omega_abs} below pole tolerance at s = {s}")]
    PoleHit { s: Complex64, omega_abs: f64 },
    #[error("source profile has no Laplace transform representation")]
    UnsupportedSigma,
}

impl DampingModel {
    /// Convenience constructor for the common `beta = 1` case.
    pub fn with_unit_beta(big_lambda: f64, alphas: &[f64], bs: &[f64]) -> Result<Self, ModelError> {
        assert_eq!(alphas.len(), bs.len());
        DampingModel {
            big_lambda,
            eigenvalue: None,
            damping_terms: alphas
                .iter()
                .zip(bs)
                .map(|(&alpha, &coeff)| DampingTerm { alpha, beta: 1.0, coeff })
                .collect(),
            higher_terms: Vec::new(),
        }
        .validated()
    }

    /// Checks every type invariant and returns the model unchanged iff they hold.
    pub fn validated(self) -> Result<Self, ModelError> {
        if self.big_lambda <= 0.0 || !self.big_lambda.is_finite() {
            return Err(ModelError::NonPositiveLambda(self.big_lambda));
        }
        check_orders(self.damping_terms.iter().map(|t| t.alpha))?;
        check_orders(self.higher_terms.iter().map(|t| t.gamma))?;
        for t in &self.damping_terms {
            if t.alpha <= 0.0 || t.alpha > 1.0 {
                return Err(ModelError::OrderOutOfRange(t.alpha));
            }
            if t.beta <= 0.5 || t.beta > 1.0 {
                return Err(ModelError::OrderOutOfRange(t.beta));
            }
            if t.coeff < 0.0 {
                return Err(ModelError::NegativeCoefficient(t.coeff));
            }
            if t.beta != 1.0 && self.eigenvalue.is_none() {
                return Err(ModelError::MissingEigenvalue);
            }
        }
        for t in &self.higher_terms {
            if t.gamma <= 0.0 || t.gamma > 1.0 {
                return Err(ModelError::OrderOutOfRange(t.gamma));
            }
            if t.coeff < 0.0 {
                return Err(ModelError::NegativeCoefficient(t.coeff));
            }
        }
        // thermodynamic consistency: gamma_J <= alpha_N
        if let (Some(h), Some(d)) = (self.higher_terms.last(), self.damping_terms.last()) {
            if h.gamma > d.alpha {
                return Err(ModelError::StabilityViolation { gamma: h.gamma, alpha: d.alpha });
            }
        } else if !self.higher_terms.is_empty() && self.damping_terms.is_empty() {
            return Err(ModelError::StabilityViolation {
                gamma: self.higher_terms.last().unwrap().gamma,
                alpha: 0.0,
            });
        }
        if let Some(l) = self.eigenvalue {
            if l <= 0.0 {
                return Err(ModelError::NonPositiveLambda(l));
            }
        }
        Ok(self)
    }

    /// Effective damping coefficient `b_k lambda^{beta_k}`.
    pub fn effective_coeff(&self, k: usize) -> f64 {
        let t = &self.damping_terms[k];
        if t.beta == 1.0 {
            // lambda^1 cancels against Lambda = c^2 lambda only in reconstruction
            // conventions; here lambda defaults to 1 when absent.
            t.coeff * self.eigenvalue.unwrap_or(1.0)
        } else {
            t.coeff * self.eigenvalue.expect("validated model has eigenvalue").powf(t.beta)
        }
    }

    fn has_fractional_order(&self) -> bool {
        self.damping_terms.iter().any(|t| t.alpha.fract() != 0.0)
            || self.higher_terms.iter().any(|t| t.gamma.fract() != 0.0)
    }

    /// The Laplace-domain symbol
    /// `omega(s) = s^2 + Lambda + sum_j d_j s^{gamma_j + 2} + sum_k b_k lambda^{beta_k} s^{alpha_k}`
    /// on the principal branch.
    pub fn omega(&self, s: Complex64) -> Result<Complex64, EvalError> {
        if s.im == 0.0 && s.re < 0.0 && self.has_fractional_order() {
            return Err(EvalError::BranchCut(s));
        }
        let mut w = s * s + self.big_lambda;
        for t in &self.higher_terms {
            w += t.coeff * cpow(s, t.gamma + 2.0);
        }
        for (k, t) in self.damping_terms.iter().enumerate() {
            w += self.effective_coeff(k) * cpow(s, t.alpha);
        }
        Ok(w)
    }

    /// `omega'(s)` by the term-by-term power rule.
    pub fn omega_prime(&self, s: Complex64) -> Result<Complex64, EvalError> {
        if s.im == 0.0 && s.re < 0.0 && self.has_fractional_order() {
            return Err(EvalError::BranchCut(s));
        }
        let mut w = 2.0 * s;
        for t in &self.higher_terms {
            let p = t.gamma + 2.0;
            w += t.coeff * p * cpow(s, p - 1.0);
        }
        for (k, t) in self.damping_terms.iter().enumerate() {
            w += self.effective_coeff(k) * t.alpha * cpow(s, t.alpha - 1.0);
        }
        Ok(w)
    }

    /// Tolerance below which `omega(s)` counts as a pole hit.
    pub fn pole_tolerance(&self, s: Complex64) -> f64 {
        1e-12 * (s.norm_sqr() + self.big_lambda)
    }
}

fn check_orders(orders: impl Iterator<Item = f64>) -> Result<(), ModelError> {
    let mut prev: Option<f64> = None;
    for o in orders {
        if let Some(p) = prev {
            if o == p {
                return Err(ModelError::DuplicateOrder(o));
            }
            if o < p {
                return Err(ModelError::NonMonotoneOrders);
            }
        }
        prev = Some(o);
    }
    Ok(())
}

/// Principal-branch complex power with exact results for small integer exponents.
pub(crate) fn cpow(s: Complex64, p: f64) -> Complex64 {
    if p == 0.0 {
        Complex64::new(1.0, 0.0)
    } else if p == 1.0 {
        s
    } else if p == 2.0 {
        s * s
    } else if s == Complex64::new(0.0, 0.0) {
        if p > 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(f64::INFINITY, 0.0)
        }
    } else {
        s.powf(p)
    }
}

/// Which driving is active for an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExcitationKind {
    /// `u(0) = u0`, everything else zero.
    InitialDisplacement,
    /// `u'(0) = u1`, everything else zero.
    InitialVelocity,
    /// `u''(0) = u2`; only admissible when the model has higher-order terms.
    InitialAcceleration,
    /// Separable source `sigma(t) f`.
    Source,
}

/// Temporal source profile for `ExcitationKind::Source`.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceProfile {
    None,
    Constant,
    /// Sampled `(t, sigma(t))` table, interpolated piecewise linearly.
    Table(Vec<(f64, f64)>),
}

/// Scalar single-mode excitation and observation data.
#[derive(Debug, Clone, PartialEq)]
pub struct Excitation {
    pub kind: ExcitationKind,
    /// Projection of the driving datum onto the excited eigenfunction.
    pub mode_coefficient: f64,
    /// The scalar observation weight `B phi`.
    pub observation_weight: f64,
    pub sigma: SourceProfile,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExcitationError {
    #[error("mode coefficient must be nonzero")]
    ZeroModeCoefficient,
    #[error("observation weight must be nonzero")]
    ZeroObservationWeight,
    #[error("initial-acceleration excitation requires a model with higher-order terms")]
    AccelerationWithoutHigherTerms,
}

impl Excitation {
    pub fn new(kind: ExcitationKind, mode_coefficient: f64, observation_weight: f64) -> Self {
        let sigma = match kind {
            ExcitationKind::Source => SourceProfile::Constant,
            _ => SourceProfile::None,
        };
        Excitation { kind, mode_coefficient, observation_weight, sigma }
    }

    /// Unit-weight excitation, the configuration of all the reference runs.
    pub fn unit(kind: ExcitationKind) -> Self {
        Excitation::new(kind, 1.0, 1.0)
    }

    pub fn validate(&self, model: &DampingModel) -> Result<(), ExcitationError> {
        if self.mode_coefficient == 0.0 {
            return Err(ExcitationError::ZeroModeCoefficient);
        }
        if self.observation_weight == 0.0 {
            return Err(ExcitationError::ZeroObservationWeight);
        }
        if self.kind == ExcitationKind::InitialAcceleration && model.higher_terms.is_empty() {
            return Err(ExcitationError::AccelerationWithoutHigherTerms);
        }
        Ok(())
    }

    /// Combined scalar weight multiplying every observation.
    pub fn weight(&self) -> f64 {
        self.mode_coefficient * self.observation_weight
    }
}

/// Laplace transform of the source profile.
pub fn sigma_hat(sigma: &SourceProfile, s: Complex64) -> Result<Complex64, EvalError> {
    match sigma {
        SourceProfile::None => Err(EvalError::UnsupportedSigma),
        SourceProfile::Constant => Ok(Complex64::new(1.0, 0.0) / s),
        SourceProfile::Table(samples) => {
            // exact transform of the piecewise-linear interpolant
            let mut acc = Complex64::new(0.0, 0.0);
            for w in samples.windows(2) {
                let (t0, f0) = w[0];
                let (t1, f1) = w[1];
                let dt = t1 - t0;
                if dt <= 0.0 {
                    continue;
                }
                acc += (-s * t0).exp() * crate::laplace::linear_segment_transform(s, dt, f0, f1);
            }
            Ok(acc)
        }
    }
}

/// The case-split numerator of the transfer function `hhat = numerator / omega`.
pub fn transfer_numerator(
    model: &DampingModel,
    exc: &Excitation,
    s: Complex64,
) -> Result<Complex64, EvalError> {
    let num = match exc.kind {
        ExcitationKind::InitialVelocity => {
            let mut n = Complex64::new(1.0, 0.0);
            for t in &model.higher_terms {
                n += t.coeff * cpow(s, t.gamma);
            }
            n
        }
        ExcitationKind::InitialDisplacement => {
            let mut n = s;
            for t in &model.higher_terms {
                n += t.coeff * cpow(s, t.gamma + 1.0);
            }
            for (k, t) in model.damping_terms.iter().enumerate() {
                n += model.effective_coeff(k) * cpow(s, t.alpha - 1.0);
            }
            n
        }
        ExcitationKind::InitialAcceleration => {
            let mut n = Complex64::new(0.0, 0.0);
            for t in &model.higher_terms {
                n += t.coeff * cpow(s, t.gamma - 1.0);
            }
            n
        }
        ExcitationKind::Source => sigma_hat(&exc.sigma, s)?,
    };
    Ok(num)
}

/// Exact Laplace-domain observation `hhat(s)` for the given excitation.
pub fn hhat_analytic(
    model: &DampingModel,
    exc: &Excitation,
    s: Complex64,
) -> Result<Complex64, EvalError> {
    let w = model.omega(s)?;
    if w.norm() < model.pole_tolerance(s) {
        return Err(EvalError::PoleHit { s, omega_abs: w.norm() });
    }
    Ok(transfer_numerator(model, exc, s)? * exc.weight() / w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn undamped(big_lambda: f64) -> DampingModel {
        DampingModel::with_unit_beta(big_lambda, &[], &[]).unwrap()
    }

    #[test]
    fn table1_model_is_valid() {
        let m = DampingModel::with_unit_beta(4.0, &[0.25, 0.5, 0.75], &[0.2, 0.25, 0.1]);
        assert!(m.is_ok());
    }

    #[test]
    fn small_s_decay_exponent_reveals_leading_order() {
        // as s -> 0 the transform of a one-term model behaves like
        // (b/Lambda) s^{alpha-1}; with b = Lambda the prefactor is 1 and the
        // log-log slope at s = 1e-4 pins down 1 - alpha
        let (alpha, lam) = (0.5, 4.0);
        let m = DampingModel::with_unit_beta(lam, &[alpha], &[lam]).unwrap();
        let exc = Excitation::unit(ExcitationKind::InitialDisplacement);
        let s = Complex64::new(1e-4, 0.0);
        let hhat = hhat_analytic(&m, &exc, s).unwrap();
        let slope = -hhat.norm().ln() / s.re.ln();
        assert!((slope - (1.0 - alpha)).abs() < 0.01, "slope = {slope}");
    }

    #[test]
    fn duplicate_order_rejected() {
        let err = DampingModel::with_unit_beta(4.0, &[0.5, 0.5], &[0.1, 0.1]).unwrap_err();
        assert_eq!(err, ModelError::DuplicateOrder(0.5));
    }

    #[test]
    fn stability_violation_rejected() {
        let m = DampingModel {
            big_lambda: 4.0,
            eigenvalue: None,
            damping_terms: vec![DampingTerm { alpha: 0.5, beta: 1.0, coeff: 0.1 }],
            higher_terms: vec![HigherTerm { gamma: 0.8, coeff: 0.1 }],
        };
        assert!(matches!(m.validated(), Err(ModelError::StabilityViolation { .. })));
    }

    #[test]
    fn missing_eigenvalue_rejected() {
        let m = DampingModel {
            big_lambda: 4.0,
            eigenvalue: None,
            damping_terms: vec![DampingTerm { alpha: 0.5, beta: 0.8, coeff: 0.1 }],
            higher_terms: vec![],
        };
        assert_eq!(m.validated().unwrap_err(), ModelError::MissingEigenvalue);
    }

    #[test]
    fn nonpositive_lambda_rejected() {
        assert!(matches!(
            DampingModel::with_unit_beta(0.0, &[], &[]),
            Err(ModelError::NonPositiveLambda(_))
        ));
        assert!(matches!(
            DampingModel::with_unit_beta(4.0, &[0.5], &[-0.1]),
            Err(ModelError::NegativeCoefficient(_))
        ));
    }

    #[test]
    fn omega_trivial_values() {
        let m = undamped(4.0);
        let w = m.omega(Complex64::new(0.0, 2.0)).unwrap();
        assert!(w.norm() < 1e-14);

        let m = DampingModel::with_unit_beta(4.0, &[0.5], &[0.1]).unwrap();
        let w = m.omega(Complex64::new(1.0, 0.0)).unwrap();
        assert_relative_eq!(w.re, 5.1, max_relative = 1e-14);
        assert_eq!(w.im, 0.0);

        let w0 = m.omega(Complex64::new(0.0, 0.0)).unwrap();
        assert_relative_eq!(w0.re, 4.0, max_relative = 1e-14);
    }

    #[test]
    fn omega_branch_cut_errors() {
        let m = DampingModel::with_unit_beta(4.0, &[0.5], &[0.1]).unwrap();
        assert!(matches!(
            m.omega(Complex64::new(-1.0, 0.0)),
            Err(EvalError::BranchCut(_))
        ));
        // integer-order models have no cut
        let m = undamped(4.0);
        assert!(m.omega(Complex64::new(-1.0, 0.0)).is_ok());
    }

    #[test]
    fn hhat_trivial_values() {
        let m = undamped(4.0);
        let s = Complex64::new(1.0, 0.0);
        let h = hhat_analytic(&m, &Excitation::unit(ExcitationKind::InitialVelocity), s).unwrap();
        assert_relative_eq!(h.re, 0.2, max_relative = 1e-14);
        let h = hhat_analytic(&m, &Excitation::unit(ExcitationKind::InitialDisplacement), s).unwrap();
        assert_relative_eq!(h.re, 0.2, max_relative = 1e-14);
    }

    #[test]
    fn acceleration_requires_higher_terms() {
        let m = undamped(4.0);
        let exc = Excitation::unit(ExcitationKind::InitialAcceleration);
        assert!(exc.validate(&m).is_err());
    }

    #[test]
    fn conjugate_symmetry() {
        let m = DampingModel::with_unit_beta(4.0, &[0.25, 0.5, 0.75], &[0.2, 0.25, 0.1]).unwrap();
        let exc = Excitation::unit(ExcitationKind::InitialVelocity);
        for &(re, im) in &[(0.3, 1.7), (2.0, -5.0), (0.01, 100.0)] {
            let s = Complex64::new(re, im);
            let h = hhat_analytic(&m, &exc, s).unwrap();
            let hc = hhat_analytic(&m, &exc, s.conj()).unwrap();
            assert_relative_eq!(h.re, hc.re, max_relative = 1e-13);
            assert_relative_eq!(h.im, -hc.im, max_relative = 1e-13);
        }
    }

    #[test]
    fn u0_numerator_identity() {
        // s * hhat * omega == weight * (omega - Lambda) for displacement data
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let m = DampingModel::with_unit_beta(4.0, &[0.25, 0.5, 0.75], &[0.2, 0.25, 0.1]).unwrap();
        let exc = Excitation::unit(ExcitationKind::InitialDisplacement);
        for _ in 0..100 {
            let s = Complex64::new(rng.gen_range(0.1..10.0), rng.gen_range(-10.0..10.0));
            let w = m.omega(s).unwrap();
            let h = hhat_analytic(&m, &exc, s).unwrap();
            let lhs = s * h * w;
            let rhs = w - m.big_lambda;
            assert!((lhs - rhs).norm() <= 1e-13 * rhs.norm().max(1.0));
        }
    }

    #[test]
    fn u1_large_s_normalization() {
        // s^2 * hhat(u1) -> weight as s -> infinity
        let m = DampingModel::with_unit_beta(4.0, &[0.25, 0.5, 0.75], &[0.2, 0.25, 0.1]).unwrap();
        let s = Complex64::new(1e6, 0.0);
        let h = hhat_analytic(&m, &Excitation::unit(ExcitationKind::InitialVelocity), s).unwrap();
        assert_relative_eq!((s * s * h).re, 1.0, max_relative = 1e-4);
    }
}
