//! Exact finite-sample moments of the OLS slope variance and its scaled
//! Eicker-White estimators `Ω̂₂₂(a) = (1 + a/T)/(T²s²) Σ z_t² e_t²`.
//!
//! The main path is O(T) and works from moments of the artificial pair
//! `(Z, V)`; no hat matrix is ever materialized here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::sum;
use crate::regressor::RegressorSequence;

/// Error variances `σ_t²`, optionally with a known upper bound `U`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariancePattern {
    sigma_sq: Vec<f64>,
    bound_u: Option<f64>,
}

impl VariancePattern {
    pub fn new(sigma_sq: Vec<f64>, bound_u: Option<f64>) -> Result<Self> {
        if let Some(u) = bound_u {
            if !(u > 0.0 && u.is_finite()) {
                return Err(Error::InvalidVariance(format!(
                    "bound U must be positive, got {u}"
                )));
            }
        }
        for (t, &v) in sigma_sq.iter().enumerate() {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidVariance(format!(
                    "sigma_sq[{t}] = {v} is negative or non-finite"
                )));
            }
            if let Some(u) = bound_u {
                if v > u * (1.0 + 1e-12) {
                    return Err(Error::InvalidVariance(format!(
                        "sigma_sq[{t}] = {v} exceeds bound {u}"
                    )));
                }
            }
        }
        Ok(Self { sigma_sq, bound_u })
    }

    pub fn homoskedastic(t_count: usize, sigma_sq: f64) -> Result<Self> {
        Self::new(vec![sigma_sq; t_count], None)
    }

    pub fn sigma_sq(&self) -> &[f64] {
        &self.sigma_sq
    }

    pub fn bound_u(&self) -> Option<f64> {
        self.bound_u
    }

    pub fn len(&self) -> usize {
        self.sigma_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma_sq.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimatorLabel {
    EickerWhite,
    Hinkley,
    Minimax,
    Custom,
}

/// One member of the scaled family, selected by `a ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    a: f64,
    label: EstimatorLabel,
}

impl EstimatorSpec {
    pub const fn eicker_white() -> Self {
        Self {
            a: 0.0,
            label: EstimatorLabel::EickerWhite,
        }
    }

    pub const fn hinkley() -> Self {
        Self {
            a: 2.0,
            label: EstimatorLabel::Hinkley,
        }
    }

    pub fn minimax(a: f64) -> Result<Self> {
        Ok(Self {
            a: check_scale(a)?,
            label: EstimatorLabel::Minimax,
        })
    }

    pub fn custom(a: f64) -> Result<Self> {
        Ok(Self {
            a: check_scale(a)?,
            label: EstimatorLabel::Custom,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn label(&self) -> EstimatorLabel {
        self.label
    }

    /// `1 + a/T`.
    pub fn scale_factor(&self, t_count: usize) -> f64 {
        1.0 + self.a / t_count as f64
    }
}

pub(crate) fn check_scale(a: f64) -> Result<f64> {
    if a >= 0.0 && a.is_finite() {
        Ok(a)
    } else {
        Err(Error::InvalidScale(a))
    }
}

/// `p(λ) = c0 + c1 λ + c2 λ² + c4 λ⁴`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasPolynomial {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c4: f64,
    pub a: f64,
    pub t_count: usize,
    pub skewness: f64,
    pub kurtosis: f64,
}

impl BiasPolynomial {
    /// Coefficients from explicit moments, without a concrete sequence.
    pub fn from_moments(a: f64, t_count: usize, skewness: f64, kurtosis: f64) -> Result<Self> {
        let a = check_scale(a)?;
        let scale = 1.0 + a / t_count as f64;
        Ok(Self {
            c0: scale,
            c1: 2.0 * scale * skewness,
            c2: a + scale * (kurtosis - 2.0),
            c4: -2.0 * scale,
            a,
            t_count,
            skewness,
            kurtosis,
        })
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        let l2 = lambda * lambda;
        self.c0 + lambda * (self.c1 + lambda * self.c2) + self.c4 * l2 * l2
    }
}

pub fn build_polynomial(a: f64, reg: &RegressorSequence) -> Result<BiasPolynomial> {
    BiasPolynomial::from_moments(a, reg.t_count(), reg.skewness(), reg.kurtosis())
}

/// `EV`, `EVZ` and `EVZ²` for one (regressor, variance) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceMoments {
    pub ev: f64,
    pub evz: f64,
    pub evz2: f64,
}

impl VarianceMoments {
    pub fn compute(reg: &RegressorSequence, var: &VariancePattern) -> Result<Self> {
        check_lengths(reg, var)?;
        let t = reg.t_count() as f64;
        let pairs = || reg.z().iter().zip(var.sigma_sq());
        Ok(Self {
            ev: sum(var.sigma_sq().iter().copied()) / t,
            evz: sum(pairs().map(|(z, v)| z * v)) / t,
            evz2: sum(pairs().map(|(z, v)| z * z * v)) / t,
        })
    }
}

fn check_lengths(reg: &RegressorSequence, var: &VariancePattern) -> Result<()> {
    if reg.t_count() != var.len() {
        return Err(Error::LengthMismatch {
            expected: reg.t_count(),
            got: var.len(),
        });
    }
    Ok(())
}

fn check_index(reg: &RegressorSequence, index: usize) -> Result<()> {
    if index >= reg.t_count() {
        return Err(Error::IndexOutOfRange {
            index,
            len: reg.t_count(),
        });
    }
    Ok(())
}

/// True variance of the OLS slope, `Ω₂₂ = (1/(T²s²)) Σ z_t² σ_t²`.
pub fn true_variance(reg: &RegressorSequence, var: &VariancePattern) -> Result<f64> {
    let moments = VarianceMoments::compute(reg, var)?;
    Ok(moments.evz2 / (reg.t_count() as f64 * reg.s_squared()))
}

/// Hat matrix entry `H_st = (1 + z_s z_t)/T`.
pub fn hat_entry(reg: &RegressorSequence, s_idx: usize, t_idx: usize) -> Result<f64> {
    check_index(reg, s_idx)?;
    check_index(reg, t_idx)?;
    let z = reg.z();
    Ok((1.0 + z[s_idx] * z[t_idx]) / reg.t_count() as f64)
}

/// Below this ratio of result to term size the moment form has lost more
/// than three digits and the entry is summed directly.
const CANCELLATION_RATIO: f64 = 1e-3;

fn expected_sq_residual_with(
    reg: &RegressorSequence,
    var: &VariancePattern,
    m: &VarianceMoments,
    t_idx: usize,
) -> f64 {
    let t = reg.t_count() as f64;
    let z = reg.z()[t_idx];
    let s2 = var.sigma_sq()[t_idx];
    let value = s2 + (m.ev - 2.0 * s2 - 2.0 * z * z * s2 + 2.0 * z * m.evz + z * z * m.evz2) / t;
    let magnitude =
        s2 + (m.ev + 2.0 * s2 + 2.0 * z * z * s2 + 2.0 * (z * m.evz).abs() + z * z * m.evz2) / t;
    if value >= CANCELLATION_RATIO * magnitude {
        value
    } else {
        expected_sq_residual_direct(reg, var, t_idx)
    }
}

/// `(1 − h_tt)² σ_t² + Σ_{k≠t} h_tk² σ_k²`, a sum of non-negative terms.
///
/// `1 − h_tt` is taken from the leave-one-out sum of squares of the raw
/// values, which stays accurate when `h_tt` is close to 1.
fn expected_sq_residual_direct(
    reg: &RegressorSequence,
    var: &VariancePattern,
    t_idx: usize,
) -> f64 {
    let n = reg.t_count();
    let t = n as f64;
    let (x, z, sigma) = (reg.raw(), reg.z(), var.sigma_sq());
    let others = || (0..n).filter(|&k| k != t_idx);
    let mean_out = sum(others().map(|k| x[k])) / (t - 1.0);
    let ss_out = sum(others().map(|k| (x[k] - mean_out) * (x[k] - mean_out)));
    let one_minus_h = (t - 1.0) / t * ss_out / (t * reg.s_squared());
    let off_diagonal = sum(others().map(|k| {
        let h = (1.0 + z[t_idx] * z[k]) / t;
        h * h * sigma[k]
    }));
    one_minus_h * one_minus_h * sigma[t_idx] + off_diagonal
}

/// `E e_t²` for the OLS residual at `t_idx`.
pub fn expected_sq_residual(
    reg: &RegressorSequence,
    var: &VariancePattern,
    t_idx: usize,
) -> Result<f64> {
    let moments = VarianceMoments::compute(reg, var)?;
    check_index(reg, t_idx)?;
    Ok(expected_sq_residual_with(reg, var, &moments, t_idx))
}

/// `E e_t²` for every observation, sharing one moment computation.
pub fn expected_sq_residuals(reg: &RegressorSequence, var: &VariancePattern) -> Result<Vec<f64>> {
    let moments = VarianceMoments::compute(reg, var)?;
    Ok((0..reg.t_count())
        .map(|t| expected_sq_residual_with(reg, var, &moments, t))
        .collect())
}

/// `Ω̂₂₂(a)` evaluated on a residual vector.
pub fn estimator_value(
    spec: &EstimatorSpec,
    reg: &RegressorSequence,
    residuals: &[f64],
) -> Result<f64> {
    if residuals.len() != reg.t_count() {
        return Err(Error::LengthMismatch {
            expected: reg.t_count(),
            got: residuals.len(),
        });
    }
    let t = reg.t_count() as f64;
    let weighted = sum(reg
        .z()
        .iter()
        .zip(residuals)
        .map(|(z, e)| (z * e) * (z * e)));
    Ok(spec.scale_factor(reg.t_count()) * weighted / (t * t * reg.s_squared()))
}

/// Exact bias `E Ω̂₂₂(a) − Ω₂₂ = (1/(T³s²)) Σ p(z_t) σ_t²`.
pub fn bias(spec: &EstimatorSpec, reg: &RegressorSequence, var: &VariancePattern) -> Result<f64> {
    check_lengths(reg, var)?;
    let poly = build_polynomial(spec.a(), reg)?;
    let t = reg.t_count() as f64;
    let total = sum(reg
        .z()
        .iter()
        .zip(var.sigma_sq())
        .map(|(&z, &v)| poly.eval(z) * v));
    Ok(total / (t * t * t * reg.s_squared()))
}

/// Same bias through `(1/(T²s²)) Σ z_t² [(1 + a/T) E e_t² − σ_t²]`.
pub fn bias_via_residuals(
    spec: &EstimatorSpec,
    reg: &RegressorSequence,
    var: &VariancePattern,
) -> Result<f64> {
    let expected = expected_sq_residuals(reg, var)?;
    let scale = spec.scale_factor(reg.t_count());
    let t = reg.t_count() as f64;
    let total = sum(reg
        .z()
        .iter()
        .zip(&expected)
        .zip(var.sigma_sq())
        .map(|((z, e), v)| z * z * (scale * e - v)));
    Ok(total / (t * t * reg.s_squared()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regressor::{standardize, three_point_sequence};

    #[test]
    fn homoskedastic_true_variance() {
        let reg = standardize(&[1.0, 4.0, 2.0, 8.0, 5.0]).unwrap();
        let var = VariancePattern::homoskedastic(5, 2.5).unwrap();
        let expected = 2.5 / (5.0 * reg.s_squared());
        assert!(
            (true_variance(&reg, &var).unwrap() - expected).abs() < 1e-15 * expected.abs().max(1.0)
        );
        let zero = VariancePattern::homoskedastic(5, 0.0).unwrap();
        assert_eq!(true_variance(&reg, &zero).unwrap(), 0.0);
    }

    #[test]
    fn three_point_true_variance() {
        let reg = three_point_sequence(8, 2f64.sqrt()).unwrap();
        let var = VariancePattern::new(vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0], None).unwrap();
        assert!((true_variance(&reg, &var).unwrap() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn hat_entries() {
        let reg = standardize(&[-1.0, 0.0, 1.0]).unwrap();
        assert!((hat_entry(&reg, 0, 0).unwrap() - 5.0 / 6.0).abs() < 1e-15);
        assert!((hat_entry(&reg, 1, 1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let trace: f64 = (0..3).map(|t| hat_entry(&reg, t, t).unwrap()).sum();
        assert!((trace - 2.0).abs() < 1e-14);
        assert_eq!(
            hat_entry(&reg, 3, 0),
            Err(Error::IndexOutOfRange { index: 3, len: 3 })
        );
    }

    #[test]
    fn homoskedastic_residual_variance_is_one_minus_leverage() {
        let reg = standardize(&[0.3, 1.7, -2.2, 4.0, 0.9, 3.3]).unwrap();
        let var = VariancePattern::homoskedastic(6, 1.7).unwrap();
        for t in 0..6 {
            let h = hat_entry(&reg, t, t).unwrap();
            let e = expected_sq_residual(&reg, &var, t).unwrap();
            assert!((e - 1.7 * (1.0 - h)).abs() < 1e-14);
        }
        let zero = VariancePattern::homoskedastic(6, 0.0).unwrap();
        assert_eq!(expected_sq_residual(&reg, &zero, 2).unwrap(), 0.0);
        assert!(matches!(
            expected_sq_residual(&reg, &var, 6),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn estimator_value_simple_cases() {
        let reg = standardize(&[-1.0, 0.0, 1.0, 2.0]).unwrap();
        let ew = EstimatorSpec::eicker_white();
        assert_eq!(estimator_value(&ew, &reg, &[0.0; 4]).unwrap(), 0.0);
        // e_t = 1/z_t makes every z_t² e_t² equal to 1
        let residuals: Vec<f64> = reg.z().iter().map(|z| 1.0 / z).collect();
        let t = 4.0;
        let expected = t / (t * t * reg.s_squared());
        assert!((estimator_value(&ew, &reg, &residuals).unwrap() - expected).abs() < 1e-14);
        assert!(matches!(
            estimator_value(&ew, &reg, &[0.0; 3]),
            Err(Error::LengthMismatch {
                expected: 4,
                got: 3
            })
        ));
    }

    #[test]
    fn estimator_value_on_fixed_regression() {
        // OLS of the fixed y on x = 1..10; reference from a dense sandwich
        // computation (tests/fixtures/recompute.py in the cli crate).
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        let y = [2.1, 3.9, 6.2, 7.8, 10.5, 11.9, 14.2, 15.8, 18.4, 19.7];
        let (b1, b2) = (0.10000000000000585, 1.99090909090909);
        let residuals: Vec<f64> = x.iter().zip(y).map(|(x, y)| y - b1 - b2 * x).collect();
        let reg = standardize(&x).unwrap();
        let value = estimator_value(&EstimatorSpec::hinkley(), &reg, &residuals).unwrap();
        assert!((value - 0.000850288004007007).abs() < 1e-12 * 0.00085);
    }

    #[test]
    fn polynomial_coefficients() {
        let p = BiasPolynomial::from_moments(2.0, 50, 0.0, 3.0).unwrap();
        let scale = 1.0 + 2.0 / 50.0;
        assert_eq!(p.eval(0.0), scale);
        assert!((p.c2 - (2.0 + 1.0 + 2.0 / 50.0)).abs() < 1e-15);
        assert_eq!(p.c4, -2.0 * scale);
        assert_eq!(p.c1, 0.0);

        let reg = three_point_sequence(96, 3f64.sqrt()).unwrap();
        let p = build_polynomial(1.5, &reg).unwrap();
        let scale = 1.0 + 1.5 / 96.0;
        assert!((p.c2 - (1.5 + scale * (3.0 - 2.0))).abs() < 1e-12);
        assert!(matches!(
            build_polynomial(-0.1, &reg),
            Err(Error::InvalidScale(_))
        ));
    }

    #[test]
    fn zero_variances_have_zero_bias() {
        let reg = standardize(&[1.0, 3.0, 2.0, 7.0]).unwrap();
        let var = VariancePattern::homoskedastic(4, 0.0).unwrap();
        assert_eq!(bias(&EstimatorSpec::hinkley(), &reg, &var).unwrap(), 0.0);
    }

    #[test]
    fn variance_pattern_validation() {
        assert!(VariancePattern::new(vec![1.0, -0.1], None).is_err());
        assert!(VariancePattern::new(vec![1.0, 2.0], Some(1.5)).is_err());
        assert!(VariancePattern::new(vec![1.0, 1.5], Some(1.5)).is_ok());
        assert!(VariancePattern::new(vec![1.0], Some(0.0)).is_err());
        let reg = standardize(&[1.0, 3.0, 2.0]).unwrap();
        let var = VariancePattern::homoskedastic(4, 1.0).unwrap();
        assert!(matches!(
            true_variance(&reg, &var),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn estimator_labels() {
        assert_eq!(EstimatorSpec::eicker_white().a(), 0.0);
        assert_eq!(EstimatorSpec::hinkley().a(), 2.0);
        assert!(EstimatorSpec::custom(-1.0).is_err());
        assert!(EstimatorSpec::minimax(f64::NAN).is_err());
    }

    #[test]
    fn high_leverage_point_keeps_relative_accuracy() {
        // h_11 is within 1e-5 of 1; values from 50-digit arithmetic
        let reg = standardize(&[
            2.6628224937574674e-1,
            2.6288269145094265e0,
            7.629927455592932e-2,
        ])
        .unwrap();
        let var = VariancePattern::new(vec![0.0, 1.0, 0.0], None).unwrap();
        let got = expected_sq_residuals(&reg, &var).unwrap();
        let exact = [
            0.0015974458115685652,
            8.849415677076557e-6,
            0.001368501518260941,
        ];
        for (g, e) in got.iter().zip(exact) {
            assert!((g - e).abs() <= 1e-13 * e, "{g} vs {e}");
        }
        let moments = VarianceMoments::compute(&reg, &var).unwrap();
        for t in 0..3 {
            let direct = expected_sq_residual_direct(&reg, &var, t);
            assert!((direct - exact[t]).abs() <= 1e-13 * exact[t]);
            assert_eq!(expected_sq_residual_with(&reg, &var, &moments, t), got[t]);
        }
    }
}
