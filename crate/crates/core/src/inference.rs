//! Applying the estimator family to data: the intercept-plus-slope OLS fit,
//! variance estimates for each family member, the worst-case significance
//! interval and the multiple-regressor screening triage.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bias::{estimator_value, EstimatorSpec};
use crate::error::{Error, Result};
use crate::minimax::{a_star_analytic, worst_case_pair};
use crate::numeric::{mean, sum};
use crate::regressor::{standardize, RegressorSequence};

/// Multiplier on the standard error in the significance interval.
pub const INTERVAL_MULTIPLIER: f64 = 2.0;
/// Relative pivot tolerance for the control-variable design.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionDataset {
    y: Vec<f64>,
    x: Vec<f64>,
    controls: Vec<Vec<f64>>,
}

impl RegressionDataset {
    pub fn new(y: Vec<f64>, x: Vec<f64>) -> Result<Self> {
        Self::with_controls(y, x, Vec::new())
    }

    pub fn with_controls(y: Vec<f64>, x: Vec<f64>, controls: Vec<Vec<f64>>) -> Result<Self> {
        let t = y.len();
        if t < 3 {
            return Err(Error::TooShort(t));
        }
        if x.len() != t {
            return Err(Error::LengthMismatch {
                expected: t,
                got: x.len(),
            });
        }
        if let Some(col) = controls.iter().find(|c| c.len() != t) {
            return Err(Error::LengthMismatch {
                expected: t,
                got: col.len(),
            });
        }
        let all_finite = y
            .iter()
            .chain(&x)
            .chain(controls.iter().flatten())
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidArgument(
                "dataset contains non-finite values".into(),
            ));
        }
        Ok(Self { y, x, controls })
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn controls(&self) -> &[Vec<f64>] {
        &self.controls
    }

    pub fn t_count(&self) -> usize {
        self.y.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub beta1: f64,
    pub beta2: f64,
    pub residuals: Vec<f64>,
    pub reg: RegressorSequence,
}

/// OLS of `y` on an intercept and `x`.
pub fn ols_fit(data: &RegressionDataset) -> Result<OlsFit> {
    let reg = standardize(data.x())?;
    let t = data.t_count() as f64;
    let s = reg.s_squared().sqrt();
    let y_bar = mean(data.y());
    let x_bar = mean(data.x());
    let beta2 = sum(reg.z().iter().zip(data.y()).map(|(z, y)| z * (y - y_bar))) / (t * s);
    let beta1 = y_bar - beta2 * x_bar;
    let residuals = data
        .y()
        .iter()
        .zip(reg.z())
        .map(|(y, z)| (y - y_bar) - beta2 * s * z)
        .collect();
    Ok(OlsFit {
        beta1,
        beta2,
        residuals,
        reg,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportLabel {
    EickerWhite,
    Hinkley,
    MinimaxFinite,
    MinimaxAsymptotic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HccmeEntry {
    pub label: ReportLabel,
    pub a: f64,
    pub variance_estimate: f64,
    pub std_error: f64,
    /// `max(B⁺, −B⁻)` at this `a`, present when a variance bound was given.
    pub worst_case_bias_bound: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub fn centered(center: f64, half_width: f64) -> Self {
        Self {
            low: center - half_width,
            high: center + half_width,
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        self.low <= value && value <= self.high
    }

    /// Zero lies outside the interval.
    pub fn excludes_zero(&self) -> bool {
        !self.contains(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HccmeReport {
    pub t_count: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub s_squared: f64,
    pub kurtosis_used: f64,
    /// Finite-sample minimax `a`; `K + 1` when `K + 1 ≥ T`.
    pub a_star_used: f64,
    pub degenerate_sample_size: bool,
    /// `Σ (x_t − x̄)² e_t²`.
    pub sum_x2_e2: f64,
    pub entries: Vec<HccmeEntry>,
    /// `β̂₂ ± 2 (1/(T s²)) √((1 + (K+1)/T) Σ x_t² e_t²)`.
    pub significance_interval: Interval,
    /// Same construction with the finite-sample `a*` in place of `K + 1`.
    pub finite_interval: Interval,
    pub significant: bool,
    pub finite_significant: bool,
    pub bound_u: Option<f64>,
    pub worst_case_bias_bound: Option<f64>,
    pub warnings: Vec<String>,
}

impl HccmeReport {
    pub fn entry(&self, label: ReportLabel) -> Option<&HccmeEntry> {
        self.entries.iter().find(|e| e.label == label)
    }
}

/// Variance estimates for the Eicker-White, Hinkley and minimax members and
/// the worst-case significance interval for the slope.
pub fn hccme_report(data: &RegressionDataset, u_bound: Option<f64>) -> Result<HccmeReport> {
    if let Some(u) = u_bound {
        if !(u > 0.0 && u.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "variance bound U must be positive, got {u}"
            )));
        }
    }
    let fit = ols_fit(data)?;
    let reg = &fit.reg;
    let t_count = reg.t_count();
    let t = t_count as f64;
    let kurtosis = reg.kurtosis();
    let asymptotic_a = kurtosis + 1.0;

    let mut warnings = Vec::new();
    let (a_star, degenerate) = match a_star_analytic(kurtosis, t_count) {
        Ok(a) => (a, false),
        Err(e @ Error::DegenerateSampleSize { .. }) => {
            warnings.push(format!("{e}; using a = K + 1"));
            (asymptotic_a, true)
        }
        Err(e) => return Err(e),
    };

    let mut members = vec![
        (ReportLabel::EickerWhite, EstimatorSpec::eicker_white()),
        (ReportLabel::Hinkley, EstimatorSpec::hinkley()),
    ];
    if !degenerate {
        members.push((ReportLabel::MinimaxFinite, EstimatorSpec::minimax(a_star)?));
    }
    members.push((
        ReportLabel::MinimaxAsymptotic,
        EstimatorSpec::minimax(asymptotic_a)?,
    ));

    let mut entries = Vec::with_capacity(members.len());
    for (label, spec) in members {
        let variance_estimate = estimator_value(&spec, reg, &fit.residuals)?;
        let worst_case_bias_bound = match u_bound {
            Some(u) => {
                let (plus, minus) = worst_case_pair(spec.a(), reg, u)?;
                Some(plus.max(-minus))
            }
            None => None,
        };
        entries.push(HccmeEntry {
            label,
            a: spec.a(),
            variance_estimate,
            std_error: variance_estimate.sqrt(),
            worst_case_bias_bound,
        });
    }

    let centered = reg.centered();
    let sum_x2_e2 = sum(centered
        .iter()
        .zip(&fit.residuals)
        .map(|(x, e)| (x * e) * (x * e)));
    let s2 = reg.s_squared();
    let half =
        INTERVAL_MULTIPLIER * (1.0 / (t * s2)) * ((1.0 + asymptotic_a / t) * sum_x2_e2).sqrt();
    let significance_interval = Interval::centered(fit.beta2, half);
    let finite_half =
        INTERVAL_MULTIPLIER * (1.0 / (t * s2)) * ((1.0 + a_star / t) * sum_x2_e2).sqrt();
    let finite_interval = Interval::centered(fit.beta2, finite_half);

    let worst_case_bias_bound = match u_bound {
        Some(u) => {
            let (plus, minus) = worst_case_pair(a_star, reg, u)?;
            Some(plus.max(-minus))
        }
        None => None,
    };

    Ok(HccmeReport {
        t_count,
        beta1: fit.beta1,
        beta2: fit.beta2,
        s_squared: s2,
        kurtosis_used: kurtosis,
        a_star_used: a_star,
        degenerate_sample_size: degenerate,
        sum_x2_e2,
        entries,
        significant: significance_interval.excludes_zero(),
        finite_significant: finite_interval.excludes_zero(),
        significance_interval,
        finite_interval,
        bound_u: u_bound,
        worst_case_bias_bound,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScreeningVerdict {
    /// Not significant on its own, so not significant with more regressors.
    Insignificant,
    /// Significant against the residuals purged of the other regressors.
    Significant,
    /// Significant alone but not after purging.
    Ambiguous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningOutcome {
    pub verdict: ScreeningVerdict,
    pub alone: Interval,
    pub purged: Option<Interval>,
}

/// Residuals of `y` on an intercept and the given columns.
pub fn residualize(y: &[f64], columns: &[Vec<f64>]) -> Result<Vec<f64>> {
    let t = y.len();
    let p = columns.len() + 1;
    if t <= p {
        return Err(Error::RankDeficient);
    }
    let design = DMatrix::from_fn(t, p, |i, j| if j == 0 { 1.0 } else { columns[j - 1][i] });
    let qr = design.clone().qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..p).map(|j| r[(j, j)].abs()).collect();
    let largest = diag.iter().copied().fold(0.0, f64::max);
    if diag.iter().any(|d| *d <= RANK_TOLERANCE * largest) {
        return Err(Error::RankDeficient);
    }
    let rhs = DVector::from_column_slice(y);
    let qty = qr.q().transpose() * &rhs;
    let coef = r.solve_upper_triangular(&qty).ok_or(Error::RankDeficient)?;
    let fitted = design * coef;
    Ok(y.iter().zip(fitted.iter()).map(|(y, f)| y - f).collect())
}

/// Three-step significance triage for `x` in the presence of control regressors.
pub fn screening(data: &RegressionDataset) -> Result<ScreeningOutcome> {
    if data.controls().is_empty() {
        return Err(Error::InvalidArgument(
            "screening needs at least one control column".into(),
        ));
    }
    let alone = hccme_report(
        &RegressionDataset::new(data.y().to_vec(), data.x().to_vec())?,
        None,
    )?
    .significance_interval;
    if !alone.excludes_zero() {
        return Ok(ScreeningOutcome {
            verdict: ScreeningVerdict::Insignificant,
            alone,
            purged: None,
        });
    }
    let purged_y = residualize(data.y(), data.controls())?;
    let purged = hccme_report(&RegressionDataset::new(purged_y, data.x().to_vec())?, None)?
        .significance_interval;
    let verdict = if purged.excludes_zero() {
        ScreeningVerdict::Significant
    } else {
        ScreeningVerdict::Ambiguous
    };
    Ok(ScreeningOutcome {
        verdict,
        alone,
        purged: Some(purged),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_has_zero_residuals() {
        let x = vec![1.0, 2.0, 4.0, 7.0, 11.0];
        let y: Vec<f64> = x.iter().map(|x| 2.0 + 3.0 * x).collect();
        let fit = ols_fit(&RegressionDataset::new(y.clone(), x.clone()).unwrap()).unwrap();
        assert!((fit.beta1 - 2.0).abs() < 1e-12);
        assert!((fit.beta2 - 3.0).abs() < 1e-12);
        assert!(fit.residuals.iter().all(|e| e.abs() < 1e-12));

        let report = hccme_report(&RegressionDataset::new(y, x).unwrap(), None).unwrap();
        let iv = report.significance_interval;
        assert!((iv.high - iv.low).abs() < 1e-10);
        assert!(report.significant);
    }

    #[test]
    fn constant_response_has_zero_slope() {
        let data = RegressionDataset::new(vec![4.0; 5], vec![1.0, 3.0, 2.0, 5.0, 4.0]).unwrap();
        let fit = ols_fit(&data).unwrap();
        assert_eq!(fit.beta2, 0.0);
        let report = hccme_report(&data, None).unwrap();
        assert!(!report.significant);
    }

    #[test]
    fn constant_regressor_rejected() {
        let data = RegressionDataset::new(vec![1.0, 2.0, 3.0], vec![2.0; 3]).unwrap();
        assert_eq!(ols_fit(&data).unwrap_err(), Error::ConstantRegressor);
        assert!(matches!(
            RegressionDataset::new(vec![1.0, 2.0], vec![1.0, 2.0]),
            Err(Error::TooShort(2))
        ));
    }

    #[test]
    fn report_orders_estimates_by_a() {
        let x = vec![0.2, 1.1, 2.3, 2.9, 4.4, 5.0, 6.8, 7.1];
        let y = vec![1.0, 1.9, 2.2, 4.1, 3.8, 6.2, 6.0, 8.3];
        let report = hccme_report(&RegressionDataset::new(y, x).unwrap(), Some(1.0)).unwrap();
        let labels: Vec<_> = report.entries.iter().map(|e| e.label).collect();
        assert_eq!(
            labels,
            [
                ReportLabel::EickerWhite,
                ReportLabel::Hinkley,
                ReportLabel::MinimaxFinite,
                ReportLabel::MinimaxAsymptotic
            ]
        );
        let mut by_a: Vec<_> = report
            .entries
            .iter()
            .map(|e| (e.a, e.variance_estimate))
            .collect();
        by_a.sort_by(|l, r| l.0.total_cmp(&r.0));
        assert!(by_a.windows(2).all(|w| w[0].1 < w[1].1));
        assert!(report
            .entries
            .iter()
            .all(|e| e.worst_case_bias_bound.unwrap() > 0.0));
    }

    #[test]
    fn finite_a_star_always_defined_for_valid_data() {
        // A single outlier maximizes the sample kurtosis, K = T - 2 + 1/(T - 1),
        // which keeps K + 1 below T, so the fallback never fires on real data.
        for t in 3..40 {
            let mut x = vec![0.0; t];
            x[t - 1] = 1.0;
            let y: Vec<f64> = (0..t).map(|i| (i as f64).sin()).collect();
            let report = hccme_report(&RegressionDataset::new(y, x).unwrap(), None).unwrap();
            let k = t as f64 - 2.0 + 1.0 / (t as f64 - 1.0);
            assert!((report.kurtosis_used - k).abs() < 1e-9);
            assert!(!report.degenerate_sample_size);
        }
    }

    #[test]
    fn rank_deficient_controls() {
        let y = vec![1.0, 2.0, 3.0, 5.0, 4.0];
        let w = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let w2: Vec<f64> = w.iter().map(|v| 2.0 * v + 1.0).collect();
        assert_eq!(residualize(&y, &[w.clone(), w2]), Err(Error::RankDeficient));
        assert_eq!(
            residualize(&y[..2], &[w[..2].to_vec()]),
            Err(Error::RankDeficient)
        );
        let e = residualize(&y, &[w]).unwrap();
        assert!(e.iter().sum::<f64>().abs() < 1e-12);
    }
}
