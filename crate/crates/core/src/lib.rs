//! Exact finite-sample bias of scaled Eicker-White variance estimators for
//! the slope of a single-regressor OLS model, worst-case (least favorable)
//! heteroskedasticity, and the minimax choice of the scale parameter.
//!
//! The estimator family is `Ω̂₂₂(a) = (1 + a/T)/(T²s²) Σ z_t² e_t²` with
//! `a = 0` (Eicker-White), `a = 2` (Hinkley) and the minimax
//! `a* = (K + 1)/(1 − (K + 1)/T)`.

pub mod bias;
pub mod error;
pub mod experiments;
pub mod inference;
pub mod minimax;
pub mod numeric;
pub mod regressor;

pub use bias::{
    bias, bias_via_residuals, build_polynomial, estimator_value, expected_sq_residual,
    expected_sq_residuals, hat_entry, true_variance, BiasPolynomial, EstimatorLabel, EstimatorSpec,
    VarianceMoments, VariancePattern,
};
pub use error::{Error, Result};
pub use experiments::{
    mc_validate_bias, run_invariance_study, ExperimentConfig, InvarianceMeasure, InvarianceRow,
    McEstimate,
};
pub use inference::{
    hccme_report, ols_fit, screening, HccmeReport, OlsFit, RegressionDataset, ScreeningOutcome,
    ScreeningVerdict,
};
pub use minimax::{
    a_star_analytic, asymptotic_performance, bias_profile, default_a_max, minimax_a_numeric,
    normal_asymptotic_biases, normal_asymptotic_root, three_point_bounds, three_point_root,
    worst_case_negative, worst_case_pair, worst_case_positive, BiasProfile, Direction,
    LeastFavorableConfig, Normalization,
};
pub use regressor::{
    generate_with_moments, standardize, three_point_sequence, MomentTarget, RegressorSequence,
};
