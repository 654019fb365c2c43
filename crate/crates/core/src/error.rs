use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("regressor sequence needs at least 3 observations, got {0}")]
    TooShort(usize),

    #[error("regressor is constant")]
    ConstantRegressor,

    #[error("T/(2M^2) = {ratio} is not a positive integer (T = {t_count}, M = {m})")]
    IncompatibleShape { t_count: usize, m: f64, ratio: f64 },

    #[error("infeasible moments: kurtosis {kurtosis} < 1 + skewness^2 ({skewness}^2) + tolerance")]
    InfeasibleMoments { skewness: f64, kurtosis: f64 },

    #[error("moment matching did not converge (residual {residual:e})")]
    MomentMatchFailed { residual: f64 },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid scale parameter a = {0}; must be finite and non-negative")]
    InvalidScale(f64),

    #[error("invalid variance pattern: {0}")]
    InvalidVariance(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("K + 1 = {k_plus_one} is not below T = {t_count}; finite-sample a* undefined")]
    DegenerateSampleSize { k_plus_one: f64, t_count: usize },

    #[error("no sign change of B+(a) + B-(a) on [0, {a_max}]")]
    NoBracket { a_max: f64 },

    #[error("design matrix is rank deficient")]
    RankDeficient,
}
