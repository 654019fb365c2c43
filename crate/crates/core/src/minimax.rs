//! Worst-case biases over bounded heteroskedasticity and the minimax choice
//! of the scale parameter `a`.
//!
//! For `σ_t² ∈ [0, U]` the bias is linear in the variances, so the extremes
//! sit at vertices: `σ_t² = U` where `p(z_t)` has the wanted sign, else `0`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::bias::{build_polynomial, check_scale, BiasPolynomial, VariancePattern};
use crate::error::{Error, Result};
use crate::numeric::{normal_cdf, normal_pdf, sum};
use crate::regressor::RegressorSequence;

pub const BISECTION_TOLERANCE: f64 = 1e-10;
pub const BISECTION_MAX_ITERATIONS: usize = 200;

/// How a bias value is scaled for display.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Normalization {
    /// Bias in the units of `Ω₂₂`.
    Raw,
    /// `T² s² B / U`.
    TSquaredSSquaredOverU,
    /// `T B / U`.
    TOverU,
}

impl Normalization {
    pub const ALL: [Normalization; 3] = [
        Normalization::Raw,
        Normalization::TSquaredSSquaredOverU,
        Normalization::TOverU,
    ];

    pub fn apply(self, raw_bias: f64, t_count: usize, s_squared: f64, u: f64) -> f64 {
        let t = t_count as f64;
        match self {
            Normalization::Raw => raw_bias,
            Normalization::TSquaredSSquaredOverU => t * t * s_squared * raw_bias / u,
            Normalization::TOverU => t * raw_bias / u,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Normalization::Raw => "raw",
            Normalization::TSquaredSSquaredOverU => "t2s2-over-u",
            Normalization::TOverU => "t-over-u",
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Normalization::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown normalization '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Positive,
    Negative,
}

/// Vertex of `[0, U]^T` attaining an extreme bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeastFavorableConfig {
    pub sigma_sq: Vec<f64>,
    pub direction: Direction,
}

impl LeastFavorableConfig {
    pub fn to_pattern(&self) -> Result<VariancePattern> {
        let u = self.sigma_sq.iter().copied().fold(0.0, f64::max);
        VariancePattern::new(self.sigma_sq.clone(), (u > 0.0).then_some(u))
    }
}

/// Maximum positive and negative biases across a grid of `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasProfile {
    pub a_grid: Vec<f64>,
    pub b_plus: Vec<f64>,
    pub b_minus: Vec<f64>,
    pub bound_u: f64,
    pub normalization: Normalization,
}

fn check_bound(u: f64) -> Result<f64> {
    if u > 0.0 && u.is_finite() {
        Ok(u)
    } else {
        Err(Error::InvalidArgument(format!(
            "variance bound U must be positive, got {u}"
        )))
    }
}

fn bias_scale(reg: &RegressorSequence) -> f64 {
    let t = reg.t_count() as f64;
    1.0 / (t * t * t * reg.s_squared())
}

fn worst_case(
    a: f64,
    reg: &RegressorSequence,
    u: f64,
    direction: Direction,
) -> Result<(f64, LeastFavorableConfig)> {
    let u = check_bound(u)?;
    let poly = build_polynomial(a, reg)?;
    let active = |p: f64| match direction {
        Direction::Positive => p > 0.0,
        Direction::Negative => p < 0.0,
    };
    let values: Vec<f64> = reg.z().iter().map(|&z| poly.eval(z)).collect();
    let total = sum(values.iter().map(|&p| if active(p) { p * u } else { 0.0 }));
    let sigma_sq = values
        .iter()
        .map(|&p| if active(p) { u } else { 0.0 })
        .collect();
    Ok((
        total * bias_scale(reg),
        LeastFavorableConfig {
            sigma_sq,
            direction,
        },
    ))
}

/// `B⁺ = (1/(T³s²)) Σ max(p(z_t), 0) U` with its least favorable variances.
pub fn worst_case_positive(
    a: f64,
    reg: &RegressorSequence,
    u: f64,
) -> Result<(f64, LeastFavorableConfig)> {
    worst_case(a, reg, u, Direction::Positive)
}

/// `B⁻ = (1/(T³s²)) Σ min(p(z_t), 0) U` with its least favorable variances.
pub fn worst_case_negative(
    a: f64,
    reg: &RegressorSequence,
    u: f64,
) -> Result<(f64, LeastFavorableConfig)> {
    worst_case(a, reg, u, Direction::Negative)
}

/// `(B⁺, B⁻)` at `a` without building the configurations.
pub fn worst_case_pair(a: f64, reg: &RegressorSequence, u: f64) -> Result<(f64, f64)> {
    let u = check_bound(u)?;
    let poly = build_polynomial(a, reg)?;
    let (plus, minus) = positive_negative_sums(&poly, reg);
    let scale = bias_scale(reg) * u;
    Ok((plus * scale, minus * scale))
}

fn positive_negative_sums(poly: &BiasPolynomial, reg: &RegressorSequence) -> (f64, f64) {
    let values: Vec<f64> = reg.z().iter().map(|&z| poly.eval(z)).collect();
    (
        sum(values.iter().map(|p| p.max(0.0))),
        sum(values.iter().map(|p| p.min(0.0))),
    )
}

/// `B⁺(a) + B⁻(a)` up to the positive factor `U/(T³s²)`; zero at the minimax `a`.
fn crossing_gap(a: f64, reg: &RegressorSequence) -> Result<f64> {
    let poly = build_polynomial(a, reg)?;
    let (plus, minus) = positive_negative_sums(&poly, reg);
    Ok(plus + minus)
}

/// Default upper end of the bisection bracket, `4(K + 2)`.
pub fn default_a_max(reg: &RegressorSequence) -> f64 {
    4.0 * (reg.kurtosis() + 2.0)
}

/// The `a` at which `B⁺(a) = −B⁻(a)`, by bisection on `[0, a_max]`.
///
/// `a_max` is doubled once if the bracket holds no sign change. The result
/// does not depend on `u`, which is validated but scales both curves alike.
pub fn minimax_a_numeric(reg: &RegressorSequence, u: f64, a_max: f64) -> Result<f64> {
    check_bound(u)?;
    if !(a_max > 0.0 && a_max.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "a_max must be positive, got {a_max}"
        )));
    }
    let mut lo = 0.0;
    let g_lo = crossing_gap(lo, reg)?;
    if g_lo == 0.0 {
        return Ok(lo);
    }
    let mut hi = a_max;
    let mut g_hi = crossing_gap(hi, reg)?;
    if g_hi.signum() == g_lo.signum() {
        hi = 2.0 * a_max;
        g_hi = crossing_gap(hi, reg)?;
        if g_hi.signum() == g_lo.signum() {
            return Err(Error::NoBracket { a_max: hi });
        }
    }
    if g_hi == 0.0 {
        return Ok(hi);
    }
    for _ in 0..BISECTION_MAX_ITERATIONS {
        if hi - lo <= BISECTION_TOLERANCE {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let g_mid = crossing_gap(mid, reg)?;
        if g_mid == 0.0 {
            return Ok(mid);
        }
        if g_mid.signum() == g_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `a* = (K + 1)/(1 − (K + 1)/T)`.
pub fn a_star_analytic(kurtosis: f64, t_count: usize) -> Result<f64> {
    let k1 = kurtosis + 1.0;
    let t = t_count as f64;
    if !(k1 < t) {
        return Err(Error::DegenerateSampleSize {
            k_plus_one: k1,
            t_count,
        });
    }
    Ok(k1 / (1.0 - k1 / t))
}

/// Worst-case curves over a grid of `a` for a concrete sequence.
pub fn bias_profile(
    reg: &RegressorSequence,
    u: f64,
    a_grid: &[f64],
    normalization: Normalization,
) -> Result<BiasProfile> {
    let u = check_bound(u)?;
    check_grid(a_grid)?;
    let pairs = a_grid
        .par_iter()
        .map(|&a| worst_case_pair(a, reg, u))
        .collect::<Result<Vec<_>>>()?;
    let norm = |b: f64| normalization.apply(b, reg.t_count(), reg.s_squared(), u);
    Ok(BiasProfile {
        a_grid: a_grid.to_vec(),
        b_plus: pairs.iter().map(|p| norm(p.0)).collect(),
        b_minus: pairs.iter().map(|p| norm(p.1)).collect(),
        bound_u: u,
        normalization,
    })
}

fn check_grid(a_grid: &[f64]) -> Result<()> {
    if a_grid.is_empty() {
        return Err(Error::InvalidArgument("empty a-grid".into()));
    }
    for &a in a_grid {
        check_scale(a)?;
    }
    if a_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument(
            "a-grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Positive root in `λ²` of the large-`T` normal-regressor polynomial
/// `1 + (1 + a)λ² − 2λ⁴`.
pub fn normal_asymptotic_root(a: f64) -> Result<f64> {
    let a = check_scale(a)?;
    Ok((1.0 + a + (8.0 + (1.0 + a) * (1.0 + a)).sqrt()) / 4.0)
}

/// Large-`T` limits of `T² B⁺/U` and `−T² B⁻/U` for a standard normal regressor.
pub fn normal_asymptotic_biases(a: f64) -> Result<(f64, f64)> {
    let r = normal_asymptotic_root(a)?;
    let root = r.sqrt();
    let shared =
        2.0 * (2.0 * r - a + 5.0) * root * normal_pdf(root) + 2.0 * (a - 4.0) * normal_cdf(root);
    Ok((shared - a + 4.0, shared - 2.0 * a + 8.0))
}

/// Normal-regressor curves on a grid, in the `T² s² B / U` scale (`s² = 1`).
pub fn normal_asymptotic_profile(a_grid: &[f64]) -> Result<BiasProfile> {
    check_grid(a_grid)?;
    let pairs = a_grid
        .iter()
        .map(|&a| normal_asymptotic_biases(a))
        .collect::<Result<Vec<_>>>()?;
    Ok(BiasProfile {
        a_grid: a_grid.to_vec(),
        b_plus: pairs.iter().map(|p| p.0).collect(),
        b_minus: pairs.iter().map(|p| -p.1).collect(),
        bound_u: 1.0,
        normalization: Normalization::TSquaredSSquaredOverU,
    })
}

/// Large-`T` maximum biases in the `T² s² B / U` scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceBounds {
    pub eicker_white: f64,
    pub hinkley: f64,
    pub minimax: f64,
}

pub fn asymptotic_performance(kurtosis: f64) -> Result<PerformanceBounds> {
    if !(kurtosis >= 1.0 && kurtosis.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "kurtosis must be at least 1, got {kurtosis}"
        )));
    }
    let k = kurtosis;
    Ok(PerformanceBounds {
        eicker_white: k + 2.0 - 1.0 / k,
        hinkley: k - 1.0 / k,
        minimax: 1.0 - 1.0 / k,
    })
}

/// Root in `M²` of `p(±M)` for the three-point sequence:
/// `p(M) = c + (a − 2c)M² − cM⁴` with `c = 1 + a/T`.
///
/// This can be below 1 (e.g. `√2 − 1` at `a = 0`, large `T`); the sign change
/// of `p(±M)` at this value holds regardless.
pub fn three_point_root(a: f64, t_count: usize) -> Result<f64> {
    let a = check_scale(a)?;
    let c = 1.0 + a / t_count as f64;
    let b = a - 2.0 * c;
    Ok((b + (b * b + 4.0 * c * c).sqrt()) / (2.0 * c))
}

/// Closed-form worst cases for the three-point sequence, valid for
/// `a < M² + 2 − 1/M²`: returns `(M²T²s² B⁺/U, −M²T²s² B⁻/U)`.
pub fn three_point_bounds(a: f64, t_count: usize, m_squared: f64) -> Result<(f64, f64)> {
    let a = check_scale(a)?;
    if !(m_squared > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "M^2 must exceed 1, got {m_squared}"
        )));
    }
    let limit = m_squared + 2.0 - 1.0 / m_squared;
    if !(a < limit) {
        return Err(Error::InvalidArgument(format!(
            "closed forms need a < M^2 + 2 - 1/M^2 = {limit}, got {a}"
        )));
    }
    let m2 = m_squared;
    let ratio = a / t_count as f64;
    let positive = (m2 - 1.0) + ratio * (m2 - 1.0);
    let negative = m2 * m2 + (2.0 - a) * m2 - 1.0 + ratio * (m2 * m2 + 2.0 * m2 - 1.0);
    Ok((positive, negative))
}
