//! Test oracles. Everything here is computed the slow, direct way from the
//! raw design matrix `X = [1, x]` and shares no code with `hetbias-core`.

use nalgebra::{DMatrix, DVector, Matrix2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

fn design(x: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), 2, |i, j| if j == 0 { 1.0 } else { x[i] })
}

fn xtx_inverse(x: &[f64]) -> Matrix2<f64> {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    Matrix2::new(n, sx, sx, sxx)
        .try_inverse()
        .expect("non-singular 2x2 normal matrix")
}

/// `(X'X)^-1 X'` as a dense 2 × T matrix.
fn projector(x: &[f64]) -> DMatrix<f64> {
    let inv = xtx_inverse(x);
    let inv = DMatrix::from_fn(2, 2, |i, j| inv[(i, j)]);
    inv * design(x).transpose()
}

/// Hat matrix `X (X'X)^-1 X'`.
pub fn hat_matrix(x: &[f64]) -> DMatrix<f64> {
    design(x) * projector(x)
}

/// `diag((I − H) Σ (I − H))`.
pub fn residual_variances(x: &[f64], sigma_sq: &[f64]) -> Vec<f64> {
    let t = x.len();
    let m = DMatrix::<f64>::identity(t, t) - hat_matrix(x);
    let sigma = DMatrix::from_diagonal(&DVector::from_column_slice(sigma_sq));
    let cov = &m * sigma * m.transpose();
    (0..t).map(|i| cov[(i, i)]).collect()
}

/// Entry (2,2) of `(X'X)^-1 X' diag(w) X (X'X)^-1`.
pub fn sandwich_slope(x: &[f64], weights: &[f64]) -> f64 {
    let p = projector(x);
    let w = DMatrix::from_diagonal(&DVector::from_column_slice(weights));
    let v = &p * w * p.transpose();
    v[(1, 1)]
}

/// `E Ω̂₂₂(a) − Ω₂₂` from dense matrices.
pub fn dense_bias(x: &[f64], sigma_sq: &[f64], a: f64) -> f64 {
    let scale = 1.0 + a / x.len() as f64;
    scale * sandwich_slope(x, &residual_variances(x, sigma_sq)) - sandwich_slope(x, sigma_sq)
}

/// OLS intercept and slope by solving the 2 × 2 normal equations.
pub fn ols_normal_equations(x: &[f64], y: &[f64]) -> (f64, f64) {
    let beta = projector(x) * DVector::from_column_slice(y);
    (beta[0], beta[1])
}

/// Maximum and minimum of `f` over all `{0, u}^T` patterns.
pub fn vertex_extremes<F: Fn(&[f64]) -> f64>(t: usize, u: f64, f: F) -> (f64, f64) {
    assert!(t <= 20, "enumeration limited to T <= 20");
    let mut best = (f64::NEG_INFINITY, f64::INFINITY);
    let mut pattern = vec![0.0; t];
    for mask in 0u32..(1 << t) {
        for (i, v) in pattern.iter_mut().enumerate() {
            *v = if mask >> i & 1 == 1 { u } else { 0.0 };
        }
        let value = f(&pattern);
        best.0 = best.0.max(value);
        best.1 = best.1.min(value);
    }
    best
}

/// Composite Gauss-Legendre (5-point) quadrature on `[lo, hi]` with `pieces` panels.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, pieces: usize) -> f64 {
    const NODES: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const WEIGHTS: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let h = (hi - lo) / pieces as f64;
    (0..pieces)
        .map(|k| {
            let mid = lo + (k as f64 + 0.5) * h;
            NODES
                .iter()
                .zip(WEIGHTS)
                .map(|(n, w)| w * f(mid + 0.5 * h * n))
                .sum::<f64>()
                * 0.5
                * h
        })
        .sum()
}

pub fn std_normal_density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Sign-change root of `f` on `[lo, hi]` by plain bisection to machine precision.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = f(lo);
    assert!(f_lo * f(hi) <= 0.0, "no sign change on [{lo}, {hi}]");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Random test instance: a regressor and a non-negative variance pattern.
#[derive(Debug, Clone)]
pub struct Instance {
    pub x: Vec<f64>,
    pub sigma_sq: Vec<f64>,
    pub a: f64,
}

/// Instances drawn from a mix of regressor laws (normal, exponential,
/// lognormal-ish, uniform) with uniform or spiky variance patterns.
pub fn random_instance(seed: u64, t: usize, u: f64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let law = rng.random_range(0..4);
    let x: Vec<f64> = (0..t)
        .map(|_| {
            let n: f64 = StandardNormal.sample(&mut rng);
            match law {
                0 => 3.0 + 2.0 * n,
                1 => Exp::new(1.0).unwrap().sample(&mut rng),
                2 => (0.8 * n).exp(),
                _ => rng.random_range(-5.0..5.0),
            }
        })
        .collect();
    let spiky = rng.random_bool(0.5);
    let sigma_sq = (0..t)
        .map(|_| {
            if spiky {
                if rng.random_bool(0.3) {
                    u
                } else {
                    0.0
                }
            } else {
                rng.random_range(0.0..u)
            }
        })
        .collect();
    let a = rng.random_range(0.0..10.0);
    Instance { x, sigma_sq, a }
}
