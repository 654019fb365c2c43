//! Monte Carlo check of the exact bias and the minimax invariance study over
//! moment-matched regressor sequences.
//!
//! Every random stream is derived from the master seed and the task's
//! position, so serial and parallel runs give identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bias::{estimator_value, true_variance, EstimatorSpec, VariancePattern};
use crate::error::{Error, Result};
use crate::minimax::{
    a_star_analytic, default_a_max, minimax_a_numeric, worst_case_pair, Normalization,
};
use crate::numeric::{mean, sum};
use crate::regressor::{generate_with_moments, MomentTarget, RegressorSequence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub t_count: usize,
    pub kurtosis_targets: Vec<f64>,
    pub skewness_targets: Vec<f64>,
    pub samples_per_cell: usize,
    pub seed: u64,
    pub bound_u: f64,
}

impl ExperimentConfig {
    /// Sample size 100, `K ∈ {3, 4}`, `S ∈ {0, 1}`, six sequences per cell.
    pub fn table1(seed: u64) -> Self {
        Self {
            t_count: 100,
            kurtosis_targets: vec![3.0, 4.0],
            skewness_targets: vec![0.0, 1.0],
            samples_per_cell: 6,
            seed,
            bound_u: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples_per_cell == 0 {
            return Err(Error::InvalidArgument(
                "samples_per_cell must be at least 1".into(),
            ));
        }
        if self.kurtosis_targets.is_empty() || self.skewness_targets.is_empty() {
            return Err(Error::InvalidArgument(
                "need at least one kurtosis and one skewness target".into(),
            ));
        }
        if !(self.bound_u > 0.0 && self.bound_u.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "bound U must be positive, got {}",
                self.bound_u
            )));
        }
        if self.t_count < 8 {
            return Err(Error::InvalidArgument(format!(
                "T must be at least 8, got {}",
                self.t_count
            )));
        }
        for cell in self.cells() {
            MomentTarget::new(cell.skewness, cell.kurtosis)?;
        }
        Ok(())
    }

    /// Cells in output order: kurtosis outer, skewness inner.
    pub fn cells(&self) -> Vec<Cell> {
        self.kurtosis_targets
            .iter()
            .flat_map(|&k| self.skewness_targets.iter().map(move |&s| (k, s)))
            .enumerate()
            .map(|(index, (kurtosis, skewness))| Cell {
                index,
                kurtosis,
                skewness,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub index: usize,
    pub kurtosis: f64,
    pub skewness: f64,
}

/// Results for one generated sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceMeasure {
    pub skewness: f64,
    pub kurtosis: f64,
    pub a_star_numeric: f64,
    pub a_star_analytic: f64,
    pub max_bias_raw: f64,
    pub max_bias_t_over_u: f64,
    pub max_bias_t2s2_over_u: f64,
}

impl InvarianceMeasure {
    pub fn max_bias(&self, normalization: Normalization) -> f64 {
        match normalization {
            Normalization::Raw => self.max_bias_raw,
            Normalization::TOverU => self.max_bias_t_over_u,
            Normalization::TSquaredSSquaredOverU => self.max_bias_t2s2_over_u,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceRow {
    pub cell: Cell,
    /// 1-based, as in the published table.
    pub sample_index: usize,
    pub outcome: Result<InvarianceMeasure>,
}

/// SplitMix64 finalizer over the master seed and a task path.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mix = |mut z: u64| {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    };
    path.iter().fold(mix(master), |acc, &p| {
        mix(acc.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(mix(p)))
    })
}

fn measure(reg: &RegressorSequence, u: f64) -> Result<InvarianceMeasure> {
    let a_star_numeric = minimax_a_numeric(reg, u, default_a_max(reg))?;
    let a_star_analytic = a_star_analytic(reg.kurtosis(), reg.t_count())?;
    let (b_plus, b_minus) = worst_case_pair(a_star_numeric, reg, u)?;
    let max_bias_raw = b_plus.max(-b_minus);
    let norm = |n: Normalization| n.apply(max_bias_raw, reg.t_count(), reg.s_squared(), u);
    Ok(InvarianceMeasure {
        skewness: reg.skewness(),
        kurtosis: reg.kurtosis(),
        a_star_numeric,
        a_star_analytic,
        max_bias_raw,
        max_bias_t_over_u: norm(Normalization::TOverU),
        max_bias_t2s2_over_u: norm(Normalization::TSquaredSSquaredOverU),
    })
}

/// Generates `samples_per_cell` sequences per (kurtosis, skewness) cell and
/// records the numeric minimax `a` and the maximum bias there.
///
/// A cell whose generation fails yields failed rows; the study continues.
pub fn run_invariance_study(cfg: &ExperimentConfig) -> Result<Vec<InvarianceRow>> {
    cfg.validate()?;
    let tasks: Vec<(Cell, usize)> = cfg
        .cells()
        .into_iter()
        .flat_map(|cell| (0..cfg.samples_per_cell).map(move |s| (cell, s)))
        .collect();
    Ok(tasks
        .into_par_iter()
        .map(|(cell, sample)| {
            let seed = derive_seed(cfg.seed, &[cell.index as u64, sample as u64]);
            let outcome = MomentTarget::new(cell.skewness, cell.kurtosis)
                .and_then(|target| generate_with_moments(cfg.t_count, &target, seed))
                .and_then(|reg| measure(&reg, cfg.bound_u));
            InvarianceRow {
                cell,
                sample_index: sample + 1,
                outcome,
            }
        })
        .collect())
}

/// Sample mean of `Ω̂₂₂(a) − Ω₂₂` over simulated normal errors, with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub replications: usize,
}

/// Simulates `ε ~ N(0, diag(σ²))`, forms OLS residuals and averages the
/// estimator's error against the true variance.
///
/// Replication `r` draws from ChaCha8 seeded with `seed` on stream `r`.
pub fn mc_validate_bias(
    spec: &EstimatorSpec,
    reg: &RegressorSequence,
    var: &VariancePattern,
    replications: usize,
    seed: u64,
) -> Result<McEstimate> {
    if replications < 1000 {
        return Err(Error::InvalidArgument(format!(
            "need at least 1000 replications, got {replications}"
        )));
    }
    let truth = true_variance(reg, var)?;
    let sd: Vec<f64> = var.sigma_sq().iter().map(|v| v.sqrt()).collect();
    let z = reg.z();
    let t = z.len() as f64;

    let errors = (0..replications)
        .into_par_iter()
        .map_init(
            || (vec![0.0; z.len()], vec![0.0; z.len()]),
            |(eps, resid), r| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(r as u64);
                for (e, s) in eps.iter_mut().zip(&sd) {
                    let draw: f64 = StandardNormal.sample(&mut rng);
                    *e = s * draw;
                }
                // e = (I − H)ε with H_st = (1 + z_s z_t)/T
                let level = sum(eps.iter().copied()) / t;
                let slope = sum(z.iter().zip(eps.iter()).map(|(z, e)| z * e)) / t;
                for ((out, e), z) in resid.iter_mut().zip(eps.iter()).zip(z) {
                    *out = e - level - z * slope;
                }
                estimator_value(spec, reg, resid).map(|v| v - truth)
            },
        )
        .collect::<Result<Vec<f64>>>()?;

    let center = mean(&errors);
    let n = errors.len() as f64;
    let variance = sum(errors.iter().map(|e| (e - center) * (e - center))) / (n - 1.0);
    Ok(McEstimate {
        mean: center,
        std_error: (variance / n).sqrt(),
        replications,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bias::bias;
    use crate::regressor::standardize;

    #[test]
    fn zero_variance_simulation_is_exact() {
        let reg = standardize(&[1.0, 2.0, 4.0, 8.0, 3.0]).unwrap();
        let var = VariancePattern::homoskedastic(5, 0.0).unwrap();
        let est = mc_validate_bias(&EstimatorSpec::eicker_white(), &reg, &var, 1000, 3).unwrap();
        assert_eq!(est.mean, 0.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn homoskedastic_simulation_matches_exact_bias() {
        let reg = standardize(&[0.5, 1.0, 2.5, 3.0, 4.5, 7.0, 7.5, 9.0, 11.0, 15.0]).unwrap();
        let var = VariancePattern::homoskedastic(10, 1.0).unwrap();
        let spec = EstimatorSpec::hinkley();
        let est = mc_validate_bias(&spec, &reg, &var, 20_000, 11).unwrap();
        let exact = bias(&spec, &reg, &var).unwrap();
        assert!((est.mean - exact).abs() <= 4.0 * est.std_error);
    }

    #[test]
    fn too_few_replications_rejected() {
        let reg = standardize(&[1.0, 2.0, 4.0]).unwrap();
        let var = VariancePattern::homoskedastic(3, 1.0).unwrap();
        assert!(mc_validate_bias(&EstimatorSpec::hinkley(), &reg, &var, 999, 1).is_err());
    }

    #[test]
    fn seeds_differ_by_path() {
        let a = derive_seed(1, &[0, 0]);
        assert_ne!(a, derive_seed(1, &[0, 1]));
        assert_ne!(a, derive_seed(1, &[1, 0]));
        assert_ne!(a, derive_seed(2, &[0, 0]));
        assert_eq!(a, derive_seed(1, &[0, 0]));
    }

    #[test]
    fn config_validation() {
        let mut cfg = ExperimentConfig::table1(1);
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.cells().len(), 4);
        assert_eq!(
            (cfg.cells()[1].kurtosis, cfg.cells()[1].skewness),
            (3.0, 1.0)
        );
        cfg.samples_per_cell = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::table1(1);
        cfg.skewness_targets = vec![2.0];
        assert!(matches!(
            cfg.validate(),
            Err(Error::InfeasibleMoments { .. })
        ));
    }

    #[test]
    fn single_sample_study() {
        let mut cfg = ExperimentConfig::table1(5);
        cfg.samples_per_cell = 1;
        cfg.kurtosis_targets = vec![3.0];
        cfg.skewness_targets = vec![0.0];
        let rows = run_invariance_study(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        let m = rows[0].outcome.as_ref().unwrap();
        assert!((m.a_star_numeric - 4.0 / 0.96).abs() < 1e-6);
        assert!(m.max_bias_raw > 0.0);
    }
}
