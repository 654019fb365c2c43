//! End-to-end cross-checks against the dense-matrix, enumeration and
//! simulation oracles.

use std::fmt::Write as _;

use hetbias_core::experiments::{mc_validate_bias, run_invariance_study, ExperimentConfig};
use hetbias_core::minimax::{
    a_star_analytic, default_a_max, minimax_a_numeric, worst_case_pair, worst_case_positive,
};
use hetbias_core::{
    bias, bias_via_residuals, expected_sq_residuals, standardize, three_point_sequence,
    EstimatorSpec, VariancePattern,
};
use hetbias_oracles::{dense_bias, random_instance, residual_variances, vertex_extremes};

use crate::args::ValidateArgs;
use crate::error::{CliError, CliResult};
use hetbias_core::experiments::derive_seed;

const MIN_REPS: usize = 1000;

struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn abs_or_rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn lemma_residuals(seed: u64) -> CliResult<Check> {
    let mut worst = 0.0f64;
    for i in 0..25 {
        let inst = random_instance(derive_seed(seed, &[1, i]), 5 + (i as usize % 30), 2.0);
        let reg = standardize(&inst.x)?;
        let var = VariancePattern::new(inst.sigma_sq.clone(), None)?;
        let ours = expected_sq_residuals(&reg, &var)?;
        let dense = residual_variances(&inst.x, &inst.sigma_sq);
        for (a, b) in ours.iter().zip(&dense) {
            worst = worst.max(abs_or_rel(*a, *b));
        }
    }
    Ok(Check {
        name: "expected squared residuals vs dense (I-H)S(I-H)",
        passed: worst <= 1e-12,
        detail: format!("max error {worst:.3e} (tol 1e-12)"),
    })
}

fn dual_route(seed: u64) -> CliResult<Check> {
    let mut worst = 0.0f64;
    for i in 0..25 {
        let inst = random_instance(derive_seed(seed, &[2, i]), 5 + (i as usize % 30), 1.0);
        let reg = standardize(&inst.x)?;
        let var = VariancePattern::new(inst.sigma_sq.clone(), None)?;
        let spec = EstimatorSpec::custom(inst.a)?;
        let poly = bias(&spec, &reg, &var)?;
        let resid = bias_via_residuals(&spec, &reg, &var)?;
        let dense = dense_bias(&inst.x, &inst.sigma_sq, inst.a);
        let scale = dense.abs().max(
            inst.sigma_sq.iter().cloned().fold(0.0, f64::max)
                / reg.t_count().pow(2) as f64
                / reg.s_squared(),
        );
        worst = worst.max((poly - resid).abs() / scale.max(f64::MIN_POSITIVE));
        worst = worst.max((poly - dense).abs() / scale.max(f64::MIN_POSITIVE));
    }
    Ok(Check {
        name: "bias polynomial vs residual route vs dense matrices",
        passed: worst <= 1e-10,
        detail: format!("max scaled error {worst:.3e} (tol 1e-10)"),
    })
}

fn vertex_enumeration(seed: u64) -> CliResult<Check> {
    let mut worst = 0.0f64;
    for i in 0..10 {
        let t = 4 + (i as usize % 7);
        let inst = random_instance(derive_seed(seed, &[3, i]), t, 1.0);
        let reg = standardize(&inst.x)?;
        let (plus, minus) = worst_case_pair(inst.a, &reg, 1.0)?;
        let (max, min) = vertex_extremes(t, 1.0, |s| dense_bias(&inst.x, s, inst.a));
        let scale = plus.abs().max(minus.abs()).max(f64::MIN_POSITIVE);
        worst = worst
            .max((plus - max).abs() / scale)
            .max((minus - min).abs() / scale);
    }
    Ok(Check {
        name: "worst-case bias vs enumeration of {0,U}^T",
        passed: worst <= 1e-10,
        detail: format!("max scaled error {worst:.3e} (tol 1e-10)"),
    })
}

fn crossing(seed: u64) -> CliResult<Check> {
    let mut worst = 0.0f64;
    for i in 0..25 {
        let inst = random_instance(derive_seed(seed, &[4, i]), 10 + i as usize, 1.0);
        let reg = standardize(&inst.x)?;
        let numeric = minimax_a_numeric(&reg, 1.0, default_a_max(&reg))?;
        let analytic = a_star_analytic(reg.kurtosis(), reg.t_count())?;
        worst = worst.max(rel_err(numeric, analytic));
    }
    Ok(Check {
        name: "numeric minimax a vs (K+1)/(1-(K+1)/T)",
        passed: worst <= 1e-8,
        detail: format!("max relative error {worst:.3e} (tol 1e-8)"),
    })
}

fn invariance(seed: u64) -> CliResult<Check> {
    let cfg = ExperimentConfig {
        t_count: 50,
        samples_per_cell: 4,
        ..ExperimentConfig::table1(seed)
    };
    let rows = run_invariance_study(&cfg)?;
    let mut spread = 0.0f64;
    for cell in cfg.cells() {
        let values: Vec<f64> = rows
            .iter()
            .filter(|r| r.cell.index == cell.index)
            .filter_map(|r| r.outcome.as_ref().ok().map(|m| m.a_star_numeric))
            .collect();
        if values.len() != cfg.samples_per_cell {
            return Ok(Check {
                name: "minimax a constant within moment cells",
                passed: false,
                detail: format!(
                    "cell K={} S={} had failed samples",
                    cell.kurtosis, cell.skewness
                ),
            });
        }
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        spread = spread.max(max - min);
    }
    Ok(Check {
        name: "minimax a constant within moment cells",
        passed: spread <= 1e-6,
        detail: format!("max spread {spread:.3e} at T=50 (tol 1e-6)"),
    })
}

fn simulation_three_point(reps: usize, seed: u64) -> CliResult<Check> {
    let reg = three_point_sequence(48, 2f64.sqrt())?;
    let (b_plus, config) = worst_case_positive(0.0, &reg, 1.0)?;
    let var = config.to_pattern()?;
    let est = mc_validate_bias(
        &EstimatorSpec::eicker_white(),
        &reg,
        &var,
        reps,
        derive_seed(seed, &[5]),
    )?;
    let z = (est.mean - b_plus) / est.std_error;
    Ok(Check {
        name: "simulated bias, three-point T=48 least favorable, a=0",
        passed: z.abs() <= 4.0,
        detail: format!("mean {:.6e} vs exact {:.6e}, {z:+.2} SE", est.mean, b_plus),
    })
}

fn simulation_random(reps: usize, seed: u64) -> CliResult<Check> {
    let mut worst = 0.0f64;
    for i in 0..3 {
        let inst = random_instance(derive_seed(seed, &[6, i]), 20, 1.0);
        let reg = standardize(&inst.x)?;
        let var = VariancePattern::new(inst.sigma_sq.clone(), None)?;
        let spec = EstimatorSpec::custom(inst.a)?;
        let exact = bias(&spec, &reg, &var)?;
        let est = mc_validate_bias(&spec, &reg, &var, reps, derive_seed(seed, &[7, i]))?;
        if est.std_error > 0.0 {
            worst = worst.max(((est.mean - exact) / est.std_error).abs());
        }
    }
    Ok(Check {
        name: "simulated bias, random instances",
        passed: worst <= 4.0,
        detail: format!("largest deviation {worst:.2} SE over 3 instances"),
    })
}

pub fn validate(args: &ValidateArgs) -> CliResult<String> {
    if args.reps < MIN_REPS {
        return Err(CliError::Usage(format!(
            "--reps must be at least {MIN_REPS}"
        )));
    }
    let checks = vec![
        lemma_residuals(args.seed)?,
        dual_route(args.seed)?,
        vertex_enumeration(args.seed)?,
        crossing(args.seed)?,
        invariance(args.seed)?,
        simulation_three_point(args.reps, args.seed)?,
        simulation_random(args.reps, args.seed)?,
    ];
    let mut out = String::new();
    let mut failures = 0;
    for c in &checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        failures += usize::from(!c.passed);
        let _ = writeln!(out, "{status}  {}: {}", c.name, c.detail);
    }
    let _ = writeln!(
        out,
        "{} of {} checks passed (seed {}, {} replications)",
        checks.len() - failures,
        checks.len(),
        args.seed,
        args.reps
    );
    if failures > 0 {
        Err(CliError::ValidationFailed {
            failures,
            report: out,
        })
    } else {
        Ok(out)
    }
}
