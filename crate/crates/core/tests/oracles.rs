//! Library routes checked against dense-matrix, enumeration and quadrature oracles.

use hetbias_core::*;
use hetbias_oracles as oracle;

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn instance(seed: u64, t: usize) -> (RegressorSequence, VariancePattern, f64) {
    let inst = oracle::random_instance(seed, t, 1.0);
    let reg = standardize(&inst.x).unwrap();
    let var = VariancePattern::new(inst.sigma_sq, Some(1.0)).unwrap();
    (reg, var, inst.a)
}

#[test]
fn hat_entries_match_dense_projection() {
    for seed in 0..20 {
        let (reg, _, _) = instance(seed, 15);
        let h = oracle::hat_matrix(reg.raw());
        for s in 0..15 {
            for t in 0..15 {
                assert!((hat_entry(&reg, s, t).unwrap() - h[(s, t)]).abs() < 1e-13);
            }
        }
    }
    let reg = standardize(&[-1.0, 0.0, 1.0]).unwrap();
    assert!((oracle::hat_matrix(reg.raw())[(0, 0)] - 5.0 / 6.0).abs() < 1e-15);
}

#[test]
fn expected_residuals_match_dense_covariance() {
    for seed in 100..130 {
        let t = 5 + (seed as usize * 7) % 150;
        let (reg, var, _) = instance(seed, t);
        let dense = oracle::residual_variances(reg.raw(), var.sigma_sq());
        let fast = expected_sq_residuals(&reg, &var).unwrap();
        for (i, (f, d)) in fast.iter().zip(&dense).enumerate() {
            assert!(rel_err(*f, *d) < 1e-12, "seed {seed} t {i}: {f} vs {d}");
            assert_eq!(*f, expected_sq_residual(&reg, &var, i).unwrap());
        }
    }
}

#[test]
fn true_variance_matches_sandwich() {
    for seed in 200..230 {
        let (reg, var, _) = instance(seed, 40);
        let dense = oracle::sandwich_slope(reg.raw(), var.sigma_sq());
        assert!(rel_err(true_variance(&reg, &var).unwrap(), dense) < 1e-12);
    }
    let reg = three_point_sequence(8, 2f64.sqrt()).unwrap();
    let sigma = [1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0];
    assert!((oracle::sandwich_slope(reg.raw(), &sigma) - 0.125).abs() < 1e-15);
}

#[test]
fn bias_routes_agree() {
    for seed in 300..340 {
        let (reg, var, a) = instance(seed, 30);
        let spec = EstimatorSpec::custom(a).unwrap();
        let eq8 = bias(&spec, &reg, &var).unwrap();
        let eq5 = bias_via_residuals(&spec, &reg, &var).unwrap();
        let dense = oracle::dense_bias(reg.raw(), var.sigma_sq(), a);
        assert!(rel_err(eq8, eq5) < 1e-12, "seed {seed}: {eq8} vs {eq5}");
        assert!(
            rel_err(eq8, dense) < 1e-10,
            "seed {seed}: {eq8} vs dense {dense}"
        );
    }
}

#[test]
fn eicker_white_is_textbook_hc0() {
    for seed in 400..410 {
        let inst = oracle::random_instance(seed, 25, 1.0);
        let y: Vec<f64> = inst
            .x
            .iter()
            .zip(&inst.sigma_sq)
            .map(|(x, s)| 1.0 + 0.5 * x + s)
            .collect();
        let data = RegressionDataset::new(y.clone(), inst.x.clone()).unwrap();
        let fit = ols_fit(&data).unwrap();
        let (b1, b2) = oracle::ols_normal_equations(&inst.x, &y);
        assert!(rel_err(fit.beta1, b1) < 1e-10);
        assert!(rel_err(fit.beta2, b2) < 1e-12);
        let e2: Vec<f64> = fit.residuals.iter().map(|e| e * e).collect();
        let hc0 = oracle::sandwich_slope(&inst.x, &e2);
        let ew = estimator_value(&EstimatorSpec::eicker_white(), &fit.reg, &fit.residuals).unwrap();
        assert!(rel_err(ew, hc0) < 1e-12);
    }
}

#[test]
fn worst_cases_match_vertex_enumeration() {
    for seed in 500..520 {
        let t = 4 + (seed as usize % 9);
        let (reg, _, a) = instance(seed, t);
        let u = 2.5;
        let spec = EstimatorSpec::custom(a).unwrap();
        let (max, min) = oracle::vertex_extremes(t, u, |pattern| {
            bias(
                &spec,
                &reg,
                &VariancePattern::new(pattern.to_vec(), Some(u)).unwrap(),
            )
            .unwrap()
        });
        let (b_plus, config) = worst_case_positive(a, &reg, u).unwrap();
        let (b_minus, _) = worst_case_negative(a, &reg, u).unwrap();
        assert!((b_plus - max).abs() <= 1e-12 * max.abs().max(1e-300));
        assert!((b_minus - min).abs() <= 1e-12 * min.abs().max(1e-300));
        let achieved = bias(&spec, &reg, &config.to_pattern().unwrap()).unwrap();
        assert!(rel_err(achieved, b_plus) < 1e-12);
    }
}

#[test]
fn normal_asymptotic_curves_match_quadrature() {
    for a in [0.0, 0.5, 2.0, 4.0, 6.0, 9.5] {
        let r = normal_asymptotic_root(a).unwrap();
        let p = |z: f64| 1.0 + (a + 1.0) * z * z - 2.0 * z.powi(4);
        let root = r.sqrt();
        let inner = oracle::integrate(|z| p(z) * oracle::std_normal_density(z), -root, root, 200);
        let outer =
            2.0 * oracle::integrate(|z| p(z) * oracle::std_normal_density(z), root, 14.0, 2000);
        let (plus, minus) = normal_asymptotic_biases(a).unwrap();
        assert!((plus - inner).abs() < 1e-11, "a = {a}: {plus} vs {inner}");
        assert!(
            (minus + outer).abs() < 1e-11,
            "a = {a}: {minus} vs {}",
            -outer
        );
    }
}

#[test]
fn three_point_root_matches_direct_root_finding() {
    for (a, t) in [
        (0.0, 1_000_000usize),
        (0.0, 48),
        (2.0, 100),
        (4.5, 96),
        (10.0, 30),
    ] {
        let c = 1.0 + a / t as f64;
        // p(±M) as a function of M² from the polynomial's definition
        let p_at = |m2: f64| c + (a + c * (m2 - 2.0)) * m2 - 2.0 * c * m2 * m2;
        let direct = oracle::bisect(p_at, 0.0, 100.0);
        let closed = three_point_root(a, t).unwrap();
        assert!(
            (closed - direct).abs() < 1e-10,
            "a = {a}, T = {t}: {closed} vs {direct}"
        );
        assert!(p_at(closed).abs() < 1e-10);
        assert!(p_at(closed * 1.01) < 0.0 && p_at(closed * 0.99) > 0.0);
        let poly = BiasPolynomial::from_moments(a, t, 0.0, closed).unwrap();
        assert!(poly.eval(closed.sqrt()).abs() < 1e-10);
    }
}

#[test]
fn ols_matches_normal_equations_on_fixture() {
    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../cli/tests/fixtures/audit_fixture.csv"
    );
    let text = std::fs::read_to_string(path).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    let y: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let x: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let fit = ols_fit(&RegressionDataset::new(y.clone(), x.clone()).unwrap()).unwrap();
    let (b1, b2) = oracle::ols_normal_equations(&x, &y);
    assert!(rel_err(fit.beta1, b1) < 1e-12);
    assert!(rel_err(fit.beta2, b2) < 1e-12);
    // numpy reference (tests/fixtures/recompute.py)
    assert!(rel_err(fit.beta1, 1.637309901239661) < 1e-12);
    assert!(rel_err(fit.beta2, 1.1821301314383028) < 1e-12);
    let scale = y.iter().map(|v| v.abs()).fold(0.0, f64::max);
    assert!(fit.residuals.iter().sum::<f64>().abs() < 1e-9 * scale);
    let orth: f64 = fit
        .residuals
        .iter()
        .zip(fit.reg.z())
        .map(|(e, z)| e * z)
        .sum();
    assert!(orth.abs() < 1e-9 * scale);
}

#[test]
fn large_sample_normal_kurtosis() {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(42);
    let raw: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect();
    let reg = standardize(&raw).unwrap();
    let n = raw.len() as f64;
    let m = raw.iter().sum::<f64>() / n;
    let m2 = raw.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = raw.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    assert!((reg.kurtosis() - m4 / (m2 * m2)).abs() < 1e-12);
    assert!((reg.kurtosis() - 3.0).abs() < 0.5);
}
