//! Seeded Monte Carlo checks of the simulators, oracles and kernels.
//! Seeds are fixed once; tolerances are 3-4 standard errors.

use exindex_core::clusterproc::{
    estimate_kernel_mc, process_path, standardize, tail_chain_probabilities, Centering,
    FunctionalKind, Standardization,
};
use exindex_core::dist::{MarginalDist, SecondOrderPareto};
use exindex_core::estimate::{blocks_true_quantile, EstimatorConfig};
use exindex_core::oracle::{expected_functional, theta_nt_mm_exact};
use exindex_core::sim::{generate_stream, ModelSpec, MovingMaxima};
use exindex_core::stats::{mean, std_error, variance};
use nalgebra::DMatrix;

fn uniform_iid() -> ModelSpec {
    ModelSpec::iid(MarginalDist::Uniform01).unwrap()
}

fn wn(psi: f64) -> ModelSpec {
    ModelSpec::random_repetition(psi, MarginalDist::Uniform01).unwrap()
}

/// `sup_x |F_n(x) - F(x)|`.
fn ks_statistic(values: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

#[test]
fn random_repetition_is_stationary() {
    // Cov(1{X_0≤x}, 1{X_h≤x}) = ψ^h F(x)(1-F(x)) for every x, so the KS limit is
    // the Kolmogorov law scaled by sqrt((1+ψ)/(1-ψ)).
    let psi: f64 = 0.6;
    let n = 10_000;
    let crit = 1.628 * ((1.0 + psi) / (1.0 - psi)).sqrt() / (n as f64).sqrt();
    let model = wn(psi);
    let below = (0..100)
        .filter(|&rep| {
            let x = generate_stream(&model, n, 11, rep, 0).unwrap();
            ks_statistic(&x.values, |v| v.clamp(0.0, 1.0)) < crit
        })
        .count();
    assert!(below >= 95, "{below}/100 runs below the 1% critical value");
}

#[test]
fn iid_ks_uses_plain_critical_value() {
    let n = 10_000;
    let crit = 1.628 / (n as f64).sqrt();
    let below = (0..100)
        .filter(|&rep| {
            let x = generate_stream(&uniform_iid(), n, 12, rep, 0).unwrap();
            ks_statistic(&x.values, |v| v.clamp(0.0, 1.0)) < crit
        })
        .count();
    assert!(below >= 95, "{below}/100");
}

#[test]
fn moving_maxima_marginal_survival() {
    let mm = MovingMaxima::new(vec![1.0, 0.5, 0.8], 2.0, 1.0, 1.0, 0.5).unwrap();
    let model = ModelSpec::MovingMaxima(mm.clone());
    let n = 100_000;
    let x = generate_stream(&model, n, 13, 0, 0).unwrap().values;
    for s in [0.5, 0.1, 0.01] {
        let q = mm.marginal_survival_quantile(s).unwrap();
        let emp = x.iter().filter(|&&v| v > q).count() as f64 / n as f64;
        // Binomial SE inflated for the (2q+1)-dependence.
        let se = (s * (1.0 - s) / n as f64).sqrt() * (2.0 * 3.0 + 1.0f64).sqrt();
        assert!(
            (emp - mm.marginal_survival(q)).abs() < 4.0 * se,
            "s={s}: {emp}"
        );
    }
}

#[test]
fn ar1_window_maxima_cluster_near_one_minus_phi() {
    let model = ModelSpec::ar1_cauchy(0.6).unwrap();
    let u = model.marginal_quantile(0.999).unwrap();
    let (n, w) = (100_000, 50);
    let mut ratios = Vec::new();
    for rep in 0..20 {
        let x = generate_stream(&model, n, 14, rep, 0).unwrap().values;
        let hit = x
            .chunks_exact(w)
            .filter(|b| b.iter().any(|&v| v > u))
            .count() as f64;
        let expected = (n / w) as f64 * w as f64 * 0.001;
        ratios.push(hit / expected);
    }
    let m = mean(&ratios);
    assert!(
        (m - 0.4).abs() < 0.05 + 3.0 * std_error(&ratios),
        "mean ratio {m}"
    );
}

#[test]
fn wn_oracle_centering_has_zero_mean() {
    let (n, r, k) = (20_000, 10, 200);
    let cfg = EstimatorConfig::new(r, k);
    let v = k as f64 / n as f64;
    let model = wn(0.6);
    let grid = [0.25, 0.5, 1.0];
    let ef = |t: f64| {
        expected_functional(&model, FunctionalKind::FMax, r, v, t)
            .unwrap()
            .unwrap()
    };
    let surv = |x: f64| 1.0 - x;
    let mut paths = vec![Vec::new(); grid.len()];
    for rep in 0..300 {
        let x = generate_stream(&model, n, 15, rep, 0).unwrap();
        let blocks = standardize(&x.values, &cfg, &Standardization::Marginal(&surv)).unwrap();
        let path = process_path(
            &blocks,
            FunctionalKind::FMax,
            &grid,
            &Centering::ModelOracle(&ef),
            k as f64,
        )
        .unwrap();
        for (acc, z) in paths.iter_mut().zip(path.values) {
            acc.push(z);
        }
    }
    for (t, zs) in grid.iter().zip(&paths) {
        assert!(
            mean(zs).abs() < 3.0 * std_error(zs),
            "t={t}: mean {} se {}",
            mean(zs),
            std_error(zs)
        );
    }
}

#[test]
fn iid_count_process_has_unit_variance() {
    let (n, r, k) = (20_000, 10, 200);
    let cfg = EstimatorConfig::new(r, k);
    let v = k as f64 / n as f64;
    let model = uniform_iid();
    let eg = |t: f64| {
        expected_functional(&model, FunctionalKind::GCount, r, v, t)
            .unwrap()
            .unwrap()
    };
    let surv = |x: f64| 1.0 - x;
    let zs: Vec<f64> = (0..500)
        .map(|rep| {
            let x = generate_stream(&model, n, 16, rep, 0).unwrap();
            let blocks = standardize(&x.values, &cfg, &Standardization::Marginal(&surv)).unwrap();
            process_path(
                &blocks,
                FunctionalKind::GCount,
                &[1.0],
                &Centering::ModelOracle(&eg),
                k as f64,
            )
            .unwrap()
            .values[0]
        })
        .collect();
    let var = variance(&zs);
    assert!((var - 1.0).abs() < 0.15, "variance {var}");
    assert!(mean(&zs).abs() < 3.0 * std_error(&zs));
}

#[test]
fn iid_mc_kernel_matches_closed_form() {
    let grid = [0.2, 0.4, 0.6, 0.8, 1.0];
    let cfg = EstimatorConfig::new(10, 100);
    let kernel = estimate_kernel_mc(&uniform_iid(), &cfg, 10_000, &grid, 500, 17).unwrap();
    let p = grid.len();
    for (i, &s) in grid.iter().enumerate() {
        for (j, &t) in grid.iter().enumerate() {
            let cg = kernel.c_g[i * p + j];
            // 15% of s∧t, or 3 SE of a Gaussian sample covariance where that is wider.
            let se = ((s * t + s.min(t).powi(2)) / 500.0).sqrt();
            assert!(
                (cg - s.min(t)).abs() <= (0.15 * s.min(t)).max(3.0 * se),
                "c_g({s},{t}) = {cg}"
            );
            assert_eq!(kernel.at(i, j), kernel.at(j, i));
            assert!(
                kernel.at(i, j).abs() < 0.1,
                "c({s},{t}) = {}",
                kernel.at(i, j)
            );
        }
        let diag = kernel.c_fg[i * p + i];
        let se = (2.0 * s * s / 500.0).sqrt();
        assert!(
            (diag - s).abs() <= (0.15 * s).max(3.0 * se),
            "c_fg({s},{s}) = {diag}"
        );
    }
    let m = DMatrix::from_row_slice(p, p, &kernel.c);
    let eig = m.symmetric_eigen().eigenvalues;
    assert!(eig.iter().all(|&e| e >= -1e-8), "{eig:?}");
}

#[test]
fn wn_mc_kernel_is_psd() {
    let grid = [0.25, 0.5, 0.75, 1.0];
    let cfg = EstimatorConfig::new(10, 200);
    let kernel = estimate_kernel_mc(&wn(0.6), &cfg, 20_000, &grid, 200, 18).unwrap();
    let m = DMatrix::from_row_slice(grid.len(), grid.len(), &kernel.c);
    assert!(m.symmetric_eigen().eigenvalues.iter().all(|&e| e >= -1e-8));
    assert!((kernel.theta - 0.45).abs() < 0.05);
}

#[test]
fn iid_tail_chain_is_degenerate() {
    let kernel = tail_chain_probabilities(&uniform_iid(), 100_000, 0.001, 10, 5, 19).unwrap();
    assert!(kernel.window_count() >= 50);
    for k in 2..=10 {
        assert!(kernel.joint_exceedance(k, 1.0, 1.0) < 0.01);
    }
    assert!((kernel.c_g(1.0, 1.0) - 1.0).abs() < 0.05);
}

#[test]
fn ar1_tail_chain_diagonal_and_truncation() {
    let model = ModelSpec::ar1_cauchy(0.6).unwrap();
    let kernel = tail_chain_probabilities(&model, 100_000, 0.001, 60, 10, 20).unwrap();
    for s in [0.2, 0.5, 1.0] {
        assert_eq!(kernel.c_fg(s, s), s);
    }
    let short = kernel.truncated(50).unwrap();
    let (a, b) = (short.c_g(1.0, 1.0), kernel.c_g(1.0, 1.0));
    assert!((a - b).abs() < 0.02 * b, "K=50: {a}, K=60: {b}");
    assert!((kernel.theta - 0.4).abs() < 0.1, "theta {}", kernel.theta);
}

#[test]
fn mm_exact_oracle_matches_true_quantile_estimator() {
    let mm = MovingMaxima::new(vec![1.0, 0.5], 2.0, 1.0, 1.0, 0.5).unwrap();
    let model = ModelSpec::MovingMaxima(mm.clone());
    let (n, r, k) = (20_000, 50, 100);
    let v = k as f64 / n as f64;
    let cfg = EstimatorConfig::new(r, k);
    let quantile = |p: f64| model.marginal_quantile(p);
    let est: Vec<f64> = (0..500)
        .map(|rep| {
            let x = generate_stream(&model, n, 21, rep, 0).unwrap();
            blocks_true_quantile(&x.values, &cfg, 1.0, quantile).unwrap()
        })
        .collect();
    let oracle = theta_nt_mm_exact(&mm, r, v, 1.0).unwrap();
    let (m, se) = (mean(&est), std_error(&est));
    assert!(
        (m - oracle).abs() <= 3.0 * se,
        "mean {m}, oracle {oracle}, se {se}"
    );
}

#[test]
fn second_order_pareto_draws_follow_survival() {
    let inn = SecondOrderPareto::new(2.0, 1.0, 1.0, 0.5).unwrap();
    let model = ModelSpec::iid(MarginalDist::SecondOrderPareto(inn)).unwrap();
    let x = generate_stream(&model, 50_000, 22, 0, 0).unwrap().values;
    let d = ks_statistic(&x, |z| inn.cdf(z));
    assert!(d < 1.628 / (50_000f64).sqrt());
}
