use exindex_core::biascorrect::{
    check_conditions, corrected_estimate, default_probe, product_measure, scale_measure,
    symmetrize, two_atom_measure, DensitySpec, SignedMeasureAtoms,
};
use exindex_core::clusterproc::{eval_functional, standardize, ClusterFunctional, Standardization};
use exindex_core::dist::{MarginalDist, SecondOrderPareto};
use exindex_core::estimate::{order_statistic_grid, sweep, EstimatorConfig, TiePolicy};
use exindex_core::oracle::theta_nt_wn;
use proptest::prelude::*;

/// Valid measures: sums of scaled two-atom and product constructions.
fn measure() -> impl Strategy<Value = SignedMeasureAtoms> {
    let two = (0.05f64..1.0, 0.05f64..1.0, 1.2f64..5.0, -3.0f64..3.0)
        .prop_filter("p and q must differ", |(p, q, _, _)| (p - q).abs() > 0.05)
        .prop_map(|(p, q, a, w)| two_atom_measure(p, q, a).unwrap().scaled_weights(w));
    let product = (
        0.2f64..3.0,
        1.2f64..4.0,
        1.2f64..4.0,
        1usize..6,
        -3.0f64..3.0,
    )
        .prop_map(|(kappa, a, b, m, w)| {
            product_measure(DensitySpec::Power { kappa }, a, b, m)
                .unwrap()
                .scaled_weights(w)
        });
    prop::collection::vec(prop_oneof![two, product], 1..4).prop_map(|parts| {
        parts
            .iter()
            .skip(1)
            .fold(parts[0].clone(), |acc, p| acc.plus(p))
    })
}

fn deltas() -> impl Strategy<Value = f64> {
    prop::sample::select(vec![0.3, 0.5, 1.0, 2.0])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn power_bias_is_annihilated(
        mu in measure(),
        delta in deltas(),
        theta in 0.01f64..0.99,
        c in prop_oneof![-0.5f64..-0.01, 0.01f64..0.5],
    ) {
        let report = check_conditions(&mu, &[delta]);
        prop_assume!(report.passed());
        // Keep the denominator away from cancellation noise.
        prop_assume!((c * mu.marginal_moment(delta)).abs() > 1e-4 * mu.total_variation());
        let est = corrected_estimate(|t| Ok(theta + c * t.powf(delta)), &mu).unwrap();
        prop_assert!((est - theta).abs() < 1e-10, "got {est}, want {theta}");
    }

    #[test]
    fn weight_scaling_is_invisible(mu in measure(), lambda in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0]) {
        let curve = |t: f64| Ok(0.3 + 0.2 * t - 0.1 * t * t);
        let a = corrected_estimate(curve, &mu);
        let b = corrected_estimate(curve, &mu.scaled_weights(lambda));
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn symmetrization_is_neutral(mu in measure()) {
        let curve = |t: f64| Ok(0.6 - 0.25 * t.sqrt() + 0.05 * t);
        let a = corrected_estimate(curve, &mu);
        let b = corrected_estimate(curve, &symmetrize(&mu));
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn scaling_preserves_conditions(mu in measure(), t0 in 0.01f64..=1.0, delta in deltas()) {
        prop_assume!(check_conditions(&mu, &default_probe(delta)).passed());
        let scaled = scale_measure(&mu, t0).unwrap();
        let report = check_conditions(&scaled, &default_probe(delta));
        // (M2) moments scale by t0^δ and may drop under the absolute probe tolerance.
        let m2_ok = mu.marginal_moment(delta).abs() * t0.powf(delta) > 1e-9;
        prop_assume!(m2_ok);
        prop_assert!(report.passed(), "{:?}", report.violations);
    }

    #[test]
    fn sweep_matches_recount(
        x in prop::collection::vec(-100.0f64..100.0, 2..=30),
        r in 1usize..=5,
        k_frac in 0.0f64..1.0,
    ) {
        let n = x.len();
        prop_assume!(r <= n);
        let k = 1 + ((n - 1) as f64 * k_frac) as usize;
        prop_assume!(k < n);
        let cfg = EstimatorConfig::new(r, k).with_ties(TiePolicy::RatioForm);
        let curve = sweep(&x, &cfg, &order_statistic_grid(k)).unwrap();
        let mut sorted = x.clone();
        sorted.sort_by(f64::total_cmp);
        let covered = n / r * r;
        for entry in &curve.entries {
            let thr = sorted[n - entry.k_t - 1];
            let clusters = x[..covered].chunks(r).filter(|b| b.iter().any(|&v| v > thr)).count();
            let exceed = x[..covered].iter().filter(|&&v| v > thr).count();
            let naive = if exceed == 0 { None } else { Some(clusters as f64 / exceed as f64) };
            prop_assert_eq!(entry.estimate.as_ref().ok().copied(), naive);
        }
    }

    #[test]
    fn counts_are_integral_and_monotone(
        x in prop::collection::vec(0.0f64..1.0, 40..200),
        r in 1usize..8,
    ) {
        let n = x.len();
        let k = n / 4;
        let cfg = EstimatorConfig::new(r, k).with_ties(TiePolicy::RatioForm);
        let curve = sweep(&x, &cfg, &order_statistic_grid(k)).unwrap();
        let covered = n / r * r;
        let mut sorted = x.clone();
        sorted.sort_by(f64::total_cmp);
        let mut last_clusters = 0usize;
        for entry in &curve.entries {
            let Ok(est) = entry.estimate else { continue };
            prop_assert!(est > 0.0 && est <= 1.0);
            let thr = sorted[n - entry.k_t - 1];
            let exceed = x[..covered].iter().filter(|&&v| v > thr).count() as f64;
            let clusters = est * exceed;
            prop_assert!((clusters - clusters.round()).abs() < 1e-9);
            // A lower threshold can only add blocks with an exceedance.
            prop_assert!(clusters.round() as usize >= last_clusters);
            last_clusters = clusters.round() as usize;
        }
    }

    #[test]
    fn f_never_exceeds_g(e in prop::collection::vec(0.0f64..=1.0, 1..20), t in 0.0f64..=1.0) {
        let block = exindex_core::clusterproc::StandardizedBlock { excesses: e };
        let f = eval_functional(ClusterFunctional::f(t), &block);
        let g = eval_functional(ClusterFunctional::g(t), &block);
        prop_assert!(f <= g);
        prop_assert!(f == 0.0 || f == 1.0);
    }

    #[test]
    fn rank_excess_counts_match_sweep(x in prop::collection::vec(-10.0f64..10.0, 20..120), r in 1usize..6) {
        let n = x.len();
        let k = n / 3;
        let cfg = EstimatorConfig::new(r, k).with_ties(TiePolicy::RatioForm);
        let mut sorted = x.clone();
        sorted.sort_by(f64::total_cmp);
        prop_assume!(sorted.windows(2).all(|w| w[0] < w[1]));
        let blocks = standardize(&x, &cfg, &Standardization::Rank).unwrap();
        let curve = sweep(&x, &cfg, &order_statistic_grid(k)).unwrap();
        for entry in &curve.entries {
            let g: f64 = blocks.iter().map(|b| eval_functional(ClusterFunctional::g(entry.t), b)).sum();
            let f: f64 = blocks.iter().map(|b| eval_functional(ClusterFunctional::f(entry.t), b)).sum();
            match &entry.estimate {
                Ok(est) => prop_assert!((f / g - est).abs() < 1e-12),
                Err(_) => prop_assert_eq!(g, 0.0),
            }
        }
    }

    #[test]
    fn wn_oracle_is_a_decreasing_probability_ratio(
        psi in 0.01f64..0.99,
        r in 1usize..200,
        v in 1e-5f64..1e-2,
        t1 in 0.01f64..1.0,
        t2 in 0.01f64..1.0,
    ) {
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        prop_assume!(hi - lo > 1e-6);
        let a = theta_nt_wn(psi, r, v, lo).unwrap();
        let b = theta_nt_wn(psi, r, v, hi).unwrap();
        prop_assert!(a > 0.0 && a <= 1.0 && b > 0.0 && b <= 1.0);
        if r > 1 {
            prop_assert!(b < a);
        }
    }

    #[test]
    fn quantile_round_trips(p in 1e-6f64..(1.0 - 1e-6)) {
        for dist in [
            MarginalDist::StandardCauchy,
            MarginalDist::UnitPareto { alpha: 1.5 },
            MarginalDist::Uniform01,
            MarginalDist::SecondOrderPareto(SecondOrderPareto::new(2.0, 1.0, 1.0, 0.5).unwrap()),
        ] {
            let x = dist.quantile(p).unwrap();
            let back = dist.quantile(dist.cdf(x)).unwrap();
            prop_assert!((back - x).abs() <= 1e-9 * x.abs().max(1.0), "{dist:?}: {x} vs {back}");
        }
    }
}
