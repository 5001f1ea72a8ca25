//! Finite-sample ground truth for the models that admit it.
//!
//! `θ_{n,t} = P{max_{1≤i≤r} X_i > F^←(1-vt)} / (r v t)` is the centering of
//! the blocks estimator at threshold index `t`.

use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by std's inherent methods when std is linked
use num_traits::Float;

use crate::clusterproc::{CovarianceKernel, FunctionalKind};
use crate::error::{Error, Result};
use crate::sim::{ModelSpec, MovingMaxima};

/// `θ_{n,t} ≈ θ_n + c_n t^δ` together with the true extremal index.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BiasExpansion {
    pub theta: f64,
    pub theta_n: f64,
    pub c_n: f64,
    pub delta: f64,
    pub validity: Validity,
}

impl BiasExpansion {
    pub fn eval(&self, t: f64) -> f64 {
        self.theta_n + self.c_n * t.powf(self.delta)
    }
}

/// Order of the neglected remainder, or the regime an expansion was chosen
/// from.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Validity {
    /// Remainder `O(v + r² v²)`; `bound` is `v + r² v²`.
    RandomRepetition { bound: f64 },
    /// Power-law leading term `d (vt)^{β2/β1}`; valid when `r v^{β2/β1}` is
    /// large and `r v^{1-β2/β1}` small.
    MovingMaximaPower { r_v_pow: f64, r_v_copow: f64 },
    /// Linear leading term `-θ² r v t / 2`; valid when
    /// `r v^{max(1/2, 1-β2/β1)}` is large.
    MovingMaximaLinear { r_v_pow: f64 },
}

fn check_inputs(r: usize, v: f64, t: f64) -> Result<()> {
    if r == 0 {
        return Err(Error::param("r", "must be at least 1"));
    }
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::ThresholdIndex(t));
    }
    if !(v > 0.0 && v * t < 1.0) {
        return Err(Error::param("v", "need v > 0 and v t < 1"));
    }
    Ok(())
}

/// Random-repetition model with continuous innovations:
/// `θ_{n,t} = (1 - (1-vt)(1-θvt)^{r-1}) / (r v t)`, `θ = 1 - ψ`.
///
/// Evaluated as `x + (1-x)(1 - (1-θx)^{r-1})` over `r x` with `x = vt`, so
/// `r = 1` yields exactly 1.
pub fn theta_nt_wn(psi: f64, r: usize, v: f64, t: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&psi) {
        return Err(Error::param("psi", "must lie in [0,1)"));
    }
    check_inputs(r, v, t)?;
    let theta = 1.0 - psi;
    let x = v * t;
    let repeat_free = -((r - 1) as f64 * (-theta * x).ln_1p()).exp_m1();
    let exceed = x + (1.0 - x) * repeat_free;
    Ok(exceed / (r as f64 * x))
}

/// `(1 - (1-vt)^r) / (r v t)`, the iid case.
pub fn theta_nt_iid(r: usize, v: f64, t: f64) -> Result<f64> {
    theta_nt_wn(0.0, r, v, t)
}

/// `θ = 1-ψ`, `θ_n = θ + (1-θ)/r`, `c_n = -θ² r v / 2`, `δ = 1`.
pub fn bias_expansion_wn(psi: f64, r: usize, v: f64) -> Result<BiasExpansion> {
    if !(0.0..1.0).contains(&psi) {
        return Err(Error::param("psi", "must lie in [0,1)"));
    }
    check_inputs(r, v, 1.0)?;
    let theta = 1.0 - psi;
    let rv = r as f64 * v;
    Ok(BiasExpansion {
        theta,
        theta_n: theta + (1.0 - theta) / r as f64,
        c_n: -theta * theta * rv / 2.0,
        delta: 1.0,
        validity: Validity::RandomRepetition { bound: v + rv * rv },
    })
}

/// Largest coefficient that multiplies innovation `Z_m` inside a block of
/// length `r`, for `m = 1-q ..= r` (index `m + q - 1`).
fn window_weights(mm: &MovingMaxima, r: usize) -> Vec<f64> {
    let q = mm.order() as i64;
    let r = r as i64;
    (1 - q..=r)
        .map(|m| {
            mm.coeffs()
                .iter()
                .enumerate()
                .filter(|(j, _)| {
                    let s = m + *j as i64;
                    (1..=r).contains(&s)
                })
                .map(|(_, &c)| c)
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Exact `θ_{n,t}` for moving maxima: the block maximum stays below `x` iff
/// every innovation `Z_m` stays below `x / max ψ_j` over the coefficients
/// that reach the block.
pub fn theta_nt_mm_exact(mm: &MovingMaxima, r: usize, v: f64, t: f64) -> Result<f64> {
    check_inputs(r, v, t)?;
    let x = mm.marginal_survival_quantile(v * t)?;
    let log_p: f64 = window_weights(mm, r)
        .into_iter()
        .filter(|&w| w > 0.0)
        .map(|w| (-mm.innovation().survival(x / w)).ln_1p())
        .sum();
    let exceed = -log_p.exp_m1();
    Ok(exceed / (r as f64 * v * t))
}

/// Leading bias expansions for moving maxima.
///
/// Returns `(power branch, linear branch)`; the caller picks the regime.
/// Both share `θ = 1/Σψ_j^{β1}` and the block-length limit
/// `θ_n = lim_{t→0} θ_{n,t}`.
pub fn bias_expansion_mm(
    mm: &MovingMaxima,
    r: usize,
    v: f64,
) -> Result<(BiasExpansion, BiasExpansion)> {
    check_inputs(r, v, 1.0)?;
    let inn = mm.innovation();
    let (b1, b2, c1, c2) = (inn.beta1(), inn.beta2(), inn.c1(), inn.c2());
    let sum_b1: f64 = mm.coeffs().iter().map(|c| c.powf(b1)).sum();
    let sum_b12: f64 = mm.coeffs().iter().map(|c| c.powf(b1 + b2)).sum();
    let theta = 1.0 / sum_b1;
    let ratio = b2 / b1;
    let d = c2 / c1.powf(ratio) / sum_b1.powf(1.0 + ratio) * (1.0 - sum_b12 / sum_b1);
    let theta_n = window_weights(mm, r)
        .iter()
        .map(|w| w.powf(b1))
        .sum::<f64>()
        / (r as f64 * sum_b1);
    let rf = r as f64;
    let power = BiasExpansion {
        theta,
        theta_n,
        c_n: d * v.powf(ratio),
        delta: ratio,
        validity: Validity::MovingMaximaPower {
            r_v_pow: rf * v.powf(ratio),
            r_v_copow: rf * v.powf(1.0 - ratio),
        },
    };
    let linear = BiasExpansion {
        theta,
        theta_n,
        c_n: -theta * theta * rf * v / 2.0,
        delta: 1.0,
        validity: Validity::MovingMaximaLinear {
            r_v_pow: rf * v.powf(0.5f64.max(1.0 - ratio)),
        },
    };
    Ok((power, linear))
}

/// The constant `d` of the power-law leading term.
pub fn mm_power_constant(mm: &MovingMaxima) -> f64 {
    let inn = mm.innovation();
    let (b1, b2) = (inn.beta1(), inn.beta2());
    let sum_b1: f64 = mm.coeffs().iter().map(|c| c.powf(b1)).sum();
    let sum_b12: f64 = mm.coeffs().iter().map(|c| c.powf(b1 + b2)).sum();
    let ratio = b2 / b1;
    inn.c2() / inn.c1().powf(ratio) / sum_b1.powf(1.0 + ratio) * (1.0 - sum_b12 / sum_b1)
}

/// Degenerate tail chain: `c_g(s,t) = c_fg(s,t) = s∧t`, `θ = 1`, `c ≡ 0`.
pub fn iid_kernel() -> CovarianceKernel {
    CovarianceKernel::ClosedFormIid
}

/// `θ_{n,t}` for any model with a closed form; `None` for AR(1)-Cauchy.
pub fn theta_nt(model: &ModelSpec, r: usize, v: f64, t: f64) -> Option<Result<f64>> {
    match model {
        ModelSpec::RandomRepetition { psi, .. } => Some(theta_nt_wn(*psi, r, v, t)),
        ModelSpec::Iid { .. } => Some(theta_nt_iid(r, v, t)),
        ModelSpec::MovingMaxima(mm) => Some(theta_nt_mm_exact(mm, r, v, t)),
        ModelSpec::Ar1Cauchy { .. } => None,
    }
}

/// `E h_t(Y_{n,1})` for the cluster functionals: `E g_t = r v t` for every
/// stationary model, `E f_t = r v t θ_{n,t}` where `θ_{n,t}` is known.
pub fn expected_functional(
    model: &ModelSpec,
    kind: FunctionalKind,
    r: usize,
    v: f64,
    t: f64,
) -> Option<Result<f64>> {
    if t == 0.0 {
        return Some(Ok(0.0));
    }
    let rvt = r as f64 * v * t;
    match kind {
        FunctionalKind::GCount => Some(Ok(rvt)),
        FunctionalKind::FMax => theta_nt(model, r, v, t).map(|th| th.map(|th| th * rvt)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn single_observation_blocks_have_unit_index() {
        for psi in [0.0, 0.3, 0.6, 0.9] {
            for (v, t) in [(0.01, 0.5), (0.2, 1.0), (0.001, 0.1)] {
                assert_eq!(theta_nt_wn(psi, 1, v, t), Ok(1.0));
            }
        }
    }

    #[test]
    fn wn_reference_value() {
        // (1 - 0.99 · 0.996^9) / 0.1
        let expected = (1.0 - 0.99 * 0.996f64.powi(9)) / 0.1;
        let got = theta_nt_wn(0.6, 10, 0.01, 1.0).unwrap();
        assert!((got - expected).abs() < 1e-14);
        assert!((got - 0.4507).abs() < 1e-4);
    }

    #[test]
    fn wn_iid_substitution() {
        for (r, v, t) in [(10usize, 0.01, 1.0), (5, 0.1, 0.3), (50, 0.002, 0.7)] {
            let closed = (1.0 - (1.0 - v * t).powi(r as i32)) / (r as f64 * v * t);
            assert!((theta_nt_wn(0.0, r, v, t).unwrap() - closed).abs() < 1e-13);
        }
    }

    #[test]
    fn wn_expansion_arithmetic() {
        let e = bias_expansion_wn(0.6, 20, 0.02).unwrap();
        assert!((e.theta_n - 0.43).abs() < 1e-15);
        assert!((e.c_n + 0.032).abs() < 1e-15);
        assert_eq!(e.delta, 1.0);
        assert_eq!(bias_expansion_wn(0.0, 20, 0.02).unwrap().theta_n, 1.0);
    }

    #[test]
    fn wn_expansion_remainder_is_bounded() {
        // |θ_{n,t} - (θ_n + c_n t)| ≤ K (v + r²v²) on t ∈ [0.1, 1] with a
        // single constant across a range of (r, v).
        let mut worst = 0.0f64;
        for (r, v) in [
            (10usize, 0.001),
            (10, 0.01),
            (20, 0.005),
            (50, 0.001),
            (5, 0.02),
        ] {
            let e = bias_expansion_wn(0.6, r, v).unwrap();
            let bound = v + (r as f64 * v).powi(2);
            for i in 1..=10 {
                let t = i as f64 / 10.0;
                let err = (theta_nt_wn(0.6, r, v, t).unwrap() - e.eval(t)).abs();
                worst = worst.max(err / bound);
            }
        }
        assert!(worst < 1.0, "fitted constant {worst}");
    }

    #[test]
    fn wn_range_and_monotonicity() {
        for psi in [0.2, 0.6, 0.9] {
            let mut prev = f64::INFINITY;
            for i in 1..=20 {
                let t = i as f64 / 20.0;
                let th = theta_nt_wn(psi, 10, 0.02, t).unwrap();
                assert!(th > 0.0 && th <= 1.0);
                assert!(th < prev);
                prev = th;
            }
        }
    }

    fn mm(coeffs: &[f64], b1: f64, b2: f64, c1: f64, c2: f64) -> MovingMaxima {
        MovingMaxima::new(coeffs.to_vec(), b1, b2, c1, c2).unwrap()
    }

    #[test]
    fn mm_single_coefficient_is_iid() {
        let m = mm(&[1.0], 2.0, 1.0, 1.0, 0.5);
        for (r, v, t) in [(10usize, 0.01, 1.0), (50, 0.005, 0.4), (3, 0.1, 0.9)] {
            let a = theta_nt_mm_exact(&m, r, v, t).unwrap();
            let b = theta_nt_iid(r, v, t).unwrap();
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn mm_values_are_probabilities_ratio() {
        let m = mm(&[1.0, 0.5, 0.8], 2.0, 1.0, 1.0, 0.5);
        for i in 1..=10 {
            let th = theta_nt_mm_exact(&m, 20, 0.01, i as f64 / 10.0).unwrap();
            assert!(th > 0.0 && th <= 1.0);
        }
    }

    #[test]
    fn mm_power_constant_sign() {
        assert_eq!(mm_power_constant(&mm(&[1.0], 2.0, 1.0, 1.0, 0.5)), 0.0);
        // The parenthesis is positive whenever some ψ_j < 1, so d follows c2.
        assert!(mm_power_constant(&mm(&[1.0, 0.5], 2.0, 0.5, 1.0, 1.0)) > 0.0);
        assert!(mm_power_constant(&mm(&[1.0, 0.5], 2.0, 0.5, 1.0, -0.5)) < 0.0);
        let (power, linear) =
            bias_expansion_mm(&mm(&[1.0, 0.5], 2.0, 0.5, 1.0, -0.5), 50, 0.001).unwrap();
        assert!((power.theta - 0.8).abs() < 1e-15);
        assert_eq!(power.delta, 0.25);
        assert_eq!(linear.delta, 1.0);
        assert!(power.c_n < 0.0);
    }

    #[test]
    fn mm_theta_n_is_small_t_limit() {
        let m = mm(&[1.0, 0.5], 2.0, 1.0, 1.0, 0.5);
        let (power, _) = bias_expansion_mm(&m, 10, 0.01).unwrap();
        // Weights over m = 0..=10: Z_0 reaches X_1 with ψ_1 = 0.5, the rest with 1.
        assert!((power.theta_n - (10.0 + 0.25) / (10.0 * 1.25)).abs() < 1e-15);
        let small = theta_nt_mm_exact(&m, 10, 1e-7, 1.0).unwrap();
        assert!((small - power.theta_n).abs() < 1e-4);
    }

    #[test]
    fn mm_power_branch_converges() {
        // β2/β1 = 1/4 and r = v^{-1/2}: r v^{1/4} → ∞ and r v^{3/4} → 0.
        let m = mm(&[1.0, 0.5], 2.0, 0.5, 1.0, 1.0);
        let rel_err = |v: f64| {
            let r = (1.0 / v.sqrt()).round() as usize;
            let (power, _) = bias_expansion_mm(&m, r, v).unwrap();
            let mut worst = 0.0f64;
            for t in [0.25, 0.5, 0.75, 1.0] {
                let exact = theta_nt_mm_exact(&m, r, v, t).unwrap();
                worst = worst.max((exact - power.eval(t)).abs() / power.c_n.abs());
            }
            worst
        };
        let errs = vec![rel_err(1e-4), rel_err(1e-6), rel_err(1e-8)];
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn centering_values() {
        let model =
            ModelSpec::random_repetition(0.6, crate::dist::MarginalDist::Uniform01).unwrap();
        let eg = expected_functional(&model, FunctionalKind::GCount, 10, 0.01, 0.5)
            .unwrap()
            .unwrap();
        assert!((eg - 0.05).abs() < 1e-15);
        let ef = expected_functional(&model, FunctionalKind::FMax, 10, 0.01, 1.0)
            .unwrap()
            .unwrap();
        assert!((ef - 0.1 * theta_nt_wn(0.6, 10, 0.01, 1.0).unwrap()).abs() < 1e-15);
        let ar = ModelSpec::ar1_cauchy(0.6).unwrap();
        assert!(expected_functional(&ar, FunctionalKind::FMax, 10, 0.01, 1.0).is_none());
    }
}
