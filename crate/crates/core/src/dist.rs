//! Marginal distributions of the innovations.

#[allow(unused_imports)] // shadowed by std's inherent methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::rng::open01;
use rand_chacha::rand_core::RngCore;

const PI: f64 = core::f64::consts::PI;

/// Innovation / marginal law. Each variant provides cdf, survival and
/// quantile functions; sampling inverts the survival function at a uniform
/// draw.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum MarginalDist {
    StandardCauchy,
    /// Survival `x^{-alpha}` on `[1, ∞)`.
    UnitPareto {
        alpha: f64,
    },
    SecondOrderPareto(SecondOrderPareto),
    Uniform01,
}

impl MarginalDist {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MarginalDist::UnitPareto { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
                Err(Error::param("alpha", "must be positive and finite"))
            }
            _ => Ok(()),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            MarginalDist::StandardCauchy => 0.5 + x.atan() / PI,
            MarginalDist::UnitPareto { alpha } => {
                if x <= 1.0 {
                    0.0
                } else {
                    -(-alpha * x.ln()).exp_m1()
                }
            }
            MarginalDist::SecondOrderPareto(ref d) => d.cdf(x),
            MarginalDist::Uniform01 => x.clamp(0.0, 1.0),
        }
    }

    /// `1 - cdf(x)`, computed without cancellation in the upper tail.
    pub fn survival(&self, x: f64) -> f64 {
        match *self {
            MarginalDist::StandardCauchy => {
                if x > 0.0 {
                    (1.0 / x).atan() / PI
                } else {
                    0.5 - x.atan() / PI
                }
            }
            MarginalDist::UnitPareto { alpha } => {
                if x <= 1.0 {
                    1.0
                } else {
                    x.powf(-alpha)
                }
            }
            MarginalDist::SecondOrderPareto(ref d) => d.survival(x),
            MarginalDist::Uniform01 => 1.0 - x.clamp(0.0, 1.0),
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::ProbabilityOutOfRange(p));
        }
        match *self {
            MarginalDist::StandardCauchy => Ok((PI * (p - 0.5)).tan()),
            MarginalDist::Uniform01 => Ok(p),
            _ => self.survival_quantile(1.0 - p),
        }
    }

    /// The point `x` with `survival(x) = s`, for `s ∈ (0,1)`.
    pub fn survival_quantile(&self, s: f64) -> Result<f64> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::ProbabilityOutOfRange(s));
        }
        Ok(match *self {
            MarginalDist::StandardCauchy => {
                if s < 0.5 {
                    1.0 / (PI * s).tan()
                } else {
                    (PI * (0.5 - s)).tan()
                }
            }
            MarginalDist::UnitPareto { alpha } => s.powf(-1.0 / alpha),
            MarginalDist::SecondOrderPareto(ref d) => d.survival_quantile(s)?,
            MarginalDist::Uniform01 => 1.0 - s,
        })
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = open01(rng);
        match *self {
            MarginalDist::Uniform01 => u,
            // u ∈ (0,1) so inversion cannot fail.
            _ => self.survival_quantile(u).unwrap_or(f64::NAN),
        }
    }
}

/// Heavy-tailed law with survival `c1 z^{-β1} (1 + c2 z^{-β2})` on
/// `[z_min, ∞)`, where `z_min` is the point at which the formula equals 1.
///
/// Only the tail matters to the estimators; the body is the same formula
/// truncated at `z_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(try_from = "SecondOrderParams", into = "SecondOrderParams")
)]
pub struct SecondOrderPareto {
    beta1: f64,
    beta2: f64,
    c1: f64,
    c2: f64,
    z_min: f64,
}

/// Raw parameters of [`SecondOrderPareto`], validated on conversion.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SecondOrderParams {
    pub beta1: f64,
    pub beta2: f64,
    pub c1: f64,
    pub c2: f64,
}

impl TryFrom<SecondOrderParams> for SecondOrderPareto {
    type Error = Error;
    fn try_from(p: SecondOrderParams) -> Result<Self> {
        SecondOrderPareto::new(p.beta1, p.beta2, p.c1, p.c2)
    }
}

impl From<SecondOrderPareto> for SecondOrderParams {
    fn from(d: SecondOrderPareto) -> Self {
        d.params()
    }
}

impl SecondOrderPareto {
    pub fn new(beta1: f64, beta2: f64, c1: f64, c2: f64) -> Result<Self> {
        for (name, v) in [("beta1", beta1), ("beta2", beta2), ("c1", c1)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, "must be positive and finite"));
            }
        }
        if c2 == 0.0 || !c2.is_finite() {
            return Err(Error::param("c2", "must be finite and nonzero"));
        }
        let raw = |z: f64| c1 * z.powf(-beta1) * (1.0 + c2 * z.powf(-beta2));
        // Below z_crit the formula is increasing (only possible for c2 < 0).
        let z_crit = if c2 > 0.0 {
            0.0
        } else {
            (-c2 * (beta1 + beta2) / beta1).powf(1.0 / beta2)
        };
        let mut lo = if z_crit > 0.0 {
            if raw(z_crit) <= 1.0 {
                return Err(Error::NonMonotoneSurvival);
            }
            z_crit
        } else {
            let mut lo = c1.powf(1.0 / beta1);
            let mut guard = 0;
            while raw(lo) <= 1.0 {
                lo *= 0.5;
                guard += 1;
                if guard > 2000 {
                    return Err(Error::NonMonotoneSurvival);
                }
            }
            lo
        };
        let mut hi = lo.max(1.0);
        let mut guard = 0;
        while raw(hi) >= 1.0 {
            hi *= 2.0;
            guard += 1;
            if guard > 2000 {
                return Err(Error::NonMonotoneSurvival);
            }
        }
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if raw(mid) >= 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Self {
            beta1,
            beta2,
            c1,
            c2,
            z_min: hi,
        })
    }

    pub fn params(&self) -> SecondOrderParams {
        SecondOrderParams {
            beta1: self.beta1,
            beta2: self.beta2,
            c1: self.c1,
            c2: self.c2,
        }
    }

    pub fn beta1(&self) -> f64 {
        self.beta1
    }
    pub fn beta2(&self) -> f64 {
        self.beta2
    }
    pub fn c1(&self) -> f64 {
        self.c1
    }
    pub fn c2(&self) -> f64 {
        self.c2
    }
    /// Left end of the support.
    pub fn z_min(&self) -> f64 {
        self.z_min
    }

    pub fn survival(&self, z: f64) -> f64 {
        if z <= self.z_min {
            return 1.0;
        }
        let s = self.c1 * z.powf(-self.beta1) * (1.0 + self.c2 * z.powf(-self.beta2));
        s.min(1.0)
    }

    pub fn cdf(&self, z: f64) -> f64 {
        if z <= self.z_min {
            0.0
        } else {
            1.0 - self.survival(z)
        }
    }

    fn survival_slope(&self, z: f64) -> f64 {
        let (b1, b2) = (self.beta1, self.beta2);
        -self.c1 * (b1 * z.powf(-b1 - 1.0) + self.c2 * (b1 + b2) * z.powf(-b1 - b2 - 1.0))
    }

    /// Inverts the survival function by bracketed Newton iteration
    /// (bisection whenever the Newton step leaves the bracket).
    pub fn survival_quantile(&self, s: f64) -> Result<f64> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::ProbabilityOutOfRange(s));
        }
        let mut lo = self.z_min;
        let mut hi = (self.c1 / s).powf(1.0 / self.beta1).max(lo) * 2.0;
        while self.survival(hi) >= s {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::ProbabilityOutOfRange(s));
            }
        }
        let mut z = (self.c1 / s).powf(1.0 / self.beta1);
        if !(z > lo && z < hi) {
            z = 0.5 * (lo + hi);
        }
        for _ in 0..200 {
            let g = self.survival(z) - s;
            if g == 0.0 {
                return Ok(z);
            }
            if g > 0.0 {
                lo = z;
            } else {
                hi = z;
            }
            if hi - lo <= 4.0 * f64::EPSILON * hi {
                break;
            }
            let slope = self.survival_slope(z);
            let newton = z - g / slope;
            z = if slope < 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        Ok(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sop() -> SecondOrderPareto {
        SecondOrderPareto::new(2.0, 1.0, 1.0, 0.5).unwrap()
    }

    #[test]
    fn vanishing_second_order_term_is_plain_pareto() {
        let d = SecondOrderPareto::new(1.0, 1.0, 1.0, 1e-300).unwrap();
        for p in [0.1, 0.5, 0.9, 0.999] {
            let z = MarginalDist::SecondOrderPareto(d).quantile(p).unwrap();
            let expected = 1.0 / (1.0 - p);
            assert!(
                (z - expected).abs() <= 1e-9 * expected,
                "p={p}: {z} vs {expected}"
            );
        }
    }

    #[test]
    fn median_of_second_order_pareto() {
        // Bisection oracle, written independently of the Newton iteration.
        let f = |z: f64| z.powi(-2) * (1.0 + 0.5 / z) - 0.5;
        let (mut lo, mut hi) = (1.0_f64, 10.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        let z = MarginalDist::SecondOrderPareto(sop())
            .quantile(0.5)
            .unwrap();
        assert!((z - lo).abs() < 1e-12);
        assert!((sop().survival(z) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn round_trip_at_seven() {
        let d = MarginalDist::SecondOrderPareto(sop());
        let p = 1.0 - sop().survival(7.0);
        let z = d.quantile(p).unwrap();
        assert!((z - 7.0).abs() < 1e-9 * 7.0);
    }

    #[test]
    fn support_starts_where_survival_is_one() {
        let d = sop();
        let z = d.z_min();
        let raw = z.powi(-2) * (1.0 + 0.5 / z);
        assert!((raw - 1.0).abs() < 1e-12);
        assert_eq!(d.survival(z * 0.5), 1.0);
        assert_eq!(d.cdf(z * 0.5), 0.0);
    }

    #[test]
    fn rejects_non_monotone_survival() {
        // c2 = -10 with c1 = 1: the formula peaks below 1.
        assert_eq!(
            SecondOrderPareto::new(2.0, 1.0, 1.0, -10.0),
            Err(Error::NonMonotoneSurvival)
        );
        // Negative c2 with a valid peak is accepted and decreasing past z_min.
        let d = SecondOrderPareto::new(1.0, 1.0, 4.0, -0.5).unwrap();
        let mut prev = 1.0;
        for i in 1..100 {
            let s = d.survival(d.z_min() * (1.0 + i as f64 * 0.1));
            assert!(s < prev);
            prev = s;
        }
    }

    #[test]
    fn quantile_rejects_out_of_range() {
        let d = MarginalDist::SecondOrderPareto(sop());
        assert_eq!(d.quantile(0.0), Err(Error::ProbabilityOutOfRange(0.0)));
        assert_eq!(d.quantile(1.0), Err(Error::ProbabilityOutOfRange(1.0)));
        assert!(MarginalDist::Uniform01.quantile(-0.1).is_err());
    }

    #[test]
    fn quantile_inverts_cdf() {
        let dists = [
            MarginalDist::StandardCauchy,
            MarginalDist::UnitPareto { alpha: 1.5 },
            MarginalDist::SecondOrderPareto(sop()),
            MarginalDist::Uniform01,
        ];
        for d in dists {
            for x in [1.5, 2.0, 3.7, 12.0, 150.0] {
                let x = if matches!(d, MarginalDist::Uniform01) {
                    x / 200.0
                } else {
                    x
                };
                let back = d.quantile(d.cdf(x)).unwrap();
                assert!(
                    (back - x).abs() <= 1e-9 * x.abs(),
                    "{d:?} x={x} back={back}"
                );
            }
        }
    }

    #[test]
    fn cauchy_tail_is_accurate() {
        let d = MarginalDist::StandardCauchy;
        let x = d.survival_quantile(1e-12).unwrap();
        assert!((d.survival(x) / 1e-12 - 1.0).abs() < 1e-9);
    }
}
