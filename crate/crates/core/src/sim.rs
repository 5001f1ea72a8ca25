//! Seeded generators for the stationary model families.

use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by std's inherent methods when std is linked
use num_traits::Float;

use crate::dist::{MarginalDist, SecondOrderPareto};
use crate::error::{Error, Result};
use crate::rng::{open01, substream};

/// Stationary model family.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "model", rename_all = "snake_case"))]
pub enum ModelSpec {
    /// `X_t = φ X_{t-1} + ε_t` with standard Cauchy innovations.
    Ar1Cauchy {
        phi: f64,
    },
    /// `X_t = ξ_t Z_t + (1-ξ_t) X_{t-1}` with `P{ξ_t = 0} = ψ`.
    RandomRepetition {
        psi: f64,
        innovation: MarginalDist,
    },
    MovingMaxima(MovingMaxima),
    Iid {
        innovation: MarginalDist,
    },
}

/// `X_t = max_{0≤j≤q} ψ_j Z_{t-j}` with second-order Pareto innovations.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(try_from = "MovingMaximaParams", into = "MovingMaximaParams")
)]
pub struct MovingMaxima {
    coeffs: Vec<f64>,
    innovation: SecondOrderPareto,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MovingMaximaParams {
    pub coeffs: Vec<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub c1: f64,
    pub c2: f64,
}

impl TryFrom<MovingMaximaParams> for MovingMaxima {
    type Error = Error;
    fn try_from(p: MovingMaximaParams) -> Result<Self> {
        MovingMaxima::new(p.coeffs, p.beta1, p.beta2, p.c1, p.c2)
    }
}

impl From<MovingMaxima> for MovingMaximaParams {
    fn from(m: MovingMaxima) -> Self {
        let p = m.innovation.params();
        MovingMaximaParams {
            coeffs: m.coeffs,
            beta1: p.beta1,
            beta2: p.beta2,
            c1: p.c1,
            c2: p.c2,
        }
    }
}

impl MovingMaxima {
    /// Coefficients must be nonnegative with maximum exactly 1.
    pub fn new(coeffs: Vec<f64>, beta1: f64, beta2: f64, c1: f64, c2: f64) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::param("coeffs", "need at least one coefficient"));
        }
        if coeffs.iter().any(|&c| !(c >= 0.0 && c.is_finite())) {
            return Err(Error::param("coeffs", "must be nonnegative and finite"));
        }
        let max = coeffs.iter().copied().fold(0.0, f64::max);
        if (max - 1.0).abs() > 1e-12 {
            return Err(Error::param("coeffs", "largest coefficient must equal 1"));
        }
        let innovation = SecondOrderPareto::new(beta1, beta2, c1, c2)?;
        Ok(Self { coeffs, innovation })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Order `q` (number of coefficients minus one).
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn innovation(&self) -> &SecondOrderPareto {
        &self.innovation
    }

    /// `1 - ∏_j F_Z(x/ψ_j)`, accumulated in log space.
    pub fn marginal_survival(&self, x: f64) -> f64 {
        let log_cdf: f64 = self
            .coeffs
            .iter()
            .filter(|&&c| c > 0.0)
            .map(|&c| (-self.innovation.survival(x / c)).ln_1p())
            .sum();
        -log_cdf.exp_m1()
    }

    /// The point with marginal survival `s` by bisection.
    pub fn marginal_survival_quantile(&self, s: f64) -> Result<f64> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::ProbabilityOutOfRange(s));
        }
        let mut lo = self.innovation.z_min();
        let mut hi = lo.max(1.0) * 2.0;
        while self.marginal_survival(hi) >= s {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::ProbabilityOutOfRange(s));
            }
        }
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.marginal_survival(mid) >= s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

impl ModelSpec {
    pub fn ar1_cauchy(phi: f64) -> Result<Self> {
        let m = ModelSpec::Ar1Cauchy { phi };
        m.validate()?;
        Ok(m)
    }

    pub fn random_repetition(psi: f64, innovation: MarginalDist) -> Result<Self> {
        let m = ModelSpec::RandomRepetition { psi, innovation };
        m.validate()?;
        Ok(m)
    }

    pub fn iid(innovation: MarginalDist) -> Result<Self> {
        let m = ModelSpec::Iid { innovation };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Ar1Cauchy { phi } => {
                if !(*phi > 0.0 && *phi < 1.0) {
                    return Err(Error::param("phi", "must lie in (0,1)"));
                }
                Ok(())
            }
            ModelSpec::RandomRepetition { psi, innovation } => {
                if !(*psi >= 0.0 && *psi < 1.0) {
                    return Err(Error::param("psi", "must lie in [0,1)"));
                }
                innovation.validate()
            }
            // Validated on construction.
            ModelSpec::MovingMaxima(_) => Ok(()),
            ModelSpec::Iid { innovation } => innovation.validate(),
        }
    }

    /// True extremal index of the family.
    pub fn extremal_index(&self) -> f64 {
        match self {
            ModelSpec::Ar1Cauchy { phi } => 1.0 - phi,
            ModelSpec::RandomRepetition { psi, .. } => 1.0 - psi,
            ModelSpec::MovingMaxima(mm) => {
                let b1 = mm.innovation.beta1();
                1.0 / mm.coeffs.iter().map(|c| c.powf(b1)).sum::<f64>()
            }
            ModelSpec::Iid { .. } => 1.0,
        }
    }

    /// Stationary marginal cdf.
    pub fn marginal_cdf(&self, x: f64) -> f64 {
        match self {
            ModelSpec::Ar1Cauchy { phi } => MarginalDist::StandardCauchy.cdf(x * (1.0 - phi)),
            ModelSpec::RandomRepetition { innovation, .. } | ModelSpec::Iid { innovation } => {
                innovation.cdf(x)
            }
            ModelSpec::MovingMaxima(mm) => 1.0 - mm.marginal_survival(x),
        }
    }

    pub fn marginal_survival(&self, x: f64) -> f64 {
        match self {
            ModelSpec::Ar1Cauchy { phi } => MarginalDist::StandardCauchy.survival(x * (1.0 - phi)),
            ModelSpec::RandomRepetition { innovation, .. } | ModelSpec::Iid { innovation } => {
                innovation.survival(x)
            }
            ModelSpec::MovingMaxima(mm) => mm.marginal_survival(x),
        }
    }

    /// Stationary marginal quantile `F^←(p)`.
    pub fn marginal_quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::ProbabilityOutOfRange(p));
        }
        match self {
            ModelSpec::Ar1Cauchy { phi } => {
                Ok(MarginalDist::StandardCauchy.quantile(p)? / (1.0 - phi))
            }
            ModelSpec::RandomRepetition { innovation, .. } | ModelSpec::Iid { innovation } => {
                innovation.quantile(p)
            }
            ModelSpec::MovingMaxima(mm) => mm.marginal_survival_quantile(1.0 - p),
        }
    }
}

/// Where a series came from.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Simulated {
        model: ModelSpec,
        seed: u64,
        stream: u64,
        burn_in: usize,
    },
    Ingested,
}

/// One observed or simulated path `x_1..x_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSample {
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

impl SeriesSample {
    /// Wraps externally supplied data. Values must be finite.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySeries);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            values,
            provenance: Provenance::Ingested,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn model(&self) -> Option<&ModelSpec> {
        match &self.provenance {
            Provenance::Simulated { model, .. } => Some(model),
            Provenance::Ingested => None,
        }
    }
}

/// Simulates `n` observations on substream 0 of `seed`.
pub fn generate(model: &ModelSpec, n: usize, seed: u64, burn_in: usize) -> Result<SeriesSample> {
    generate_stream(model, n, seed, 0, burn_in)
}

/// Simulates `n` observations on substream `stream` of `seed`, discarding
/// `burn_in` leading values.
///
/// AR(1) starts from its exact stationary law (Cauchy with scale
/// `1/(1-φ)`), random repetition from `X_0 = Z_0`, and moving maxima
/// consumes `q` warm-up innovations, so every family is stationary from the
/// first returned value even with `burn_in = 0`.
pub fn generate_stream(
    model: &ModelSpec,
    n: usize,
    seed: u64,
    stream: u64,
    burn_in: usize,
) -> Result<SeriesSample> {
    model.validate()?;
    if n == 0 {
        return Err(Error::EmptySeries);
    }
    let mut rng = substream(seed, stream);
    let total = n + burn_in;
    let mut values = Vec::with_capacity(total);
    match model {
        ModelSpec::Ar1Cauchy { phi } => {
            let cauchy = MarginalDist::StandardCauchy;
            let mut x = cauchy.sample(&mut rng) / (1.0 - phi);
            for _ in 0..total {
                x = phi * x + cauchy.sample(&mut rng);
                values.push(x);
            }
        }
        ModelSpec::RandomRepetition { psi, innovation } => {
            let mut x = innovation.sample(&mut rng);
            for _ in 0..total {
                // Both draws happen every step so the stream layout is fixed.
                let repeat = open01(&mut rng) < *psi;
                let z = innovation.sample(&mut rng);
                if !repeat {
                    x = z;
                }
                values.push(x);
            }
        }
        ModelSpec::MovingMaxima(mm) => {
            let q = mm.order();
            let z = MarginalDist::SecondOrderPareto(mm.innovation);
            let innovations: Vec<f64> = (0..total + q).map(|_| z.sample(&mut rng)).collect();
            for t in 0..total {
                // innovations[t + q - j] is Z_{t-j}.
                let x = mm
                    .coeffs
                    .iter()
                    .enumerate()
                    .map(|(j, c)| c * innovations[t + q - j])
                    .fold(f64::NEG_INFINITY, f64::max);
                values.push(x);
            }
        }
        ModelSpec::Iid { innovation } => {
            values.extend((0..total).map(|_| innovation.sample(&mut rng)));
        }
    }
    values.drain(..burn_in);
    Ok(SeriesSample {
        values,
        provenance: Provenance::Simulated {
            model: model.clone(),
            seed,
            stream,
            burn_in,
        },
    })
}
