use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Every failure the estimators, constructions and oracles can report.
///
/// [`Error::code`] gives the stable machine-readable name used on the
/// command line and in result files.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },
    #[error("series is empty")]
    EmptySeries,
    #[error("series contains a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("no exceedances of the threshold")]
    NoExceedances,
    #[error("ties among the top {count} order statistics")]
    TiesDetected { count: usize },
    #[error("threshold index t={0} outside (0,1]")]
    ThresholdIndex(f64),
    #[error("probability {0} outside (0,1)")]
    ProbabilityOutOfRange(f64),
    #[error("survival function is not strictly decreasing on its support")]
    NonMonotoneSurvival,
    #[error("known-marginal standardization requested without a marginal")]
    MissingMarginal,
    #[error("centering unavailable: {0}")]
    CenteringUnavailable(&'static str),
    #[error("need at least {needed} replicates, got {got}")]
    TooFewReplicates { needed: usize, got: usize },
    #[error("need at least {needed} tail windows, collected {got}")]
    TooFewWindows { needed: usize, got: usize },
    #[error("condition (M1) violated: product push-forward does not vanish")]
    M1Violation,
    #[error("condition (M2) violated at delta={delta}")]
    M2Violation { delta: f64 },
    #[error("condition (M3) violated: integral of 1/(st) against |mu| is not finite")]
    M3Violation,
    #[error("degenerate denominator in corrected estimate (fallback {fallback})")]
    DegenerateDenominator { fallback: f64 },
    #[error("normalizer of the asymptotic variance vanishes")]
    ZeroNormalizer,
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "INVALID_PARAMETER",
            Error::EmptySeries => "EMPTY_SERIES",
            Error::NonFinite(_) => "NON_FINITE",
            Error::NoExceedances => "NO_EXCEEDANCES",
            Error::TiesDetected { .. } => "TIES_DETECTED",
            Error::ThresholdIndex(_) => "THRESHOLD_INDEX",
            Error::ProbabilityOutOfRange(_) => "PROBABILITY_OUT_OF_RANGE",
            Error::NonMonotoneSurvival => "NON_MONOTONE_SURVIVAL",
            Error::MissingMarginal => "MISSING_MARGINAL",
            Error::CenteringUnavailable(_) => "CENTERING_UNAVAILABLE",
            Error::TooFewReplicates { .. } => "TOO_FEW_REPLICATES",
            Error::TooFewWindows { .. } => "TOO_FEW_WINDOWS",
            Error::M1Violation => "M1_VIOLATION",
            Error::M2Violation { .. } => "M2_VIOLATION",
            Error::M3Violation => "M3_VIOLATION",
            Error::DegenerateDenominator { .. } => "DEGENERATE_DENOMINATOR",
            Error::ZeroNormalizer => "ZERO_NORMALIZER",
        }
    }

    pub(crate) fn param(name: &'static str, reason: &'static str) -> Self {
        Error::InvalidParameter { name, reason }
    }
}
