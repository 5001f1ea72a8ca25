//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use exindex_core::biascorrect::{
    check_conditions, default_probe, product_measure, two_atom_measure, DensitySpec,
    SignedMeasureAtoms,
};
use exindex_core::estimate::{
    grid_from_ts, order_statistic_grid, uniform_grid, EstimatorConfig, GridPoint, TiePolicy,
};
use exindex_core::sim::ModelSpec;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};
use crate::io;

/// Threshold grid: a point count (`t_j = j/p`), explicit `t` values, or the
/// order-statistic grid `t_j = j/k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Points(usize),
    List(Vec<f64>),
    Named(NamedGrid),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedGrid {
    OrderStatistics,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Named(NamedGrid::OrderStatistics)
    }
}

impl GridSpec {
    pub fn resolve(&self, k: usize) -> AppResult<Vec<GridPoint>> {
        match self {
            GridSpec::Points(0) => Err(AppError::Config("grid needs at least one point".into())),
            GridSpec::Points(p) => Ok(uniform_grid(k, *p)),
            GridSpec::List(ts) => Ok(grid_from_ts(k, ts)?),
            GridSpec::Named(NamedGrid::OrderStatistics) => Ok(order_statistic_grid(k)),
        }
    }

    /// `N` for a point count, otherwise a comma-separated `t` list or `order`.
    pub fn parse(s: &str) -> AppResult<Self> {
        let s = s.trim();
        if s == "order" {
            return Ok(GridSpec::Named(NamedGrid::OrderStatistics));
        }
        if let Ok(p) = s.parse::<usize>() {
            return Ok(GridSpec::Points(p));
        }
        s.split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map(GridSpec::List)
            .map_err(|_| {
                AppError::Config(format!(
                    "grid `{s}`: expected a count, `order`, or a list of t values"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "construction", rename_all = "snake_case")]
pub enum MeasureSpec {
    TwoAtom {
        p: f64,
        q: f64,
        a: f64,
    },
    Product {
        kappa: f64,
        a: f64,
        b: f64,
        m: usize,
    },
    File {
        path: PathBuf,
    },
}

impl MeasureSpec {
    pub fn build(&self) -> AppResult<SignedMeasureAtoms> {
        Ok(match self {
            MeasureSpec::TwoAtom { p, q, a } => two_atom_measure(*p, *q, *a)?,
            MeasureSpec::Product { kappa, a, b, m } => {
                product_measure(DensitySpec::Power { kappa: *kappa }, *a, *b, *m)?
            }
            MeasureSpec::File { path } => io::read_measure(path)?,
        })
    }
}

fn default_delta() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub n: usize,
    pub r_list: Vec<usize>,
    pub k: usize,
    #[serde(default)]
    pub t_grid: GridSpec,
    #[serde(default)]
    pub measure: Option<MeasureSpec>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub replicates: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default)]
    pub ties: TiePolicy,
    /// Run lengths for the runs estimator; none computed when empty.
    #[serde(default)]
    pub run_lengths: Vec<usize>,
    #[serde(default)]
    pub outputs: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> AppResult<Self> {
        let cfg: Self = serde_json::from_reader(io::open(path)?)
            .map_err(|e| AppError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn estimator(&self, r: usize) -> EstimatorConfig {
        EstimatorConfig::new(r, self.k).with_ties(self.ties)
    }

    pub fn validate(&self) -> AppResult<()> {
        self.model.validate()?;
        if self.replicates == 0 {
            return Err(AppError::Config("replicates must be at least 1".into()));
        }
        if self.r_list.is_empty() {
            return Err(AppError::Config("r_list is empty".into()));
        }
        for &r in &self.r_list {
            self.estimator(r).check(self.n)?;
        }
        for &rl in &self.run_lengths {
            self.estimator(1).with_run_length(rl).check(self.n)?;
        }
        self.t_grid.resolve(self.k)?;
        if self.delta.is_nan() || self.delta <= 0.0 {
            return Err(AppError::Config("delta must be positive".into()));
        }
        if let Some(spec) = &self.measure {
            check_conditions(&spec.build()?, &default_probe(self.delta)).into_result()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_json() -> &'static str {
        r#"{
            "model": {"model": "random_repetition", "psi": 0.6, "innovation": {"kind": "uniform01"}},
            "n": 2000, "r_list": [5, 10], "k": 100, "t_grid": 20,
            "measure": {"construction": "two_atom", "p": 0.5, "q": 1.0, "a": 2.0},
            "replicates": 4, "base_seed": 7, "ties": "ratio_form"
        }"#
    }

    #[test]
    fn parses_and_validates() {
        let cfg: ExperimentConfig = serde_json::from_str(sample_json()).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.delta, 1.0);
        assert_eq!(cfg.t_grid, GridSpec::Points(20));
        let back: ExperimentConfig =
            serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_measure_and_fields() {
        let bad = sample_json().replace("\"q\": 1.0", "\"q\": 0.5");
        let cfg: ExperimentConfig = serde_json::from_str(&bad).unwrap();
        assert_eq!(cfg.validate().unwrap_err().code(), "M2_VIOLATION");
        let unknown = sample_json().replace("\"n\": 2000", "\"n\": 2000, \"bogus\": 1");
        assert!(serde_json::from_str::<ExperimentConfig>(&unknown).is_err());
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(GridSpec::parse("50").unwrap(), GridSpec::Points(50));
        assert_eq!(
            GridSpec::parse("0.5,1").unwrap(),
            GridSpec::List(vec![0.5, 1.0])
        );
        assert_eq!(GridSpec::parse("order").unwrap(), GridSpec::default());
        assert!(GridSpec::parse("x").is_err());
    }
}
