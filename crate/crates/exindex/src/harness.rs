//! Monte Carlo experiments over replicates of a simulated model.
//!
//! Replicate `j` is simulated on substream `j` of the base seed and the
//! per-replicate results are collected in replicate order, so every output
//! is independent of the number of worker threads.

use std::path::{Path, PathBuf};

use exindex_core::biascorrect::corrected_curve_from;
use exindex_core::estimate::{order_statistic_grid, runs_sweep, sweep, CurveEntry, GridPoint};
use exindex_core::oracle::{bias_expansion_mm, bias_expansion_wn, theta_nt};
use exindex_core::sim::{generate_stream, ModelSpec};
use exindex_core::stats;
use exindex_core::Error;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{AppError, AppResult};
use crate::format::{num, opt};
use crate::io;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Empirical-quantile blocks estimator, `param` = block length.
    Blocks,
    /// Bias-corrected blocks estimator, `param` = block length.
    Corrected,
    /// Runs estimator, `param` = run length.
    Runs,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Blocks => "blocks",
            Family::Corrected => "corrected",
            Family::Runs => "runs",
        }
    }
}

/// One point of one replicate's curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub replicate: usize,
    pub family: Family,
    pub param: usize,
    pub t: f64,
    pub k_t: usize,
    pub value: Result<f64, Error>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub family: Family,
    pub param: usize,
    pub t: f64,
    pub k_t: usize,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub oracle: Option<f64>,
    pub bias: Option<f64>,
    pub rmse: Option<f64>,
    /// Replicates entering the mean.
    pub used: usize,
    /// Replicates excluded because the point failed.
    pub flagged: usize,
}

#[derive(Debug, Clone)]
pub struct MCResult {
    pub config: ExperimentConfig,
    pub grid: Vec<GridPoint>,
    /// Replicate-major; every replicate contributes the same row layout.
    pub rows: Vec<CurveRow>,
    pub summary: Vec<SummaryRow>,
}

impl MCResult {
    pub fn flagged_total(&self) -> usize {
        self.summary.iter().map(|s| s.flagged).sum()
    }

    /// Summary rows of one curve, ordered by `t`.
    pub fn curve(&self, family: Family, param: usize) -> Vec<&SummaryRow> {
        self.summary
            .iter()
            .filter(|s| s.family == family && s.param == param)
            .collect()
    }
}

fn push_entries(
    out: &mut Vec<CurveRow>,
    replicate: usize,
    family: Family,
    param: usize,
    entries: Vec<CurveEntry>,
) {
    out.extend(entries.into_iter().map(|e| CurveRow {
        replicate,
        family,
        param,
        t: e.t,
        k_t: e.k_t,
        value: e.estimate,
    }));
}

fn replicate_rows(
    cfg: &ExperimentConfig,
    grid: &[GridPoint],
    replicate: usize,
) -> AppResult<Vec<CurveRow>> {
    let x = generate_stream(
        &cfg.model,
        cfg.n,
        cfg.base_seed,
        replicate as u64,
        cfg.burn_in,
    )?
    .values;
    let mu = cfg.measure.as_ref().map(|m| m.build()).transpose()?;
    let mut rows = Vec::new();
    for &r in &cfg.r_list {
        let est = cfg.estimator(r);
        push_entries(
            &mut rows,
            replicate,
            Family::Blocks,
            r,
            sweep(&x, &est, grid)?.entries,
        );
        if let Some(mu) = &mu {
            let base = sweep(&x, &est, &order_statistic_grid(cfg.k))?;
            push_entries(
                &mut rows,
                replicate,
                Family::Corrected,
                r,
                corrected_curve_from(&base, mu, grid)?.entries,
            );
        }
    }
    for &rl in &cfg.run_lengths {
        push_entries(
            &mut rows,
            replicate,
            Family::Runs,
            rl,
            runs_sweep(&x, rl, cfg.k, grid)?,
        );
    }
    Ok(rows)
}

/// Reference value a summary row is compared with, where the model has one:
/// `θ_{n,t}` for the raw blocks estimator, `θ_n` for the corrected one.
pub fn oracle_value(model: &ModelSpec, family: Family, r: usize, v: f64, t: f64) -> Option<f64> {
    match family {
        Family::Blocks => theta_nt(model, r, v, t).and_then(Result::ok),
        Family::Corrected => match model {
            ModelSpec::RandomRepetition { psi, .. } => {
                bias_expansion_wn(*psi, r, v).ok().map(|b| b.theta_n)
            }
            ModelSpec::Iid { .. } => bias_expansion_wn(0.0, r, v).ok().map(|b| b.theta_n),
            ModelSpec::MovingMaxima(mm) => bias_expansion_mm(mm, r, v)
                .ok()
                .map(|(power, _)| power.theta_n),
            ModelSpec::Ar1Cauchy { .. } => None,
        },
        Family::Runs => None,
    }
}

/// Summary statistics from the per-replicate rows; sums run in replicate
/// order.
pub fn summarize(cfg: &ExperimentConfig, rows: &[CurveRow]) -> Vec<SummaryRow> {
    if rows.is_empty() {
        return Vec::new();
    }
    let layout = rows.len() / cfg.replicates;
    let v = cfg.k as f64 / cfg.n as f64;
    (0..layout)
        .map(|i| {
            let head = &rows[i];
            let values: Vec<f64> = rows
                .iter()
                .skip(i)
                .step_by(layout)
                .filter_map(|r| r.value.as_ref().ok().copied())
                .collect();
            let used = values.len();
            let oracle = oracle_value(&cfg.model, head.family, head.param, v, head.t);
            let mean = (used > 0).then(|| stats::mean(&values));
            let sd = (used > 1).then(|| stats::std_dev(&values));
            let bias = mean.zip(oracle).map(|(m, o)| m - o);
            let rmse = oracle.filter(|_| used > 0).map(|o| {
                (values.iter().map(|x| (x - o) * (x - o)).sum::<f64>() / used as f64).sqrt()
            });
            SummaryRow {
                family: head.family,
                param: head.param,
                t: head.t,
                k_t: head.k_t,
                mean,
                sd,
                oracle,
                bias,
                rmse,
                used,
                flagged: cfg.replicates - used,
            }
        })
        .collect()
}

pub fn run(cfg: &ExperimentConfig) -> AppResult<MCResult> {
    cfg.validate()?;
    let grid = cfg.t_grid.resolve(cfg.k)?;
    let per_replicate = (0..cfg.replicates)
        .into_par_iter()
        .map(|j| replicate_rows(cfg, &grid, j))
        .collect::<AppResult<Vec<_>>>()?;
    let rows: Vec<CurveRow> = per_replicate.into_iter().flatten().collect();
    let summary = summarize(cfg, &rows);
    Ok(MCResult {
        config: cfg.clone(),
        grid,
        rows,
        summary,
    })
}

#[derive(Serialize)]
struct Metadata<'a> {
    version: &'static str,
    config: &'a ExperimentConfig,
    replicates_csv: &'a str,
    summary_csv: &'a str,
    flagged_points: usize,
}

/// Writes `replicates.csv`, `summary.csv` and the `meta.json` sidecar.
pub fn write_result(result: &MCResult, dir: &Path) -> AppResult<Vec<PathBuf>> {
    let replicates = dir.join("replicates.csv");
    let mut w = csv::Writer::from_writer(io::create(&replicates)?);
    w.write_record([
        "replicate",
        "family",
        "param",
        "t",
        "k_t",
        "theta_hat",
        "flag",
    ])?;
    for r in &result.rows {
        let (value, flag) = match &r.value {
            Ok(v) => (num(*v), String::new()),
            Err(e) => (String::new(), e.code().to_owned()),
        };
        w.write_record([
            r.replicate.to_string(),
            r.family.as_str().to_owned(),
            r.param.to_string(),
            num(r.t),
            r.k_t.to_string(),
            value,
            flag,
        ])?;
    }
    w.flush().map_err(|e| AppError::io(&replicates, e))?;

    let summary = dir.join("summary.csv");
    let mut w = csv::Writer::from_writer(io::create(&summary)?);
    w.write_record([
        "family", "param", "t", "k_t", "mean", "sd", "oracle", "bias", "rmse", "used", "flagged",
    ])?;
    for s in &result.summary {
        w.write_record([
            s.family.as_str().to_owned(),
            s.param.to_string(),
            num(s.t),
            s.k_t.to_string(),
            opt(s.mean),
            opt(s.sd),
            opt(s.oracle),
            opt(s.bias),
            opt(s.rmse),
            s.used.to_string(),
            s.flagged.to_string(),
        ])?;
    }
    w.flush().map_err(|e| AppError::io(&summary, e))?;

    let meta = dir.join("meta.json");
    let body = Metadata {
        version: crate::VERSION,
        config: &result.config,
        replicates_csv: "replicates.csv",
        summary_csv: "summary.csv",
        flagged_points: result.flagged_total(),
    };
    let mut out = io::create(&meta)?;
    serde_json::to_writer_pretty(&mut out, &body).map_err(|e| AppError::Config(e.to_string()))?;
    std::io::Write::flush(&mut out).map_err(|e| AppError::io(&meta, e))?;
    Ok(vec![replicates, summary, meta])
}

/// Mean curves with sd bands for the three panels: raw blocks per `r`, runs
/// per run length, corrected per `r`.
#[derive(Debug, Clone)]
pub struct CurveBundle {
    pub blocks: Vec<SummaryRow>,
    pub runs: Vec<SummaryRow>,
    pub corrected: Vec<SummaryRow>,
}

pub fn curve_bundle(cfg: &ExperimentConfig) -> AppResult<(MCResult, CurveBundle)> {
    let result = run(cfg)?;
    let pick = |f: Family| {
        result
            .summary
            .iter()
            .filter(|s| s.family == f)
            .cloned()
            .collect()
    };
    let bundle = CurveBundle {
        blocks: pick(Family::Blocks),
        runs: pick(Family::Runs),
        corrected: pick(Family::Corrected),
    };
    Ok((result, bundle))
}

pub fn write_curve_bundle(bundle: &CurveBundle, dir: &Path) -> AppResult<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for (name, rows) in [
        ("curves_blocks.csv", &bundle.blocks),
        ("curves_runs.csv", &bundle.runs),
        ("curves_corrected.csv", &bundle.corrected),
    ] {
        let path = dir.join(name);
        let mut w = csv::Writer::from_writer(io::create(&path)?);
        w.write_record(["param", "t", "mean", "sd", "used", "flagged"])?;
        for s in rows {
            w.write_record([
                s.param.to_string(),
                num(s.t),
                opt(s.mean),
                opt(s.sd),
                s.used.to_string(),
                s.flagged.to_string(),
            ])?;
        }
        w.flush().map_err(|e| AppError::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalityRow {
    pub t: f64,
    pub oracle: f64,
    pub used: usize,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub jarque_bera: f64,
}

/// `√(nv) t (θ̂_{n,t} − θ_{n,t})` across replicates at each `t`, for the first
/// block length of the config.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalityReport {
    pub r: usize,
    pub rows: Vec<NormalityRow>,
    /// The limit kernel vanishes (iid): the statistic degenerates to 0.
    pub degenerate_limit: bool,
}

pub fn normality_check(cfg: &ExperimentConfig, ts: &[f64]) -> AppResult<NormalityReport> {
    let r = cfg.r_list[0];
    let v = cfg.k as f64 / cfg.n as f64;
    let mut probe = cfg.clone();
    probe.r_list = vec![r];
    probe.measure = None;
    probe.run_lengths.clear();
    probe.t_grid = crate::config::GridSpec::List(ts.to_vec());
    let result = run(&probe)?;
    let scale = (cfg.k as f64).sqrt();
    let rows = result
        .summary
        .iter()
        .map(|s| {
            let oracle = theta_nt(&cfg.model, r, v, s.t).ok_or_else(|| {
                AppError::Config("normality check needs a model with a closed-form oracle".into())
            })??;
            let z: Vec<f64> = result
                .rows
                .iter()
                .filter(|row| row.t == s.t)
                .filter_map(|row| row.value.as_ref().ok())
                .map(|th| scale * s.t * (th - oracle))
                .collect();
            Ok(NormalityRow {
                t: s.t,
                oracle,
                used: z.len(),
                mean: stats::mean(&z),
                variance: stats::variance(&z),
                skewness: stats::skewness(&z),
                excess_kurtosis: stats::excess_kurtosis(&z),
                jarque_bera: stats::jarque_bera(&z),
            })
        })
        .collect::<AppResult<Vec<_>>>()?;
    Ok(NormalityReport {
        r,
        rows,
        degenerate_limit: matches!(cfg.model, ModelSpec::Iid { .. }),
    })
}
