//! Blocks and runs estimators of the extremal index.
//!
//! Thresholds are indexed by `t ∈ (0,1]` through the exceedance budget
//! `k_t = ⌈k t⌉`: the empirical-quantile estimator uses the random threshold
//! `X_{n-k_t:n}`, the true-quantile estimator uses `F^←(1 - v t)` with
//! `v = k/n`.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by std's inherent methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};

/// What to do when the top order statistics contain ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TiePolicy {
    /// Report [`Error::TiesDetected`].
    #[default]
    Reject,
    /// Count exceedances strictly above the random threshold, as in the
    /// ratio definition of the estimator. Needed for models that repeat
    /// values (random repetition).
    RatioForm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EstimatorConfig {
    /// Block length `r`.
    pub block_len: usize,
    /// Exceedance budget `k = ⌈n v⌉` at `t = 1`.
    pub top_k: usize,
    /// Run length `r̃` of the runs estimator.
    #[cfg_attr(feature = "serde", serde(default))]
    pub run_length: Option<usize>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub ties: TiePolicy,
}

impl EstimatorConfig {
    pub fn new(block_len: usize, top_k: usize) -> Self {
        Self {
            block_len,
            top_k,
            run_length: None,
            ties: TiePolicy::Reject,
        }
    }

    pub fn with_ties(mut self, ties: TiePolicy) -> Self {
        self.ties = ties;
        self
    }

    pub fn with_run_length(mut self, run_length: usize) -> Self {
        self.run_length = Some(run_length);
        self
    }

    /// Checks `1 ≤ r ≤ n` and `1 ≤ k < n` for a sample of length `n`.
    pub fn check(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::EmptySeries);
        }
        if self.block_len == 0 || self.block_len > n {
            return Err(Error::param("r", "block length must satisfy 1 <= r <= n"));
        }
        if self.top_k == 0 || self.top_k >= n {
            return Err(Error::param(
                "k",
                "exceedance budget must satisfy 1 <= k < n",
            ));
        }
        if let Some(rl) = self.run_length {
            if rl == 0 || rl >= n {
                return Err(Error::param(
                    "run_length",
                    "must satisfy 1 <= run length < n",
                ));
            }
        }
        Ok(())
    }

    /// Number of complete blocks `m = ⌊n/r⌋`.
    pub fn blocks(&self, n: usize) -> usize {
        n / self.block_len
    }

    /// `v = k/n`.
    pub fn tail_fraction(&self, n: usize) -> f64 {
        self.top_k as f64 / n as f64
    }
}

/// `⌈k t⌉` for a real `t ∈ (0,1]`.
///
/// The product is nudged down by a relative `1e-12` before rounding up so
/// that `t = j/k` computed in floating point maps to `j` and not `j + 1`.
pub fn exceedance_count(k: usize, t: f64) -> Result<usize> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::ThresholdIndex(t));
    }
    let kt = k as f64 * t;
    let kt = (kt - 1e-12 * kt.max(1.0)).ceil();
    Ok((kt as usize).clamp(1, k.max(1)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridPoint {
    pub t: f64,
    pub k_t: usize,
}

/// `t_j = j/k`, one point per distinct order-statistic threshold.
pub fn order_statistic_grid(k: usize) -> Vec<GridPoint> {
    (1..=k)
        .map(|j| GridPoint {
            t: j as f64 / k as f64,
            k_t: j,
        })
        .collect()
}

/// `t_j = j/points`, with `⌈k j / points⌉` evaluated in integers.
pub fn uniform_grid(k: usize, points: usize) -> Vec<GridPoint> {
    (1..=points)
        .map(|j| GridPoint {
            t: j as f64 / points as f64,
            k_t: ((k * j).div_ceil(points)).max(1),
        })
        .collect()
}

/// Grid from explicit `t` values, which must be ascending and in `(0,1]`.
pub fn grid_from_ts(k: usize, ts: &[f64]) -> Result<Vec<GridPoint>> {
    if ts.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::param("grid", "must be strictly ascending"));
    }
    ts.iter()
        .map(|&t| {
            Ok(GridPoint {
                t,
                k_t: exceedance_count(k, t)?,
            })
        })
        .collect()
}

/// Counts `(blocks whose maximum exceeds u, exceedances of u)` over the
/// `⌊n/r⌋` complete blocks.
pub fn blocks_counts(x: &[f64], r: usize, u: f64) -> (usize, usize) {
    let m = x.len() / r.max(1);
    let mut clusters = 0;
    let mut exceedances = 0;
    for block in x[..m * r].chunks_exact(r) {
        let e = block.iter().filter(|&&v| v > u).count();
        exceedances += e;
        clusters += usize::from(e > 0);
    }
    (clusters, exceedances)
}

/// Blocks estimator at a fixed threshold `u`: blocks with an exceedance
/// divided by the number of exceedances in those blocks.
pub fn blocks_fixed(x: &[f64], r: usize, u: f64) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::EmptySeries);
    }
    if r == 0 || r > x.len() {
        return Err(Error::param("r", "block length must satisfy 1 <= r <= n"));
    }
    let (clusters, exceedances) = blocks_counts(x, r, u);
    if exceedances == 0 {
        return Err(Error::NoExceedances);
    }
    Ok(clusters as f64 / exceedances as f64)
}

/// Blocks estimator with the empirical threshold `X_{n-⌈kt⌉:n}`.
pub fn blocks_empirical(x: &[f64], cfg: &EstimatorConfig, t: f64) -> Result<f64> {
    cfg.check(x.len())?;
    let n = x.len();
    let k_t = exceedance_count(cfg.top_k, t)?;
    let mut work = x.to_vec();
    let pos = n - k_t - 1;
    let (_, &mut thr, upper) = work.select_nth_unstable_by(pos, f64::total_cmp);
    if cfg.ties == TiePolicy::Reject {
        upper.sort_unstable_by(f64::total_cmp);
        let tied = upper.first() == Some(&thr) || upper.windows(2).any(|w| w[0] == w[1]);
        if tied {
            return Err(Error::TiesDetected { count: k_t });
        }
    }
    blocks_fixed(x, cfg.block_len, thr)
}

/// Blocks estimator with the true-quantile threshold `F^←(1 - v t)`.
pub fn blocks_true_quantile<Q>(x: &[f64], cfg: &EstimatorConfig, t: f64, quantile: Q) -> Result<f64>
where
    Q: Fn(f64) -> Result<f64>,
{
    cfg.check(x.len())?;
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::ThresholdIndex(t));
    }
    let v = cfg.tail_fraction(x.len());
    let u = quantile(1.0 - v * t)?;
    blocks_fixed(x, cfg.block_len, u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CurveVariant {
    EmpiricalQuantile,
    TrueQuantile,
    BiasCorrected,
}

impl CurveVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            CurveVariant::EmpiricalQuantile => "empirical_quantile",
            CurveVariant::TrueQuantile => "true_quantile",
            CurveVariant::BiasCorrected => "bias_corrected",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveEntry {
    pub t: f64,
    pub k_t: usize,
    pub estimate: Result<f64>,
}

/// `t ↦ θ̂_{n,t}` on a grid. Failed points keep their error.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdCurve {
    pub entries: Vec<CurveEntry>,
    pub variant: CurveVariant,
    pub config: EstimatorConfig,
    pub n: usize,
}

impl ThresholdCurve {
    /// Looks up the estimate for `t` by its exceedance count `⌈kt⌉`.
    pub fn at(&self, t: f64) -> Result<f64> {
        let k_t = exceedance_count(self.config.top_k, t)?;
        let idx = self
            .entries
            .binary_search_by(|e| e.k_t.cmp(&k_t))
            .map_err(|_| Error::param("t", "curve has no entry at this exceedance count"))?;
        self.entries[idx].estimate.clone()
    }

    pub fn values(&self) -> impl Iterator<Item = Option<f64>> + '_ {
        self.entries
            .iter()
            .map(|e| e.estimate.as_ref().ok().copied())
    }
}

/// Sorted views of one sample, shared by every grid point of a sweep.
struct SweepIndex {
    sorted: Vec<f64>,
    maxima: Vec<f64>,
    tail: Vec<f64>,
    /// Largest `i` with `sorted[i] == sorted[i + 1]`.
    last_tie: Option<usize>,
}

impl SweepIndex {
    fn new(x: &[f64], r: usize) -> Self {
        let m = x.len() / r;
        let mut sorted = x.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        let mut maxima: Vec<f64> = x[..m * r]
            .chunks_exact(r)
            .map(|b| b.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        maxima.sort_unstable_by(f64::total_cmp);
        let mut tail = x[m * r..].to_vec();
        tail.sort_unstable_by(f64::total_cmp);
        let last_tie = sorted.windows(2).rposition(|w| w[0] == w[1]);
        Self {
            sorted,
            maxima,
            tail,
            last_tie,
        }
    }

    fn above(sorted: &[f64], u: f64) -> usize {
        sorted.len() - sorted.partition_point(|&v| v <= u)
    }

    fn estimate(&self, k_t: usize, ties: TiePolicy) -> Result<f64> {
        let n = self.sorted.len();
        let pos = n - k_t - 1;
        if ties == TiePolicy::Reject && self.last_tie.is_some_and(|i| i >= pos) {
            return Err(Error::TiesDetected { count: k_t });
        }
        let thr = self.sorted[pos];
        let clusters = Self::above(&self.maxima, thr);
        let exceedances = Self::above(&self.sorted, thr) - Self::above(&self.tail, thr);
        if exceedances == 0 {
            return Err(Error::NoExceedances);
        }
        Ok(clusters as f64 / exceedances as f64)
    }
}

/// Empirical-quantile blocks estimator on every grid point.
///
/// One sort of the sample and of the block maxima; each grid point is then
/// a handful of binary searches.
pub fn sweep(x: &[f64], cfg: &EstimatorConfig, grid: &[GridPoint]) -> Result<ThresholdCurve> {
    cfg.check(x.len())?;
    if grid.iter().any(|g| g.k_t == 0 || g.k_t > cfg.top_k) {
        return Err(Error::param("grid", "exceedance counts must lie in 1..=k"));
    }
    if grid.windows(2).any(|w| !(w[0].t < w[1].t)) {
        return Err(Error::param("grid", "must be strictly ascending"));
    }
    let index = SweepIndex::new(x, cfg.block_len);
    let entries = grid
        .iter()
        .map(|g| CurveEntry {
            t: g.t,
            k_t: g.k_t,
            estimate: index.estimate(g.k_t, cfg.ties),
        })
        .collect();
    Ok(ThresholdCurve {
        entries,
        variant: CurveVariant::EmpiricalQuantile,
        config: *cfg,
        n: x.len(),
    })
}

/// True-quantile blocks estimator on every grid point.
pub fn sweep_true_quantile<Q>(
    x: &[f64],
    cfg: &EstimatorConfig,
    grid: &[GridPoint],
    quantile: Q,
) -> Result<ThresholdCurve>
where
    Q: Fn(f64) -> Result<f64>,
{
    cfg.check(x.len())?;
    let entries = grid
        .iter()
        .map(|g| CurveEntry {
            t: g.t,
            k_t: g.k_t,
            estimate: blocks_true_quantile(x, cfg, g.t, &quantile),
        })
        .collect();
    Ok(ThresholdCurve {
        entries,
        variant: CurveVariant::TrueQuantile,
        config: *cfg,
        n: x.len(),
    })
}

/// Runs estimator at threshold `u`: an exceedance ends a cluster when the
/// next `run_length` observations stay at or below `u`.
pub fn runs_estimator(x: &[f64], run_length: usize, u: f64) -> Result<f64> {
    let n = x.len();
    if run_length == 0 || run_length >= n {
        return Err(Error::param(
            "run_length",
            "must satisfy 1 <= run length < n",
        ));
    }
    let mut ends = 0usize;
    let mut exceedances = 0usize;
    for i in 0..n - run_length {
        if x[i] > u {
            exceedances += 1;
            if x[i + 1..=i + run_length].iter().all(|&v| v <= u) {
                ends += 1;
            }
        }
    }
    if exceedances == 0 {
        return Err(Error::NoExceedances);
    }
    Ok(ends as f64 / exceedances as f64)
}

/// Runs estimator at the empirical thresholds `X_{n-k_t:n}` of a grid.
///
/// Observation `i` terminates a cluster at level `u` iff
/// `max(x[i+1..=i+r̃]) ≤ u < x[i]`, so with the window maxima precomputed
/// each grid point is a pair of binary searches.
pub fn runs_sweep(
    x: &[f64],
    run_length: usize,
    k: usize,
    grid: &[GridPoint],
) -> Result<Vec<CurveEntry>> {
    let n = x.len();
    if run_length == 0 || run_length >= n {
        return Err(Error::param(
            "run_length",
            "must satisfy 1 <= run length < n",
        ));
    }
    if k == 0 || k >= n {
        return Err(Error::param(
            "k",
            "exceedance budget must satisfy 1 <= k < n",
        ));
    }
    let len = n - run_length;
    // Sliding maximum over x[i+1..=i+run_length].
    let mut next_max = Vec::with_capacity(len);
    let mut window: VecDeque<usize> = VecDeque::new();
    for j in 1..n {
        while window.back().is_some_and(|&b| x[b] <= x[j]) {
            window.pop_back();
        }
        window.push_back(j);
        if j >= run_length {
            let start = j + 1 - run_length;
            while window.front().is_some_and(|&f| f < start) {
                window.pop_front();
            }
            next_max.push(x[window[0]]);
        }
    }
    debug_assert_eq!(next_max.len(), len);
    let mut heads: Vec<f64> = x[..len].to_vec();
    let mut both: Vec<f64> = heads
        .iter()
        .zip(&next_max)
        .map(|(a, b)| a.min(*b))
        .collect();
    heads.sort_unstable_by(f64::total_cmp);
    both.sort_unstable_by(f64::total_cmp);
    let mut sorted = x.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let above = |s: &[f64], u: f64| s.len() - s.partition_point(|&v| v <= u);
    Ok(grid
        .iter()
        .map(|g| {
            let estimate = if g.k_t == 0 || g.k_t >= n {
                Err(Error::param("grid", "exceedance counts must lie in 1..=k"))
            } else {
                let u = sorted[n - g.k_t - 1];
                let exceedances = above(&heads, u);
                let ends = exceedances - above(&both, u);
                if exceedances == 0 {
                    Err(Error::NoExceedances)
                } else {
                    Ok(ends as f64 / exceedances as f64)
                }
            };
            CurveEntry {
                t: g.t,
                k_t: g.k_t,
                estimate,
            }
        })
        .collect())
}
