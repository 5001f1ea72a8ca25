//! Empirical cluster process of standardized excesses.
//!
//! With `U_i` uniform near 1, the standardized excesses are
//! `U_{n,i} = (U_i - (1-v))⁺ / v ∈ [0,1]`, grouped into blocks of length
//! `r`. The blocks estimator is the ratio of the block functionals
//! `f_t(y) = 1{max y_i > 1-t}` and `g_t(y) = Σ 1{y_i > 1-t}`, and the
//! processes `Z_n(h) = (nv)^{-1/2} Σ_j (h(Y_j) - E h(Y_j))` drive its
//! fluctuations across thresholds.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by std's inherent methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::estimate::EstimatorConfig;
use crate::sim::{generate_stream, ModelSpec};
use crate::stats;

/// Standardized excesses of one block, each in `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedBlock {
    pub excesses: Vec<f64>,
}

/// How the uniform scores `U_i` are obtained.
pub enum Standardization<'a> {
    /// `U_i = 1 - F̄(X_i)` from a known marginal survival function.
    Marginal(&'a dyn Fn(f64) -> f64),
    /// `U_i = rank_i / n` with `rank_i = 1 + #{j : X_j < X_i}`. The
    /// exceedance sets then coincide with the empirical-quantile estimator.
    Rank,
    /// Known-marginal mode requested but no marginal available.
    MarginalUnavailable,
}

/// Splits `x` into `⌊n/r⌋` blocks of standardized excesses with `v = k/n`.
pub fn standardize(
    x: &[f64],
    cfg: &EstimatorConfig,
    mode: &Standardization<'_>,
) -> Result<Vec<StandardizedBlock>> {
    cfg.check(x.len())?;
    let n = x.len();
    let r = cfg.block_len;
    let m = cfg.blocks(n);
    let k = cfg.top_k;
    let excess: Vec<f64> = match mode {
        Standardization::Marginal(survival) => {
            let v = cfg.tail_fraction(n);
            x[..m * r]
                .iter()
                .map(|&xi| (1.0 - survival(xi) / v).max(0.0))
                .collect()
        }
        Standardization::Rank => {
            let mut sorted = x.to_vec();
            sorted.sort_unstable_by(f64::total_cmp);
            // (rank - (n-k))⁺ / k, exact in the integers.
            x[..m * r]
                .iter()
                .map(|&xi| {
                    let rank = 1 + sorted.partition_point(|&s| s < xi);
                    rank.saturating_sub(n - k) as f64 / k as f64
                })
                .collect()
        }
        Standardization::MarginalUnavailable => return Err(Error::MissingMarginal),
    };
    Ok(excess
        .chunks_exact(r)
        .map(|c| StandardizedBlock {
            excesses: c.to_vec(),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FunctionalKind {
    /// `f_t`: does the block exceed `1-t`.
    FMax,
    /// `g_t`: how many entries exceed `1-t`.
    GCount,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterFunctional {
    pub kind: FunctionalKind,
    pub t: f64,
}

impl ClusterFunctional {
    pub fn f(t: f64) -> Self {
        Self {
            kind: FunctionalKind::FMax,
            t,
        }
    }

    pub fn g(t: f64) -> Self {
        Self {
            kind: FunctionalKind::GCount,
            t,
        }
    }
}

/// `e > 1 - t`, with differences below `1e-12` read as equality so that
/// rank excesses `a/k` at `t = j/k` split exactly where the order statistics do.
fn exceeds(e: f64, t: f64) -> bool {
    e - (1.0 - t) > 1e-12
}

pub fn eval_functional(h: ClusterFunctional, block: &StandardizedBlock) -> f64 {
    match h.kind {
        FunctionalKind::FMax => {
            f64::from(u8::from(block.excesses.iter().any(|&e| exceeds(e, h.t))))
        }
        FunctionalKind::GCount => {
            block.excesses.iter().filter(|&&e| exceeds(e, h.t)).count() as f64
        }
    }
}

/// `Σ_j h_t(Y_j)` for every `t` in `grid`, for both functionals at once.
fn functional_sums(blocks: &[StandardizedBlock], grid: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut f = vec![0.0; grid.len()];
    let mut g = vec![0.0; grid.len()];
    for block in blocks {
        let mut peak = 0.0f64;
        for &e in block.excesses.iter().filter(|&&e| e > 0.0) {
            peak = peak.max(e);
            for (gi, &t) in g.iter_mut().zip(grid) {
                if exceeds(e, t) {
                    *gi += 1.0;
                }
            }
        }
        if peak > 0.0 {
            for (fi, &t) in f.iter_mut().zip(grid) {
                if exceeds(peak, t) {
                    *fi += 1.0;
                }
            }
        }
    }
    (f, g)
}

/// Source of `E h_t(Y_{n,1})`.
pub enum Centering<'a> {
    /// Closed-form expectation as a function of `t`.
    ModelOracle(&'a dyn Fn(f64) -> f64),
    /// Cross-replicate mean of `h_t(Y_{n,1})`, one value per grid point.
    MonteCarlo { means: &'a [f64], replicates: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CenteringKind {
    ModelOracle,
    MonteCarloMean,
}

/// One realisation of `t ↦ Z_n(h_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessPath {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub centering: CenteringKind,
}

/// `Z_n(h_t) = (nv)^{-1/2} Σ_j (h_t(Y_j) - E h_t(Y_1))` on `grid`.
///
/// `nv` is `k`, the expected number of exceedances at `t = 1`.
pub fn process_path(
    blocks: &[StandardizedBlock],
    kind: FunctionalKind,
    grid: &[f64],
    centering: &Centering<'_>,
    nv: f64,
) -> Result<ProcessPath> {
    let expected: Vec<f64> = match centering {
        Centering::ModelOracle(e) => grid.iter().map(|&t| e(t)).collect(),
        Centering::MonteCarlo { means, replicates } => {
            if *replicates < 2 {
                return Err(Error::CenteringUnavailable(
                    "a single replicate would be centered by its own mean",
                ));
            }
            if means.len() != grid.len() {
                return Err(Error::CenteringUnavailable(
                    "one mean per grid point required",
                ));
            }
            means.to_vec()
        }
    };
    let (f, g) = functional_sums(blocks, grid);
    let sums = match kind {
        FunctionalKind::FMax => f,
        FunctionalKind::GCount => g,
    };
    let m = blocks.len() as f64;
    let scale = 1.0 / nv.sqrt();
    let values = sums
        .iter()
        .zip(&expected)
        .map(|(s, e)| scale * (s - m * e))
        .collect();
    Ok(ProcessPath {
        grid: grid.to_vec(),
        values,
        centering: match centering {
            Centering::ModelOracle(_) => CenteringKind::ModelOracle,
            Centering::MonteCarlo { .. } => CenteringKind::MonteCarloMean,
        },
    })
}

/// Anything that can serve as the covariance `c(s,t)` of the limit process.
pub trait Kernel {
    fn cov(&self, s: f64, t: f64) -> f64;
}

impl<F: Fn(f64, f64) -> f64> Kernel for F {
    fn cov(&self, s: f64, t: f64) -> f64 {
        self(s, t)
    }
}

/// Limit covariances `c_g`, `c_fg` and `c` of the cluster process.
#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceKernel {
    /// Independent observations: `c_g = c_fg = s∧t`, `θ = 1`, `c ≡ 0`.
    ClosedFormIid,
    TailChain(TailChainKernel),
    McGrid(GridKernel),
}

impl CovarianceKernel {
    pub fn theta(&self) -> f64 {
        match self {
            CovarianceKernel::ClosedFormIid => 1.0,
            CovarianceKernel::TailChain(k) => k.theta,
            CovarianceKernel::McGrid(k) => k.theta,
        }
    }

    pub fn c(&self, s: f64, t: f64) -> f64 {
        match self {
            CovarianceKernel::ClosedFormIid => {
                let theta = self.theta();
                theta * (s.min(t) - self.c_fg(s, t) - self.c_fg(t, s))
                    + theta * theta * self.c_g(s, t)
            }
            CovarianceKernel::TailChain(k) => k.c(s, t),
            CovarianceKernel::McGrid(k) => GridKernel::bilinear(&k.grid, &k.c, s, t),
        }
    }

    pub fn c_g(&self, s: f64, t: f64) -> f64 {
        match self {
            CovarianceKernel::ClosedFormIid => s.min(t),
            CovarianceKernel::TailChain(k) => k.c_g(s, t),
            CovarianceKernel::McGrid(k) => GridKernel::bilinear(&k.grid, &k.c_g, s, t),
        }
    }

    pub fn c_fg(&self, s: f64, t: f64) -> f64 {
        match self {
            CovarianceKernel::ClosedFormIid => s.min(t),
            CovarianceKernel::TailChain(k) => k.c_fg(s, t),
            CovarianceKernel::McGrid(k) => GridKernel::bilinear(&k.grid, &k.c_fg, s, t),
        }
    }
}

impl Kernel for CovarianceKernel {
    fn cov(&self, s: f64, t: f64) -> f64 {
        self.c(s, t)
    }
}

/// Covariances tabulated on a grid; evaluated bilinearly with an implicit
/// zero row and column at `t = 0` and clamped beyond the last node.
#[derive(Debug, Clone, PartialEq)]
pub struct GridKernel {
    pub grid: Vec<f64>,
    /// Row-major `grid.len()²` matrices.
    pub c: Vec<f64>,
    pub c_g: Vec<f64>,
    pub c_fg: Vec<f64>,
    pub theta: f64,
    pub replicates: usize,
}

impl GridKernel {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.c[i * self.grid.len() + j]
    }

    fn bilinear(grid: &[f64], values: &[f64], s: f64, t: f64) -> f64 {
        let p = grid.len();
        let node = |i: usize| if i == 0 { 0.0 } else { grid[i - 1] };
        let value = |i: usize, j: usize| {
            if i == 0 || j == 0 {
                0.0
            } else {
                values[(i - 1) * p + (j - 1)]
            }
        };
        let locate = |x: f64| -> (usize, f64) {
            let x = x.max(0.0).min(grid[p - 1]);
            let hi = (1 + grid.partition_point(|&g| g < x)).min(p).max(1);
            let (a, b) = (node(hi - 1), node(hi));
            let w = if b > a { (x - a) / (b - a) } else { 1.0 };
            (hi, w)
        };
        let (i, ws) = locate(s);
        let (j, wt) = locate(t);
        (1.0 - ws) * (1.0 - wt) * value(i - 1, j - 1)
            + ws * (1.0 - wt) * value(i, j - 1)
            + (1.0 - ws) * wt * value(i - 1, j)
            + ws * wt * value(i, j)
    }
}

/// Monte Carlo estimate of the kernel on a grid.
///
/// Each replicate is standardized with the model's true marginal, the
/// processes `Z_n(f_t)`, `Z_n(g_t)` are centered by their cross-replicate
/// means, and `c` is the empirical covariance of `Z_f - θ̂ Z_g`, with `θ̂`
/// the mean blocks estimate at `t = 1`.
pub fn estimate_kernel_mc(
    model: &ModelSpec,
    cfg: &EstimatorConfig,
    n: usize,
    grid: &[f64],
    replicates: usize,
    seed: u64,
) -> Result<GridKernel> {
    const MIN_REPLICATES: usize = 100;
    if replicates < MIN_REPLICATES {
        return Err(Error::TooFewReplicates {
            needed: MIN_REPLICATES,
            got: replicates,
        });
    }
    cfg.check(n)?;
    if grid.is_empty()
        || grid.iter().any(|&t| !(t > 0.0 && t <= 1.0))
        || grid.windows(2).any(|w| !(w[0] < w[1]))
    {
        return Err(Error::param("grid", "must be ascending within (0,1]"));
    }
    let p = grid.len();
    let nv = cfg.top_k as f64;
    let survival = |x: f64| model.marginal_survival(x);
    let mut f_sums = Vec::with_capacity(replicates);
    let mut g_sums = Vec::with_capacity(replicates);
    let mut thetas = Vec::with_capacity(replicates);
    for rep in 0..replicates {
        let x = generate_stream(model, n, seed, rep as u64, 0)?;
        let blocks = standardize(&x.values, cfg, &Standardization::Marginal(&survival))?;
        let (f, g) = functional_sums(&blocks, grid);
        let (f1, g1) = functional_sums(&blocks, &[1.0]);
        if g1[0] > 0.0 {
            thetas.push(f1[0] / g1[0]);
        }
        f_sums.push(f);
        g_sums.push(g);
    }
    let theta = stats::mean(&thetas);
    let column = |rows: &[Vec<f64>], i: usize| -> Vec<f64> {
        rows.iter().map(|r| r[i] / nv.sqrt()).collect()
    };
    let zf: Vec<Vec<f64>> = (0..p).map(|i| column(&f_sums, i)).collect();
    let zg: Vec<Vec<f64>> = (0..p).map(|i| column(&g_sums, i)).collect();
    let z: Vec<Vec<f64>> = (0..p)
        .map(|i| {
            zf[i]
                .iter()
                .zip(&zg[i])
                .map(|(a, b)| a - theta * b)
                .collect()
        })
        .collect();
    let mut c = vec![0.0; p * p];
    let mut c_g = vec![0.0; p * p];
    let mut c_fg = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..p {
            if j >= i {
                let cij = stats::covariance(&z[i], &z[j]);
                let gij = stats::covariance(&zg[i], &zg[j]);
                c[i * p + j] = cij;
                c[j * p + i] = cij;
                c_g[i * p + j] = gij;
                c_g[j * p + i] = gij;
            }
            c_fg[i * p + j] = stats::covariance(&zf[i], &zg[j]);
        }
    }
    Ok(GridKernel {
        grid: grid.to_vec(),
        c,
        c_g,
        c_fg,
        theta,
        replicates,
    })
}

/// Kernel assembled from the tail chain: windows of standardized excesses
/// `(W_1, …, W_K)` that start at an exceedance of the `(1-v)` quantile.
#[derive(Debug, Clone, PartialEq)]
pub struct TailChainKernel {
    /// Row-major windows, `window` entries each.
    windows: Vec<f64>,
    window: usize,
    pub theta: f64,
}

impl TailChainKernel {
    pub fn from_windows(windows: Vec<f64>, window: usize) -> Result<Self> {
        if window < 2 {
            return Err(Error::param("window", "truncation K must be at least 2"));
        }
        if !windows.len().is_multiple_of(window) {
            return Err(Error::param(
                "windows",
                "length must be a multiple of the window",
            ));
        }
        let mut kernel = Self {
            windows,
            window,
            theta: 0.0,
        };
        kernel.theta = kernel.estimate_theta();
        Ok(kernel)
    }

    pub fn window_count(&self) -> usize {
        self.windows.len() / self.window
    }

    pub fn window_len(&self) -> usize {
        self.window
    }

    fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.windows.chunks_exact(self.window)
    }

    /// Fraction of windows with no further exceedance after the first.
    fn estimate_theta(&self) -> f64 {
        let none = self
            .rows()
            .filter(|w| w[1..].iter().all(|&e| e <= 0.0))
            .count();
        none as f64 / self.window_count() as f64
    }

    /// Same windows cut to the first `window` entries.
    pub fn truncated(&self, window: usize) -> Result<Self> {
        if window > self.window {
            return Err(Error::param("window", "cannot extend a truncated chain"));
        }
        let windows = self
            .rows()
            .flat_map(|w| w[..window].iter().copied())
            .collect();
        let mut k = Self::from_windows(windows, window)?;
        k.theta = self.theta;
        Ok(k)
    }

    fn mean_of<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        self.rows().map(f).sum::<f64>() / self.window_count() as f64
    }

    /// `P{W_1 > 1-s, W_k > 1-t}` for `k ≥ 2` (0-based `k - 1`).
    pub fn joint_exceedance(&self, k: usize, s: f64, t: f64) -> f64 {
        self.mean_of(|w| f64::from(u8::from(w[0] > 1.0 - s && w[k - 1] > 1.0 - t)))
    }

    /// `s∧t + Σ_{k=2}^{K} (P{W_1>1-s, W_k>1-t} + P{W_1>1-t, W_k>1-s})`.
    pub fn c_g(&self, s: f64, t: f64) -> f64 {
        let (ls, lt) = (1.0 - s, 1.0 - t);
        let tail = self.mean_of(|w| {
            let mut acc = 0.0;
            for &wk in &w[1..] {
                if w[0] > ls && wk > lt {
                    acc += 1.0;
                }
                if w[0] > lt && wk > ls {
                    acc += 1.0;
                }
            }
            acc
        });
        s.min(t) + tail
    }

    /// `t` for `s ≥ t`; otherwise
    /// `P{W_1>1-t, max_{j≥1} W_j>1-s} + Σ_{k≥2} P{W_1>1-s, W_k>1-t, max_{j≥2} W_j ≤ 1-s}`.
    pub fn c_fg(&self, s: f64, t: f64) -> f64 {
        if s >= t {
            return t;
        }
        let (ls, lt) = (1.0 - s, 1.0 - t);
        self.mean_of(|w| {
            let later_max = w[1..].iter().copied().fold(0.0, f64::max);
            let first = f64::from(u8::from(w[0] > lt && w[0].max(later_max) > ls));
            let rest = if w[0] > ls && later_max <= ls {
                w[1..].iter().filter(|&&wk| wk > lt).count() as f64
            } else {
                0.0
            };
            first + rest
        })
    }

    /// `θ (s∧t - c_fg(s,t) - c_fg(t,s)) + θ² c_g(s,t)`.
    pub fn c(&self, s: f64, t: f64) -> f64 {
        let th = self.theta;
        th * (s.min(t) - self.c_fg(s, t) - self.c_fg(t, s)) + th * th * self.c_g(s, t)
    }

    /// Tabulates the kernel on a grid for fast repeated evaluation.
    pub fn to_grid(&self, grid: &[f64]) -> GridKernel {
        let p = grid.len();
        let mut c = vec![0.0; p * p];
        let mut c_g = vec![0.0; p * p];
        let mut c_fg = vec![0.0; p * p];
        for (i, &s) in grid.iter().enumerate() {
            for (j, &t) in grid.iter().enumerate() {
                c[i * p + j] = self.c(s, t);
                c_g[i * p + j] = self.c_g(s, t);
                c_fg[i * p + j] = self.c_fg(s, t);
            }
        }
        GridKernel {
            grid: grid.to_vec(),
            c,
            c_g,
            c_fg,
            theta: self.theta,
            replicates: self.window_count(),
        }
    }
}

/// Collects tail-chain windows from simulated series and assembles the
/// series of joint exceedance probabilities truncated at `window`.
///
/// A window starts at every index whose standardized excess is positive and
/// has `window - 1` observations after it.
pub fn tail_chain_probabilities(
    model: &ModelSpec,
    n: usize,
    v: f64,
    window: usize,
    replicates: usize,
    seed: u64,
) -> Result<TailChainKernel> {
    const MIN_WINDOWS: usize = 50;
    if window < 2 {
        return Err(Error::param("window", "truncation K must be at least 2"));
    }
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::param("v", "must lie in (0,1)"));
    }
    let mut windows = Vec::new();
    for rep in 0..replicates {
        let x = generate_stream(model, n, seed, rep as u64, 0)?;
        let excess: Vec<f64> = x
            .values
            .iter()
            .map(|&xi| (1.0 - model.marginal_survival(xi) / v).max(0.0))
            .collect();
        for start in 0..excess.len().saturating_sub(window - 1) {
            if excess[start] > 0.0 {
                windows.extend_from_slice(&excess[start..start + window]);
            }
        }
    }
    let got = windows.len() / window;
    if got < MIN_WINDOWS {
        return Err(Error::TooFewWindows {
            needed: MIN_WINDOWS,
            got,
        });
    }
    TailChainKernel::from_windows(windows, window)
}
