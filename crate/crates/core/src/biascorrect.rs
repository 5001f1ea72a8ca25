//! Signed measures on `(0,1]²` and the reduced-bias blocks estimator.
//!
//! For a signed measure `μ` the corrected estimator is
//! `θ̂_{n,μ} = ∫ θ̂_{n,s} θ̂_{n,t} μ(ds,dt) / ∫ (θ̂_{n,s} + θ̂_{n,t}) μ(ds,dt)`.
//! If `θ_{n,t} = θ_n + c_n t^δ` and `μ` annihilates every function of the
//! product `st` (M1) while `∫ s^δ + t^δ dμ ≠ 0` (M2), the `c_n` term cancels
//! exactly. (M3) asks `∫ (st)^{-1} |μ|(ds,dt) < ∞`.

use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by std's inherent methods when std is linked
use num_traits::Float;

use crate::clusterproc::Kernel;
use crate::error::{Error, Result};
use crate::estimate::{
    order_statistic_grid, sweep, CurveEntry, CurveVariant, EstimatorConfig, GridPoint,
    ThresholdCurve,
};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Atom {
    pub s: f64,
    pub t: f64,
    pub w: f64,
}

impl Atom {
    pub fn new(s: f64, t: f64, w: f64) -> Self {
        Self { s, t, w }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MeasureProvenance {
    TwoAtom,
    ProductConstruction,
    Custom,
}

/// Finitely many weighted atoms in `(0,1]²`.
///
/// Construction only checks the coordinates; the cancellation conditions are
/// reported by [`check_conditions`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SignedMeasureAtoms {
    atoms: Vec<Atom>,
    pub provenance: MeasureProvenance,
}

impl SignedMeasureAtoms {
    pub fn new(atoms: Vec<Atom>, provenance: MeasureProvenance) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::param("atoms", "measure has no atoms"));
        }
        for a in &atoms {
            if !(a.s > 0.0 && a.s <= 1.0 && a.t > 0.0 && a.t <= 1.0) {
                return Err(Error::param("atoms", "coordinates must lie in (0,1]"));
            }
            if !a.w.is_finite() {
                return Err(Error::param("atoms", "weights must be finite"));
            }
        }
        Ok(Self { atoms, provenance })
    }

    pub fn custom(atoms: Vec<Atom>) -> Result<Self> {
        Self::new(atoms, MeasureProvenance::Custom)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.w).sum()
    }

    pub fn total_variation(&self) -> f64 {
        self.atoms.iter().map(|a| a.w.abs()).sum()
    }

    /// `λ μ`.
    pub fn scaled_weights(&self, lambda: f64) -> Self {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom::new(a.s, a.t, lambda * a.w))
            .collect();
        Self {
            atoms,
            provenance: self.provenance,
        }
    }

    /// `μ + ν`, atoms concatenated.
    pub fn plus(&self, other: &Self) -> Self {
        let mut atoms = self.atoms.clone();
        atoms.extend_from_slice(&other.atoms);
        Self {
            atoms,
            provenance: MeasureProvenance::Custom,
        }
    }

    /// `∫ s^δ + t^δ dμ`.
    pub fn marginal_moment(&self, delta: f64) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.w * (a.s.powf(delta) + a.t.powf(delta)))
            .sum()
    }

    /// `∫ (st)^δ dμ`, zero under (M1).
    pub fn product_moment(&self, delta: f64) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.w * (a.s * a.t).powf(delta))
            .sum()
    }
}

/// `θ_{n,t} = θ_n + c_n t^δ + R_n(t)` with `sup_t t |R_n(t)| ≤ d_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BiasModel {
    pub theta_n: f64,
    pub c_n: f64,
    pub delta: f64,
    pub remainder_bound: f64,
}

impl BiasModel {
    pub fn new(theta_n: f64, c_n: f64, delta: f64, remainder_bound: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::param("delta", "must be positive"));
        }
        if !(remainder_bound >= 0.0) {
            return Err(Error::param("remainder_bound", "must be nonnegative"));
        }
        Ok(Self {
            theta_n,
            c_n,
            delta,
            remainder_bound,
        })
    }

    /// Leading part `θ_n + c_n t^δ`.
    pub fn eval(&self, t: f64) -> f64 {
        self.theta_n + self.c_n * t.powf(self.delta)
    }
}

/// `δ_{(p/a, q)} - δ_{(p, q/a)}`.
pub fn two_atom_measure(p: f64, q: f64, a: f64) -> Result<SignedMeasureAtoms> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::param("p", "must lie in (0,1]"));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::param("q", "must lie in (0,1]"));
    }
    if !(a > 1.0) || !a.is_finite() {
        return Err(Error::param("a", "must be finite and exceed 1"));
    }
    if p == q {
        // ∫ s^δ + t^δ dμ = (p^δ - q^δ)(a^{-δ} - 1) vanishes for every δ.
        return Err(Error::M2Violation { delta: 1.0 });
    }
    SignedMeasureAtoms::new(
        alloc::vec![Atom::new(p / a, q, 1.0), Atom::new(p, q / a, -1.0)],
        MeasureProvenance::TwoAtom,
    )
}

/// Density of `Q_F` on `(0,1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "family", rename_all = "snake_case"))]
pub enum DensitySpec {
    /// `f(t) ∝ t^κ`.
    Power { kappa: f64 },
}

impl DensitySpec {
    fn unnormalized(&self, t: f64) -> f64 {
        match *self {
            DensitySpec::Power { kappa } => t.powf(kappa),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            DensitySpec::Power { kappa } if kappa > 0.0 && kappa.is_finite() => Ok(()),
            DensitySpec::Power { .. } => Err(Error::param("kappa", "must be positive")),
        }
    }
}

/// `Q̂_F^{T_a} ⊗ Q̂_G - Q̂_F ⊗ Q̂_G^{T_a}` with `Q_G = Q_F^{T_b}`, `T_c(t) = t/c`,
/// and `Q̂_F` the `m`-point midpoint discretization of `Q_F`.
///
/// The atoms `(p_i/a, q_j)` and `(p_i, q_j/a)` carry equal and opposite
/// weights and share the product `p_i q_j / a`, so (M1) holds exactly.
pub fn product_measure(
    density: DensitySpec,
    a: f64,
    b: f64,
    m: usize,
) -> Result<SignedMeasureAtoms> {
    density.validate()?;
    if !(a > 1.0) || !a.is_finite() {
        return Err(Error::param("a", "must be finite and exceed 1"));
    }
    if !(b > 1.0) || !b.is_finite() {
        return Err(Error::param("b", "must be finite and exceed 1"));
    }
    if m == 0 {
        return Err(Error::param("m", "discretization needs at least one atom"));
    }
    let points: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) / m as f64).collect();
    let raw: Vec<f64> = points.iter().map(|&p| density.unnormalized(p)).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|f| f / total).collect();
    let mut atoms = Vec::with_capacity(2 * m * m);
    for (&p, &wp) in points.iter().zip(&weights) {
        for (&pg, &wq) in points.iter().zip(&weights) {
            let q = pg / b;
            atoms.push(Atom::new(p / a, q, wp * wq));
            atoms.push(Atom::new(p, q / a, -wp * wq));
        }
    }
    SignedMeasureAtoms::new(atoms, MeasureProvenance::ProductConstruction)
}

/// Default (M2) probe exponents; the exponent in use is always added.
pub const DEFAULT_DELTA_PROBE: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

const M1_PRODUCT_RTOL: f64 = 1e-9;
const M1_WEIGHT_TOL: f64 = 1e-12;
const M2_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    /// Largest `|Σ w|` over groups of atoms sharing a product `st`.
    pub m1_residual: f64,
    /// `(δ, ∫ s^δ + t^δ dμ)` for every probed exponent.
    pub m2_moments: Vec<(f64, f64)>,
    /// `Σ |w| / (st)`.
    pub m3_integral: f64,
    pub violations: Vec<Error>,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        match self.violations.into_iter().next() {
            None => Ok(()),
            Some(e) => Err(e),
        }
    }
}

/// Checks (M1)–(M3). Atoms whose products agree to a relative `1e-9` form
/// one group, and every group must carry zero net weight.
pub fn check_conditions(mu: &SignedMeasureAtoms, delta_probe: &[f64]) -> ConditionReport {
    let mut violations = Vec::new();

    let mut by_product: Vec<(f64, f64)> = mu.atoms.iter().map(|a| (a.s * a.t, a.w)).collect();
    by_product.sort_unstable_by(|x, y| x.0.total_cmp(&y.0));
    let scale = mu.total_variation().max(f64::MIN_POSITIVE);
    let mut m1_residual = 0.0f64;
    let mut i = 0;
    while i < by_product.len() {
        let anchor = by_product[i].0;
        let mut sum = 0.0;
        let mut j = i;
        while j < by_product.len() && by_product[j].0 - anchor <= M1_PRODUCT_RTOL * anchor {
            sum += by_product[j].1;
            j += 1;
        }
        m1_residual = m1_residual.max(sum.abs());
        i = j;
    }
    if m1_residual > M1_WEIGHT_TOL * scale {
        violations.push(Error::M1Violation);
    }

    let mut m2_moments = Vec::with_capacity(delta_probe.len());
    for &delta in delta_probe {
        let moment = mu.marginal_moment(delta);
        if !(moment.abs() > M2_TOL) {
            violations.push(Error::M2Violation { delta });
        }
        m2_moments.push((delta, moment));
    }

    let m3_integral: f64 = mu.atoms.iter().map(|a| a.w.abs() / (a.s * a.t)).sum();
    if !m3_integral.is_finite() {
        violations.push(Error::M3Violation);
    }

    ConditionReport {
        m1_residual,
        m2_moments,
        m3_integral,
        violations,
    }
}

/// [`DEFAULT_DELTA_PROBE`] plus `delta`.
pub fn default_probe(delta: f64) -> Vec<f64> {
    let mut probe = DEFAULT_DELTA_PROBE.to_vec();
    if !probe.contains(&delta) {
        probe.push(delta);
    }
    probe
}

/// Push-forward under `(s,t) ↦ (t0 s, t0 t)`.
pub fn scale_measure(mu: &SignedMeasureAtoms, t0: f64) -> Result<SignedMeasureAtoms> {
    if !(t0 > 0.0 && t0 <= 1.0) {
        return Err(Error::param("t0", "must lie in (0,1]"));
    }
    let atoms = mu
        .atoms
        .iter()
        .map(|a| Atom::new(t0 * a.s, t0 * a.t, a.w))
        .collect();
    SignedMeasureAtoms::new(atoms, mu.provenance)
}

/// `μ̃(A×B) = μ(A×B) + μ(B×A)`.
pub fn symmetrize(mu: &SignedMeasureAtoms) -> SignedMeasureAtoms {
    let mut atoms = mu.atoms.clone();
    atoms.extend(mu.atoms.iter().map(|a| Atom::new(a.t, a.s, a.w)));
    SignedMeasureAtoms {
        atoms,
        provenance: mu.provenance,
    }
}

/// `θ̂_{n,μ}` for the curve `evaluator`.
///
/// When `|denominator| < 1e-8 Σ|w|` the ratio is not formed; the error
/// carries `θ̂` at the largest atom coordinate as a fallback.
pub fn corrected_estimate<E>(mut evaluator: E, mu: &SignedMeasureAtoms) -> Result<f64>
where
    E: FnMut(f64) -> Result<f64>,
{
    let mut num = 0.0;
    let mut den = 0.0;
    for a in &mu.atoms {
        let ts = evaluator(a.s)?;
        let tt = evaluator(a.t)?;
        num += a.w * ts * tt;
        den += a.w * (ts + tt);
    }
    if !(den.abs() >= 1e-8 * mu.total_variation()) {
        let top = mu.atoms.iter().fold(0.0f64, |m, a| m.max(a.s).max(a.t));
        return Err(Error::DegenerateDenominator {
            fallback: evaluator(top)?,
        });
    }
    Ok(num / den)
}

/// Corrected estimate at every grid threshold `t`, using `scale_measure(mu, t)`
/// against the curve `base`. Failed points keep their error.
pub fn corrected_curve_from(
    base: &ThresholdCurve,
    mu: &SignedMeasureAtoms,
    grid: &[GridPoint],
) -> Result<ThresholdCurve> {
    let entries = grid
        .iter()
        .map(|g| CurveEntry {
            t: g.t,
            k_t: g.k_t,
            estimate: scale_measure(mu, g.t)
                .and_then(|scaled| corrected_estimate(|t| base.at(t), &scaled)),
        })
        .collect();
    Ok(ThresholdCurve {
        entries,
        variant: CurveVariant::BiasCorrected,
        config: base.config,
        n: base.n,
    })
}

/// Bias-corrected empirical-quantile curve of `x` on `grid`.
pub fn corrected_curve(
    x: &[f64],
    cfg: &EstimatorConfig,
    mu: &SignedMeasureAtoms,
    grid: &[GridPoint],
) -> Result<ThresholdCurve> {
    let base = sweep(x, cfg, &order_statistic_grid(cfg.top_k))?;
    corrected_curve_from(&base, mu, grid)
}

/// Asymptotic variance factor of `θ̂_{n,μ}`:
/// `ΣΣ w w̃ (s s̃)^δ (t t̃)^{-1} c(t,t̃) / (Σ w s^δ)²` over the atoms of the
/// symmetrized measure.
pub fn sigma2_mu<K: Kernel + ?Sized>(
    mu: &SignedMeasureAtoms,
    delta: f64,
    kernel: &K,
) -> Result<f64> {
    let sym = symmetrize(mu);
    let norm: f64 = sym.atoms.iter().map(|a| a.w * a.s.powf(delta)).sum();
    if !(norm.abs() > M2_TOL) {
        return Err(Error::ZeroNormalizer);
    }
    // The double sum factorizes over atoms sharing `t`.
    let mut by_t: Vec<(f64, f64)> = sym
        .atoms
        .iter()
        .map(|a| (a.t, a.w * a.s.powf(delta)))
        .collect();
    by_t.sort_unstable_by(|x, y| x.0.total_cmp(&y.0));
    let mut groups: Vec<(f64, f64)> = Vec::new();
    for (t, w) in by_t {
        match groups.last_mut() {
            Some(last) if last.0 == t => last.1 += w,
            _ => groups.push((t, w)),
        }
    }
    let mut num = 0.0;
    for &(t, wt) in &groups {
        for &(u, wu) in &groups {
            num += wt * wu * kernel.cov(t, u) / (t * u);
        }
    }
    Ok(num / (norm * norm))
}
