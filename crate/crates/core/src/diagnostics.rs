//! Compactness diagnosis from finite-box evidence.
//!
//! Each criterion produces a profile over increasing radii which is
//! classified as divergent, bounded or inconclusive. A divergent profile is
//! evidence for a compact embedding, a bounded one against it. Decisions
//! hold "at scale (box, h)" only; a finite box cannot prove a limit.

use serde::{Deserialize, Serialize};

use crate::eigen::EigenOptions;
use crate::elliptic::SolverOptions;
use crate::error::{Error, Result};
use crate::geometry::Grid;
use crate::measure::{rasterize, MeasureSpec, RasterMeasure};
use crate::ptorsion::{self, POptions};
use crate::spectral::{self, ProbeShape, ProfilePoint};
use crate::torsion::{self, Equation, TorsionResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Embedding {
    L2,
    L1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Compact,
    NotCompact,
    Inconclusive,
}

impl Decision {
    pub fn is_conclusive(self) -> bool {
        self != Decision::Inconclusive
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CriterionId {
    /// Uniform decay of the torsion function at infinity.
    #[serde(rename = "T3.1")]
    TailSup,
    /// Integrability of the torsion function.
    #[serde(rename = "T3.2")]
    L1Norm,
    /// Spectral abscissa outside large balls.
    #[serde(rename = "5")]
    TailAbscissa,
    /// Ball probes for every size.
    #[serde(rename = "6")]
    EveryBall,
    /// Ball probes of one size.
    #[serde(rename = "7")]
    SomeBall,
    /// Cube quotient with natural boundary conditions.
    #[serde(rename = "8")]
    CubeQuotient,
}

impl CriterionId {
    pub fn label(self) -> &'static str {
        match self {
            CriterionId::TailSup => "T3.1",
            CriterionId::L1Norm => "T3.2",
            CriterionId::TailAbscissa => "5",
            CriterionId::EveryBall => "6",
            CriterionId::SomeBall => "7",
            CriterionId::CubeQuotient => "8",
        }
    }
}

/// Profile classification thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Divergent if `last ≥ factor·first` ...
    pub divergence_factor: f64,
    /// ... and `last ≥ floor_factor·box_mode`.
    pub divergence_floor_factor: f64,
    /// Divergent if the last three values are nondecreasing, the log-log
    /// slope of the last step is at least this ...
    pub rate_min_slope: f64,
    /// ... and `last ≥ rate_min_growth·first`.
    pub rate_min_growth: f64,
    /// Bounded if the last three values vary by at most this fraction.
    pub bounded_variation: f64,
    /// The L¹ profile has stabilized below this relative increment.
    pub l1_stabilization: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            divergence_factor: 10.0,
            divergence_floor_factor: 1e3,
            rate_min_slope: 0.25,
            rate_min_growth: 1.5,
            bounded_variation: 0.05,
            l1_stabilization: 1e-4,
        }
    }
}

impl Thresholds {
    /// Twice as demanding in every direction, for heuristic quotients.
    pub fn doubled(&self) -> Thresholds {
        Thresholds {
            divergence_factor: 2.0 * self.divergence_factor,
            divergence_floor_factor: 2.0 * self.divergence_floor_factor,
            rate_min_slope: 2.0 * self.rate_min_slope,
            rate_min_growth: 1.0 + 2.0 * (self.rate_min_growth - 1.0),
            bounded_variation: 0.5 * self.bounded_variation,
            l1_stabilization: 0.5 * self.l1_stabilization,
        }
    }
}

/// Classifies a profile as divergent (`Compact`), bounded (`NotCompact`) or
/// neither. `scale` is the box-mode reference value.
pub fn classify_divergence(profile: &[ProfilePoint], scale: f64, t: &Thresholds) -> Decision {
    let n = profile.len();
    if n == 0 {
        return Decision::Inconclusive;
    }
    let last = profile[n - 1].value;
    if last == f64::INFINITY {
        return Decision::Compact;
    }
    if n < 3 {
        return Decision::Inconclusive;
    }
    let first = profile[0].value;
    if last >= t.divergence_factor * first && last >= t.divergence_floor_factor * scale {
        return Decision::Compact;
    }
    let tail = &profile[n - 3..];
    // ties within rounding count as nondecreasing
    let nondecreasing = tail.windows(2).all(|w| w[1].value >= w[0].value * (1.0 - 1e-9));
    let (a, b) = (&tail[1], &tail[2]);
    if nondecreasing && a.value > 0.0 && b.r > a.r {
        let slope = (b.value / a.value).ln() / (b.r / a.r).ln();
        if slope >= t.rate_min_slope && last >= t.rate_min_growth * first {
            return Decision::Compact;
        }
    }
    let hi = tail.iter().map(|p| p.value).fold(f64::NEG_INFINITY, f64::max);
    let lo = tail.iter().map(|p| p.value).fold(f64::INFINITY, f64::min);
    if hi - lo <= t.bounded_variation * hi.abs().max(scale) {
        return Decision::NotCompact;
    }
    Decision::Inconclusive
}

/// Classifies an L¹ profile `(R, ∫w_R)`.
pub fn classify_l1(profile: &[ProfilePoint], t: &Thresholds) -> Decision {
    let n = profile.len();
    if n < 2 {
        return Decision::Inconclusive;
    }
    let last = profile[n - 1].value;
    let prev = profile[n - 2].value;
    if last == 0.0 || (last - prev).abs() / last.abs() < t.l1_stabilization {
        return Decision::Compact;
    }
    if n >= 3 {
        let rate = |i: usize| {
            (profile[i].value - profile[i - 1].value) / (profile[i].r / profile[i - 1].r).ln()
        };
        let (d1, d2) = (rate(n - 2), rate(n - 1));
        if d1 > 0.0 && d2 >= d1 {
            return Decision::NotCompact;
        }
    }
    Decision::Inconclusive
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: CriterionId,
    pub decision: Decision,
    /// Name of the profiled quantity.
    pub quantity: String,
    /// The classified profile.
    pub profile: Vec<ProfilePoint>,
    /// Reference scale used by the absolute thresholds.
    pub scale: f64,
    pub thresholds: Thresholds,
    /// Sub-profiles for criteria sampled at several probe sizes.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parts: Vec<CriterionReport>,
}

impl CriterionReport {
    fn divergence(id: CriterionId, quantity: &str, profile: Vec<ProfilePoint>, scale: f64, t: Thresholds) -> Self {
        CriterionReport {
            id,
            decision: classify_divergence(&profile, scale, &t),
            quantity: quantity.into(),
            profile,
            scale,
            thresholds: t,
            parts: Vec::new(),
        }
    }

    /// Recomputes the decision from the stored evidence.
    pub fn replay(&self) -> Decision {
        match self.id {
            CriterionId::L1Norm => classify_l1(&self.profile, &self.thresholds),
            CriterionId::EveryBall => combine_every(self.parts.iter().map(CriterionReport::replay)),
            _ => classify_divergence(&self.profile, self.scale, &self.thresholds),
        }
    }
}

fn combine_every(parts: impl Iterator<Item = Decision>) -> Decision {
    let parts: Vec<Decision> = parts.collect();
    if parts.is_empty() {
        Decision::Inconclusive
    } else if parts.iter().all(|&d| d == Decision::Compact) {
        Decision::Compact
    } else if parts.contains(&Decision::NotCompact) {
        Decision::NotCompact
    } else {
        Decision::Inconclusive
    }
}

/// Box and resolution a decision refers to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scale {
    pub grid: Grid,
    pub truncation_radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub embedding: Embedding,
    pub decision: Decision,
    pub criteria: Vec<CriterionReport>,
    /// All conclusive criteria agree.
    pub agreement: bool,
    pub scale: Scale,
}

/// Aggregates criterion decisions.
pub fn aggregate(criteria: &[CriterionReport]) -> (Decision, bool) {
    let pos = criteria.iter().any(|c| c.decision == Decision::Compact);
    let neg = criteria.iter().any(|c| c.decision == Decision::NotCompact);
    match (pos, neg) {
        (true, true) => (Decision::Inconclusive, false),
        (true, false) => (Decision::Compact, true),
        (false, true) => (Decision::NotCompact, true),
        (false, false) => (Decision::Inconclusive, true),
    }
}

impl Verdict {
    fn new(embedding: Embedding, criteria: Vec<CriterionReport>, scale: Scale) -> Verdict {
        let (decision, agreement) = aggregate(&criteria);
        Verdict { embedding, decision, criteria, agreement, scale }
    }

    pub fn criterion(&self, id: CriterionId) -> Option<&CriterionReport> {
        self.criteria.iter().find(|c| c.id == id)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseConfig {
    pub thresholds: Thresholds,
    /// Torsion solves at `R₀·2ᵏ` up to `0.9 × inradius`.
    pub torsion_radii: usize,
    /// Profiles at `R₀·2ᵏ` up to `profile_fraction × inradius`.
    pub profile_radii: usize,
    pub profile_fraction: f64,
    /// Ball radius for the single-size probe criterion.
    pub probe_radius: f64,
    /// Ball radii for the every-size criterion.
    pub probe_radii_every: Vec<f64>,
    /// Cube edge for the cube quotient criterion.
    pub cube_edge: f64,
    /// Upper bound on probe centers per ring.
    pub max_ring_points: usize,
    pub solver: SolverOptions,
    pub eigen: EigenOptions,
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        DiagnoseConfig {
            thresholds: Thresholds::default(),
            torsion_radii: 5,
            profile_radii: 4,
            profile_fraction: 0.5,
            probe_radius: 1.0,
            probe_radii_every: vec![0.5, 1.0, 2.0],
            cube_edge: 1.0,
            max_ring_points: 256,
            solver: SolverOptions::default(),
            // profiles need a few digits; the Rayleigh quotient converges
            // quadratically in the residual
            eigen: EigenOptions { rel_tol: 1e-7, abs_tol: 1e-7, inner_iterations: 4, ..EigenOptions::default() },
        }
    }
}

/// Geometric radii `R₀·2ᵏ`, `count` of them, ending at `fraction × inradius`.
pub fn profile_radii(grid: &Grid, count: usize, fraction: f64) -> Vec<f64> {
    let cap = fraction * grid.inradius();
    let count = count.max(1);
    (0..count).map(|k| cap / 2f64.powi((count - 1 - k) as i32)).collect()
}

/// Probe centers on the sphere `|x| = r`, spaced at most `spacing` apart
/// (up to `max_points`).
pub fn ring_centers(dim: usize, r: f64, spacing: f64, max_points: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![-r], vec![r]],
        2 => {
            let count = ((2.0 * std::f64::consts::PI * r / spacing).ceil() as usize).clamp(8, max_points);
            (0..count)
                .map(|j| {
                    let t = 2.0 * std::f64::consts::PI * j as f64 / count as f64;
                    vec![r * t.cos(), r * t.sin()]
                })
                .collect()
        }
        _ => {
            let area = 4.0 * std::f64::consts::PI * r * r;
            let count = ((area / (spacing * spacing)).ceil() as usize).clamp(14, max_points);
            let mut pts: Vec<Vec<f64>> = Vec::with_capacity(count + 6);
            for a in 0..3 {
                for s in [-1.0, 1.0] {
                    let mut p = vec![0.0; 3];
                    p[a] = s * r;
                    pts.push(p);
                }
            }
            // Fibonacci lattice
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            for j in 0..count {
                let z = 1.0 - 2.0 * (j as f64 + 0.5) / count as f64;
                let rho = (1.0 - z * z).sqrt();
                let phi = golden * j as f64;
                pts.push(vec![r * rho * phi.cos(), r * rho * phi.sin(), r * z]);
            }
            pts
        }
    }
}

/// Linear (p = 2) or p-Laplacian quantities behind the criteria.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Backend {
    Linear,
    P(f64, POptions),
}

impl Backend {
    fn p(&self) -> Option<f64> {
        match self {
            Backend::Linear => None,
            Backend::P(p, _) => Some(*p),
        }
    }

    fn torsion(&self, measure: &MeasureSpec, grid: &Grid, radii: &[f64], cfg: &DiagnoseConfig) -> Result<TorsionResult> {
        match self {
            Backend::Linear => torsion::torsion_function_with(measure, grid, radii, Equation::Characteristic, cfg.solver),
            Backend::P(p, opts) => ptorsion::p_torsion_with(measure, grid, *p, radii, opts),
        }
    }

    /// Lowest quotient on `active`, natural boundary on `natural` when given.
    fn lowest(&self, raster: &RasterMeasure, active: &[bool], natural: Option<&[bool]>, cfg: &DiagnoseConfig) -> Result<f64> {
        match self {
            Backend::Linear => spectral::lowest_on(raster, active, natural, &cfg.eigen),
            Backend::P(p, opts) => ptorsion::p_lowest_on(raster, active, natural, *p, opts),
        }
    }

    fn scale(&self, grid: &Grid) -> f64 {
        match self {
            Backend::Linear => grid.box_mode(),
            Backend::P(p, _) => grid.box_mode().powf(p / 2.0),
        }
    }

    fn thresholds(&self, cfg: &DiagnoseConfig) -> Thresholds {
        match self {
            Backend::Linear => cfg.thresholds,
            Backend::P(..) => cfg.thresholds.doubled(),
        }
    }
}

fn check_dim(measure: &MeasureSpec, grid: &Grid) -> Result<()> {
    measure.check_dim(grid.dim())
}

fn tail_sup_criterion(w: &TorsionResult, radii: &[f64], scale: f64, t: Thresholds) -> Result<CriterionReport> {
    let sup = torsion::tail_sup_profile(w, radii)?;
    let profile = sup
        .into_iter()
        .map(|(r, s)| ProfilePoint { r, value: if s > 0.0 { 1.0 / s } else { f64::INFINITY } })
        .collect();
    Ok(CriterionReport::divergence(CriterionId::TailSup, "1/sup{w(x): |x| >= R}", profile, scale, t))
}

fn tail_abscissa_criterion(
    backend: &Backend,
    raster: &RasterMeasure,
    radii: &[f64],
    cfg: &DiagnoseConfig,
) -> Result<CriterionReport> {
    let grid = raster.grid();
    let base: Vec<bool> = raster.mask().iter().map(|m| !m).collect();
    let profile = radii
        .iter()
        .map(|&r| {
            let active: Vec<bool> = (0..grid.len()).map(|i| base[i] && grid.node_radius(i) >= r).collect();
            Ok(ProfilePoint { r, value: backend.lowest(raster, &active, None, cfg)? })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CriterionReport::divergence(
        CriterionId::TailAbscissa,
        "lambda_1(mu restricted outside B_R)",
        profile,
        backend.scale(grid),
        backend.thresholds(cfg),
    ))
}

fn ring_probe_profile(
    backend: &Backend,
    raster: &RasterMeasure,
    radii: &[f64],
    size: f64,
    shape: ProbeShape,
    cfg: &DiagnoseConfig,
) -> Result<Vec<ProfilePoint>> {
    let grid = raster.grid();
    let dim = grid.dim();
    let reach = match shape {
        ProbeShape::Ball => size,
        ProbeShape::Cube => 0.5 * size * (dim as f64).sqrt(),
    };
    radii
        .iter()
        .map(|&r| {
            let spacing = match shape {
                ProbeShape::Ball => size,
                ProbeShape::Cube => 0.5 * size,
            };
            let centers = ring_centers(dim, r, spacing, cfg.max_ring_points);
            let mut best = f64::INFINITY;
            for c in &centers {
                if !grid.contains_ball(c, reach) {
                    return Err(Error::ProbeOutsideBox { center: c.clone() });
                }
                let v = probe_value(backend, raster, c, size, shape, cfg)?;
                best = best.min(v);
            }
            Ok(ProfilePoint { r, value: best })
        })
        .collect()
}

fn probe_value(
    backend: &Backend,
    raster: &RasterMeasure,
    c: &[f64],
    size: f64,
    shape: ProbeShape,
    cfg: &DiagnoseConfig,
) -> Result<f64> {
    match shape {
        ProbeShape::Ball => backend.lowest(raster, &spectral::ball_active(raster, c, size), None, cfg),
        ProbeShape::Cube => {
            let (inside, active) = spectral::cube_sets(raster, c, size);
            backend.lowest(raster, &active, Some(&inside), cfg)
        }
    }
}

fn ball_probe_criterion(
    backend: &Backend,
    raster: &RasterMeasure,
    radii: &[f64],
    size: f64,
    cfg: &DiagnoseConfig,
) -> Result<CriterionReport> {
    let profile = ring_probe_profile(backend, raster, radii, size, ProbeShape::Ball, cfg)?;
    Ok(CriterionReport::divergence(
        CriterionId::SomeBall,
        &format!("min over |x| = R of lambda_1(mu restricted to B_{size}(x))"),
        profile,
        backend.scale(raster.grid()),
        backend.thresholds(cfg),
    ))
}

fn every_ball_criterion(
    backend: &Backend,
    raster: &RasterMeasure,
    radii: &[f64],
    cfg: &DiagnoseConfig,
) -> Result<CriterionReport> {
    let parts = cfg
        .probe_radii_every
        .iter()
        .map(|&s| ball_probe_criterion(backend, raster, radii, s, cfg))
        .collect::<Result<Vec<_>>>()?;
    let decision = combine_every(parts.iter().map(|p| p.decision));
    Ok(CriterionReport {
        id: CriterionId::EveryBall,
        decision,
        quantity: "ball probes at every sampled size".into(),
        profile: Vec::new(),
        scale: backend.scale(raster.grid()),
        thresholds: backend.thresholds(cfg),
        parts,
    })
}

fn cube_criterion(
    backend: &Backend,
    raster: &RasterMeasure,
    radii: &[f64],
    cfg: &DiagnoseConfig,
) -> Result<CriterionReport> {
    let profile = ring_probe_profile(backend, raster, radii, cfg.cube_edge, ProbeShape::Cube, cfg)?;
    Ok(CriterionReport::divergence(
        CriterionId::CubeQuotient,
        "min over cubes centered on |x| = R of the natural-boundary quotient",
        profile,
        backend.scale(raster.grid()),
        backend.thresholds(cfg),
    ))
}

fn l1_criterion(w: &TorsionResult, t: Thresholds) -> CriterionReport {
    let profile: Vec<ProfilePoint> =
        torsion::l1_profile(w).into_iter().map(|(r, value)| ProfilePoint { r, value }).collect();
    CriterionReport {
        id: CriterionId::L1Norm,
        decision: classify_l1(&profile, &t),
        quantity: "integral of w restricted to B_R".into(),
        profile,
        scale: 0.0,
        thresholds: t,
        parts: Vec::new(),
    }
}

fn scale_of(grid: &Grid, backend: &Backend) -> Scale {
    Scale { grid: grid.clone(), truncation_radius: grid.inradius(), p: backend.p() }
}

fn check_probe_room(grid: &Grid, cfg: &DiagnoseConfig, radii: &[f64], sizes: &[f64]) -> Result<()> {
    let last = radii.last().copied().unwrap_or(0.0);
    let limit = grid.inradius();
    for &s in sizes {
        if last + s > limit {
            return Err(Error::RadiusOutsideBox { radius: last + s, limit });
        }
    }
    let _ = cfg;
    Ok(())
}

pub(crate) fn diagnose_l2_with(backend: Backend, measure: &MeasureSpec, grid: &Grid, cfg: &DiagnoseConfig) -> Result<Verdict> {
    check_dim(measure, grid)?;
    let raster = rasterize(measure, grid)?;
    let radii = profile_radii(grid, cfg.profile_radii, cfg.profile_fraction);
    check_probe_room(grid, cfg, &radii, &[cfg.probe_radius])?;
    let t_radii = torsion::default_radii(grid, cfg.torsion_radii);
    let scale = backend.scale(grid);
    let t = backend.thresholds(cfg);
    let (c1, (c5, c7)) = rayon::join(
        || -> Result<CriterionReport> {
            let w = backend.torsion(measure, grid, &t_radii, cfg)?;
            tail_sup_criterion(&w, &radii, scale, t)
        },
        || {
            rayon::join(
                || tail_abscissa_criterion(&backend, &raster, &radii, cfg),
                || ball_probe_criterion(&backend, &raster, &radii, cfg.probe_radius, cfg),
            )
        },
    );
    Ok(Verdict::new(Embedding::L2, vec![c1?, c5?, c7?], scale_of(grid, &backend)))
}

pub(crate) fn diagnose_l1_with(backend: Backend, measure: &MeasureSpec, grid: &Grid, cfg: &DiagnoseConfig) -> Result<Verdict> {
    check_dim(measure, grid)?;
    let t_radii = torsion::default_radii(grid, cfg.torsion_radii);
    let w = backend.torsion(measure, grid, &t_radii, cfg)?;
    let c = l1_criterion(&w, backend.thresholds(cfg));
    Ok(Verdict::new(Embedding::L1, vec![c], scale_of(grid, &backend)))
}

/// Evaluates one criterion of the linear problem.
pub fn run_criterion(id: CriterionId, measure: &MeasureSpec, grid: &Grid, cfg: &DiagnoseConfig) -> Result<CriterionReport> {
    check_dim(measure, grid)?;
    let backend = Backend::Linear;
    let radii = profile_radii(grid, cfg.profile_radii, cfg.profile_fraction);
    let torsion = || backend.torsion(measure, grid, &torsion::default_radii(grid, cfg.torsion_radii), cfg);
    match id {
        CriterionId::TailSup => tail_sup_criterion(&torsion()?, &radii, backend.scale(grid), cfg.thresholds),
        CriterionId::L1Norm => Ok(l1_criterion(&torsion()?, cfg.thresholds)),
        _ => {
            let raster = rasterize(measure, grid)?;
            match id {
                CriterionId::TailAbscissa => tail_abscissa_criterion(&backend, &raster, &radii, cfg),
                CriterionId::EveryBall => {
                    check_probe_room(grid, cfg, &radii, &cfg.probe_radii_every)?;
                    every_ball_criterion(&backend, &raster, &radii, cfg)
                }
                CriterionId::SomeBall => {
                    check_probe_room(grid, cfg, &radii, &[cfg.probe_radius])?;
                    ball_probe_criterion(&backend, &raster, &radii, cfg.probe_radius, cfg)
                }
                _ => {
                    check_probe_room(grid, cfg, &radii, &[0.5 * cfg.cube_edge * (grid.dim() as f64).sqrt()])?;
                    cube_criterion(&backend, &raster, &radii, cfg)
                }
            }
        }
    }
}

/// L² compactness from the tail of `w_μ`, the tail abscissa and ball probes.
pub fn diagnose_l2(measure: &MeasureSpec, grid: &Grid, config: &DiagnoseConfig) -> Result<Verdict> {
    diagnose_l2_with(Backend::Linear, measure, grid, config)
}

/// L¹ embedding from the integrability of `w_μ`.
pub fn diagnose_l1(measure: &MeasureSpec, grid: &Grid, config: &DiagnoseConfig) -> Result<Verdict> {
    diagnose_l1_with(Backend::Linear, measure, grid, config)
}

/// Every implemented criterion with its pairwise agreement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub l2: Verdict,
    pub l1: Verdict,
    /// Criterion labels, in the order of the matrix rows.
    pub ids: Vec<CriterionId>,
    /// `Some(agree)` for pairs of conclusive criteria, `None` otherwise.
    pub matrix: Vec<Vec<Option<bool>>>,
    /// All conclusive L² criteria agree.
    pub agreement: bool,
}

/// Runs criteria T3.1, 5, 6, 7, 8 and T3.2 on the same measure.
pub fn cross_check(measure: &MeasureSpec, grid: &Grid, config: &DiagnoseConfig) -> Result<CrossCheck> {
    check_dim(measure, grid)?;
    let backend = Backend::Linear;
    let raster = rasterize(measure, grid)?;
    let cfg = config;
    let radii = profile_radii(grid, cfg.profile_radii, cfg.profile_fraction);
    let mut sizes = cfg.probe_radii_every.clone();
    sizes.push(cfg.probe_radius);
    sizes.push(0.5 * cfg.cube_edge * (grid.dim() as f64).sqrt());
    check_probe_room(grid, cfg, &radii, &sizes)?;
    let t_radii = torsion::default_radii(grid, cfg.torsion_radii);
    let w = backend.torsion(measure, grid, &t_radii, cfg)?;
    let scale = backend.scale(grid);
    let t = backend.thresholds(cfg);
    let c1 = tail_sup_criterion(&w, &radii, scale, t)?;
    let ((c5, c6), (c7, c8)) = rayon::join(
        || {
            rayon::join(
                || tail_abscissa_criterion(&backend, &raster, &radii, cfg),
                || every_ball_criterion(&backend, &raster, &radii, cfg),
            )
        },
        || {
            rayon::join(
                || ball_probe_criterion(&backend, &raster, &radii, cfg.probe_radius, cfg),
                || cube_criterion(&backend, &raster, &radii, cfg),
            )
        },
    );
    let l2 = Verdict::new(Embedding::L2, vec![c1, c5?, c6?, c7?, c8?], scale_of(grid, &backend));
    let l1 = Verdict::new(Embedding::L1, vec![l1_criterion(&w, t)], scale_of(grid, &backend));
    let ids: Vec<CriterionId> = l2.criteria.iter().map(|c| c.id).collect();
    let matrix = l2
        .criteria
        .iter()
        .map(|a| {
            l2.criteria
                .iter()
                .map(|b| {
                    (a.decision.is_conclusive() && b.decision.is_conclusive()).then(|| a.decision == b.decision)
                })
                .collect()
        })
        .collect();
    let agreement = l2.agreement;
    Ok(CrossCheck { l2, l1, ids, matrix, agreement })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prof(values: &[f64]) -> Vec<ProfilePoint> {
        values
            .iter()
            .enumerate()
            .map(|(k, &value)| ProfilePoint { r: 2f64.powi(k as i32), value })
            .collect()
    }

    #[test]
    fn classifier_rules() {
        let t = Thresholds::default();
        assert_eq!(classify_divergence(&prof(&[1.0, 1.01, 1.0, 1.02]), 0.1, &t), Decision::NotCompact);
        assert_eq!(classify_divergence(&prof(&[1.0, 30.0, 500.0, 2e3]), 0.1, &t), Decision::Compact);
        assert_eq!(classify_divergence(&prof(&[1.0, 2.0, f64::INFINITY]), 0.1, &t), Decision::Compact);
        // steady power-law growth below the strong rule
        assert_eq!(classify_divergence(&prof(&[1.0, 1.4, 2.0, 2.8]), 0.1, &t), Decision::Compact);
        // slow drift: neither
        assert_eq!(classify_divergence(&prof(&[1.0, 1.05, 1.1, 1.16]), 0.1, &t), Decision::Inconclusive);
        assert_eq!(classify_divergence(&prof(&[1.0, 2.0]), 0.1, &t), Decision::Inconclusive);
    }

    #[test]
    fn l1_rules() {
        let t = Thresholds::default();
        assert_eq!(classify_l1(&prof(&[0.07, 0.0758, 0.0758]), &t), Decision::Compact);
        assert_eq!(classify_l1(&prof(&[2.0, 4.0, 8.0]), &t), Decision::NotCompact);
        assert_eq!(classify_l1(&prof(&[2.0, 3.0, 3.5]), &t), Decision::Inconclusive);
    }

    #[test]
    fn aggregation() {
        let mk = |d| CriterionReport {
            id: CriterionId::TailSup,
            decision: d,
            quantity: String::new(),
            profile: vec![],
            scale: 0.0,
            thresholds: Thresholds::default(),
            parts: vec![],
        };
        use Decision::*;
        assert_eq!(aggregate(&[mk(Compact), mk(Inconclusive)]), (Compact, true));
        assert_eq!(aggregate(&[mk(Compact), mk(NotCompact)]), (Inconclusive, false));
        assert_eq!(aggregate(&[mk(NotCompact)]), (NotCompact, true));
        assert_eq!(aggregate(&[mk(Inconclusive)]), (Inconclusive, true));
    }

    #[test]
    fn rings_are_dense_enough() {
        let c = ring_centers(2, 5.0, 1.0, 1000);
        let step = 2.0 * std::f64::consts::PI * 5.0 / c.len() as f64;
        assert!(step <= 1.0);
        assert_eq!(ring_centers(1, 2.0, 1.0, 10), vec![vec![-2.0], vec![2.0]]);
        for p in ring_centers(3, 2.0, 1.0, 100) {
            let r: f64 = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((r - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn profile_radii_end_at_the_fraction() {
        let g = Grid::new(&[-8.0, -8.0], &[8.0, 8.0], 0.5).unwrap();
        let r = profile_radii(&g, 4, 0.5);
        assert_eq!(r, vec![0.5, 1.0, 2.0, 4.0]);
    }
}
