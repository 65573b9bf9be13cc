//! Minimization of `λ_k` under a rigidity constraint over finite unions of
//! balls, by a seeded genetic algorithm.
//!
//! Both functionals are homogeneous (`P(tΩ) = t^{N+2} P(Ω)`,
//! `λ_k(tΩ) = t^{-2} λ_k(Ω)`), so the constraint `P = c` is removed by
//! dilation and the search runs on scale-normalized configurations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::EigenOptions;
use crate::elliptic::SolverOptions;
use crate::error::{Error, Result};
use crate::geometry::{Grid, Region};
use crate::measure::{rasterize, MeasureSpec};
use crate::spectral::dirichlet_eigenvalues_raster;
use crate::torsion::rigidity_of_raster;

pub const MAX_BALLS: usize = 8;
pub const MAX_K: usize = 8;
/// Penalty per unit of total overlap depth.
pub const OVERLAP_PENALTY: f64 = 1e6;
/// Squared first zero of the Bessel function `J₀`.
pub const J01_SQ: f64 = 5.783_185_962_946_784;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallConfig {
    #[serde(default = "two")]
    pub dim: usize,
    pub balls: Vec<Ball>,
}

fn two() -> usize {
    2
}

impl BallConfig {
    pub fn new(dim: usize, balls: Vec<Ball>) -> Result<BallConfig> {
        let c = BallConfig { dim, balls };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::InvalidArgument(format!("dimension {} not in 1..=3", self.dim)));
        }
        if self.balls.is_empty() || self.balls.len() > MAX_BALLS {
            return Err(Error::InvalidArgument(format!("ball count must be in 1..={MAX_BALLS}")));
        }
        for b in &self.balls {
            if b.center.len() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, found: b.center.len() });
            }
            if !(b.radius > 0.0 && b.radius.is_finite()) || b.center.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument("balls need finite centers and positive radii".into()));
            }
        }
        Ok(())
    }

    pub fn region(&self) -> Region {
        Region::Union {
            parts: self.balls.iter().map(|b| Region::ball(b.center.clone(), b.radius)).collect(),
        }
    }

    /// `Σ_{i<j} max(0, r_i + r_j − |c_i − c_j|)`.
    pub fn overlap_depth(&self) -> f64 {
        let mut depth = 0.0;
        for (i, a) in self.balls.iter().enumerate() {
            for b in &self.balls[i + 1..] {
                let d = dist(&a.center, &b.center);
                depth += (a.radius + b.radius - d).max(0.0);
            }
        }
        depth
    }

    /// Image under `x ↦ t·x`.
    pub fn dilated(&self, t: f64) -> BallConfig {
        BallConfig {
            dim: self.dim,
            balls: self
                .balls
                .iter()
                .map(|b| Ball { center: b.center.iter().map(|x| x * t).collect(), radius: b.radius * t })
                .collect(),
        }
    }

    fn largest(&self) -> &Ball {
        self.balls.iter().fold(&self.balls[0], |m, b| if b.radius > m.radius { b } else { m })
    }

    /// Bounding box of the union.
    pub fn hull(&self) -> (Vec<f64>, Vec<f64>) {
        let lo = (0..self.dim)
            .map(|a| self.balls.iter().map(|b| b.center[a] - b.radius).fold(f64::INFINITY, f64::min))
            .collect();
        let hi = (0..self.dim)
            .map(|a| self.balls.iter().map(|b| b.center[a] + b.radius).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        (lo, hi)
    }

    pub fn hull_diameter(&self) -> f64 {
        let (lo, hi) = self.hull();
        dist(&lo, &hi)
    }

    /// Centroid of the centers at the origin and largest radius 1, with
    /// radii floored at `floor` times the largest.
    fn normalized(mut self, floor: f64) -> BallConfig {
        let n = self.balls.len() as f64;
        let mean: Vec<f64> =
            (0..self.dim).map(|a| self.balls.iter().map(|b| b.center[a]).sum::<f64>() / n).collect();
        let rmax = self.largest().radius;
        for b in &mut self.balls {
            b.radius = b.radius.max(floor * rmax) / rmax;
            for (x, m) in b.center.iter_mut().zip(&mean) {
                *x = (*x - m) / rmax;
            }
        }
        self
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveMode {
    /// `λ_k` of the dilate with `P = c`.
    Constrained,
    /// `P^{2/(N+2)} λ_k`.
    Product,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeObjective {
    pub k: usize,
    pub mode: ObjectiveMode,
    /// Target rigidity in constrained mode.
    #[serde(default = "one")]
    pub c: f64,
}

fn one() -> f64 {
    1.0
}

impl ShapeObjective {
    pub fn product(k: usize) -> ShapeObjective {
        ShapeObjective { k, mode: ObjectiveMode::Product, c: 1.0 }
    }

    pub fn constrained(k: usize, c: f64) -> ShapeObjective {
        ShapeObjective { k, mode: ObjectiveMode::Constrained, c }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_K).contains(&self.k) {
            return Err(Error::InvalidArgument(format!("k must be in 1..={MAX_K}")));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidArgument("target rigidity must be positive".into()));
        }
        Ok(())
    }
}

/// Per-evaluation discretization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSettings {
    /// Cells across the diameter of the largest ball.
    pub cells_per_diameter: usize,
    /// Working box edge relative to the configuration hull.
    pub hull_factor: f64,
    pub solver: SolverOptions,
    pub eigen: EigenOptions,
}

impl Default for GridSettings {
    fn default() -> Self {
        GridSettings {
            cells_per_diameter: 64,
            hull_factor: 1.5,
            solver: SolverOptions::default(),
            eigen: EigenOptions { inner_iterations: 4, ..EigenOptions::default() },
        }
    }
}

impl GridSettings {
    /// Grid with spacing `2 r_max / cells_per_diameter`, one node at the
    /// center of the largest ball and the hull dilated by `hull_factor`.
    pub fn grid_for(&self, config: &BallConfig) -> Result<Grid> {
        if self.cells_per_diameter < 4 || !(self.hull_factor >= 1.0) {
            return Err(Error::InvalidArgument("need cells_per_diameter >= 4 and hull_factor >= 1".into()));
        }
        let anchor = config.largest();
        let h = 2.0 * anchor.radius / self.cells_per_diameter as f64;
        let (lo, hi) = config.hull();
        let mut glo = Vec::with_capacity(config.dim);
        let mut ghi = Vec::with_capacity(config.dim);
        for a in 0..config.dim {
            let mid = 0.5 * (lo[a] + hi[a]);
            let half = 0.5 * self.hull_factor * (hi[a] - lo[a]) + 2.0 * h;
            let below = ((anchor.center[a] - (mid - half)) / h - 0.5).ceil().max(0.0);
            let start = anchor.center[a] - (below + 0.5) * h;
            let cells = ((mid + half - start) / h).ceil();
            glo.push(start);
            ghi.push(start + cells * h);
        }
        Grid::new(&glo, &ghi, h)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Objective including the overlap penalty; `+∞` on solver failure.
    #[serde(with = "crate::real")]
    pub value: f64,
    #[serde(with = "crate::real")]
    pub lambda_k: f64,
    #[serde(with = "crate::real")]
    pub rigidity: f64,
    pub penalty: f64,
    pub failed: bool,
}

/// Objective value of one configuration.
pub fn evaluate(config: &BallConfig, objective: &ShapeObjective, settings: &GridSettings) -> Result<Evaluation> {
    config.validate()?;
    objective.validate()?;
    let grid = settings.grid_for(config)?;
    let raster = rasterize(&MeasureSpec::inf_outside(config.region()), &grid)?;
    let penalty = OVERLAP_PENALTY * config.overlap_depth();
    let failure = |rigidity| Evaluation { value: f64::INFINITY, lambda_k: f64::INFINITY, rigidity, penalty, failed: true };
    let rigidity = match rigidity_of_raster(raster.clone(), settings.solver) {
        Ok((p, _)) => p,
        Err(Error::Solver(_)) => return Ok(failure(f64::NAN)),
        Err(e) => return Err(e),
    };
    let lambda_k = match dirichlet_eigenvalues_raster(&raster, objective.k, &settings.eigen, false) {
        Ok(res) if res.converged => res.eigenvalues[objective.k - 1],
        Ok(_) | Err(Error::Solver(_)) | Err(Error::InsufficientDofs { .. }) => return Ok(failure(rigidity)),
        Err(e) => return Err(e),
    };
    let e = 2.0 / (config.dim as f64 + 2.0);
    let product = rigidity.powf(e) * lambda_k + penalty;
    let value = match objective.mode {
        ObjectiveMode::Product => product,
        ObjectiveMode::Constrained => product * objective.c.powf(-e),
    };
    Ok(Evaluation { value, lambda_k, rigidity, penalty, failed: false })
}

/// Continuum product value `P^{1/2} λ_k` of `count` equal disjoint disks
/// in the plane, valid for `k ≤ count`.
pub fn equal_disks_reference(count: usize) -> f64 {
    (count as f64 * std::f64::consts::PI / 8.0).sqrt() * J01_SQ
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaSettings {
    pub budget: usize,
    pub seed: u64,
    pub population: usize,
    pub tournament: usize,
    pub elitism: usize,
    /// Initial mutation scale relative to the hull diameter; halved every
    /// quarter of the budget.
    pub sigma: f64,
    /// Smallest radius relative to the largest.
    pub radius_floor: f64,
    /// Initial centers are drawn from `[-init_extent, init_extent]^dim`.
    pub init_extent: f64,
}

impl Default for GaSettings {
    fn default() -> Self {
        GaSettings {
            budget: 2000,
            seed: 0,
            population: 24,
            tournament: 3,
            elitism: 2,
            sigma: 0.1,
            radius_floor: 0.05,
            init_extent: 2.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub generation: usize,
    pub evaluations: usize,
    #[serde(with = "crate::real")]
    pub best: f64,
    /// Mean over the finite values of the generation.
    #[serde(with = "crate::real")]
    pub mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    /// Best configuration; dilated to `P = c` in constrained mode.
    pub best: BallConfig,
    pub evaluation: Evaluation,
    pub trace: Vec<TraceRow>,
    /// Every objective value in evaluation order.
    #[serde(with = "crate::real::vec")]
    pub history: Vec<f64>,
}

fn candidate_rng(seed: u64, generation: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((generation as u64) << 32) | index as u64);
    rng
}

fn random_config(rng: &mut ChaCha8Rng, dim: usize, m: usize, s: &GaSettings) -> BallConfig {
    let balls = (0..m)
        .map(|_| Ball {
            center: (0..dim).map(|_| rng.random_range(-s.init_extent..=s.init_extent)).collect(),
            radius: rng.random_range(0.3..=1.0),
        })
        .collect();
    BallConfig { dim, balls }.normalized(s.radius_floor)
}

fn tournament(rng: &mut ChaCha8Rng, values: &[f64], size: usize) -> usize {
    let mut best = rng.random_range(0..values.len());
    for _ in 1..size {
        let c = rng.random_range(0..values.len());
        if values[c] < values[best] || (values[c] == values[best] && c < best) {
            best = c;
        }
    }
    best
}

fn child(rng: &mut ChaCha8Rng, a: &BallConfig, b: &BallConfig, sigma: f64, s: &GaSettings) -> BallConfig {
    let mut balls: Vec<Ball> =
        a.balls.iter().zip(&b.balls).map(|(x, y)| if rng.random_bool(0.5) { x.clone() } else { y.clone() }).collect();
    let scale = sigma * a.hull_diameter().max(b.hull_diameter());
    for ball in &mut balls {
        for x in &mut ball.center {
            let z: f64 = StandardNormal.sample(rng);
            *x += scale * z;
        }
        let z: f64 = StandardNormal.sample(rng);
        ball.radius = (ball.radius + scale * z).abs().max(1e-6);
    }
    BallConfig { dim: a.dim, balls }.normalized(s.radius_floor)
}

fn rank(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]).then(i.cmp(&j)));
    order
}

fn evaluate_all(
    pop: &[BallConfig],
    objective: &ShapeObjective,
    grid: &GridSettings,
) -> Result<Vec<Evaluation>> {
    pop.par_iter().map(|c| evaluate(c, objective, grid)).collect()
}

/// Genetic search over `m`-ball configurations in `dim` dimensions.
pub fn optimize(
    objective: &ShapeObjective,
    dim: usize,
    m: usize,
    settings: &GaSettings,
    grid: &GridSettings,
) -> Result<OptimizeResult> {
    objective.validate()?;
    if settings.budget < 50 {
        return Err(Error::InvalidArgument("budget must be at least 50 evaluations".into()));
    }
    if !(1..=MAX_BALLS).contains(&m) || !(1..=3).contains(&dim) {
        return Err(Error::InvalidArgument(format!("need 1 <= m <= {MAX_BALLS} and 1 <= dim <= 3")));
    }
    if settings.population < 4 || settings.elitism >= settings.population || settings.tournament == 0 {
        return Err(Error::InvalidArgument("inconsistent GA population settings".into()));
    }
    let s = settings;
    let mut pop: Vec<BallConfig> =
        (0..s.population).map(|i| random_config(&mut candidate_rng(s.seed, 0, i), dim, m, s)).collect();
    let mut evals = evaluate_all(&pop, objective, grid)?;
    let mut history: Vec<f64> = evals.iter().map(|e| e.value).collect();
    let mut used = pop.len();
    let mut trace = Vec::new();
    let mut best: (BallConfig, Evaluation) = {
        let i = rank(&history)[0];
        (pop[i].clone(), evals[i].clone())
    };
    let record = |trace: &mut Vec<TraceRow>, generation, used, evals: &[Evaluation], best: f64| {
        let finite: Vec<f64> = evals.iter().map(|e| e.value).filter(|v| v.is_finite()).collect();
        let mean = if finite.is_empty() { f64::INFINITY } else { finite.iter().sum::<f64>() / finite.len() as f64 };
        trace.push(TraceRow { generation, evaluations: used, best, mean });
    };
    record(&mut trace, 0, used, &evals, best.1.value);
    let quarter = (s.budget / 4).max(1);
    let mut generation = 0;
    while used < s.budget {
        generation += 1;
        let values: Vec<f64> = evals.iter().map(|e| e.value).collect();
        let order = rank(&values);
        let sigma = s.sigma * 0.5f64.powi((used / quarter) as i32);
        let n_children = (s.population - s.elitism).min(s.budget - used);
        let children: Vec<BallConfig> = (0..n_children)
            .map(|i| {
                let mut rng = candidate_rng(s.seed, generation, i);
                let a = tournament(&mut rng, &values, s.tournament);
                let b = tournament(&mut rng, &values, s.tournament);
                child(&mut rng, &pop[a], &pop[b], sigma, s)
            })
            .collect();
        let child_evals = evaluate_all(&children, objective, grid)?;
        used += children.len();
        history.extend(child_evals.iter().map(|e| e.value));
        let mut next: Vec<BallConfig> = order[..s.elitism].iter().map(|&i| pop[i].clone()).collect();
        let mut next_evals: Vec<Evaluation> = order[..s.elitism].iter().map(|&i| evals[i].clone()).collect();
        // a partial last generation keeps the best survivors to fill up
        let fill = s.population - s.elitism - children.len();
        next.extend(order[s.elitism..s.elitism + fill].iter().map(|&i| pop[i].clone()));
        next_evals.extend(order[s.elitism..s.elitism + fill].iter().map(|&i| evals[i].clone()));
        for (c, e) in children.into_iter().zip(child_evals) {
            if e.value < best.1.value {
                best = (c.clone(), e.clone());
            }
            next.push(c);
            next_evals.push(e);
        }
        pop = next;
        evals = next_evals;
        record(&mut trace, generation, used, &evals, best.1.value);
    }
    let (mut config, evaluation) = best;
    if objective.mode == ObjectiveMode::Constrained && evaluation.rigidity > 0.0 {
        let t = (objective.c / evaluation.rigidity).powf(1.0 / (dim as f64 + 2.0));
        config = config.dilated(t);
    }
    Ok(OptimizeResult { best: config, evaluation, trace, history })
}
