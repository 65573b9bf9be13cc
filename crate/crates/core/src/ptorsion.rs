//! p-Laplacian resolvent, p-torsion function and p-Rayleigh quotients.
//!
//! The resolvent minimizes the discrete energy
//! `(1/p)Σ hᴺ(|∇_h u|^p + (1 + penalty)|u|^p) − Σ hᴺ f u`
//! where `|∇_h u|^p` sums `|D_a u|^p` over the forward differences along
//! each axis, reading 0 at masked and outside nodes. Summing per axis keeps
//! the discrete comparison principle for every p. The minimization is a
//! damped Newton descent (MIC(0)-preconditioned CG on the Hessian) with
//! Armijo backtracking. Step energies are summed from per-term increments,
//! which stay accurate after the total energy has stopped resolving them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, Backend, DiagnoseConfig, Verdict};
use crate::elliptic::SolveResult;
use crate::error::{Error, Result};
use crate::geometry::{Field, Grid};
use crate::measure::{rasterize, restrict_to_ball, MeasureSpec, RasterMeasure};
use crate::operator::{dot, norm, pcg, Mic0, Preconditioner, StencilMatrix};
use crate::spectral;
use crate::torsion::{self, Equation, TorsionResult};

/// Smoothing of `|t|^p` near zero.
pub const SMOOTHING: f64 = 1e-12;
const ARMIJO: f64 = 1e-4;
const METRIC_REL: f64 = 1e-4;
const MAX_P: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct POptions {
    /// Stop once the relative gradient `‖∇E‖/‖f‖` falls below `gtol` ...
    pub gtol: f64,
    /// ... or the predicted energy decrement below `tol·|E|`.
    pub tol: f64,
    pub max_iter: usize,
    /// Starts of the p-Rayleigh minimization (the first from the p = 2 mode).
    pub restarts: usize,
    /// Inverse-power steps per start.
    pub rayleigh_max_iter: usize,
    /// Relative change of the quotient that ends a start.
    pub rayleigh_tol: f64,
    pub seed: u64,
}

impl Default for POptions {
    fn default() -> Self {
        POptions { gtol: 1e-11, tol: 1e-15, max_iter: 200, restarts: 5, rayleigh_max_iter: 40, rayleigh_tol: 1e-7, seed: 0x5eed }
    }
}

impl POptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol <= 1e-4) {
            return Err(Error::InvalidArgument(format!("tolerance {} outside (0, 1e-4]", self.tol)));
        }
        if !(self.gtol >= 0.0 && self.gtol <= 1e-2) {
            return Err(Error::InvalidArgument(format!("gradient tolerance {} outside [0, 1e-2]", self.gtol)));
        }
        if self.max_iter == 0 || self.restarts == 0 {
            return Err(Error::InvalidArgument("iteration and restart counts must be positive".into()));
        }
        Ok(())
    }
}

pub fn check_p(p: f64) -> Result<()> {
    if p > 1.0 && p <= MAX_P {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("p = {p} outside (1, {MAX_P}]")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PProblem {
    pub p: f64,
    pub measure: RasterMeasure,
    pub rhs: Field,
    pub options: POptions,
}

impl PProblem {
    pub fn new(p: f64, measure: RasterMeasure, rhs: Field) -> Self {
        PProblem { p, measure, rhs, options: POptions::default() }
    }

    pub fn grid(&self) -> &Grid {
        self.measure.grid()
    }
}

const ZERO: u32 = u32::MAX;

/// Discrete p-energy over a fixed set of dofs, scaled by `h^-N`.
struct PEnergy {
    p: f64,
    dim: usize,
    inv_h: f64,
    eps2: f64,
    eps_p: f64,
    /// Edges `lo → hi` along `axis`; `ZERO` reads a fixed zero value.
    lo: Vec<u32>,
    hi: Vec<u32>,
    axis: Vec<u8>,
    zeroth: Vec<f64>,
    /// Sparsity of the Hessian; values are overwritten per Newton step.
    stencil: StencilMatrix,
}

fn smooth_pow(t2: f64, eps2: f64, e: f64) -> f64 {
    (t2 + eps2).powf(e)
}

impl PEnergy {
    /// Dofs are the `active` nodes. Without `natural`, every edge touching a
    /// dof is used with zero values off the dofs. With `natural`, only edges
    /// inside that set are used.
    fn new(raster: &RasterMeasure, active: &[bool], natural: Option<&[bool]>, p: f64, zeroth: f64) -> PEnergy {
        let grid = raster.grid();
        let dim = grid.dim();
        let shape = grid.shape();
        let strides = grid.strides();
        let stencil = StencilMatrix::build(grid, active, |_| 0.0, |_, _| 0.0);
        let in_set = |node: usize| natural.map_or(true, |s| s[node]);
        let (mut lo, mut hi, mut axis) = (Vec::new(), Vec::new(), Vec::new());
        for (k, &node) in stencil.nodes().iter().enumerate() {
            let m = grid.multi_index(node);
            for a in 0..dim {
                if m[a] > 0 {
                    let nb = node - strides[a];
                    if stencil.dof(nb).is_none() && in_set(nb) {
                        lo.push(ZERO);
                        hi.push(k as u32);
                        axis.push(a as u8);
                    }
                } else if natural.is_none() {
                    lo.push(ZERO);
                    hi.push(k as u32);
                    axis.push(a as u8);
                }
                let up = (m[a] + 1 < shape[a]).then(|| node + strides[a]);
                match up {
                    Some(nb) if in_set(nb) => {
                        lo.push(k as u32);
                        hi.push(stencil.dof(nb).map_or(ZERO, |d| d as u32));
                        axis.push(a as u8);
                    }
                    None if natural.is_none() => {
                        lo.push(k as u32);
                        hi.push(ZERO);
                        axis.push(a as u8);
                    }
                    _ => {}
                }
            }
        }
        let penalty = raster.penalty();
        let zeroth = stencil.nodes().iter().map(|&n| zeroth + penalty[n]).collect();
        PEnergy {
            p,
            dim,
            inv_h: 1.0 / grid.h(),
            eps2: SMOOTHING * SMOOTHING,
            eps_p: SMOOTHING.powf(p),
            lo,
            hi,
            axis,
            zeroth,
            stencil,
        }
    }

    fn len(&self) -> usize {
        self.zeroth.len()
    }

    fn read(u: &[f64], j: u32) -> f64 {
        if j == ZERO {
            0.0
        } else {
            u[j as usize]
        }
    }

    fn diff(&self, e: usize, u: &[f64]) -> f64 {
        (Self::read(u, self.hi[e]) - Self::read(u, self.lo[e])) * self.inv_h
    }

    /// Energy `E/hᴺ` and its gradient (when requested).
    fn eval(&self, u: &[f64], f: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let p = self.p;
        let mut e = 0.0;
        if let Some(gr) = grad.as_deref_mut() {
            gr.iter_mut().for_each(|v| *v = 0.0);
        }
        for k in 0..self.lo.len() {
            let t = self.diff(k, u);
            e += (smooth_pow(t * t, self.eps2, 0.5 * p) - self.eps_p) / p;
            if let Some(gr) = grad.as_deref_mut() {
                let flux = smooth_pow(t * t, self.eps2, 0.5 * p - 1.0) * t * self.inv_h;
                if self.hi[k] != ZERO {
                    gr[self.hi[k] as usize] += flux;
                }
                if self.lo[k] != ZERO {
                    gr[self.lo[k] as usize] -= flux;
                }
            }
        }
        for i in 0..u.len() {
            let t = u[i] * u[i];
            e += self.zeroth[i] * (smooth_pow(t, self.eps2, 0.5 * p) - self.eps_p) / p - f[i] * u[i];
            if let Some(gr) = grad.as_deref_mut() {
                gr[i] += self.zeroth[i] * smooth_pow(t, self.eps2, 0.5 * p - 1.0) * u[i] - f[i];
            }
        }
        e
    }

    /// `(E(u + αd) − E(u))/hᴺ`, summed from per-term differences so the
    /// result is accurate relative to its own size rather than to `E`.
    fn delta(&self, u: &[f64], d: &[f64], alpha: f64, f: &[f64]) -> f64 {
        let q = 0.5 * self.p;
        let inv_p = 1.0 / self.p;
        let mut sum = Neumaier::default();
        for k in 0..self.lo.len() {
            let t = self.diff(k, u);
            let dt = alpha * self.diff(k, d);
            sum.add(pow_difference(t, dt, self.eps2, q) * inv_p);
        }
        for i in 0..u.len() {
            let du = alpha * d[i];
            sum.add(self.zeroth[i] * pow_difference(u[i], du, self.eps2, q) * inv_p - f[i] * du);
        }
        sum.value()
    }

    /// Loads a regularized Hessian at `u` into `self.stencil`.
    ///
    /// For p > 2, differences below `METRIC_REL` times the largest one are
    /// weighted as if they had that size, since the exact weights vanish
    /// there. For p < 2 edges use the secant weight `φ'(t)/t`, which is at
    /// least the exact curvature, so full steps stay safe.
    fn load_hessian(&mut self, u: &[f64]) {
        let p = self.p;
        let dim = self.dim;
        let slots = 2 * dim;
        let n = self.len();
        let mut diag = vec![0.0; n];
        let mut cpl = vec![0.0; n * slots];
        let inv_h2 = self.inv_h * self.inv_h;
        let tmax = (0..self.lo.len()).map(|k| self.diff(k, u).abs()).fold(0.0, f64::max);
        let dt2 = (METRIC_REL * tmax).powi(2) + self.eps2;
        let weight = |t2: f64, d2: f64| smooth_pow(t2, d2, 0.5 * p - 2.0) * ((p - 1.0) * t2 + d2);
        let eps2 = self.eps2;
        // for p < 2 the secant weight bounds the curvature from above
        let edge_weight = |t2: f64| if p < 2.0 { smooth_pow(t2, eps2, 0.5 * p - 1.0) } else { weight(t2, dt2) };
        for k in 0..self.lo.len() {
            let t = self.diff(k, u);
            let w = edge_weight(t * t) * inv_h2;
            let (l, h, a) = (self.lo[k], self.hi[k], self.axis[k] as usize);
            if l != ZERO {
                diag[l as usize] += w;
            }
            if h != ZERO {
                diag[h as usize] += w;
            }
            if l != ZERO && h != ZERO {
                cpl[l as usize * slots + dim + a] = w;
                cpl[h as usize * slots + a] = w;
            }
        }
        // keep the matrix definite where the energy is flat
        let floor = 1e-14 * diag.iter().fold(0.0f64, |m, &v| m.max(v));
        for i in 0..n {
            // diagonal, so the exact weight costs no conditioning
            diag[i] += self.zeroth[i] * weight(u[i] * u[i], self.eps2);
        }
        diag.iter_mut().for_each(|d| *d = d.max(floor));
        let (d, w) = self.stencil.values_mut();
        d.copy_from_slice(&diag);
        w.copy_from_slice(&cpl);
    }
}

/// `((t+δ)² + ε²)^q − (t² + ε²)^q` without cancellation.
fn pow_difference(t: f64, delta: f64, eps2: f64, q: f64) -> f64 {
    if delta == 0.0 {
        return 0.0;
    }
    let b = t * t + eps2;
    let rel = delta * (2.0 * t + delta) / b;
    b.powf(q) * (q * rel.ln_1p()).exp_m1()
}

/// Compensated summation.
#[derive(Default)]
struct Neumaier {
    sum: f64,
    c: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.c
    }
}

struct Minimized {
    u: Vec<f64>,
    energy: f64,
    residual: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

/// The p = 2 solution mapped through `t ↦ sign(t)|t|^{1/(p−1)}`, which has
/// the homogeneity of the p-resolvent.
fn initial_guess(en: &mut PEnergy, f: &[f64]) -> Vec<f64> {
    let dim = en.dim;
    let slots = 2 * dim;
    let inv_h2 = en.inv_h * en.inv_h;
    let n = en.len();
    let mut diag = en.zeroth.clone();
    let mut cpl = vec![0.0; n * slots];
    for k in 0..en.lo.len() {
        let (l, h, a) = (en.lo[k], en.hi[k], en.axis[k] as usize);
        if l != ZERO {
            diag[l as usize] += inv_h2;
        }
        if h != ZERO {
            diag[h as usize] += inv_h2;
        }
        if l != ZERO && h != ZERO {
            cpl[l as usize * slots + dim + a] = inv_h2;
            cpl[h as usize * slots + a] = inv_h2;
        }
    }
    let (d, w) = en.stencil.values_mut();
    d.copy_from_slice(&diag);
    w.copy_from_slice(&cpl);
    let mut u = vec![0.0; n];
    pcg(&en.stencil, f, &mut u, &Mic0::new(&en.stencil), 1e-8, 10 * n + 100);
    let e = 1.0 / (en.p - 1.0);
    u.iter().map(|&t| t.signum() * t.abs().powf(e)).collect()
}

fn minimize(en: &mut PEnergy, f: &[f64], mut u: Vec<f64>, opts: &POptions) -> Minimized {
    let n = en.len();
    let fnorm = norm(f);
    let mut grad = vec![0.0; n];
    let mut e = en.eval(&u, f, Some(&mut grad));
    let mut trace = vec![e];
    let g0 = norm(&grad).max(f64::MIN_POSITIVE);
    let rel = |g: &[f64]| if fnorm > 0.0 { norm(g) / fnorm } else { norm(g) };
    if norm(&grad) == 0.0 || rel(&grad) <= opts.gtol {
        return Minimized { u, energy: e, residual: 0.0, iterations: 0, converged: true, trace };
    }
    for it in 1..=opts.max_iter {
        en.load_hessian(&u);
        let mic = Mic0::new(&en.stencil);
        let forcing = (norm(&grad) / g0).clamp(1e-12, 1e-2);
        let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
        let mut d = vec![0.0; n];
        pcg(&en.stencil, &rhs, &mut d, &mic, forcing, 10 * n + 100);
        let mut slope = dot(&grad, &d);
        if !(slope < 0.0) {
            // fall back to the preconditioned gradient
            mic.apply(&rhs, &mut d);
            slope = dot(&grad, &d);
            if !(slope < 0.0) {
                return Minimized { u, energy: e, residual: rel(&grad), iterations: it, converged: false, trace };
            }
        }
        let small = -0.5 * slope <= opts.tol * e.abs().max(f64::MIN_POSITIVE);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let de = en.delta(&u, &d, alpha, f);
            if de <= ARMIJO * alpha * slope || (small && de <= 0.0) {
                accepted = Some(de);
                break;
            }
            alpha *= 0.5;
        }
        let Some(de) = accepted else {
            let converged = small || rel(&grad) <= opts.gtol;
            return Minimized { u, energy: e, residual: rel(&grad), iterations: it, converged, trace };
        };
        for i in 0..n {
            u[i] += alpha * d[i];
        }
        en.eval(&u, f, Some(&mut grad));
        e += de;
        trace.push(e);
        if small || rel(&grad) <= opts.gtol {
            return Minimized { u, energy: e, residual: rel(&grad), iterations: it, converged: true, trace };
        }
    }
    Minimized { u, energy: e, residual: rel(&grad), iterations: opts.max_iter, converged: false, trace }
}

/// Energy trace of a resolvent solve, one entry per accepted step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PSolveResult {
    #[serde(flatten)]
    pub result: SolveResult,
    pub energy_trace: Vec<f64>,
}

/// `R(f)` for `−Δ_p u + (1 + μ)|u|^{p−2}u = f`.
///
/// `energy` is the minimized discrete energy and `residual` the final
/// gradient norm relative to `‖f‖`.
pub fn p_resolvent(problem: &PProblem) -> Result<SolveResult> {
    Ok(p_resolvent_traced(problem)?.result)
}

pub fn p_resolvent_traced(problem: &PProblem) -> Result<PSolveResult> {
    check_p(problem.p)?;
    problem.options.validate()?;
    let grid = problem.grid();
    grid.check_same(problem.rhs.grid())?;
    if problem.rhs.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidField("right-hand side must be finite".into()));
    }
    let active: Vec<bool> = problem.measure.mask().iter().map(|m| !m).collect();
    let mut en = PEnergy::new(&problem.measure, &active, None, problem.p, 1.0);
    let f = en.stencil.gather(problem.rhs.values());
    let start = initial_guess(&mut en, &f);
    let m = minimize(&mut en, &f, start, &problem.options);
    let vol = grid.cell_volume();
    let u = Field::new(grid.clone(), en.stencil.scatter(&m.u, grid.len(), 0.0))?;
    Ok(PSolveResult {
        result: SolveResult {
            u,
            residual: m.residual,
            iterations: m.iterations,
            energy: m.energy * vol,
            converged: m.converged,
        },
        energy_trace: m.trace.iter().map(|e| e * vol).collect(),
    })
}

/// p-torsion function `w = R(1)` by exhaustion over balls.
pub fn p_torsion(measure: &MeasureSpec, grid: &Grid, p: f64, radii: &[f64]) -> Result<TorsionResult> {
    p_torsion_with(measure, grid, p, radii, &POptions::default())
}

pub fn p_torsion_with(
    measure: &MeasureSpec,
    grid: &Grid,
    p: f64,
    radii: &[f64],
    options: &POptions,
) -> Result<TorsionResult> {
    let fields = p_exhaustion_fields(measure, grid, p, radii, options)?;
    Ok(torsion::assemble(grid, radii, fields, Equation::Characteristic, Some(p)))
}

/// p-torsion functions of `μ⌈B_R`, one per radius.
pub fn p_exhaustion_fields(
    measure: &MeasureSpec,
    grid: &Grid,
    p: f64,
    radii: &[f64],
    options: &POptions,
) -> Result<Vec<Field>> {
    check_p(p)?;
    torsion::check_radii(grid, radii)?;
    measure.check_dim(grid.dim())?;
    let one = Field::constant(grid, 1.0);
    radii
        .par_iter()
        .map(|&r| {
            let raster = rasterize(&restrict_to_ball(measure, grid.dim(), r)?, grid)?;
            let res = p_resolvent(&PProblem { p, measure: raster, rhs: one.clone(), options: *options })?;
            if !res.converged {
                return Err(Error::Solver(format!(
                    "p-energy minimization stopped at relative gradient {:.3e} after {} steps",
                    res.residual, res.iterations
                )));
            }
            Ok(res.u)
        })
        .collect()
}

/// Upper estimate of the lowest p-Rayleigh quotient with its per-start values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PRayleigh {
    #[serde(with = "crate::real")]
    pub value: f64,
    #[serde(with = "crate::real::vec")]
    pub starts: Vec<f64>,
}

/// `inf (Σ|∇u|^p + Σ(1 + μ)|u|^p) / Σ|u|^p` over the unmasked nodes.
pub fn p_rayleigh(raster: &RasterMeasure, p: f64, options: &POptions) -> Result<PRayleigh> {
    let active: Vec<bool> = raster.mask().iter().map(|m| !m).collect();
    p_rayleigh_on(raster, &active, None, p, options)
}

/// Quotient on `active`. With `natural` the zeroth-order `1` is left out and
/// differences leaving that set are dropped.
pub(crate) fn p_rayleigh_on(
    raster: &RasterMeasure,
    active: &[bool],
    natural: Option<&[bool]>,
    p: f64,
    options: &POptions,
) -> Result<PRayleigh> {
    check_p(p)?;
    options.validate()?;
    let Some((_, nodes, mode)) = spectral::lowest_pair_on(raster, active, natural, &Default::default())? else {
        return Ok(PRayleigh { value: f64::INFINITY, starts: vec![] });
    };
    let mut en = PEnergy::new(raster, active, natural, p, 1.0);
    debug_assert_eq!(en.stencil.nodes(), &nodes[..]);
    let shift = if natural.is_some() { 1.0 } else { 0.0 };
    let n = en.len();
    let mut starts = Vec::with_capacity(options.restarts);
    for k in 0..options.restarts {
        let u0: Vec<f64> = if k == 0 {
            mode.iter().map(|v| v.abs()).collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed.wrapping_add(k as u64));
            (0..n).map(|_| rng.random_range(0.1..1.0)).collect()
        };
        starts.push(inverse_power(&mut en, u0, options)? - shift);
    }
    let value = starts.iter().copied().fold(f64::INFINITY, f64::min).max(0.0);
    Ok(PRayleigh { value, starts })
}

fn p_norm(u: &[f64], p: f64) -> f64 {
    u.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
}

fn quotient(en: &PEnergy, u: &[f64]) -> f64 {
    let zero = vec![0.0; u.len()];
    let b: f64 = u.iter().map(|v| v.abs().powf(en.p)).sum();
    en.p * en.eval(u, &zero, None) / b
}

/// Nonlinear inverse iteration `v ← argmin (1/p)Q(v) − ⟨|u|^{p−2}u, v⟩`,
/// normalized; returns the smallest quotient seen.
fn inverse_power(en: &mut PEnergy, mut u: Vec<f64>, opts: &POptions) -> Result<f64> {
    let p = en.p;
    let scale = p_norm(&u, p);
    if !(scale > 0.0) {
        return Ok(f64::INFINITY);
    }
    u.iter_mut().for_each(|v| *v /= scale);
    let mut best = quotient(en, &u);
    let mut last = best;
    let inner = POptions { tol: 1e-9, ..*opts };
    for _ in 0..opts.rayleigh_max_iter {
        let f: Vec<f64> = u.iter().map(|v| v.signum() * v.abs().powf(p - 1.0)).collect();
        // the minimizer is close to u·r^{-1/(p−1)} near an eigenfunction
        let k = last.powf(-1.0 / (p - 1.0));
        let m = minimize(en, &f, u.iter().map(|v| v * k).collect(), &inner);
        let s = p_norm(&m.u, p);
        if !(s > 0.0 && s.is_finite()) {
            break;
        }
        u = m.u.into_iter().map(|v| v / s).collect();
        let r = quotient(en, &u);
        best = best.min(r);
        if (last - r).abs() <= opts.rayleigh_tol * r.abs() {
            break;
        }
        last = r;
    }
    Ok(best)
}

pub(crate) fn p_lowest_on(
    raster: &RasterMeasure,
    active: &[bool],
    natural: Option<&[bool]>,
    p: f64,
    options: &POptions,
) -> Result<f64> {
    Ok(p_rayleigh_on(raster, active, natural, p, options)?.value)
}

/// L² verdict from the p-torsion tail, the tail p-quotient and ball probes.
pub fn p_diagnose(measure: &MeasureSpec, grid: &Grid, p: f64, config: &DiagnoseConfig) -> Result<Verdict> {
    p_diagnose_with(measure, grid, p, config, &POptions::default())
}

pub fn p_diagnose_with(
    measure: &MeasureSpec,
    grid: &Grid,
    p: f64,
    config: &DiagnoseConfig,
    options: &POptions,
) -> Result<Verdict> {
    check_p(p)?;
    diagnostics::diagnose_l2_with(Backend::P(p, *options), measure, grid, config)
}

/// L¹ verdict from the integrability of the p-torsion function.
pub fn p_diagnose_l1(measure: &MeasureSpec, grid: &Grid, p: f64, config: &DiagnoseConfig) -> Result<Verdict> {
    check_p(p)?;
    diagnostics::diagnose_l1_with(Backend::P(p, POptions::default()), measure, grid, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Region;

    fn interval_raster(h: f64) -> RasterMeasure {
        let g = Grid::new(&[-0.5 * h], &[1.0 + 0.5 * h], h).unwrap();
        rasterize(&MeasureSpec::inf_outside(Region::boxed(vec![0.0], vec![1.0])), &g).unwrap()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = Grid::new(&[0.0, 0.0], &[1.0, 1.0], 0.25).unwrap();
        let r = rasterize(&MeasureSpec::potential("x1 + 0.5").unwrap(), &g).unwrap();
        for p in [1.5, 2.0, 3.5] {
            let active: Vec<bool> = (0..g.len()).map(|i| i != 5).collect();
            let en = PEnergy::new(&r, &active, None, p, 1.0);
            let u: Vec<f64> = (0..en.len()).map(|i| 0.3 + (i as f64 * 0.7).sin()).collect();
            let f: Vec<f64> = (0..en.len()).map(|i| (i as f64 * 0.3).cos()).collect();
            let mut grad = vec![0.0; en.len()];
            en.eval(&u, &f, Some(&mut grad));
            for i in [0, 3, 7] {
                let mut up = u.clone();
                let mut dn = u.clone();
                up[i] += 1e-6;
                dn[i] -= 1e-6;
                let fd = (en.eval(&up, &f, None) - en.eval(&dn, &f, None)) / 2e-6;
                assert!((fd - grad[i]).abs() < 1e-5 * (1.0 + fd.abs()), "p={p} i={i}: {fd} vs {}", grad[i]);
            }
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let g = Grid::new(&[0.0, 0.0], &[1.0, 1.0], 0.25).unwrap();
        let r = rasterize(&MeasureSpec::Zero, &g).unwrap();
        let active = vec![true; g.len()];
        let mut en = PEnergy::new(&r, &active, None, 3.0, 1.0);
        let n = en.len();
        let u: Vec<f64> = (0..n).map(|i| 0.5 + 0.4 * (i as f64 * 1.3).sin()).collect();
        let v: Vec<f64> = (0..n).map(|i| (i as f64 * 0.9).cos()).collect();
        let zero = vec![0.0; n];
        en.load_hessian(&u);
        let mut hv = vec![0.0; n];
        en.stencil.apply(&v, &mut hv);
        let (mut gp, mut gm) = (vec![0.0; n], vec![0.0; n]);
        let t = 1e-6;
        let up: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + t * b).collect();
        let um: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - t * b).collect();
        en.eval(&up, &zero, Some(&mut gp));
        en.eval(&um, &zero, Some(&mut gm));
        for i in 0..n {
            let fd = (gp[i] - gm[i]) / (2.0 * t);
            assert!((fd - hv[i]).abs() < 1e-4 * (1.0 + fd.abs()), "{i}: {fd} vs {}", hv[i]);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let r = interval_raster(0.01);
        let g = r.grid().clone();
        let res = p_resolvent(&PProblem::new(3.0, r, Field::zeros(&g))).unwrap();
        assert!(res.converged);
        assert_eq!(res.u.max_abs_diff(&Field::zeros(&g)).unwrap(), 0.0);
    }

    #[test]
    fn p_is_validated() {
        let r = interval_raster(0.1);
        let g = r.grid().clone();
        for p in [1.0, 0.5, 11.0] {
            assert!(p_resolvent(&PProblem::new(p, r.clone(), Field::constant(&g, 1.0))).is_err());
        }
    }

    #[test]
    fn p_two_quotient_is_the_abscissa() {
        let r = interval_raster(0.01);
        let q = p_rayleigh(&r, 2.0, &POptions::default()).unwrap();
        let lin = spectral::abscissa_on(&r, &r.mask().iter().map(|m| !m).collect::<Vec<_>>(), 1, &Default::default(), false)
            .unwrap()
            .lambda1();
        assert!((q.value / lin - 1.0).abs() < 1e-8, "{} vs {lin}", q.value);
        assert_eq!(q.starts.len(), 5);
    }
}
