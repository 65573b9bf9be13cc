//! Resolvent solver for `(−Δ + 1 + μ)u = f` and the γ-distance estimator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Field, Grid, Region};
use crate::measure::{rasterize, MeasureSpec, RasterMeasure};
use crate::operator::{solve_spd, PreconditionerKind, StencilMatrix};

/// Conjugate gradient settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative residual target `‖Au − f‖ / ‖f‖`, in `(0, 1e-3]`.
    pub tol: f64,
    pub max_iter: usize,
    #[serde(default)]
    pub preconditioner: PreconditionerKind,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-10, max_iter: 20_000, preconditioner: PreconditionerKind::Mic }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolverOptions { tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol <= 1e-3) {
            return Err(Error::InvalidArgument(format!("tol = {} not in (0, 1e-3]", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// `(−Δ_h + zeroth_order + penalty) u = f` on the unmasked nodes.
#[derive(Clone, Debug)]
pub struct EllipticProblem {
    pub measure: RasterMeasure,
    pub rhs: Field,
    /// Coefficient of the `u` term: 1 for the resolvent, 0 for rigidity.
    pub zeroth_order: f64,
    pub options: SolverOptions,
}

impl EllipticProblem {
    pub fn new(measure: RasterMeasure, rhs: Field) -> Self {
        EllipticProblem { measure, rhs, zeroth_order: 1.0, options: SolverOptions::default() }
    }

    pub fn grid(&self) -> &Grid {
        self.measure.grid()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub u: Field,
    /// Achieved relative residual.
    pub residual: f64,
    pub iterations: usize,
    /// `⟨Au, u⟩` with the `h^dim`-weighted inner product.
    pub energy: f64,
    /// False when `max_iter` was reached first; `u` is then the last iterate.
    pub converged: bool,
}

/// Solves the masked SPD system by preconditioned conjugate gradients.
pub fn solve(problem: &EllipticProblem) -> Result<SolveResult> {
    problem.options.validate()?;
    let grid = problem.grid();
    grid.check_same(problem.rhs.grid())?;
    if !(problem.zeroth_order >= 0.0) {
        return Err(Error::InvalidArgument("zeroth-order coefficient must be >= 0".into()));
    }
    if problem.rhs.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidField("right-hand side must be finite".into()));
    }
    let active: Vec<bool> = problem.measure.mask().iter().map(|m| !m).collect();
    let a = StencilMatrix::shifted_laplacian(
        grid,
        &active,
        problem.zeroth_order,
        problem.measure.penalty(),
    );
    let b = a.gather(problem.rhs.values());
    let mut x = vec![0.0; a.len()];
    let opts = problem.options;
    let out = solve_spd(&a, &b, &mut x, opts.preconditioner, opts.tol, opts.max_iter);
    let energy = a.quadratic_form(&x) * grid.cell_volume();
    let u = Field::new(grid.clone(), a.scatter(&x, grid.len(), 0.0))?;
    Ok(SolveResult {
        u,
        residual: out.relative_residual,
        iterations: out.iterations,
        energy,
        converged: out.converged,
    })
}

/// Solves with the given zeroth-order coefficient and fails on non-convergence.
pub(crate) fn solve_checked(
    measure: RasterMeasure,
    rhs: Field,
    zeroth_order: f64,
    options: SolverOptions,
) -> Result<SolveResult> {
    let res = solve(&EllipticProblem { measure, rhs, zeroth_order, options })?;
    if !res.converged {
        return Err(Error::Solver(format!(
            "conjugate gradient stopped at relative residual {:.3e} after {} iterations",
            res.residual, res.iterations
        )));
    }
    Ok(res)
}

/// `R_μ(f)`: rasterizes `measure` and solves with the default options.
pub fn resolvent(measure: &MeasureSpec, f: &Field, grid: &Grid) -> Result<Field> {
    resolvent_with(measure, f, grid, SolverOptions::default())
}

pub fn resolvent_with(
    measure: &MeasureSpec,
    f: &Field,
    grid: &Grid,
    options: SolverOptions,
) -> Result<Field> {
    let raster = rasterize(measure, grid)?;
    Ok(solve_checked(raster, f.clone(), 1.0, options)?.u)
}

/// `‖R_{μ⌈B}(1) − R_{ν⌈B}(1)‖_{L²}` on the grid.
pub fn gamma_distance_estimate(
    mu: &MeasureSpec,
    nu: &MeasureSpec,
    ball: &Region,
    grid: &Grid,
) -> Result<f64> {
    let Region::Ball { center, radius } = ball else {
        return Err(Error::InvalidArgument("gamma distance needs a ball".into()));
    };
    ball.validate()?;
    if !grid.contains_ball(center, *radius) {
        return Err(Error::ProbeOutsideBox { center: center.clone() });
    }
    let one = Field::constant(grid, 1.0);
    let a = resolvent(&mu.clone().dirichlet_restriction(ball.clone()), &one, grid)?;
    let b = resolvent(&nu.clone().dirichlet_restriction(ball.clone()), &one, grid)?;
    Ok(a.combine(1.0, &b, -1.0)?.l2_norm())
}
