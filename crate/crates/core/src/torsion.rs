//! Torsion function by exhaustion over balls and torsional rigidity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elliptic::{solve_checked, SolverOptions};
use crate::error::{Error, Result};
use crate::geometry::{Field, Grid};
use crate::measure::{rasterize, restrict_to_ball, MeasureSpec};

/// Nodewise increment below which the exhaustion is considered converged.
pub const TORSION_CONVERGENCE: f64 = 1e-6;
/// Relative increment below which the rigidity is considered stabilized.
pub const RIGIDITY_STABILIZATION: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    /// `−Δw + w + μw = 1`.
    Characteristic,
    /// `−Δu + μu = 1`.
    Rigidity,
}

impl Equation {
    fn zeroth_order(self) -> f64 {
        match self {
            Equation::Characteristic => 1.0,
            Equation::Rigidity => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorsionResult {
    /// Solution for the largest radius.
    pub w: Field,
    pub radii: Vec<f64>,
    /// `sup{w(x) : |x| ≥ R}` of the final field, per radius.
    #[serde(with = "crate::real::vec")]
    pub sup_tail: Vec<f64>,
    /// `∫ w_{μ⌈B_R}`, per radius.
    pub l1_norm: Vec<f64>,
    /// Largest nodewise increment between consecutive radii.
    pub increments: Vec<f64>,
    pub converged: bool,
    pub which_equation: Equation,
    /// Distance from the origin to the box boundary: the truncation radius.
    pub truncation_radius: f64,
    /// Exponent of the p-Laplacian, `None` for the linear problem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidityResult {
    #[serde(rename = "P")]
    pub p: f64,
    /// `(R, ∫u_R)` pairs.
    pub per_r: Vec<(f64, f64)>,
    pub stabilized: bool,
    pub truncation_radius: f64,
    pub u: Field,
}

/// Geometric radii `R₀·2ᵏ` up to `0.9 × inradius`, with `R₀` chosen so the
/// schedule has `count` entries ending at the cap.
pub fn default_radii(grid: &Grid, count: usize) -> Vec<f64> {
    let cap = 0.9 * grid.inradius();
    let count = count.max(1);
    let r0 = cap / 2f64.powi(count as i32 - 1);
    (0..count).map(|k| r0 * 2f64.powi(k as i32)).filter(|&r| r > 0.0).collect()
}

/// Checks that radii are positive, strictly increasing and inside the box.
pub fn check_radii(grid: &Grid, radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::InvalidArgument("at least one radius is required".into()));
    }
    if radii.iter().any(|r| !(*r > 0.0)) || radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("radii must be positive and strictly increasing".into()));
    }
    let limit = grid.inradius();
    let last = *radii.last().unwrap();
    if last > limit * (1.0 + 1e-12) {
        return Err(Error::RadiusOutsideBox { radius: last, limit });
    }
    Ok(())
}

/// Solves the characteristic equation for `μ⌈B_R` at each radius.
pub fn torsion_function(measure: &MeasureSpec, grid: &Grid, radii: &[f64]) -> Result<TorsionResult> {
    torsion_function_with(measure, grid, radii, Equation::Characteristic, SolverOptions::default())
}

pub fn torsion_function_with(
    measure: &MeasureSpec,
    grid: &Grid,
    radii: &[f64],
    equation: Equation,
    options: SolverOptions,
) -> Result<TorsionResult> {
    let fields = exhaustion_fields(measure, grid, radii, equation, options)?;
    Ok(assemble(grid, radii, fields, equation, None))
}

/// Solutions for `μ⌈B_R`, one per radius.
pub fn exhaustion_fields(
    measure: &MeasureSpec,
    grid: &Grid,
    radii: &[f64],
    equation: Equation,
    options: SolverOptions,
) -> Result<Vec<Field>> {
    check_radii(grid, radii)?;
    measure.check_dim(grid.dim())?;
    let one = Field::constant(grid, 1.0);
    radii
        .par_iter()
        .map(|&r| {
            let raster = rasterize(&restrict_to_ball(measure, grid.dim(), r)?, grid)?;
            Ok(solve_checked(raster, one.clone(), equation.zeroth_order(), options)?.u)
        })
        .collect()
}

pub(crate) fn assemble(
    grid: &Grid,
    radii: &[f64],
    fields: Vec<Field>,
    equation: Equation,
    p: Option<f64>,
) -> TorsionResult {
    let l1_norm: Vec<f64> = fields.iter().map(Field::integral).collect();
    let increments: Vec<f64> = fields
        .windows(2)
        .map(|w| {
            w[1].values().iter().zip(w[0].values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
        .collect();
    let converged = increments.last().is_some_and(|&d| d < TORSION_CONVERGENCE);
    let w = fields.into_iter().last().expect("radii checked non-empty");
    let sup_tail = radii.iter().map(|&r| sup_outside(&w, r)).collect();
    TorsionResult {
        w,
        radii: radii.to_vec(),
        sup_tail,
        l1_norm,
        increments,
        converged,
        which_equation: equation,
        truncation_radius: grid.inradius(),
        p,
    }
}

/// `sup{w(x) : |x| ≥ R}`, or 0 when no node qualifies.
pub fn sup_outside(w: &Field, r: f64) -> f64 {
    let g = w.grid();
    w.values()
        .iter()
        .enumerate()
        .filter(|(i, _)| g.node_radius(*i) >= r)
        .map(|(_, &v)| v)
        .fold(0.0, f64::max)
}

/// `(R, sup{w(x) : |x| ≥ R})` for each radius, read from the final field.
pub fn tail_sup_profile(result: &TorsionResult, radii: &[f64]) -> Result<Vec<(f64, f64)>> {
    let limit = result.w.grid().inradius();
    radii
        .iter()
        .map(|&r| {
            if !(r >= 0.0) || r > limit {
                Err(Error::RadiusOutsideBox { radius: r, limit })
            } else {
                Ok((r, sup_outside(&result.w, r)))
            }
        })
        .collect()
}

/// `(R, ∫ w_{μ⌈B_R})` pairs.
pub fn l1_profile(result: &TorsionResult) -> Vec<(f64, f64)> {
    result.radii.iter().copied().zip(result.l1_norm.iter().copied()).collect()
}

/// `P(μ) = ∫u` with `−Δu + μu = 1`, by exhaustion.
pub fn torsional_rigidity(measure: &MeasureSpec, grid: &Grid, radii: &[f64]) -> Result<RigidityResult> {
    torsional_rigidity_with(measure, grid, radii, SolverOptions::default())
}

pub fn torsional_rigidity_with(
    measure: &MeasureSpec,
    grid: &Grid,
    radii: &[f64],
    options: SolverOptions,
) -> Result<RigidityResult> {
    let fields = exhaustion_fields(measure, grid, radii, Equation::Rigidity, options)?;
    let per_r: Vec<(f64, f64)> = radii.iter().copied().zip(fields.iter().map(Field::integral)).collect();
    let p = per_r.last().map(|x| x.1).unwrap_or(0.0);
    let stabilized = per_r.len() >= 2 && {
        let prev = per_r[per_r.len() - 2].1;
        p > 0.0 && (p - prev).abs() / p < RIGIDITY_STABILIZATION
    };
    Ok(RigidityResult {
        p,
        per_r,
        stabilized,
        truncation_radius: grid.inradius(),
        u: fields.into_iter().last().expect("radii checked non-empty"),
    })
}

/// Rigidity of a rasterized domain without the exhaustion loop.
pub fn rigidity_of_raster(
    raster: crate::measure::RasterMeasure,
    options: SolverOptions,
) -> Result<(f64, Field)> {
    let grid = raster.grid().clone();
    let res = solve_checked(raster, Field::constant(&grid, 1.0), 0.0, options)?;
    Ok((res.u.integral(), res.u))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schedule_is_geometric_and_capped() {
        let g = Grid::new(&[-10.0, -10.0], &[10.0, 10.0], 0.5).unwrap();
        let r = default_radii(&g, 4);
        assert_eq!(r.len(), 4);
        assert!((r[3] - 9.0).abs() < 1e-12);
        assert!((r[1] / r[0] - 2.0).abs() < 1e-12);
        check_radii(&g, &r).unwrap();
    }

    #[test]
    fn radii_are_validated() {
        let g = Grid::new(&[-1.0], &[1.0], 0.1).unwrap();
        assert!(check_radii(&g, &[]).is_err());
        assert!(check_radii(&g, &[0.5, 0.5]).is_err());
        assert!(matches!(check_radii(&g, &[0.5, 2.0]), Err(Error::RadiusOutsideBox { .. })));
    }
}
