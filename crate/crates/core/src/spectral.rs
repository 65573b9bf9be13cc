//! Spectral abscissa, Dirichlet eigenvalues and localized eigenvalue probes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{smallest_eigenpairs_shifted, EigenOptions};
use crate::error::{Error, Result};
use crate::geometry::{Field, Grid, Region};
use crate::measure::{rasterize, MeasureSpec, RasterMeasure};
use crate::operator::StencilMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralOperator {
    /// `−Δ + 1 + μ` with Dirichlet conditions on masked nodes.
    Abscissa,
    /// `−Δ` with μ acting only through its mask.
    Dirichlet,
    /// `−Δ + μ⌊H` on a cube with natural boundary conditions.
    NaturalCube,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    #[serde(with = "crate::real::vec")]
    pub eigenvalues: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenfields: Option<Vec<Field>>,
    pub residuals: Vec<f64>,
    /// Weighted Rayleigh quotient of each eigenfield.
    #[serde(with = "crate::real::vec")]
    pub rayleigh_quotients: Vec<f64>,
    pub operator: SpectralOperator,
    pub converged: bool,
    pub iterations: usize,
}

impl SpectralResult {
    fn empty(operator: SpectralOperator) -> Self {
        SpectralResult {
            eigenvalues: vec![f64::INFINITY],
            eigenfields: None,
            residuals: vec![0.0],
            rayleigh_quotients: vec![f64::INFINITY],
            operator,
            converged: true,
            iterations: 0,
        }
    }

    /// Smallest eigenvalue.
    pub fn lambda1(&self) -> f64 {
        self.eigenvalues[0]
    }
}

/// A profile sample, `value` possibly `+∞`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub r: f64,
    #[serde(with = "crate::real")]
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeShape {
    Ball,
    Cube,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeValue {
    pub center: Vec<f64>,
    #[serde(with = "crate::real")]
    pub lambda: f64,
}

fn solve_operator(
    a: &StencilMatrix,
    grid: &Grid,
    k: usize,
    operator: SpectralOperator,
    opts: &EigenOptions,
    keep_fields: bool,
    shift: f64,
) -> Result<SpectralResult> {
    let pairs = smallest_eigenpairs_shifted(a, k, opts, shift)?;
    let rayleigh_quotients = pairs.values.clone();
    let eigenfields = if keep_fields {
        let fields = pairs
            .vectors
            .iter()
            .map(|v| {
                // unit L² norm with the h^dim weight
                let s = 1.0 / grid.cell_volume().sqrt();
                let full = a.scatter(&v.iter().map(|x| x * s).collect::<Vec<_>>(), grid.len(), 0.0);
                Field::new(grid.clone(), full)
            })
            .collect::<Result<Vec<_>>>()?;
        Some(fields)
    } else {
        None
    };
    Ok(SpectralResult {
        eigenvalues: pairs.values,
        eigenfields,
        residuals: pairs.residuals,
        rayleigh_quotients,
        operator,
        converged: pairs.converged,
        iterations: pairs.iterations,
    })
}

/// Lowest eigenvalues of `−Δ_h + 1 + penalty` on nodes where `active` holds.
pub fn abscissa_on(
    raster: &RasterMeasure,
    active: &[bool],
    k: usize,
    opts: &EigenOptions,
    keep_fields: bool,
) -> Result<SpectralResult> {
    let grid = raster.grid();
    if !active.iter().any(|&a| a) {
        return Ok(SpectralResult::empty(SpectralOperator::Abscissa));
    }
    let a = StencilMatrix::shifted_laplacian(grid, active, 1.0, raster.penalty());
    let shift = abscissa_shift(&a, raster.penalty());
    solve_operator(&a, grid, k, SpectralOperator::Abscissa, opts, keep_fields, shift)
}

/// Lower bound `1 + min penalty` on the spectrum of `−Δ_h + 1 + penalty`:
/// the Dirichlet Laplacian part is positive definite, so the shifted matrix
/// stays a valid preconditioner.
fn abscissa_shift(a: &StencilMatrix, penalty: &[f64]) -> f64 {
    1.0 + a.nodes().iter().map(|&i| penalty[i]).fold(f64::INFINITY, f64::min)
}

fn unmasked(raster: &RasterMeasure) -> Vec<bool> {
    raster.penalty().iter().map(|&p| p != f64::INFINITY).collect()
}

/// `λ₁(μ)`: smallest eigenvalue of the masked `−Δ_h + 1 + penalty`.
///
/// Returns `+∞` when every node is masked.
pub fn spectral_abscissa(measure: &MeasureSpec, grid: &Grid) -> Result<SpectralResult> {
    spectral_abscissa_with(measure, grid, &EigenOptions::default(), true)
}

pub fn spectral_abscissa_with(
    measure: &MeasureSpec,
    grid: &Grid,
    opts: &EigenOptions,
    keep_fields: bool,
) -> Result<SpectralResult> {
    let raster = rasterize(measure, grid)?;
    abscissa_on(&raster, &unmasked(&raster), 1, opts, keep_fields)
}

/// The `k` smallest eigenvalues of the Dirichlet Laplacian of `omega`.
pub fn dirichlet_eigenvalues(omega: &Region, grid: &Grid, k: usize) -> Result<SpectralResult> {
    let raster = rasterize(&MeasureSpec::inf_outside(omega.clone()), grid)?;
    dirichlet_eigenvalues_raster(&raster, k, &EigenOptions::default(), true)
}

/// Dirichlet Laplacian eigenvalues on the unmasked nodes of a raster.
pub fn dirichlet_eigenvalues_raster(
    raster: &RasterMeasure,
    k: usize,
    opts: &EigenOptions,
    keep_fields: bool,
) -> Result<SpectralResult> {
    let grid = raster.grid();
    let active = unmasked(raster);
    let available = active.iter().filter(|&&a| a).count();
    if available < k {
        return Err(Error::InsufficientDofs { needed: k, available });
    }
    let a = StencilMatrix::shifted_laplacian(grid, &active, 0.0, &vec![0.0; grid.len()]);
    solve_operator(&a, grid, k, SpectralOperator::Dirichlet, opts, keep_fields, 0.0)
}

/// `(R, λ₁(μ⌈B_R^c))` per radius.
pub fn tail_abscissa_profile(
    measure: &MeasureSpec,
    grid: &Grid,
    radii: &[f64],
) -> Result<Vec<ProfilePoint>> {
    let raster = rasterize(measure, grid)?;
    tail_abscissa_profile_raster(&raster, radii, &EigenOptions::default())
}

pub fn tail_abscissa_profile_raster(
    raster: &RasterMeasure,
    radii: &[f64],
    opts: &EigenOptions,
) -> Result<Vec<ProfilePoint>> {
    let grid = raster.grid();
    let limit = grid.inradius();
    if let Some(&r) = radii.iter().find(|&&r| !(r > 0.0) || r > limit) {
        return Err(Error::RadiusOutsideBox { radius: r, limit });
    }
    let base = unmasked(raster);
    radii
        .par_iter()
        .map(|&r| {
            // complement of the open ball B_R, matching the center test
            let active: Vec<bool> =
                (0..grid.len()).map(|i| base[i] && grid.node_radius(i) >= r).collect();
            let res = abscissa_on(raster, &active, 1, opts, false)?;
            check_converged(&res)?;
            Ok(ProfilePoint { r, value: res.lambda1() })
        })
        .collect()
}

fn check_converged(res: &SpectralResult) -> Result<()> {
    if res.converged {
        Ok(())
    } else {
        Err(Error::Solver(format!(
            "eigensolver stopped with residual {:.3e} at λ = {}",
            res.residuals[0], res.eigenvalues[0]
        )))
    }
}

/// Localized `λ₁` at each center.
///
/// `Ball` probes return `λ₁(μ⌈B_h(x))`. `Cube` probes treat `x` as the cube
/// center, `H = [x − h/2, x + h/2)`, and return the infimum of
/// `(∫_H|∇u|² + ∫_H u² dμ) / ∫_H u²` with natural boundary conditions on `∂H`.
pub fn local_probe(
    measure: &MeasureSpec,
    grid: &Grid,
    centers: &[Vec<f64>],
    h_ball: f64,
    shape: ProbeShape,
) -> Result<Vec<ProbeValue>> {
    let raster = rasterize(measure, grid)?;
    local_probe_raster(&raster, centers, h_ball, shape, &EigenOptions::default())
}

pub fn local_probe_raster(
    raster: &RasterMeasure,
    centers: &[Vec<f64>],
    h_ball: f64,
    shape: ProbeShape,
    opts: &EigenOptions,
) -> Result<Vec<ProbeValue>> {
    let grid = raster.grid();
    if !(h_ball > 0.0) {
        return Err(Error::InvalidArgument("probe size must be positive".into()));
    }
    for c in centers {
        if c.len() != grid.dim() {
            return Err(Error::DimensionMismatch { expected: grid.dim(), found: c.len() });
        }
        let reach = match shape {
            ProbeShape::Ball => h_ball,
            ProbeShape::Cube => 0.5 * h_ball,
        };
        if !grid.contains_ball(c, reach) {
            return Err(Error::ProbeOutsideBox { center: c.clone() });
        }
    }
    centers
        .par_iter()
        .map(|c| {
            let lambda = match shape {
                ProbeShape::Ball => ball_probe(raster, c, h_ball, opts)?,
                ProbeShape::Cube => cube_probe(raster, c, h_ball, opts)?,
            };
            Ok(ProbeValue { center: c.clone(), lambda })
        })
        .collect()
}

/// Nodes whose centers lie in the closed box `[lo, hi]`.
fn nodes_in_box(grid: &Grid, lo: &[f64], hi: &[f64]) -> Vec<usize> {
    let dim = grid.dim();
    let shape = grid.shape();
    let strides = grid.strides();
    let mut first = [0usize; 3];
    let mut last = [0usize; 3];
    for a in 0..dim {
        let f = ((lo[a] - grid.lo()[a]) / grid.h() - 0.5).ceil().max(0.0);
        let l = ((hi[a] - grid.lo()[a]) / grid.h() - 0.5).floor().min(shape[a] as f64 - 1.0);
        if l < f {
            return Vec::new();
        }
        first[a] = f as usize;
        last[a] = l as usize;
    }
    let mut out = Vec::new();
    let mut m = first;
    loop {
        out.push((0..dim).map(|a| m[a] * strides[a]).sum());
        let mut a = dim;
        loop {
            if a == 0 {
                return out;
            }
            a -= 1;
            if m[a] < last[a] {
                m[a] += 1;
                break;
            }
            m[a] = first[a];
        }
    }
}

pub(crate) fn ball_active(raster: &RasterMeasure, c: &[f64], r: f64) -> Vec<bool> {
    let grid = raster.grid();
    let ball = Region::ball(c.to_vec(), r);
    let dim = grid.dim();
    let lo: Vec<f64> = c.iter().map(|x| x - r).collect();
    let hi: Vec<f64> = c.iter().map(|x| x + r).collect();
    let mut active = vec![false; grid.len()];
    for i in nodes_in_box(grid, &lo, &hi) {
        active[i] = !raster.is_masked(i) && ball.contains_unchecked(&grid.node(i)[..dim]);
    }
    active
}

/// Nodes inside the cube centered at `c`, and the unmasked ones among them.
pub(crate) fn cube_sets(raster: &RasterMeasure, c: &[f64], edge: f64) -> (Vec<bool>, Vec<bool>) {
    let grid = raster.grid();
    let dim = grid.dim();
    let corner: Vec<f64> = c.iter().map(|x| x - 0.5 * edge).collect();
    let far: Vec<f64> = c.iter().map(|x| x + 0.5 * edge).collect();
    let cube = Region::cube(corner.clone(), edge);
    let mut inside = vec![false; grid.len()];
    let mut active = vec![false; grid.len()];
    for i in nodes_in_box(grid, &corner, &far) {
        inside[i] = cube.contains_unchecked(&grid.node(i)[..dim]);
        active[i] = inside[i] && !raster.is_masked(i);
    }
    (inside, active)
}

/// Operator on `active`. With `natural`, edges leaving that set are dropped
/// and no zeroth-order term is added.
fn probe_matrix(raster: &RasterMeasure, active: &[bool], natural: Option<&[bool]>) -> StencilMatrix {
    let grid = raster.grid();
    let Some(inside) = natural else {
        return StencilMatrix::shifted_laplacian(grid, active, 1.0, raster.penalty());
    };
    let dim = grid.dim();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let shape = grid.shape();
    let strides = grid.strides();
    let penalty = raster.penalty();
    // Edges to masked nodes inside H keep their Dirichlet weight.
    StencilMatrix::build(
        grid,
        active,
        |i| {
            let m = grid.multi_index(i);
            let mut nb = 0usize;
            for ax in 0..dim {
                if m[ax] > 0 && inside[i - strides[ax]] {
                    nb += 1;
                }
                if m[ax] + 1 < shape[ax] && inside[i + strides[ax]] {
                    nb += 1;
                }
            }
            nb as f64 * inv_h2 + penalty[i]
        },
        |_, _| inv_h2,
    )
}

/// Lowest eigenpair on `active` as `(λ, dof nodes, dof vector)`, or `None`
/// when no node is active.
pub(crate) fn lowest_pair_on(
    raster: &RasterMeasure,
    active: &[bool],
    natural: Option<&[bool]>,
    opts: &EigenOptions,
) -> Result<Option<(f64, Vec<usize>, Vec<f64>)>> {
    if !active.iter().any(|&a| a) {
        return Ok(None);
    }
    let a = probe_matrix(raster, active, natural);
    let operator = if natural.is_some() { SpectralOperator::NaturalCube } else { SpectralOperator::Abscissa };
    let shift = if natural.is_some() { 0.0 } else { abscissa_shift(&a, raster.penalty()) };
    let mut pairs = smallest_eigenpairs_shifted(&a, 1, opts, shift)?;
    let res = SpectralResult {
        eigenvalues: pairs.values.clone(),
        eigenfields: None,
        residuals: pairs.residuals.clone(),
        rayleigh_quotients: pairs.values.clone(),
        operator,
        converged: pairs.converged,
        iterations: pairs.iterations,
    };
    check_converged(&res)?;
    let mut lambda = res.lambda1();
    if natural.is_some() {
        lambda = lambda.max(0.0);
    }
    Ok(Some((lambda, a.nodes().to_vec(), pairs.vectors.swap_remove(0))))
}

/// Lowest eigenvalue on `active`, `+∞` when no node is active.
pub(crate) fn lowest_on(
    raster: &RasterMeasure,
    active: &[bool],
    natural: Option<&[bool]>,
    opts: &EigenOptions,
) -> Result<f64> {
    Ok(lowest_pair_on(raster, active, natural, opts)?.map_or(f64::INFINITY, |p| p.0))
}

fn ball_probe(raster: &RasterMeasure, c: &[f64], r: f64, opts: &EigenOptions) -> Result<f64> {
    lowest_on(raster, &ball_active(raster, c, r), None, opts)
}

fn cube_probe(raster: &RasterMeasure, c: &[f64], edge: f64, opts: &EigenOptions) -> Result<f64> {
    let (inside, active) = cube_sets(raster, c, edge);
    lowest_on(raster, &active, Some(&inside), opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_enumeration_matches_a_scan() {
        let g = Grid::new(&[-1.0, -2.0], &[1.5, 1.0], 0.25).unwrap();
        let (lo, hi) = ([-0.3, -1.1], [0.9, 0.125]);
        let got = nodes_in_box(&g, &lo, &hi);
        let want: Vec<usize> = (0..g.len())
            .filter(|&i| {
                let x = g.node(i);
                (0..2).all(|a| x[a] >= lo[a] && x[a] <= hi[a])
            })
            .collect();
        assert_eq!(got, want);
        assert!(nodes_in_box(&g, &[5.0, 0.0], &[6.0, 1.0]).is_empty());
    }

    #[test]
    fn fully_masked_abscissa_is_infinite() {
        let g = Grid::new(&[-1.0], &[1.0], 0.1).unwrap();
        let r = spectral_abscissa(&MeasureSpec::inf_on(Region::Space { dim: 1 }), &g).unwrap();
        assert_eq!(r.lambda1(), f64::INFINITY);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"inf\""));
    }

    #[test]
    fn zero_measure_cube_quotient_vanishes() {
        let g = Grid::new(&[-2.0, -2.0], &[2.0, 2.0], 0.1).unwrap();
        let v = local_probe(&MeasureSpec::Zero, &g, &[vec![0.0, 0.0]], 1.0, ProbeShape::Cube).unwrap();
        assert!(v[0].lambda.abs() < 1e-8, "{}", v[0].lambda);
    }

    #[test]
    fn probes_outside_the_box_are_rejected() {
        let g = Grid::new(&[-2.0, -2.0], &[2.0, 2.0], 0.1).unwrap();
        let err = local_probe(&MeasureSpec::Zero, &g, &[vec![1.5, 0.0]], 1.0, ProbeShape::Ball);
        assert!(matches!(err, Err(Error::ProbeOutsideBox { .. })));
    }

    #[test]
    fn insufficient_dofs_reported() {
        let g = Grid::new(&[-1.0, -1.0], &[1.0, 1.0], 0.5).unwrap();
        let err = dirichlet_eigenvalues(&Region::ball(vec![0.0, 0.0], 0.5), &g, 5);
        assert!(matches!(err, Err(Error::InsufficientDofs { .. })));
    }
}
