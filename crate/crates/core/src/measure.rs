//! Capacitary measures and their rasterization onto grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{Field, Grid, Region};

/// Symbolic description of a measure μ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MeasureSpec {
    Zero,
    /// Density `V(x) dx` given in closed form.
    Potential { expr: Expr },
    /// Density sampled on a grid; the grid must match the raster grid.
    PotentialField { field: Field },
    /// `+∞` outside the region, i.e. Dirichlet conditions off `Ω`.
    InfOutside { region: Region },
    /// `+∞` on the region.
    InfOn { region: Region },
    Sum { terms: Vec<MeasureSpec> },
    /// `μ + ∞` outside `Ω`.
    DirichletRestriction { base: Box<MeasureSpec>, region: Region },
    /// `μ` inside `Ω` and nothing outside (no mask on the complement).
    ClassicalRestriction { base: Box<MeasureSpec>, region: Region },
}

impl MeasureSpec {
    pub fn potential(expr: &str) -> Result<MeasureSpec> {
        Ok(MeasureSpec::Potential { expr: Expr::parse(expr)? })
    }

    pub fn inf_outside(region: Region) -> MeasureSpec {
        MeasureSpec::InfOutside { region }
    }

    pub fn inf_on(region: Region) -> MeasureSpec {
        MeasureSpec::InfOn { region }
    }

    pub fn dirichlet_restriction(self, region: Region) -> MeasureSpec {
        MeasureSpec::DirichletRestriction { base: Box::new(self), region }
    }

    pub fn classical_restriction(self, region: Region) -> MeasureSpec {
        MeasureSpec::ClassicalRestriction { base: Box::new(self), region }
    }

    /// Spatial dimension if the spec pins one down.
    pub fn dim(&self) -> Result<Option<usize>> {
        let mut found: Option<usize> = None;
        let mut merge = |d: usize| -> Result<()> {
            match found {
                Some(f) if f != d => Err(Error::DimensionMismatch { expected: f, found: d }),
                _ => {
                    found = Some(d);
                    Ok(())
                }
            }
        };
        match self {
            MeasureSpec::Zero | MeasureSpec::Potential { .. } => {}
            MeasureSpec::PotentialField { field } => merge(field.grid().dim())?,
            MeasureSpec::InfOutside { region } | MeasureSpec::InfOn { region } => {
                merge(region.dim()?)?
            }
            MeasureSpec::Sum { terms } => {
                for t in terms {
                    if let Some(d) = t.dim()? {
                        merge(d)?;
                    }
                }
            }
            MeasureSpec::DirichletRestriction { base, region }
            | MeasureSpec::ClassicalRestriction { base, region } => {
                if let Some(d) = base.dim()? {
                    merge(d)?;
                }
                merge(region.dim()?)?;
            }
        }
        Ok(found)
    }

    /// Checks that the spec can be rasterized on a grid of dimension `dim`.
    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if let Some(d) = self.dim()? {
            if d != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: d });
            }
        }
        self.check_exprs(dim)
    }

    fn check_exprs(&self, dim: usize) -> Result<()> {
        match self {
            MeasureSpec::Potential { expr } if expr.min_dim() > dim => {
                Err(Error::DimensionMismatch { expected: dim, found: expr.min_dim() })
            }
            MeasureSpec::Sum { terms } => terms.iter().try_for_each(|t| t.check_exprs(dim)),
            MeasureSpec::DirichletRestriction { base, .. }
            | MeasureSpec::ClassicalRestriction { base, .. } => base.check_exprs(dim),
            _ => Ok(()),
        }
    }
}

/// `μ⌈B(0, R)`.
pub fn restrict_to_ball(spec: &MeasureSpec, dim: usize, radius: f64) -> Result<MeasureSpec> {
    positive(radius, "radius")?;
    Ok(spec.clone().dirichlet_restriction(Region::origin_ball(dim, radius)))
}

/// `μ⌈(ℝᴺ ∖ B(0, R))`.
pub fn restrict_outside_ball(spec: &MeasureSpec, dim: usize, radius: f64) -> Result<MeasureSpec> {
    positive(radius, "radius")?;
    Ok(spec.clone().dirichlet_restriction(Region::origin_ball(dim, radius).complement()))
}

/// `μ⌈B(center, r)`.
pub fn restrict_to_ball_at(spec: &MeasureSpec, center: &[f64], radius: f64) -> Result<MeasureSpec> {
    positive(radius, "radius")?;
    Ok(spec.clone().dirichlet_restriction(Region::ball(center.to_vec(), radius)))
}

/// Dirichlet restriction to the cube `[corner, corner + edge)`.
pub fn restrict_to_cube(spec: &MeasureSpec, corner: &[f64], edge: f64) -> Result<MeasureSpec> {
    positive(edge, "edge")?;
    Ok(spec.clone().dirichlet_restriction(Region::cube(corner.to_vec(), edge)))
}

/// Classical restriction `μ⌊H` to the cube `H = [corner, corner + edge)`.
pub fn classical_restrict_to_cube(
    spec: &MeasureSpec,
    corner: &[f64],
    edge: f64,
) -> Result<MeasureSpec> {
    positive(edge, "edge")?;
    Ok(spec.clone().classical_restriction(Region::cube(corner.to_vec(), edge)))
}

fn positive(v: f64, what: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{what} must be positive and finite, got {v}")))
    }
}

/// Per-node penalties of a measure on a grid; `+∞` marks Dirichlet nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RasterMeasure {
    grid: Grid,
    #[serde(with = "crate::real::vec")]
    penalty: Vec<f64>,
}

impl RasterMeasure {
    /// Builds a raster from penalties in `[0, +∞]`.
    pub fn new(grid: Grid, penalty: Vec<f64>) -> Result<RasterMeasure> {
        if penalty.len() != grid.len() {
            return Err(Error::InvalidField("penalty length differs from grid size".into()));
        }
        if let Some(i) = penalty.iter().position(|v| !(*v >= 0.0)) {
            let x = grid.node(i);
            return Err(Error::NegativePotential {
                value: penalty[i],
                point: x[..grid.dim()].to_vec(),
            });
        }
        Ok(RasterMeasure { grid, penalty })
    }

    pub fn zero(grid: &Grid) -> RasterMeasure {
        RasterMeasure { grid: grid.clone(), penalty: vec![0.0; grid.len()] }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn penalty(&self) -> &[f64] {
        &self.penalty
    }

    pub fn is_masked(&self, i: usize) -> bool {
        self.penalty[i] == f64::INFINITY
    }

    pub fn mask(&self) -> Vec<bool> {
        self.penalty.iter().map(|&p| p == f64::INFINITY).collect()
    }

    pub fn active_count(&self) -> usize {
        self.penalty.iter().filter(|&&p| p != f64::INFINITY).count()
    }

    /// Pointwise sum with `+∞` absorbing.
    pub fn add(&self, other: &RasterMeasure) -> Result<RasterMeasure> {
        self.grid.check_same(&other.grid)?;
        let penalty = self.penalty.iter().zip(&other.penalty).map(|(a, b)| a + b).collect();
        Ok(RasterMeasure { grid: self.grid.clone(), penalty })
    }

    /// Adds `+∞` on every node where `mask` is true.
    pub fn with_mask(mut self, mask: &[bool]) -> RasterMeasure {
        for (p, &m) in self.penalty.iter_mut().zip(mask) {
            if m {
                *p = f64::INFINITY;
            }
        }
        self
    }

    /// True when every penalty of `self` is ≤ the corresponding penalty of `other`.
    pub fn le(&self, other: &RasterMeasure) -> bool {
        self.grid == other.grid && self.penalty.iter().zip(&other.penalty).all(|(a, b)| a <= b)
    }
}

/// Rasterizes `spec` onto `grid`.
///
/// Potentials are sampled at cell centers. `InfOutside` masks nodes whose
/// centers lie outside the region; `InfOn` masks nodes whose closed cells
/// meet the set, so thin sets survive. Slit strips without an explicit slit
/// width get one grid cell.
pub fn rasterize(spec: &MeasureSpec, grid: &Grid) -> Result<RasterMeasure> {
    spec.check_dim(grid.dim())?;
    let penalty = raster_values(spec, grid)?;
    Ok(RasterMeasure { grid: grid.clone(), penalty })
}

fn raster_values(spec: &MeasureSpec, grid: &Grid) -> Result<Vec<f64>> {
    let dim = grid.dim();
    let n = grid.len();
    match spec {
        MeasureSpec::Zero => Ok(vec![0.0; n]),
        MeasureSpec::Potential { expr } => {
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                let x = grid.node(i);
                let v = expr.eval(&x[..dim]);
                if !(v >= 0.0) {
                    return Err(Error::NegativePotential { value: v, point: x[..dim].to_vec() });
                }
                // -0.0 would otherwise make otherwise equal rasters differ bitwise.
                out.push(v + 0.0);
            }
            Ok(out)
        }
        MeasureSpec::PotentialField { field } => {
            grid.check_same(field.grid())?;
            if let Some(i) = field.values().iter().position(|v| !(*v >= 0.0)) {
                let x = grid.node(i);
                return Err(Error::NegativePotential {
                    value: field.values()[i],
                    point: x[..dim].to_vec(),
                });
            }
            Ok(field.values().iter().map(|v| v + 0.0).collect())
        }
        MeasureSpec::InfOutside { region } => {
            region.validate()?;
            let region = region.with_default_slit_width(grid.h());
            Ok((0..n)
                .map(|i| {
                    if region.contains_unchecked(&grid.node(i)[..dim]) {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                })
                .collect())
        }
        MeasureSpec::InfOn { region } => {
            region.validate()?;
            let region = region.with_default_slit_width(grid.h());
            let half = 0.5 * grid.h();
            Ok((0..n)
                .map(|i| {
                    if region.intersects_cell(&grid.node(i)[..dim], half) {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                })
                .collect())
        }
        MeasureSpec::Sum { terms } => {
            let mut iter = terms.iter();
            let mut acc = match iter.next() {
                Some(t) => raster_values(t, grid)?,
                None => return Ok(vec![0.0; n]),
            };
            for t in iter {
                let v = raster_values(t, grid)?;
                acc.iter_mut().zip(&v).for_each(|(a, b)| *a += b);
            }
            Ok(acc)
        }
        MeasureSpec::DirichletRestriction { base, region } => {
            let mut acc = raster_values(base, grid)?;
            let outside = raster_values(&MeasureSpec::InfOutside { region: region.clone() }, grid)?;
            acc.iter_mut().zip(&outside).for_each(|(a, b)| *a += b);
            Ok(acc)
        }
        MeasureSpec::ClassicalRestriction { base, region } => {
            region.validate()?;
            let region = region.with_default_slit_width(grid.h());
            let mut acc = raster_values(base, grid)?;
            for (i, a) in acc.iter_mut().enumerate() {
                if !region.contains_unchecked(&grid.node(i)[..dim]) {
                    *a = 0.0;
                }
            }
            Ok(acc)
        }
    }
}
