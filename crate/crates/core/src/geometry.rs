//! Regions of ℝᴺ, cell-centered tensor grids and the discrete Laplacian.
//!
//! Regions are exact membership predicates. Balls and boxes are open,
//! `HalfOpenCube` is `[x, x+h)`, and a slit strip is the open strip
//! `(start, ∞) × (0, width)ᴺ⁻¹` with thin vertical slits removed.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// Slit abscissas of a [`SlitStrip`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlitSequence {
    /// Strictly increasing list of abscissas.
    Explicit { positions: Vec<f64> },
    /// `x_n = ln(1 + n)` for `n ≥ 1`.
    Log,
    /// `x_n = scale · n^exponent` for `n ≥ 1`.
    Power { scale: f64, exponent: f64 },
}

impl SlitSequence {
    /// Distance from `x` to the nearest slit abscissa.
    pub fn distance(&self, x: f64) -> f64 {
        match self {
            SlitSequence::Explicit { positions } => {
                let k = positions.partition_point(|&p| p < x);
                let mut best = f64::INFINITY;
                if k < positions.len() {
                    best = best.min((positions[k] - x).abs());
                }
                if k > 0 {
                    best = best.min((x - positions[k - 1]).abs());
                }
                best
            }
            SlitSequence::Log => {
                // x_n is increasing in n, so only the neighbours of the real
                // solution of ln(1+n) = x can be nearest.
                let n_star = x.exp() - 1.0;
                nearest_of_monotone(n_star, x, |n| (1.0 + n).ln())
            }
            SlitSequence::Power { scale, exponent } => {
                let n_star = if x <= 0.0 {
                    0.0
                } else {
                    (x / scale).powf(1.0 / exponent)
                };
                nearest_of_monotone(n_star, x, |n| scale * n.powf(*exponent))
            }
        }
    }

    /// Abscissas not exceeding `limit`, capped at `max_count` entries.
    pub fn positions_up_to(&self, limit: f64, max_count: usize) -> Vec<f64> {
        let mut out = Vec::new();
        match self {
            SlitSequence::Explicit { positions } => {
                out.extend(positions.iter().copied().filter(|&p| p <= limit).take(max_count));
            }
            _ => {
                let mut n = 1u64;
                while out.len() < max_count {
                    let x = self.nth(n);
                    if x > limit {
                        break;
                    }
                    out.push(x);
                    n += 1;
                }
            }
        }
        out
    }

    fn nth(&self, n: u64) -> f64 {
        match self {
            SlitSequence::Explicit { positions } => positions[(n - 1) as usize],
            SlitSequence::Log => (1.0 + n as f64).ln(),
            SlitSequence::Power { scale, exponent } => scale * (n as f64).powf(*exponent),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            SlitSequence::Explicit { positions } => {
                if positions.iter().any(|p| !p.is_finite()) {
                    return Err(Error::InvalidRegion("slit abscissas must be finite".into()));
                }
                if positions.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidRegion(
                        "slit abscissas must be strictly increasing".into(),
                    ));
                }
                Ok(())
            }
            SlitSequence::Log => Ok(()),
            SlitSequence::Power { scale, exponent } => {
                if !(*scale > 0.0 && *exponent > 0.0) {
                    return Err(Error::InvalidRegion(
                        "power slit sequence needs positive scale and exponent".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

fn nearest_of_monotone(n_star: f64, x: f64, pos: impl Fn(f64) -> f64) -> f64 {
    if !n_star.is_finite() {
        return f64::INFINITY;
    }
    let base = n_star.floor().max(1.0);
    let mut best = f64::INFINITY;
    for k in [base - 1.0, base, base + 1.0, base + 2.0] {
        if k >= 1.0 {
            best = best.min((pos(k) - x).abs());
        }
    }
    best
}

/// Open strip `(start, ∞) × (0, width)ᴺ⁻¹` minus slits `{x₁ = x_n}` of
/// thickness `slit_width`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlitStrip {
    #[serde(default = "two")]
    pub dim: usize,
    pub start: f64,
    pub width: f64,
    pub slits: SlitSequence,
    /// Thickness of each slit. `None` means one grid cell when rasterized
    /// and a zero-thickness line for exact membership.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slit_width: Option<f64>,
}

fn two() -> usize {
    2
}

impl SlitStrip {
    fn contains(&self, p: &[f64]) -> bool {
        if p[0] <= self.start {
            return false;
        }
        if p[1..].iter().any(|&y| y <= 0.0 || y >= self.width) {
            return false;
        }
        self.slits.distance(p[0]) > 0.5 * self.slit_width.unwrap_or(0.0)
    }

    /// Whether the closed cell meets the complement of the strip.
    fn complement_meets_cell(&self, c: &[f64], half: f64) -> bool {
        if c[0] - half <= self.start {
            return true;
        }
        if c[1..].iter().any(|&y| y - half <= 0.0 || y + half >= self.width) {
            return true;
        }
        self.slits.distance(c[0]) <= half + 0.5 * self.slit_width.unwrap_or(0.0)
    }
}

/// A region of ℝᴺ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Region {
    /// All of ℝᴺ.
    Space { dim: usize },
    /// Open ball.
    Ball { center: Vec<f64>, radius: f64 },
    /// Open box `(lo, hi)`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Half-open cube `[corner, corner + edge)`.
    HalfOpenCube { corner: Vec<f64>, edge: f64 },
    Union { parts: Vec<Region> },
    Intersection { parts: Vec<Region> },
    Complement { inner: Box<Region> },
    SlitStrip(SlitStrip),
}

impl Region {
    pub fn ball(center: impl Into<Vec<f64>>, radius: f64) -> Self {
        Region::Ball { center: center.into(), radius }
    }

    pub fn boxed(lo: impl Into<Vec<f64>>, hi: impl Into<Vec<f64>>) -> Self {
        Region::Box { lo: lo.into(), hi: hi.into() }
    }

    pub fn cube(corner: impl Into<Vec<f64>>, edge: f64) -> Self {
        Region::HalfOpenCube { corner: corner.into(), edge }
    }

    pub fn complement(self) -> Self {
        Region::Complement { inner: Box::new(self) }
    }

    /// Ball of radius `radius` centered at the origin of ℝᵈⁱᵐ.
    pub fn origin_ball(dim: usize, radius: f64) -> Self {
        Region::Ball { center: vec![0.0; dim], radius }
    }

    /// Spatial dimension, checked for consistency across composite regions.
    pub fn dim(&self) -> Result<usize> {
        match self {
            Region::Space { dim } => Ok(*dim),
            Region::Ball { center, .. } => Ok(center.len()),
            Region::Box { lo, .. } => Ok(lo.len()),
            Region::HalfOpenCube { corner, .. } => Ok(corner.len()),
            Region::Union { parts } | Region::Intersection { parts } => {
                let first = parts
                    .first()
                    .ok_or_else(|| Error::InvalidRegion("empty union/intersection".into()))?
                    .dim()?;
                for p in &parts[1..] {
                    let d = p.dim()?;
                    if d != first {
                        return Err(Error::DimensionMismatch { expected: first, found: d });
                    }
                }
                Ok(first)
            }
            Region::Complement { inner } => inner.dim(),
            Region::SlitStrip(s) => Ok(s.dim),
        }
    }

    /// Checks the structural invariants (positive radii, `lo < hi`, ...).
    pub fn validate(&self) -> Result<()> {
        let dim = self.dim()?;
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidRegion(format!("dimension {dim} not in 1..=3")));
        }
        match self {
            Region::Space { .. } => Ok(()),
            Region::Ball { center, radius } => {
                finite(center)?;
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(Error::InvalidRegion(format!("ball radius {radius} must be > 0")));
                }
                Ok(())
            }
            Region::Box { lo, hi } => {
                if lo.len() != hi.len() {
                    return Err(Error::DimensionMismatch { expected: lo.len(), found: hi.len() });
                }
                if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                    return Err(Error::InvalidRegion("box needs lo < hi componentwise".into()));
                }
                Ok(())
            }
            Region::HalfOpenCube { corner, edge } => {
                finite(corner)?;
                if !(*edge > 0.0 && edge.is_finite()) {
                    return Err(Error::InvalidRegion(format!("cube edge {edge} must be > 0")));
                }
                Ok(())
            }
            Region::Union { parts } | Region::Intersection { parts } => {
                parts.iter().try_for_each(Region::validate)
            }
            Region::Complement { inner } => inner.validate(),
            Region::SlitStrip(s) => {
                if s.dim < 2 {
                    return Err(Error::InvalidRegion("slit strip needs dimension >= 2".into()));
                }
                if !(s.width > 0.0) {
                    return Err(Error::InvalidRegion("slit strip width must be > 0".into()));
                }
                if let Some(w) = s.slit_width {
                    if !(w >= 0.0) {
                        return Err(Error::InvalidRegion("slit width must be >= 0".into()));
                    }
                }
                s.slits.validate()
            }
        }
    }

    /// Exact set membership.
    pub fn contains(&self, point: &[f64]) -> Result<bool> {
        let dim = self.dim()?;
        if point.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: point.len() });
        }
        Ok(self.contains_unchecked(point))
    }

    /// Membership without the dimension check. `point` must have the
    /// region's dimension.
    pub fn contains_unchecked(&self, p: &[f64]) -> bool {
        match self {
            Region::Space { .. } => true,
            Region::Ball { center, radius } => {
                let d2: f64 = center.iter().zip(p).map(|(c, x)| (x - c) * (x - c)).sum();
                d2 < radius * radius
            }
            Region::Box { lo, hi } => {
                lo.iter().zip(hi).zip(p).all(|((a, b), x)| a < x && x < b)
            }
            Region::HalfOpenCube { corner, edge } => {
                corner.iter().zip(p).all(|(c, x)| *c <= *x && *x < c + edge)
            }
            Region::Union { parts } => parts.iter().any(|r| r.contains_unchecked(p)),
            Region::Intersection { parts } => parts.iter().all(|r| r.contains_unchecked(p)),
            Region::Complement { inner } => !inner.contains_unchecked(p),
            Region::SlitStrip(s) => s.contains(p),
        }
    }

    /// Whether the region meets the closed cell `[c - half, c + half]`.
    ///
    /// Exact for balls, boxes, cubes, unions of those and the complement of
    /// a slit strip; other composites are tested on a 5ᴺ lattice of points
    /// covering the cell.
    pub fn intersects_cell(&self, c: &[f64], half: f64) -> bool {
        match self {
            Region::Space { .. } => true,
            Region::Ball { center, radius } => {
                let d2: f64 = center
                    .iter()
                    .zip(c)
                    .map(|(ctr, x)| {
                        let q = (ctr - x).abs() - half;
                        if q > 0.0 {
                            q * q
                        } else {
                            0.0
                        }
                    })
                    .sum();
                d2 < radius * radius
            }
            Region::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .zip(c)
                .all(|((a, b), x)| *a < x + half && *b > x - half),
            Region::HalfOpenCube { corner, edge } => corner
                .iter()
                .zip(c)
                .all(|(k, x)| *k <= x + half && k + edge > x - half),
            Region::Union { parts } => parts.iter().any(|r| r.intersects_cell(c, half)),
            Region::Complement { inner } if matches!(**inner, Region::SlitStrip(_)) => {
                let Region::SlitStrip(s) = &**inner else { unreachable!() };
                s.complement_meets_cell(c, half)
            }
            _ => {
                let dim = c.len();
                let steps = 5usize;
                let total = steps.pow(dim as u32);
                let mut q = [0.0; MAX_DIM];
                (0..total).any(|mut k| {
                    for (a, qa) in q.iter_mut().enumerate().take(dim) {
                        let s = k % steps;
                        k /= steps;
                        *qa = c[a] - half + 2.0 * half * s as f64 / (steps - 1) as f64;
                    }
                    self.contains_unchecked(&q[..dim])
                })
            }
        }
    }

    /// Copy in which unset slit widths are replaced by `width`.
    pub fn with_default_slit_width(&self, width: f64) -> Region {
        match self {
            Region::SlitStrip(s) => {
                let mut s = s.clone();
                if s.slit_width.is_none() {
                    s.slit_width = Some(width);
                }
                Region::SlitStrip(s)
            }
            Region::Union { parts } => Region::Union {
                parts: parts.iter().map(|r| r.with_default_slit_width(width)).collect(),
            },
            Region::Intersection { parts } => Region::Intersection {
                parts: parts.iter().map(|r| r.with_default_slit_width(width)).collect(),
            },
            Region::Complement { inner } => Region::Complement {
                inner: Box::new(inner.with_default_slit_width(width)),
            },
            other => other.clone(),
        }
    }
}

fn finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidRegion("coordinates must be finite".into()))
    }
}

#[derive(Serialize, Deserialize)]
struct GridSpec {
    dim: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    h: f64,
}

/// Uniform cell-centered grid over a box.
///
/// Node `i` along axis `a` sits at `lo[a] + (i + ½)·h`. Linear indices run
/// with the last axis fastest.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid {
    dim: usize,
    lo: [f64; MAX_DIM],
    hi: [f64; MAX_DIM],
    h: f64,
    n: [usize; MAX_DIM],
    adjusted: bool,
}

impl From<Grid> for GridSpec {
    fn from(g: Grid) -> Self {
        GridSpec { dim: g.dim, lo: g.lo().to_vec(), hi: g.hi().to_vec(), h: g.h }
    }
}

impl TryFrom<GridSpec> for Grid {
    type Error = Error;
    fn try_from(s: GridSpec) -> Result<Self> {
        if s.lo.len() != s.dim || s.hi.len() != s.dim {
            return Err(Error::InvalidGrid("lo/hi length must equal dim".into()));
        }
        Grid::new(&s.lo, &s.hi, s.h)
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.h.to_bits() == other.h.to_bits()
            && (0..self.dim).all(|a| {
                self.lo[a].to_bits() == other.lo[a].to_bits()
                    && self.hi[a].to_bits() == other.hi[a].to_bits()
            })
    }
}

const EDGE_REL_TOL: f64 = 1e-6;
/// Minimum number of cells per axis.
pub const MIN_CELLS: usize = 2;

impl Grid {
    /// Grid covering the box `[lo, hi]` with spacing `h`.
    ///
    /// When `h` does not divide an edge to one part in 10⁶, the cell count
    /// is rounded and `hi` moved to `lo + n·h`; [`Grid::adjusted`] reports it.
    pub fn new(lo: &[f64], hi: &[f64], h: f64) -> Result<Grid> {
        let dim = lo.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if hi.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: hi.len() });
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidGrid(format!("spacing h = {h} must be > 0")));
        }
        let mut g = Grid {
            dim,
            lo: [0.0; MAX_DIM],
            hi: [0.0; MAX_DIM],
            h,
            n: [1; MAX_DIM],
            adjusted: false,
        };
        for a in 0..dim {
            let (l, u) = (lo[a], hi[a]);
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::InvalidGrid(format!("degenerate box edge [{l}, {u}]")));
            }
            let len = u - l;
            let n = (len / h).round();
            if n < MIN_CELLS as f64 {
                return Err(Error::InvalidGrid(format!(
                    "axis {a} has {n} cells; at least {MIN_CELLS} are required"
                )));
            }
            g.lo[a] = l;
            g.n[a] = n as usize;
            if (n * h - len).abs() > EDGE_REL_TOL * len {
                g.hi[a] = l + n * h;
                g.adjusted = true;
            } else {
                g.hi[a] = u;
            }
        }
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo[..self.dim]
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi[..self.dim]
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Cells per axis.
    pub fn shape(&self) -> &[usize] {
        &self.n[..self.dim]
    }

    /// True when `hi` had to be moved because `h` did not divide the box.
    pub fn adjusted(&self) -> bool {
        self.adjusted
    }

    pub fn len(&self) -> usize {
        self.n[..self.dim].iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Volume of one cell, the weight of the discrete inner product.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    /// Linear stride of each axis.
    pub fn strides(&self) -> [usize; MAX_DIM] {
        let mut s = [0; MAX_DIM];
        let mut acc = 1;
        for a in (0..self.dim).rev() {
            s[a] = acc;
            acc *= self.n[a];
        }
        s
    }

    /// Multi-index of a linear index.
    pub fn multi_index(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let mut m = [0; MAX_DIM];
        for a in (0..self.dim).rev() {
            m[a] = idx % self.n[a];
            idx /= self.n[a];
        }
        m
    }

    pub fn linear_index(&self, m: &[usize]) -> usize {
        let mut idx = 0;
        for a in 0..self.dim {
            idx = idx * self.n[a] + m[a];
        }
        idx
    }

    /// Center of node `idx`; only the first `dim` entries are meaningful.
    pub fn node(&self, idx: usize) -> [f64; MAX_DIM] {
        let m = self.multi_index(idx);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim {
            x[a] = self.lo[a] + (m[a] as f64 + 0.5) * self.h;
        }
        x
    }

    /// Euclidean norm of node `idx`.
    pub fn node_radius(&self, idx: usize) -> f64 {
        let x = self.node(idx);
        x[..self.dim].iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Distance from the origin to the nearest box face, or 0 when the
    /// origin lies outside the box.
    pub fn inradius(&self) -> f64 {
        (0..self.dim)
            .map(|a| (-self.lo[a]).min(self.hi[a]))
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    }

    /// Lowest eigenvalue of the continuous Dirichlet Laplacian on the box.
    pub fn box_mode(&self) -> f64 {
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        (0..self.dim).map(|a| pi2 / (self.hi[a] - self.lo[a]).powi(2)).sum()
    }

    /// Whether the closed ball `B(center, radius)` lies inside the box.
    pub fn contains_ball(&self, center: &[f64], radius: f64) -> bool {
        center.len() == self.dim
            && (0..self.dim)
                .all(|a| center[a] - radius >= self.lo[a] && center[a] + radius <= self.hi[a])
    }

    /// Same box refined to spacing `h / 2` and dilated about the origin by `scale`.
    pub fn refined(&self, scale: f64) -> Result<Grid> {
        let lo: Vec<f64> = self.lo().iter().map(|v| v * scale).collect();
        let hi: Vec<f64> = self.hi().iter().map(|v| v * scale).collect();
        Grid::new(&lo, &hi, self.h / 2.0)
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Builds the cell-centered grid for a `Region::Box`.
pub fn build_grid(region: &Region, h: f64) -> Result<Grid> {
    match region {
        Region::Box { lo, hi } => {
            region.validate()?;
            Grid::new(lo, hi, h)
        }
        _ => Err(Error::InvalidArgument("build_grid expects a Box region".into())),
    }
}

/// Grid-sampled scalar function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Field {
    grid: Grid,
    #[serde(with = "crate::real::vec")]
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.len() {
            return Err(Error::InvalidField(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidField("NaN value".into()));
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: &Grid) -> Field {
        Field::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid, c: f64) -> Field {
        Field { grid: grid.clone(), values: vec![c; grid.len()] }
    }

    /// Samples `f` at every node center.
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Result<Field> {
        let dim = grid.dim();
        let values = (0..grid.len()).map(|i| f(&grid.node(i)[..dim])).collect();
        Field::new(grid.clone(), values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `α·self + β·other`.
    pub fn combine(&self, alpha: f64, other: &Field, beta: f64) -> Result<Field> {
        self.grid.check_same(&other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Field::new(self.grid.clone(), values)
    }

    /// Weighted inner product `h^dim · Σ uᵢvᵢ`.
    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        Ok(s * self.grid.cell_volume())
    }

    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v * v).sum();
        (s * self.grid.cell_volume()).sqrt()
    }

    /// `h^dim · Σ uᵢ`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_diff(&self, other: &Field) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Writes `i0[,i1,i2],x0[,x1,x2],value` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let dim = self.grid.dim();
        let axes = ["0", "1", "2"];
        let mut header: Vec<String> = axes[..dim].iter().map(|a| format!("i{a}")).collect();
        header.extend(axes[..dim].iter().map(|a| format!("x{a}")));
        header.push("value".into());
        writeln!(w, "{}", header.join(","))?;
        for (idx, v) in self.values.iter().enumerate() {
            let m = self.grid.multi_index(idx);
            let x = self.grid.node(idx);
            let mut row = String::new();
            for &mi in &m[..dim] {
                row.push_str(&format!("{mi},"));
            }
            for &xa in &x[..dim] {
                row.push_str(&format!("{xa:.16e},"));
            }
            row.push_str(&format!("{v:.16e}"));
            writeln!(w, "{row}")?;
        }
        Ok(())
    }
}

/// `(−Δ_h u)ᵢ = Σ_axes (2uᵢ − u_{i−e} − u_{i+e}) / h²` with neighbors
/// outside the grid or under the mask read as 0. Masked nodes output 0.
pub fn apply_neg_laplacian(grid: &Grid, u: &Field, dirichlet_mask: &[bool]) -> Result<Field> {
    grid.check_same(u.grid())?;
    if dirichlet_mask.len() != grid.len() {
        return Err(Error::InvalidField("mask length differs from grid size".into()));
    }
    let dim = grid.dim();
    let strides = grid.strides();
    let shape = grid.shape();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let vals = u.values();
    let read = |j: usize| if dirichlet_mask[j] { 0.0 } else { vals[j] };
    let mut out = vec![0.0; grid.len()];
    for (i, o) in out.iter_mut().enumerate() {
        if dirichlet_mask[i] {
            continue;
        }
        let m = grid.multi_index(i);
        let mut acc = 0.0;
        for a in 0..dim {
            let lower = if m[a] > 0 { read(i - strides[a]) } else { 0.0 };
            let upper = if m[a] + 1 < shape[a] { read(i + strides[a]) } else { 0.0 };
            acc += 2.0 * vals[i] - lower - upper;
        }
        *o = acc * inv_h2;
    }
    Field::new(grid.clone(), out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_membership() {
        let b = Region::ball(vec![0.0, 0.0], 1.0);
        assert!(b.contains(&[0.0, 0.0]).unwrap());
        assert!(!b.contains(&[2.0, 0.0]).unwrap());
        assert!(!b.contains(&[1.0, 0.0]).unwrap());
        assert!(matches!(b.contains(&[0.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn slit_strip_excludes_points_on_slits() {
        let s = Region::SlitStrip(SlitStrip {
            dim: 2,
            start: 0.0,
            width: 1.0,
            slits: SlitSequence::Log,
            slit_width: Some(0.01),
        });
        assert!(!s.contains(&[2f64.ln(), 0.5]).unwrap());
        assert!(!s.contains(&[3f64.ln() + 0.004, 0.5]).unwrap());
        assert!(s.contains(&[0.9, 0.5]).unwrap());
        assert!(!s.contains(&[0.9, 1.5]).unwrap());
        assert!(!s.contains(&[-0.5, 0.5]).unwrap());
    }

    #[test]
    fn slit_sequences_agree_with_explicit_lists() {
        let pow = SlitSequence::Power { scale: 1.0, exponent: 0.75 };
        let explicit = SlitSequence::Explicit { positions: pow.positions_up_to(50.0, 10_000) };
        let log = SlitSequence::Log;
        let log_explicit = SlitSequence::Explicit { positions: log.positions_up_to(4.0, 10_000) };
        for k in 0..400 {
            let x = 0.05 + k as f64 * 0.0917;
            if x < 45.0 {
                assert!((pow.distance(x) - explicit.distance(x)).abs() < 1e-12, "x = {x}");
            }
            if x < 3.5 {
                assert!((log.distance(x) - log_explicit.distance(x)).abs() < 1e-12, "x = {x}");
            }
        }
    }

    #[test]
    fn unsorted_slits_rejected() {
        let s = Region::SlitStrip(SlitStrip {
            dim: 2,
            start: 0.0,
            width: 1.0,
            slits: SlitSequence::Explicit { positions: vec![1.0, 0.5] },
            slit_width: None,
        });
        assert!(s.validate().is_err());
    }

    #[test]
    fn region_invariants_validated() {
        assert!(Region::ball(vec![0.0], 0.0).validate().is_err());
        assert!(Region::boxed(vec![0.0, 1.0], vec![1.0, 1.0]).validate().is_err());
        assert!(Region::cube(vec![0.0], -1.0).validate().is_err());
        assert!(Region::Union { parts: vec![] }.validate().is_err());
        let mixed = Region::Union {
            parts: vec![Region::ball(vec![0.0], 1.0), Region::ball(vec![0.0, 0.0], 1.0)],
        };
        assert!(mixed.validate().is_err());
    }

    #[test]
    fn half_open_cube_membership() {
        let c = Region::cube(vec![0.0, 0.0], 1.0);
        assert!(c.contains(&[0.0, 0.0]).unwrap());
        assert!(!c.contains(&[1.0, 0.5]).unwrap());
        assert!(c.contains(&[0.999, 0.5]).unwrap());
    }

    #[test]
    fn cell_intersection_is_exact_for_primitives() {
        let b = Region::ball(vec![0.0, 0.0], 1.0);
        assert!(b.intersects_cell(&[1.2, 0.0], 0.25));
        assert!(!b.intersects_cell(&[1.3, 0.0], 0.25));
        let set = Region::Complement { inner: Box::new(b.clone()) };
        assert!(set.intersects_cell(&[0.9, 0.0], 0.25));
        assert!(!set.intersects_cell(&[0.0, 0.0], 0.25));
    }

    #[test]
    fn grid_construction() {
        let g = build_grid(&Region::boxed(vec![0.0], vec![1.0]), 0.25).unwrap();
        assert_eq!(g.shape(), &[4]);
        let xs: Vec<f64> = (0..4).map(|i| g.node(i)[0]).collect();
        assert_eq!(xs, vec![0.125, 0.375, 0.625, 0.875]);
        assert!(!g.adjusted());

        let g = build_grid(&Region::boxed(vec![0.0, 0.0], vec![1.0, 2.0]), 0.5).unwrap();
        assert_eq!(g.shape(), &[2, 4]);

        let g = build_grid(&Region::boxed(vec![0.0], vec![1.0]), 0.3).unwrap();
        assert_eq!(g.shape(), &[3]);
        assert!(g.adjusted());
        assert!((g.hi()[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn grid_errors() {
        assert!(Grid::new(&[0.0], &[1.0], 0.0).is_err());
        assert!(Grid::new(&[0.0], &[1.0], -1.0).is_err());
        assert!(Grid::new(&[1.0], &[1.0], 0.1).is_err());
        assert!(Grid::new(&[0.0], &[1.0], 1.0).is_err());
        assert!(build_grid(&Region::ball(vec![0.0], 1.0), 0.1).is_err());
    }

    #[test]
    fn grid_identity_and_serde() {
        let g = Grid::new(&[-1.0, 0.0], &[1.0, 0.9], 0.3).unwrap();
        let json = serde_json::to_string(&g).unwrap();
        let back: Grid = serde_json::from_str(&json).unwrap();
        assert_eq!(g, back);
        assert_eq!(back.shape(), g.shape());
        let other = Grid::new(&[-1.0, 0.0], &[1.0, 0.9], 0.3000000001).unwrap();
        assert_ne!(g, other);
    }

    #[test]
    fn index_round_trip() {
        let g = Grid::new(&[0.0, 0.0, 0.0], &[3.0, 4.0, 5.0], 1.0).unwrap();
        for i in 0..g.len() {
            let m = g.multi_index(i);
            assert_eq!(g.linear_index(&m[..3]), i);
        }
        assert_eq!(g.strides(), [20, 5, 1]);
    }

    #[test]
    fn stencil_row_of_an_indicator() {
        let g = Grid::new(&[0.0], &[5.0], 1.0).unwrap();
        let mut v = vec![0.0; 5];
        v[2] = 1.0;
        let u = Field::new(g.clone(), v).unwrap();
        let out = apply_neg_laplacian(&g, &u, &[false; 5]).unwrap();
        assert_eq!(out.values(), &[0.0, -1.0, 2.0, -1.0, 0.0]);
    }

    #[test]
    fn zero_field_maps_to_zero() {
        let g = Grid::new(&[0.0, 0.0], &[1.0, 1.0], 0.1).unwrap();
        let out = apply_neg_laplacian(&g, &Field::zeros(&g), &vec![false; g.len()]).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn masked_nodes_output_zero_and_read_zero() {
        let g = Grid::new(&[0.0], &[4.0], 1.0).unwrap();
        let u = Field::new(g.clone(), vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let mask = [false, true, false, false];
        let out = apply_neg_laplacian(&g, &u, &mask).unwrap();
        assert_eq!(out.values(), &[2.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn quadratic_is_reproduced_in_the_interior() {
        let h = 1e-2;
        let g = Grid::new(&[0.0], &[1.0], h).unwrap();
        let u = Field::from_fn(&g, |x| x[0] * (1.0 - x[0]) / 2.0).unwrap();
        let out = apply_neg_laplacian(&g, &u, &vec![false; g.len()]).unwrap();
        let n = g.len();
        for &v in &out.values()[1..n - 1] {
            assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn second_order_consistency_on_a_sine() {
        let err = |h: f64| {
            let g = Grid::new(&[0.0], &[1.0], h).unwrap();
            let pi = std::f64::consts::PI;
            let u = Field::from_fn(&g, |x| (pi * x[0]).sin()).unwrap();
            let out = apply_neg_laplacian(&g, &u, &vec![false; g.len()]).unwrap();
            let n = g.len();
            // interior nodes: the ghost-zero boundary is first order.
            (1..n - 1)
                .map(|i| (out.values()[i] - pi * pi * u.values()[i]).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(1.0 / 40.0) / err(1.0 / 80.0);
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn csv_has_seventeen_significant_digits() {
        let g = Grid::new(&[0.0], &[3.0], 1.0).unwrap();
        let f = Field::new(g, vec![1.0 / 3.0, 0.0, 2.0]).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "i0,x0,value");
        assert_eq!(lines[1], "0,5.0000000000000000e-1,3.3333333333333331e-1");
        let back: f64 = lines[1].rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(back, 1.0 / 3.0);
    }

    #[test]
    fn fields_on_different_grids_do_not_combine() {
        let a = Field::zeros(&Grid::new(&[0.0], &[1.0], 0.1).unwrap());
        let b = Field::zeros(&Grid::new(&[0.0], &[1.0], 0.2).unwrap());
        assert_eq!(a.combine(1.0, &b, 1.0), Err(Error::GridMismatch));
        assert!(Field::new(a.grid().clone(), vec![f64::NAN; 10]).is_err());
    }
}
