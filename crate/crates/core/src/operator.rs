//! Matrix-free symmetric stencil operators on the active nodes of a grid,
//! their preconditioners and the preconditioned conjugate gradient method.
//!
//! All reductions run sequentially in index order, so results are
//! bitwise reproducible regardless of the thread pool.

use serde::{Deserialize, Serialize};

use crate::geometry::Grid;

const NONE: u32 = u32::MAX;

/// Symmetric operator `(Au)ᵢ = dᵢuᵢ − Σ_e cₑ u_{nbr(e)}` over active nodes.
///
/// Active nodes are numbered in grid order, so every lower neighbor of a
/// dof has a smaller index. Each dof stores `2·dim` edges, lower neighbors
/// first; a missing neighbor points back at the dof itself with weight 0.
#[derive(Clone, Debug)]
pub struct StencilMatrix {
    dim: usize,
    nodes: Vec<usize>,
    node_to_dof: Vec<u32>,
    diag: Vec<f64>,
    nbr: Vec<u32>,
    cpl: Vec<f64>,
}

impl StencilMatrix {
    /// Builds the operator on nodes with `active[i] == true`.
    ///
    /// `diag(node)` gives the diagonal entry and `coupling(node, axis)` the
    /// positive coupling between `node` and its upper neighbor along `axis`
    /// (only queried when both nodes are active).
    pub fn build(
        grid: &Grid,
        active: &[bool],
        diag: impl Fn(usize) -> f64,
        coupling: impl Fn(usize, usize) -> f64,
    ) -> StencilMatrix {
        let dim = grid.dim();
        let shape = grid.shape();
        let strides = grid.strides();
        let mut node_to_dof = vec![NONE; grid.len()];
        let mut nodes = Vec::new();
        for (i, &a) in active.iter().enumerate() {
            if a {
                node_to_dof[i] = nodes.len() as u32;
                nodes.push(i);
            }
        }
        let n = nodes.len();
        let e = 2 * dim;
        let mut d = Vec::with_capacity(n);
        let mut nbr = vec![0u32; n * e];
        let mut cpl = vec![0.0; n * e];
        for (k, &node) in nodes.iter().enumerate() {
            d.push(diag(node));
            let m = grid.multi_index(node);
            for a in 0..dim {
                nbr[k * e + a] = k as u32;
                nbr[k * e + dim + a] = k as u32;
                if m[a] > 0 {
                    let j = node_to_dof[node - strides[a]];
                    if j != NONE {
                        nbr[k * e + a] = j;
                        cpl[k * e + a] = coupling(node - strides[a], a);
                    }
                }
                if m[a] + 1 < shape[a] {
                    let j = node_to_dof[node + strides[a]];
                    if j != NONE {
                        nbr[k * e + dim + a] = j;
                        cpl[k * e + dim + a] = coupling(node, a);
                    }
                }
            }
        }
        StencilMatrix { dim, nodes, node_to_dof, diag: d, nbr, cpl }
    }

    /// `−Δ_h + zeroth + penalty` with zero ghosts on inactive and outside nodes.
    pub fn shifted_laplacian(grid: &Grid, active: &[bool], zeroth: f64, penalty: &[f64]) -> Self {
        let inv_h2 = 1.0 / (grid.h() * grid.h());
        let base = 2.0 * grid.dim() as f64 * inv_h2 + zeroth;
        Self::build(grid, active, |i| base + penalty[i], |_, _| inv_h2)
    }

    /// Same operator with natural boundary conditions: edges leaving the
    /// active set are dropped from the diagonal as well.
    pub fn natural_laplacian(grid: &Grid, active: &[bool], zeroth: f64, penalty: &[f64]) -> Self {
        let inv_h2 = 1.0 / (grid.h() * grid.h());
        let dim = grid.dim();
        let shape = grid.shape();
        let strides = grid.strides();
        Self::build(
            grid,
            active,
            |i| {
                let m = grid.multi_index(i);
                let mut nb = 0usize;
                for a in 0..dim {
                    if m[a] > 0 && active[i - strides[a]] {
                        nb += 1;
                    }
                    if m[a] + 1 < shape[a] && active[i + strides[a]] {
                        nb += 1;
                    }
                }
                nb as f64 * inv_h2 + zeroth + penalty[i]
            },
            |_, _| inv_h2,
        )
    }

    /// Diagonal and edge weights, in the storage order described above.
    pub(crate) fn values_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.diag, &mut self.cpl)
    }

    /// Number of degrees of freedom.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Grid node of each dof.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// Dof of a grid node, if active.
    pub fn dof(&self, node: usize) -> Option<usize> {
        match self.node_to_dof[node] {
            NONE => None,
            j => Some(j as usize),
        }
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        match self.dim {
            1 => self.apply_n::<2>(x, y),
            2 => self.apply_n::<4>(x, y),
            _ => self.apply_n::<6>(x, y),
        }
    }

    fn apply_n<const E: usize>(&self, x: &[f64], y: &mut [f64]) {
        let n = self.len();
        let (x, y) = (&x[..n], &mut y[..n]);
        for (i, ((yi, d), (nb, c))) in y
            .iter_mut()
            .zip(&self.diag)
            .zip(self.nbr.chunks_exact(E).zip(self.cpl.chunks_exact(E)))
            .enumerate()
        {
            let mut acc = d * x[i];
            for e in 0..E {
                acc -= c[e] * x[nb[e] as usize];
            }
            *yi = acc;
        }
    }

    /// `xᵀ A x`, summed in index order.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut y = vec![0.0; self.len()];
        self.apply(x, &mut y);
        dot(x, &y)
    }

    /// Dense copy, for small problems.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.len();
        let e = 2 * self.dim;
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            for k in 0..e {
                let j = self.nbr[i * e + k] as usize;
                if j != i {
                    m[(i, j)] = -self.cpl[i * e + k];
                }
            }
        }
        m
    }

    /// Scatters dof values into a full grid vector (inactive nodes get `fill`).
    pub fn scatter(&self, x: &[f64], grid_len: usize, fill: f64) -> Vec<f64> {
        let mut out = vec![fill; grid_len];
        for (k, &node) in self.nodes.iter().enumerate() {
            out[node] = x[k];
        }
        out
    }

    /// Gathers the active entries of a full grid vector.
    pub fn gather(&self, full: &[f64]) -> Vec<f64> {
        self.nodes.iter().map(|&i| full[i]).collect()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Preconditioner choice for the conjugate gradient method.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreconditionerKind {
    /// Inverse diagonal.
    Jacobi,
    /// Modified incomplete Cholesky with zero fill-in.
    #[default]
    Mic,
}

/// Approximate inverse `z ≈ A⁻¹ r`.
pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(a: &StencilMatrix) -> Jacobi {
        Jacobi { inv_diag: a.diag.iter().map(|d| 1.0 / d).collect() }
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * di;
        }
    }
}

/// MIC(0) factor of a stencil matrix in grid ordering.
pub struct Mic0<'a> {
    a: &'a StencilMatrix,
    inv_sqrt: Vec<f64>,
    /// Per edge: `c·p[lower]` on lower edges, `c·p[self]` on upper edges.
    scaled: Vec<f64>,
}

const MIC_TAU: f64 = 0.97;
const MIC_SIGMA: f64 = 0.25;

impl<'a> Mic0<'a> {
    pub fn new(a: &'a StencilMatrix) -> Mic0<'a> {
        let dim = a.dim;
        let e = 2 * dim;
        let n = a.len();
        let mut p = vec![0.0; n];
        for i in 0..n {
            let mut d = a.diag[i];
            for ax in 0..dim {
                let c = a.cpl[i * e + ax];
                if c == 0.0 {
                    continue;
                }
                let j = a.nbr[i * e + ax] as usize;
                let pj = p[j];
                d -= (c * pj) * (c * pj);
                // fill-in that MIC moves to the diagonal
                let mut other = 0.0;
                for b in 0..dim {
                    if b != ax {
                        other += a.cpl[j * e + dim + b];
                    }
                }
                d -= MIC_TAU * c * other * pj * pj;
            }
            if d < MIC_SIGMA * a.diag[i] {
                d = a.diag[i];
            }
            p[i] = 1.0 / d.sqrt();
        }
        let mut scaled = vec![0.0; n * e];
        for i in 0..n {
            for ax in 0..dim {
                let lo = a.nbr[i * e + ax] as usize;
                scaled[i * e + ax] = a.cpl[i * e + ax] * p[lo];
                scaled[i * e + dim + ax] = a.cpl[i * e + dim + ax] * p[i];
            }
        }
        Mic0 { a, inv_sqrt: p, scaled }
    }

    fn apply_n<const D: usize>(&self, r: &[f64], z: &mut [f64]) {
        let e = 2 * D;
        let n = self.a.len();
        let nbr = &self.a.nbr;
        let p = &self.inv_sqrt;
        let sc = &self.scaled;
        z[..n].iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            let mut t = r[i];
            for ax in 0..D {
                t += sc[i * e + ax] * z[nbr[i * e + ax] as usize];
            }
            z[i] = t * p[i];
        }
        for i in (0..n).rev() {
            let mut t = z[i];
            for ax in D..e {
                let j = nbr[i * e + ax] as usize;
                if j != i {
                    t += sc[i * e + ax] * z[j];
                }
            }
            z[i] = t * p[i];
        }
    }
}

impl Preconditioner for Mic0<'_> {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self.a.dim {
            1 => self.apply_n::<1>(r, z),
            2 => self.apply_n::<2>(r, z),
            _ => self.apply_n::<3>(r, z),
        }
    }
}

/// Outcome of a conjugate gradient run.
#[derive(Clone, Debug, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    /// Final `‖b − Ax‖ / ‖b‖`.
    pub relative_residual: f64,
    pub converged: bool,
}

/// Solves `A x = b` by preconditioned CG starting from the contents of `x`.
pub fn pcg(
    a: &StencilMatrix,
    b: &[f64],
    x: &mut [f64],
    precond: &dyn Preconditioner,
    tol: f64,
    max_iter: usize,
) -> CgOutcome {
    let n = a.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return CgOutcome { iterations: 0, relative_residual: 0.0, converged: true };
    }
    let mut r = vec![0.0; n];
    a.apply(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut rel = norm(&r) / bnorm;
    if rel <= tol {
        return CgOutcome { iterations: 0, relative_residual: rel, converged: true };
    }
    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z);
    let mut d = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    for it in 1..=max_iter {
        a.apply(&d, &mut q);
        let dq = dot(&d, &q);
        if !(dq > 0.0) {
            return CgOutcome { iterations: it, relative_residual: rel, converged: false };
        }
        let alpha = rz / dq;
        for i in 0..n {
            x[i] += alpha * d[i];
            r[i] -= alpha * q[i];
        }
        rel = norm(&r) / bnorm;
        if rel <= tol {
            // recompute to guard against drift of the recursive residual
            a.apply(x, &mut q);
            for i in 0..n {
                r[i] = b[i] - q[i];
            }
            rel = norm(&r) / bnorm;
            if rel <= tol {
                return CgOutcome { iterations: it, relative_residual: rel, converged: true };
            }
        }
        precond.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            d[i] = z[i] + beta * d[i];
        }
    }
    CgOutcome { iterations: max_iter, relative_residual: rel, converged: false }
}

/// Builds the requested preconditioner and runs [`pcg`].
pub fn solve_spd(
    a: &StencilMatrix,
    b: &[f64],
    x: &mut [f64],
    kind: PreconditionerKind,
    tol: f64,
    max_iter: usize,
) -> CgOutcome {
    match kind {
        PreconditionerKind::Jacobi => pcg(a, b, x, &Jacobi::new(a), tol, max_iter),
        PreconditionerKind::Mic => pcg(a, b, x, &Mic0::new(a), tol, max_iter),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_2d(n: usize) -> (Grid, StencilMatrix) {
        let g = Grid::new(&[0.0, 0.0], &[1.0, 1.0], 1.0 / n as f64).unwrap();
        let active: Vec<bool> = (0..g.len()).map(|i| g.node_radius(i) > 0.3).collect();
        let pen = vec![0.5; g.len()];
        let a = StencilMatrix::shifted_laplacian(&g, &active, 1.0, &pen);
        (g, a)
    }

    #[test]
    fn dense_matches_apply() {
        let (_, a) = laplacian_2d(6);
        let dense = a.to_dense();
        let x: Vec<f64> = (0..a.len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut y = vec![0.0; a.len()];
        a.apply(&x, &mut y);
        let yd = &dense * nalgebra::DVector::from_vec(x);
        for i in 0..a.len() {
            assert!((y[i] - yd[i]).abs() < 1e-12);
        }
        assert!((dense.clone() - dense.transpose()).amax() == 0.0);
    }

    #[test]
    fn both_preconditioners_solve() {
        let (_, a) = laplacian_2d(40);
        let b: Vec<f64> = (0..a.len()).map(|i| 1.0 + (i % 7) as f64).collect();
        for kind in [PreconditionerKind::Jacobi, PreconditionerKind::Mic] {
            let mut x = vec![0.0; a.len()];
            let out = solve_spd(&a, &b, &mut x, kind, 1e-11, 5000);
            assert!(out.converged, "{kind:?}");
            let mut ax = vec![0.0; a.len()];
            a.apply(&x, &mut ax);
            let res: f64 = ax.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            assert!(res / norm(&b) < 1e-10);
        }
    }

    #[test]
    fn mic_needs_fewer_iterations() {
        let (_, a) = laplacian_2d(80);
        let b = vec![1.0; a.len()];
        let mut x = vec![0.0; a.len()];
        let j = solve_spd(&a, &b, &mut x, PreconditionerKind::Jacobi, 1e-10, 10_000);
        let mut x = vec![0.0; a.len()];
        let m = solve_spd(&a, &b, &mut x, PreconditionerKind::Mic, 1e-10, 10_000);
        assert!(m.iterations < j.iterations, "{} vs {}", m.iterations, j.iterations);
    }

    #[test]
    fn natural_boundary_annihilates_constants() {
        let g = Grid::new(&[0.0, 0.0], &[1.0, 1.0], 0.1).unwrap();
        let active: Vec<bool> = (0..g.len()).map(|i| g.node(i)[0] < 0.5).collect();
        let a = StencilMatrix::natural_laplacian(&g, &active, 0.0, &vec![0.0; g.len()]);
        let ones = vec![1.0; a.len()];
        let mut y = vec![0.0; a.len()];
        a.apply(&ones, &mut y);
        assert!(y.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let (_, a) = laplacian_2d(10);
        let mut x = vec![3.0; a.len()];
        let out = solve_spd(&a, &vec![0.0; a.len()], &mut x, PreconditionerKind::Mic, 1e-10, 10);
        assert!(out.converged);
        assert!(x.iter().all(|&v| v == 0.0));
    }
}
