//! Smallest eigenpairs of symmetric stencil operators.
//!
//! Small systems are diagonalized densely. Larger ones use block LOBPCG
//! with two guard vectors beyond the requested count and soft locking of
//! converged columns. The preconditioner is a few MIC(0)- or
//! Jacobi-preconditioned CG steps.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{dot, norm, Jacobi, Mic0, Preconditioner, PreconditionerKind, StencilMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenOptions {
    /// Column `j` is converged when `‖Ax − λx‖ ≤ max(abs_tol, rel_tol·|λ|)`,
    /// or at the rounding floor `64ε·max|A_ii|`.
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub preconditioner: PreconditionerKind,
    /// Inner preconditioned CG steps per preconditioner application; 0
    /// applies the preconditioner once.
    #[serde(default)]
    pub inner_iterations: usize,
    /// Systems with at most this many dofs are solved densely.
    pub dense_limit: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            rel_tol: 1e-9,
            abs_tol: 1e-8,
            max_iter: 2000,
            seed: 0x5eed,
            preconditioner: PreconditionerKind::Mic,
            inner_iterations: 16,
            dense_limit: 400,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenPairs {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Unit-norm (Euclidean) eigenvectors on the dofs.
    pub vectors: Vec<Vec<f64>>,
    /// `‖Ax − λx‖ / ‖x‖` per pair.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// The `k` smallest eigenpairs of `a`.
pub fn smallest_eigenpairs(a: &StencilMatrix, k: usize, opts: &EigenOptions) -> Result<EigenPairs> {
    smallest_eigenpairs_shifted(a, k, opts, 0.0)
}

/// As [`smallest_eigenpairs`], with the preconditioner built from
/// `a − shift·I`. The caller guarantees that matrix is positive definite;
/// a shift close below `λ₁` separates clustered low modes much better.
pub fn smallest_eigenpairs_shifted(
    a: &StencilMatrix,
    k: usize,
    opts: &EigenOptions,
    shift: f64,
) -> Result<EigenPairs> {
    let n = a.len();
    if k == 0 {
        return Err(Error::InvalidArgument("at least one eigenpair must be requested".into()));
    }
    if n < k {
        return Err(Error::InsufficientDofs { needed: k, available: n });
    }
    if n <= opts.dense_limit.max(3 * (k + 2)) {
        return Ok(dense(a, k, opts));
    }
    let shifted;
    let b = if shift != 0.0 {
        let mut m = a.clone();
        m.values_mut().0.iter_mut().for_each(|d| *d -= shift);
        shifted = m;
        &shifted
    } else {
        a
    };
    let out = match opts.preconditioner {
        PreconditionerKind::Mic => {
            let mic = Mic0::new(b);
            if opts.inner_iterations > 0 {
                lobpcg(a, k, opts, &InnerPcg { a: b, inner: &mic, iters: opts.inner_iterations })
            } else {
                lobpcg(a, k, opts, &mic)
            }
        }
        PreconditionerKind::Jacobi => {
            let jac = Jacobi::new(b);
            if opts.inner_iterations > 0 {
                lobpcg(a, k, opts, &InnerPcg { a: b, inner: &jac, iters: opts.inner_iterations })
            } else {
                lobpcg(a, k, opts, &jac)
            }
        }
    };
    Ok(out)
}

/// A fixed number of preconditioned CG steps from zero, used as an
/// approximate inverse inside LOBPCG.
struct InnerPcg<'a> {
    a: &'a StencilMatrix,
    inner: &'a dyn Preconditioner,
    iters: usize,
}

impl Preconditioner for InnerPcg<'_> {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.iter_mut().for_each(|v| *v = 0.0);
        crate::operator::pcg(self.a, r, z, self.inner, 0.0, self.iters);
    }
}

/// Rounding floor `‖r‖ ≲ ε‖A‖` below which no iteration can go.
fn rounding_floor(a: &StencilMatrix) -> f64 {
    let scale = a.diag().iter().fold(0.0f64, |m, d| m.max(d.abs()));
    64.0 * f64::EPSILON * scale
}

fn tolerance(opts: &EigenOptions, lambda: f64, floor: f64) -> f64 {
    opts.abs_tol.max(opts.rel_tol * lambda.abs()).max(floor)
}

fn residual(a: &StencilMatrix, x: &[f64], lambda: f64) -> f64 {
    let mut ax = vec![0.0; x.len()];
    a.apply(x, &mut ax);
    let r: f64 = ax.iter().zip(x).map(|(p, q)| (p - lambda * q).powi(2)).sum();
    r.sqrt() / norm(x)
}

fn dense(a: &StencilMatrix, k: usize, opts: &EigenOptions) -> EigenPairs {
    let eig = SymmetricEigen::new(a.to_dense());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for &j in order.iter().take(k) {
        let mut v: Vec<f64> = eig.eigenvectors.column(j).iter().copied().collect();
        fix_sign(&mut v);
        let lambda = eig.eigenvalues[j];
        residuals.push(residual(a, &v, lambda));
        values.push(lambda);
        vectors.push(v);
    }
    let floor = rounding_floor(a);
    let converged = values.iter().zip(&residuals).all(|(l, r)| *r <= tolerance(opts, *l, floor));
    EigenPairs { values, vectors, residuals, iterations: 0, converged }
}

/// Makes the largest-magnitude entry positive, for reproducible signs.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0.0;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

type Block = Vec<Vec<f64>>;

fn apply_block(a: &StencilMatrix, x: &Block) -> Block {
    x.iter()
        .map(|v| {
            let mut y = vec![0.0; v.len()];
            a.apply(v, &mut y);
            y
        })
        .collect()
}

/// `Σ_j V_j c_j` for each column `c` of `coef`.
fn combine(basis: &[&Vec<f64>], coef: &DMatrix<f64>, cols: std::ops::Range<usize>) -> Block {
    let n = basis.first().map_or(0, |v| v.len());
    cols.map(|c| {
        let mut out = vec![0.0; n];
        for (j, v) in basis.iter().enumerate() {
            let w = coef[(j, c)];
            if w != 0.0 {
                out.iter_mut().zip(v.iter()).for_each(|(o, x)| *o += w * x);
            }
        }
        out
    })
    .collect()
}

fn gram(u: &[&Vec<f64>], v: &[&Vec<f64>]) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(u.len(), v.len());
    for (i, a) in u.iter().enumerate() {
        for (j, b) in v.iter().enumerate() {
            g[(i, j)] = dot(a, b);
        }
    }
    g
}

/// Rayleigh–Ritz on span(S): returns ascending Ritz values and coefficient
/// columns, after dropping numerically dependent directions.
fn rayleigh_ritz(s: &[&Vec<f64>], as_: &[&Vec<f64>]) -> (Vec<f64>, DMatrix<f64>) {
    let m = s.len();
    let mut gb = gram(s, s);
    let mut ga = gram(s, as_);
    ga = (&ga + ga.transpose()) * 0.5;
    // column scaling
    let scale: Vec<f64> = (0..m).map(|i| 1.0 / gb[(i, i)].sqrt().max(1e-300)).collect();
    for i in 0..m {
        for j in 0..m {
            gb[(i, j)] *= scale[i] * scale[j];
            ga[(i, j)] *= scale[i] * scale[j];
        }
    }
    let eb = SymmetricEigen::new(gb);
    let max_eb = eb.eigenvalues.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..m).filter(|&i| eb.eigenvalues[i] > 1e-12 * max_eb).collect();
    let mut w = DMatrix::zeros(m, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        let f = 1.0 / eb.eigenvalues[i].sqrt();
        for r in 0..m {
            w[(r, c)] = eb.eigenvectors[(r, i)] * f;
        }
    }
    let h = w.transpose() * &ga * &w;
    let h = (&h + h.transpose()) * 0.5;
    let eh = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..keep.len()).collect();
    order.sort_by(|&i, &j| eh.eigenvalues[i].total_cmp(&eh.eigenvalues[j]));
    let mut y = DMatrix::zeros(keep.len(), keep.len());
    for (c, &i) in order.iter().enumerate() {
        y.set_column(c, &eh.eigenvectors.column(i));
    }
    let mut coef = w * y;
    for i in 0..m {
        for c in 0..coef.ncols() {
            coef[(i, c)] *= scale[i];
        }
    }
    (order.iter().map(|&i| eh.eigenvalues[i]).collect(), coef)
}

fn orthonormalize(x: &mut Block) {
    // two passes of modified Gram–Schmidt
    for _ in 0..2 {
        for i in 0..x.len() {
            for j in 0..i {
                let (head, tail) = x.split_at_mut(i);
                let c = dot(&tail[0], &head[j]);
                tail[0].iter_mut().zip(&head[j]).for_each(|(a, b)| *a -= c * b);
            }
            let nrm = norm(&x[i]);
            x[i].iter_mut().for_each(|a| *a /= nrm);
        }
    }
}

fn lobpcg(a: &StencilMatrix, k: usize, opts: &EigenOptions, t: &dyn Preconditioner) -> EigenPairs {
    let n = a.len();
    let m = (k + 2).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x: Block = (0..m)
        .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    // smooth the random start with the preconditioner
    for v in x.iter_mut() {
        let mut z = vec![0.0; n];
        t.apply(v, &mut z);
        *v = z;
    }
    orthonormalize(&mut x);
    let mut ax = apply_block(a, &x);
    let (vals, coef) = {
        let s: Vec<&Vec<f64>> = x.iter().collect();
        let as_: Vec<&Vec<f64>> = ax.iter().collect();
        rayleigh_ritz(&s, &as_)
    };
    let mut lambda: Vec<f64> = vals[..m].to_vec();
    {
        let s: Vec<&Vec<f64>> = x.iter().collect();
        x = combine(&s, &coef, 0..m);
    }
    let mut p: Block = Vec::new();
    let mut res_norms = vec![f64::INFINITY; m];
    let floor = rounding_floor(a);
    let mut iterations = 0;
    for it in 1..=opts.max_iter {
        iterations = it;
        for v in x.iter_mut() {
            let nrm = norm(v);
            v.iter_mut().for_each(|a| *a /= nrm);
        }
        ax = apply_block(a, &x);
        let r: Block = (0..m)
            .map(|j| ax[j].iter().zip(&x[j]).map(|(p, q)| p - lambda[j] * q).collect())
            .collect();
        for j in 0..m {
            res_norms[j] = norm(&r[j]);
        }
        if (0..k).all(|j| res_norms[j] <= tolerance(opts, lambda[j], floor)) {
            break;
        }
        let active: Vec<usize> =
            (0..m).filter(|&j| res_norms[j] > tolerance(opts, lambda[j], floor)).collect();
        let mut w: Block = active
            .iter()
            .map(|&j| {
                let mut z = vec![0.0; n];
                t.apply(&r[j], &mut z);
                z
            })
            .collect();
        for wi in w.iter_mut() {
            for xj in &x {
                let c = dot(wi, xj);
                wi.iter_mut().zip(xj).for_each(|(a, b)| *a -= c * b);
            }
        }
        let aw = apply_block(a, &w);
        let ap = apply_block(a, &p);
        let mut s: Vec<&Vec<f64>> = x.iter().collect();
        s.extend(w.iter());
        s.extend(p.iter());
        let mut as_: Vec<&Vec<f64>> = ax.iter().collect();
        as_.extend(aw.iter());
        as_.extend(ap.iter());
        let (vals, coef) = rayleigh_ritz(&s, &as_);
        if vals.len() < m {
            // basis collapsed: restart without the search directions
            p.clear();
            continue;
        }
        lambda = vals[..m].to_vec();
        let new_x = combine(&s, &coef, 0..m);
        // P = components outside the old X
        let mut coef_p = coef.clone();
        for r in 0..m {
            for c in 0..coef_p.ncols() {
                coef_p[(r, c)] = 0.0;
            }
        }
        p = combine(&s, &coef_p, 0..m);
        for v in p.iter_mut() {
            let nrm = norm(v);
            if nrm > 0.0 {
                v.iter_mut().for_each(|a| *a /= nrm);
            }
        }
        p.retain(|v| norm(v) > 0.0);
        x = new_x;
    }
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for j in 0..k {
        let mut v = x[j].clone();
        let nrm = norm(&v);
        v.iter_mut().for_each(|a| *a /= nrm);
        fix_sign(&mut v);
        let mut av = vec![0.0; n];
        a.apply(&v, &mut av);
        let rq = dot(&v, &av);
        values.push(rq);
        residuals.push(residual(a, &v, rq));
        vectors.push(v);
    }
    let converged = (0..k).all(|j| residuals[j] <= tolerance(opts, values[j], floor));
    EigenPairs { values, vectors, residuals, iterations, converged }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Grid;

    fn square(h: f64, zeroth: f64) -> StencilMatrix {
        let g = Grid::new(&[0.0, 0.0], &[1.0, 1.0], h).unwrap();
        StencilMatrix::shifted_laplacian(&g, &vec![true; g.len()], zeroth, &vec![0.0; g.len()])
    }

    fn exact_square(h: f64, zeroth: f64, count: usize) -> Vec<f64> {
        let n = (1.0 / h).round() as usize;
        let mut ev = Vec::new();
        for i in 1..=n {
            for j in 1..=n {
                let f = |k: usize| {
                    4.0 / (h * h) * ((k as f64) * std::f64::consts::PI / (2.0 * (n + 1) as f64)).sin().powi(2)
                };
                ev.push(f(i) + f(j) + zeroth);
            }
        }
        ev.sort_by(f64::total_cmp);
        ev.truncate(count);
        ev
    }

    #[test]
    fn dense_path_matches_closed_form() {
        let a = square(0.1, 1.0);
        let out = smallest_eigenpairs(&a, 4, &EigenOptions::default()).unwrap();
        let exact = exact_square(0.1, 1.0, 4);
        for (v, e) in out.values.iter().zip(&exact) {
            assert!((v - e).abs() < 1e-9 * e);
        }
        assert!(out.converged);
    }

    #[test]
    fn lobpcg_matches_closed_form_with_multiplicity() {
        let h = 1.0 / 64.0;
        let a = square(h, 0.0);
        for kind in [PreconditionerKind::Mic, PreconditionerKind::Jacobi] {
            let opts = EigenOptions { preconditioner: kind, ..EigenOptions::default() };
            let out = smallest_eigenpairs(&a, 5, &opts).unwrap();
            assert!(out.converged, "{kind:?}: {:?}", out.residuals);
            let exact = exact_square(h, 0.0, 5);
            for (v, e) in out.values.iter().zip(&exact) {
                assert!((v - e).abs() < 1e-8 * e, "{kind:?}: {v} vs {e}");
            }
        }
    }

    #[test]
    fn lobpcg_is_deterministic() {
        let a = square(1.0 / 40.0, 1.0);
        let o1 = smallest_eigenpairs(&a, 2, &EigenOptions::default()).unwrap();
        let o2 = smallest_eigenpairs(&a, 2, &EigenOptions::default()).unwrap();
        assert_eq!(o1, o2);
    }

    #[test]
    fn too_few_dofs() {
        let g = Grid::new(&[0.0], &[1.0], 0.25).unwrap();
        let a = StencilMatrix::shifted_laplacian(&g, &[true, false, false, false], 0.0, &[0.0; 4]);
        assert!(matches!(
            smallest_eigenpairs(&a, 2, &EigenOptions::default()),
            Err(Error::InsufficientDofs { needed: 2, available: 1 })
        ));
    }
}
