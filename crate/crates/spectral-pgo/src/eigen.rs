//! Symmetric eigenvalue helpers: a dense values-only solve and a Lanczos
//! iteration for extremal eigenvalues of large operators.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::fim::FimMatrix;

/// Eigenvalues of a symmetric matrix, sorted ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut vals: Vec<f64> = m.symmetric_eigenvalues().iter().cloned().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues are finite"));
    vals
}

/// Symmetric linear operator given by its matrix-vector product.
pub trait SymOp {
    fn dim(&self) -> usize;
    fn apply(&self, x: &DVector<f64>) -> DVector<f64>;
}

impl SymOp for FimMatrix {
    fn dim(&self) -> usize {
        self.size()
    }
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self.matvec(x)
    }
}

impl SymOp for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self * x
    }
}

struct Shifted<'a, T: SymOp> {
    inner: &'a T,
    shift: f64,
}

impl<T: SymOp> SymOp for Shifted<'_, T> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        x * self.shift - self.inner.apply(x)
    }
}

/// Relative convergence tolerance for the iterative solves.
pub const LANCZOS_TOL: f64 = 1e-8;

/// Largest eigenvalue of `op` restricted to the orthogonal complement of
/// `deflate`, via Lanczos with full reorthogonalization. The start vector is
/// the deflated all-ones vector, so repeated runs are identical.
pub fn lanczos_largest(op: &impl SymOp, deflate: &[DVector<f64>], max_iter: usize) -> Result<f64> {
    lanczos_top(op, deflate, max_iter, |theta| theta)
}

/// Lanczos for the top Ritz value; `report` maps the Ritz value of the
/// iterated operator to the quantity the caller is interested in, and the
/// residual bound is required to be small relative to that quantity.
fn lanczos_top(
    op: &impl SymOp,
    deflate: &[DVector<f64>],
    max_iter: usize,
    report: impl Fn(f64) -> f64,
) -> Result<f64> {
    let n = op.dim();
    if n == 0 || n <= deflate.len() {
        return Err(Error::EmptySpectrum);
    }
    let subspace = n - deflate.len();
    let limit = max_iter.clamp(2, subspace.max(2));

    let project = |v: &mut DVector<f64>| {
        for d in deflate {
            let c = d.dot(v);
            v.axpy(-c, d, 1.0);
        }
    };

    let mut start = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    project(&mut start);
    if start.norm() < 1e-12 {
        // ones lies inside the deflation space; pick the first coordinate
        start = DVector::zeros(n);
        start[0] = 1.0;
        project(&mut start);
        if start.norm() < 1e-12 {
            return Err(Error::invalid("deflation space covers the start vectors"));
        }
    }
    let q0 = &start / start.norm();

    let mut basis: Vec<DVector<f64>> = vec![q0];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();

    for iter in 0.. {
        let mut w = op.apply(&basis[iter]);
        if iter > 0 {
            w.axpy(-betas[iter - 1], &basis[iter - 1], 1.0);
        }
        let alpha = basis[iter].dot(&w);
        w.axpy(-alpha, &basis[iter], 1.0);
        alphas.push(alpha);
        // keep the iteration inside the deflated subspace and re-orthogonalize
        // against the whole basis (twice; once is not always enough)
        for _ in 0..2 {
            project(&mut w);
            for b in &basis {
                let c = b.dot(&w);
                w.axpy(-c, b, 1.0);
            }
        }
        let beta = w.norm();
        let k = alphas.len();

        // exact once the Krylov space is exhausted or an invariant subspace
        // was found
        if k == subspace || beta < 1e-13 {
            let (theta, _) = top_ritz(&alphas, &betas);
            return Ok(report(theta));
        }

        let budget_exhausted = k == limit;
        if (k >= 4 && k % 5 == 0) || budget_exhausted {
            let (theta, tail) = top_ritz(&alphas, &betas);
            let residual = beta * tail.abs();
            let value = report(theta);
            if residual <= LANCZOS_TOL * value.abs().max(f64::MIN_POSITIVE) {
                return Ok(value);
            }
            if budget_exhausted {
                return Err(Error::NoConvergence { iterations: k });
            }
        }

        betas.push(beta);
        basis.push(&w / beta);
    }
    unreachable!("loop returns");
}

/// Top Ritz value of the Lanczos tridiagonal matrix and the last component
/// of its eigenvector (which scales the residual bound).
fn top_ritz(alphas: &[f64], betas: &[f64]) -> (f64, f64) {
    let k = alphas.len();
    if k == 1 {
        return (alphas[0], 1.0);
    }
    let mut t = DMatrix::zeros(k, k);
    for (i, &a) in alphas.iter().enumerate() {
        t[(i, i)] = a;
    }
    for (i, &b) in betas.iter().take(k - 1).enumerate() {
        t[(i, i + 1)] = b;
        t[(i + 1, i)] = b;
    }
    let eig = SymmetricEigen::new(t);
    let mut top = 0;
    for i in 1..k {
        if eig.eigenvalues[i] > eig.eigenvalues[top] {
            top = i;
        }
    }
    (eig.eigenvalues[top], eig.eigenvectors[(k - 1, top)])
}

/// Extremal nonzero eigenvalues (smallest, largest) of an assembled
/// information matrix, deflating the known rigid-transform null space.
///
/// Valid on connected graphs, where that null space is the entire kernel.
/// The smallest eigenvalue comes from a spectral-shift pass, converged
/// relative to the reported (unshifted) value.
pub fn fim_extremal_eigenvalues(y: &FimMatrix, max_iter: usize) -> Result<(f64, f64)> {
    let gauge = y.gauge_basis();
    let largest = lanczos_largest(y, &gauge, max_iter)?;
    let shift = largest * (1.0 + 1e-3);
    let shifted = Shifted { inner: y, shift };
    let smallest = lanczos_top(&shifted, &gauge, max_iter, |theta| shift - theta)?;
    Ok((smallest, largest))
}
