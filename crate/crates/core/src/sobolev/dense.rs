//! Dense direct solver for the weighted Poisson problem, used as an oracle
//! against the conjugate-gradient path.
//!
//! The matrix is assembled from cell multi-indices directly (not from the
//! face list used by [`super::WeightedLaplacian`]) and the constant kernel
//! is removed by a rank-one shift, so the system is solved by Cholesky.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::{Boundary, Density, GridDomain, ScalarField, SignedDensity};

fn assemble(w: &Density) -> DMatrix<f64> {
    let d: &GridDomain = w.domain();
    let n = d.cell_count();
    let v = d.cell_volume();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let multi = d.unravel(i);
        for axis in 0..d.dims() {
            let cells = d.cells_per_dim()[axis] as isize;
            let h = d.spacing(axis);
            for step in [-1isize, 1] {
                let k = multi[axis] as isize + step;
                let k = match d.boundary() {
                    Boundary::Interval if k < 0 || k >= cells => continue,
                    Boundary::Torus if cells == 1 => continue,
                    _ => k.rem_euclid(cells),
                };
                let mut other = multi.clone();
                other[axis] = k as usize;
                let j = d.ravel(&other);
                let (wi, wj) = (w.values()[i], w.values()[j]);
                let c = 2.0 * wi * wj / (wi + wj) * v / (h * h);
                a[(i, i)] += c;
                a[(i, j)] -= c;
            }
        }
    }
    a
}

struct DenseSolve {
    matrix: DMatrix<f64>,
    rhs: DVector<f64>,
    phi: DVector<f64>,
}

fn solve(sigma: &SignedDensity, w: &Density) -> Result<DenseSolve> {
    if sigma.domain() != w.domain() {
        return Err(Error::DomainMismatch);
    }
    super::check_weight(w)?;
    let rhs = DVector::from_vec(super::neutral_rhs(sigma)?);
    let n = rhs.len();
    let matrix = assemble(w);
    let mut shifted = matrix.clone();
    let shift = shifted.diagonal().mean() / n as f64;
    shifted.add_scalar_mut(shift);
    let chol = shifted
        .cholesky()
        .ok_or_else(|| Error::Solver("dense operator is not positive definite".into()))?;
    let mut phi = chol.solve(&rhs);
    let mean = phi.mean();
    phi.add_scalar_mut(-mean);
    Ok(DenseSolve { matrix, rhs, phi })
}

/// Zero-mean solution of the weighted Poisson problem by dense Cholesky.
pub fn dense_poisson_solve(sigma: &SignedDensity, w: &Density) -> Result<ScalarField> {
    let s = solve(sigma, w)?;
    ScalarField::new(sigma.domain().clone(), s.phi.as_slice().to_vec())
}

/// Negative Sobolev norm from the dense solve through the variational
/// value `2 <phi, b> - phi^T A phi`, whose error is quadratic in the
/// error of `phi`.
pub fn dense_hminus1_norm(sigma: &SignedDensity, w: &Density) -> Result<f64> {
    let s = solve(sigma, w)?;
    let energy = s.phi.dot(&(&s.matrix * &s.phi));
    Ok((2.0 * s.phi.dot(&s.rhs) - energy).max(0.0).sqrt())
}
