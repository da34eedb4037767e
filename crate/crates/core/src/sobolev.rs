//! Weighted homogeneous Sobolev norms on grids.
//!
//! The Dirichlet energy of a cell field `f` with weight density `w` is
//!
//! ```text
//! E_w(f) = sum over faces  w_face * (f_high - f_low)^2 * V / h_axis^2
//! ```
//!
//! where `w_face` is the harmonic mean of the two adjacent cell weights and
//! `V` the cell volume. `||f||_{H^1(w)} = sqrt(E_w(f))`, and the dual norm of
//! a zero-mass signed density is `sqrt(E_w(phi))` with `L_w phi = sigma V`.

pub mod dense;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Density, Face, GridDomain, ScalarField, SignedDensity};

/// Relative residual target used when callers have no preference.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Iteration cap per cell.
pub const ITERATIONS_PER_CELL: usize = 50;
/// Relative (to total variation) mass defect accepted as zero.
pub const MASS_NEUTRALITY_TOL: f64 = 1e-10;

/// Divergence-form operator `-div(w grad .)` in cell-mass units.
#[derive(Debug, Clone)]
pub struct WeightedLaplacian {
    domain: GridDomain,
    faces: Vec<Face>,
    coefficients: Vec<f64>,
    diagonal: Vec<f64>,
}

fn harmonic_mean(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

pub(crate) fn check_weight(w: &Density) -> Result<()> {
    match w.values().iter().position(|&v| !(v > 0.0)) {
        Some(cell) => Err(Error::NonPositiveWeight {
            cell,
            value: w.values()[cell],
        }),
        None => Ok(()),
    }
}

impl WeightedLaplacian {
    pub fn new(weight: &Density) -> Result<Self> {
        check_weight(weight)?;
        let domain = weight.domain().clone();
        let faces = domain.faces();
        let w = weight.values();
        let coefficients: Vec<f64> = faces
            .iter()
            .map(|f| harmonic_mean(w[f.low], w[f.high]) * domain.face_coefficient(f.axis))
            .collect();
        let mut diagonal = vec![0.0; domain.cell_count()];
        for (f, &c) in faces.iter().zip(&coefficients) {
            diagonal[f.low] += c;
            diagonal[f.high] += c;
        }
        Ok(Self {
            domain,
            faces,
            coefficients,
            diagonal,
        })
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn face_weights(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (f, &c) in self.faces.iter().zip(&self.coefficients) {
            let flux = c * (x[f.low] - x[f.high]);
            out[f.low] += flux;
            out[f.high] -= flux;
        }
    }

    pub fn energy(&self, x: &[f64]) -> f64 {
        self.faces
            .iter()
            .zip(&self.coefficients)
            .map(|(f, &c)| {
                let d = x[f.high] - x[f.low];
                c * d * d
            })
            .sum()
    }
}

/// `(int |grad f|^2 dw)^{1/2}` for the discrete energy.
pub fn h1_seminorm(f: &ScalarField, w: &Density) -> Result<f64> {
    if f.domain() != w.domain() {
        return Err(Error::DomainMismatch);
    }
    Ok(WeightedLaplacian::new(w)?.energy(f.values()).sqrt())
}

/// Solution of the weighted Poisson problem with solver diagnostics.
#[derive(Debug, Clone)]
pub struct PoissonSolution {
    pub potential: ScalarField,
    pub stats: SolverStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverStats {
    pub iterations: usize,
    /// `|b - L phi| / |b|`.
    pub relative_residual: f64,
    /// `|b - L phi| / (|L| |phi| + |b|)` with `|L|` bounded by twice the
    /// largest diagonal entry.
    pub backward_error: f64,
}

/// Checks the zero-mass precondition and returns the cell-mass right-hand
/// side with its (tolerated) mean removed.
pub(crate) fn neutral_rhs(sigma: &SignedDensity) -> Result<Vec<f64>> {
    let mass = sigma.integral();
    let tv = sigma.total_variation();
    if mass.abs() > MASS_NEUTRALITY_TOL * tv {
        return Err(Error::NonZeroMass {
            mass,
            total_variation: tv,
        });
    }
    let v = sigma.domain().cell_volume();
    let mean = sigma.values().iter().sum::<f64>() / sigma.values().len() as f64;
    Ok(sigma.values().iter().map(|s| (s - mean) * v).collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(x: &mut [f64]) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= mean);
}

/// Sweeps without halving the true residual before the floor test applies.
const STAGNANT_SWEEPS: usize = 3;

/// Jacobi-preconditioned conjugate gradient on the zero-mean subspace.
///
/// Converges when the relative residual reaches `tol`. When restarted
/// sweeps stop reducing the true residual (rounding floor of the iterate),
/// it also accepts a normwise backward error below `tol`.
fn conjugate_gradient(op: &WeightedLaplacian, b: &[f64], tol: f64) -> Result<(Vec<f64>, SolverStats)> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok((
            x,
            SolverStats {
                iterations: 0,
                relative_residual: 0.0,
                backward_error: 0.0,
            },
        ));
    }
    let cap = ITERATIONS_PER_CELL * n;
    let mut iterations = 0;
    let mut r = b.to_vec();
    let mut ax = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let op_norm = 2.0 * op.diagonal().iter().fold(0.0f64, |m, d| m.max(*d));
    let mut best = f64::INFINITY;
    let mut stagnant = 0;
    loop {
        // One PCG sweep from the current iterate, then a true-residual check.
        let inv_diag: Vec<f64> = op.diagonal().iter().map(|d| if *d > 0.0 { 1.0 / d } else { 0.0 }).collect();
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, d)| a * d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let sweep_start = iterations;
        while dot(&r, &r).sqrt() > 0.5 * tol * b_norm && iterations < cap {
            op.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                break;
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
            iterations += 1;
        }
        remove_mean(&mut x);
        op.apply(&x, &mut ax);
        for i in 0..n {
            r[i] = b[i] - ax[i];
        }
        let r_norm = dot(&r, &r).sqrt();
        let rel = r_norm / b_norm;
        let backward = r_norm / (op_norm * dot(&x, &x).sqrt() + b_norm);
        let stats = SolverStats {
            iterations,
            relative_residual: rel,
            backward_error: backward,
        };
        if rel <= tol {
            return Ok((x, stats));
        }
        if r_norm <= 0.5 * best {
            best = r_norm;
            stagnant = 0;
        } else {
            best = best.min(r_norm);
            stagnant += 1;
        }
        if (stagnant >= STAGNANT_SWEEPS || iterations >= cap || iterations == sweep_start) && backward <= tol {
            return Ok((x, stats));
        }
        if iterations >= cap || iterations == sweep_start || stagnant >= STAGNANT_SWEEPS {
            return Err(Error::NoConvergence {
                iterations,
                residual: rel,
            });
        }
    }
}

/// Zero-mean `phi` with `L_w phi = sigma V` to relative residual `tol`.
pub fn weighted_poisson_solve(sigma: &SignedDensity, w: &Density, tol: f64) -> Result<PoissonSolution> {
    if sigma.domain() != w.domain() {
        return Err(Error::DomainMismatch);
    }
    let op = WeightedLaplacian::new(w)?;
    let rhs = neutral_rhs(sigma)?;
    let (phi, stats) = conjugate_gradient(&op, &rhs, tol)?;
    Ok(PoissonSolution {
        potential: ScalarField::new(sigma.domain().clone(), phi)?,
        stats,
    })
}

/// Weighted negative Sobolev norm together with solver diagnostics.
pub fn hminus1_norm_with_stats(sigma: &SignedDensity, w: &Density, tol: f64) -> Result<(f64, SolverStats)> {
    let sol = weighted_poisson_solve(sigma, w, tol)?;
    let norm = h1_seminorm(&sol.potential, w)?;
    Ok((norm, sol.stats))
}

pub fn hminus1_norm(sigma: &SignedDensity, w: &Density, tol: f64) -> Result<f64> {
    hminus1_norm_with_stats(sigma, w, tol).map(|(n, _)| n)
}

/// `|<f, sigma>| / ||f||_{H^1(w)}`: a lower bound on the dual norm for any
/// nonconstant test field.
pub fn duality_gap_check(sigma: &SignedDensity, w: &Density, f: &ScalarField) -> Result<f64> {
    let seminorm = h1_seminorm(f, w)?;
    if seminorm == 0.0 {
        return Err(Error::ConstantField);
    }
    Ok(f.pairing(sigma)?.abs() / seminorm)
}
