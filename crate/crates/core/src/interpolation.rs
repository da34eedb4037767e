//! Paths of measures between two endpoints: the mixture path
//! `(1 - t) mu + t nu` and the displacement interpolation along optimal
//! transport, plus the sup-density audit along a path.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Density, GridDomain};
use crate::wasserstein::quantile::{circle_cost, merged_breakpoints, Quantile};
use crate::wasserstein::{w2_exact_capped, MassModel, DEFAULT_LP_CAP, MASS_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PathKind {
    Linear,
    Displacement,
}

#[derive(Debug, Clone, Serialize)]
pub struct PathSample {
    pub t: f64,
    pub density: Density,
}

#[derive(Debug, Clone)]
pub struct MeasurePath {
    pub kind: PathKind,
    pub start: Density,
    pub end: Density,
    pub samples: Vec<PathSample>,
}

impl MeasurePath {
    /// JSON array of `{t, density}` records.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.samples).expect("path serializes")
    }
}

/// `k / 16` for `k = 0..=16`.
pub fn default_times() -> Vec<f64> {
    (0..=16).map(|k| k as f64 / 16.0).collect()
}

fn check_times(ts: &[f64]) -> Result<()> {
    match ts.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        Some(t) => Err(Error::OutOfRange(format!("path time {t} outside [0, 1]"))),
        None => Ok(()),
    }
}

fn check_endpoints(mu: &Density, nu: &Density) -> Result<()> {
    if mu.domain() != nu.domain() {
        return Err(Error::DomainMismatch);
    }
    let (a, b) = (mu.total_mass(), nu.total_mass());
    if (a - b).abs() > MASS_TOL * a.max(b) {
        return Err(Error::MassMismatch { left: a, right: b });
    }
    Ok(())
}

pub fn linear_path(mu: &Density, nu: &Density, ts: &[f64]) -> Result<MeasurePath> {
    check_endpoints(mu, nu)?;
    check_times(ts)?;
    let samples = ts
        .iter()
        .map(|&t| {
            let values = if t == 0.0 {
                mu.values().to_vec()
            } else if t == 1.0 {
                nu.values().to_vec()
            } else {
                mu.values()
                    .iter()
                    .zip(nu.values())
                    .map(|(a, b)| (1.0 - t) * a + t * b)
                    .collect()
            };
            Density::new(mu.domain().clone(), values).map(|density| PathSample { t, density })
        })
        .collect::<Result<_>>()?;
    Ok(MeasurePath {
        kind: PathKind::Linear,
        start: mu.clone(),
        end: nu.clone(),
        samples,
    })
}

/// Adds `mass` spread uniformly over `[x0, x1]` (or at `x0` when the span
/// is empty) to the cell masses of a one-dimensional domain.
fn deposit_segment(domain: &GridDomain, masses: &mut [f64], x0: f64, x1: f64, mass: f64) {
    let n = domain.cells_per_dim()[0];
    let h = domain.spacing(0);
    let len = domain.extents()[0];
    let span = x1 - x0;
    if span <= 1e-14 * len {
        masses[domain.cell_containing(&[0.5 * (x0 + x1)])] += mass;
        return;
    }
    let (start, end) = if domain.is_torus() {
        let s = x0.rem_euclid(len);
        (s, s + span)
    } else {
        (x0.clamp(0.0, len), x1.clamp(0.0, len))
    };
    let mut k = (start / h).floor() as i64;
    loop {
        let lo = k as f64 * h;
        if lo >= end {
            break;
        }
        let overlap = ((k + 1) as f64 * h).min(end) - lo.max(start);
        if overlap > 0.0 {
            let cell = if domain.is_torus() {
                k.rem_euclid(n as i64) as usize
            } else {
                (k.max(0) as usize).min(n - 1)
            };
            masses[cell] += mass * overlap / span;
        }
        k += 1;
    }
}

fn displacement_1d(mu: &Density, nu: &Density, ts: &[f64]) -> Result<Vec<PathSample>> {
    let d = mu.domain();
    let qa = Quantile::new(mu, MassModel::Cellwise);
    let qb = Quantile::new(nu, MassModel::Cellwise);
    let (shift, lifted) = if d.is_torus() {
        (circle_cost(&qa, &qb).1, true)
    } else {
        (0.0, false)
    };
    // Quantile segments on which both maps are affine.
    let pts = merged_breakpoints(&qa, &qb, shift, lifted);
    let segments: Vec<(f64, f64, f64, f64, f64)> = pts
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let (lo, hi) = (w[0], w[1]);
            let mid = 0.5 * (lo + hi);
            let pa = &qa.pieces[qa.locate(mid, false).0];
            let (kb, ds, dx) = qb.locate(mid + shift, lifted);
            let pb = &qb.pieces[kb];
            (
                hi - lo,
                pa.eval(lo),
                pa.eval(hi),
                pb.eval(lo + shift - ds) + dx,
                pb.eval(hi + shift - ds) + dx,
            )
        })
        .collect();
    let v = d.cell_volume();
    ts.iter()
        .map(|&t| {
            let mut masses = vec![0.0; d.cell_count()];
            for &(m, a0, a1, b0, b1) in &segments {
                let x0 = (1.0 - t) * a0 + t * b0;
                let x1 = (1.0 - t) * a1 + t * b1;
                deposit_segment(d, &mut masses, x0, x1, m);
            }
            let density = Density::new(d.clone(), masses.iter().map(|x| x / v).collect())?;
            Ok(PathSample { t, density })
        })
        .collect()
}

fn displacement_torus(mu: &Density, nu: &Density, ts: &[f64], cap: usize) -> Result<Vec<PathSample>> {
    let d = mu.domain();
    let plan = w2_exact_capped(mu, nu, cap)?;
    let v = d.cell_volume();
    let moves: Vec<(Vec<f64>, Vec<f64>, f64)> = plan
        .coupling
        .entries()
        .iter()
        .map(|&(i, j, m)| {
            let from = d.center(i);
            let step = d.displacement(&from, &d.center(j));
            (from, step, m)
        })
        .collect();
    ts.iter()
        .map(|&t| {
            let mut masses = vec![0.0; d.cell_count()];
            for (from, step, m) in &moves {
                let p: Vec<f64> = from.iter().zip(step).map(|(x, s)| x + t * s).collect();
                masses[d.cell_containing(&p)] += m;
            }
            let density = Density::new(d.clone(), masses.iter().map(|x| x / v).collect())?;
            Ok(PathSample { t, density })
        })
        .collect()
}

/// Displacement interpolation binned to the grid.
///
/// One-dimensional domains push the cell-wise densities through the monotone
/// (rotated, on the circle) quantile coupling and deposit the mass of every
/// affine piece exactly into the cells it covers. Higher-dimensional tori
/// move every atom of the optimal cell-center coupling along its minimizing
/// geodesic and deposit it in the containing cell.
pub fn displacement_path(mu: &Density, nu: &Density, ts: &[f64]) -> Result<MeasurePath> {
    check_endpoints(mu, nu)?;
    check_times(ts)?;
    let samples = if mu.total_mass() == 0.0 {
        ts.iter()
            .map(|&t| PathSample { t, density: mu.clone() })
            .collect()
    } else if mu.domain().dims() == 1 {
        displacement_1d(mu, nu, ts)?
    } else {
        displacement_torus(mu, nu, ts, DEFAULT_LP_CAP)?
    };
    Ok(MeasurePath {
        kind: PathKind::Displacement,
        start: mu.clone(),
        end: nu.clone(),
        samples,
    })
}

/// `((1 - t) rho0^{-1/n} + t rho1^{-1/n})^{-n}`.
pub fn refined_density_bound(n: u32, t: f64, rho0: f64, rho1: f64) -> Result<f64> {
    if !(rho0 > 0.0 && rho1 > 0.0) {
        return Err(Error::OutOfRange(format!(
            "densities must be positive, got {rho0} and {rho1}"
        )));
    }
    if !(0.0..=1.0).contains(&t) || n == 0 {
        return Err(Error::OutOfRange(format!("need t in [0, 1] and n >= 1, got t = {t}, n = {n}")));
    }
    if rho0 == rho1 {
        return Ok(rho0);
    }
    let p = -1.0 / n as f64;
    Ok(((1.0 - t) * rho0.powf(p) + t * rho1.powf(p)).powf(-(n as f64)))
}

/// `rho0^{1-t} rho1^t`.
pub fn geometric_density_bound(t: f64, rho0: f64, rho1: f64) -> f64 {
    rho0.powf(1.0 - t) * rho1.powf(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditRow {
    pub t: f64,
    pub sup_density: f64,
    pub bound: f64,
    pub refined_bound: f64,
    /// `sup_density > bound * (1 + tolerance)`.
    pub violated: bool,
    pub refined_violated: bool,
}

/// Compares the sup density of every path sample with the geometric bound
/// and the dimension-refined bound (with `n` the domain dimension).
pub fn density_bound_audit(path: &MeasurePath, rho0: f64, rho1: f64, tolerance: f64) -> Result<Vec<AuditRow>> {
    if path.start.sup_density() > rho0 {
        return Err(Error::HypothesisViolated(format!(
            "start density sup {} exceeds rho0 = {rho0}",
            path.start.sup_density()
        )));
    }
    if path.end.sup_density() > rho1 {
        return Err(Error::HypothesisViolated(format!(
            "end density sup {} exceeds rho1 = {rho1}",
            path.end.sup_density()
        )));
    }
    let n = path.start.domain().dims() as u32;
    path.samples
        .iter()
        .map(|s| {
            let sup = s.density.sup_density();
            let bound = geometric_density_bound(s.t, rho0, rho1);
            let refined = refined_density_bound(n, s.t, rho0, rho1)?;
            Ok(AuditRow {
                t: s.t,
                sup_density: sup,
                bound,
                refined_bound: refined,
                violated: sup > bound * (1.0 + tolerance),
                refined_violated: sup > refined * (1.0 + tolerance),
            })
        })
        .collect()
}
