//! Inequality checks between the transport distance and the negative
//! Sobolev norm, each returning a [`CheckReport`] with both sides.

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::grid::{make_measure, Density, Generator, GridDomain, SignedDensity};
use crate::sobolev::dense::dense_hminus1_norm;
use crate::sobolev::{hminus1_norm, DEFAULT_TOL};
use crate::wasserstein::{w2_1d, w2_atomic, w2_circle, w2_exact_capped, w2_to_point, MassModel, DEFAULT_LP_CAP, MASS_TOL};

pub mod harness;

/// Relative slack of the theorem checks.
pub const DEFAULT_CHECK_TOL: f64 = 1e-6;
/// Relative slack of the weight-domination check.
pub const LEMMA_CHECK_TOL: f64 = 1e-8;
/// Largest grid on which the dense solver is used as a cross-check.
pub const DENSE_CROSS_CHECK_CELLS: usize = 4096;
/// Allowed relative gap between the iterative and dense norms.
pub const NORM_AGREEMENT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    pub tolerance: f64,
    pub solver_tol: f64,
    pub lp_cap: usize,
    /// Recompute both sides by an independent route.
    pub cross_check: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_CHECK_TOL,
            solver_tol: DEFAULT_TOL,
            lp_cap: DEFAULT_LP_CAP,
            cross_check: false,
        }
    }
}

impl CheckOptions {
    pub fn with_tolerance(self, tolerance: f64) -> Self {
        Self { tolerance, ..self }
    }

    pub fn cross_checked(self) -> Self {
        Self { cross_check: true, ..self }
    }
}

/// A quantity evaluated twice by unrelated code.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossCheck {
    pub quantity: String,
    pub primary: f64,
    pub independent: f64,
    pub allowed_gap: f64,
    pub consistent: bool,
}

impl CrossCheck {
    fn new(quantity: &str, primary: f64, independent: f64, allowed_gap: f64) -> Self {
        Self {
            quantity: quantity.into(),
            primary,
            independent,
            allowed_gap,
            consistent: (primary - independent).abs() <= allowed_gap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub check_name: String,
    pub instance_spec: Value,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub cross_checks: Vec<CrossCheck>,
}

impl CheckReport {
    pub fn new(check_name: &str, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let ratio = if rhs > 0.0 {
            lhs / rhs
        } else if lhs <= 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        Self {
            check_name: check_name.into(),
            instance_spec: Value::Null,
            lhs,
            rhs,
            ratio,
            tolerance,
            passed: lhs <= rhs * (1.0 + tolerance),
            cross_checks: Vec::new(),
        }
    }

    pub fn with_spec(mut self, spec: Value) -> Self {
        self.instance_spec = spec;
        self
    }

    /// No cross-check disagreed.
    pub fn consistent(&self) -> bool {
        self.cross_checks.iter().all(|c| c.consistent)
    }

    /// Passed and consistent.
    pub fn certified(&self) -> bool {
        self.passed && self.consistent()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

fn check_pair(mu: &Density, nu: &Density) -> Result<()> {
    if mu.domain() != nu.domain() {
        return Err(Error::DomainMismatch);
    }
    let (a, b) = (mu.total_mass(), nu.total_mass());
    if (a - b).abs() > MASS_TOL * a.max(b) {
        return Err(Error::MassMismatch { left: a, right: b });
    }
    Ok(())
}

fn check_upper(m: &Density, rho: f64, what: &str) -> Result<()> {
    match m.values().iter().position(|&v| v > rho) {
        Some(cell) => Err(Error::HypothesisViolated(format!(
            "{what} exceeds {rho} at cell {cell} ({})",
            m.values()[cell]
        ))),
        None => Ok(()),
    }
}

fn check_lower(m: &Density, rho: f64, what: &str) -> Result<()> {
    match m.values().iter().position(|&v| v < rho) {
        Some(cell) => Err(Error::HypothesisViolated(format!(
            "{what} is below {rho} at cell {cell} ({})",
            m.values()[cell]
        ))),
        None => Ok(()),
    }
}

/// Largest transport distance between the cell-wise and atomic placements
/// of the same pair: each side moves at most `sqrt(m sum h_a^2 / 12)`.
pub fn mass_model_gap(domain: &GridDomain, mass: f64) -> f64 {
    let h2: f64 = (0..domain.dims()).map(|a| domain.spacing(a).powi(2)).sum();
    2.0 * (mass * h2 / 12.0).sqrt()
}

/// `W_2` through the primary route for the domain, plus an independent
/// evaluation when requested.
fn transport(mu: &Density, nu: &Density, opts: &CheckOptions, out: &mut Vec<CrossCheck>) -> Result<f64> {
    let d = mu.domain();
    if d.dims() == 1 {
        let primary = if d.is_torus() {
            w2_circle(mu, nu, MassModel::Cellwise)?.0
        } else {
            w2_1d(mu, nu)?
        };
        if opts.cross_check {
            if let Ok(lp) = w2_exact_capped(mu, nu, opts.lp_cap) {
                let gap = mass_model_gap(d, mu.total_mass()) + 1e-9 * primary.max(lp.distance);
                out.push(CrossCheck::new("w2", primary, lp.distance, gap));
            }
        }
        return Ok(primary);
    }
    let lp = w2_exact_capped(mu, nu, opts.lp_cap)?;
    if opts.cross_check {
        let dual = lp.certificate.dual_objective.max(0.0).sqrt();
        let cmax: f64 = d.extents().iter().map(|l| l * l).sum();
        let mut c = CrossCheck::new("w2", lp.distance, dual, 1e-9 * lp.distance.max(1e-300) + 1e-12);
        c.consistent &= lp.certificate.max_violation <= 1e-9 * cmax;
        out.push(c);
    }
    Ok(lp.distance)
}

fn norm(sigma: &SignedDensity, w: &Density, opts: &CheckOptions, label: &str, out: &mut Vec<CrossCheck>) -> Result<f64> {
    let primary = hminus1_norm(sigma, w, opts.solver_tol)?;
    if opts.cross_check && w.domain().cell_count() <= DENSE_CROSS_CHECK_CELLS {
        let dense = dense_hminus1_norm(sigma, w)?;
        out.push(CrossCheck::new(label, primary, dense, NORM_AGREEMENT * primary.max(dense) + 1e-14));
    }
    Ok(primary)
}

/// `W_2(mu, nu) <= 2 |nu - mu|_{H^-1(mu)}`.
pub fn check_thm1(mu: &Density, nu: &Density, opts: &CheckOptions) -> Result<CheckReport> {
    check_pair(mu, nu)?;
    let mut cc = Vec::new();
    let lhs = transport(mu, nu, opts, &mut cc)?;
    let rhs = 2.0 * norm(&nu.minus(mu)?, mu, opts, "hminus1_weighted", &mut cc)?;
    let mut r = CheckReport::new("check_thm1", lhs, rhs, opts.tolerance);
    r.cross_checks = cc;
    Ok(r)
}

/// `W_2(mu, nu) <= 2 rho^{-1/2} |nu - mu|_{H^-1}` for `mu >= rho`.
pub fn check_cor1(mu: &Density, nu: &Density, rho: f64, opts: &CheckOptions) -> Result<CheckReport> {
    check_pair(mu, nu)?;
    if !(rho > 0.0) {
        return Err(Error::OutOfRange(format!("lower density bound must be positive, got {rho}")));
    }
    check_lower(mu, rho, "mu")?;
    let mut cc = Vec::new();
    let lhs = transport(mu, nu, opts, &mut cc)?;
    let one = Density::uniform(mu.domain().clone(), 1.0)?;
    let rhs = 2.0 / rho.sqrt() * norm(&nu.minus(mu)?, &one, opts, "hminus1", &mut cc)?;
    let mut r = CheckReport::new("check_cor1", lhs, rhs, opts.tolerance);
    r.cross_checks = cc;
    Ok(r)
}

/// `|sigma|_{H^-1(w')} <= rho^{-1/2} |sigma|_{H^-1(w)}` for `w' >= rho w`.
pub fn check_lemma_qq(
    sigma: &SignedDensity,
    w: &Density,
    w_prime: &Density,
    rho: f64,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    if sigma.domain() != w.domain() || w.domain() != w_prime.domain() {
        return Err(Error::DomainMismatch);
    }
    if !(rho > 0.0) {
        return Err(Error::OutOfRange(format!("domination factor must be positive, got {rho}")));
    }
    for (cell, (&a, &b)) in w_prime.values().iter().zip(w.values()).enumerate() {
        if a < rho * b {
            return Err(Error::DominationViolated { cell, lhs: a, rhs: rho * b });
        }
    }
    let mut cc = Vec::new();
    let lhs = norm(sigma, w_prime, opts, "hminus1_dominating", &mut cc)?;
    let rhs = norm(sigma, w, opts, "hminus1_base", &mut cc)? / rho.sqrt();
    let mut r = CheckReport::new("check_lemma_qq", lhs, rhs, opts.tolerance);
    r.cross_checks = cc;
    Ok(r)
}

/// `2 (sqrt(rho1) - sqrt(rho0)) / ln(rho1 / rho0)`, with value `sqrt(rho0)`
/// on the diagonal.
///
/// Evaluated as `g sinh(u/4) / (u/4)` with `g = (rho0 rho1)^{1/4}` and
/// `u = ln(rho1/rho0)`, which is exactly symmetric; near the diagonal the
/// quotient is replaced by `1 + (u/4)^2 / 6`.
pub fn thm2_prefactor(rho0: f64, rho1: f64) -> Result<f64> {
    if !(rho0 > 0.0 && rho1 > 0.0 && rho0.is_finite() && rho1.is_finite()) {
        return Err(Error::OutOfRange(format!(
            "densities must be positive and finite, got {rho0} and {rho1}"
        )));
    }
    let u = (rho1 / rho0).ln();
    let g = (rho0 * rho1).sqrt().sqrt();
    let x = 0.25 * u;
    if u.abs() < 1e-6 {
        return Ok(g * (1.0 + x * x / 6.0));
    }
    Ok(g * x.sinh() / x)
}

/// `int_0^1 ((1-t) rho0^{-1/n} + t rho1^{-1/n})^{-n/2} dt` by composite
/// Simpson on 2048 panels.
pub fn integrated_refined_prefactor(n: u32, rho0: f64, rho1: f64) -> Result<f64> {
    const PANELS: usize = 2048;
    let f = |t: f64| crate::interpolation::refined_density_bound(n, t, rho0, rho1).map(f64::sqrt);
    let h = 1.0 / PANELS as f64;
    let mut sum = f(0.0)? + f(1.0)?;
    for k in 1..PANELS {
        sum += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h)?;
    }
    Ok(sum * h / 3.0)
}

/// `|nu - mu|_{H^-1} <= prefactor(rho0, rho1) W_2(mu, nu)` on a flat torus.
pub fn check_thm2(mu: &Density, nu: &Density, rho0: f64, rho1: f64, opts: &CheckOptions) -> Result<CheckReport> {
    check_pair(mu, nu)?;
    if !mu.domain().is_torus() {
        return Err(Error::WrongDomainType { expected: "torus" });
    }
    let prefactor = thm2_prefactor(rho0, rho1)?;
    check_upper(mu, rho0, "mu")?;
    check_upper(nu, rho1, "nu")?;
    let mut cc = Vec::new();
    let one = Density::uniform(mu.domain().clone(), 1.0)?;
    let lhs = norm(&nu.minus(mu)?, &one, opts, "hminus1", &mut cc)?;
    let rhs = prefactor * transport(mu, nu, opts, &mut cc)?;
    let mut r = CheckReport::new("check_thm2", lhs, rhs, opts.tolerance);
    r.cross_checks = cc;
    Ok(r)
}

/// `|nu - mu|_{H^-1} <= 2 sqrt(rho0) W_2(mu, nu)` on an interval, with no
/// bound on `nu`.
pub fn check_thm3(mu: &Density, nu: &Density, rho0: f64, opts: &CheckOptions) -> Result<CheckReport> {
    check_pair(mu, nu)?;
    let d = mu.domain();
    if d.dims() != 1 || d.is_torus() {
        return Err(Error::WrongDomainType { expected: "one-dimensional interval" });
    }
    if !(rho0 > 0.0) {
        return Err(Error::OutOfRange(format!("upper density bound must be positive, got {rho0}")));
    }
    check_upper(mu, rho0, "mu")?;
    let mut cc = Vec::new();
    let one = Density::uniform(d.clone(), 1.0)?;
    let lhs = norm(&nu.minus(mu)?, &one, opts, "hminus1", &mut cc)?;
    let rhs = 2.0 * rho0.sqrt() * transport(mu, nu, opts, &mut cc)?;
    let mut r = CheckReport::new("check_thm3", lhs, rhs, opts.tolerance);
    r.cross_checks = cc;
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportRoute {
    Lp,
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub n: usize,
    pub w2: f64,
    pub w2_squared: f64,
    pub hminus1: f64,
    pub route: TransportRoute,
    /// `|LP - analytic|` where the linear program was run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lp_analytic_gap: Option<f64>,
}

/// Uniform unit mass on the unit 2-torus against all of it in one cell,
/// for each `N x N` grid.
pub fn counterexample_scan(ns: &[usize], opts: &CheckOptions) -> Result<Vec<ScanRow>> {
    ns.iter()
        .map(|&n| {
            let d = GridDomain::unit_torus(2, n)?;
            let mu = Density::uniform(d.clone(), 1.0)?;
            let cell = d.ravel(&[n / 2, n / 2]);
            let nu = make_measure(&d, &Generator::DiracLike { cell, mass: 1.0 })?;
            let analytic = w2_to_point(&mu, &d.center(cell));
            let (w2, route, gap) = if n * n <= opts.lp_cap {
                let lp = w2_exact_capped(&mu, &nu, opts.lp_cap)?.distance;
                (lp, TransportRoute::Lp, Some((lp - analytic).abs()))
            } else {
                (analytic, TransportRoute::Analytic, None)
            };
            let one = Density::uniform(d, 1.0)?;
            let hminus1 = hminus1_norm(&nu.minus(&mu)?, &one, opts.solver_tol)?;
            Ok(ScanRow {
                n,
                w2,
                w2_squared: w2 * w2,
                hminus1,
                route,
                lp_analytic_gap: gap,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearizationPoint {
    pub eps: f64,
    pub w2: f64,
    pub hminus1: f64,
    pub ratio: f64,
}

/// `W_2(mu, mu + eps sigma) / |eps sigma|_{H^-1(mu)}` for each `eps`.
pub fn linearization_ratios(mu: &Density, sigma: &SignedDensity, eps: &[f64], opts: &CheckOptions) -> Result<Vec<LinearizationPoint>> {
    eps.iter()
        .map(|&e| {
            let scaled = sigma.scaled(e);
            let nu = scaled.added_to(mu)?;
            let w2 = match mu.domain().dims() {
                1 => crate::wasserstein::w2(mu, &nu)?,
                _ => w2_atomic(mu, &nu)?,
            };
            let hminus1 = hminus1_norm(&scaled, mu, opts.solver_tol)?;
            Ok(LinearizationPoint {
                eps: e,
                w2,
                hminus1,
                ratio: w2 / hminus1,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests;
