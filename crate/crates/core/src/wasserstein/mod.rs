//! Quadratic Wasserstein distances and couplings between grid measures.
//!
//! Two exact routes are provided:
//!
//! * [`w2_1d`] / [`w2_circle`]: closed-form quantile integration on the
//!   interval and on the one-dimensional torus, for either [`MassModel`].
//! * [`w2_exact`]: the transportation linear program between cell-center
//!   atoms, solved by network simplex in any dimension.
//!
//! Both routes agree on atomic measures, which is how they check each other.
//! [`w2`] picks the most faithful route for a domain: cell-wise quantile
//! integration in one dimension, the linear program otherwise.

pub(crate) mod quantile;
pub mod simplex;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Density, GridDomain};

pub use quantile::MassModel;
pub use simplex::SimplexStats;

/// Relative total-mass mismatch tolerated between transported measures.
pub const MASS_TOL: f64 = 1e-9;
/// Default cap on support cells per measure for the linear program.
pub const DEFAULT_LP_CAP: usize = 1024;

/// Nonnegative measure on cell pairs of one domain, stored sparsely and
/// sorted by `(row, col)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    domain: GridDomain,
    entries: Vec<(usize, usize, f64)>,
}

#[derive(Serialize)]
struct TripletWire {
    rows: Vec<usize>,
    cols: Vec<usize>,
    masses: Vec<f64>,
}

impl Coupling {
    /// Builds a coupling, merging duplicate pairs and dropping zero entries.
    pub fn new(domain: GridDomain, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        let cells = domain.cell_count();
        for &(i, j, m) in &entries {
            if i >= cells || j >= cells {
                return Err(Error::IndexOutOfRange {
                    index: i.max(j),
                    cells,
                });
            }
            if !(m >= 0.0 && m.is_finite()) {
                return Err(Error::InvalidValues(format!("coupling mass {m} at ({i}, {j})")));
            }
        }
        entries.sort_by_key(|e| (e.0, e.1));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (i, j, m) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += m,
                _ => merged.push((i, j, m)),
            }
        }
        merged.retain(|e| e.2 > 0.0);
        Ok(Self {
            domain,
            entries: merged,
        })
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn mass(&self, i: usize, j: usize) -> f64 {
        self.entries
            .binary_search_by(|e| (e.0, e.1).cmp(&(i, j)))
            .map(|k| self.entries[k].2)
            .unwrap_or(0.0)
    }

    /// Cell masses of the first marginal.
    pub fn row_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.domain.cell_count()];
        for &(i, _, m) in &self.entries {
            out[i] += m;
        }
        out
    }

    /// Cell masses of the second marginal.
    pub fn col_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.domain.cell_count()];
        for &(_, j, m) in &self.entries {
            out[j] += m;
        }
        out
    }

    pub fn row_density(&self) -> Result<Density> {
        let v = self.domain.cell_volume();
        Density::new(self.domain.clone(), self.row_marginal().iter().map(|m| m / v).collect())
    }

    pub fn col_density(&self) -> Result<Density> {
        let v = self.domain.cell_volume();
        Density::new(self.domain.clone(), self.col_marginal().iter().map(|m| m / v).collect())
    }

    /// Sparse triplet JSON `{rows, cols, masses}`.
    pub fn to_triplet_json(&self) -> String {
        let wire = TripletWire {
            rows: self.entries.iter().map(|e| e.0).collect(),
            cols: self.entries.iter().map(|e| e.1).collect(),
            masses: self.entries.iter().map(|e| e.2).collect(),
        };
        serde_json::to_string(&wire).expect("triplets serialize")
    }
}

/// `sum d(i, j)^2 pi(i, j)`.
pub fn coupling_cost(pi: &Coupling) -> f64 {
    pi.entries
        .iter()
        .map(|&(i, j, m)| pi.domain.cell_distance_sq_unchecked(i, j) * m)
        .sum()
}

/// The coupling supported on the diagonal with both marginals `m`.
pub fn diag_coupling(m: &Density) -> Coupling {
    let entries = m
        .cell_masses()
        .into_iter()
        .enumerate()
        .filter(|(_, x)| *x > 0.0)
        .map(|(i, x)| (i, i, x))
        .collect();
    Coupling {
        domain: m.domain().clone(),
        entries,
    }
}

/// `rho * pi + diag(mu' - rho * mu)` where `mu` is the first marginal of
/// `pi`. Its marginals are `mu'` and `mu' + rho (nu - mu)`, and its cost is
/// `rho` times the cost of `pi`.
pub fn lemma_coupling_transform(pi: &Coupling, mu_prime: &Density, rho: f64) -> Result<Coupling> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::OutOfRange(format!("rho must be positive, got {rho}")));
    }
    if mu_prime.domain() != pi.domain() {
        return Err(Error::DomainMismatch);
    }
    let row = pi.row_marginal();
    let target = mu_prime.cell_masses();
    let mut entries: Vec<(usize, usize, f64)> =
        pi.entries.iter().map(|&(i, j, m)| (i, j, rho * m)).collect();
    for (cell, (&t, &r)) in target.iter().zip(&row).enumerate() {
        let need = rho * r;
        let slack = t - need;
        if slack < -1e-12 * need.max(t) {
            return Err(Error::DominationViolated {
                cell,
                lhs: t,
                rhs: need,
            });
        }
        if slack > 0.0 {
            entries.push((cell, cell, slack));
        }
    }
    Coupling::new(pi.domain().clone(), entries)
}

fn check_masses(mu: &Density, nu: &Density) -> Result<(f64, f64)> {
    if mu.domain() != nu.domain() {
        return Err(Error::DomainMismatch);
    }
    let (a, b) = (mu.total_mass(), nu.total_mass());
    if (a - b).abs() > MASS_TOL * a.abs().max(b.abs()) {
        return Err(Error::MassMismatch { left: a, right: b });
    }
    Ok((a, b))
}

/// Exact `W_2` on an interval through quantile functions.
pub fn w2_1d_with_model(mu: &Density, nu: &Density, model: MassModel) -> Result<f64> {
    let d = mu.domain();
    if d.dims() != 1 || d.is_torus() {
        return Err(Error::WrongDomainType {
            expected: "a one-dimensional interval",
        });
    }
    let (a, _) = check_masses(mu, nu)?;
    if a == 0.0 {
        return Ok(0.0);
    }
    let qa = quantile::Quantile::new(mu, model);
    let qb = quantile::Quantile::new(nu, model);
    Ok(quantile::quantile_cost(&qa, &qb, 0.0, false).max(0.0).sqrt())
}

/// [`w2_1d_with_model`] for cell-wise constant densities.
pub fn w2_1d(mu: &Density, nu: &Density) -> Result<f64> {
    w2_1d_with_model(mu, nu, MassModel::Cellwise)
}

/// Exact `W_2` on the one-dimensional torus: the lifted quantile cost
/// minimized over rotations. Returns the distance and the optimal rotation
/// (in mass units).
pub fn w2_circle(mu: &Density, nu: &Density, model: MassModel) -> Result<(f64, f64)> {
    let d = mu.domain();
    if d.dims() != 1 || !d.is_torus() {
        return Err(Error::WrongDomainType {
            expected: "a one-dimensional torus",
        });
    }
    let (a, _) = check_masses(mu, nu)?;
    if a == 0.0 {
        return Ok((0.0, 0.0));
    }
    let qa = quantile::Quantile::new(mu, model);
    let qb = quantile::Quantile::new(nu, model);
    let (cost, shift) = quantile::circle_cost(&qa, &qb);
    Ok((cost.max(0.0).sqrt(), shift))
}

/// LP duality certificate: the dual objective and the largest violation of
/// `u_i + v_j <= d(i, j)^2` over all support pairs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct DualCertificate {
    pub dual_objective: f64,
    pub max_violation: f64,
}

/// Result of the exact transport linear program.
#[derive(Debug, Clone)]
pub struct ExactTransport {
    pub distance: f64,
    pub coupling: Coupling,
    pub stats: SimplexStats,
    pub certificate: DualCertificate,
}

/// `W_2` between cell-center atoms with an optimal coupling, solved as a
/// balanced transportation problem over the support cells.
pub fn w2_exact_capped(mu: &Density, nu: &Density, cap: usize) -> Result<ExactTransport> {
    let (a, _) = check_masses(mu, nu)?;
    let d = mu.domain();
    let rows: Vec<(usize, f64)> = mu.cell_masses().into_iter().enumerate().filter(|e| e.1 > 0.0).collect();
    let cols: Vec<(usize, f64)> = nu.cell_masses().into_iter().enumerate().filter(|e| e.1 > 0.0).collect();
    if rows.len() > cap || cols.len() > cap {
        return Err(Error::ProblemTooLarge {
            rows: rows.len(),
            cols: cols.len(),
            cap,
        });
    }
    if a == 0.0 || rows.is_empty() || cols.is_empty() {
        return Ok(ExactTransport {
            distance: 0.0,
            coupling: Coupling::new(d.clone(), Vec::new())?,
            stats: SimplexStats::default(),
            certificate: DualCertificate::default(),
        });
    }
    let supply: Vec<f64> = rows.iter().map(|r| r.1).collect();
    // absorb rounding so the program is exactly balanced
    let mut demand: Vec<f64> = cols.iter().map(|c| c.1).collect();
    let ratio = supply.iter().sum::<f64>() / demand.iter().sum::<f64>();
    demand.iter_mut().for_each(|x| *x *= ratio);
    let cost: Vec<f64> = rows
        .iter()
        .flat_map(|&(i, _)| cols.iter().map(move |&(j, _)| d.cell_distance_sq_unchecked(i, j)))
        .collect();
    let sol = simplex::solve_transport(&supply, &demand, &cost)?;
    let n = cols.len();
    let max_violation = (0..rows.len())
        .flat_map(|r| (0..n).map(move |c| (r, c)))
        .map(|(r, c)| sol.u[r] + sol.v[c] - cost[r * n + c])
        .fold(0.0f64, f64::max);
    let dual_objective = supply.iter().zip(&sol.u).map(|(a, u)| a * u).sum::<f64>()
        + demand.iter().zip(&sol.v).map(|(b, v)| b * v).sum::<f64>();
    let entries = sol
        .flows
        .iter()
        .map(|&(r, c, f)| (rows[r].0, cols[c].0, f))
        .collect();
    Ok(ExactTransport {
        distance: sol.cost.max(0.0).sqrt(),
        coupling: Coupling::new(d.clone(), entries)?,
        stats: sol.stats,
        certificate: DualCertificate {
            dual_objective,
            max_violation,
        },
    })
}

pub fn w2_exact(mu: &Density, nu: &Density) -> Result<ExactTransport> {
    w2_exact_capped(mu, nu, DEFAULT_LP_CAP)
}

/// `W_2` by the most faithful exact route for the domain: cell-wise
/// quantile integration in one dimension, the atomic linear program in
/// higher dimensions.
pub fn w2(mu: &Density, nu: &Density) -> Result<f64> {
    let d = mu.domain();
    match (d.dims(), d.is_torus()) {
        (1, false) => w2_1d(mu, nu),
        (1, true) => w2_circle(mu, nu, MassModel::Cellwise).map(|r| r.0),
        _ => w2_exact(mu, nu).map(|r| r.distance),
    }
}

/// `W_2` with atoms at cell centers regardless of dimension.
pub fn w2_atomic(mu: &Density, nu: &Density) -> Result<f64> {
    let d = mu.domain();
    match (d.dims(), d.is_torus()) {
        (1, false) => w2_1d_with_model(mu, nu, MassModel::Atomic),
        (1, true) => w2_circle(mu, nu, MassModel::Atomic).map(|r| r.0),
        _ => w2_exact(mu, nu).map(|r| r.distance),
    }
}

/// `W_2` from the cell-center atoms of `mu` to a single point `target`.
/// Every coupling to a point mass is the product coupling, so this is exact.
pub fn w2_to_point(mu: &Density, target: &[f64]) -> f64 {
    let d = mu.domain();
    (0..d.cell_count())
        .map(|i| {
            let r = d.point_distance(&d.center(i), target);
            mu.cell_mass(i) * r * r
        })
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_measure, Generator};
    use approx::assert_relative_eq;

    fn interval(n: usize) -> GridDomain {
        GridDomain::interval(n, 1.0).unwrap()
    }

    #[test]
    fn identical_measures_are_at_distance_zero() {
        let d = interval(16);
        let mu = make_measure(&d, &Generator::BoundedRandom { rho_min: 0.5, rho_max: 2.0, seed: 1 }).unwrap();
        assert_eq!(w2_1d(&mu, &mu).unwrap(), 0.0);
        let exact = w2_exact(&mu, &mu).unwrap();
        assert!(exact.distance <= 1e-12);
        assert_eq!(exact.coupling, diag_coupling(&mu));
    }

    #[test]
    fn point_mass_translation() {
        let d = GridDomain::interval(4, 1.0).unwrap();
        let mu = make_measure(&d, &Generator::DiracLike { cell: 0, mass: 1.0 }).unwrap();
        let nu = make_measure(&d, &Generator::DiracLike { cell: 2, mass: 1.0 }).unwrap();
        // cells 0 and 2 of 4 have centers 0.125 and 0.625
        assert_relative_eq!(w2_1d(&mu, &nu).unwrap(), 0.5, max_relative = 1e-14);
        let d = GridDomain::interval(2, 1.0).unwrap();
        let mu = make_measure(&d, &Generator::DiracLike { cell: 0, mass: 1.0 }).unwrap();
        let nu = make_measure(&d, &Generator::DiracLike { cell: 1, mass: 1.0 }).unwrap();
        assert_relative_eq!(w2_1d(&mu, &nu).unwrap(), 0.5, max_relative = 1e-14);
        assert_relative_eq!(w2_exact(&mu, &nu).unwrap().distance, 0.5, max_relative = 1e-14);
    }

    #[test]
    fn three_point_torus_instance() {
        // mass 1 at center 0, halves at -1/2 and +1/2 (a 3-cell circle of
        // length 3/2 centered so the masses sit at 0.25, 0.75, 1.25)
        let d = GridDomain::torus(vec![3], vec![1.5]).unwrap();
        let mu = Density::new(d.clone(), vec![0.0, 2.0, 0.0]).unwrap();
        let nu = Density::new(d.clone(), vec![1.0, 0.0, 1.0]).unwrap();
        let exact = w2_exact(&mu, &nu).unwrap();
        assert_relative_eq!(exact.distance, 0.5, max_relative = 1e-12);
        assert_relative_eq!(w2_circle(&mu, &nu, MassModel::Atomic).unwrap().0, 0.5, max_relative = 1e-10);
    }

    #[test]
    fn coupling_cost_examples() {
        let d = GridDomain::interval(4, 2.0).unwrap();
        let pi = Coupling::new(d.clone(), vec![(0, 1, 1.0)]).unwrap();
        assert_eq!(coupling_cost(&pi), 0.25);
        // product of two-point marginals (0.3, 0.7) x (0.6, 0.4) on cells {0, 3} x {1, 2}
        let (a, b) = ([(0, 0.3), (3, 0.7)], [(1, 0.6), (2, 0.4)]);
        let entries = a.iter().flat_map(|&(i, p)| b.iter().map(move |&(j, q)| (i, j, p * q))).collect();
        let pi = Coupling::new(d, entries).unwrap();
        let hand = 0.18 * 0.25 + 0.12 * 1.0 + 0.42 * 1.0 + 0.28 * 0.25;
        assert_relative_eq!(coupling_cost(&pi), hand, max_relative = 1e-14);
    }

    #[test]
    fn diag_coupling_has_matching_marginals() {
        let d = GridDomain::unit_torus(2, 5).unwrap();
        let m = make_measure(&d, &Generator::BoundedRandom { rho_min: 0.0, rho_max: 2.0, seed: 3 }).unwrap();
        let pi = diag_coupling(&m);
        assert_eq!(coupling_cost(&pi), 0.0);
        assert_eq!(pi.row_marginal(), m.cell_masses());
        assert_eq!(pi.col_marginal(), m.cell_masses());
        let u = diag_coupling(&Density::uniform(d, 1.0).unwrap());
        assert!(u.entries().windows(2).all(|w| w[0].2 == w[1].2));
    }

    #[test]
    fn transform_identity_and_errors() {
        let d = interval(8);
        let mu = make_measure(&d, &Generator::BoundedRandom { rho_min: 0.5, rho_max: 2.0, seed: 4 }).unwrap();
        let nu = make_measure(&d, &Generator::BoundedRandom { rho_min: 0.5, rho_max: 2.0, seed: 5 })
            .unwrap()
            .with_mass(mu.total_mass())
            .unwrap();
        let pi = w2_exact(&mu, &nu).unwrap().coupling;
        let same = lemma_coupling_transform(&pi, &pi.row_density().unwrap(), 1.0).unwrap();
        assert_eq!(same.entries().len(), pi.entries().len());
        for (a, b) in same.entries().iter().zip(pi.entries()) {
            assert_eq!((a.0, a.1), (b.0, b.1));
            assert_relative_eq!(a.2, b.2, max_relative = 1e-15);
        }
        let small = mu.scaled(0.5).unwrap();
        assert!(matches!(
            lemma_coupling_transform(&pi, &small, 1.0),
            Err(Error::DominationViolated { .. })
        ));
    }

    #[test]
    fn mass_and_domain_errors() {
        let d = interval(8);
        let a = Density::uniform(d.clone(), 1.0).unwrap();
        let b = Density::uniform(d.clone(), 1.1).unwrap();
        assert!(matches!(w2_1d(&a, &b), Err(Error::MassMismatch { .. })));
        assert!(matches!(w2_exact(&a, &b), Err(Error::MassMismatch { .. })));
        let t = GridDomain::unit_torus(1, 8).unwrap();
        let c = Density::uniform(t, 1.0).unwrap();
        assert!(matches!(w2_1d(&c, &c), Err(Error::WrongDomainType { .. })));
        assert!(matches!(w2_circle(&a, &a, MassModel::Cellwise), Err(Error::WrongDomainType { .. })));
        let big = GridDomain::unit_torus(2, 8).unwrap();
        let m = Density::uniform(big, 1.0).unwrap();
        assert!(matches!(w2_exact_capped(&m, &m, 10), Err(Error::ProblemTooLarge { rows: 64, .. })));
    }

    #[test]
    fn cellwise_quantile_of_uniform_to_half_interval() {
        // uniform on [0,1] to uniform on [0,1/2]: map x -> x/2, cost int (x/2)^2 = 1/12
        let d = interval(4);
        let mu = Density::uniform(d.clone(), 1.0).unwrap();
        let nu = Density::new(d, vec![2.0, 2.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(w2_1d(&mu, &nu).unwrap(), (1.0f64 / 12.0).sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn coupling_triplet_json() {
        let d = interval(4);
        let pi = Coupling::new(d, vec![(1, 2, 0.5), (0, 0, 0.25), (1, 2, 0.25)]).unwrap();
        assert_eq!(pi.to_triplet_json(), r#"{"rows":[0,1],"cols":[0,2],"masses":[0.25,0.75]}"#);
    }

    #[test]
    fn point_target_formula_matches_lp() {
        let d = GridDomain::unit_torus(2, 8).unwrap();
        let mu = Density::uniform(d.clone(), 1.0).unwrap();
        let nu = make_measure(&d, &Generator::DiracLike { cell: 27, mass: 1.0 }).unwrap();
        let lp = w2_exact(&mu, &nu).unwrap().distance;
        assert_relative_eq!(lp, w2_to_point(&mu, &d.center(27)), max_relative = 1e-10);
    }
}
