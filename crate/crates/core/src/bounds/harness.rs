//! Seeded instance families and sweeps over them.
//!
//! A [`Sweep`] pairs one check with one domain, one family and a seed
//! range. Instances are independent and fan out through [`Execution`];
//! reports come back in seed order.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    check_cor1, check_lemma_qq, check_thm1, check_thm2, check_thm3, counterexample_scan, linearization_ratios,
    CheckOptions, CheckReport,
};
use crate::error::{Error, Result};
use crate::grid::{make_measure, smooth_signed, Density, Generator, GridDomain};
use crate::interpolation::{default_times, displacement_path, geometric_density_bound, refined_density_bound};
use crate::par::Execution;
use crate::wasserstein::{coupling_cost, lemma_coupling_transform, w2_exact_capped};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    CheckThm1,
    CheckCor1,
    CheckLemmaQq,
    CheckThm2,
    CheckThm3,
    Linearization,
    DisplacementDensity,
    CouplingIdentity,
    CounterexampleScan,
}

impl CheckKind {
    pub const ALL: [CheckKind; 9] = [
        CheckKind::CheckThm1,
        CheckKind::CheckCor1,
        CheckKind::CheckLemmaQq,
        CheckKind::CheckThm2,
        CheckKind::CheckThm3,
        CheckKind::Linearization,
        CheckKind::DisplacementDensity,
        CheckKind::CouplingIdentity,
        CheckKind::CounterexampleScan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::CheckThm1 => "check_thm1",
            CheckKind::CheckCor1 => "check_cor1",
            CheckKind::CheckLemmaQq => "check_lemma_qq",
            CheckKind::CheckThm2 => "check_thm2",
            CheckKind::CheckThm3 => "check_thm3",
            CheckKind::Linearization => "linearization",
            CheckKind::DisplacementDensity => "displacement_density",
            CheckKind::CouplingIdentity => "coupling_identity",
            CheckKind::CounterexampleScan => "counterexample_scan",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name).ok_or_else(|| {
            let valid: Vec<&str> = Self::ALL.iter().map(|k| k.name()).collect();
            Error::OutOfRange(format!("unknown check `{name}`; valid checks: {}", valid.join(", ")))
        })
    }

    /// Inequality, hypotheses and generator knobs.
    pub fn description(self) -> &'static str {
        match self {
            CheckKind::CheckThm1 => {
                "check_thm1: W2(mu, nu) <= 2 |nu - mu|_{H^-1(mu)}, the negative Sobolev norm weighted by mu itself.\n\
                 Holds for any positive measures of equal mass; the constant 2 is not claimed sharp.\n\
                 Hypotheses: equal masses, mu > 0 in every cell.\n\
                 lhs = W2 (quantile integration in 1-D, exact LP otherwise); rhs = 2 * weighted H^-1 norm.\n\
                 Families: bounded_random, smooth, identity. Knobs: rho_min, rho_max, base, amplitude, modes."
            }
            CheckKind::CheckCor1 => {
                "check_cor1: W2(mu, nu) <= 2 rho^{-1/2} |nu - mu|_{H^-1} with the unweighted norm.\n\
                 Hypothesis: mu >= rho in every cell; rho is taken as the minimum of mu.\n\
                 Families: bounded_random, smooth, identity."
            }
            CheckKind::CheckLemmaQq => {
                "check_lemma_qq: |sigma|_{H^-1(w')} <= rho^{-1/2} |sigma|_{H^-1(w)} whenever w' >= rho w.\n\
                 sigma = nu - mu, w = mu; rho is drawn from [1/4, 4]; every fifth seed uses w' = rho w (equality case),\n\
                 the others add a random bounded density on top. Tolerance 1e-8.\n\
                 Families: bounded_random, smooth."
            }
            CheckKind::CheckThm2 => {
                "check_thm2: |nu - mu|_{H^-1} <= 2 (sqrt(rho1) - sqrt(rho0)) / ln(rho1 / rho0) * W2(mu, nu) on a flat torus,\n\
                 prefactor sqrt(rho0) when rho0 = rho1.\n\
                 Hypotheses: torus domain (zero curvature), mu <= rho0, nu <= rho1; rho0, rho1 are the sup densities.\n\
                 Families: bounded_random, smooth, identity."
            }
            CheckKind::CheckThm3 => {
                "check_thm3: |nu - mu|_{H^-1} <= 2 sqrt(rho0) W2(mu, nu) on an interval.\n\
                 Hypothesis: mu <= rho0 only; nu is unrestricted.\n\
                 The concentrated family puts all or part of nu's mass in one cell, so sup nu grows like N.\n\
                 Families: concentrated, bounded_random, smooth."
            }
            CheckKind::Linearization => {
                "linearization: for nu = mu + eps sigma the ratio W2 / |eps sigma|_{H^-1(mu)} tends to 1 as eps -> 0.\n\
                 Per instance |ratio - 1| must strictly decrease along the eps list (largest first).\n\
                 Per sweep C = max over instances of |ratio - 1| / eps at the largest eps, and every |ratio - 1|\n\
                 must lie within 5 eps C.\n\
                 sigma is a smooth zero-mass field scaled to half of min mu. Knobs: eps list, family smooth.\n\
                 The discrete ratio carries an O(h^2) offset from 1, so the grid must be fine enough that\n\
                 h^2 stays well below 5 eps C at the smallest eps (about 1000 cells for eps = 1e-3)."
            }
            CheckKind::DisplacementDensity => {
                "displacement_density: along the displacement interpolation mu_t between mu and nu,\n\
                 sup mu_t <= rho0^{1-t} rho1^t and sup mu_t <= ((1-t) rho0^{-1/n} + t rho1^{-1/n})^{-n} (n = dimension),\n\
                 at t = k/16, with binning tolerance 10/N. Families: bumps (centers and widths drawn per seed)."
            }
            CheckKind::CouplingIdentity => {
                "coupling_identity: for an optimal coupling pi of (mu, nu), rho > 0 and mu' >= rho mu,\n\
                 cost(rho pi + diag(mu' - rho mu)) = rho cost(pi) and its first marginal is mu', both to 1e-12.\n\
                 Families: bounded_random, smooth, bumps."
            }
            CheckKind::CounterexampleScan => {
                "counterexample_scan: mu uniform on the unit 2-torus, nu a Dirac (all mass in one cell).\n\
                 W2 stays bounded (W2^2 -> 1/6) while |nu - mu|_{H^-1} diverges like sqrt(log N) under refinement,\n\
                 so no bound of the H^-1 norm by W2 can hold for all nu.\n\
                 Reports: strictly increasing H^-1 column, W2^2 within 5% of 1/6 at the finest grid,\n\
                 LP vs point-target formula agreement to 1e-10 where the LP runs. Knob: sizes."
            }
        }
    }
}

/// How the two measures of an instance are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    /// `nu = mu`, with `mu` i.i.d. uniform in `[rho_min, rho_max]`.
    Identity { rho_min: f64, rho_max: f64 },
    BoundedRandom { rho_min: f64, rho_max: f64 },
    Smooth { base: f64, amplitude: f64, modes: u32 },
    /// Bounded `mu`; `nu` puts all, 9/10 or half of its mass in one cell.
    Concentrated { rho_min: f64, rho_max: f64 },
    /// Raised-cosine bumps with random centers and widths.
    Bumps { width_min: f64, width_max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub check: CheckKind,
    pub domain: GridDomain,
    pub family: Family,
    pub seeds: Range<u64>,
    /// Perturbation sizes for `linearization`, largest first.
    pub eps: Vec<f64>,
    /// Grid sizes for `counterexample_scan`.
    pub sizes: Vec<usize>,
}

impl Sweep {
    pub fn new(check: CheckKind, domain: GridDomain, family: Family, seeds: Range<u64>) -> Self {
        Self {
            check,
            domain,
            family,
            seeds,
            eps: vec![1e-1, 1e-2, 1e-3],
            sizes: vec![8, 16, 32, 64],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceError {
    pub check_name: String,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SweepOutcome {
    pub reports: Vec<CheckReport>,
    pub errors: Vec<InstanceError>,
}

impl SweepOutcome {
    pub fn all_certified(&self) -> bool {
        self.errors.is_empty() && self.reports.iter().all(CheckReport::certified)
    }

    pub fn extend(&mut self, other: SweepOutcome) {
        self.reports.extend(other.reports);
        self.errors.extend(other.errors);
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn derived_seed(seed: u64, k: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k)
}

fn bump(d: &GridDomain, rng: &mut ChaCha8Rng, width_min: f64, width_max: f64, mass: f64) -> Result<Density> {
    let center: Vec<f64> = d.extents().iter().map(|&l| rng.random_range(0.25 * l..0.75 * l)).collect();
    let width = if width_max > width_min { rng.random_range(width_min..width_max) } else { width_min };
    make_measure(d, &Generator::Bump { center, width, mass })
}

/// The two measures of instance `seed` of `family`.
pub fn sample_pair(d: &GridDomain, family: &Family, seed: u64) -> Result<(Density, Density)> {
    let (s0, s1) = (derived_seed(seed, 0), derived_seed(seed, 1));
    match *family {
        Family::Identity { rho_min, rho_max } => {
            let mu = make_measure(d, &Generator::BoundedRandom { rho_min, rho_max, seed: s0 })?;
            Ok((mu.clone(), mu))
        }
        Family::BoundedRandom { rho_min, rho_max } => {
            let mu = make_measure(d, &Generator::BoundedRandom { rho_min, rho_max, seed: s0 })?;
            let nu = make_measure(d, &Generator::BoundedRandom { rho_min, rho_max, seed: s1 })?;
            let nu = nu.with_mass(mu.total_mass())?;
            Ok((mu, nu))
        }
        Family::Smooth { base, amplitude, modes } => {
            let mu = make_measure(d, &Generator::SmoothRandom { base, amplitude, modes, seed: s0 })?;
            let nu = make_measure(d, &Generator::SmoothRandom { base, amplitude, modes, seed: s1 })?;
            let nu = nu.with_mass(mu.total_mass())?;
            Ok((mu, nu))
        }
        Family::Concentrated { rho_min, rho_max } => {
            let mu = make_measure(d, &Generator::BoundedRandom { rho_min, rho_max, seed: s0 })?;
            let mass = mu.total_mass();
            let mut rng = rng_for(seed, 7);
            let cell = rng.random_range(0..d.cell_count());
            let share = [1.0, 0.9, 0.5][(seed % 3) as usize];
            let background = make_measure(d, &Generator::BoundedRandom { rho_min, rho_max, seed: s1 })?
                .with_mass((1.0 - share) * mass)?;
            let mut values = background.into_values();
            values[cell] += share * mass / d.cell_volume();
            let nu = Density::new(d.clone(), values)?.with_mass(mass)?;
            Ok((mu, nu))
        }
        Family::Bumps { width_min, width_max } => {
            let mut rng = rng_for(seed, 11);
            let mu = bump(d, &mut rng, width_min, width_max, 1.0)?;
            let nu = bump(d, &mut rng, width_min, width_max, 1.0)?;
            Ok((mu, nu))
        }
    }
}

fn spec(sweep: &Sweep, seed: u64, extra: Value) -> Value {
    let mut v = json!({
        "check": sweep.check,
        "domain": sweep.domain,
        "family": sweep.family,
        "seed": seed,
    });
    if let (Value::Object(base), Value::Object(more)) = (&mut v, extra) {
        base.extend(more);
    }
    v
}

fn relative_report(name: &str, lhs: f64, scale: f64, bound: f64) -> CheckReport {
    CheckReport::new(name, lhs, bound * scale.max(f64::MIN_POSITIVE), 0.0)
}

fn run_instance(sweep: &Sweep, seed: u64, opts: &CheckOptions) -> Result<Vec<CheckReport>> {
    let d = &sweep.domain;
    let s = |extra: Value| spec(sweep, seed, extra);
    match sweep.check {
        CheckKind::CheckThm1 => {
            let (mu, nu) = sample_pair(d, &sweep.family, seed)?;
            Ok(vec![check_thm1(&mu, &nu, opts)?.with_spec(s(json!({})))])
        }
        CheckKind::CheckCor1 => {
            let (mu, nu) = sample_pair(d, &sweep.family, seed)?;
            let rho = mu.inf_density();
            Ok(vec![check_cor1(&mu, &nu, rho, opts)?.with_spec(s(json!({ "rho": rho })))])
        }
        CheckKind::CheckLemmaQq => {
            let (mu, nu) = sample_pair(d, &sweep.family, seed)?;
            let sigma = nu.minus(&mu)?;
            let mut rng = rng_for(seed, 3);
            let rho: f64 = rng.random_range(0.25..4.0);
            let equality = seed.is_multiple_of(5);
            let w_prime = if equality {
                mu.scaled(rho)?
            } else {
                let extra = make_measure(d, &Generator::BoundedRandom { rho_min: 0.0, rho_max: 1.0, seed: derived_seed(seed, 2) })?;
                let values = mu.values().iter().zip(extra.values()).map(|(w, e)| rho * w + e).collect();
                Density::new(d.clone(), values)?
            };
            let opts = CheckOptions { tolerance: super::LEMMA_CHECK_TOL, ..*opts };
            let r = check_lemma_qq(&sigma, &mu, &w_prime, rho, &opts)?;
            Ok(vec![r.with_spec(s(json!({ "rho": rho, "equality_case": equality })))])
        }
        CheckKind::CheckThm2 => {
            let (mu, nu) = sample_pair(d, &sweep.family, seed)?;
            let (rho0, rho1) = (mu.sup_density(), nu.sup_density());
            let r = check_thm2(&mu, &nu, rho0, rho1, opts)?;
            Ok(vec![r.with_spec(s(json!({ "rho0": rho0, "rho1": rho1 })))])
        }
        CheckKind::CheckThm3 => {
            let (mu, nu) = sample_pair(d, &sweep.family, seed)?;
            let rho0 = mu.sup_density();
            let r = check_thm3(&mu, &nu, rho0, opts)?;
            Ok(vec![r.with_spec(s(json!({ "rho0": rho0, "sup_nu": nu.sup_density() })))])
        }
        CheckKind::Linearization => {
            let (mu, _) = sample_pair(d, &sweep.family, seed)?;
            let modes = match sweep.family {
                Family::Smooth { modes, .. } => modes,
                _ => 3,
            };
            let sigma = smooth_signed(d, modes, derived_seed(seed, 5)).scaled(0.5 * mu.inf_density());
            let points = linearization_ratios(&mu, &sigma, &sweep.eps, opts)?;
            let ratios: Vec<f64> = points.iter().map(|p| p.ratio).collect();
            Ok(points
                .windows(2)
                .map(|w| {
                    CheckReport::new("linearization", (w[1].ratio - 1.0).abs(), (w[0].ratio - 1.0).abs(), 0.0).with_spec(s(json!({
                        "part": "monotone",
                        "eps": w[1].eps,
                        "previous_eps": w[0].eps,
                        "ratios": ratios,
                    })))
                })
                .collect())
        }
        CheckKind::DisplacementDensity => {
            let (mu, nu) = sample_pair(d, &sweep.family, seed)?;
            let (rho0, rho1) = (mu.sup_density(), nu.sup_density());
            let path = displacement_path(&mu, &nu, &default_times())?;
            let tol = 10.0 / *d.cells_per_dim().iter().min().unwrap_or(&1) as f64;
            let n = d.dims() as u32;
            let mut out = Vec::new();
            for sample in &path.samples {
                let sup = sample.density.sup_density();
                let t = sample.t;
                out.push(
                    CheckReport::new("displacement_density", sup, geometric_density_bound(t, rho0, rho1), tol)
                        .with_spec(s(json!({ "t": t, "bound": "geometric", "rho0": rho0, "rho1": rho1 }))),
                );
                out.push(
                    CheckReport::new("displacement_density", sup, refined_density_bound(n, t, rho0, rho1)?, tol)
                        .with_spec(s(json!({ "t": t, "bound": "refined", "n": n, "rho0": rho0, "rho1": rho1 }))),
                );
            }
            Ok(out)
        }
        CheckKind::CouplingIdentity => {
            let (mu, nu) = sample_pair(d, &sweep.family, seed)?;
            let pi = w2_exact_capped(&mu, &nu, opts.lp_cap)?.coupling;
            let mut rng = rng_for(seed, 13);
            let rho: f64 = rng.random_range(0.2..5.0);
            let extra = make_measure(d, &Generator::BoundedRandom { rho_min: 0.0, rho_max: 1.0, seed: derived_seed(seed, 3) })?;
            let values = mu.values().iter().zip(extra.values()).map(|(w, e)| rho * w + e).collect();
            let mu_prime = Density::new(d.clone(), values)?;
            let moved = lemma_coupling_transform(&pi, &mu_prime, rho)?;
            let (c0, c1) = (coupling_cost(&pi), coupling_cost(&moved));
            let marginal_err = moved
                .row_marginal()
                .iter()
                .zip(mu_prime.cell_masses())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            Ok(vec![
                relative_report("coupling_identity", (c1 - rho * c0).abs(), rho * c0, 1e-12)
                    .with_spec(s(json!({ "part": "cost", "rho": rho, "cost": c0 }))),
                relative_report("coupling_identity", marginal_err, mu_prime.total_mass(), 1e-12)
                    .with_spec(s(json!({ "part": "marginal", "rho": rho }))),
            ])
        }
        CheckKind::CounterexampleScan => {
            let rows = counterexample_scan(&sweep.sizes, opts)?;
            let mut out = Vec::new();
            for w in rows.windows(2) {
                // Negative slack: the finer norm must exceed the coarser one by a relative 1e-9.
                out.push(
                    CheckReport::new("counterexample_scan", w[0].hminus1, w[1].hminus1, -1e-9)
                        .with_spec(s(json!({ "part": "increasing", "n": w[0].n, "next_n": w[1].n }))),
                );
            }
            if let Some(last) = rows.last() {
                let target = 1.0 / 6.0;
                out.push(
                    CheckReport::new("counterexample_scan", (last.w2_squared - target).abs(), 0.05 * target, 0.0)
                        .with_spec(s(json!({ "part": "w2_squared", "n": last.n, "w2_squared": last.w2_squared }))),
                );
            }
            for r in &rows {
                if let Some(gap) = r.lp_analytic_gap {
                    out.push(
                        CheckReport::new("counterexample_scan", gap, 1e-10, 0.0)
                            .with_spec(s(json!({ "part": "lp_vs_point_formula", "n": r.n }))),
                    );
                }
            }
            Ok(out)
        }
    }
}

/// Family-wide band `|ratio - 1| <= 5 eps C` with `C` the largest
/// `|ratio - 1| / eps` at the first `eps` over the sweep.
fn linearization_band(sweep: &Sweep, reports: &[CheckReport]) -> Vec<CheckReport> {
    let Some(&eps0) = sweep.eps.first() else {
        return Vec::new();
    };
    let mut per_seed: Vec<(u64, Vec<f64>)> = Vec::new();
    for r in reports {
        let seed = r.instance_spec["seed"].as_u64().unwrap_or_default();
        if per_seed.last().map(|p| p.0) != Some(seed) {
            let ratios = r.instance_spec["ratios"]
                .as_array()
                .map(|a| a.iter().filter_map(Value::as_f64).collect())
                .unwrap_or_default();
            per_seed.push((seed, ratios));
        }
    }
    let c = per_seed
        .iter()
        .filter_map(|(_, r)| r.first())
        .map(|r| (r - 1.0).abs() / eps0)
        .fold(0.0f64, f64::max);
    let mut out = Vec::new();
    for (seed, ratios) in &per_seed {
        for (&eps, &ratio) in sweep.eps.iter().zip(ratios) {
            out.push(
                CheckReport::new("linearization", (ratio - 1.0).abs(), 5.0 * eps * c, 0.0).with_spec(spec(
                    sweep,
                    *seed,
                    json!({ "part": "band", "eps": eps, "ratio": ratio, "family_constant": c }),
                )),
            );
        }
    }
    out
}

/// Runs every seed of `sweep`; the result lists reports in seed order.
pub fn run_sweep(sweep: &Sweep, opts: &CheckOptions, exec: Execution) -> SweepOutcome {
    let seeds: Vec<u64> = if sweep.check == CheckKind::CounterexampleScan {
        sweep.seeds.clone().take(1).collect()
    } else {
        sweep.seeds.clone().collect()
    };
    let results = exec.map(&seeds, |&seed| (seed, run_instance(sweep, seed, opts)));
    let mut outcome = SweepOutcome::default();
    for (seed, r) in results {
        match r {
            Ok(reports) => outcome.reports.extend(reports),
            Err(e) => outcome.errors.push(InstanceError {
                check_name: sweep.check.name().into(),
                seed,
                message: e.to_string(),
            }),
        }
    }
    if sweep.check == CheckKind::Linearization {
        let band = linearization_band(sweep, &outcome.reports);
        outcome.reports.extend(band);
    }
    outcome
}
