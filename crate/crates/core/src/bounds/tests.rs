use approx::assert_relative_eq;

use super::harness::{run_sweep, sample_pair, CheckKind, Family, Sweep};
use super::*;
use crate::grid::smooth_signed;
use crate::par::Execution;

fn random_pair(d: &GridDomain, seed: u64) -> (Density, Density) {
    sample_pair(d, &Family::BoundedRandom { rho_min: 1.0, rho_max: 4.0 }, seed).unwrap()
}

#[test]
fn report_predicate() {
    let r = CheckReport::new("x", 1.0, 1.0, 0.0);
    assert!(r.passed);
    assert_eq!(r.ratio, 1.0);
    assert!(!CheckReport::new("x", 1.0 + 1e-6, 1.0, 1e-7).passed);
    assert!(CheckReport::new("x", 1.0 + 1e-6, 1.0, 1e-5).passed);
    let zero = CheckReport::new("x", 0.0, 0.0, 0.0);
    assert!(zero.passed);
    assert_eq!(zero.ratio, 0.0);
    let v: Value = serde_json::from_str(&zero.to_json()).unwrap();
    for key in ["check_name", "instance_spec", "lhs", "rhs", "ratio", "tolerance", "passed"] {
        assert!(v.get(key).is_some(), "{key}");
    }
}

#[test]
fn identical_measures_give_zero_sides() {
    let opts = CheckOptions::default();
    for d in [GridDomain::interval(32, 1.0).unwrap(), GridDomain::unit_torus(2, 6).unwrap()] {
        let (mu, _) = random_pair(&d, 1);
        let r = check_thm1(&mu, &mu, &opts).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        assert!(r.passed);
    }
    let t = GridDomain::unit_torus(1, 32).unwrap();
    let (mu, _) = random_pair(&t, 2);
    let r = check_thm2(&mu, &mu, mu.sup_density(), mu.sup_density(), &opts).unwrap();
    assert!(r.passed && r.lhs == 0.0);
    let i = GridDomain::interval(32, 1.0).unwrap();
    let (mu, _) = random_pair(&i, 3);
    let r = check_thm3(&mu, &mu, mu.sup_density(), &opts).unwrap();
    assert!(r.passed && r.lhs == 0.0);
}

#[test]
fn uniform_weight_matches_lower_bound_form() {
    let d = GridDomain::interval(64, 1.0).unwrap();
    let opts = CheckOptions::default();
    let rho = 2.5;
    let mu = Density::uniform(d.clone(), rho).unwrap();
    let (_, nu) = random_pair(&d, 4);
    let nu = nu.with_mass(mu.total_mass()).unwrap();
    let a = check_thm1(&mu, &nu, &opts).unwrap();
    let b = check_cor1(&mu, &nu, rho, &opts).unwrap();
    assert_relative_eq!(a.rhs, b.rhs, max_relative = 1e-9);
    assert_eq!(a.lhs, b.lhs);
}

#[test]
fn lower_bound_form_is_weaker_and_scales() {
    let d = GridDomain::interval(64, 1.0).unwrap();
    let opts = CheckOptions::default();
    let rho = 0.7;
    for seed in 0..5 {
        let (mu, nu) = sample_pair(&d, &Family::BoundedRandom { rho_min: rho, rho_max: 2.0 * rho }, seed).unwrap();
        let a = check_thm1(&mu, &nu, &opts).unwrap();
        let b = check_cor1(&mu, &nu, rho, &opts).unwrap();
        assert!(a.passed && b.passed);
        assert!(b.rhs >= a.rhs * (1.0 - 1e-9));
        let lifted = mu.scaled(2.0).unwrap();
        let nu2 = nu.scaled(2.0).unwrap();
        let c1 = check_cor1(&lifted, &nu2, rho, &opts).unwrap();
        let c2 = check_cor1(&lifted, &nu2, 2.0 * rho, &opts).unwrap();
        assert_relative_eq!(c2.rhs, c1.rhs / 2f64.sqrt(), max_relative = 1e-12);
    }
    let (mu, nu) = random_pair(&d, 9);
    assert!(matches!(check_cor1(&mu, &nu, 1.5, &opts), Err(Error::HypothesisViolated(_))));
}

#[test]
fn domination_examples() {
    let d = GridDomain::unit_torus(2, 8).unwrap();
    let opts = CheckOptions::default().with_tolerance(LEMMA_CHECK_TOL);
    let (w, nu) = random_pair(&d, 5);
    let sigma = nu.minus(&w).unwrap();
    let same = check_lemma_qq(&sigma, &w, &w, 1.0, &opts).unwrap();
    assert_relative_eq!(same.lhs, same.rhs, max_relative = 1e-14);
    let scaled = check_lemma_qq(&sigma, &w, &w.scaled(3.0).unwrap(), 3.0, &opts).unwrap();
    assert_relative_eq!(scaled.lhs, scaled.rhs, max_relative = 1e-10);
    let bumped = Density::new(d.clone(), w.values().iter().map(|v| 3.0 * v + 0.5).collect()).unwrap();
    let strict = check_lemma_qq(&sigma, &w, &bumped, 3.0, &opts).unwrap();
    assert!(strict.lhs < strict.rhs * (1.0 - 1e-6));
    assert!(matches!(
        check_lemma_qq(&sigma, &w, &w, 1.1, &opts),
        Err(Error::DominationViolated { .. })
    ));
}

#[test]
#[allow(clippy::approx_constant)]
fn prefactor_examples() {
    assert_eq!(thm2_prefactor(1.0, 1.0).unwrap(), 1.0);
    assert_relative_eq!(thm2_prefactor(1.0, 4.0).unwrap(), 2.0 / 4f64.ln(), max_relative = 1e-14);
    assert_relative_eq!(thm2_prefactor(1.0, 4.0).unwrap(), 1.442695, max_relative = 1e-6);
    assert_eq!(thm2_prefactor(3.0, 0.2).unwrap(), thm2_prefactor(0.2, 3.0).unwrap());
    assert!(thm2_prefactor(0.0, 1.0).is_err());
    assert!(thm2_prefactor(1.0, -1.0).is_err());
}

#[test]
fn prefactor_is_log_mean_of_square_roots() {
    for a in -30..=30 {
        for b in -30..=30 {
            let r0 = 1.3f64.powi(a);
            let r1 = 1.3f64.powi(b);
            let p = thm2_prefactor(r0, r1).unwrap();
            let (lo, hi) = (r0.sqrt().min(r1.sqrt()), r0.sqrt().max(r1.sqrt()));
            assert!(p >= lo * (1.0 - 1e-15) && p <= hi * (1.0 + 1e-15), "{r0} {r1} {p}");
            if a != b {
                let direct = 2.0 * (r1.sqrt() - r0.sqrt()) / (r1 / r0).ln();
                assert_relative_eq!(p, direct, max_relative = 1e-12);
            }
        }
    }
}

#[test]
fn prefactor_continuous_across_branch() {
    for r1 in [1.0 - 1e-7, 1.0 + 1e-7, 1.0 - 1e-6, 1.0 + 1e-6, 1.0 - 1.01e-6, 1.0 + 1.01e-6] {
        let p = thm2_prefactor(1.0, r1).unwrap();
        assert!((p - 1.0).abs() < 1e-6, "{r1}");
        assert!((p - r1.sqrt()).abs() <= (1.0 - r1.sqrt()).abs());
    }
    for r1 in [1.0 - 1e-7, 1.0 + 1e-7] {
        assert!((thm2_prefactor(1.0, r1).unwrap() - 1.0).abs() < 1e-7);
    }
    let below = thm2_prefactor(1.0, (0.999_999_9e-6f64).exp()).unwrap();
    let above = thm2_prefactor(1.0, (1.000_000_1e-6f64).exp()).unwrap();
    assert!((above - below).abs() < 1e-12);
}

#[test]
fn refined_prefactor_is_sharper() {
    for (r0, r1) in [(1.0, 4.0), (0.5, 2.0), (3.0, 1.0)] {
        let geometric = thm2_prefactor(r0, r1).unwrap();
        for n in 1..=3 {
            let refined = integrated_refined_prefactor(n, r0, r1).unwrap();
            assert!(refined <= geometric * (1.0 + 1e-12));
            assert!(refined >= f64::min(r0, r1).sqrt());
        }
    }
    assert_relative_eq!(integrated_refined_prefactor(2, 2.0, 2.0).unwrap(), 2f64.sqrt(), max_relative = 1e-12);
}

#[test]
fn thm2_hypotheses() {
    let opts = CheckOptions::default();
    let i = GridDomain::interval(16, 1.0).unwrap();
    let (mu, nu) = random_pair(&i, 1);
    assert!(matches!(check_thm2(&mu, &nu, 4.0, 4.0, &opts), Err(Error::WrongDomainType { .. })));
    let t = GridDomain::unit_torus(1, 16).unwrap();
    let (mu, nu) = random_pair(&t, 1);
    assert!(matches!(check_thm2(&mu, &nu, 1.0, 4.0, &opts), Err(Error::HypothesisViolated(_))));
    assert!(check_thm2(&mu, &nu, mu.sup_density(), nu.sup_density(), &opts).unwrap().passed);
    assert!(matches!(check_thm3(&mu, &nu, 4.0, &opts), Err(Error::WrongDomainType { .. })));
}

#[test]
fn interval_dirac_refinement_stays_bounded() {
    let opts = CheckOptions::default();
    let limit = (1.0f64 / 12.0).sqrt();
    let mut prev_gap = f64::INFINITY;
    for n in [32usize, 64, 128, 256, 512, 1024] {
        let d = GridDomain::interval(n, 1.0).unwrap();
        let mu = Density::uniform(d.clone(), 1.0).unwrap();
        let nu = make_measure(&d, &Generator::DiracLike { cell: n / 2, mass: 1.0 }).unwrap();
        let r = check_thm3(&mu, &nu, 1.0, &opts).unwrap();
        assert!(r.passed, "N = {n}: {r:?}");
        assert!(nu.sup_density() == n as f64);
        let gap = (r.lhs - limit).abs();
        assert!(gap < prev_gap, "N = {n}: {} vs {limit}", r.lhs);
        prev_gap = gap;
    }
}

#[test]
fn cross_checks_agree() {
    let opts = CheckOptions::default().cross_checked();
    for d in [
        GridDomain::interval(24, 1.0).unwrap(),
        GridDomain::unit_torus(1, 24).unwrap(),
        GridDomain::unit_torus(2, 6).unwrap(),
    ] {
        let (mu, nu) = random_pair(&d, 3);
        let r = check_thm1(&mu, &nu, &opts).unwrap();
        assert_eq!(r.cross_checks.len(), 2);
        assert!(r.certified(), "{r:?}");
    }
}

#[test]
fn scan_rows() {
    let rows = counterexample_scan(&[4, 8, 16], &CheckOptions::default()).unwrap();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert!(r.lp_analytic_gap.unwrap() <= 1e-10);
    }
    assert!(rows.windows(2).all(|w| w[1].hminus1 > w[0].hminus1));
    let capped = counterexample_scan(&[40], &CheckOptions { lp_cap: 1024, ..Default::default() }).unwrap();
    assert_eq!(capped[0].route, TransportRoute::Analytic);
}

#[test]
fn linearization_ratio_tends_to_one() {
    let d = GridDomain::interval(256, 1.0).unwrap();
    let mu = make_measure(&d, &Generator::SmoothRandom { base: 1.0, amplitude: 0.5, modes: 3, seed: 1 }).unwrap();
    let sigma = smooth_signed(&d, 3, 2).scaled(0.25);
    let pts = linearization_ratios(&mu, &sigma, &[1e-1, 1e-2, 1e-3], &CheckOptions::default()).unwrap();
    assert!((pts[2].ratio - 1.0).abs() < 1e-3);
}

#[test]
fn sweep_order_and_execution_modes_agree() {
    let sweep = Sweep::new(
        CheckKind::CheckThm1,
        GridDomain::interval(32, 1.0).unwrap(),
        Family::BoundedRandom { rho_min: 1.0, rho_max: 4.0 },
        0..12,
    );
    let opts = CheckOptions::default();
    let a = run_sweep(&sweep, &opts, Execution::Sequential);
    let b = run_sweep(&sweep, &opts, Execution::Parallel);
    assert_eq!(a, b);
    assert!(a.all_certified());
    let seeds: Vec<u64> = a.reports.iter().map(|r| r.instance_spec["seed"].as_u64().unwrap()).collect();
    assert_eq!(seeds, (0..12).collect::<Vec<_>>());
}

#[test]
fn every_check_kind_runs() {
    let opts = CheckOptions::default().cross_checked();
    let interval = GridDomain::interval(32, 1.0).unwrap();
    let circle = GridDomain::unit_torus(1, 32).unwrap();
    let br = Family::BoundedRandom { rho_min: 1.0, rho_max: 3.0 };
    let cases = [
        (CheckKind::CheckThm1, interval.clone(), br.clone()),
        (CheckKind::CheckCor1, interval.clone(), br.clone()),
        (CheckKind::CheckLemmaQq, interval.clone(), br.clone()),
        (CheckKind::CheckThm2, circle.clone(), br.clone()),
        (CheckKind::CheckThm3, interval.clone(), Family::Concentrated { rho_min: 1.0, rho_max: 3.0 }),
        (CheckKind::Linearization, interval.clone(), Family::Smooth { base: 1.0, amplitude: 0.5, modes: 3 }),
        (CheckKind::DisplacementDensity, GridDomain::interval(128, 1.0).unwrap(), Family::Bumps { width_min: 0.08, width_max: 0.2 }),
        (CheckKind::CouplingIdentity, interval.clone(), br.clone()),
        (CheckKind::CounterexampleScan, GridDomain::unit_torus(2, 8).unwrap(), br),
    ];
    for (check, d, family) in cases {
        let mut sweep = Sweep::new(check, d, family, 0..3);
        sweep.sizes = vec![4, 8, 16];
        let out = run_sweep(&sweep, &opts, Execution::Parallel);
        assert!(out.errors.is_empty(), "{check:?}: {:?}", out.errors);
        assert!(!out.reports.is_empty(), "{check:?}");
        assert!(out.reports.iter().all(|r| r.check_name == check.name()));
    }
    assert_eq!(CheckKind::from_name("check_thm2").unwrap(), CheckKind::CheckThm2);
    let err = CheckKind::from_name("nope").unwrap_err().to_string();
    assert!(err.contains("check_thm1") && err.contains("counterexample_scan"));
}
