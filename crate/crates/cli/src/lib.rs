//! Batch runner for the inequality checks of `sobolev-w2`.
//!
//! [`run`] executes a validated [`config::Plan`] and writes
//!
//! - `reports.jsonl`: one check report per line, sorted by check and seed,
//! - `aggregate.csv`: `check_name,n_pass,n_fail,worst_ratio`,
//! - plot tables (`counterexample_scan.csv`, `linearization.csv`,
//!   `displacement_density.csv`) for the checks that were run.

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sobolev_w2::bounds::harness::{run_sweep, CheckKind, SweepOutcome};
use sobolev_w2::bounds::{counterexample_scan, CheckReport};
use sobolev_w2::par::with_jobs;
use sobolev_w2::Execution;

use config::Plan;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        2
    }
}

/// Outcome of a run; `failures` lists every failing instance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub reports: usize,
    pub failures: Vec<String>,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            0
        } else {
            1
        }
    }
}

/// Inequality, hypotheses and knobs of the named check.
pub fn describe(name: &str) -> Result<&'static str, CliError> {
    CheckKind::from_name(name)
        .map(CheckKind::description)
        .map_err(|e| CliError::Config(e.to_string()))
}

fn seed_of(r: &CheckReport) -> u64 {
    r.instance_spec["seed"].as_u64().unwrap_or_default()
}

fn number(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else if x > 0.0 {
        "inf".into()
    } else {
        "nan".into()
    }
}

fn write(dir: &Path, name: &str, body: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| CliError::Output {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn aggregate(outcome: &SweepOutcome) -> String {
    let mut names: Vec<&str> = outcome
        .reports
        .iter()
        .map(|r| r.check_name.as_str())
        .chain(outcome.errors.iter().map(|e| e.check_name.as_str()))
        .collect();
    names.sort_unstable();
    names.dedup();
    let mut csv = String::from("check_name,n_pass,n_fail,worst_ratio\n");
    for name in names {
        let reports: Vec<&CheckReport> = outcome.reports.iter().filter(|r| r.check_name == name).collect();
        let pass = reports.iter().filter(|r| r.certified()).count();
        let fail = reports.len() - pass + outcome.errors.iter().filter(|e| e.check_name == name).count();
        let worst = reports.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
        let worst = if reports.is_empty() { String::new() } else { number(worst) };
        let _ = writeln!(csv, "{name},{pass},{fail},{worst}");
    }
    csv
}

fn linearization_table(outcome: &SweepOutcome) -> String {
    let mut csv = String::from("seed,eps,ratio\n");
    for r in outcome.reports.iter().filter(|r| r.check_name == "linearization" && r.instance_spec["part"] == "band") {
        let s = &r.instance_spec;
        let _ = writeln!(
            csv,
            "{},{},{}",
            seed_of(r),
            number(s["eps"].as_f64().unwrap_or(f64::NAN)),
            number(s["ratio"].as_f64().unwrap_or(f64::NAN))
        );
    }
    csv
}

fn displacement_table(outcome: &SweepOutcome) -> String {
    let mut csv = String::from("seed,t,bound,sup_density,bound_value\n");
    for r in outcome.reports.iter().filter(|r| r.check_name == "displacement_density") {
        let s = &r.instance_spec;
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            seed_of(r),
            number(s["t"].as_f64().unwrap_or(f64::NAN)),
            s["bound"].as_str().unwrap_or(""),
            number(r.lhs),
            number(r.rhs)
        );
    }
    csv
}

/// Executes every sweep of `plan` and writes the output files.
pub fn run(plan: &Plan) -> Result<RunSummary, CliError> {
    let exec = if plan.jobs == 1 { Execution::Sequential } else { Execution::Parallel };
    let mut outcome = SweepOutcome::default();
    let mut scan_csv = None;
    with_jobs(plan.jobs, || -> Result<(), CliError> {
        for sweep in &plan.sweeps {
            outcome.extend(run_sweep(sweep, &plan.options, exec));
            if sweep.check == CheckKind::CounterexampleScan && scan_csv.is_none() {
                let rows = counterexample_scan(&sweep.sizes, &plan.options).map_err(|e| CliError::Config(e.to_string()))?;
                let mut csv = String::from("n,w2,w2_squared,hminus1,route\n");
                for r in rows {
                    let route = serde_json::to_value(r.route).unwrap_or_default();
                    let _ = writeln!(
                        csv,
                        "{},{},{},{},{}",
                        r.n,
                        number(r.w2),
                        number(r.w2_squared),
                        number(r.hminus1),
                        route.as_str().unwrap_or("")
                    );
                }
                scan_csv = Some(csv);
            }
        }
        Ok(())
    })?;
    outcome.reports.sort_by(|a, b| a.check_name.cmp(&b.check_name).then(seed_of(a).cmp(&seed_of(b))));
    outcome.errors.sort_by(|a, b| a.check_name.cmp(&b.check_name).then(a.seed.cmp(&b.seed)));

    fs::create_dir_all(&plan.out_dir).map_err(|e| CliError::Output {
        path: plan.out_dir.display().to_string(),
        message: e.to_string(),
    })?;
    let mut lines = String::new();
    for r in &outcome.reports {
        lines.push_str(&r.to_json());
        lines.push('\n');
    }
    write(&plan.out_dir, "reports.jsonl", &lines)?;
    write(&plan.out_dir, "aggregate.csv", &aggregate(&outcome))?;
    if let Some(csv) = scan_csv {
        write(&plan.out_dir, "counterexample_scan.csv", &csv)?;
    }
    if plan.sweeps.iter().any(|s| s.check == CheckKind::Linearization) {
        write(&plan.out_dir, "linearization.csv", &linearization_table(&outcome))?;
    }
    if plan.sweeps.iter().any(|s| s.check == CheckKind::DisplacementDensity) {
        write(&plan.out_dir, "displacement_density.csv", &displacement_table(&outcome))?;
    }

    let mut failures = Vec::new();
    for r in outcome.reports.iter().filter(|r| !r.certified()) {
        let why = if r.passed { "cross-check disagreement" } else { "inequality violated" };
        failures.push(format!(
            "{} seed {}: {why}: lhs {} rhs {} ratio {} spec {}",
            r.check_name,
            seed_of(r),
            number(r.lhs),
            number(r.rhs),
            number(r.ratio),
            r.instance_spec
        ));
    }
    for e in &outcome.errors {
        failures.push(format!("{} seed {}: error: {}", e.check_name, e.seed, e.message));
    }
    Ok(RunSummary {
        reports: outcome.reports.len(),
        failures,
    })
}
