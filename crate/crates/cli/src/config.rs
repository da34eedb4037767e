//! Experiment configuration (TOML).

use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sobolev_w2::bounds::harness::{CheckKind, Family, Sweep};
use sobolev_w2::bounds::CheckOptions;
use sobolev_w2::sobolev::DEFAULT_TOL;
use sobolev_w2::wasserstein::DEFAULT_LP_CAP;
use sobolev_w2::GridDomain;

use crate::CliError;

fn default_out_dir() -> PathBuf {
    PathBuf::from("results")
}

fn default_tolerance() -> f64 {
    sobolev_w2::bounds::DEFAULT_CHECK_TOL
}

fn default_solver_tol() -> f64 {
    DEFAULT_TOL
}

fn default_lp_cap() -> usize {
    DEFAULT_LP_CAP
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Relative to the directory holding the config file.
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_solver_tol")]
    pub solver_tol: f64,
    #[serde(default = "default_lp_cap")]
    pub lp_cap: usize,
    #[serde(default = "default_true")]
    pub cross_check: bool,
    /// Domain for sweeps that do not set their own.
    pub domain: Option<GridDomain>,
    #[serde(default, rename = "sweep")]
    pub sweeps: Vec<SweepConfig>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub check: String,
    /// Half-open `[first, end)`.
    pub seeds: [u64; 2],
    pub family: Option<Family>,
    pub domain: Option<GridDomain>,
    pub eps: Option<Vec<f64>>,
    pub sizes: Option<Vec<usize>>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub tolerance: Option<f64>,
    pub seed_range: Option<Range<u64>>,
    pub out_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
}

/// A validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub sweeps: Vec<Sweep>,
    pub options: CheckOptions,
    pub out_dir: PathBuf,
    pub jobs: usize,
}

/// `A..B` with `A < B`.
pub fn parse_seed_range(s: &str) -> Result<Range<u64>, String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected START..END, got `{s}`"))?;
    let a: u64 = a.trim().parse().map_err(|e| format!("bad range start `{a}`: {e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("bad range end `{b}`: {e}"))?;
    if a >= b {
        return Err(format!("seed range {a}..{b} is empty"));
    }
    Ok(a..b)
}

fn uses_lp(check: CheckKind, d: &GridDomain) -> bool {
    match check {
        CheckKind::CouplingIdentity => true,
        CheckKind::CheckThm1 | CheckKind::CheckCor1 | CheckKind::CheckThm2 | CheckKind::DisplacementDensity => d.dims() > 1,
        _ => false,
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Checks every invariant and applies `overrides`; relative output
    /// paths resolve against `base`.
    pub fn validate(&self, overrides: &Overrides, base: &Path) -> Result<Plan, CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let tolerance = overrides.tolerance.unwrap_or(self.tolerance);
        if !(tolerance.is_finite() && tolerance >= 0.0) {
            return bad(format!("tolerance must be finite and nonnegative, got {tolerance}"));
        }
        if !(self.solver_tol > 0.0 && self.solver_tol < 1.0) {
            return bad(format!("solver_tol must lie in (0, 1), got {}", self.solver_tol));
        }
        if self.lp_cap == 0 {
            return bad("lp_cap must be positive".into());
        }
        let mut sweeps = Vec::new();
        for (k, s) in self.sweeps.iter().enumerate() {
            let at = format!("sweep {} ({})", k + 1, s.check);
            let check = CheckKind::from_name(&s.check).map_err(|e| CliError::Config(format!("sweep {}: {e}", k + 1)))?;
            let seeds = match &overrides.seed_range {
                Some(r) => r.clone(),
                None => s.seeds[0]..s.seeds[1],
            };
            if seeds.is_empty() {
                return bad(format!("{at}: seed range {}..{} is empty", seeds.start, seeds.end));
            }
            let sizes = s.sizes.clone().unwrap_or_else(|| vec![8, 16, 32, 64]);
            let (domain, family) = if check == CheckKind::CounterexampleScan {
                if sizes.is_empty() || sizes.iter().any(|&n| n < 2) {
                    return bad(format!("{at}: sizes must be a nonempty list of grid sizes >= 2"));
                }
                let n = *sizes.iter().max().unwrap_or(&2);
                let family = Family::Identity { rho_min: 1.0, rho_max: 1.0 };
                (GridDomain::unit_torus(2, n).map_err(|e| CliError::Config(e.to_string()))?, family)
            } else {
                let Some(domain) = s.domain.clone().or_else(|| self.domain.clone()) else {
                    return bad(format!("{at}: no domain given (set [domain] or [sweep.domain])"));
                };
                let Some(family) = s.family.clone() else {
                    return bad(format!("{at}: no family given"));
                };
                (domain, family)
            };
            match check {
                CheckKind::CheckThm2 if !domain.is_torus() => return bad(format!("{at}: needs a torus domain")),
                CheckKind::CheckThm3 if domain.is_torus() || domain.dims() != 1 => {
                    return bad(format!("{at}: needs a one-dimensional interval domain"))
                }
                _ => {}
            }
            if uses_lp(check, &domain) && domain.cell_count() > self.lp_cap {
                return bad(format!(
                    "{at}: {} cells exceed the exact transport cap lp_cap = {}",
                    domain.cell_count(),
                    self.lp_cap
                ));
            }
            let eps = s.eps.clone().unwrap_or_else(|| vec![1e-1, 1e-2, 1e-3]);
            if check == CheckKind::Linearization
                && (eps.len() < 2 || eps.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) || eps.windows(2).any(|w| w[1] >= w[0]))
            {
                return bad(format!("{at}: eps needs at least two strictly decreasing values in (0, 1]"));
            }
            let mut sweep = Sweep::new(check, domain, family, seeds);
            sweep.eps = eps;
            sweep.sizes = sizes;
            sweeps.push(sweep);
        }
        let out_dir = overrides.out_dir.clone().unwrap_or_else(|| base.join(&self.out_dir));
        Ok(Plan {
            sweeps,
            options: CheckOptions {
                tolerance,
                solver_tol: self.solver_tol,
                lp_cap: self.lp_cap,
                cross_check: self.cross_check,
            },
            out_dir,
            jobs: overrides.jobs.unwrap_or(0),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
        [domain]
        dims = 1
        cells = [32]
        extents = [1.0]
        boundary = "interval"
    "#;

    fn plan(extra: &str) -> Result<Plan, CliError> {
        ExperimentConfig::parse(&format!("{BASE}\n{extra}"))?.validate(&Overrides::default(), Path::new("/tmp"))
    }

    #[test]
    fn defaults_and_overrides() {
        let cfg = ExperimentConfig::parse(BASE).unwrap();
        let p = cfg.validate(&Overrides::default(), Path::new("/x")).unwrap();
        assert!(p.sweeps.is_empty());
        assert_eq!(p.out_dir, PathBuf::from("/x/results"));
        assert_eq!(p.options.tolerance, 1e-6);
        let o = Overrides {
            tolerance: Some(1e-3),
            seed_range: Some(5..7),
            out_dir: Some("/elsewhere".into()),
            jobs: Some(2),
        };
        let cfg = ExperimentConfig::parse(&format!(
            "{BASE}\n[[sweep]]\ncheck = \"check_thm1\"\nseeds = [0, 100]\nfamily = {{ kind = \"bounded_random\", rho_min = 1.0, rho_max = 2.0 }}"
        ))
        .unwrap();
        let p = cfg.validate(&o, Path::new("/x")).unwrap();
        assert_eq!(p.sweeps[0].seeds, 5..7);
        assert_eq!(p.options.tolerance, 1e-3);
        assert_eq!(p.out_dir, PathBuf::from("/elsewhere"));
        assert_eq!(p.jobs, 2);
    }

    #[test]
    fn rejects_invalid_configs() {
        let fam = "family = { kind = \"bounded_random\", rho_min = 1.0, rho_max = 2.0 }";
        for (extra, needle) in [
            (format!("[[sweep]]\ncheck = \"nope\"\nseeds = [0, 1]\n{fam}"), "valid checks"),
            (format!("[[sweep]]\ncheck = \"check_thm1\"\nseeds = [3, 3]\n{fam}"), "empty"),
            (format!("[[sweep]]\ncheck = \"check_thm2\"\nseeds = [0, 1]\n{fam}"), "torus"),
            ("[[sweep]]\ncheck = \"check_thm1\"\nseeds = [0, 1]".to_string(), "family"),
            (
                format!("[[sweep]]\ncheck = \"check_thm1\"\nseeds = [0, 1]\n{fam}\n[sweep.domain]\ndims = 2\ncells = [40, 40]\nextents = [1.0, 1.0]\nboundary = \"torus\""),
                "lp_cap",
            ),
            (format!("[[sweep]]\ncheck = \"linearization\"\nseeds = [0, 1]\neps = [0.01, 0.1]\n{fam}"), "eps"),
        ] {
            let err = plan(&extra).unwrap_err().to_string();
            assert!(err.contains(needle), "{extra}: {err}");
        }
        for (top, needle) in [("tolerance = -1.0", "tolerance"), ("bogus = 1", "bogus")] {
            let err = ExperimentConfig::parse(&format!("{top}\n{BASE}"))
                .and_then(|c| c.validate(&Overrides::default(), Path::new("/tmp")))
                .unwrap_err()
                .to_string();
            assert!(err.contains(needle), "{top}: {err}");
        }
        assert!(plan("[[sweep]]\ncheck = \"check_thm1\"\nseeds = [0, 1]\n[sweep.domain]\ndims = 1\ncells = [4]\nextents = [1.0]\nboundary = \"interval\"\nsize = 3").is_err());
    }

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seed_range("3..10").unwrap(), 3..10);
        assert!(parse_seed_range("4..4").is_err());
        assert!(parse_seed_range("7").is_err());
    }
}
