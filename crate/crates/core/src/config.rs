//! Structured configuration files.
//!
//! TOML with sections [problem], [regularizer], [discretization], [solver],
//! [study]; unknown keys anywhere are errors. Every field except the problem
//! name is optional and falls back to per-problem defaults.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::problems::{OscillatorConfig, VaccinationConfig};
use crate::solver::{SolverOptions, StepMode};
use crate::study::{ProblemChoice, StudyConfig};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    problem: ProblemSection,
    #[serde(default)]
    regularizer: RegularizerSection,
    #[serde(default)]
    discretization: DiscretizationSection,
    #[serde(default)]
    solver: SolverSection,
    #[serde(default)]
    study: StudySection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemSection {
    name: Option<String>,
    t_final: Option<f64>,
    /// Vaccination only: relative half-width of the parameter box.
    sigma: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegularizerSection {
    alpha: Option<f64>,
    beta: Option<f64>,
    lo: Option<f64>,
    hi: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiscretizationSection {
    q: Option<usize>,
    s: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverSection {
    tol: Option<f64>,
    max_iters: Option<usize>,
    step: Option<String>,
    gamma: Option<f64>,
    shrink: Option<f64>,
    growth: Option<f64>,
    acceleration: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct StudySection {
    n_grid: Option<Vec<usize>>,
    replications: Option<usize>,
    n_ref: Option<usize>,
    seed: Option<u64>,
    record_timings: Option<bool>,
}

/// Parse a config file into a resolved [`StudyConfig`].
pub fn load_config(path: &Path) -> Result<StudyConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text, &[])
}

/// Parse config text, then apply `section.key = value` override strings on
/// top before resolving defaults.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<StudyConfig> {
    let mut table: toml::Table =
        text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    for item in overrides {
        apply_override(&mut table, item)?;
    }
    let file: FileConfig =
        toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    resolve(file)
}

fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (path, raw_value) = item
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {item:?} is not of the form section.key=value")))?;
    let path = path.trim();
    let segments: Vec<&str> = path.split('.').map(str::trim).collect();
    if segments.len() != 2 || segments.iter().any(|s| s.is_empty()) {
        return Err(Error::Config(format!("override key {path:?} must be section.key")));
    }
    // Borrow TOML's own literal syntax for the value.
    let parsed: toml::Table = format!("v = {}", raw_value.trim())
        .parse()
        .or_else(|_| format!("v = {:?}", raw_value.trim()).parse::<toml::Table>())
        .map_err(|e| Error::Config(format!("override value {raw_value:?}: {e}")))?;
    let value = parsed.get("v").cloned().expect("just inserted");
    let section = table
        .entry(segments[0].to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    match section.as_table_mut() {
        Some(t) => {
            t.insert(segments[1].to_string(), value);
            Ok(())
        }
        None => Err(Error::Config(format!("{} is not a section", segments[0]))),
    }
}

fn resolve(file: FileConfig) -> Result<StudyConfig> {
    let name = file
        .problem
        .name
        .as_deref()
        .ok_or_else(|| Error::Config("problem.name is required (oscillator | vaccination)".into()))?;

    let problem = match name {
        "oscillator" => {
            if file.problem.sigma.is_some() {
                return Err(Error::Config("problem.sigma only applies to the vaccination problem".into()));
            }
            let mut oc = OscillatorConfig::default();
            if let Some(t) = file.problem.t_final {
                oc.t_final = t;
            }
            if let Some(a) = file.regularizer.alpha {
                oc.alpha = a;
            }
            if let Some(hi) = file.regularizer.hi {
                oc.control_bound = hi;
            }
            ProblemChoice::Oscillator(oc)
        }
        "vaccination" => {
            let mut vc = VaccinationConfig::default();
            if let Some(t) = file.problem.t_final {
                vc.t_final = t;
            }
            if let Some(s) = file.problem.sigma {
                vc.sigma = s;
            }
            if let Some(a) = file.regularizer.alpha {
                vc.alpha = a;
            }
            if let Some(hi) = file.regularizer.hi {
                vc.control_bound = hi;
            }
            ProblemChoice::Vaccination(vc)
        }
        other => {
            return Err(Error::Config(format!(
                "unknown problem {other:?}; expected oscillator or vaccination"
            )))
        }
    };

    let mut cfg = StudyConfig::new(problem);
    cfg.beta = file.regularizer.beta.unwrap_or(0.0);
    // A bare `lo` or a `lo`/`hi` pair overrides the whole box uniformly; a
    // bare `hi` is already folded into the problem bound above.
    if let Some(lo) = file.regularizer.lo {
        let hi = file.regularizer.hi.unwrap_or_else(|| default_hi(&cfg.problem));
        cfg.box_override = Some((lo, hi));
    }
    if let Some(q) = file.discretization.q {
        cfg.intervals = q;
    }
    if let Some(s) = file.discretization.s {
        cfg.substeps = s;
    }

    let mut solver = SolverOptions::default();
    if let Some(tol) = file.solver.tol {
        solver.tol = tol;
    }
    if let Some(mi) = file.solver.max_iters {
        solver.max_iters = mi;
    }
    let gamma = file.solver.gamma.unwrap_or(1.0);
    let shrink = file.solver.shrink.unwrap_or(0.5);
    let growth = file.solver.growth.unwrap_or(1.1);
    solver.step_mode = match file.solver.step.as_deref() {
        None | Some("backtracking") => StepMode::Backtracking { gamma0: gamma, shrink, growth },
        Some("fixed") => StepMode::Fixed { gamma },
        Some(other) => {
            return Err(Error::Config(format!("unknown step mode {other:?}; expected backtracking or fixed")))
        }
    };
    if let Some(acc) = file.solver.acceleration {
        solver.acceleration = acc;
    }
    cfg.solver = solver;

    if let Some(grid) = file.study.n_grid {
        cfg.n_grid = grid;
    }
    if let Some(reps) = file.study.replications {
        cfg.replications = reps;
    }
    if let Some(n_ref) = file.study.n_ref {
        cfg.n_ref = n_ref;
    }
    if let Some(seed) = file.study.seed {
        cfg.seed = seed;
    }
    if let Some(rt) = file.study.record_timings {
        cfg.record_timings = rt;
    }

    cfg.validate()?;
    Ok(cfg)
}

fn default_hi(problem: &ProblemChoice) -> f64 {
    match problem {
        ProblemChoice::Oscillator(oc) => oc.control_bound,
        ProblemChoice::Vaccination(vc) => vc.control_bound,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_resolves_to_defaults() {
        let cfg = parse_config("[problem]\nname = \"oscillator\"\n", &[]).unwrap();
        assert_eq!(cfg.intervals, 50);
        assert_eq!(cfg.substeps, 1);
        assert_eq!(cfg.n_ref, 4096);
        assert_eq!(cfg.replications, 50);
        match cfg.problem {
            ProblemChoice::Oscillator(oc) => {
                assert_eq!(oc.alpha, 1.0);
                assert_eq!(oc.control_bound, 3.0);
                assert_eq!(oc.t_final, 1.0);
            }
            other => panic!("wrong problem {other:?}"),
        }
    }

    #[test]
    fn vaccination_defaults() {
        let cfg = parse_config("[problem]\nname = \"vaccination\"\n", &[]).unwrap();
        match cfg.problem {
            ProblemChoice::Vaccination(vc) => {
                assert_eq!(vc.alpha, 2.0);
                assert_eq!(vc.control_bound, 0.9);
                assert_eq!(vc.t_final, 20.0);
                assert_eq!(vc.sigma, 0.15);
            }
            other => panic!("wrong problem {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse_config("[problem]\nname = \"oscillator\"\nbogus = 3\n", &[]).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        let err = parse_config("[problem]\nname = \"oscillator\"\n[solver]\nstepsize = 0.1\n", &[])
            .unwrap_err();
        assert!(err.to_string().contains("stepsize"), "{err}");
    }

    #[test]
    fn sigma_is_vaccination_only() {
        let err = parse_config("[problem]\nname = \"oscillator\"\nsigma = 0.2\n", &[]).unwrap_err();
        assert!(err.to_string().contains("sigma"), "{err}");
    }

    #[test]
    fn overrides_win_over_file_values() {
        let text = "[problem]\nname = \"oscillator\"\n[study]\nseed = 3\n";
        let cfg = parse_config(
            text,
            &["study.seed=99".into(), "discretization.q=10".into(), "study.n_grid=[4,8]".into()],
        )
        .unwrap();
        assert_eq!(cfg.seed, 99);
        assert_eq!(cfg.intervals, 10);
        assert_eq!(cfg.n_grid, vec![4, 8]);
    }

    #[test]
    fn string_overrides_parse_without_quotes() {
        let cfg = parse_config(
            "[problem]\nname = \"oscillator\"\n",
            &["solver.step=fixed".into(), "solver.gamma=0.2".into()],
        )
        .unwrap();
        assert_eq!(cfg.solver.step_mode, StepMode::Fixed { gamma: 0.2 });
    }

    #[test]
    fn invalid_study_shapes_are_rejected() {
        let err = parse_config(
            "[problem]\nname = \"oscillator\"\n[study]\nn_grid = [16, 8]\n",
            &[],
        )
        .unwrap_err();
        assert!(err.to_string().contains("ascending"), "{err}");
    }

    #[test]
    fn missing_problem_name_is_an_error() {
        assert!(parse_config("[problem]\nt_final = 2.0\n", &[]).is_err());
    }
}
