//! Experiment orchestration: nominal solve, reference solve, SAA convergence
//! studies with replications, least-squares rate fits, and CSV/SVG output.
//!
//! A study draws, for every sample size N in the grid and every replication
//! r, an i.i.d. sample set from the subseed `derive_seed(master, N, r)`,
//! solves the SAA problem from u₀ = 0, and records the optimal-value
//! deviation from the reference value together with the reference
//! criticality at the SAA solution. Replications run in parallel; records
//! are keyed and ordered by (N, r), so output does not depend on the thread
//! count.

use std::fs;
use std::io::Write as IoWrite;
use std::path::Path;
use std::time::Instant;

use crate::control::{Control, ControlGrid};
use crate::dynamics::ProblemDef;
use crate::ensemble::EnsembleProblem;
use crate::error::{Error, Result};
use crate::problems::{make_oscillator, make_vaccination, OscillatorConfig, VaccinationConfig};
use crate::regularizer::RegularizerSpec;
use crate::sampling::{derive_seed, nominal_sample, sample_iid, sample_sobol, SampleSet};
use crate::solver::{solve, SolveReport, SolverOptions};
use crate::svg;
use crate::theory::{rate_bound, RateKind, TheoryConstants};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub const DEFAULT_N_GRID: [usize; 7] = [4, 8, 16, 32, 64, 128, 256];
pub const DEFAULT_REPLICATIONS: usize = 50;
pub const DEFAULT_N_REF: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemChoice {
    Oscillator(OscillatorConfig),
    Vaccination(VaccinationConfig),
}

impl ProblemChoice {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemChoice::Oscillator(_) => "oscillator",
            ProblemChoice::Vaccination(_) => "vaccination",
        }
    }
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub problem: ProblemChoice,
    /// L¹ weight of the regularizer (both built-in problems default to 0).
    pub beta: f64,
    /// Uniform box override applied to every control channel.
    pub box_override: Option<(f64, f64)>,
    /// Control intervals q.
    pub intervals: usize,
    /// RK4 substeps per interval.
    pub substeps: usize,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub n_ref: usize,
    pub seed: u64,
    pub solver: SolverOptions,
    /// When false (the default) the wall_ms column is written as zero so
    /// that records files are bitwise reproducible run to run.
    pub record_timings: bool,
}

impl StudyConfig {
    pub fn new(problem: ProblemChoice) -> Self {
        Self {
            problem,
            beta: 0.0,
            box_override: None,
            intervals: 50,
            substeps: 1,
            n_grid: DEFAULT_N_GRID.to_vec(),
            replications: DEFAULT_REPLICATIONS,
            n_ref: DEFAULT_N_REF,
            seed: 1,
            solver: SolverOptions::default(),
            record_timings: false,
        }
    }

    pub fn oscillator() -> Self {
        Self::new(ProblemChoice::Oscillator(OscillatorConfig::default()))
    }

    pub fn vaccination() -> Self {
        Self::new(ProblemChoice::Vaccination(VaccinationConfig::default()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.intervals == 0 || self.substeps == 0 {
            return Err(Error::Config("q and s must be at least 1".into()));
        }
        if self.n_grid.is_empty() || !self.n_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("n_grid must be nonempty and strictly ascending".into()));
        }
        if self.replications < 2 {
            return Err(Error::Config("replications must be at least 2".into()));
        }
        if self.n_ref <= *self.n_grid.last().unwrap() {
            return Err(Error::Config(format!(
                "n_ref = {} must exceed the largest study size {}",
                self.n_ref,
                self.n_grid.last().unwrap()
            )));
        }
        self.solver.validate()
    }
}

/// Problem pieces assembled from a configuration.
#[derive(Debug, Clone)]
pub struct BuiltProblem {
    pub def: ProblemDef,
    pub regularizer: RegularizerSpec,
    pub grid: ControlGrid,
}

pub fn build_problem(cfg: &StudyConfig) -> Result<BuiltProblem> {
    cfg.validate()?;
    let (def, mut regularizer, t_final, channels) = match &cfg.problem {
        ProblemChoice::Oscillator(oc) => {
            let (d, r) = make_oscillator(oc)?;
            (d, r, oc.t_final, 2)
        }
        ProblemChoice::Vaccination(vc) => {
            let (d, r) = make_vaccination(vc)?;
            (d, r, vc.t_final, 1)
        }
    };
    let def = rebuild_with_substeps(def, cfg.substeps);
    regularizer.beta = cfg.beta;
    if let Some((lo, hi)) = cfg.box_override {
        regularizer = RegularizerSpec::uniform_box(regularizer.alpha, cfg.beta, channels, lo, hi)?;
    }
    let grid = ControlGrid::new(t_final, cfg.intervals, channels)?;
    Ok(BuiltProblem { def, regularizer, grid })
}

fn rebuild_with_substeps(def: ProblemDef, substeps: usize) -> ProblemDef {
    if substeps == def.substeps() {
        def
    } else {
        def.with_substeps(substeps)
    }
}

/// Outcome of one (N, replication) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRecord {
    pub n: usize,
    pub replication: usize,
    pub seed: u64,
    pub v_hat: f64,
    pub value_err: f64,
    pub crit_ref: f64,
    pub iterations: usize,
    pub wall_ms: f64,
    pub status: RecordStatus,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecordStatus {
    Ok,
    MaxIters,
    Failed(String),
}

impl RecordStatus {
    pub fn as_csv_field(&self) -> String {
        match self {
            RecordStatus::Ok => "ok".to_string(),
            RecordStatus::MaxIters => "maxiter".to_string(),
            RecordStatus::Failed(msg) => format!("error[{}]", msg.replace([',', '\n'], ";")),
        }
    }

    fn from_csv_field(s: &str) -> Self {
        match s {
            "ok" => RecordStatus::Ok,
            "maxiter" => RecordStatus::MaxIters,
            other => RecordStatus::Failed(
                other.trim_start_matches("error[").trim_end_matches(']').to_string(),
            ),
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, RecordStatus::Ok)
    }
}

/// Per-N summary over replications (means and standard errors over the
/// successful cells).
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub n: usize,
    pub mean_value_err: f64,
    pub se_value_err: f64,
    pub mean_crit: f64,
    pub se_crit: f64,
    pub ok_count: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone)]
pub struct StudyOutput {
    pub records: Vec<StudyRecord>,
    pub summary: Vec<SummaryRow>,
    pub value_fit: RateFit,
    pub crit_fit: RateFit,
}

/// Reference solve plus the sample set it was built on.
#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub report: SolveReport,
    pub samples: SampleSet,
}

/// Solve the deterministic problem at ξ = E[ξ].
pub fn run_nominal(cfg: &StudyConfig, out_dir: Option<&Path>) -> Result<SolveReport> {
    let built = build_problem(cfg)?;
    let samples = nominal_sample(built.def.param_box());
    let ep = EnsembleProblem::new(built.def, built.regularizer, samples)?;
    let report = solve(&ep, &Control::zeros(built.grid), &cfg.solver)?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        write_control_csv(&report.control, &dir.join("nominal_control.csv"))?;
        write_control_svg("nominal control", &report.control, &dir.join("nominal_control.svg"))?;
        write_report_csv(&report, cfg, &dir.join("nominal_report.csv"))?;
    }
    Ok(report)
}

/// Solve the large-N randomized-sequence problem standing in for the true
/// expectation. The sample set is persisted alongside the solution when an
/// output directory is given.
/// Tag separating the reference-sequence seed stream from study subseeds.
const REFERENCE_SEED_TAG: u64 = 0x5EED_0001;

pub fn run_reference(cfg: &StudyConfig, out_dir: Option<&Path>) -> Result<ReferenceSolution> {
    let built = build_problem(cfg)?;
    let samples =
        sample_sobol(built.def.param_box(), cfg.n_ref, derive_seed(cfg.seed, REFERENCE_SEED_TAG, 0))?;
    let ep = EnsembleProblem::new(built.def, built.regularizer, samples.clone())?;
    let report = solve(&ep, &Control::zeros(built.grid), &cfg.solver)?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        write_control_csv(&report.control, &dir.join("reference_control.csv"))?;
        write_control_svg("reference control", &report.control, &dir.join("reference_control.svg"))?;
        write_report_csv(&report, cfg, &dir.join("reference_report.csv"))?;
        let mut f = fs::File::create(dir.join("reference_samples.csv"))?;
        samples.write_csv(&mut f)?;
    }
    Ok(ReferenceSolution { report, samples })
}

/// Run the full convergence study. Failed cells are recorded and skipped in
/// the summary; the study itself continues.
pub fn run_study(cfg: &StudyConfig, out_dir: Option<&Path>) -> Result<StudyOutput> {
    let built = build_problem(cfg)?;
    let reference = run_reference(cfg, out_dir)?;
    if !reference.report.converged {
        return Err(Error::Config(format!(
            "reference solve did not converge within {} iterations (criticality {})",
            cfg.solver.max_iters, reference.report.criticality
        )));
    }
    let v_ref = reference.report.value;
    let ref_ensemble =
        EnsembleProblem::new(built.def.clone(), built.regularizer.clone(), reference.samples.clone())?;

    let jobs: Vec<(usize, usize)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| (0..cfg.replications).map(move |r| (n, r)))
        .collect();

    let run_cell = |&(n, replication): &(usize, usize)| -> StudyRecord {
        let seed = derive_seed(cfg.seed, n as u64, replication as u64);
        let started = Instant::now();
        let outcome = sample_iid(built.def.param_box(), n, seed)
            .and_then(|samples| {
                EnsembleProblem::new(built.def.clone(), built.regularizer.clone(), samples)
            })
            .and_then(|ep| solve(&ep, &Control::zeros(built.grid), &cfg.solver))
            .and_then(|report| {
                let crit_ref = ref_ensemble.criticality(&report.control)?;
                Ok((report, crit_ref))
            });
        let wall_ms = if cfg.record_timings { started.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
        match outcome {
            Ok((report, crit_ref)) => StudyRecord {
                n,
                replication,
                seed,
                v_hat: report.value,
                value_err: (report.value - v_ref).abs(),
                crit_ref,
                iterations: report.iterations,
                wall_ms,
                status: if report.converged { RecordStatus::Ok } else { RecordStatus::MaxIters },
            },
            Err(e) => StudyRecord {
                n,
                replication,
                seed,
                v_hat: f64::NAN,
                value_err: f64::NAN,
                crit_ref: f64::NAN,
                iterations: 0,
                wall_ms,
                status: RecordStatus::Failed(e.to_string()),
            },
        }
    };

    #[cfg(feature = "parallel")]
    let records: Vec<StudyRecord> = jobs.par_iter().map(run_cell).collect();
    #[cfg(not(feature = "parallel"))]
    let records: Vec<StudyRecord> = jobs.iter().map(run_cell).collect();

    let summary = summarize(&records);
    let value_fit = fit_rate(&summary.iter().map(|s| (s.n as f64, s.mean_value_err)).collect::<Vec<_>>())?;
    let crit_fit = fit_rate(&summary.iter().map(|s| (s.n as f64, s.mean_crit)).collect::<Vec<_>>())?;

    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        write_records_csv(&records, &dir.join("records.csv"))?;
        write_summary_csv(&summary, &dir.join("summary.csv"))?;
        let tc = TheoryConstants::unit(&built.regularizer);
        write_bounds_csv(&tc, &cfg.n_grid, &dir.join("bounds.csv"))?;
        write_rate_svg(
            "SAA optimal value deviation",
            "mean |v̂_N − v_ref|",
            &summary.iter().map(|s| (s.n as f64, s.mean_value_err)).collect::<Vec<_>>(),
            value_fit,
            &dir.join("value_rate.svg"),
        )?;
        write_rate_svg(
            "reference criticality at SAA solutions",
            "mean χ_ref(u_N*)",
            &summary.iter().map(|s| (s.n as f64, s.mean_crit)).collect::<Vec<_>>(),
            crit_fit,
            &dir.join("crit_rate.svg"),
        )?;
    }

    Ok(StudyOutput { records, summary, value_fit, crit_fit })
}

/// Group records by N and average the successful replications. An
/// all-failed cell yields NaN means and is flagged by `ok_count = 0`.
pub fn summarize(records: &[StudyRecord]) -> Vec<SummaryRow> {
    let mut ns: Vec<usize> = records.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    ns.into_iter()
        .map(|n| {
            let group: Vec<&StudyRecord> = records.iter().filter(|r| r.n == n).collect();
            let ok: Vec<&StudyRecord> = group.iter().filter(|r| r.status.is_ok()).copied().collect();
            let stats = |extract: fn(&StudyRecord) -> f64| -> (f64, f64) {
                if ok.is_empty() {
                    return (f64::NAN, f64::NAN);
                }
                let k = ok.len() as f64;
                let mean = ok.iter().map(|r| extract(r)).sum::<f64>() / k;
                if ok.len() < 2 {
                    return (mean, f64::NAN);
                }
                let var = ok.iter().map(|r| (extract(r) - mean).powi(2)).sum::<f64>() / (k - 1.0);
                (mean, (var / k).sqrt())
            };
            let (mean_value_err, se_value_err) = stats(|r| r.value_err);
            let (mean_crit, se_crit) = stats(|r| r.crit_ref);
            SummaryRow {
                n,
                mean_value_err,
                se_value_err,
                mean_crit,
                se_crit,
                ok_count: ok.len(),
                total: group.len(),
            }
        })
        .collect()
}

/// Ordinary least squares of `log(mean)` on `log(N)`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::FitUnderdetermined);
    }
    for &(n, mean) in points {
        if !mean.is_finite() || mean <= 0.0 {
            return Err(Error::FitNonpositiveMean { n: n as usize, mean });
        }
    }
    let k = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let x_mean = xs.iter().sum::<f64>() / k;
    let y_mean = ys.iter().sum::<f64>() / k;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - x_mean) * (x - x_mean);
        sxy += (x - x_mean) * (y - y_mean);
    }
    let slope = sxy / sxx;
    Ok(RateFit { slope, intercept: y_mean - slope * x_mean })
}

pub const RECORDS_HEADER: &str = "N,rep,seed,v_hat,value_err,crit_ref,iters,wall_ms,status";

pub fn write_records_csv(records: &[StudyRecord], path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "{RECORDS_HEADER}")?;
    for r in records {
        writeln!(
            f,
            "{},{},{},{},{},{},{},{},{}",
            r.n,
            r.replication,
            r.seed,
            r.v_hat,
            r.value_err,
            r.crit_ref,
            r.iterations,
            r.wall_ms,
            r.status.as_csv_field()
        )?;
    }
    Ok(())
}

pub fn read_records_csv(path: &Path) -> Result<Vec<StudyRecord>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header == RECORDS_HEADER => {}
        other => {
            return Err(Error::Config(format!(
                "unexpected records header {:?}; want {RECORDS_HEADER:?}",
                other.unwrap_or("")
            )))
        }
    }
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.splitn(9, ',').collect();
        if fields.len() != 9 {
            return Err(Error::Config(format!("records line {}: expected 9 fields", lineno + 2)));
        }
        let parse_f = |s: &str| s.parse::<f64>().map_err(|e| Error::Config(format!("line {}: {e}", lineno + 2)));
        let parse_u = |s: &str| s.parse::<usize>().map_err(|e| Error::Config(format!("line {}: {e}", lineno + 2)));
        records.push(StudyRecord {
            n: parse_u(fields[0])?,
            replication: parse_u(fields[1])?,
            seed: fields[2].parse().map_err(|e| Error::Config(format!("line {}: {e}", lineno + 2)))?,
            v_hat: parse_f(fields[3])?,
            value_err: parse_f(fields[4])?,
            crit_ref: parse_f(fields[5])?,
            iterations: parse_u(fields[6])?,
            wall_ms: parse_f(fields[7])?,
            status: RecordStatus::from_csv_field(fields[8]),
        });
    }
    Ok(records)
}

pub fn write_summary_csv(summary: &[SummaryRow], path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "N,mean_value_err,se_value_err,mean_crit,se_crit")?;
    for s in summary {
        writeln!(f, "{},{},{},{},{}", s.n, s.mean_value_err, s.se_value_err, s.mean_crit, s.se_crit)?;
    }
    Ok(())
}

/// Theory-overlay curves at the study sample sizes.
pub fn write_bounds_csv(tc: &TheoryConstants, n_grid: &[usize], path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "N,thm61_bound,thm71_bound")?;
    for &n in n_grid {
        writeln!(
            f,
            "{},{},{}",
            n,
            rate_bound(tc, n, RateKind::Value),
            rate_bound(tc, n, RateKind::Criticality)
        )?;
    }
    Ok(())
}

fn write_control_csv(u: &Control, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    let m = u.grid().channels();
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=m).map(|j| format!("u{j}")))
        .collect();
    writeln!(f, "{}", header.join(","))?;
    let dt = u.grid().dt();
    for k in 0..u.grid().intervals() {
        let mut row = vec![format!("{}", k as f64 * dt)];
        row.extend(u.interval(k).iter().map(|v| format!("{v}")));
        writeln!(f, "{}", row.join(","))?;
    }
    Ok(())
}

fn write_control_svg(title: &str, u: &Control, path: &Path) -> Result<()> {
    let m = u.grid().channels();
    let channels: Vec<(String, Vec<f64>)> = (0..m)
        .map(|j| {
            let values = (0..u.grid().intervals()).map(|k| u.value(k, j)).collect();
            (format!("u{}", j + 1), values)
        })
        .collect();
    fs::write(path, svg::step_chart(title, u.grid().t_final(), &channels))?;
    Ok(())
}

fn write_report_csv(report: &SolveReport, cfg: &StudyConfig, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "problem,alpha,value,criticality,iterations,converged,generator,seed,samples")?;
    writeln!(
        f,
        "{},{},{},{},{},{},{},{},{}",
        cfg.problem.name(),
        report.alpha,
        report.value,
        report.criticality,
        report.iterations,
        report.converged,
        report.provenance.generator.as_str(),
        report.provenance.seed,
        report.provenance.count
    )?;
    Ok(())
}

fn write_rate_svg(
    title: &str,
    ylabel: &str,
    means: &[(f64, f64)],
    fit: RateFit,
    path: &Path,
) -> Result<()> {
    let fit_points: Vec<(f64, f64)> = means
        .iter()
        .map(|&(n, _)| (n, (fit.intercept + fit.slope * n.ln()).exp()))
        .collect();
    let series = [
        svg::Series {
            label: "empirical mean".into(),
            points: means.to_vec(),
            color: "#1f6fb2",
            line: false,
            markers: true,
        },
        svg::Series {
            label: format!("least-squares fit, slope {:.3}", fit.slope),
            points: fit_points,
            color: "#c23b22",
            line: true,
            markers: false,
        },
    ];
    fs::write(path, svg::loglog_chart(title, "N", ylabel, &series))?;
    Ok(())
}
