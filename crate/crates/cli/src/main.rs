//! Batch driver for ensemble-control experiments: nominal and reference
//! solves, SAA convergence studies, slope re-fits, and theory-bound curves.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use saaoc::study::{
    read_records_csv, summarize, write_bounds_csv, write_summary_csv, StudyConfig, SummaryRow,
};
use saaoc::theory::{estimate_constants, TheoryConstants};
use saaoc::{build_problem, fit_rate, run_nominal, run_reference, run_study, SolveReport};

#[derive(Parser)]
#[command(name = "saaoc", version, about = "Risk-neutral ensemble optimal control via SAA")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Config file (TOML). Without it, --problem plus defaults apply.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Problem shorthand: oscillator | vaccination.
    #[arg(long, global = true)]
    problem: Option<String>,

    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for CSV and SVG artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Thread count for sample-parallel evaluation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Per-key config override, e.g. --set study.replications=20 (repeatable).
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the deterministic problem at the expected parameter value.
    Nominal,
    /// Solve the large-N reference problem and persist its solution.
    Reference,
    /// Run the full convergence study and fit log-log rates.
    Study,
    /// Re-fit slopes from an existing records CSV.
    Report {
        /// Path to a records.csv produced by `study`.
        #[arg(long)]
        records: PathBuf,
    },
    /// Emit theory-bound curves over the configured sample-size grid.
    Bounds {
        /// Covering constant.
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        /// Single-point deviation constant for the value bound.
        #[arg(long, default_value_t = 1.0)]
        c0_value: f64,
        /// Single-point deviation constant for the criticality bound.
        #[arg(long, default_value_t = 1.0)]
        c0_gradient: f64,
        /// Gradient Lipschitz constant.
        #[arg(long, default_value_t = 1.0)]
        lip_gradient: f64,
        /// Estimate the dynamics/cost constants by sampling the problem
        /// instead of defaulting them to 1.
        #[arg(long)]
        estimate: bool,
    },
}

fn load_study_config(common: &Common) -> anyhow::Result<StudyConfig> {
    let mut overrides = Vec::new();
    if let Some(problem) = &common.problem {
        overrides.push(format!("problem.name={problem}"));
    }
    overrides.extend(common.overrides.iter().cloned());
    if let Some(seed) = common.seed {
        overrides.push(format!("study.seed={seed}"));
    }
    let text = match &common.config {
        Some(path) => std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?,
        None => String::new(),
    };
    if common.config.is_none() && common.problem.is_none() {
        bail!("either --config or --problem is required");
    }
    let base = if text.trim().is_empty() && common.problem.is_some() {
        // Synthesize the minimal table; the override fills the name.
        "[problem]\n".to_string()
    } else {
        text
    };
    Ok(saaoc::config::parse_config(&base, &overrides)?)
}

fn print_report(label: &str, report: &SolveReport) {
    println!(
        "{label}: value={} criticality={:.3e} iterations={} alpha={} samples={}({}) converged={}",
        report.value,
        report.criticality,
        report.iterations,
        report.alpha,
        report.provenance.count,
        report.provenance.generator.as_str(),
        report.converged
    );
}

fn print_summary(summary: &[SummaryRow]) {
    println!("{:>8} {:>14} {:>14} {:>8}", "N", "mean|v-v_ref|", "mean crit_ref", "ok");
    for row in summary {
        println!(
            "{:>8} {:>14.6e} {:>14.6e} {:>5}/{:<3}",
            row.n, row.mean_value_err, row.mean_crit, row.ok_count, row.total
        );
    }
}

fn run(cli: &Cli) -> anyhow::Result<ExitCode> {
    let cfg = load_study_config(&cli.common)?;
    let out: Option<&Path> = cli.common.out.as_deref();

    match &cli.command {
        Command::Nominal => {
            let report = run_nominal(&cfg, out)?;
            print_report("nominal", &report);
            if !report.converged {
                eprintln!("nominal solve did not converge within {} iterations", cfg.solver.max_iters);
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Reference => {
            let reference = run_reference(&cfg, out)?;
            print_report("reference", &reference.report);
            if !reference.report.converged {
                eprintln!("reference solve did not converge within {} iterations", cfg.solver.max_iters);
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Study => {
            let output = run_study(&cfg, out)?;
            print_summary(&output.summary);
            println!(
                "fitted slopes: value {:.4}, criticality {:.4} (N^(-1/2) expected)",
                output.value_fit.slope, output.crit_fit.slope
            );
            let failed = output.records.iter().filter(|r| !r.status.is_ok()).count();
            if failed > 0 {
                eprintln!("{failed} of {} cells did not finish cleanly; see records.csv", output.records.len());
            }
            if let Some(dir) = out {
                println!("artifacts written to {}", dir.display());
            }
        }
        Command::Report { records } => {
            let records = read_records_csv(records)?;
            let summary = summarize(&records);
            print_summary(&summary);
            let value_fit =
                fit_rate(&summary.iter().map(|s| (s.n as f64, s.mean_value_err)).collect::<Vec<_>>())?;
            let crit_fit =
                fit_rate(&summary.iter().map(|s| (s.n as f64, s.mean_crit)).collect::<Vec<_>>())?;
            println!("fitted slopes: value {:.4}, criticality {:.4}", value_fit.slope, crit_fit.slope);
            if let Some(dir) = out {
                std::fs::create_dir_all(dir)?;
                write_summary_csv(&summary, &dir.join("summary.csv"))?;
                println!("summary written to {}", dir.join("summary.csv").display());
            }
        }
        Command::Bounds { rho, c0_value, c0_gradient, lip_gradient, estimate } => {
            let built = build_problem(&cfg)?;
            let mut tc = if *estimate {
                estimate_constants(&built.def, &built.regularizer, built.grid, 32, cfg.seed)?
            } else {
                TheoryConstants::unit(&built.regularizer)
            };
            tc.covering_rho = *rho;
            tc.deviation_value = *c0_value;
            tc.deviation_gradient = *c0_gradient;
            tc.lip_gradient = *lip_gradient;
            tc.validate()?;
            let dir = out.unwrap_or(Path::new("."));
            std::fs::create_dir_all(dir)?;
            let path = dir.join("bounds.csv");
            write_bounds_csv(&tc, &cfg.n_grid, &path)?;
            println!(
                "bounds written to {} (constants are placeholders unless estimated; curves are up to constants)",
                path.display()
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    #[cfg(feature = "parallel")]
    if let Some(threads) = cli.common.threads {
        return saaoc::with_thread_pool(threads, || dispatch(&cli));
    }
    #[cfg(not(feature = "parallel"))]
    if cli.common.threads.is_some() {
        eprintln!("--threads has no effect: built without the parallel feature");
    }
    dispatch(&cli)
}

fn dispatch(cli: &Cli) -> ExitCode {
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
