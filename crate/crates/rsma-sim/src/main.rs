//! Command-line interface: single solves, Monte Carlo sweeps, chart
//! rendering and dual-convergence traces.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use rsma_core::solver::{solve_scheme, Scheme, SolveReport};
use rsma_sim::error::SimError;
use rsma_sim::export::{self, format_sig, scheme_name};
use rsma_sim::plot::{write_chart, ChartLabels, Series};
use rsma_sim::scenario::ScenarioFile;
use rsma_sim::sweep::{run_sweep, SweepSpec};

#[derive(Parser)]
#[command(
    name = "rsma-sim",
    about = "Sum-rate optimization experiments for an RSMA LEO downlink under GEO interference limits",
    version
)]
struct Cli {
    /// Scenario file (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed override for scenario generation / random assignment.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for generated files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads for sweeps (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    #[value(name = "opt")]
    Opt,
    #[value(name = "fix_p")]
    FixP,
    #[value(name = "rand_x")]
    RandX,
}

impl From<SchemeArg> for Scheme {
    fn from(v: SchemeArg) -> Scheme {
        match v {
            SchemeArg::Opt => Scheme::Opt,
            SchemeArg::FixP => Scheme::FixP,
            SchemeArg::RandX => Scheme::RandX,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario and write the full report.
    Solve {
        /// Scheme to run.
        #[arg(long, value_enum, default_value = "opt")]
        scheme: SchemeArg,
    },
    /// Run a Monte Carlo sweep from a sweep-spec file.
    Sweep {
        /// Sweep specification (JSON).
        #[arg(long)]
        spec: PathBuf,
    },
    /// Render a sweep-result JSON file into an SVG line chart.
    Plot {
        /// Sweep result produced by `sweep`.
        #[arg(long)]
        input: PathBuf,
        /// Output SVG path.
        #[arg(long)]
        output: PathBuf,
    },
    /// Export the dual-variable convergence trace of one solve.
    Trace {
        /// Scheme to trace.
        #[arg(long, value_enum, default_value = "opt")]
        scheme: SchemeArg,
    },
}

fn load_scenario(path: &Option<PathBuf>) -> Result<ScenarioFile, SimError> {
    match path {
        None => Ok(ScenarioFile::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| SimError::io(p.clone(), e))?;
            serde_json::from_str(&text)
                .map_err(|e| SimError::config(format!("bad scenario file {}: {e}", p.display())))
        }
    }
}

fn ensure_out(dir: &Path) -> Result<(), SimError> {
    fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))
}

fn write_report(report: &SolveReport, path: &Path) -> Result<(), SimError> {
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| SimError::config(format!("serialization failed: {e}")))?;
    fs::write(path, json + "\n").map_err(|e| SimError::io(path, e))
}

fn cmd_solve(cli: &Cli, scheme: Scheme) -> Result<(), SimError> {
    let scenario = load_scenario(&cli.config)?;
    let seed = cli.seed.or(scenario.seed).unwrap_or(0);
    let channels = scenario.channels(seed)?;
    let mut options = rsma_core::SolveOptions::default();
    options.record_trace = false;
    let report = solve_scheme(scheme, &scenario.config, &channels, &options, seed)?;
    ensure_out(&cli.out)?;
    let path = cli.out.join("solve_report.json");
    write_report(&report, &path)?;
    println!(
        "scheme={} sum_rate={} Mbit/s feasible={} converged={} iterations={} wall={}s",
        scheme_name(scheme),
        format_sig(report.rates.sum_rate * 1e-6, 9),
        report.feasible,
        report.converged,
        report.iterations,
        format_sig(report.wall_time_s, 3),
    );
    println!("report: {}", path.display());
    Ok(())
}

fn cmd_sweep(cli: &Cli, spec_path: &Path) -> Result<(), SimError> {
    let text = fs::read_to_string(spec_path).map_err(|e| SimError::io(spec_path, e))?;
    let spec: SweepSpec = serde_json::from_str(&text)
        .map_err(|e| SimError::config(format!("bad sweep spec {}: {e}", spec_path.display())))?;
    let result = run_sweep(&spec)?;
    ensure_out(&cli.out)?;
    let csv = cli.out.join("sweep_results.csv");
    let json = cli.out.join("sweep_results.json");
    export::write_csv(&result, &csv)?;
    export::write_json(&result, &json)?;
    for agg in &result.aggregates {
        println!(
            "{:6} {}={:8} mean={} Mbit/s (stderr {}, {} trials, {}% feasible)",
            scheme_name(agg.scheme),
            result.spec.variable.label(),
            format_sig(agg.sweep_value, 6),
            format_sig(agg.mean_sum_rate_mbps, 9),
            format_sig(agg.std_error_mbps, 3),
            agg.trials,
            format_sig(agg.feasibility_rate * 100.0, 4),
        );
    }
    println!("csv: {}", csv.display());
    println!("json: {}", json.display());
    Ok(())
}

fn cmd_plot(input: &Path, output: &Path) -> Result<(), SimError> {
    let result = export::read_json(input)?;
    let mut series = Vec::new();
    for scheme in &result.spec.schemes {
        let points: Vec<(f64, f64)> = result
            .aggregates
            .iter()
            .filter(|a| a.scheme == *scheme)
            .map(|a| (a.sweep_value, a.mean_sum_rate_mbps))
            .collect();
        series.push(Series { label: scheme_name(*scheme).to_string(), points });
    }
    let labels = ChartLabels {
        title: format!("Mean sum rate vs {}", result.spec.variable.label()),
        x_label: match result.spec.variable {
            rsma_sim::sweep::SweepVariable::TotalPower => "total power (W)".to_string(),
            rsma_sim::sweep::SweepVariable::InterferenceThreshold => {
                "interference threshold (W)".to_string()
            }
            rsma_sim::sweep::SweepVariable::Dims => "grid size (beams = subcarriers)".to_string(),
        },
        y_label: "sum rate (Mbit/s)".to_string(),
    };
    write_chart(&series, &labels, output)?;
    println!("svg: {}", output.display());
    Ok(())
}

fn cmd_trace(cli: &Cli, scheme: Scheme) -> Result<(), SimError> {
    let scenario = load_scenario(&cli.config)?;
    let seed = cli.seed.or(scenario.seed).unwrap_or(0);
    let channels = scenario.channels(seed)?;
    let mut options = rsma_core::SolveOptions::default();
    options.record_trace = true;
    options.early_stop = false;
    let report = solve_scheme(scheme, &scenario.config, &channels, &options, seed)?;
    ensure_out(&cli.out)?;

    let csv_path = cli.out.join("dual_trace.csv");
    let mut csv = String::from(
        "iteration,lambda1_delta,lambda2_delta,lambda3_delta,lambda4_delta,lambda5_delta,\
         lambda1_norm,lambda2_norm,lambda3_norm,lambda4_norm,lambda5_norm,sum_rate_mbps,max_violation\n",
    );
    for (i, rec) in report.inner_trace.iter().enumerate() {
        csv.push_str(&format!("{}", i + 1));
        for d in rec.dual_delta {
            csv.push_str(&format!(",{}", format_sig(d, 9)));
        }
        for n in rec.dual_norm {
            csv.push_str(&format!(",{}", format_sig(n, 9)));
        }
        csv.push_str(&format!(
            ",{},{}\n",
            format_sig(rec.sum_rate * 1e-6, 9),
            format_sig(rec.max_violation, 9)
        ));
    }
    fs::write(&csv_path, csv).map_err(|e| SimError::io(&csv_path, e))?;

    let names = ["lambda1", "lambda2", "lambda3", "lambda4", "lambda5"];
    let series: Vec<Series> = names
        .iter()
        .enumerate()
        .map(|(fam, name)| Series {
            label: name.to_string(),
            points: report
                .inner_trace
                .iter()
                .enumerate()
                .map(|(i, rec)| ((i + 1) as f64, rec.dual_delta[fam]))
                .collect(),
        })
        .collect();
    let labels = ChartLabels {
        title: "Dual variable convergence".to_string(),
        x_label: "inner iteration".to_string(),
        y_label: "iterate change norm".to_string(),
    };
    let svg_path = cli.out.join("dual_trace.svg");
    write_chart(&series, &labels, &svg_path)?;
    println!("trace: {} iterations", report.inner_trace.len());
    println!("csv: {}", csv_path.display());
    println!("svg: {}", svg_path.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<(), SimError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(SimError::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| SimError::config(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Solve { scheme } => cmd_solve(cli, (*scheme).into()),
        Command::Sweep { spec } => cmd_sweep(cli, spec),
        Command::Plot { input, output } => cmd_plot(input, output),
        Command::Trace { scheme } => cmd_trace(cli, (*scheme).into()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
