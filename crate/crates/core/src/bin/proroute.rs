use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use proroute::analytical::{compare, predict, prediction_grid, write_grid_csv, OverheadParams};
use proroute::harness::{export_dir, run_sweep, summary, ExportError, SweepAxis, SweepSpec};
use proroute::metrics::{compute_ce, compute_ct, compute_throughput};
use proroute::mobility::format_mobility_trace;
use proroute::scenario::{ScenarioConfig, ScenarioError};
use proroute::sim::{run_scenario, run_scenario_traced};
use proroute::trace::format_control_trace;

#[derive(Parser)]
#[command(name = "proroute", version, about = "Proactive MANET routing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for report.json and traces; stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write control and mobility traces (needs --out).
        #[arg(long)]
        trace: bool,
        /// Compare the run with the overhead model.
        #[arg(long)]
        analytical: bool,
    },
    /// Sweep one axis with seed replications.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        axis: SweepAxis,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the overhead prediction grid as CSV.
    Predict {
        #[arg(long)]
        config: PathBuf,
    },
}

enum Failure {
    Config(String),
    Io(String),
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::InvalidConfig(_) => Failure::Config(e.to_string()),
            ScenarioError::Io(_) => Failure::Io(e.to_string()),
        }
    }
}

impl From<ExportError> for Failure {
    fn from(e: ExportError) -> Self {
        match e {
            ExportError::Empty | ExportError::Parse(_) => Failure::Config(e.to_string()),
            ExportError::Io(_) | ExportError::Csv(_) => Failure::Io(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    std::fs::write(dir.join(name), contents)
        .map_err(|e| Failure::Io(format!("{}: {e}", dir.join(name).display())))
}

fn run(
    config: &Path,
    seed: Option<u64>,
    out: Option<&Path>,
    trace: bool,
    analytical: bool,
) -> Result<(), Failure> {
    let mut cfg = ScenarioConfig::from_file(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if trace && out.is_none() {
        return Err(Failure::Config("--trace needs --out".into()));
    }
    let (report, traces) = if trace {
        let o = run_scenario_traced(&cfg)?;
        let t = (
            format_control_trace(&o.control_trace),
            format_mobility_trace(&o.mobility_trace),
        );
        (o.report, Some(t))
    } else {
        (run_scenario(&cfg)?, None)
    };
    let comparison = if analytical {
        let params = OverheadParams::from_report(&report, &cfg);
        let pred = predict(cfg.protocol, &params).map_err(|e| Failure::Config(e.to_string()))?;
        let cmp = compare(&pred, &report).map_err(|e| Failure::Config(e.to_string()))?;
        Some(serde_json::json!({ "params": params, "prediction": pred, "comparison": cmp }))
    } else {
        None
    };

    let ce = compute_ce(&report);
    eprintln!(
        "{} nodes={} seed={} sent={} received={} throughput={:.1} bit/s ct={} ce={} nrl={}",
        cfg.protocol.name(),
        report.nodes,
        report.seed,
        report.data_sent,
        report.data_received,
        compute_throughput(&report, report.duration).unwrap_or(f64::NAN),
        compute_ct(&report).map_or("undefined".to_string(), |c| format!("{c:.4} s")),
        ce.routing_packets,
        if ce.nrl_infinite { "inf".to_string() } else { format!("{:.3}", ce.nrl) },
    );
    for v in &report.constraint_verdicts {
        if !v.pass {
            eprintln!(
                "constraint {} violated: measured {} vs threshold {}",
                v.constraint.name(),
                v.measured,
                v.threshold
            );
        }
    }

    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            write(dir, "report.json", &report.to_json())?;
            if let Some((control, mobility)) = traces {
                write(dir, "control.trace", &control)?;
                write(dir, "mobility.trace", &mobility)?;
            }
            if let Some(c) = comparison {
                let text = serde_json::to_string_pretty(&c).expect("comparison serializes");
                write(dir, "analytical.json", &text)?;
            }
        }
        None => {
            println!("{}", report.to_json());
            if let Some(c) = comparison {
                println!("{}", serde_json::to_string_pretty(&c).expect("comparison serializes"));
            }
        }
    }
    Ok(())
}

fn sweep(config: &Path, axis: SweepAxis, values: Vec<f64>, reps: usize, out: &Path) -> Result<(), Failure> {
    let base = ScenarioConfig::from_file(config)?;
    let spec = SweepSpec::new(base, axis, values, reps);
    let result = run_sweep(&spec)?;
    export_dir(&result, out)?;
    print!("{}", summary(&result)?);
    Ok(())
}

fn predict_grid(config: &Path) -> Result<(), Failure> {
    let cfg = ScenarioConfig::from_file(config)?;
    let rows = prediction_grid(&cfg).map_err(|e| Failure::Config(e.to_string()))?;
    write_grid_csv(&rows, std::io::stdout().lock())?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run {
            config,
            seed,
            out,
            trace,
            analytical,
        } => run(&config, seed, out.as_deref(), trace, analytical),
        Command::Sweep {
            config,
            axis,
            values,
            reps,
            out,
        } => sweep(&config, axis, values, reps, &out),
        Command::Predict { config } => predict_grid(&config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
