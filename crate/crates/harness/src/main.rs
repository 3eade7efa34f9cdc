use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use musc_up_harness::compare::format_table;
use musc_up_harness::{compare_reports, emit_plot_data, run_experiment, ExperimentConfig, HarnessError, PlotKind};

const THREADS_ENV: &str = "MUSC_UP_THREADS";

#[derive(Parser)]
#[command(name = "musc-up", version, about = "Uncertainty propagation experiments for multiscale models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configured experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to `output` in the configuration.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the seed of the configuration.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; MUSC_UP_THREADS takes precedence.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Tabulate stored runs against a reference run.
    Compare {
        #[arg(long)]
        reports: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write plot data next to a report.
    Plot {
        #[arg(long)]
        report: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
    },
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, HarnessError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(HarnessError::Config(vec![format!("{THREADS_ENV} must be a positive integer, got {v:?}")])),
        },
        Err(_) => Ok(flag.filter(|&n| n > 0)),
    }
}

fn execute(cli: Cli) -> Result<u8, HarnessError> {
    match cli.command {
        Command::Run { config, out, seed, threads } => {
            let settings = ExperimentConfig::load(&config, seed)?;
            let out = out
                .or_else(|| settings.output.clone())
                .ok_or_else(|| HarnessError::Config(vec!["no output directory: pass --out or set `output`".into()]))?;
            let mut pool = rayon::ThreadPoolBuilder::new();
            if let Some(n) = thread_count(threads)? {
                pool = pool.num_threads(n);
            }
            let pool = pool.build().map_err(|e| HarnessError::Config(vec![format!("thread pool: {e}")]))?;
            let summary = pool.install(|| run_experiment(&settings, &out))?;
            let r = &summary.report;
            println!("method {} seed {} t_total {:.3}s", r.method, r.seed, r.timing.t_total);
            if let Some(d) = &r.decision {
                println!("interpolation test: {d}");
            }
            if let Some(e) = r.mean_rel_std_error {
                println!("mean relative std error {e:.4e}");
            }
            if let Some(s) = r.speedup {
                println!("speedup over reference {s:.2}");
            }
            println!("results written to {}", summary.dir.display());
            Ok(summary.status.exit_code() as u8)
        }
        Command::Compare { reports, reference, out } => {
            let rows = compare_reports(&reports, &reference, &out)?;
            print!("{}", format_table(&rows));
            Ok(0)
        }
        Command::Plot { report, kind } => {
            for path in emit_plot_data(&report, kind)? {
                println!("{}", path.display());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
