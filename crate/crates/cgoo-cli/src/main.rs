use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cgoo_cli::{config, exit_codes, figures, ingest, scenario};

/// Constrained group-objective optimization with differential privacy:
/// runs configured scenarios, audits private mechanisms analytically, and
/// emits figure data.
#[derive(Parser)]
#[command(name = "cgoo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario config and write report.json + iterations.csv.
    Run {
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Audit the scenario's mechanism over all single-row sensitive swaps.
    Audit {
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Sample at twice the claimed epsilon; the audit must fail.
        #[arg(long)]
        inject_sensitivity_bug: bool,
    },
    /// Sweep G-mean and H-mean over class counts into figure_means.csv.
    FigureMeans {
        #[arg(long)]
        lmax: usize,
        #[arg(long, default_value_t = 1.0 / 3.0)]
        decay: f64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Validate a dataset CSV and print its shape.
    IngestCheck {
        csv: PathBuf,
        /// Project feature vectors onto the unit ball.
        #[arg(long)]
        normalize: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = match err.downcast_ref::<cgoo::Error>() {
                Some(cgoo::Error::UnsupportedAudit(_)) => exit_codes::UNSUPPORTED_AUDIT,
                _ => exit_codes::MALFORMED,
            };
            ExitCode::from(code as u8)
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Run { config: path, out } => {
            let config = config::load_config(&path)?;
            scenario::run_scenario(&config, &out)
        }
        Command::Audit {
            config: path,
            out,
            inject_sensitivity_bug,
        } => {
            let config = config::load_config(&path)?;
            scenario::audit_scenario(&config, &out, inject_sensitivity_bug)
        }
        Command::FigureMeans { lmax, decay, out } => {
            std::fs::create_dir_all(&out)?;
            let rows = figures::figure_means(lmax, decay)?;
            figures::write_figure_csv(&rows, &out.join("figure_means.csv"))?;
            Ok(exit_codes::SUCCESS)
        }
        Command::IngestCheck { csv, normalize } => {
            let dataset = ingest::ingest_csv(&csv, normalize)?;
            println!(
                "ok: n={} dim={} groups={}",
                dataset.n(),
                dataset.feature_dim(),
                dataset.num_groups()
            );
            Ok(exit_codes::SUCCESS)
        }
    }
}
