use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spinfilter_cli::commands::{self, Figure, Overrides, ReproduceOptions};
use spinfilter_cli::{check, CliError, CliResult};

/// Simulate monitored spin systems with estimate-based feedback.
#[derive(Parser)]
#[command(name = "spinfilter", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and write trajectory.csv.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Run an ensemble (seeds seed..seed+n-1) and write ensemble.csv and report.txt.
    Ensemble {
        #[command(flatten)]
        common: Common,
        #[arg(long = "n-traj", default_value_t = 100)]
        n_traj: usize,
    },
    /// Run the randomized invariant suite; exits 3 if any check fails.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random cases per check.
        #[arg(long, default_value_t = 200)]
        cases: usize,
    },
    /// Write the CSV series for one of the four figure settings.
    Reproduce {
        figure: Figure,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "n-traj", default_value_t = 10)]
        n_traj: usize,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long = "T")]
        t_final: Option<f64>,
    },
}

#[derive(Args)]
struct Common {
    /// Configuration file (flat `key = value`); defaults apply without one.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides output.dir.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "T")]
    t_final: Option<f64>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            dt: self.dt,
            t_final: self.t_final,
        }
    }
}

fn run(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Simulate { common } => {
            let cfg = commands::load_config(common.config.as_deref(), &common.overrides())?;
            commands::simulate(&cfg, common.out.as_deref())
        }
        Command::Ensemble { common, n_traj } => {
            let cfg = commands::load_config(common.config.as_deref(), &common.overrides())?;
            commands::run_ensemble(&cfg, n_traj, common.out.as_deref())
        }
        Command::Check { seed, cases } => {
            let (text, ok) = check::report(&check::run(check::CHECKS, seed, cases));
            if ok {
                Ok(text)
            } else {
                Err(CliError::PropertyFailure(text))
            }
        }
        Command::Reproduce {
            figure,
            out,
            seed,
            n_traj,
            dt,
            t_final,
        } => {
            let opts = ReproduceOptions {
                n_traj,
                overrides: Overrides {
                    seed: Some(seed),
                    dt,
                    t_final,
                },
            };
            let files = commands::reproduce(figure, &opts, &out)?;
            Ok(files.iter().map(|f| format!("wrote {}\n", f.display())).collect())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
