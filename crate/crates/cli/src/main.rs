use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use dirac_cli::commands::{self, SurgeryAction};
use dirac_cli::{config, verify};

#[derive(Parser)]
#[command(name = "dirac", about = "Spectral toolkit for canonical 1D Dirac operators")]
struct Cli {
    /// Thread count for the solver's internal parallelism (default: all).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Locate eigenvalues and norming constants; write a spectrum CSV.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = -3, allow_negative_numbers = true)]
        n_min: i32,
        #[arg(long, default_value_t = 3, allow_negative_numbers = true)]
        n_max: i32,
    },
    /// Gradient of one eigenvalue; optional finite-difference cross-check.
    Gradient {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        n: i32,
        #[arg(long)]
        check_fd: bool,
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Single-index isospectral deformation.
    Deform {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        m: i32,
        #[arg(long, allow_negative_numbers = true)]
        t: f64,
        /// Re-solve the deformed potential and report drift and ratios.
        #[arg(long)]
        verify: bool,
    },
    /// Staged deformation sequence from a schedule file (`n,t_n` rows).
    DeformSeq {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long)]
        verify: bool,
    },
    /// Spectral surgery on the truncated half-line window.
    #[command(subcommand)]
    Surgery(SurgeryCommand),
    /// Gradient-descent fit of a potential to target eigenvalues.
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        targets: PathBuf,
        #[arg(long, default_value_t = 200)]
        iters: usize,
        #[arg(long, default_value_t = 0.5)]
        lr: f64,
    },
    /// Run a bundled verification suite.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
    },
}

#[derive(Subcommand)]
enum SurgeryCommand {
    /// Insert an eigenvalue at mu with normalization constant c.
    Add {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        mu: f64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long)]
        window: Option<f64>,
    },
    /// Delete the eigenvalue nearest mu (seed normalized over
    /// [0, norm-window]).
    Remove {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        mu: f64,
        #[arg(long)]
        window: Option<f64>,
        /// Right end of the normalization window; default 1.5x the surgery
        /// window.
        #[arg(long)]
        norm_window: Option<f64>,
    },
    /// Rescale the norming constant of the eigenvalue nearest mu.
    Scale {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        mu: f64,
        #[arg(long, allow_negative_numbers = true)]
        t: f64,
        #[arg(long)]
        window: Option<f64>,
    },
    /// Apply a plan file (`op,nu,t,c` rows); intermediates become numbered
    /// sidecar files.
    Plan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        window: Option<f64>,
    },
}

fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .ok();
    }
    match cli.command {
        Command::Solve {
            config,
            out,
            n_min,
            n_max,
        } => {
            let cfg = config::load(&config)?;
            commands::cmd_solve(&cfg, n_min, n_max, &out)
        }
        Command::Gradient {
            config,
            out,
            n,
            check_fd,
            eps,
            seed,
        } => {
            let cfg = config::load(&config)?;
            commands::cmd_gradient(&cfg, n, &out, check_fd, eps, seed)
        }
        Command::Deform {
            config,
            out,
            m,
            t,
            verify,
        } => {
            let cfg = config::load(&config)?;
            commands::cmd_deform(&cfg, m, t, &out, verify)
        }
        Command::DeformSeq {
            config,
            out,
            schedule,
            verify,
        } => {
            let cfg = config::load(&config)?;
            commands::cmd_deform_seq(&cfg, &schedule, &out, verify)
        }
        Command::Surgery(cmd) => {
            let (config, out, window, action) = match cmd {
                SurgeryCommand::Add {
                    config,
                    out,
                    mu,
                    c,
                    window,
                } => (config, out, window, SurgeryAction::Add { mu, c }),
                SurgeryCommand::Remove {
                    config,
                    out,
                    mu,
                    window,
                    norm_window,
                } => (config, out, window, SurgeryAction::Remove { mu, norm_window }),
                SurgeryCommand::Scale {
                    config,
                    out,
                    mu,
                    t,
                    window,
                } => (config, out, window, SurgeryAction::Scale { mu, t }),
                SurgeryCommand::Plan {
                    config,
                    out,
                    plan,
                    window,
                } => (config, out, window, SurgeryAction::Plan { path: plan }),
            };
            let cfg = config::load(&config)?;
            commands::cmd_surgery(&cfg, &action, window, &out)
        }
        Command::Fit {
            config,
            out,
            targets,
            iters,
            lr,
        } => {
            let cfg = config::load(&config)?;
            commands::cmd_fit(&cfg, &targets, iters, lr, &out)
        }
        Command::Verify { suite } => {
            let checks = verify::run_suite(&suite)?;
            if verify::print_report(&checks) {
                Ok(())
            } else {
                anyhow::bail!("{} check(s) failed", checks.iter().filter(|c| !c.pass()).count())
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
