//! `rmab`: command-line front end.

mod commands;
mod config;
mod output;
mod policies;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{RunOpts, Source};
use config::ConfigError;

#[derive(Parser)]
#[command(name = "rmab", version, about = "Restless multi-armed bandit planning and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for replications (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Directory for output files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the mean-field LP from the start state.
    Solve {
        #[command(flatten)]
        source: Source,
        /// First period of the LP.
        #[arg(long, default_value_t = 0)]
        t0: usize,
        /// Also write the LP in text form.
        #[arg(long)]
        dump_lp: bool,
    },
    /// Simulate a single policy.
    Simulate {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        run: RunOpts,
        /// Write every trajectory to records.csv.
        #[arg(long)]
        records: bool,
    },
    /// Simulate several policies and compare them.
    Compare {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        run: RunOpts,
        /// Write every trajectory to records.csv.
        #[arg(long)]
        records: bool,
    },
    /// Whittle indices, optionally with an indexability scan.
    Index {
        #[command(flatten)]
        source: Source,
        /// discounted, average or finite (default: discounted when gamma < 1).
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        scan: bool,
        #[arg(long, default_value_t = 2001)]
        points: usize,
    },
    /// Regenerate a published table or figure.
    Reproduce {
        /// Table number: 2 or 3
        #[arg(long)]
        table: Option<u8>,
        /// Figure number: 4
        #[arg(long)]
        figure: Option<u8>,
        /// Replications per policy and setting
        #[arg(long, default_value_t = 100)]
        reps: usize,
        /// Base seed; replication r uses seed + r
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Closed-form performance bounds for an instance.
    Bounds {
        #[command(flatten)]
        source: Source,
        /// Failure probability for the high-probability forms.
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Run everything a scenario file asks for.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        run: RunOpts,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<rmab::Error>() {
        Some(
            rmab::Error::Infeasible(_)
            | rmab::Error::Unbounded(_)
            | rmab::Error::IterationLimit(_)
            | rmab::Error::Numerical(_)
            | rmab::Error::InfeasibleAction { .. },
        ) => 3,
        Some(_) => 2,
        None => 1,
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global()?;
    }
    let out = cli.out.as_deref();
    match cli.command {
        Command::Solve { source, t0, dump_lp } => commands::solve(&source, out, t0, dump_lp),
        Command::Simulate { source, mut run, records } => {
            let list = run.policies.get_or_insert_with(|| "mfp".into());
            if policies::split_list(list).len() != 1 {
                return Err(config::config_err("simulate takes exactly one policy; use compare for several"));
            }
            commands::compare(&source, &run, out, records, "simulate")
        }
        Command::Compare { source, run, records } => commands::compare(&source, &run, out, records, "compare"),
        Command::Index {
            source,
            mode,
            scan,
            points,
        } => commands::index(&source, out, mode.as_deref(), scan, points),
        Command::Reproduce {
            table,
            figure,
            reps,
            seed,
        } => commands::reproduce(out, table, figure, reps, seed),
        Command::Bounds { source, delta } => commands::bounds(&source, out, delta),
        Command::Run { config, run } => commands::run_config(&config, &run, out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("RMAB_MFP_LOG")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
