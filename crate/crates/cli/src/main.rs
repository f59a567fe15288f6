use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qpath_core::checks::quick_suite;
use qpath_core::harness::{
    aggregate, bdmc_curve_config, density_grid_config, format_summary, run_experiment_with,
    table1_config, write_grid_csv, write_jsonl, write_rows_csv, ExperimentConfig, ExperimentOutput,
    RunOptions,
};
use qpath_core::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "qpath",
    version,
    about = "Annealed importance sampling along q-paths"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (TOML). Used by `run` when no positional path is given.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Write CSV here, plus a JSON-lines mirror next to it. Defaults to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override the config's base_seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; 0 picks one per core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Suppress the summary table and progress messages.
    #[arg(long, global = true)]
    quiet: bool,

    /// Fill the wall_ms column. Output is then no longer byte-reproducible.
    #[arg(long, global = true)]
    timings: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a config file.
    Run {
        #[arg(value_name = "CONFIG")]
        path: Option<PathBuf>,
    },
    /// Partition-function table for the Gaussian pair N(-4, 3) -> N(4, 1).
    Table1 {
        /// Print the built-in config instead of running it.
        #[arg(long)]
        dump_config: bool,
    },
    /// BDMC bounds over T in {2, 5, 10, 25, 50, 100, 200}.
    BdmcCurve {
        #[arg(long)]
        dump_config: bool,
    },
    /// Log-density ridges of intermediate distributions.
    DensityGrid {
        #[arg(long)]
        dump_config: bool,
    },
    /// Quick numerical self-checks.
    Selftest,
}

enum Failure {
    Config(String),
    Numerical(String),
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } => Failure::Config(e.to_string()),
            Error::Io(_) => Failure::Other(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAILURE);
        }
    }
    match dispatch(&cli) {
        Ok(code) => code,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(EXIT_NUMERICAL)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<ExitCode, Failure> {
    let builtin = |cfg: ExperimentConfig, dump: bool| -> Result<ExitCode, Failure> {
        if dump {
            print!("{}", cfg.to_toml_string());
            return Ok(ExitCode::SUCCESS);
        }
        run(cli, cfg)
    };
    match &cli.command {
        Command::Run { path } => {
            let path = path.as_ref().or(cli.config.as_ref()).ok_or_else(|| {
                Failure::Config("no config given; pass a path or --config".into())
            })?;
            let cfg = load(path)?;
            run(cli, cfg)
        }
        Command::Table1 { dump_config } => builtin(table1_config(), *dump_config),
        Command::BdmcCurve { dump_config } => builtin(bdmc_curve_config(), *dump_config),
        Command::DensityGrid { dump_config } => builtin(density_grid_config(), *dump_config),
        Command::Selftest => selftest(cli),
    }
}

fn load(path: &Path) -> Result<ExperimentConfig, Failure> {
    ExperimentConfig::from_path(path).map_err(|e| match e {
        Error::Io(msg) => Failure::Config(msg),
        other => other.into(),
    })
}

fn run(cli: &Cli, mut cfg: ExperimentConfig) -> Result<ExitCode, Failure> {
    if let Some(seed) = cli.seed {
        cfg.base_seed = seed;
    }
    // Validate before any work so a bad field never leaves partial output.
    cfg.prepare()?;
    let output = run_experiment_with(
        &cfg,
        RunOptions {
            timings: cli.timings,
        },
    )?;
    write_output(cli, &output)?;
    if let ExperimentOutput::Runs(rows) = &output {
        if !cli.quiet {
            let summary = aggregate(rows, cfg.z_true)?;
            eprint!("{}", format_summary(&summary));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn write_output(cli: &Cli, output: &ExperimentOutput) -> Result<(), Failure> {
    let io_err = |e: io::Error| Failure::Other(e.to_string());
    match &cli.out {
        None => {
            let stdout = io::stdout().lock();
            write_csv(output, stdout)?;
        }
        Some(path) => {
            write_csv(output, BufWriter::new(File::create(path).map_err(io_err)?))?;
            let mirror = path.with_extension("jsonl");
            let mut w = BufWriter::new(File::create(&mirror).map_err(io_err)?);
            match output {
                ExperimentOutput::Runs(rows) => write_jsonl(rows, &mut w)?,
                ExperimentOutput::Grid(rows) => write_jsonl(rows, &mut w)?,
            }
            w.flush().map_err(io_err)?;
            if !cli.quiet {
                eprintln!("wrote {} and {}", path.display(), mirror.display());
            }
        }
    }
    Ok(())
}

fn write_csv<W: Write>(output: &ExperimentOutput, w: W) -> Result<(), Failure> {
    match output {
        ExperimentOutput::Runs(rows) => write_rows_csv(rows, w)?,
        ExperimentOutput::Grid(rows) => write_grid_csv(rows, w)?,
    }
    Ok(())
}

fn selftest(cli: &Cli) -> Result<ExitCode, Failure> {
    let reports = quick_suite(cli.seed.unwrap_or(0));
    let mut ok = true;
    for r in &reports {
        ok &= r.acceptable();
        if !cli.quiet || !r.acceptable() {
            println!("{}", r.line());
        }
    }
    Ok(if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILURE)
    })
}
