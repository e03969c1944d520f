//! Command-line front end: single-point runs, parameter sweeps and the
//! oracle self-check.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gfma::coarse_dd::write_trace_csv;
use gfma::harness::{self, Scheme, Simulation, SweepTable, SweepVar};
use gfma::{validation, SystemConfig};

#[derive(Parser)]
#[command(name = "gfma", version, about = "Grant-free massive access link-level simulator")]
#[command(after_help = "Trials run in parallel; set GFMA_WORKERS to cap the worker threads.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo run at the configured operating point.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Overrides the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "proposed")]
        schemes: String,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Writes the coarse-detection iteration trace of trial 0 here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Sweeps one parameter over a list of values.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// One of T, M, rho, N_iter, scheme.
        #[arg(long)]
        var: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
        #[arg(long, default_value = "proposed")]
        schemes: String,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs the built-in oracle suites and prints one line per check.
    OracleCheck {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn load(config: &PathBuf, seed: Option<u64>) -> gfma::Result<SystemConfig> {
    let mut cfg = SystemConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn emit(table: &SweepTable, out: Option<&PathBuf>) -> io::Result<()> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            table.write_csv(&mut w)?;
            w.flush()
        }
        None => table.write_csv(io::stdout().lock()),
    }
}

fn write_trace(cfg: &SystemConfig, path: &PathBuf) -> Result<(), String> {
    let sim = Simulation::new(cfg.clone()).map_err(|e| e.to_string())?;
    let mut opts = sim.opts.coarse.clone();
    opts.trace = true;
    let mut rng = gfma::rng::substream(cfg.seed, gfma::rng::domain::TRIAL, 0);
    let channel = gfma::channel::generate_channel(&mut rng, cfg);
    let codes = gfma::sysmodel::SpreadingCodes {
        matrix: sim.codes.clone(),
        kind: cfg.code_kind,
    };
    let (_, truth) =
        gfma::uplink::transmit_frame(&mut rng, cfg, &sim.constellation, &channel, &codes).map_err(|e| e.to_string())?;
    let yb = truth.y.slice(ndarray::s![cfg.beacon(), .., ..]);
    let res = gfma::coarse_dd::coarse_detect(&yb, &sim.codes.view(), &sim.constellation, &opts).map_err(|e| e.to_string())?;
    let f = File::create(path).map_err(|e| e.to_string())?;
    write_trace_csv(BufWriter::new(f), &res.trace).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<(), String> = match cli.command {
        Command::Run {
            config,
            trials,
            seed,
            schemes,
            out,
            trace,
        } => (|| {
            let cfg = load(&config, seed).map_err(|e| e.to_string())?;
            let schemes = Scheme::parse_list(&schemes).map_err(|e| e.to_string())?;
            if let Some(path) = &trace {
                write_trace(&cfg, path)?;
            }
            let table = harness::run(&cfg, &schemes, trials).map_err(|e| e.to_string())?;
            emit(&table, out.as_ref()).map_err(|e| e.to_string())
        })(),
        Command::Sweep {
            config,
            var,
            values,
            schemes,
            trials,
            seed,
            out,
        } => (|| {
            let cfg = load(&config, seed).map_err(|e| e.to_string())?;
            let var: SweepVar = var.parse().map_err(|e: gfma::Error| e.to_string())?;
            let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
            let schemes = Scheme::parse_list(&schemes).map_err(|e| e.to_string())?;
            let table = harness::sweep(&cfg, var, &values, &schemes, trials).map_err(|e| e.to_string())?;
            emit(&table, out.as_ref()).map_err(|e| e.to_string())
        })(),
        Command::OracleCheck { seed } => {
            let reports = validation::run_all(seed);
            let mut failed = 0;
            for r in &reports {
                println!("{r}");
                failed += usize::from(!r.passed);
            }
            println!("{} checks, {} failed", reports.len(), failed);
            if failed == 0 {
                Ok(())
            } else {
                Err(format!("{failed} oracle check(s) failed"))
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
