use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ieq_fem::assembly::set_assembly_threads;
use ieq_fem::config::load_config;
use ieq_fem::driver::{format_bench_table, format_mms_table, run_bench, run_mms, run_simulation, MmsMode, MmsStudy, RunOptions};
use ieq_fem::ieq::{Method, Scheme};
use ieq_fem::mms::MmsStart;
use ieq_fem::potential::Equation;
use ieq_fem::{Error, Result};

#[derive(Parser)]
#[command(name = "ieqfem", version, about = "IEQ finite-element solver for Cahn-Hilliard and Allen-Cahn")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation described by a TOML config.
    Run {
        config: PathBuf,
        /// Fail on the first energy-identity, slack or mass violation.
        #[arg(long)]
        strict: bool,
        /// Skip CSV, VTK and manifest output.
        #[arg(long)]
        no_output: bool,
    },
    /// Manufactured-solution convergence study.
    Mms {
        /// ch or ac
        equation: String,
        #[arg(long, default_value = "bdf1")]
        scheme: String,
        #[arg(long, default_value = "2")]
        method: String,
        #[arg(long, default_value = "temporal")]
        mode: String,
        #[arg(long, default_value_t = 4)]
        levels: usize,
        /// Polynomial degree (default 2 temporal, 1 spatial).
        #[arg(long)]
        degree: Option<usize>,
        /// Cells per side (temporal) or coarsest cells per side (spatial).
        #[arg(long)]
        n: Option<usize>,
        /// Coarsest step (temporal) or fixed step (spatial).
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
        /// Two-level start for BDF2/CN: bootstrap, exact or repeat.
        #[arg(long, default_value = "bootstrap")]
        start: String,
    },
    /// Time the same run under several methods.
    Bench {
        config: PathBuf,
        #[arg(long, default_value = "1,2,3", value_delimiter = ',')]
        methods: Vec<String>,
    },
}

fn parse_equation(s: &str) -> Result<Equation> {
    match s {
        "ch" => Ok(Equation::CahnHilliard),
        "ac" => Ok(Equation::AllenCahn),
        _ => Err(Error::config("equation", format!("expected ch or ac, got {s:?}"))),
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, strict, no_output } => {
            let (cfg, v, text) = load_config(&config)?;
            let s = run_simulation(&cfg, &v, &text, RunOptions { strict, no_output })?;
            let first = &s.rows[0];
            let last = s.rows.last().expect("initial row");
            println!("steps      {}", s.steps);
            println!("t          {:.6e}", last.t);
            println!("energy     {:.12e} -> {:.12e}", first.energy, last.energy);
            println!("mass       {:.12e} -> {:.12e}", first.mass, last.mass);
            println!("wall [s]   {:.3}", s.wall.as_secs_f64());
            for (step, msg) in s.violations.iter().take(5) {
                eprintln!("warning: step {step}: {msg}");
            }
            if s.violations.len() > 5 {
                eprintln!("warning: {} more violations", s.violations.len() - 5);
            }
        }
        Command::Mms { equation, scheme, method, mode, levels, degree, n, dt, t_end, start } => {
            let mut study = MmsStudy::new(
                parse_equation(&equation)?,
                scheme.parse::<Scheme>()?,
                method.parse::<Method>()?,
                mode.parse::<MmsMode>()?,
                levels,
            );
            study.degree = degree;
            study.n = n;
            study.dt = dt;
            study.t_end = t_end;
            study.start = start.parse::<MmsStart>()?;
            let rows = run_mms(&study)?;
            print!("{}", format_mms_table(&study, &rows));
        }
        Command::Bench { config, methods } => {
            let (cfg, v, _) = load_config(&config)?;
            let methods = methods.iter().map(|m| m.parse::<Method>()).collect::<Result<Vec<_>>>()?;
            let rows = run_bench(&cfg, &v, &methods)?;
            print!("{}", format_bench_table(&rows));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    if let Some(n) = std::env::var("THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        set_assembly_threads(n);
    }
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
