//! `dnls-lab`: batch driver for the soliton, spectral, evolution,
//! instability and gKdV pipelines of `dnls-core`.
//!
//! Exit codes: 0 ok, 2 bad input, 3 spectrum, 4 evolve, 5 instability,
//! 6 gkdv.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dnls_core::soliton::{classify_params, Regime};
use dnls_core::Exec;

use commands::CliError;
use config::{EvolveCfg, GkdvCfg, GridCfg, InitialData, InstabilityCfg, ParamsCfg, RunConfig, SolitonCfg, SpectrumCfg};
use output::{read_config, write_config, RunWriter};

#[derive(Parser)]
#[command(name = "dnls-lab", version, about = "Numerical lab for the derivative NLS with a quintic term")]
struct Cli {
    /// Root directory for run outputs.
    #[arg(long, global = true, env = "DNLS_LAB_OUT", default_value = "out")]
    out: PathBuf,
    /// Disable the rayon thread pool.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct ParamArgs {
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    #[arg(long, default_value_t = 1.0)]
    omega: f64,
    /// Wave speed.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "kappa0")]
    c: Option<f64>,
    /// Use the degenerate speed `c = 2 kappa0(b) sqrt(omega)`.
    #[arg(long)]
    kappa0: bool,
}

impl ParamArgs {
    fn cfg(&self, default_kappa0: bool) -> ParamsCfg {
        ParamsCfg {
            b: self.b,
            omega: self.omega,
            c: self.c,
            kappa0: self.kappa0 || (default_kappa0 && self.c.is_none()),
        }
    }

    fn is_endpoint(&self) -> bool {
        self.c
            .is_some_and(|c| classify_params(self.b, self.omega, c).regime == Regime::Endpoint)
    }
}

#[derive(Args, Clone, Copy)]
struct GridArgs {
    /// Grid nodes (even).
    #[arg(long)]
    n: Option<usize>,
    /// Box is `[-L, L)`.
    #[arg(long)]
    half_width: Option<f64>,
}

impl GridArgs {
    fn cfg(&self, n: usize, half_width: f64) -> GridCfg {
        GridCfg {
            n: self.n.unwrap_or(n),
            half_width: self.half_width.unwrap_or(half_width),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Profile, phase, conserved quantities and stationary residuals.
    Soliton {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Dense spectrum of the gauge-transformed linearized operator.
    Spectrum {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Check the factorized quadratic form on random fields.
        #[arg(long = "check-2-9")]
        check_form: bool,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        /// Random fields for the coercivity probe (0 to skip).
        #[arg(long, default_value_t = 0)]
        coercivity: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Time evolution with conserved-quantity monitoring.
    Evolve {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Evolve the exact soliton and report its tracking error (default data).
        #[arg(long)]
        soliton_check: bool,
        /// Perturb the soliton by unstable data of relative H^1 size DELTA and track it.
        #[arg(long, conflicts_with_all = ["soliton_check", "gaussian"])]
        delta: Option<f64>,
        /// Gaussian data `A exp(-x^2 / (2 w^2))`, given as `A,w`.
        #[arg(long, value_parser = parse_pair, conflicts_with = "soliton_check")]
        gaussian: Option<(f64, f64)>,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
        #[arg(long, default_value_t = 50)]
        record_every: usize,
        #[arg(long, default_value_t = 2.0 / 3.0)]
        dealias: f64,
        /// Grid nodes for the negative eigenvector (perturbed data).
        #[arg(long, default_value_t = 1024)]
        chi_n: usize,
    },
    /// Tube-exit experiment at the degenerate soliton.
    Instability {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// `||eps0||_{H^1} / ||phi||_{H^1}`.
        #[arg(long, default_value_t = 1e-2)]
        delta: f64,
        /// Comma-separated deltas, run in parallel into separate directories.
        #[arg(long, value_delimiter = ',', conflicts_with = "delta")]
        sweep: Option<Vec<f64>>,
        /// Tube radius over `||phi||_{H^1}`.
        #[arg(long, default_value_t = 0.1)]
        alpha_frac: f64,
        /// Start with `(eps0, phi) < 0`.
        #[arg(long)]
        negative: bool,
        #[arg(long, default_value_t = 2e-3)]
        dt: f64,
        /// Give up if the tube has not been left by then.
        #[arg(long, default_value_t = 50.0)]
        t_end: f64,
        #[arg(long, default_value_t = 25)]
        record_every: usize,
        #[arg(long, default_value_t = 1024)]
        chi_n: usize,
        #[arg(long, default_value_t = 1e-12)]
        slope_tol: f64,
    },
    /// Identity suite for the gKdV ground state.
    Gkdv {
        #[command(flatten)]
        grid: GridArgs,
        /// Accepted for symmetry; the identity table is always produced.
        #[arg(long)]
        identities: bool,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1e-6)]
        kernel_tol: f64,
    },
    /// Rerun a saved `config.json`.
    Replay { config: PathBuf },
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected A,w")?;
    Ok((
        a.trim().parse().map_err(|e| format!("{e}"))?,
        b.trim().parse().map_err(|e| format!("{e}"))?,
    ))
}

fn build_config(cmd: Command) -> Result<RunConfig, CliError> {
    Ok(match cmd {
        Command::Soliton { params, grid } => {
            let (n, l) = if params.is_endpoint() { (16384, 400.0) } else { (2048, 30.0) };
            RunConfig::Soliton(SolitonCfg {
                params: params.cfg(false),
                grid: grid.cfg(n, l),
            })
        }
        Command::Spectrum {
            params,
            grid,
            check_form,
            trials,
            coercivity,
            seed,
        } => RunConfig::Spectrum(SpectrumCfg {
            params: params.cfg(false),
            grid: grid.cfg(1024, 30.0),
            form_trials: check_form.then_some(trials),
            coercivity_trials: coercivity,
            seed,
        }),
        Command::Evolve {
            params,
            grid,
            soliton_check: _,
            delta,
            gaussian,
            dt,
            t_end,
            record_every,
            dealias,
            chi_n,
        } => {
            let data = match (delta, gaussian) {
                (Some(d), _) => InitialData::Perturbed { delta_frac: d, chi_n },
                (None, Some((amplitude, width))) => InitialData::Gaussian { amplitude, width },
                (None, None) => InitialData::Soliton,
            };
            RunConfig::Evolve(EvolveCfg {
                params: params.cfg(false),
                grid: grid.cfg(1024, 30.0),
                data,
                dt,
                t_end,
                record_every,
                dealias,
            })
        }
        Command::Instability {
            params,
            grid,
            delta,
            sweep,
            alpha_frac,
            negative,
            dt,
            t_end,
            record_every,
            chi_n,
            slope_tol,
        } => RunConfig::Instability(InstabilityCfg {
            params: params.cfg(true),
            grid: grid.cfg(1024, 30.0),
            deltas: sweep.unwrap_or_else(|| vec![delta]),
            alpha_frac,
            sign: if negative { -1.0 } else { 1.0 },
            dt,
            t_end,
            record_every,
            chi_n,
            slope_tol,
        }),
        Command::Gkdv {
            grid,
            identities: _,
            trials,
            seed,
            kernel_tol,
        } => RunConfig::Gkdv(GkdvCfg {
            grid: grid.cfg(1024, 40.0),
            trials,
            seed,
            kernel_tol,
        }),
        Command::Replay { config } => read_config(&config).map_err(|e| CliError::new(2, e))?,
    })
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };
    let cfg = build_config(cli.command)?;
    let dir = cli.out.join(format!("{}-{}", cfg.name(), &cfg.hash()[..12]));
    let io = CliError::io(cfg.exit_code());
    write_config(&dir, &cfg).map_err(&io)?;
    let writer = RunWriter::new(dir.clone(), &cfg).map_err(&io)?;
    let lines = commands::run(&cfg, &writer, exec)?;
    for l in lines {
        println!("{l}");
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dnls-lab: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
