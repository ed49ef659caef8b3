use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use eebc::experiments::{
    antenna_csv, convergence_csv, distance_csv, run_convergence, sweep_antennas, sweep_distance,
    SolveReport,
};
use eebc::{Error, Result, ScenarioConfig, SolverConfig};

#[derive(Parser)]
#[command(name = "eebc", version, about = "Energy-efficient iterative waterfilling for the MIMO broadcast channel")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// EE after each full sweep of the iterative waterfilling.
    Converge {
        #[command(flatten)]
        common: Common,
    },
    /// Mean EE over channel drops for each (M, K) pair.
    SweepAntennas {
        #[command(flatten)]
        common: Common,
        /// Comma-separated BS antenna counts.
        #[arg(long)]
        m_list: String,
        /// Comma-separated user counts.
        #[arg(long)]
        k_list: String,
        #[arg(long, default_value_t = 100)]
        drops: usize,
    },
    /// Mean EE over channel drops for each (distance, M) pair.
    SweepDistance {
        #[command(flatten)]
        common: Common,
        /// Comma-separated distances in km.
        #[arg(long)]
        d_list: String,
        /// Comma-separated BS antenna counts.
        #[arg(long)]
        m_list: String,
        #[arg(long, default_value_t = 100)]
        drops: usize,
    },
    /// Solve one scenario and write a TOML report.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Also map the result to downlink covariances.
        #[arg(long)]
        emit_bc_covariances: bool,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML key/value).
    #[arg(long)]
    scenario: PathBuf,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the scenario seed (base seed for sweeps).
    #[arg(long)]
    seed: Option<u64>,
    /// Sweeps to run (`converge`) or the sweep limit (other commands).
    #[arg(long)]
    max_iters: Option<usize>,
    /// Relative EE change that counts as converged.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

impl Common {
    fn scenario(&self) -> Result<ScenarioConfig> {
        let mut cfg = ScenarioConfig::load(&self.scenario)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }

    fn solver(&self) -> SolverConfig {
        let defaults = SolverConfig::default();
        SolverConfig {
            max_iterations: self.max_iters.unwrap_or(defaults.max_iterations),
            rel_tolerance: self.tol,
            ..defaults
        }
    }

    fn write(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(path) => write_file(path, text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(Error::from)
}

fn parse_list<T: std::str::FromStr>(flag: &str, text: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::Config(format!("--{flag}: cannot parse '{s}'")))
        })
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Converge { common } => {
            let cfg = common.scenario()?;
            let ee = run_convergence(&cfg, common.max_iters.unwrap_or(50))?;
            common.write(&convergence_csv(&ee))
        }
        Command::SweepAntennas {
            common,
            m_list,
            k_list,
            drops,
        } => {
            let cfg = common.scenario()?;
            let rows = sweep_antennas(
                &cfg,
                &parse_list("m-list", &m_list)?,
                &parse_list("k-list", &k_list)?,
                drops,
                cfg.seed,
                &common.solver(),
            )?;
            common.write(&antenna_csv(&rows))
        }
        Command::SweepDistance {
            common,
            d_list,
            m_list,
            drops,
        } => {
            let cfg = common.scenario()?;
            let rows = sweep_distance(
                &cfg,
                &parse_list("d-list", &d_list)?,
                &parse_list("m-list", &m_list)?,
                drops,
                cfg.seed,
                &common.solver(),
            )?;
            common.write(&distance_csv(&rows))
        }
        Command::Solve {
            common,
            emit_bc_covariances,
        } => {
            let cfg = common.scenario()?;
            let (report, _) = SolveReport::build(&cfg, &common.solver(), emit_bc_covariances)?;
            common.write(&report.to_toml()?)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
