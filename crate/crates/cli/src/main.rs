use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use iatf_cli::config::Config;
use iatf_cli::error::{CliError, Result};
use iatf_cli::report::{chain_csv, real, write_csv, write_file};
use iatf_cli::sweep::{run_sweep, SweepKind, SweepSpec};
use iatf_core::battery_chain::{build_transition_matrix, steady_state};
use iatf_core::outage::{analyze, direct_baseline, optimize_threshold};
use iatf_core::simulator::simulate_with;
use iatf_core::{Mode, SimOptions};

/// Outage analysis and simulation of incremental accumulate-then-forward
/// relaying with an energy-harvesting relay.
#[derive(Parser)]
#[command(name = "iatf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form outage at a single operating point.
    Analyze {
        /// TOML config; defaults apply to missing keys (all of them if omitted).
        config: Option<PathBuf>,
    },
    /// Runs a sweep over `p_s_dbm_grid` or `e_t_grid` and writes CSV.
    Sweep {
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the kind inferred from the grid key.
        #[arg(long, value_enum)]
        kind: Option<SweepKind>,
    },
    /// Monte Carlo run at a single operating point.
    Simulate {
        config: Option<PathBuf>,
        /// Defaults to `mc_blocks` from the config.
        #[arg(long)]
        blocks: Option<u64>,
        /// Defaults to `seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Track harvested energy exactly instead of in discrete levels.
        #[arg(long)]
        continuous_battery: bool,
    },
    /// Exhaustive search for the outage-minimizing threshold level.
    Optimize { config: Option<PathBuf> },
    /// Writes the transition matrix and steady state as CSV.
    DumpChain {
        config: Option<PathBuf>,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

fn stdout_write(bytes: &[u8]) -> Result<()> {
    std::io::stdout()
        .write_all(bytes)
        .map_err(|e| CliError::io("<stdout>", e))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze { config } => {
            let cfg = load(config.as_deref())?;
            let pt = cfg.point()?;
            let (out, pi) = analyze(&pt.params, &pt.links, &pt.thr, &pt.battery)?;
            println!("eps_t_level = {}", pt.battery.eps_t_level());
            println!("p_e = {}", real(out.p_e));
            println!("p_mode3_joint = {}", real(out.p_mode3_joint));
            println!("p_mode4_joint = {}", real(out.p_mode4_joint));
            println!("p_out = {}", real(out.p_out));
            if cfg.include_baseline {
                println!("baseline_outage = {}", real(direct_baseline(&pt.params, &pt.links, &pt.thr)));
            }
            println!("solver = {:?}", pi.solver);
        }
        Command::Sweep { config, out, kind } => {
            let spec = SweepSpec::new(load(config.as_deref())?, kind)?;
            let rows = run_sweep(&spec)?;
            write_csv(&rows, &out)?;
            eprintln!("wrote {} rows to {}", rows.len(), out.display());
        }
        Command::Simulate {
            config,
            blocks,
            seed,
            continuous_battery,
        } => {
            let cfg = load(config.as_deref())?;
            let pt = cfg.point()?;
            let blocks = blocks.unwrap_or(cfg.mc_blocks);
            if blocks == 0 {
                return Err(CliError::Validation("`--blocks` must be >= 1".into()));
            }
            let opts = SimOptions {
                warmup_blocks: cfg.warmup_blocks,
                continuous_battery,
                stream: 0,
            };
            let seed = seed.unwrap_or(cfg.seed);
            let sim = simulate_with(&pt.params, &pt.links, &pt.thr, &pt.battery, blocks, seed, &opts);
            println!("blocks = {}", sim.blocks);
            println!("seed = {}", sim.seed);
            println!("outages = {}", sim.outages);
            println!("outage_estimate = {}", real(sim.outage_estimate));
            println!("stderr = {}", real(sim.stderr));
            for m in Mode::ALL {
                println!("mode_{m:?}_frequency = {}", real(sim.mode_frequency(m)));
            }
        }
        Command::Optimize { config } => {
            let cfg = load(config.as_deref())?;
            let pt = cfg.point()?;
            let s = optimize_threshold(&pt.params, &pt.links, &pt.thr, cfg.capacity, cfg.levels)?;
            for w in &s.warnings {
                eprintln!("warning: {w}");
            }
            println!("best_level = {}", s.best_level);
            println!("best_e_t = {}", real(cfg.capacity * s.best_level as f64 / cfg.levels as f64));
            println!("best_outage = {}", real(s.best_outage));
        }
        Command::DumpChain { config, out } => {
            let cfg = load(config.as_deref())?;
            let pt = cfg.point()?;
            let z = build_transition_matrix(&pt.params, &pt.links, &pt.thr, &pt.battery)?;
            let pi = steady_state(&z)?;
            let bytes = chain_csv(&z, &pi);
            match out {
                Some(path) => write_file(&path, &bytes)?,
                None => stdout_write(&bytes)?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
