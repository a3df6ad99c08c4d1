use std::path::PathBuf;
use std::process::ExitCode;

use abpf_harness::commands::{cmd_bounds, cmd_diagnose_corr, cmd_stats};
use abpf_harness::scenario::PRESETS;
use abpf_harness::{load_scenario, preset, run_scenario, HarnessError, HarnessResult, Scenario};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "abpf", version, about = "Blocked particle filtering experiments on dynamic random fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one trajectory and run every selected engine on it.
    Run(Common),
    /// Boundary-distance statistics of the partition schedule.
    Stats(Common),
    /// Right-hand sides of the time-averaged bias bound.
    Bounds(Common),
    /// Brute-force correlation tables of the blocked exact filter.
    DiagnoseCorr(Common),
    /// List the shipped presets, or print one.
    Presets {
        #[arg(long)]
        show: Option<String>,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    scenario: Option<PathBuf>,
    /// Shipped preset name.
    #[arg(long)]
    preset: Option<String>,
    /// Overrides the scenario's master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "abpf-out")]
    out: PathBuf,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn load(&self) -> HarnessResult<Scenario> {
        if let Some(n) = self.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| HarnessError::Validation(e.to_string()))?;
        }
        let mut s = match (&self.scenario, &self.preset) {
            (Some(path), _) => load_scenario(path)?,
            (None, Some(name)) => preset(name)?,
            (None, None) => unreachable!("clap requires one of them"),
        };
        if let Some(seed) = self.seed {
            s.seed = Some(seed);
        }
        Ok(s)
    }
}

fn execute(cli: Cli) -> HarnessResult<()> {
    match cli.command {
        Command::Run(c) => {
            let s = c.load()?;
            let result = run_scenario(&s, &c.out)?;
            println!("scenario {} (seed {})", result.digest, result.seed);
            for path in &result.artifacts {
                println!("  wrote {}", path.display());
            }
            result.check()
        }
        Command::Stats(c) => {
            print!("{}", cmd_stats(&c.load()?, &c.out)?);
            Ok(())
        }
        Command::Bounds(c) => {
            print!("{}", cmd_bounds(&c.load()?, &c.out)?);
            Ok(())
        }
        Command::DiagnoseCorr(c) => {
            print!("{}", cmd_diagnose_corr(&c.load()?, &c.out)?);
            Ok(())
        }
        Command::Presets { show: None } => {
            for (name, _) in PRESETS {
                println!("{name}");
            }
            Ok(())
        }
        Command::Presets { show: Some(name) } => {
            print!("{}", preset(&name)?.to_toml()?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
