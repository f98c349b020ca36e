use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use ngp_core::harness::{
    compare_report, comparison_label, room_scenario, run_comparison, run_scenario, summary_table, write_outputs,
    RunResult, ScenarioConfig,
};

#[derive(Parser)]
#[command(name = "ngp-sim", version, about = "mmWave FTM positioning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct Overrides {
    /// Base seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo repetitions per RSTA.
    #[arg(long, global = true)]
    repetitions: Option<usize>,
    /// Draw range noise independently of the angle estimate.
    #[arg(long, global = true)]
    legacy_mismatch: bool,
}

impl Overrides {
    fn apply(self, mut config: ScenarioConfig) -> ScenarioConfig {
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(n) = self.repetitions {
            config.repetitions = n;
        }
        config.legacy_mismatch |= self.legacy_mismatch;
        config
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a JSON config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Six-RSTA room scenario plus the distance comparison.
    ReproduceFig4 {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Simulated percentiles at the comparison distances next to reference rows.
    Compare {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print the built-in six-RSTA scenario as JSON.
    DefaultConfig,
}

fn comparison(out: &Path, template: &ScenarioConfig) -> Result<String> {
    let results = run_comparison(template)?;
    for (d, r) in &results {
        write_outputs(out, &format!("compare_{}", comparison_label(*d)), r)?;
    }
    let table = compare_report(&results)?;
    std::fs::write(out.join("comparison.txt"), &table).context("writing comparison table")?;
    Ok(table)
}

fn simulate(out: &Path, name: &str, config: &ScenarioConfig) -> Result<RunResult> {
    let result = run_scenario(config)?;
    write_outputs(out, name, &result)?;
    Ok(result)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { config, out, overrides } => {
            let cfg = overrides.apply(
                ScenarioConfig::load(&config).with_context(|| format!("loading {}", config.display()))?,
            );
            let name = config
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("scenario")
                .to_owned();
            let result = simulate(&out, &name, &cfg)?;
            print!("{}", summary_table(&result)?);
        }
        Command::ReproduceFig4 { out, overrides } => {
            let cfg = overrides.apply(room_scenario());
            let result = simulate(&out, "room", &cfg)?;
            print!("{}", summary_table(&result)?);
            println!();
            print!("{}", comparison(&out, &cfg)?);
        }
        Command::Compare { out, overrides } => {
            std::fs::create_dir_all(&out)?;
            print!("{}", comparison(&out, &overrides.apply(room_scenario()))?);
        }
        Command::DefaultConfig => println!("{}", room_scenario().to_json()),
    }
    Ok(())
}
