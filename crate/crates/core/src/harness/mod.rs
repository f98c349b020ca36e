//! Scenario configuration, Monte Carlo runner and report output.

pub mod config;
pub mod report;
pub mod run;

use std::path::Path;

use thiserror::Error;

pub use config::{
    comparison_label, comparison_scenario, room_scenario, AoaDistribution, NoiseConfig, RstaSpec, ScenarioConfig,
    Visibility, COMPARISON_DISTANCES_M, ISTA_LABEL,
};
pub use report::{
    compare_report, emit_csv, parse_csv, read_csv, summary_table, write_csv, Baseline, BASELINES,
    MEASURED_80211AZ,
};
pub use run::{run_scenario, RstaResult, RunResult, Sample};

use crate::beamtraining::BeamError;
use crate::channel::ChannelError;
use crate::golay::GolayError;
use crate::session::SessionError;
use crate::solver::SolverError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(String),
    #[error("no comparison run for {0} m")]
    MissingScenario(f64),
    #[error("no propagation path to {0}")]
    NoPath(String),
    #[error("{label}, repetition {repetition}: session ended in {phase}")]
    Session {
        label: String,
        repetition: usize,
        phase: String,
    },
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Beam(#[from] BeamError),
    #[error(transparent)]
    Golay(#[from] GolayError),
    #[error(transparent)]
    SessionFailure(#[from] SessionError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Csv(e.to_string())
    }
}

/// Runs every comparison distance with the settings of `template`
/// (noise, repetitions, seed, mismatch flag).
pub fn run_comparison(template: &ScenarioConfig) -> Result<Vec<(f64, RunResult)>, HarnessError> {
    COMPARISON_DISTANCES_M
        .iter()
        .map(|&d| {
            let config = ScenarioConfig {
                noise: template.noise,
                repetitions: template.repetitions,
                seed: template.seed,
                legacy_mismatch: template.legacy_mismatch,
                tof_mismatch_sigma_cm: template.tof_mismatch_sigma_cm,
                ..comparison_scenario(d)
            };
            Ok((d, run_scenario(&config)?))
        })
        .collect()
}

/// Writes `<name>.csv` and `<name>_summary.txt` into `dir`.
pub fn write_outputs(dir: &Path, name: &str, result: &RunResult) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    emit_csv(result, &dir.join(format!("{name}.csv")))?;
    std::fs::write(dir.join(format!("{name}_summary.txt")), summary_table(result)?)?;
    Ok(())
}
