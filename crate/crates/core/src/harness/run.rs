use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ScenarioConfig, ISTA_LABEL};
use super::HarnessError;
use crate::beamtraining::{fpbt, los_assessment, SweepPlan};
use crate::channel::{compute_paths, AwvConfig, ChannelTap, SimChannel};
use crate::frames::IftmrParams;
use crate::geom::{wrap_degrees, Vec3};
use crate::golay::{golay_pair, GolaySequencePair};
use crate::rng::{derive_seed, label_index, stream};
use crate::session::{run_session, Phase, SessionScenario};
use crate::solver::{first_wall_hit, position_error, position_los, position_nlos, AngleEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub aoa_error_deg: f64,
    pub position_error_cm: f64,
    pub distance_error_cm: f64,
    pub los_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RstaResult {
    pub label: String,
    pub samples: Vec<Sample>,
}

/// Samples per RSTA, in configuration order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunResult {
    pub per_rsta: Vec<RstaResult>,
}

impl RunResult {
    pub fn get(&self, label: &str) -> Option<&[Sample]> {
        self.per_rsta
            .iter()
            .find(|r| r.label == label)
            .map(|r| r.samples.as_slice())
    }

    pub fn position_errors_cm(&self, label: &str) -> Option<Vec<f64>> {
        self.get(label).map(|s| s.iter().map(|x| x.position_error_cm).collect())
    }
}

/// Everything computed once per RSTA and shared by all repetitions.
struct Prepared {
    label: String,
    seed_label: u64,
    truth: Vec3,
    channel: SimChannel,
    plan: SweepPlan,
}

/// One I2R channel per RSTA; FPBT candidates steer at each path's AoD.
fn prepare(config: &ScenarioConfig) -> Result<Vec<Prepared>, HarnessError> {
    let geometry = config.placed_geometry();
    config
        .rsta_specs
        .iter()
        .map(|spec| {
            let taps = compute_paths(&geometry, ISTA_LABEL, &spec.label)?;
            if taps.is_empty() {
                return Err(HarnessError::NoPath(spec.label.clone()));
            }
            let candidates = taps
                .iter()
                .enumerate()
                .map(|(i, t)| AwvConfig::new(i as u16 + 1, t.aod.azimuth_deg, t.aod.elevation_deg))
                .collect();
            let plan = SweepPlan::fitted(candidates, config.awv_group_size)?;
            Ok(Prepared {
                label: spec.label.clone(),
                seed_label: label_index(&spec.label),
                truth: spec.position,
                channel: SimChannel::new(taps, config.array, config.array.quasi_omni()),
                plan,
            })
        })
        .collect()
}

/// The channel tap whose departure direction the chosen AWV steers at.
fn steered_tap<'a>(taps: &'a [ChannelTap], awv: &AwvConfig) -> &'a ChannelTap {
    &taps[usize::from(awv.awv_id) - 1]
}

fn one_trial(
    config: &ScenarioConfig,
    prep: &Prepared,
    pair: &GolaySequencePair,
    repetition: usize,
) -> Result<Sample, HarnessError> {
    let seed = derive_seed(config.seed, &[repetition as u64, prep.seed_label]);
    let snr = config.noise.snr();
    let best = fpbt(&prep.channel, &prep.plan, pair, snr, derive_seed(seed, &[0]))?;
    let los = los_assessment(&prep.channel, &best.awv, pair, snr, derive_seed(seed, &[1]))?;
    let is_los = los.is_los();

    let mut scenario = SessionScenario::new(prep.channel.clone(), pair.clone(), best.awv);
    scenario.snr_db = snr;
    scenario.clock = config.noise.clock();
    scenario.angle_noise = config.noise.angle_model(is_los);
    scenario.los_likelihood = Some(los.likelihood);
    let params = IftmrParams {
        request_i2r_aod: true,
        request_r2i_aod: true,
        ..IftmrParams::default()
    };
    let state = run_session(&scenario, &params, derive_seed(seed, &[2]));
    if state.phase != Phase::Done {
        return Err(HarnessError::Session {
            label: prep.label.clone(),
            repetition,
            phase: format!("{:?}", state.phase),
        });
    }
    let mut distance = state.distance_m()?;
    if config.legacy_mismatch {
        let normal = Normal::new(0.0, config.tof_mismatch_sigma_cm / 100.0).expect("sigma validated");
        distance += normal.sample(&mut stream(seed, &[3]));
    }
    let angle: AngleEstimate = *state.i2r_aods.last().ok_or_else(|| HarnessError::Session {
        label: prep.label.clone(),
        repetition,
        phase: "no angle estimate".into(),
    })?;

    let anchor = config.ista_position;
    let los_fix = || position_los(anchor, distance, &angle);
    let estimate = if is_los {
        los_fix()?
    } else {
        match first_wall_hit(&config.geometry.room, anchor, &angle)
            .ok_or(crate::solver::SolverError::RayMissesWall)
            .and_then(|(_, wall, _)| position_nlos(anchor, distance, &angle, &wall))
        {
            Ok((p, _)) => p,
            Err(_) => los_fix()?,
        }
    };

    let tap = steered_tap(&prep.channel.taps, &best.awv);
    Ok(Sample {
        aoa_error_deg: wrap_degrees(angle.azimuth_deg - tap.aod.azimuth_deg).abs(),
        position_error_cm: position_error(estimate, prep.truth) * 100.0,
        distance_error_cm: (distance - tap.path_length_m).abs() * 100.0,
        los_likelihood: los.likelihood,
    })
}

/// Monte Carlo over repetitions and RSTAs. Trials run in parallel; each one
/// seeds from `(seed, repetition, label)`, so results do not depend on
/// scheduling.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunResult, HarnessError> {
    config.validate()?;
    let pair = golay_pair(config.golay_length)?;
    let prepared = prepare(config)?;
    let jobs: Vec<(usize, usize)> = (0..prepared.len())
        .flat_map(|r| (0..config.repetitions).map(move |rep| (r, rep)))
        .collect();
    let samples = jobs
        .par_iter()
        .map(|&(r, rep)| one_trial(config, &prepared[r], &pair, rep))
        .collect::<Result<Vec<_>, _>>()?;
    let per_rsta = prepared
        .iter()
        .zip(samples.chunks(config.repetitions))
        .map(|(p, chunk)| RstaResult {
            label: p.label.clone(),
            samples: chunk.to_vec(),
        })
        .collect();
    Ok(RunResult { per_rsta })
}
