#![allow(dead_code)]

use std::path::PathBuf;

use ngp_core::beamtraining::{omni_awv, SweepPlan, MAIN_TAP_FRACTION, QUALITY_WINDOW};
use ngp_core::channel::{compute_paths, AwvConfig, Geometry, Link, PathKind, Room, SimChannel};
use ngp_core::frames::parse_hex_dump;
use ngp_core::geom::Vec3;
use ngp_core::golay::{golay_pair, GolaySequencePair};
use ngp_core::harness::{room_scenario, ISTA_LABEL};
use ngp_core::session::SessionScenario;
use num_complex::Complex64;
use rand::RngExt;
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> Vec<u8> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    parse_hex_dump(&text).expect("fixture is valid hex")
}

pub fn unhex(s: &str) -> Vec<u8> {
    hex::decode(s).expect("valid hex literal")
}

/// ISTA-to-RSTA channel of the built-in room scenario and an AWV steered
/// at the direct or first-bounce path.
pub fn room_channel(label: &str) -> (SimChannel, AwvConfig) {
    let config = room_scenario();
    let geometry = config.placed_geometry();
    let taps = compute_paths(&geometry, ISTA_LABEL, label).expect("paths");
    let first = &taps[0];
    let awv = AwvConfig::new(1, first.aod.azimuth_deg, first.aod.elevation_deg);
    (SimChannel::new(taps, config.array, config.array.quasi_omni()), awv)
}

/// Noiseless session scenario toward one RSTA of the room.
pub fn room_session(label: &str) -> SessionScenario {
    let (channel, awv) = room_channel(label);
    SessionScenario::new(channel, golay_pair(128).unwrap(), awv)
}

/// Aperiodic autocorrelation of a ±1 sequence, lags `0..n`.
pub fn autocorr(seq: &[i8]) -> Vec<i64> {
    (0..seq.len())
        .map(|k| {
            seq.iter()
                .zip(&seq[k..])
                .map(|(a, b)| i64::from(*a) * i64::from(*b))
                .sum()
        })
        .collect()
}

/// Full linear convolution of a ±1 sequence with a sparse channel.
pub fn convolve(seq: &[i8], taps: &[(usize, Complex64)], extra: usize) -> Vec<Complex64> {
    let span = taps.iter().map(|t| t.0).max().unwrap_or(0) + extra;
    let mut out = vec![Complex64::new(0.0, 0.0); seq.len() + span];
    for &(d, g) in taps {
        for (i, &s) in seq.iter().enumerate() {
            out[i + d] += g * f64::from(s);
        }
    }
    out
}

/// Sparse channel with 1 to 6 taps at distinct delays below 64 and gains
/// between 0.1 and 1 in magnitude.
pub fn random_taps(rng: &mut ChaCha8Rng) -> Vec<(usize, Complex64)> {
    let count = rng.random_range(1..=6);
    let mut taps: Vec<(usize, Complex64)> = Vec::new();
    while taps.len() < count {
        let d = rng.random_range(0..64);
        if taps.iter().any(|t| t.0 == d) {
            continue;
        }
        let mag = rng.random_range(0.1..1.0);
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        taps.push((d, Complex64::from_polar(mag, phase)));
    }
    taps.sort_by_key(|t| t.0);
    taps
}

/// Random two-station room; in the NLOS case a short panel across the
/// midpoint hides the direct path while some wall bounce survives.
pub struct RandomLink {
    pub geometry: Geometry,
    pub channel: SimChannel,
    pub plan: SweepPlan,
}

pub fn random_link(rng: &mut ChaCha8Rng, los: bool) -> RandomLink {
    let pair = room_scenario();
    loop {
        let room = Room {
            width_m: rng.random_range(5.0..14.0),
            depth_m: rng.random_range(4.0..9.0),
            height_m: 3.0,
        };
        let mut place = || {
            Vec3::new(
                rng.random_range(0.5..room.width_m - 0.5),
                rng.random_range(0.5..room.depth_m - 0.5),
                1.0,
            )
        };
        let (a, b) = (place(), place());
        if a.distance(b) < 1.5 {
            continue;
        }
        let mut geometry = Geometry::new(room).with_sta("a", a).with_sta("b", b);
        if !los {
            let mid = (a + b) * 0.5;
            let dir = (b - a).normalized();
            let (nx, ny) = (-dir.y * 0.3, dir.x * 0.3);
            geometry = geometry.with_blocker([mid.x - nx, mid.y - ny], [mid.x + nx, mid.y + ny]);
        }
        let taps = compute_paths(&geometry, "a", "b").expect("valid geometry");
        let direct = taps.iter().any(|t| t.kind == PathKind::Direct);
        if taps.is_empty() || direct != los {
            continue;
        }
        let mut candidates: Vec<AwvConfig> = taps
            .iter()
            .map(|t| (t.aod.azimuth_deg, t.aod.elevation_deg))
            .collect::<Vec<_>>()
            .into_iter()
            .chain((0..3).map(|_| (rng.random_range(-180.0..180.0), 0.0)))
            .enumerate()
            .map(|(i, (az, el))| AwvConfig::new(i as u16 + 1, az, el))
            .collect();
        candidates.truncate(8);
        let plan = SweepPlan::fitted(candidates, pair.awv_group_size).expect("plan fits");
        let channel = SimChannel::new(taps, pair.array, pair.array.quasi_omni());
        return RandomLink { geometry, channel, plan };
    }
}

/// Quality score of a candidate computed straight from the noiseless
/// sampled impulse response, keeping only samples above 5% of the peak.
pub fn oracle_quality(channel: &SimChannel, awv: &AwvConfig) -> f64 {
    let h = channel.impulse_response(&Link::co_polar(*awv, omni_awv()));
    let peak_mag = h.iter().map(|g| g.norm()).fold(0.0, f64::max);
    if peak_mag == 0.0 {
        return 0.0;
    }
    let power: Vec<f64> = h
        .iter()
        .map(|g| if g.norm() >= 0.05 * peak_mag { g.norm_sqr() } else { 0.0 })
        .collect();
    let peak = peak_mag * peak_mag;
    let k = power
        .iter()
        .position(|&p| p > 0.0 && p >= MAIN_TAP_FRACTION * peak)
        .expect("peak sample qualifies");
    let lo = k.saturating_sub(QUALITY_WINDOW);
    let hi = (k + QUALITY_WINDOW).min(power.len() - 1);
    let neighbours: f64 = (lo..=hi).filter(|&j| j != k).map(|j| power[j]).sum();
    power[k] / (1.0 + neighbours)
}

pub fn pair128() -> GolaySequencePair {
    golay_pair(128).unwrap()
}
