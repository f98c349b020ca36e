//! Fine timing measurement session over EDMG.
//!
//! Timestamps are integer femtoseconds so that clock offsets and turnaround
//! times cancel exactly in the round-trip arithmetic. The responder stamps
//! t1 (FTM departure) and t4 (ACK arrival), the initiator t2 and t3. The
//! timestamps of exchange `k` travel in FTM frame `k + 1`; an extra frame
//! after the last exchange carries the final timestamps and the angle
//! reports.

use std::fmt::Write as _;

use rand::{Rng, RngExt};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beamtraining::{main_tap, measure_subfield, omni_awv, BeamError};
use crate::channel::{AwvConfig, ChannelTap, Link, Pdp, SimChannel};
use crate::frames::{
    decode_ftm_frame, encode_ftm_frame, AngleKind, AngleReport, AwvFeedback, Bandwidth,
    ChannelMeasurementFeedback, CmfTap, FrameError, FtmFrame, IftmrParams, LosLikelihood,
    MeasurementElement,
};
use crate::geom::{Direction, C_M_PER_PS};
use crate::golay::GolaySequencePair;
use crate::rng::{derive_seed, stream};
use crate::solver::{AngleEstimate, AngleSource};

/// Replies arriving at or after this latency miss the negotiation deadline.
pub const REPLY_DEADLINE_MS: f64 = 10.0;
pub const DEFAULT_EXCHANGES_PER_BURST: usize = 3;
pub const FS_PER_PS: i64 = 1000;
/// Responder turnaround, 100 µs.
pub const DEFAULT_PROCESSING_DELAY_FS: u64 = 100_000_000_000;
/// True time of the first exchange; keeps every recorded stamp positive.
pub const SESSION_EPOCH_FS: u64 = 1_000_000_000_000_000;
/// Spacing between exchange starts, 1 ms.
const EXCHANGE_SPACING_FS: u64 = 1_000_000_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailureReason {
    Timeout,
    Rejected,
    NoPath,
    SecurityViolation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Phase {
    Idle,
    Negotiating,
    Measuring { burst_index: u16, exchange_index: usize },
    AodFeedback,
    Done,
    Failed(FailureReason),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("{op} is not allowed in phase {phase:?}")]
    InvalidPhase { op: &'static str, phase: Phase },
    #[error("timestamps are not monotonic")]
    NonMonotonicTimestamps,
    #[error("negative round-trip time {0} ps")]
    NegativeRtt(f64),
    #[error("burst has no exchanges")]
    EmptyBurst,
    #[error("channel has no usable path")]
    NoPath,
    #[error("security failure: {0}")]
    Security(String),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Beam(#[from] BeamError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RstaPolicy {
    pub max_bandwidth_ghz: f64,
    pub max_burst_count: u16,
    pub supports_secure: bool,
    pub supports_aod: bool,
    /// Answer an unsatisfiable request with clamped parameters instead of
    /// rejecting it.
    pub counter_propose: bool,
}

impl Default for RstaPolicy {
    fn default() -> Self {
        Self {
            max_bandwidth_ghz: 8.64,
            max_burst_count: 16,
            supports_secure: true,
            supports_aod: true,
            counter_propose: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementExchange {
    pub t1_fs: u64,
    pub t2_fs: u64,
    pub t3_fs: u64,
    pub t4_fs: u64,
    pub tod_error_ps: u16,
    pub toa_error_ps: u16,
    pub tx_awv_id: u16,
    pub rx_awv_id: u16,
}

/// Per-station clock offsets and timestamp jitter. Arrival stamps carry
/// `timestamp_jitter_sigma_ps`; departure stamps carry
/// `tod_jitter_sigma_ps`, zero by default since a station knows when it
/// transmits.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ClockModel {
    pub ista_offset_ps: f64,
    pub rsta_offset_ps: f64,
    pub timestamp_jitter_sigma_ps: f64,
    pub tod_jitter_sigma_ps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExchangeSetup {
    pub tof_ps: f64,
    pub processing_delay_fs: u64,
    pub start_fs: u64,
    pub tx_awv_id: u16,
    pub rx_awv_id: u16,
}

fn ps_to_fs(ps: f64) -> i64 {
    (ps * FS_PER_PS as f64).round() as i64
}

fn draw_fs<R: Rng + ?Sized>(rng: &mut R, sigma_ps: f64) -> i64 {
    let z: f64 = rng.sample(StandardNormal);
    if sigma_ps > 0.0 {
        ps_to_fs(sigma_ps * z)
    } else {
        0
    }
}

/// Reported bound: twice the larger jitter magnitude, rounded up to 1 ps.
fn error_bound_ps(a_fs: i64, b_fs: i64) -> u16 {
    let worst = a_fs.unsigned_abs().max(b_fs.unsigned_abs());
    let ps = (2 * worst).div_ceil(FS_PER_PS as u64);
    u16::try_from(ps).unwrap_or(u16::MAX)
}

fn stamp(true_fs: u64, offset_fs: i64, jitter_fs: i64) -> u64 {
    (i128::from(true_fs) + i128::from(offset_fs) + i128::from(jitter_fs)).clamp(0, i128::from(u64::MAX)) as u64
}

/// One FTM/ACK exchange with true times `t1 = start`, `t2 = t1 + τ`,
/// `t3 = t2 + Δproc`, `t4 = t3 + τ`, stamped through `clock`.
pub fn run_exchange(setup: &ExchangeSetup, clock: &ClockModel, seed: u64) -> MeasurementExchange {
    let tau = ps_to_fs(setup.tof_ps).max(0) as u64;
    let t1 = setup.start_fs;
    let t2 = t1 + tau;
    let t3 = t2 + setup.processing_delay_fs;
    let t4 = t3 + tau;
    let mut rng = stream(seed, &[]);
    let j1 = draw_fs(&mut rng, clock.tod_jitter_sigma_ps);
    let j2 = draw_fs(&mut rng, clock.timestamp_jitter_sigma_ps);
    let j3 = draw_fs(&mut rng, clock.tod_jitter_sigma_ps);
    let j4 = draw_fs(&mut rng, clock.timestamp_jitter_sigma_ps);
    let (oi, or) = (ps_to_fs(clock.ista_offset_ps), ps_to_fs(clock.rsta_offset_ps));
    MeasurementExchange {
        t1_fs: stamp(t1, or, j1),
        t2_fs: stamp(t2, oi, j2),
        t3_fs: stamp(t3, oi, j3),
        t4_fs: stamp(t4, or, j4),
        tod_error_ps: error_bound_ps(j1, j3),
        toa_error_ps: error_bound_ps(j2, j4),
        tx_awv_id: setup.tx_awv_id,
        rx_awv_id: setup.rx_awv_id,
    }
}

/// `(t4 − t1) − (t3 − t2)` in picoseconds, computed exactly in femtoseconds.
pub fn compute_rtt(ex: &MeasurementExchange) -> Result<f64, SessionError> {
    if ex.t3_fs < ex.t2_fs || ex.t4_fs < ex.t1_fs {
        return Err(SessionError::NonMonotonicTimestamps);
    }
    let rtt = (i128::from(ex.t4_fs) - i128::from(ex.t1_fs)) - (i128::from(ex.t3_fs) - i128::from(ex.t2_fs));
    Ok(rtt as f64 / FS_PER_PS as f64)
}

pub fn rtt_to_distance(rtt_ps: f64) -> Result<f64, SessionError> {
    if rtt_ps < 0.0 || rtt_ps.is_nan() {
        return Err(SessionError::NegativeRtt(rtt_ps));
    }
    Ok(C_M_PER_PS * rtt_ps / 2.0)
}

/// Exchange with the smallest reported `tod_error + toa_error`; the earliest
/// one wins ties.
pub fn select_best_exchange(exchanges: &[MeasurementExchange]) -> Result<(usize, &MeasurementExchange), SessionError> {
    exchanges
        .iter()
        .enumerate()
        .min_by_key(|(i, e)| (u32::from(e.tod_error_ps) + u32::from(e.toa_error_ps), *i))
        .ok_or(SessionError::EmptyBurst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AngleNoiseModel {
    None,
    Uniform { max_deg: f64 },
    /// Laplace with the given scale, truncated at `max_deg`.
    Laplace { scale_deg: f64, max_deg: f64 },
}

impl AngleNoiseModel {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            AngleNoiseModel::None => 0.0,
            AngleNoiseModel::Uniform { max_deg } => {
                if max_deg > 0.0 {
                    rng.random_range(-max_deg..=max_deg)
                } else {
                    0.0
                }
            }
            AngleNoiseModel::Laplace { scale_deg, max_deg } => {
                if scale_deg <= 0.0 || max_deg <= 0.0 {
                    return 0.0;
                }
                let u: f64 = rng.random();
                let mass = 1.0 - (-max_deg / scale_deg).exp();
                let magnitude = -scale_deg * (1.0 - u * mass).ln();
                if rng.random::<bool>() {
                    magnitude
                } else {
                    -magnitude
                }
            }
        }
    }

    /// Largest error the model can produce.
    pub fn max_deg(&self) -> f64 {
        match *self {
            AngleNoiseModel::None => 0.0,
            AngleNoiseModel::Uniform { max_deg } | AngleNoiseModel::Laplace { max_deg, .. } => max_deg,
        }
    }
}

/// Azimuth-only perturbation of a true direction.
pub fn noisy_estimate<R: Rng + ?Sized>(
    truth: Direction,
    model: &AngleNoiseModel,
    source: AngleSource,
    rng: &mut R,
) -> AngleEstimate {
    let mut az = truth.azimuth_deg + model.draw(rng);
    if az > 180.0 {
        az -= 360.0;
    } else if az <= -180.0 {
        az += 360.0;
    }
    AngleEstimate::new(source, Direction::new(az, truth.elevation_deg))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameDirection {
    IstaToRsta,
    RstaToIsta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptEntry {
    pub direction: FrameDirection,
    pub label: String,
    pub bytes: Vec<u8>,
    pub decoded: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionState {
    pub phase: Phase,
    pub params: IftmrParams,
    pub exchanges_per_burst: usize,
    pub exchanges: Vec<MeasurementExchange>,
    pub i2r_aods: Vec<AngleEstimate>,
    pub r2i_aods: Vec<AngleEstimate>,
    pub transcript: Vec<TranscriptEntry>,
}

impl SessionState {
    pub fn new(params: IftmrParams) -> Self {
        Self {
            phase: Phase::Idle,
            params,
            exchanges_per_burst: DEFAULT_EXCHANGES_PER_BURST,
            exchanges: Vec::new(),
            i2r_aods: Vec::new(),
            r2i_aods: Vec::new(),
            transcript: Vec::new(),
        }
    }

    fn invalid(&self, op: &'static str) -> SessionError {
        SessionError::InvalidPhase {
            op,
            phase: self.phase.clone(),
        }
    }

    pub fn fail(&mut self, reason: FailureReason) {
        self.phase = Phase::Failed(reason);
    }

    pub fn is_done(&self) -> bool {
        self.phase == Phase::Done
    }

    /// Re-runs negotiation on the counter-proposed parameters.
    pub fn accept_counter_proposal(self, policy: &RstaPolicy, reply_latency_ms: f64) -> Result<Self, SessionError> {
        if self.phase != Phase::Negotiating {
            return Err(self.invalid("accept_counter_proposal"));
        }
        let mut next = negotiate(&self.params, policy, reply_latency_ms);
        next.exchanges_per_burst = self.exchanges_per_burst;
        next.transcript = self.transcript;
        Ok(next)
    }

    pub fn record_exchange(&mut self, ex: MeasurementExchange) -> Result<(), SessionError> {
        let Phase::Measuring {
            burst_index,
            exchange_index,
        } = self.phase
        else {
            return Err(self.invalid("record_exchange"));
        };
        self.exchanges.push(ex);
        self.phase = if exchange_index + 1 == self.exchanges_per_burst {
            Phase::AodFeedback
        } else {
            Phase::Measuring {
                burst_index,
                exchange_index: exchange_index + 1,
            }
        };
        Ok(())
    }

    pub fn push_i2r(&mut self, est: AngleEstimate) -> Result<(), SessionError> {
        if !matches!(self.phase, Phase::Measuring { .. }) {
            return Err(self.invalid("push_i2r"));
        }
        self.i2r_aods.push(est);
        Ok(())
    }

    /// Records the burst's R2I estimate and moves on to the next burst or
    /// finishes the session.
    pub fn push_r2i(&mut self, est: AngleEstimate) -> Result<(), SessionError> {
        if self.phase != Phase::AodFeedback {
            return Err(self.invalid("push_r2i"));
        }
        self.r2i_aods.push(est);
        let finished = self.r2i_aods.len();
        self.phase = if finished >= usize::from(self.params.burst_count) {
            Phase::Done
        } else {
            Phase::Measuring {
                burst_index: finished as u16,
                exchange_index: 0,
            }
        };
        Ok(())
    }

    pub fn best_exchange(&self) -> Result<&MeasurementExchange, SessionError> {
        select_best_exchange(&self.exchanges).map(|(_, e)| e)
    }

    /// Range from the best exchange.
    pub fn distance_m(&self) -> Result<f64, SessionError> {
        rtt_to_distance(compute_rtt(self.best_exchange()?)?)
    }

    /// Text log with every frame as hex plus its decoded form.
    pub fn transcript_text(&self) -> String {
        let mut out = String::new();
        for (i, e) in self.transcript.iter().enumerate() {
            let arrow = match e.direction {
                FrameDirection::IstaToRsta => "ISTA -> RSTA",
                FrameDirection::RstaToIsta => "RSTA -> ISTA",
            };
            let _ = writeln!(out, "# {i} {arrow} {}", e.label);
            out.push_str(&crate::frames::hex_dump(&e.bytes));
            let _ = writeln!(out, "{}\n", e.decoded);
        }
        out
    }

    fn log(&mut self, direction: FrameDirection, label: impl Into<String>, bytes: Vec<u8>, decoded: String) {
        self.transcript.push(TranscriptEntry {
            direction,
            label: label.into(),
            bytes,
            decoded,
        });
    }
}

fn params_valid(p: &IftmrParams) -> bool {
    p.burst_count > 0 && p.session_duration_ms > 0
}

/// Responder's answer to an IFTMR arriving after `reply_latency_ms`.
pub fn negotiate(params: &IftmrParams, policy: &RstaPolicy, reply_latency_ms: f64) -> SessionState {
    let mut state = SessionState::new(*params);
    state.phase = Phase::Negotiating;
    if !params_valid(params) {
        state.fail(FailureReason::Rejected);
        return state;
    }
    if !(reply_latency_ms < REPLY_DEADLINE_MS) {
        state.fail(FailureReason::Timeout);
        return state;
    }
    if params.secure && !policy.supports_secure {
        state.fail(FailureReason::Rejected);
        return state;
    }
    let wants_aod = params.request_i2r_aod || params.request_r2i_aod;
    let fits = params.bandwidth.ghz() <= policy.max_bandwidth_ghz + 1e-9
        && params.burst_count <= policy.max_burst_count
        && (!wants_aod || policy.supports_aod);
    if fits {
        state.phase = Phase::Measuring {
            burst_index: 0,
            exchange_index: 0,
        };
        return state;
    }
    if !policy.counter_propose {
        state.fail(FailureReason::Rejected);
        return state;
    }
    let bandwidth = Bandwidth::ALL
        .into_iter()
        .filter(|b| b.ghz() <= policy.max_bandwidth_ghz + 1e-9)
        .max_by(|a, b| a.ghz().total_cmp(&b.ghz()));
    let Some(bandwidth) = bandwidth else {
        state.fail(FailureReason::Rejected);
        return state;
    };
    state.params = IftmrParams {
        bandwidth,
        burst_count: params.burst_count.min(policy.max_burst_count).max(1),
        request_i2r_aod: params.request_i2r_aod && policy.supports_aod,
        request_r2i_aod: params.request_r2i_aod && policy.supports_aod,
        ..*params
    };
    state
}

/// How the responder measures a TRN subfield sent by the initiator.
pub trait TrnProbe {
    fn measure(&self, channel: &SimChannel, link: &Link, snr_db: f64, seed: u64) -> Result<Pdp, SessionError>;
}

pub struct GolayProbe<'a> {
    pub pair: &'a GolaySequencePair,
}

impl TrnProbe for GolayProbe<'_> {
    fn measure(&self, channel: &SimChannel, link: &Link, snr_db: f64, seed: u64) -> Result<Pdp, SessionError> {
        Ok(measure_subfield(channel, link, self.pair, snr_db, seed)?)
    }
}

/// Carries FTM frames between the stations.
pub trait FrameTransport {
    fn seal(&mut self, frame: &FtmFrame) -> Result<Vec<u8>, SessionError>;
    fn open(&mut self, bytes: &[u8]) -> Result<FtmFrame, SessionError>;
}

pub struct PlainTransport;

impl FrameTransport for PlainTransport {
    fn seal(&mut self, frame: &FtmFrame) -> Result<Vec<u8>, SessionError> {
        Ok(encode_ftm_frame(frame))
    }

    fn open(&mut self, bytes: &[u8]) -> Result<FtmFrame, SessionError> {
        Ok(decode_ftm_frame(bytes)?)
    }
}

/// Everything a session needs besides its parameters.
#[derive(Debug, Clone)]
pub struct SessionScenario {
    /// Initiator-to-responder channel.
    pub channel: SimChannel,
    pub pair: GolaySequencePair,
    /// Best initiator AWV from beam training.
    pub ista_awv: AwvConfig,
    pub snr_db: f64,
    pub clock: ClockModel,
    pub angle_noise: AngleNoiseModel,
    pub policy: RstaPolicy,
    pub reply_latency_ms: f64,
    pub exchanges_per_burst: usize,
    pub processing_delay_fs: u64,
    pub los_likelihood: Option<f64>,
}

impl SessionScenario {
    pub fn new(channel: SimChannel, pair: GolaySequencePair, ista_awv: AwvConfig) -> Self {
        Self {
            channel,
            pair,
            ista_awv,
            snr_db: f64::INFINITY,
            clock: ClockModel::default(),
            angle_noise: AngleNoiseModel::None,
            policy: RstaPolicy::default(),
            reply_latency_ms: 1.0,
            exchanges_per_burst: DEFAULT_EXCHANGES_PER_BURST,
            processing_delay_fs: DEFAULT_PROCESSING_DELAY_FS,
            los_likelihood: None,
        }
    }
}

/// Channel tap behind the PDP's main tap: the strongest tap in that sample,
/// else the tap nearest to it.
pub fn first_path_tap<'a>(channel: &'a SimChannel, link: &Link, pdp: &Pdp) -> Option<&'a ChannelTap> {
    let k = pdp.taps[main_tap(pdp)?].delay_index;
    let in_bin = channel
        .taps
        .iter()
        .filter(|t| channel.delay_index(t.delay_ps) == k)
        .max_by(|a, b| {
            channel
                .effective_gain(a, link)
                .norm_sqr()
                .total_cmp(&channel.effective_gain(b, link).norm_sqr())
        });
    in_bin.or_else(|| {
        channel
            .taps
            .iter()
            .min_by_key(|t| (channel.delay_index(t.delay_ps).abs_diff(k), channel.delay_index(t.delay_ps)))
    })
}

/// Channel measurement feedback scaled into the element's 16-bit I/Q range.
pub fn pdp_to_cmf(pdp: &Pdp) -> ChannelMeasurementFeedback {
    let peak = pdp
        .taps
        .iter()
        .map(|t| t.i.abs().max(t.q.abs()))
        .fold(0.0, f64::max);
    let scale = if peak > 0.0 { f64::from(i16::MAX) / peak } else { 0.0 };
    ChannelMeasurementFeedback {
        taps: pdp
            .taps
            .iter()
            .take_while(|t| t.delay_index <= usize::from(u16::MAX))
            .map(|t| CmfTap {
                delay_index: t.delay_index as u16,
                i: (t.i * scale).round() as i16,
                q: (t.q * scale).round() as i16,
                snr_db: t.snr_db.round().clamp(f64::from(i8::MIN), f64::from(i8::MAX)) as i8,
            })
            .collect(),
    }
}

fn token(index: usize) -> u8 {
    (index % 255 + 1) as u8
}

fn reported(ex: &MeasurementExchange) -> (u64, u64, u16, u16) {
    (ex.t1_fs, ex.t4_fs, ex.tod_error_ps, ex.toa_error_ps)
}

fn deliver(
    state: &mut SessionState,
    transport: &mut dyn FrameTransport,
    frame: &FtmFrame,
    label: String,
) -> Result<FtmFrame, SessionError> {
    let bytes = transport.seal(frame)?;
    let decoded = transport.open(&bytes)?;
    state.log(FrameDirection::RstaToIsta, label, bytes, format!("{decoded:?}"));
    Ok(decoded)
}

/// Measurement flow with the plain Golay TRN and unprotected frames.
pub fn run_session(scenario: &SessionScenario, params: &IftmrParams, seed: u64) -> SessionState {
    run_session_with(
        scenario,
        params,
        &GolayProbe {
            pair: &scenario.pair,
        },
        &mut PlainTransport,
        seed,
    )
}

pub fn run_session_with(
    scenario: &SessionScenario,
    params: &IftmrParams,
    probe: &dyn TrnProbe,
    transport: &mut dyn FrameTransport,
    seed: u64,
) -> SessionState {
    let iftmr = params.encode();
    let mut state = negotiate(params, &scenario.policy, scenario.reply_latency_ms);
    state.log(FrameDirection::IstaToRsta, "IFTMR", iftmr, format!("{params:?}"));
    if state.phase == Phase::Negotiating {
        let counter = state.params;
        let mut next = match state.accept_counter_proposal(&scenario.policy, scenario.reply_latency_ms) {
            Ok(s) => s,
            Err(_) => unreachable!("phase checked above"),
        };
        next.log(FrameDirection::RstaToIsta, "counter-proposal", counter.encode(), format!("{counter:?}"));
        state = next;
    }
    state.exchanges_per_burst = scenario.exchanges_per_burst.max(1);
    if !matches!(state.phase, Phase::Measuring { .. }) {
        return state;
    }
    if let Err(e) = measure_bursts(&mut state, scenario, probe, transport, seed) {
        let reason = match e {
            SessionError::NoPath | SessionError::Beam(_) => FailureReason::NoPath,
            SessionError::Security(_) => FailureReason::SecurityViolation,
            _ => FailureReason::Rejected,
        };
        state.fail(reason);
    }
    state
}

fn measure_bursts(
    state: &mut SessionState,
    sc: &SessionScenario,
    probe: &dyn TrnProbe,
    transport: &mut dyn FrameTransport,
    seed: u64,
) -> Result<(), SessionError> {
    let link = Link::co_polar(sc.ista_awv, omni_awv());
    let per_burst = state.exchanges_per_burst;
    let mut frame_index = 0usize;
    let mut exchange_counter = 0u64;
    for b in 0..state.params.burst_count {
        let mut previous: Option<(MeasurementExchange, Pdp, u8)> = None;
        let mut first_tap = None;
        for k in 0..per_burst {
            let path = [u64::from(b), k as u64];
            let pdp = probe.measure(&sc.channel, &link, sc.snr_db, derive_seed(seed, &[path[0], path[1], 0]))?;
            let tap = first_path_tap(&sc.channel, &link, &pdp).ok_or(SessionError::NoPath)?;
            first_tap.get_or_insert_with(|| tap.clone());
            let setup = ExchangeSetup {
                tof_ps: tap.delay_ps,
                processing_delay_fs: sc.processing_delay_fs,
                start_fs: SESSION_EPOCH_FS + exchange_counter * EXCHANGE_SPACING_FS,
                tx_awv_id: 0,
                rx_awv_id: sc.ista_awv.awv_id,
            };
            let ex = run_exchange(&setup, &sc.clock, derive_seed(seed, &[path[0], path[1], 1]));
            exchange_counter += 1;

            let dialog = token(frame_index);
            let mut frame = FtmFrame {
                dialog_token: dialog,
                ..FtmFrame::default()
            };
            if let Some((prev_ex, prev_pdp, prev_token)) = &previous {
                (frame.tod_fs, frame.toa_fs, frame.tod_error_ps, frame.toa_error_ps) = reported(prev_ex);
                frame.follow_up_token = *prev_token;
                if state.params.request_i2r_aod {
                    frame.elements.push(MeasurementElement::ChannelMeasurement(pdp_to_cmf(prev_pdp)));
                    frame.elements.push(MeasurementElement::Awv(AwvFeedback {
                        awv_id: sc.ista_awv.awv_id,
                        quality_centi_db: 0,
                    }));
                }
            }
            let rx = deliver(state, transport, &frame, format!("FTM {frame_index}"))?;
            frame_index += 1;
            if let Some((prev_ex, _, _)) = &previous {
                state.record_exchange(exchange_from_frame(&rx, prev_ex))?;
                if rx.element(crate::frames::ElementKind::Awv).is_some() {
                    let mut rng = stream(seed, &[path[0], path[1], 2]);
                    let est = noisy_estimate(sc.ista_awv.steering(), &sc.angle_noise, AngleSource::I2rAod, &mut rng);
                    state.push_i2r(est)?;
                }
            }
            previous = Some((ex, pdp, dialog));
        }

        let (last_ex, _, last_token) = previous.ok_or(SessionError::EmptyBurst)?;
        let first = first_tap.ok_or(SessionError::NoPath)?;
        let mut rng = stream(seed, &[u64::from(b), 3]);
        let r2i = noisy_estimate(first.aoa, &sc.angle_noise, AngleSource::R2iAod, &mut rng);
        let i2r_report = state
            .i2r_aods
            .last()
            .map(|e| e.direction())
            .unwrap_or_else(|| sc.ista_awv.steering());

        let setup_frame = FtmFrame {
            elements: vec![MeasurementElement::Awv(AwvFeedback {
                awv_id: sc.ista_awv.awv_id,
                quality_centi_db: 0,
            })],
            ..FtmFrame::default()
        };
        let setup_bytes = transport.seal(&setup_frame)?;
        let setup_rx = transport.open(&setup_bytes)?;
        state.log(FrameDirection::IstaToRsta, "AWV setup", setup_bytes, format!("{setup_rx:?}"));

        let mut fin = FtmFrame {
            dialog_token: token(frame_index),
            follow_up_token: last_token,
            ..FtmFrame::default()
        };
        (fin.tod_fs, fin.toa_fs, fin.tod_error_ps, fin.toa_error_ps) = reported(&last_ex);
        if state.params.request_i2r_aod {
            fin.elements.push(MeasurementElement::Angle(AngleReport::from_degrees(
                AngleKind::I2rAod,
                i2r_report.azimuth_deg,
                i2r_report.elevation_deg,
            )));
        }
        if state.params.request_r2i_aod {
            fin.elements.push(MeasurementElement::Angle(AngleReport::from_degrees(
                AngleKind::R2iAod,
                r2i.azimuth_deg,
                r2i.elevation_deg,
            )));
        }
        if let Some(p) = sc.los_likelihood {
            fin.elements.push(MeasurementElement::LosLikelihood(LosLikelihood::from_probability(p)));
        }
        let rx = deliver(state, transport, &fin, format!("FTM {frame_index} (final)"))?;
        frame_index += 1;
        state.record_exchange(exchange_from_frame(&rx, &last_ex))?;
        state.push_r2i(r2i)?;
    }
    Ok(())
}

/// Joins the responder's stamps from a received frame with the initiator's
/// own t2 and t3.
fn exchange_from_frame(frame: &FtmFrame, local: &MeasurementExchange) -> MeasurementExchange {
    MeasurementExchange {
        t1_fs: frame.tod_fs,
        t4_fs: frame.toa_fs,
        tod_error_ps: frame.tod_error_ps,
        toa_error_ps: frame.toa_error_ps,
        ..*local
    }
}
