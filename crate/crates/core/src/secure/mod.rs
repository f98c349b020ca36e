//! Pre-association key establishment, protected FTM frames and secure TRN.

pub mod hkdf;
pub mod pasn;
pub mod protect;
pub mod trn;

use std::collections::BTreeSet;

use thiserror::Error;

pub use hkdf::{hkdf_expand, hkdf_extract, hmac_sha256};
pub use pasn::{pasn_handshake, AbortReason, HonestTransport, PasnPhase, PasnState, PasnTransport, Ptksa, Role};
pub use protect::{protect_ftm, unprotect_ftm, PftmContext, ProtectedFrame};
pub use trn::{
    derive_secure_trn, eavesdropper_estimate, map_pi2_bpsk, secure_subfields, SecureSubfield, SecureTrnProbe,
    SecureTrnSeed, SECURE_TRN_LABEL,
};

use crate::frames::{FtmFrame, IftmrParams};
use crate::rng::derive_seed;
use crate::session::{run_session_with, FailureReason, FrameTransport, SessionError, SessionScenario, SessionState};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SecureError {
    #[error("handshake aborted: {0:?}")]
    Abort(AbortReason),
    #[error("message arrived out of order")]
    UnexpectedMessage,
    #[error("frame failed its integrity check")]
    IntegrityFailure,
    #[error("nonce already used under this key")]
    NonceReuse,
    #[error("sequence length must be positive")]
    ZeroLength,
    #[error("requested {0} bytes exceeds the key derivation limit")]
    OutputTooLong(usize),
}

const PASN_STREAM: u64 = 0x7061_736e;

/// Adversary acting on a secure session, for testing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Adversary {
    /// Flip one bit of the n-th protected frame on the air.
    pub tamper_frame: Option<usize>,
    /// TRN subfield indices drowned in interference.
    pub jammed_subfields: BTreeSet<usize>,
}

#[derive(Debug, Clone)]
pub struct SecureSessionConfig {
    /// Existing PMK; when absent the handshake runs unauthenticated.
    pub psk: Option<[u8; 32]>,
    pub subfields_per_ppdu: usize,
    pub adversary: Adversary,
}

impl Default for SecureSessionConfig {
    fn default() -> Self {
        Self {
            psk: None,
            subfields_per_ppdu: 4,
            adversary: Adversary::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SecureSession {
    pub state: SessionState,
    pub ptksa: Option<Ptksa>,
    pub pmk_id: Option<[u8; pasn::PMK_ID_LEN]>,
    pub discarded_subfields: Vec<usize>,
}

/// Protects every frame with the session key; the adversary sits between
/// sealing and opening.
struct ProtectedTransport {
    sender: PftmContext,
    receiver: PftmContext,
    counter: u64,
    tamper_frame: Option<usize>,
}

impl FrameTransport for ProtectedTransport {
    fn seal(&mut self, frame: &FtmFrame) -> Result<Vec<u8>, SessionError> {
        let mut nonce = [0u8; protect::NONCE_LEN];
        nonce[4..].copy_from_slice(&self.counter.to_be_bytes());
        let index = self.counter as usize;
        self.counter += 1;
        let mut bytes = self
            .sender
            .protect(frame, nonce)
            .map_err(|e| SessionError::Security(e.to_string()))?
            .to_bytes();
        if self.tamper_frame == Some(index) {
            let last = bytes.len() - 1;
            bytes[last / 2] ^= 0x01;
        }
        Ok(bytes)
    }

    fn open(&mut self, bytes: &[u8]) -> Result<FtmFrame, SessionError> {
        let pf = ProtectedFrame::from_bytes(bytes).map_err(|e| SessionError::Security(e.to_string()))?;
        self.receiver.unprotect(&pf).map_err(|e| SessionError::Security(e.to_string()))
    }
}

/// Secret sequence length for a whole session: one PPDU of
/// `subfields_per_ppdu` subfields per exchange.
fn secure_trn_bits(scenario: &SessionScenario, params: &IftmrParams, config: &SecureSessionConfig) -> usize {
    let exchanges = usize::from(params.burst_count.max(1)) * scenario.exchanges_per_burst.max(1);
    exchanges * config.subfields_per_ppdu.max(1) * 2 * scenario.pair.len()
}

/// Handshake, then the measurement flow with protected frames and secure
/// TRN subfields.
pub fn secure_ftm_session(
    scenario: &SessionScenario,
    params: &IftmrParams,
    config: &SecureSessionConfig,
    seed: u64,
) -> SecureSession {
    let params = IftmrParams {
        secure: true,
        ..*params
    };
    let mut initiator = PasnState::initiator(derive_seed(seed, &[PASN_STREAM, 0]), params, config.psk);
    let mut responder = PasnState::responder(derive_seed(seed, &[PASN_STREAM, 1]), config.psk);
    let failed = |state: SessionState| SecureSession {
        state,
        ptksa: None,
        pmk_id: None,
        discarded_subfields: Vec::new(),
    };
    let ptksa = match pasn_handshake(&mut initiator, &mut responder, &mut HonestTransport) {
        Ok((p, _)) => p,
        Err(_) => {
            let mut state = SessionState::new(params);
            state.fail(FailureReason::SecurityViolation);
            return failed(state);
        }
    };
    let pmk_id = initiator.pmk_id.expect("established handshake has a PMK id");

    let bits = match derive_secure_trn(&ptksa.0, &pmk_id, secure_trn_bits(scenario, &params, config)) {
        Ok(b) => b,
        Err(_) => {
            let mut state = SessionState::new(params);
            state.fail(FailureReason::Rejected);
            return failed(state);
        }
    };
    let probe = SecureTrnProbe::new(
        secure_subfields(&bits, scenario.pair.len()),
        config.subfields_per_ppdu,
        config.adversary.jammed_subfields.clone(),
    );
    let mut transport = ProtectedTransport {
        sender: PftmContext::new(ptksa.clone()),
        receiver: PftmContext::new(ptksa.clone()),
        counter: 0,
        tamper_frame: config.adversary.tamper_frame,
    };
    // Same seed as the plain session, so paired runs share clock draws.
    let state = run_session_with(scenario, &params, &probe, &mut transport, seed);
    SecureSession {
        state,
        ptksa: Some(ptksa),
        pmk_id: Some(pmk_id),
        discarded_subfields: probe.discarded(),
    }
}
