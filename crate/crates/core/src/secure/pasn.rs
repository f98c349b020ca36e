//! Three-message pre-association key establishment.
//!
//! Message 1 carries the initiator's ephemeral X25519 key and proposed
//! parameters in the clear. Messages 2 and 3 are MAC-then-encrypt: an
//! HMAC-SHA-256 tag over the transcript so far and the body, then ChaCha20
//! over body and tag, with keys expanded from the ephemeral shared secret.
//!
//! Without a pre-shared key the PMK rests on the ephemeral exchange alone and
//! is unauthenticated.

use chacha20::cipher::{KeyIvInit, StreamCipher};
use chacha20::ChaCha20;
use hmac::Mac;
use rand::RngExt;
use sha2::{Digest, Sha256};
use x25519_dalek::{PublicKey, StaticSecret};

use super::hkdf::{hkdf_expand, hkdf_extract, HmacSha256};
use super::SecureError;
use crate::frames::IftmrParams;
use crate::rng::stream;

const MSG1: u8 = 1;
const MSG2: u8 = 2;
const MSG3: u8 = 3;
const PARAMS_LEN: usize = 8;
const KEY_LEN: usize = 32;
const MIC_LEN: usize = 32;
const FRAME_KEY_LABEL: &[u8] = b"PASN frame protection";
const PTK_LABEL: &[u8] = b"PASN PTK";
const CONFIRM: u8 = 0x01;

pub const PMK_ID_LEN: usize = 16;
pub const PTKSA_LEN: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Initiator,
    Responder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbortReason {
    BadMac,
    ParamMismatch,
    Malformed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PasnPhase {
    AwaitMsg1,
    AwaitMsg2,
    AwaitMsg3,
    Established,
    Aborted(AbortReason),
}

/// Pairwise transient key block: 16-byte KCK followed by a 32-byte TK.
#[derive(Clone, PartialEq, Eq)]
pub struct Ptksa(pub [u8; PTKSA_LEN]);

impl Ptksa {
    pub fn kck(&self) -> &[u8] {
        &self.0[..16]
    }

    pub fn tk(&self) -> [u8; 32] {
        self.0[16..].try_into().expect("TK is 32 bytes")
    }
}

impl std::fmt::Debug for Ptksa {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Ptksa(..)")
    }
}

struct FrameKeys {
    mac: [u8; KEY_LEN],
    enc: [u8; KEY_LEN],
}

pub struct PasnState {
    pub role: Role,
    ephemeral_private: StaticSecret,
    pub ephemeral_public: PublicKey,
    peer_public: Option<PublicKey>,
    psk: Option<[u8; 32]>,
    /// Initiator: the proposal. Responder: what it will choose, if it
    /// overrides the proposal.
    params: Option<IftmrParams>,
    pub negotiated_params: Option<IftmrParams>,
    pmk: Option<[u8; 32]>,
    pub pmk_id: Option<[u8; PMK_ID_LEN]>,
    ptksa: Option<Ptksa>,
    frame_keys: Option<FrameKeys>,
    transcript: Vec<u8>,
    pub phase: PasnPhase,
}

impl std::fmt::Debug for PasnState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PasnState")
            .field("role", &self.role)
            .field("phase", &self.phase)
            .field("negotiated_params", &self.negotiated_params)
            .finish_non_exhaustive()
    }
}

fn ephemeral(seed: u64) -> StaticSecret {
    let bytes: [u8; 32] = stream(seed, &[0x5041_534e]).random();
    StaticSecret::from(bytes)
}

impl PasnState {
    fn fresh(role: Role, seed: u64, params: Option<IftmrParams>, psk: Option<[u8; 32]>) -> Self {
        let secret = ephemeral(seed);
        Self {
            role,
            ephemeral_public: PublicKey::from(&secret),
            ephemeral_private: secret,
            peer_public: None,
            psk,
            params,
            negotiated_params: None,
            pmk: None,
            pmk_id: None,
            ptksa: None,
            frame_keys: None,
            transcript: Vec::new(),
            phase: match role {
                Role::Initiator => PasnPhase::AwaitMsg1,
                Role::Responder => PasnPhase::AwaitMsg1,
            },
        }
    }

    /// Initiator proposing `params`. `psk` is an existing PMK, if any.
    pub fn initiator(seed: u64, params: IftmrParams, psk: Option<[u8; 32]>) -> Self {
        Self::fresh(Role::Initiator, seed, Some(params), psk)
    }

    /// Responder accepting whatever the initiator proposes.
    pub fn responder(seed: u64, psk: Option<[u8; 32]>) -> Self {
        Self::fresh(Role::Responder, seed, None, psk)
    }

    /// Responder that answers with `choice` regardless of the proposal.
    pub fn responder_choosing(seed: u64, psk: Option<[u8; 32]>, choice: IftmrParams) -> Self {
        Self::fresh(Role::Responder, seed, Some(choice), psk)
    }

    pub fn ptksa(&self) -> Option<&Ptksa> {
        match self.phase {
            PasnPhase::Established => self.ptksa.as_ref(),
            _ => None,
        }
    }

    pub fn pmk(&self) -> Option<&[u8; 32]> {
        self.pmk.as_ref()
    }

    fn abort(&mut self, reason: AbortReason) -> SecureError {
        self.phase = PasnPhase::Aborted(reason);
        self.ptksa = None;
        SecureError::Abort(reason)
    }

    fn expect_phase(&self, want: PasnPhase, role: Role) -> Result<(), SecureError> {
        if self.phase == want && self.role == role {
            Ok(())
        } else {
            Err(SecureError::UnexpectedMessage)
        }
    }

    fn ordered_publics(&self) -> ([u8; 32], [u8; 32]) {
        let own = self.ephemeral_public.to_bytes();
        let peer = self.peer_public.map(|p| p.to_bytes()).unwrap_or_default();
        match self.role {
            Role::Initiator => (own, peer),
            Role::Responder => (peer, own),
        }
    }

    /// Derives the frame keys and PMK from the ephemeral shared secret.
    fn agree(&mut self) {
        let peer = self.peer_public.expect("peer key set before agreement");
        let shared = self.ephemeral_private.diffie_hellman(&peer);
        let (pi, pr) = self.ordered_publics();
        let handshake_prk = hkdf_extract(&[], shared.as_bytes());
        let keys = hkdf_expand(&handshake_prk, &[FRAME_KEY_LABEL, &pi, &pr].concat(), 2 * KEY_LEN)
            .expect("64 bytes is within the HKDF limit");
        self.frame_keys = Some(FrameKeys {
            mac: keys[..KEY_LEN].try_into().expect("32 bytes"),
            enc: keys[KEY_LEN..].try_into().expect("32 bytes"),
        });
        let salt = self.psk.unwrap_or([0; 32]);
        let pmk = hkdf_extract(&salt, shared.as_bytes());
        let digest = Sha256::digest([&pmk[..], &pi, &pr].concat());
        self.pmk_id = Some(digest[..PMK_ID_LEN].try_into().expect("16 bytes"));
        self.pmk = Some(pmk);
    }

    fn derive_ptksa(&mut self, params: &IftmrParams) {
        let (pi, pr) = self.ordered_publics();
        let info = [PTK_LABEL, &params.encode(), &pi, &pr].concat();
        let block = hkdf_expand(self.pmk.as_ref().expect("PMK derived"), &info, PTKSA_LEN)
            .expect("48 bytes is within the HKDF limit");
        self.ptksa = Some(Ptksa(block.try_into().expect("48 bytes")));
        self.negotiated_params = Some(*params);
        self.phase = PasnPhase::Established;
    }

    fn keystream(&self, msg_type: u8, data: &mut [u8]) {
        let keys = self.frame_keys.as_ref().expect("frame keys derived");
        let mut nonce = [0u8; 12];
        nonce[11] = msg_type;
        let mut cipher = ChaCha20::new((&keys.enc).into(), (&nonce).into());
        cipher.apply_keystream(data);
    }

    fn mic(&self, header: &[u8], body: &[u8]) -> [u8; MIC_LEN] {
        let keys = self.frame_keys.as_ref().expect("frame keys derived");
        super::hkdf::hmac_sha256(&keys.mac, &[&self.transcript, header, body])
    }

    /// MAC-then-encrypt: returns `header ‖ E(body ‖ mic)`.
    fn seal(&self, header: &[u8], body: &[u8]) -> Vec<u8> {
        let mut payload = [body, &self.mic(header, body)].concat();
        self.keystream(header[0], &mut payload);
        [header, &payload].concat()
    }

    /// Decrypts and checks the tag, returning the body.
    fn unseal(&self, header: &[u8], sealed: &[u8]) -> Option<Vec<u8>> {
        if sealed.len() < MIC_LEN {
            return None;
        }
        let mut payload = sealed.to_vec();
        self.keystream(header[0], &mut payload);
        let (body, tag) = payload.split_at(payload.len() - MIC_LEN);
        let keys = self.frame_keys.as_ref()?;
        let mut mac = <HmacSha256 as hmac::KeyInit>::new_from_slice(&keys.mac).ok()?;
        mac.update(&self.transcript);
        mac.update(header);
        mac.update(body);
        mac.verify_slice(tag).ok()?;
        Some(body.to_vec())
    }

    /// Initiator: `[1] ‖ pub_i ‖ params`.
    pub fn msg1(&mut self) -> Result<Vec<u8>, SecureError> {
        self.expect_phase(PasnPhase::AwaitMsg1, Role::Initiator)?;
        let params = self.params.expect("initiator has a proposal");
        let msg = [&[MSG1][..], self.ephemeral_public.as_bytes(), &params.encode()].concat();
        self.transcript = msg.clone();
        self.phase = PasnPhase::AwaitMsg2;
        Ok(msg)
    }

    /// Responder: checks message 1 and answers with
    /// `[2] ‖ pub_r ‖ E(chosen params ‖ mic)`.
    pub fn handle_msg1(&mut self, msg: &[u8]) -> Result<Vec<u8>, SecureError> {
        self.expect_phase(PasnPhase::AwaitMsg1, Role::Responder)?;
        if msg.len() != 1 + 32 + PARAMS_LEN || msg[0] != MSG1 {
            return Err(self.abort(AbortReason::Malformed));
        }
        let peer: [u8; 32] = msg[1..33].try_into().expect("32 bytes");
        let proposal = match IftmrParams::decode(&msg[33..]) {
            Ok(p) => p,
            Err(_) => return Err(self.abort(AbortReason::Malformed)),
        };
        self.peer_public = Some(PublicKey::from(peer));
        self.transcript = msg.to_vec();
        self.agree();
        let chosen = self.params.unwrap_or(proposal);
        let header = [&[MSG2][..], self.ephemeral_public.as_bytes()].concat();
        let out = self.seal(&header, &chosen.encode());
        self.transcript.extend_from_slice(&out);
        self.params = Some(chosen);
        self.phase = PasnPhase::AwaitMsg3;
        Ok(out)
    }

    /// Initiator: verifies message 2, derives the PTKSA and confirms with
    /// `[3] ‖ E(params ‖ confirm ‖ mic)`.
    pub fn handle_msg2(&mut self, msg: &[u8]) -> Result<Vec<u8>, SecureError> {
        self.expect_phase(PasnPhase::AwaitMsg2, Role::Initiator)?;
        if msg.len() != 1 + 32 + PARAMS_LEN + MIC_LEN || msg[0] != MSG2 {
            return Err(self.abort(AbortReason::Malformed));
        }
        let peer: [u8; 32] = msg[1..33].try_into().expect("32 bytes");
        self.peer_public = Some(PublicKey::from(peer));
        self.agree();
        let Some(body) = self.unseal(&msg[..33], &msg[33..]) else {
            return Err(self.abort(AbortReason::BadMac));
        };
        let proposal = self.params.expect("initiator has a proposal");
        match IftmrParams::decode(&body) {
            Ok(chosen) if chosen == proposal => {}
            Ok(_) => return Err(self.abort(AbortReason::ParamMismatch)),
            Err(_) => return Err(self.abort(AbortReason::Malformed)),
        }
        self.transcript.extend_from_slice(msg);
        let body = [&proposal.encode()[..], &[CONFIRM]].concat();
        let out = self.seal(&[MSG3], &body);
        self.derive_ptksa(&proposal);
        Ok(out)
    }

    /// Responder: verifies the confirmation and derives the PTKSA.
    pub fn handle_msg3(&mut self, msg: &[u8]) -> Result<(), SecureError> {
        self.expect_phase(PasnPhase::AwaitMsg3, Role::Responder)?;
        if msg.len() != 1 + PARAMS_LEN + 1 + MIC_LEN || msg[0] != MSG3 {
            return Err(self.abort(AbortReason::Malformed));
        }
        let Some(body) = self.unseal(&msg[..1], &msg[1..]) else {
            return Err(self.abort(AbortReason::BadMac));
        };
        let chosen = self.params.expect("responder chose parameters");
        match IftmrParams::decode(&body[..PARAMS_LEN]) {
            Ok(confirmed) if confirmed == chosen && body[PARAMS_LEN] == CONFIRM => {}
            Ok(_) => return Err(self.abort(AbortReason::ParamMismatch)),
            Err(_) => return Err(self.abort(AbortReason::Malformed)),
        }
        self.derive_ptksa(&chosen);
        Ok(())
    }
}

/// Carries handshake messages; implementations may alter them in transit.
pub trait PasnTransport {
    fn carry(&mut self, msg_type: u8, msg: Vec<u8>) -> Vec<u8>;
}

pub struct HonestTransport;

impl PasnTransport for HonestTransport {
    fn carry(&mut self, _msg_type: u8, msg: Vec<u8>) -> Vec<u8> {
        msg
    }
}

/// Runs all three messages and returns both sides' PTKSA.
pub fn pasn_handshake(
    initiator: &mut PasnState,
    responder: &mut PasnState,
    transport: &mut dyn PasnTransport,
) -> Result<(Ptksa, Ptksa), SecureError> {
    let m1 = transport.carry(MSG1, initiator.msg1()?);
    let m2 = transport.carry(MSG2, responder.handle_msg1(&m1)?);
    let m3 = transport.carry(MSG3, initiator.handle_msg2(&m2)?);
    responder.handle_msg3(&m3)?;
    match (initiator.ptksa(), responder.ptksa()) {
        (Some(a), Some(b)) => Ok((a.clone(), b.clone())),
        _ => Err(SecureError::UnexpectedMessage),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn honest_run_agrees() {
        let mut i = PasnState::initiator(1, IftmrParams::default(), None);
        let mut r = PasnState::responder(2, None);
        let (a, b) = pasn_handshake(&mut i, &mut r, &mut HonestTransport).unwrap();
        assert_eq!(a, b);
        assert_eq!(i.pmk_id, r.pmk_id);
        assert_eq!(i.phase, PasnPhase::Established);
    }

    #[test]
    fn psk_changes_keys() {
        let run = |psk| {
            let mut i = PasnState::initiator(1, IftmrParams::default(), psk);
            let mut r = PasnState::responder(2, psk);
            pasn_handshake(&mut i, &mut r, &mut HonestTransport).unwrap().0
        };
        assert_ne!(run(None), run(Some([7; 32])));
    }

    #[test]
    fn mismatched_psk_fails_closed() {
        let mut i = PasnState::initiator(1, IftmrParams::default(), Some([1; 32]));
        let mut r = PasnState::responder(2, Some([2; 32]));
        // Frame keys do not depend on the PSK, so the handshake completes but
        // the resulting keys differ.
        let (a, b) = pasn_handshake(&mut i, &mut r, &mut HonestTransport).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn responder_override_is_a_param_mismatch() {
        let mut i = PasnState::initiator(1, IftmrParams::default(), None);
        let other = IftmrParams {
            burst_count: 9,
            ..IftmrParams::default()
        };
        let mut r = PasnState::responder_choosing(2, None, other);
        let err = pasn_handshake(&mut i, &mut r, &mut HonestTransport).unwrap_err();
        assert_eq!(err, SecureError::Abort(AbortReason::ParamMismatch));
        assert_eq!(i.phase, PasnPhase::Aborted(AbortReason::ParamMismatch));
        assert!(i.ptksa().is_none());
    }

    #[test]
    fn out_of_order_messages() {
        let mut r = PasnState::responder(2, None);
        assert_eq!(r.handle_msg3(&[3; 42]), Err(SecureError::UnexpectedMessage));
        let mut i = PasnState::initiator(1, IftmrParams::default(), None);
        assert_eq!(i.handle_msg2(&[2; 73]), Err(SecureError::UnexpectedMessage));
    }
}
