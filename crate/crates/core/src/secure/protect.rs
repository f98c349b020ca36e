//! Protected FTM frames: ChaCha20-Poly1305 over the encoded frame, keyed with
//! the PTKSA's TK. Wire form is `nonce (12) ‖ ciphertext ‖ tag (16)`.

use std::collections::BTreeSet;

use chacha20poly1305::aead::{Aead, Payload};
use chacha20poly1305::{ChaCha20Poly1305, KeyInit};

use super::pasn::Ptksa;
use super::SecureError;
use crate::frames::{decode_ftm_frame, encode_ftm_frame, FtmFrame};

pub const NONCE_LEN: usize = 12;
pub const TAG_LEN: usize = 16;
const AAD: &[u8] = b"PFTM";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtectedFrame {
    pub nonce: [u8; NONCE_LEN],
    /// Ciphertext with the tag appended.
    pub ciphertext: Vec<u8>,
}

impl ProtectedFrame {
    pub fn to_bytes(&self) -> Vec<u8> {
        [&self.nonce[..], &self.ciphertext].concat()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SecureError> {
        if bytes.len() < NONCE_LEN + TAG_LEN {
            return Err(SecureError::IntegrityFailure);
        }
        Ok(Self {
            nonce: bytes[..NONCE_LEN].try_into().expect("12 bytes"),
            ciphertext: bytes[NONCE_LEN..].to_vec(),
        })
    }
}

fn cipher(ptksa: &Ptksa) -> ChaCha20Poly1305 {
    ChaCha20Poly1305::new((&ptksa.tk()).into())
}

/// Stateless sealing; callers must never repeat a nonce under one key.
pub fn protect_ftm(frame: &FtmFrame, ptksa: &Ptksa, nonce: [u8; NONCE_LEN]) -> ProtectedFrame {
    let body = encode_ftm_frame(frame);
    let ciphertext = cipher(ptksa)
        .encrypt((&nonce).into(), Payload { msg: &body, aad: AAD })
        .expect("in-memory encryption cannot fail");
    ProtectedFrame { nonce, ciphertext }
}

pub fn unprotect_ftm(pf: &ProtectedFrame, ptksa: &Ptksa) -> Result<FtmFrame, SecureError> {
    let body = cipher(ptksa)
        .decrypt(
            (&pf.nonce).into(),
            Payload {
                msg: &pf.ciphertext,
                aad: AAD,
            },
        )
        .map_err(|_| SecureError::IntegrityFailure)?;
    decode_ftm_frame(&body).map_err(|_| SecureError::IntegrityFailure)
}

/// One station's protection state: refuses to seal under a used nonce and
/// to accept a replayed one.
#[derive(Debug)]
pub struct PftmContext {
    ptksa: Ptksa,
    sent: BTreeSet<[u8; NONCE_LEN]>,
    received: BTreeSet<[u8; NONCE_LEN]>,
}

impl PftmContext {
    pub fn new(ptksa: Ptksa) -> Self {
        Self {
            ptksa,
            sent: BTreeSet::new(),
            received: BTreeSet::new(),
        }
    }

    pub fn protect(&mut self, frame: &FtmFrame, nonce: [u8; NONCE_LEN]) -> Result<ProtectedFrame, SecureError> {
        if !self.sent.insert(nonce) {
            return Err(SecureError::NonceReuse);
        }
        Ok(protect_ftm(frame, &self.ptksa, nonce))
    }

    pub fn unprotect(&mut self, pf: &ProtectedFrame) -> Result<FtmFrame, SecureError> {
        if self.received.contains(&pf.nonce) {
            return Err(SecureError::NonceReuse);
        }
        let frame = unprotect_ftm(pf, &self.ptksa)?;
        self.received.insert(pf.nonce);
        Ok(frame)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(b: u8) -> Ptksa {
        Ptksa([b; 48])
    }

    fn frame() -> FtmFrame {
        FtmFrame {
            dialog_token: 3,
            follow_up_token: 2,
            tod_fs: 123_456,
            toa_fs: 789_000,
            ..FtmFrame::default()
        }
    }

    #[test]
    fn round_trip_and_tamper() {
        let pf = protect_ftm(&frame(), &key(1), [9; 12]);
        assert_eq!(pf.ciphertext.len(), 22 + TAG_LEN);
        assert_eq!(unprotect_ftm(&pf, &key(1)).unwrap(), frame());
        let mut bad = pf.clone();
        bad.ciphertext[0] ^= 1;
        assert_eq!(unprotect_ftm(&bad, &key(1)), Err(SecureError::IntegrityFailure));
        assert_eq!(unprotect_ftm(&pf, &key(2)), Err(SecureError::IntegrityFailure));
        let parsed = ProtectedFrame::from_bytes(&pf.to_bytes()).unwrap();
        assert_eq!(parsed, pf);
    }

    #[test]
    fn nonce_reuse_rejected() {
        let mut tx = PftmContext::new(key(1));
        let mut rx = PftmContext::new(key(1));
        let pf = tx.protect(&frame(), [1; 12]).unwrap();
        assert_eq!(tx.protect(&frame(), [1; 12]), Err(SecureError::NonceReuse));
        rx.unprotect(&pf).unwrap();
        assert_eq!(rx.unprotect(&pf), Err(SecureError::NonceReuse));
    }
}
