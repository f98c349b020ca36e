//! Pseudorandom TRN subfields shared by the two ranging stations.

use std::cell::RefCell;
use std::collections::BTreeSet;

use num_complex::Complex64;

use super::hkdf::{hkdf_expand, hkdf_extract, HASH_LEN};
use super::SecureError;
use crate::beamtraining::{combine_pdps, pdp_floor};
use crate::channel::{add_awgn, pdp_from_cir, propagate, Link, Pdp, SimChannel};
use crate::golay::{estimate_cir, estimate_cir_with_references, Cir, GolaySequencePair};
use crate::rng::{derive_seed, stream};
use crate::session::{SessionError, TrnProbe};

pub const SECURE_TRN_LABEL: &[u8] = b"EDMG Secure RTT";
/// Interference-to-signal ratio of a jammed subfield.
pub const JAMMING_POWER_DB: f64 = 30.0;
/// A subfield whose noise floor exceeds the quietest one in its PPDU by this
/// factor is treated as corrupted.
pub const CORRUPTION_FLOOR_RATIO: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecureTrnSeed {
    pub prk: [u8; HASH_LEN],
    pub label: &'static [u8],
    pub length_bits: usize,
}

impl SecureTrnSeed {
    pub fn new(secret_key: &[u8], pmk_id: &[u8], length_bits: usize) -> Result<Self, SecureError> {
        if length_bits == 0 {
            return Err(SecureError::ZeroLength);
        }
        Ok(Self {
            prk: hkdf_extract(pmk_id, secret_key),
            label: SECURE_TRN_LABEL,
            length_bits,
        })
    }

    /// Bits MSB-first from the expanded bytes.
    pub fn bits(&self) -> Result<Vec<u8>, SecureError> {
        let bytes = hkdf_expand(&self.prk, self.label, self.length_bits.div_ceil(8))?;
        Ok(bytes
            .iter()
            .flat_map(|b| (0..8).rev().map(move |i| (b >> i) & 1))
            .take(self.length_bits)
            .collect())
    }
}

pub fn derive_secure_trn(secret_key: &[u8], pmk_id: &[u8], length_bits: usize) -> Result<Vec<u8>, SecureError> {
    SecureTrnSeed::new(secret_key, pmk_id, length_bits)?.bits()
}

/// `(1 - 2b) · j^k`, computed without trigonometry so symbols are exact.
pub fn map_pi2_bpsk(bits: &[u8]) -> Vec<Complex64> {
    bits.iter()
        .enumerate()
        .map(|(k, &b)| {
            let s = if b == 0 { 1.0 } else { -1.0 };
            match k % 4 {
                0 => Complex64::new(s, 0.0),
                1 => Complex64::new(0.0, s),
                2 => Complex64::new(-s, 0.0),
                _ => Complex64::new(0.0, -s),
            }
        })
        .collect()
}

/// One secure TRN subfield: two halves of `n` symbols, standing in for the
/// Golay `a` and `b` sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct SecureSubfield {
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
}

/// Splits `bits` into subfields of `2n` bits, zero-padding the last one.
pub fn secure_subfields(bits: &[u8], n: usize) -> Vec<SecureSubfield> {
    assert!(n > 0, "subfield half length must be positive");
    bits.chunks(2 * n)
        .map(|chunk| {
            let mut padded = chunk.to_vec();
            padded.resize(2 * n, 0);
            let symbols = map_pi2_bpsk(&padded);
            SecureSubfield {
                a: symbols[..n].to_vec(),
                b: symbols[n..].to_vec(),
            }
        })
        .collect()
}

fn receive(
    channel: &SimChannel,
    link: &Link,
    sub: &SecureSubfield,
    snr_db: f64,
    jammed: bool,
    seed: u64,
) -> Result<(Vec<Complex64>, Vec<Complex64>), SessionError> {
    let mut rx_a = propagate(&sub.a, channel, link, snr_db, derive_seed(seed, &[0])).map_err(channel_err)?;
    let mut rx_b = propagate(&sub.b, channel, link, snr_db, derive_seed(seed, &[1])).map_err(channel_err)?;
    if jammed {
        let sigma = channel.noise_sigma(-JAMMING_POWER_DB);
        add_awgn(&mut rx_a, sigma, &mut stream(seed, &[2]));
        add_awgn(&mut rx_b, sigma, &mut stream(seed, &[3]));
    }
    Ok((rx_a, rx_b))
}

fn channel_err(e: crate::channel::ChannelError) -> SessionError {
    SessionError::Beam(e.into())
}

/// A standard Golay receiver listening to a secure subfield.
pub fn eavesdropper_estimate(
    channel: &SimChannel,
    link: &Link,
    sub: &SecureSubfield,
    pair: &GolaySequencePair,
    snr_db: f64,
    seed: u64,
) -> Result<Cir, SessionError> {
    let (rx_a, rx_b) = receive(channel, link, sub, snr_db, false, seed)?;
    estimate_cir(&rx_a, &rx_b, pair).map_err(|e| channel_err(e.into()))
}

/// Legitimate receiver of secure subfields. Each measurement consumes the
/// next `subfields_per_ppdu` subfields; corrupted ones are discarded and the
/// rest combined.
#[derive(Debug)]
pub struct SecureTrnProbe {
    subfields: Vec<SecureSubfield>,
    subfields_per_ppdu: usize,
    jammed: BTreeSet<usize>,
    cursor: RefCell<usize>,
    discarded: RefCell<Vec<usize>>,
}

impl SecureTrnProbe {
    pub fn new(subfields: Vec<SecureSubfield>, subfields_per_ppdu: usize, jammed: BTreeSet<usize>) -> Self {
        Self {
            subfields,
            subfields_per_ppdu: subfields_per_ppdu.max(1),
            jammed,
            cursor: RefCell::new(0),
            discarded: RefCell::new(Vec::new()),
        }
    }

    pub fn consumed(&self) -> usize {
        *self.cursor.borrow()
    }

    pub fn discarded(&self) -> Vec<usize> {
        self.discarded.borrow().clone()
    }
}

impl TrnProbe for SecureTrnProbe {
    fn measure(&self, channel: &SimChannel, link: &Link, snr_db: f64, seed: u64) -> Result<Pdp, SessionError> {
        let start = *self.cursor.borrow();
        let end = start + self.subfields_per_ppdu;
        let batch = self
            .subfields
            .get(start..end)
            .ok_or_else(|| SessionError::Security("secure TRN sequence exhausted".into()))?;
        *self.cursor.borrow_mut() = end;

        let mut estimates = Vec::with_capacity(batch.len());
        for (offset, sub) in batch.iter().enumerate() {
            let index = start + offset;
            let jammed = self.jammed.contains(&index);
            let (rx_a, rx_b) = receive(channel, link, sub, snr_db, jammed, derive_seed(seed, &[offset as u64]))?;
            let cir = estimate_cir_with_references(&rx_a, &rx_b, &sub.a, &sub.b).map_err(|e| channel_err(e.into()))?;
            estimates.push((index, cir));
        }
        let quietest = estimates.iter().map(|(_, c)| c.noise_floor).fold(f64::INFINITY, f64::min);
        let n = batch[0].a.len();
        let floor = pdp_floor(channel, snr_db, n);
        let mut kept = Vec::new();
        for (index, cir) in estimates {
            let corrupted = cir.taps.is_empty() || cir.noise_floor > CORRUPTION_FLOOR_RATIO * quietest.max(floor);
            if corrupted {
                self.discarded.borrow_mut().push(index);
            } else {
                kept.push(pdp_from_cir(&cir, floor));
            }
        }
        if kept.is_empty() {
            return Err(SessionError::NoPath);
        }
        Ok(combine_pdps(&kept)?)
    }
}
