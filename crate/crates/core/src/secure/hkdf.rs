//! HMAC-SHA-256 extract-and-expand key derivation.

use hmac::{Hmac, KeyInit, Mac};
use sha2::Sha256;

use super::SecureError;

pub type HmacSha256 = Hmac<Sha256>;
pub const HASH_LEN: usize = 32;
pub const MAX_OUTPUT_LEN: usize = 255 * HASH_LEN;

pub fn hmac_sha256(key: &[u8], parts: &[&[u8]]) -> [u8; HASH_LEN] {
    let mut mac = <HmacSha256 as KeyInit>::new_from_slice(key).expect("HMAC accepts any key length");
    for p in parts {
        mac.update(p);
    }
    mac.finalize().into_bytes().into()
}

/// `PRK = HMAC(salt, IKM)`; an empty salt acts as 32 zero bytes.
pub fn hkdf_extract(salt: &[u8], ikm: &[u8]) -> [u8; HASH_LEN] {
    hmac_sha256(salt, &[ikm])
}

/// `T(i) = HMAC(PRK, T(i-1) ‖ info ‖ i)`, concatenated and cut to `len`.
pub fn hkdf_expand(prk: &[u8], info: &[u8], len: usize) -> Result<Vec<u8>, SecureError> {
    if len > MAX_OUTPUT_LEN {
        return Err(SecureError::OutputTooLong(len));
    }
    let mut out = Vec::with_capacity(len);
    let mut block: Vec<u8> = Vec::new();
    let mut counter = 1u8;
    while out.len() < len {
        block = hmac_sha256(prk, &[&block, info, &[counter]]).to_vec();
        out.extend_from_slice(&block);
        counter = counter.wrapping_add(1);
    }
    out.truncate(len);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_length_and_limit() {
        assert!(hkdf_expand(&[1; 32], b"", 0).unwrap().is_empty());
        assert_eq!(hkdf_expand(&[1; 32], b"", MAX_OUTPUT_LEN).unwrap().len(), MAX_OUTPUT_LEN);
        assert!(hkdf_expand(&[1; 32], b"", MAX_OUTPUT_LEN + 1).is_err());
    }

    #[test]
    fn empty_salt_equals_zero_salt() {
        assert_eq!(hkdf_extract(&[], b"ikm"), hkdf_extract(&[0; 32], b"ikm"));
    }
}
