use sha2::{Digest, Sha256};

/// Stable 64-bit hash: the first eight bytes of `SHA-256(salt ‖ 0x00 ‖ data)`.
pub fn stable_hash(salt: &[u8], data: &[u8]) -> u64 {
    let mut h = Sha256::new();
    h.update(salt);
    h.update([0u8]);
    h.update(data);
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Lower-case hex SHA-256 of the concatenated parts.
pub fn sha256_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    hex::encode(h.finalize())
}
