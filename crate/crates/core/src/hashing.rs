use sha2::{Digest, Sha256};

/// Hex-encoded SHA-256 of `data`, truncated to `len` hex characters.
pub fn short_hash(data: &[u8], len: usize) -> String {
    let mut s = hex::encode(Sha256::digest(data));
    s.truncate(len.min(64));
    s
}

/// Hash several string parts with length prefixes so that ("ab","c") and
/// ("a","bc") never collide.
pub fn hash_parts(parts: &[&str]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    h.finalize().into()
}

/// Derive a 64-bit RNG seed from a list of parts.
pub fn derive_seed(parts: &[&str]) -> u64 {
    let digest = hash_parts(parts);
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parts_are_length_prefixed() {
        assert_ne!(hash_parts(&["ab", "c"]), hash_parts(&["a", "bc"]));
        assert_eq!(derive_seed(&["x", "1"]), derive_seed(&["x", "1"]));
    }

    #[test]
    fn short_hash_truncates() {
        assert_eq!(short_hash(b"", 8), "e3b0c442");
        assert_eq!(short_hash(b"", 100).len(), 64);
    }
}
