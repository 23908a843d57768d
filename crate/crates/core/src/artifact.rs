//! Configuration digests for run artifacts.
//!
//! Every file a run writes embeds the digest of the run's configuration so
//! mixed-run artifacts are detectable.

use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Stable digest of any serializable configuration value: SHA-256 of its
/// canonical JSON form (struct field order), truncated to 16 hex chars.
pub fn config_digest<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_string(value).expect("config serialization cannot fail");
    sha256_hex(json.as_bytes())[..16].to_string()
}
