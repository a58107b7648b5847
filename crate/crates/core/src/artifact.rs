//! Provenance stamps and content hashing shared by every written artifact.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Embedded in every output file so a run can be traced back to its inputs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub config_hash: String,
    pub master_seed: u64,
}

impl Provenance {
    pub fn new(config_hash: impl Into<String>, master_seed: u64) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_string(),
            config_hash: config_hash.into(),
            master_seed,
        }
    }

    /// Hashes the canonical JSON form of `config`.
    pub fn for_config<T: Serialize>(config: &T, master_seed: u64) -> Self {
        let canonical = serde_json::to_vec(config).expect("config serializes");
        Self::new(sha256_hex(&canonical), master_seed)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
