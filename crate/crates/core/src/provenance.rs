//! Reproducibility stamps embedded in every manifest, checkpoint and report.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const CODE_VERSION: &str = concat!("paraqnn-core ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stamp {
    pub code_version: String,
    /// SHA-256 of the canonical JSON of the configuration that produced the
    /// artifact.
    pub config_hash: String,
    pub seeds: Vec<u64>,
}

impl Stamp {
    pub fn check(&self) -> Result<()> {
        if self.code_version.is_empty() || self.config_hash.len() != 64 {
            return Err(Error::InvalidConfig("incomplete provenance stamp".into()));
        }
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn config_hash<T: Serialize>(config: &T) -> String {
    let json = serde_json::to_vec(config).expect("configuration serializes");
    sha256_hex(&json)
}

pub fn version_stamp<T: Serialize>(config: &T, seeds: &[u64]) -> Stamp {
    Stamp {
        code_version: CODE_VERSION.to_owned(),
        config_hash: config_hash(config),
        seeds: seeds.to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stamps_are_stable() {
        let a = version_stamp(&("rabi", 42u64), &[42]);
        let b = version_stamp(&("rabi", 42u64), &[42]);
        assert_eq!(a, b);
        assert_ne!(a.config_hash, version_stamp(&("rabi", 43u64), &[42]).config_hash);
        a.check().unwrap();
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(serde_json::from_str::<Stamp>(&json).unwrap(), a);
    }

    #[test]
    fn incomplete_stamp_fails_check() {
        let s = Stamp {
            code_version: String::new(),
            config_hash: "abc".into(),
            seeds: vec![],
        };
        assert!(s.check().is_err());
    }
}
