//! Run manifests: what was run, with which seed, on which files.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::formats::{read_text, write_text, FormatError, ParseError};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &str, bytes: &[u8]) -> Self {
        Self { path: path.to_string(), sha256: sha256_hex(bytes) }
    }
}

/// Everything needed to repeat a run. `argv` always carries the seed used.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub seed: Option<u64>,
    pub version: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn read(path: &Path) -> Result<Self, FormatError> {
        let text = read_text(path)?;
        serde_json::from_str(&text).map_err(|e| ParseError { line: e.line(), message: e.to_string() }.at(path))
    }

    pub fn write(&self, path: &Path) -> Result<(), FormatError> {
        write_text(path, &self.to_json())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn json_round_trip() {
        let m = RunManifest {
            command: "tvd".into(),
            argv: vec!["indist".into(), "tvd".into()],
            seed: Some(7),
            version: "0.1.0".into(),
            inputs: vec![FileDigest::of("a.json", b"x")],
            outputs: vec![],
        };
        assert_eq!(serde_json::from_str::<RunManifest>(&m.to_json()).unwrap(), m);
    }
}
