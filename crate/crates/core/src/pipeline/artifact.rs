//! Model artifact files.
//!
//! An artifact is a one-line header followed by a JSON payload:
//!
//! ```text
//! HYENA-ARTIFACT v1 kind=<kind> sha256=<hex digest of the payload bytes>
//! {"fingerprint": "...", "model": {...}}
//! ```
//!
//! The payload is written with round-trip float formatting, so loading and
//! re-saving an artifact reproduces it byte for byte.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const ARTIFACT_MAGIC: &str = "HYENA-ARTIFACT";
pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    /// Fingerprint of the settings the model was trained with.
    pub fingerprint: String,
    pub model: T,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn encode<T: Serialize>(kind: &str, fingerprint: &str, model: &T) -> Result<String> {
    let payload = serde_json::to_string(&Envelope {
        fingerprint: fingerprint.to_string(),
        model,
    })?;
    Ok(format!(
        "{ARTIFACT_MAGIC} v{ARTIFACT_VERSION} kind={kind} sha256={}\n{payload}\n",
        sha256_hex(payload.as_bytes())
    ))
}

pub fn decode<T: DeserializeOwned>(kind: &str, text: &str) -> Result<Envelope<T>> {
    let mismatch = |m: String| Error::ArtifactVersionMismatch(m);
    let (header, payload) = text
        .split_once('\n')
        .ok_or_else(|| mismatch("no header line".into()))?;
    let payload = payload.strip_suffix('\n').unwrap_or(payload);
    let fields: Vec<&str> = header.split(' ').collect();
    if fields.len() != 4 || fields[0] != ARTIFACT_MAGIC {
        return Err(mismatch(format!("malformed header `{header}`")));
    }
    if fields[1] != format!("v{ARTIFACT_VERSION}") {
        return Err(mismatch(format!(
            "artifact version {} (expected v{ARTIFACT_VERSION})",
            fields[1]
        )));
    }
    if fields[2] != format!("kind={kind}") {
        return Err(mismatch(format!("expected kind={kind}, found {}", fields[2])));
    }
    let digest = fields[3]
        .strip_prefix("sha256=")
        .ok_or_else(|| mismatch("missing checksum".into()))?;
    if digest != sha256_hex(payload.as_bytes()) {
        return Err(mismatch("checksum does not match payload".into()));
    }
    Ok(serde_json::from_str(payload)?)
}

pub fn save<T: Serialize>(path: &Path, kind: &str, fingerprint: &str, model: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, encode(kind, fingerprint, model)?)?;
    Ok(())
}

pub fn load<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<Envelope<T>> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::MissingArtifact(path.to_path_buf()))
        }
        Err(e) => return Err(e.into()),
    };
    decode(kind, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Thing {
        w: Vec<f64>,
        name: String,
    }

    fn thing() -> Thing {
        Thing {
            w: vec![0.1, -1.0 / 3.0, 1e-300, 6.02e23],
            name: "x".into(),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let text = encode("thing", "abc", &thing()).unwrap();
        let back: Envelope<Thing> = decode("thing", &text).unwrap();
        assert_eq!(back.model, thing());
        assert_eq!(back.fingerprint, "abc");
        assert_eq!(encode("thing", "abc", &back.model).unwrap(), text);
    }

    #[test]
    fn corruption_and_version_detected() {
        let text = encode("thing", "abc", &thing()).unwrap();
        let corrupted = text.replace("\"x\"", "\"y\"");
        assert!(matches!(
            decode::<Thing>("thing", &corrupted),
            Err(Error::ArtifactVersionMismatch(_))
        ));
        let old = text.replacen("v1", "v0", 1);
        assert!(matches!(decode::<Thing>("thing", &old), Err(Error::ArtifactVersionMismatch(_))));
        assert!(matches!(decode::<Thing>("other", &text), Err(Error::ArtifactVersionMismatch(_))));
    }

    #[test]
    fn missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nope.artifact");
        assert!(matches!(load::<Thing>(&p, "thing"), Err(Error::MissingArtifact(_))));
    }
}
