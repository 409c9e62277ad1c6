//! Versioned, checksummed state container.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "IMMF"
//! 4       2     format version, little endian
//! 6       2     flags, reserved, zero
//! 8       8     payload length in bytes, little endian
//! 16      32    SHA-256 of the payload
//! 48      n     payload: bincode-encoded ClassifierState
//! ```

use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::CorpusError;
use crate::immune::ClassifierState;

pub const MAGIC: [u8; 4] = *b"IMMF";
pub const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 48;

pub fn encode_state(state: &ClassifierState) -> Vec<u8> {
    let payload = bincode::serialize(state).expect("state is always serializable");
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&Sha256::digest(&payload));
    out.extend_from_slice(&payload);
    out
}

pub fn decode_state(bytes: &[u8]) -> Result<ClassifierState, CorpusError> {
    if bytes.len() < HEADER_LEN {
        return Err(CorpusError::CorruptState(format!(
            "{} bytes is shorter than the header",
            bytes.len()
        )));
    }
    if bytes[..4] != MAGIC {
        return Err(CorpusError::CorruptState("bad magic".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(CorpusError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let declared = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != declared {
        return Err(CorpusError::CorruptState(format!(
            "payload is {} bytes, header declares {declared}",
            payload.len()
        )));
    }
    if Sha256::digest(payload)[..] != bytes[16..48] {
        return Err(CorpusError::CorruptState("checksum mismatch".into()));
    }
    bincode::deserialize(payload).map_err(|e| CorpusError::CorruptState(e.to_string()))
}

/// Writes the state next to `path` and renames it into place, so readers
/// see either the old file or the new one.
pub fn save_state(state: &ClassifierState, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CorpusError::io(path, e))?;
    tmp.write_all(&encode_state(state))
        .map_err(|e| CorpusError::io(path, e))?;
    tmp.as_file()
        .sync_all()
        .map_err(|e| CorpusError::io(path, e))?;
    tmp.persist(path)
        .map_err(|e| CorpusError::io(path, e.error))?;
    Ok(())
}

pub fn load_state(path: impl AsRef<Path>) -> Result<ClassifierState, CorpusError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| CorpusError::io(path, e))?;
    decode_state(&bytes)
}

/// Lossless JSON rendering of the whole state, for inspection.
pub fn export_json(state: &ClassifierState) -> String {
    serde_json::to_string_pretty(state).expect("state is always serializable")
}

pub fn import_json(text: &str) -> Result<ClassifierState, CorpusError> {
    serde_json::from_str(text).map_err(|e| CorpusError::CorruptState(e.to_string()))
}
