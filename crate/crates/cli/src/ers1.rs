//! The `ERS1` session container: one self-describing file per recorded
//! session.
//!
//! Layout, byte-exact:
//!
//! ```text
//! magic "ERS1" (4 bytes)
//! version        u16 LE (= 1)
//! header length  u32 LE
//! header         UTF-8 JSON: sample rate, channel names, sample count,
//!                triggers, and the full session manifest
//! samples        f32 LE, frame-major (all channels of sample 0, then
//!                sample 1, ...)
//! ```
//!
//! Ground-truth labels ride in the manifest section of the header;
//! segmentation and scoring APIs take the recording alone, so inference
//! never sees them.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use erpstream_core::eeg::{validate_recording, Violation};
use erpstream_core::{Array2, EegRecording, SessionManifest, TriggerEvent};

pub const MAGIC: [u8; 4] = *b"ERS1";
pub const VERSION: u16 = 1;

#[derive(Debug, thiserror::Error)]
pub enum Ers1Error {
    #[error("bad magic {found:?}, expected \"ERS1\"")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported version {found}, expected {VERSION}")]
    UnsupportedVersion { found: u16 },

    #[error("file ends inside the {section}: need {needed} bytes, have {available}")]
    Truncated {
        section: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("header declares {declared_frames} frames but payload holds {payload_frames}")]
    SampleCountMismatch {
        declared_frames: usize,
        payload_frames: usize,
    },

    #[error("header is not valid JSON: {0}")]
    HeaderDecode(#[from] serde_json::Error),

    #[error("decoded recording violates invariants: {0:?}")]
    InvalidRecording(Vec<Violation>),

    #[error("decoded manifest violates invariants: {0:?}")]
    InvalidManifest(Vec<Violation>),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Serialize, Deserialize)]
struct Header {
    sample_rate_hz: f64,
    channel_names: Vec<String>,
    n_samples: u64,
    triggers: Vec<TriggerEvent>,
    manifest: SessionManifest,
}

/// Serializes a session to the ERS1 byte layout.
pub fn encode(rec: &EegRecording, manifest: &SessionManifest) -> Vec<u8> {
    let header = Header {
        sample_rate_hz: rec.sample_rate_hz,
        channel_names: rec.channel_names.clone(),
        n_samples: rec.n_samples() as u64,
        triggers: rec.triggers.clone(),
        manifest: manifest.clone(),
    };
    let header_json = serde_json::to_vec(&header).expect("header serializes");
    let n_channels = rec.n_channels();
    let n_samples = rec.n_samples();
    let mut out = Vec::with_capacity(10 + header_json.len() + 4 * n_channels * n_samples);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_json);
    for s in 0..n_samples {
        for c in 0..n_channels {
            out.extend_from_slice(&rec.samples.get(c, s).to_le_bytes());
        }
    }
    out
}

/// Parses the ERS1 byte layout back into a validated session.
pub fn decode(bytes: &[u8]) -> Result<(EegRecording, SessionManifest), Ers1Error> {
    let need = |section: &'static str, at: usize, n: usize| -> Result<(), Ers1Error> {
        if bytes.len() < at + n {
            Err(Ers1Error::Truncated {
                section,
                needed: n,
                available: bytes.len().saturating_sub(at),
            })
        } else {
            Ok(())
        }
    };
    need("magic", 0, 4)?;
    let mut magic = [0u8; 4];
    magic.copy_from_slice(&bytes[..4]);
    if magic != MAGIC {
        return Err(Ers1Error::BadMagic { found: magic });
    }
    need("version", 4, 2)?;
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Ers1Error::UnsupportedVersion { found: version });
    }
    need("header length", 6, 4)?;
    let header_len = u32::from_le_bytes([bytes[6], bytes[7], bytes[8], bytes[9]]) as usize;
    need("header", 10, header_len)?;
    let header: Header = serde_json::from_slice(&bytes[10..10 + header_len])?;

    let n_channels = header.channel_names.len();
    let declared_frames = header.n_samples as usize;
    let payload = &bytes[10 + header_len..];
    let frame_bytes = 4 * n_channels.max(1);
    let expected_bytes = declared_frames * frame_bytes;
    if payload.len() < expected_bytes {
        return Err(Ers1Error::Truncated {
            section: "sample payload",
            needed: expected_bytes,
            available: payload.len(),
        });
    }
    if payload.len() > expected_bytes {
        return Err(Ers1Error::SampleCountMismatch {
            declared_frames,
            payload_frames: payload.len() / frame_bytes,
        });
    }

    let mut samples = Array2::zeros(n_channels, declared_frames);
    for s in 0..declared_frames {
        for c in 0..n_channels {
            let at = (s * n_channels + c) * 4;
            let v = f32::from_le_bytes([
                payload[at],
                payload[at + 1],
                payload[at + 2],
                payload[at + 3],
            ]);
            samples.set(c, s, v);
        }
    }
    let rec = EegRecording {
        sample_rate_hz: header.sample_rate_hz,
        channel_names: header.channel_names,
        samples,
        triggers: header.triggers,
    };
    let violations = validate_recording(&rec);
    if !violations.is_empty() {
        return Err(Ers1Error::InvalidRecording(violations));
    }
    let manifest_violations = header.manifest.violations();
    if !manifest_violations.is_empty() {
        return Err(Ers1Error::InvalidManifest(manifest_violations));
    }
    Ok((rec, header.manifest))
}

pub fn write_recording(
    path: &Path,
    rec: &EegRecording,
    manifest: &SessionManifest,
) -> Result<(), Ers1Error> {
    fs::write(path, encode(rec, manifest))?;
    Ok(())
}

pub fn read_recording(path: &Path) -> Result<(EegRecording, SessionManifest), Ers1Error> {
    decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use erpstream_core::synth::{synth_session, SynthConfig};
    use erpstream_core::Paradigm;

    fn session() -> (EegRecording, SessionManifest) {
        let config = SynthConfig {
            n_channels: 4,
            ..SynthConfig::default()
        };
        synth_session(&config, "s01", 0, Paradigm::Normal)
    }

    #[test]
    fn roundtrip_is_exact() {
        let (rec, man) = session();
        let bytes = encode(&rec, &man);
        let (rec2, man2) = decode(&bytes).unwrap();
        assert_eq!(rec, rec2);
        assert_eq!(man, man2);
        // Byte-level determinism as well.
        assert_eq!(bytes, encode(&rec2, &man2));
    }

    #[test]
    fn bad_magic_is_rejected() {
        let (rec, man) = session();
        let mut bytes = encode(&rec, &man);
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(
            decode(&bytes).unwrap_err(),
            Ers1Error::BadMagic { found } if &found == b"XXXX"
        ));
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let (rec, man) = session();
        let mut bytes = encode(&rec, &man);
        bytes[4..6].copy_from_slice(&7u16.to_le_bytes());
        assert!(matches!(
            decode(&bytes).unwrap_err(),
            Ers1Error::UnsupportedVersion { found: 7 }
        ));
    }

    #[test]
    fn truncated_payload_names_the_shortfall() {
        let (rec, man) = session();
        let mut bytes = encode(&rec, &man);
        // Drop exactly one frame (4 bytes per channel).
        bytes.truncate(bytes.len() - 4 * rec.n_channels());
        match decode(&bytes).unwrap_err() {
            Ers1Error::Truncated {
                section, needed, available, ..
            } => {
                assert_eq!(section, "sample payload");
                assert_eq!(needed - available, 4 * rec.n_channels());
            }
            other => panic!("expected truncation, got {other}"),
        }
    }

    #[test]
    fn trailing_bytes_are_a_count_mismatch() {
        let (rec, man) = session();
        let mut bytes = encode(&rec, &man);
        bytes.extend_from_slice(&[0u8; 16]); // one extra frame at 4 channels
        assert!(matches!(
            decode(&bytes).unwrap_err(),
            Ers1Error::SampleCountMismatch { .. }
        ));
    }

    #[test]
    fn header_truncation_is_detected() {
        let (rec, man) = session();
        let bytes = encode(&rec, &man);
        assert!(matches!(
            decode(&bytes[..8]).unwrap_err(),
            Ers1Error::Truncated { section: "header length", .. }
        ));
    }

    #[test]
    fn file_roundtrip() {
        let dir = std::env::temp_dir().join(format!("ers1-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("session.ers1");
        let (rec, man) = session();
        write_recording(&path, &rec, &man).unwrap();
        let (rec2, man2) = read_recording(&path).unwrap();
        assert_eq!(rec, rec2);
        assert_eq!(man, man2);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
