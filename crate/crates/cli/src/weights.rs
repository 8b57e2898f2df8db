//! The `ERPW` network weight file.
//!
//! Layout, byte-exact:
//!
//! ```text
//! magic "ERPW" (4 bytes)
//! version       u16 LE (= 1)
//! tensor count  u32 LE
//! per tensor:
//!   name length u16 LE, name (UTF-8)
//!   rank        u8
//!   dims        u32 LE x rank
//!   data        f32 LE, row-major
//! ```
//!
//! Tensor kinds (weight / bias / norm / running statistic) are recovered
//! from the names, which follow the `blockN.*` / `dense.*` scheme of the
//! network module.

use std::fs;
use std::path::Path;

use erpstream_core::net::{
    params_match_spec, NetworkParameters, NetworkSpec, ParamKind, Tensor,
};

pub const MAGIC: [u8; 4] = *b"ERPW";
pub const VERSION: u16 = 1;

#[derive(Debug, thiserror::Error)]
pub enum WeightsError {
    #[error("bad magic {found:?}, expected \"ERPW\"")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported version {found}, expected {VERSION}")]
    UnsupportedVersion { found: u16 },

    #[error("file ends inside {section}: need {needed} bytes, have {available}")]
    Truncated {
        section: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("tensor name is not UTF-8")]
    BadName,

    #[error("{0}")]
    ShapeMismatch(#[from] erpstream_core::net::NetError),

    #[error("tensor {name} holds a non-finite value")]
    NonFinite { name: String },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn kind_for(name: &str) -> ParamKind {
    if name.ends_with(".running_mean") || name.ends_with(".running_var") {
        ParamKind::RunningStat
    } else if name.contains(".norm.") {
        ParamKind::Norm
    } else if name.ends_with(".bias") {
        ParamKind::Bias
    } else {
        ParamKind::Weight
    }
}

pub fn encode(params: &NetworkParameters<f32>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for entry in params.entries() {
        let name = entry.name.as_bytes();
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name);
        out.push(entry.tensor.dims.len() as u8);
        for &d in &entry.tensor.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &entry.tensor.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<NetworkParameters<f32>, WeightsError> {
    struct Reader<'a> {
        bytes: &'a [u8],
        at: usize,
    }
    impl<'a> Reader<'a> {
        fn take(&mut self, section: &'static str, n: usize) -> Result<&'a [u8], WeightsError> {
            if self.bytes.len() < self.at + n {
                return Err(WeightsError::Truncated {
                    section,
                    needed: n,
                    available: self.bytes.len() - self.at,
                });
            }
            let slice = &self.bytes[self.at..self.at + n];
            self.at += n;
            Ok(slice)
        }
    }
    let mut r = Reader { bytes, at: 0 };
    let magic = r.take("magic", 4)?;
    if magic != MAGIC {
        let mut found = [0u8; 4];
        found.copy_from_slice(magic);
        return Err(WeightsError::BadMagic { found });
    }
    let v = r.take("version", 2)?;
    let version = u16::from_le_bytes([v[0], v[1]]);
    if version != VERSION {
        return Err(WeightsError::UnsupportedVersion { found: version });
    }
    let c = r.take("tensor count", 4)?;
    let count = u32::from_le_bytes([c[0], c[1], c[2], c[3]]);

    let mut params = NetworkParameters::default();
    for _ in 0..count {
        let nl = r.take("name length", 2)?;
        let name_len = u16::from_le_bytes([nl[0], nl[1]]) as usize;
        let name = std::str::from_utf8(r.take("name", name_len)?)
            .map_err(|_| WeightsError::BadName)?
            .to_string();
        let rank = r.take("rank", 1)?[0] as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            let d = r.take("dims", 4)?;
            dims.push(u32::from_le_bytes([d[0], d[1], d[2], d[3]]) as usize);
        }
        let n: usize = dims.iter().product();
        let raw = r.take("tensor data", 4 * n)?;
        let mut data = Vec::with_capacity(n);
        for chunk in raw.chunks_exact(4) {
            data.push(f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]));
        }
        params.push(&name, kind_for(&name), Tensor { dims, data });
    }
    Ok(params)
}

pub fn save_weights(path: &Path, params: &NetworkParameters<f32>) -> Result<(), WeightsError> {
    fs::write(path, encode(params))?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<NetworkParameters<f32>, WeightsError> {
    decode(&fs::read(path)?)
}

/// Loads weights and checks them against the network spec: exact tensor
/// names and shapes, finite values only.
pub fn load_weights_checked(
    path: &Path,
    spec: &NetworkSpec,
) -> Result<NetworkParameters<f32>, WeightsError> {
    let params = load_weights(path)?;
    params_match_spec(&params, spec)?;
    if let Some(entry) = params
        .entries()
        .iter()
        .find(|e| e.tensor.data.iter().any(|v| !v.is_finite()))
    {
        return Err(WeightsError::NonFinite {
            name: entry.name.clone(),
        });
    }
    Ok(params)
}
