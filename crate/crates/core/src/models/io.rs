//! Model files: `"VSNM"` | version u16 | role u8 | fingerprint [32] |
//! provenance hash [32] | parameter count u64 | parameters as f32, all
//! little-endian, parameters in declaration order.

use std::path::Path;

use super::spec::{hex, Role};
use super::Network;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::util::write_atomic;

const MAGIC: &[u8; 4] = b"VSNM";
const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 1 + 32 + 32 + 8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelHeader {
    pub version: u16,
    pub role: Role,
    pub fingerprint: [u8; 32],
    /// Hash of the run configuration that produced the file.
    pub provenance: [u8; 32],
    pub parameter_count: u64,
}

impl ModelHeader {
    pub fn fingerprint_hex(&self) -> String {
        hex(&self.fingerprint)
    }
}

pub fn encode_model<S: Scalar>(model: &dyn Network<S>, provenance: [u8; 32]) -> Vec<u8> {
    let spec = model.spec();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * spec.parameter_count);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(spec.role.code());
    out.extend_from_slice(&spec.fingerprint_bytes());
    out.extend_from_slice(&provenance);
    out.extend_from_slice(&(spec.parameter_count as u64).to_le_bytes());
    for p in model.params() {
        for &v in p.data() {
            out.extend_from_slice(&v.as_f32().to_le_bytes());
        }
    }
    out
}

pub fn save_model<S: Scalar>(path: &Path, model: &dyn Network<S>, provenance: [u8; 32]) -> Result<()> {
    write_atomic(path, &encode_model(model, provenance))
}

fn parse_header(bytes: &[u8]) -> Result<ModelHeader> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            detail: format!("truncated header ({} of {HEADER_LEN} bytes)", bytes.len()),
        });
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::Format { offset: 0, detail: "bad magic, expected \"VSNM\"".into() });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::Format { offset: 4, detail: format!("unsupported version {version}") });
    }
    let role = Role::from_code(bytes[6])?;
    let mut fingerprint = [0u8; 32];
    fingerprint.copy_from_slice(&bytes[7..39]);
    let mut provenance = [0u8; 32];
    provenance.copy_from_slice(&bytes[39..71]);
    let parameter_count = u64::from_le_bytes(bytes[71..79].try_into().expect("8 bytes"));
    Ok(ModelHeader { version, role, fingerprint, provenance, parameter_count })
}

pub fn read_model_header(path: &Path) -> Result<ModelHeader> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_header(&bytes)
}

/// Loads parameters into `model`, which must have the same role and
/// architecture fingerprint as the file.
pub fn decode_model<S: Scalar>(bytes: &[u8], model: &mut dyn Network<S>) -> Result<ModelHeader> {
    let header = parse_header(bytes)?;
    let spec = model.spec();
    if header.fingerprint != spec.fingerprint_bytes() || header.role != spec.role {
        return Err(Error::Incompatible {
            expected: format!("{} {}", spec.role.name(), spec.fingerprint),
            found: format!("{} {}", header.role.name(), header.fingerprint_hex()),
        });
    }
    let expected_len = HEADER_LEN + 4 * spec.parameter_count;
    if header.parameter_count as usize != spec.parameter_count {
        return Err(Error::Format {
            offset: 71,
            detail: format!("parameter count {} != {}", header.parameter_count, spec.parameter_count),
        });
    }
    if bytes.len() != expected_len {
        return Err(Error::Format {
            offset: bytes.len().min(expected_len) as u64,
            detail: format!("file is {} bytes, header predicts {expected_len}", bytes.len()),
        });
    }
    let mut pos = HEADER_LEN;
    for p in model.params_mut() {
        for v in p.data_mut() {
            *v = S::lit(f32::from_le_bytes(bytes[pos..pos + 4].try_into().expect("4 bytes")) as f64);
            pos += 4;
        }
    }
    Ok(header)
}

pub fn load_model<S: Scalar>(path: &Path, model: &mut dyn Network<S>) -> Result<ModelHeader> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes, model)
}
