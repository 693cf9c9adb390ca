use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    ImageEncoder,
    ImageDecoder,
    TsEncoder,
    ImageClassifier,
    TsClassifier,
}

impl Role {
    pub fn code(self) -> u8 {
        match self {
            Role::ImageEncoder => 0,
            Role::ImageDecoder => 1,
            Role::TsEncoder => 2,
            Role::ImageClassifier => 3,
            Role::TsClassifier => 4,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        Ok(match code {
            0 => Role::ImageEncoder,
            1 => Role::ImageDecoder,
            2 => Role::TsEncoder,
            3 => Role::ImageClassifier,
            4 => Role::TsClassifier,
            _ => return Err(Error::Format { offset: 6, detail: format!("unknown role byte {code}") }),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Role::ImageEncoder => "image_encoder",
            Role::ImageDecoder => "image_decoder",
            Role::TsEncoder => "ts_encoder",
            Role::ImageClassifier => "image_classifier",
            Role::TsClassifier => "ts_classifier",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub role: Role,
    pub layers: Vec<String>,
    pub parameter_count: usize,
    /// Hex SHA-256 of the role and layer list.
    pub fingerprint: String,
}

impl ModelSpec {
    pub fn new(role: Role, layers: Vec<String>, parameter_count: usize) -> Self {
        let fingerprint = hex(&fingerprint_bytes(role, &layers));
        ModelSpec { role, layers, parameter_count, fingerprint }
    }

    pub fn fingerprint_bytes(&self) -> [u8; 32] {
        fingerprint_bytes(self.role, &self.layers)
    }
}

pub(crate) fn fingerprint_bytes(role: Role, layers: &[String]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(role.name().as_bytes());
    for l in layers {
        h.update(b"|");
        h.update(l.as_bytes());
    }
    h.finalize().into()
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 over the exact bit patterns of all parameter values.
pub fn parameter_digest<S: Scalar>(params: &[&Tensor<S>]) -> String {
    let mut h = Sha256::new();
    for p in params {
        for &v in p.data() {
            h.update(v.as_f64().to_bits().to_le_bytes());
        }
    }
    hex(&h.finalize())
}
