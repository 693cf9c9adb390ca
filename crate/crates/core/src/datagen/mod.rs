//! Synthetic combustor: time-aligned 4-channel pressure series and flame
//! frames with stable and unstable signatures, plus dataset serialization.

mod dataset;
mod io;
mod oracle;
mod pressure;
mod render;

pub use dataset::{build_dataset, frame_indices, generate, Dataset, DatasetHeader, Sample};
pub use io::{decode_dataset, encode_dataset, frame_to_pgm, pgm_to_frame, predicted_size, read_dataset, write_dataset};
pub use oracle::{label_oracle, oracle_report, OracleReport};
pub use pressure::{synth_pressure, Oscillation, PressureSeries};
pub use render::{render_frame, FlameFrame};

use serde::{Deserialize, Serialize};

pub const PRESSURE_RATE: u32 = 9000;
pub const FRAME_RATE: u32 = 3000;
/// Pressure samples per frame.
pub const RATE_RATIO: usize = (PRESSURE_RATE / FRAME_RATE) as usize;
pub const DURATION_S: u32 = 3;
pub const SERIES_LEN: usize = (PRESSURE_RATE * DURATION_S) as usize;
pub const CHANNELS: usize = 4;
pub const DEFAULT_WINDOW: usize = 75;
pub const DEFAULT_STRIDE: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Stable,
    Unstable,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        match self {
            Label::Stable => 0,
            Label::Unstable => 1,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Label::Stable),
            1 => Some(Label::Unstable),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Stable => "stable",
            Label::Unstable => "unstable",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_u8(self) -> u8 {
        match self {
            Split::Train => 0,
            Split::Test => 1,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Split::Train),
            1 => Some(Split::Test),
            _ => None,
        }
    }
}

/// One operating point. `seed` is the root of the condition's random streams.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionSpec {
    pub id: u32,
    /// mm, 90 (partial) or 120 (full premixing).
    pub premixing_length: f32,
    /// Fuel flow rate, lpm.
    pub ffr: f32,
    /// Air flow rate, lpm.
    pub afr: f32,
    pub label: Label,
    pub split: Split,
    pub seed: u64,
}

impl ConditionSpec {
    /// e.g. `unstable_90_45_900`.
    pub fn name(&self) -> String {
        format!("{}_{}_{}_{}", self.label.name(), self.premixing_length, self.ffr, self.afr)
    }
}

/// The six operating points: four for training, two for testing.
pub fn default_conditions(master_seed: u64) -> Vec<ConditionSpec> {
    use Label::*;
    use Split::*;
    let roster = [
        (120.0, 60.0, 600.0, Stable, Train),
        (90.0, 45.0, 450.0, Stable, Train),
        (120.0, 45.0, 900.0, Unstable, Train),
        (90.0, 28.0, 600.0, Unstable, Train),
        (120.0, 45.0, 450.0, Stable, Test),
        (90.0, 45.0, 900.0, Unstable, Test),
    ];
    roster
        .iter()
        .enumerate()
        .map(|(i, &(premixing_length, ffr, afr, label, split))| ConditionSpec {
            id: i as u32,
            premixing_length,
            ffr,
            afr,
            label,
            split,
            seed: crate::rng::derive_seed(master_seed, i as u64),
        })
        .collect()
}

/// Generator amplitude bands and noise levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    /// Per-condition RMS drawn uniformly from this band (Pa).
    pub stable_rms: (f64, f64),
    pub unstable_rms: (f64, f64),
    /// Corner of the stable noise spectrum (Hz).
    pub stable_band_hz: f64,
    pub fundamental_hz: (f64, f64),
    /// Second-harmonic amplitude relative to the fundamental.
    pub harmonic_ratio: f64,
    /// Broadband noise RMS added to unstable signals (Pa).
    pub unstable_noise_rms: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            stable_rms: (35.0, 85.0),
            unstable_rms: (560.0, 860.0),
            stable_band_hz: 500.0,
            fundamental_hz: (130.0, 150.0),
            harmonic_ratio: 0.25,
            unstable_noise_rms: 25.0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let ok = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && 0.0 <= a && a <= b;
        if !ok(self.stable_rms) || !ok(self.unstable_rms) || !ok(self.fundamental_hz) {
            return Err(crate::Error::param("generator", "bands must be finite, non-negative and ordered"));
        }
        if self.unstable_noise_rms < 0.0 || self.unstable_noise_rms >= self.unstable_rms.0 {
            return Err(crate::Error::param("generator", "unstable noise must be below the unstable RMS band"));
        }
        // written to also reject NaN
        if self.stable_band_hz.is_nan()
            || self.stable_band_hz <= 0.0
            || self.harmonic_ratio.is_nan()
            || self.harmonic_ratio < 0.0
        {
            return Err(crate::Error::param("generator", "band and harmonic ratio must be positive"));
        }
        Ok(())
    }
}
