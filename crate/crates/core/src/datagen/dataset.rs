use std::collections::HashSet;

use super::oracle::{oracle_report, OracleReport};
use super::{
    synth_pressure, ConditionSpec, FlameFrame, GeneratorConfig, Label, Split, CHANNELS, FRAME_RATE, PRESSURE_RATE,
    RATE_RATIO, SERIES_LEN,
};
use crate::error::{Error, Result};
use crate::models::FRAME_SIZE;
use crate::rng::stream;

const PRESSURE_STREAM: u64 = 1;
const FRAME_STREAM: u64 = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetHeader {
    pub window_len: usize,
    /// Spacing between consecutive samples, in pressure samples.
    pub stride: usize,
    pub channels: usize,
    pub frame_height: usize,
    pub frame_width: usize,
    pub pressure_rate: u32,
    pub frame_rate: u32,
    pub master_seed: u64,
    /// Hash of the configuration that produced the dataset.
    pub provenance: [u8; 32],
}

/// A frame with its causal pressure window (channel-major, Pa).
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub condition_id: u32,
    pub frame_index: u32,
    pub label: Label,
    pub window: Vec<f32>,
    pub frame: FlameFrame,
}

impl Sample {
    /// Pressure index of the last window sample, equal to the frame time.
    pub fn window_end(&self) -> usize {
        self.frame_index as usize * RATE_RATIO
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub conditions: Vec<ConditionSpec>,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn condition(&self, id: u32) -> Option<&ConditionSpec> {
        self.conditions.iter().find(|c| c.id == id)
    }

    /// Indices of samples whose condition belongs to `split`.
    pub fn indices(&self, split: Split) -> Vec<usize> {
        let ids: HashSet<u32> = self.conditions.iter().filter(|c| c.split == split).map(|c| c.id).collect();
        (0..self.samples.len()).filter(|&i| ids.contains(&self.samples[i].condition_id)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let h = &self.header;
        let ids: HashSet<u32> = self.conditions.iter().map(|c| c.id).collect();
        if ids.len() != self.conditions.len() {
            return Err(Error::param("dataset", "duplicate condition ids"));
        }
        for s in &self.samples {
            let cond = self
                .condition(s.condition_id)
                .ok_or_else(|| Error::param("dataset", format!("unknown condition {}", s.condition_id)))?;
            if s.label != cond.label {
                return Err(Error::Labeling(format!("sample label differs from condition {}", cond.id)));
            }
            if s.window.len() != h.channels * h.window_len || s.frame.pixels.len() != h.frame_height * h.frame_width {
                return Err(Error::dim("dataset", "sample sizes disagree with header"));
            }
        }
        Ok(())
    }
}

/// Frame indices kept for a series of `n` pressure samples: every frame
/// whose causal window fits, spaced by `stride` pressure samples.
pub fn frame_indices(n: usize, window_len: usize, stride: usize) -> Vec<usize> {
    let first = (window_len - 1).div_ceil(RATE_RATIO);
    let step = stride / RATE_RATIO;
    (first..).step_by(step).take_while(|j| j * RATE_RATIO < n).collect()
}

fn check_geometry(conditions: &[ConditionSpec], window_len: usize, stride: usize) -> Result<()> {
    if window_len == 0 || window_len > SERIES_LEN {
        return Err(Error::param("build_dataset", format!("window {window_len} outside 1..={SERIES_LEN}")));
    }
    if stride == 0 || !stride.is_multiple_of(RATE_RATIO) {
        return Err(Error::param(
            "build_dataset",
            format!("stride {stride} must be a positive multiple of {RATE_RATIO}"),
        ));
    }
    let mut ids = HashSet::new();
    let mut tags = HashSet::new();
    for c in conditions {
        if !ids.insert(c.id) {
            return Err(Error::param("build_dataset", format!("duplicate condition id {}", c.id)));
        }
        if !tags.insert((c.premixing_length.to_bits(), c.ffr.to_bits(), c.afr.to_bits())) {
            return Err(Error::param("build_dataset", format!("duplicate operating point {}", c.name())));
        }
    }
    Ok(())
}

/// Generates every condition and checks its label against the oracle.
/// Returns the dataset and the per-condition oracle statistics.
pub fn generate(
    conditions: &[ConditionSpec],
    window_len: usize,
    stride: usize,
    gen: &GeneratorConfig,
    master_seed: u64,
) -> Result<(Dataset, Vec<OracleReport>)> {
    check_geometry(conditions, window_len, stride)?;
    let mut samples = Vec::new();
    let mut reports = Vec::new();
    for cond in conditions {
        let (series, osc) = synth_pressure(cond, gen, &mut stream(cond.seed, PRESSURE_STREAM))?;
        let report = oracle_report(&series)?;
        if report.label != Some(cond.label) {
            return Err(Error::Labeling(format!(
                "condition {} ({}): oracle gives {:?} (rms {:.1} Pa, peak {:.1} Hz, ratio {:.1})",
                cond.id,
                cond.name(),
                report.label,
                report.rms,
                report.dominant_hz,
                report.peak_ratio
            )));
        }
        reports.push(report);
        let mut frame_rng = stream(cond.seed, FRAME_STREAM);
        for j in frame_indices(series.len(), window_len, stride) {
            let end = j * RATE_RATIO;
            let start = end + 1 - window_len;
            let mut window = Vec::with_capacity(CHANNELS * window_len);
            for ch in &series.channels {
                window.extend(ch[start..=end].iter().map(|&v| v as f32));
            }
            let t = j as f64 / FRAME_RATE as f64;
            let (phase, amplitude) = osc.map_or((0.0, 0.0), |o| (o.phase_at(t), o.amplitude));
            samples.push(Sample {
                condition_id: cond.id,
                frame_index: j as u32,
                label: cond.label,
                window,
                frame: super::render_frame(phase, amplitude, cond, &mut frame_rng),
            });
        }
    }
    let header = DatasetHeader {
        window_len,
        stride,
        channels: CHANNELS,
        frame_height: FRAME_SIZE,
        frame_width: FRAME_SIZE,
        pressure_rate: PRESSURE_RATE,
        frame_rate: FRAME_RATE,
        master_seed,
        provenance: [0; 32],
    };
    Ok((Dataset { header, conditions: conditions.to_vec(), samples }, reports))
}

pub fn build_dataset(
    conditions: &[ConditionSpec],
    window_len: usize,
    stride: usize,
    gen: &GeneratorConfig,
    master_seed: u64,
) -> Result<Dataset> {
    generate(conditions, window_len, stride, gen, master_seed).map(|(d, _)| d)
}
