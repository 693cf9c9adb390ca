use serde::{Deserialize, Serialize};

use super::{Label, PressureSeries};
use crate::error::{Error, Result};
use crate::eval::signal::{magnitude_spectrum, rms, spectral_peak, SHARP_PEAK_RATIO};

pub const STABLE_MAX_RMS: f64 = 100.0;
pub const UNSTABLE_MIN_RMS: f64 = 500.0;
pub const UNSTABLE_BAND_HZ: (f64, f64) = (130.0, 150.0);

/// Statistics behind a labeling decision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    /// Mean of per-channel RMS (Pa).
    pub rms: f64,
    /// Peak of the channel-averaged magnitude spectrum (Hz).
    pub dominant_hz: f64,
    pub peak_ratio: f64,
    pub label: Option<Label>,
}

pub fn oracle_report(series: &PressureSeries) -> Result<OracleReport> {
    let rate = series.sample_rate as f64;
    let n = series.len();
    if series.channels.is_empty() || (n as f64) < rate {
        return Err(Error::param("label_oracle", format!("{n} samples, need at least one second")));
    }
    let mut rms_sum = 0.0;
    let mut mags = vec![0.0; n / 2 + 1];
    for ch in &series.channels {
        rms_sum += rms(ch)?;
        for (m, v) in mags.iter_mut().zip(magnitude_spectrum(ch)) {
            *m += v;
        }
    }
    let c = series.channels.len() as f64;
    mags.iter_mut().for_each(|m| *m /= c);
    let rms = rms_sum / c;
    let peak = spectral_peak(&mags, n, rate);
    let sharp =
        peak.peak_ratio > SHARP_PEAK_RATIO && (UNSTABLE_BAND_HZ.0..=UNSTABLE_BAND_HZ.1).contains(&peak.frequency);
    let label = if rms > UNSTABLE_MIN_RMS && sharp {
        Some(Label::Unstable)
    } else if rms < STABLE_MAX_RMS {
        Some(Label::Stable)
    } else {
        None
    };
    Ok(OracleReport { rms, dominant_hz: peak.frequency, peak_ratio: peak.peak_ratio, label })
}

/// Stable iff RMS < 100 Pa; unstable iff RMS > 500 Pa with a sharp
/// 130-150 Hz peak. Anything else is a labeling error.
pub fn label_oracle(series: &PressureSeries) -> Result<Label> {
    let r = oracle_report(series)?;
    r.label.ok_or_else(|| {
        Error::Labeling(format!(
            "ambiguous signal: rms {:.1} Pa, peak {:.1} Hz, ratio {:.1}",
            r.rms, r.dominant_hz, r.peak_ratio
        ))
    })
}
