//! Pressure-signal statistics: RMS and dominant frequency.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

pub const MIN_SPECTRUM_LEN: usize = 1024;
/// Band over which the dominant peak is searched and the median is taken (Hz).
pub const PEAK_BAND: (f64, f64) = (50.0, 1000.0);
/// Peak-to-median magnitude ratio that marks a sharp spectral peak.
pub const SHARP_PEAK_RATIO: f64 = 10.0;

fn check_len(op: &'static str, n: usize) -> Result<()> {
    if n < MIN_SPECTRUM_LEN {
        return Err(Error::param(op, format!("{n} samples, need at least {MIN_SPECTRUM_LEN}")));
    }
    Ok(())
}

/// RMS of the mean-removed signal.
pub fn rms(series: &[f64]) -> Result<f64> {
    check_len("rms", series.len())?;
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    Ok((series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt())
}

/// Magnitude spectrum (bins `0..=n/2`) of the mean-removed signal,
/// rectangular window over the full length.
pub fn magnitude_spectrum(series: &[f64]) -> Vec<f64> {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = series.iter().map(|&x| Complex::new(x - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf[..=n / 2].iter().map(|c| c.norm()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralPeak {
    pub frequency: f64,
    pub peak_ratio: f64,
}

/// Peak frequency and peak/median ratio within [`PEAK_BAND`] of a magnitude
/// spectrum computed from `n` samples at `sample_rate`.
pub fn spectral_peak(mags: &[f64], n: usize, sample_rate: f64) -> SpectralPeak {
    let bin = sample_rate / n as f64;
    let lo = (PEAK_BAND.0 / bin).ceil() as usize;
    let hi = ((PEAK_BAND.1 / bin).floor() as usize).min(mags.len() - 1);
    let band = &mags[lo..=hi];
    let (k, &peak) =
        band.iter().enumerate().fold((0, &f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    let mut sorted = band.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    let median = if m % 2 == 1 { sorted[m / 2] } else { 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]) };
    SpectralPeak {
        frequency: (lo + k) as f64 * bin,
        peak_ratio: if median > 0.0 { peak / median } else { f64::INFINITY },
    }
}

/// Dominant frequency of one channel and its peak-to-median ratio.
pub fn dominant_frequency(series: &[f64], sample_rate: f64) -> Result<SpectralPeak> {
    check_len("dominant_frequency", series.len())?;
    Ok(spectral_peak(&magnitude_spectrum(series), series.len(), sample_rate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand_distr::{Distribution, StandardNormal};
    use std::f64::consts::PI;

    fn sine(freq: f64, amp: f64, n: usize, rate: f64) -> Vec<f64> {
        (0..n).map(|i| amp * (2.0 * PI * freq * i as f64 / rate).sin()).collect()
    }

    #[test]
    fn sine_rms_is_amplitude_over_root_two() {
        let x = sine(140.0, 707.1, 27_000, 9000.0);
        assert!((rms(&x).unwrap() - 500.0).abs() < 0.5);
        let y = sine(137.3, 300.0, 9000, 9000.0);
        assert!((rms(&y).unwrap() - 300.0 / 2f64.sqrt()).abs() < 0.005 * 300.0 / 2f64.sqrt());
    }

    #[test]
    fn sine_dominant_frequency_within_one_bin() {
        let n = 27_000;
        let p = dominant_frequency(&sine(140.0, 100.0, n, 9000.0), 9000.0).unwrap();
        assert!((p.frequency - 140.0).abs() <= 9000.0 / n as f64);
        assert!(p.peak_ratio > SHARP_PEAK_RATIO);
    }

    #[test]
    fn white_noise_has_no_sharp_peak() {
        let mut r = seeded(2024);
        let mut below = 0;
        for _ in 0..100 {
            let x: Vec<f64> = (0..9000).map(|_| StandardNormal.sample(&mut r)).collect();
            if dominant_frequency(&x, 9000.0).unwrap().peak_ratio < SHARP_PEAK_RATIO {
                below += 1;
            }
        }
        assert!(below >= 95, "{below}");
    }

    #[test]
    fn short_series_is_rejected() {
        assert!(matches!(rms(&[0.0; 100]), Err(Error::Parameter { .. })));
        assert!(dominant_frequency(&[0.0; 1023], 9000.0).is_err());
    }
}
