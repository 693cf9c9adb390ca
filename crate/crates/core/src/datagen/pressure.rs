use std::f64::consts::PI;

use rand::RngExt;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{ConditionSpec, GeneratorConfig, Label, CHANNELS, PRESSURE_RATE, SERIES_LEN};
use crate::error::Result;
use crate::rng::Prng;

/// Zero-mean pressure fluctuations (Pa), one vector per channel.
#[derive(Clone, Debug, PartialEq)]
pub struct PressureSeries {
    pub sample_rate: u32,
    pub channels: Vec<Vec<f64>>,
}

impl PressureSeries {
    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Limit-cycle parameters of an unstable condition. The flame follows the
/// fundamental as seen on channel 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Oscillation {
    pub frequency: f64,
    /// Fundamental amplitude (Pa).
    pub amplitude: f64,
    pub phase0: f64,
}

impl Oscillation {
    /// Fundamental phase at time `t` seconds.
    pub fn phase_at(&self, t: f64) -> f64 {
        2.0 * PI * self.frequency * t + self.phase0
    }
}

fn remove_mean(x: &mut [f64]) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= mean);
}

fn rms_of(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// `A sin(2 pi f t + phase) + r A sin(4 pi f t + harmonic_phase)`, sampled at `rate`.
pub fn limit_cycle(n: usize, rate: f64, osc: Oscillation, harmonic_phase: f64, harmonic_ratio: f64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            let w = 2.0 * PI * osc.frequency * t;
            osc.amplitude * ((w + osc.phase0).sin() + harmonic_ratio * (2.0 * w + harmonic_phase).sin())
        })
        .collect()
}

/// Gaussian noise with a second-order low-pass rolloff at `corner_hz`,
/// scaled to exactly `target_rms` after mean removal.
pub fn band_limited_noise(n: usize, rate: f64, corner_hz: f64, target_rms: f64, rng: &mut Prng) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = (0..n).map(|_| Complex::new(StandardNormal.sample(rng), 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let f = k.min(n - k) as f64 * rate / n as f64;
        *c *= 1.0 / (1.0 + (f / corner_hz).powi(4)).sqrt();
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let mut x: Vec<f64> = buf.iter().map(|c| c.re).collect();
    remove_mean(&mut x);
    let r = rms_of(&x);
    x.iter_mut().for_each(|v| *v *= target_rms / r);
    x
}

/// Three seconds of 4-channel pressure for one condition.
/// Returns the limit-cycle parameters for unstable conditions.
pub fn synth_pressure(
    cond: &ConditionSpec,
    gen: &GeneratorConfig,
    rng: &mut Prng,
) -> Result<(PressureSeries, Option<Oscillation>)> {
    gen.validate()?;
    let rate = PRESSURE_RATE as f64;
    let n = SERIES_LEN;
    match cond.label {
        Label::Stable => {
            let target = rng.random_range(gen.stable_rms.0..=gen.stable_rms.1);
            let channels =
                (0..CHANNELS).map(|_| band_limited_noise(n, rate, gen.stable_band_hz, target, rng)).collect();
            Ok((PressureSeries { sample_rate: PRESSURE_RATE, channels }, None))
        }
        Label::Unstable => {
            let frequency = rng.random_range(gen.fundamental_hz.0..=gen.fundamental_hz.1);
            let target: f64 = rng.random_range(gen.unstable_rms.0..=gen.unstable_rms.1);
            let sn = gen.unstable_noise_rms;
            let r = gen.harmonic_ratio;
            let amplitude = (2.0 * (target * target - sn * sn) / (1.0 + r * r)).sqrt();
            // Standing-wave surrogate: channels sit on either side of a
            // pressure node, so the fundamental is in or out of phase.
            let phase0 = rng.random_range(0.0..2.0 * PI);
            let phases: Vec<(f64, f64)> = (0..CHANNELS)
                .map(|c| {
                    let offset = if c == 0 { 0.0 } else { rng.random_range(-0.2..0.2) };
                    let node = if c < CHANNELS / 2 { 0.0 } else { PI };
                    (phase0 + node + offset, rng.random_range(0.0..2.0 * PI))
                })
                .collect();
            let osc = Oscillation { frequency, amplitude, phase0: phases[0].0 };
            let channels = phases
                .iter()
                .map(|&(p, q)| {
                    let mut x = limit_cycle(n, rate, Oscillation { phase0: p, ..osc }, q, r);
                    for v in x.iter_mut() {
                        let z: f64 = StandardNormal.sample(rng);
                        *v += sn * z;
                    }
                    remove_mean(&mut x);
                    x
                })
                .collect();
            Ok((PressureSeries { sample_rate: PRESSURE_RATE, channels }, Some(osc)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::default_conditions;
    use crate::rng::seeded;

    #[test]
    fn two_harmonic_rms_matches_closed_form() {
        let a = 800.0 * 2f64.sqrt();
        let osc = Oscillation { frequency: 143.7, amplitude: a, phase0: 0.3 };
        let x = limit_cycle(SERIES_LEN, 9000.0, osc, 1.1, 0.25);
        let expected = 800.0 * 1.0625f64.sqrt();
        assert!((rms_of(&x) - expected).abs() < 0.01 * expected);
    }

    #[test]
    fn series_shape_and_zero_mean() {
        let conds = default_conditions(3);
        for c in &conds {
            let (s, osc) = synth_pressure(c, &GeneratorConfig::default(), &mut seeded(c.seed)).unwrap();
            assert_eq!(s.channels.len(), 4);
            assert!(s.channels.iter().all(|ch| ch.len() == 27_000));
            for ch in &s.channels {
                assert!(ch.iter().all(|v| v.is_finite()));
                assert!((ch.iter().sum::<f64>() / ch.len() as f64).abs() < 1e-9);
            }
            assert_eq!(osc.is_some(), c.label == Label::Unstable);
        }
    }

    #[test]
    fn noise_is_scaled_to_target() {
        let x = band_limited_noise(9000, 9000.0, 500.0, 42.0, &mut seeded(1));
        assert!((rms_of(&x) - 42.0).abs() < 1e-9);
    }
}
