use rand_distr::{Distribution, StandardNormal};

use super::{ConditionSpec, Label};
use crate::models::FRAME_SIZE;
use crate::rng::Prng;

/// 64x64 grayscale frame, row-major, rows along the axial direction,
/// intensities in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct FlameFrame {
    pub pixels: Vec<f32>,
}

impl FlameFrame {
    pub const HEIGHT: usize = FRAME_SIZE;
    pub const WIDTH: usize = FRAME_SIZE;

    pub fn black() -> Self {
        Self { pixels: vec![0.0; Self::HEIGHT * Self::WIDTH] }
    }

    pub fn at(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * Self::WIDTH + col]
    }

    /// Intensity-weighted centroid as (row, col).
    pub fn centroid(&self) -> (f64, f64) {
        let (mut m, mut r, mut c) = (0.0, 0.0, 0.0);
        for (i, &p) in self.pixels.iter().enumerate() {
            let p = p as f64;
            m += p;
            r += p * (i / Self::WIDTH) as f64;
            c += p * (i % Self::WIDTH) as f64;
        }
        (r / m, c / m)
    }
}

/// Axial oscillation amplitude of the unstable flame (px).
pub const FLAP_PX: f64 = 12.0;
/// Relative intensity modulation of the unstable flame.
pub const FLAP_INTENSITY: f64 = 0.4;
pub const STABLE_CENTER: (f64, f64) = (34.0, 32.0);
pub const UNSTABLE_CENTER: (f64, f64) = (28.0, 32.0);
const ANCHOR_CENTER: (f64, f64) = (52.0, 32.0);
const CENTER_JITTER_PX: f64 = 0.25;
const INTENSITY_JITTER: f64 = 0.015;

#[derive(Clone, Copy)]
struct Blob {
    row: f64,
    col: f64,
    sigma_row: f64,
    sigma_col: f64,
    intensity: f64,
}

fn add_blob(px: &mut [f64], b: Blob) {
    let n = FRAME_SIZE;
    let profile = |center: f64, sigma: f64| -> Vec<f64> {
        (0..n).map(|i| (-0.5 * ((i as f64 - center) / sigma).powi(2)).exp()).collect()
    };
    let rows = profile(b.row, b.sigma_row);
    let cols = profile(b.col, b.sigma_col);
    for (r, &gr) in rows.iter().enumerate() {
        let g = b.intensity * gr;
        for (c, &gc) in cols.iter().enumerate() {
            px[r * n + c] += g * gc;
        }
    }
}

/// Base lateral width: partial premixing (90 mm) gives a wider flame.
fn lateral_sigma(cond: &ConditionSpec) -> f64 {
    if cond.premixing_length < 105.0 {
        7.5
    } else {
        5.5
    }
}

/// Mean intensity of the oscillating lobe; grows mildly with amplitude (Pa).
fn lobe_intensity(amplitude: f64) -> f64 {
    0.55 + 0.1 * ((amplitude - 1000.0) / 300.0).clamp(-1.0, 1.0)
}

/// Renders one frame. `phase` is the fundamental phase at the frame time and
/// `amplitude` the fundamental amplitude; both are ignored for stable
/// conditions.
pub fn render_frame(phase: f64, amplitude: f64, cond: &ConditionSpec, rng: &mut Prng) -> FlameFrame {
    let mut jitter = |scale: f64| -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    };
    let dr = jitter(CENTER_JITTER_PX);
    let dc = jitter(CENTER_JITTER_PX);
    let gain = 1.0 + jitter(INTENSITY_JITTER);
    let sx = lateral_sigma(cond);
    let mut px = vec![0.0f64; FRAME_SIZE * FRAME_SIZE];
    match cond.label {
        Label::Stable => add_blob(
            &mut px,
            Blob {
                row: STABLE_CENTER.0 + dr,
                col: STABLE_CENTER.1 + dc,
                sigma_row: 10.0,
                sigma_col: sx,
                intensity: 0.8 * gain,
            },
        ),
        Label::Unstable => {
            let s = phase.sin();
            add_blob(
                &mut px,
                Blob {
                    row: UNSTABLE_CENTER.0 + FLAP_PX * s + dr,
                    col: UNSTABLE_CENTER.1 + dc,
                    sigma_row: 7.0,
                    sigma_col: 0.85 * sx,
                    intensity: lobe_intensity(amplitude.max(0.0)) * (1.0 + FLAP_INTENSITY * s) * gain,
                },
            );
            add_blob(
                &mut px,
                Blob { row: ANCHOR_CENTER.0, col: ANCHOR_CENTER.1, sigma_row: 3.0, sigma_col: 4.0, intensity: 0.35 },
            );
        }
    }
    FlameFrame { pixels: px.iter().map(|&v| v.clamp(0.0, 1.0) as f32).collect() }
}
