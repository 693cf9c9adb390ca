use crate::datagen::FlameFrame;
use crate::error::{Error, Result};

pub const WINDOW: usize = 11;
pub const SIGMA: f64 = 1.5;
pub const K1: f64 = 0.01;
pub const K2: f64 = 0.03;
pub const DYNAMIC_RANGE: f64 = 1.0;

fn gaussian_taps() -> [f64; WINDOW] {
    let mut g = [0.0; WINDOW];
    let c = (WINDOW / 2) as f64;
    for (i, v) in g.iter_mut().enumerate() {
        *v = (-((i as f64 - c).powi(2)) / (2.0 * SIGMA * SIGMA)).exp();
    }
    let s: f64 = g.iter().sum();
    g.iter_mut().for_each(|v| *v /= s);
    g
}

/// Separable Gaussian filter over the valid region.
fn filter(x: &[f64], h: usize, w: usize, g: &[f64; WINDOW]) -> Vec<f64> {
    let (oh, ow) = (h + 1 - WINDOW, w + 1 - WINDOW);
    let mut rows = vec![0.0; h * ow];
    for r in 0..h {
        for c in 0..ow {
            rows[r * ow + c] = (0..WINDOW).map(|k| g[k] * x[r * w + c + k]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = (0..WINDOW).map(|k| g[k] * rows[(r + k) * ow + c]).sum();
        }
    }
    out
}

/// Mean local SSIM of two `h × w` images.
pub fn ssim_images(a: &[f32], b: &[f32], h: usize, w: usize) -> Result<f64> {
    if a.len() != h * w || b.len() != h * w {
        return Err(Error::dim("ssim", format!("{} and {} pixels for a {h}x{w} image", a.len(), b.len())));
    }
    if h < WINDOW || w < WINDOW {
        return Err(Error::dim("ssim", format!("{h}x{w} image smaller than the {WINDOW}x{WINDOW} window")));
    }
    let g = gaussian_taps();
    let x: Vec<f64> = a.iter().map(|&v| v as f64).collect();
    let y: Vec<f64> = b.iter().map(|&v| v as f64).collect();
    let prod = |p: &[f64], q: &[f64]| -> Vec<f64> { p.iter().zip(q).map(|(u, v)| u * v).collect() };
    let mx = filter(&x, h, w, &g);
    let my = filter(&y, h, w, &g);
    let sxx = filter(&prod(&x, &x), h, w, &g);
    let syy = filter(&prod(&y, &y), h, w, &g);
    let sxy = filter(&prod(&x, &y), h, w, &g);
    let c1 = (K1 * DYNAMIC_RANGE).powi(2);
    let c2 = (K2 * DYNAMIC_RANGE).powi(2);
    let mut total = 0.0;
    for i in 0..mx.len() {
        let (ux, uy) = (mx[i], my[i]);
        let vx = sxx[i] - ux * ux;
        let vy = syy[i] - uy * uy;
        let cxy = sxy[i] - ux * uy;
        total += ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
    }
    Ok(total / mx.len() as f64)
}

pub fn ssim(a: &FlameFrame, b: &FlameFrame) -> Result<f64> {
    ssim_images(&a.pixels, &b.pixels, FlameFrame::HEIGHT, FlameFrame::WIDTH)
}

/// Mean squared pixel error.
pub fn pixel_mse(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dim("mse", format!("{} vs {} pixels", a.len(), b.len())));
    }
    Ok(a.iter().zip(b).map(|(&p, &q)| (p as f64 - q as f64).powi(2)).sum::<f64>() / a.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taps_normalized_and_symmetric() {
        let g = gaussian_taps();
        assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((g[0] - g[10]).abs() < 1e-15);
    }

    #[test]
    fn constant_images() {
        let a = vec![0.5f32; 400];
        assert!((ssim_images(&a, &a, 20, 20).unwrap() - 1.0).abs() < 1e-12);
        let b = vec![0.2f32; 400];
        // luminance term only: (2*0.5*0.2 + c1) / (0.25 + 0.04 + c1)
        let c1 = 1e-4;
        let expected = (0.2 + c1) / (0.29 + c1);
        assert!((ssim_images(&a, &b, 20, 20).unwrap() - expected).abs() < 1e-6);
    }

    #[test]
    fn rejects_mismatch() {
        assert!(matches!(ssim_images(&[0.0; 400], &[0.0; 399], 20, 20), Err(Error::Dimension { .. })));
        assert!(ssim_images(&[0.0; 100], &[0.0; 100], 10, 10).is_err());
    }
}
