use serde::{Deserialize, Serialize};

use super::ssim::{pixel_mse, ssim};
use crate::datagen::{Dataset, FlameFrame, Label};
use crate::error::{Error, Result};
use crate::models::{predict_unstable, ImageClassifier, ImageDecoder, Network, TsClassifier, TsEncoder, FRAME_SIZE};
use crate::numerics::FlushToZero;
use crate::scalar::Scalar;
use crate::training::{frames_tensor, windows_tensor};

/// Inference batch size for evaluation.
pub const EVAL_BATCH: usize = 64;

/// Architecture fingerprints a pipeline trio must match.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrioFingerprints {
    pub ts_encoder: String,
    pub image_decoder: String,
    pub image_classifier: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineResult {
    pub indices: Vec<usize>,
    pub logits: Vec<f64>,
    pub predictions: Vec<bool>,
    pub reconstructions: Vec<FlameFrame>,
    /// Per-sample scores against the true frames.
    pub ssim: Vec<f64>,
    pub mse: Vec<f64>,
}

fn check_fingerprint(expected: &str, found: &dyn Network<impl Scalar>) -> Result<()> {
    let fp = found.spec().fingerprint;
    if fp != expected {
        return Err(Error::Incompatible {
            expected: format!("{} {expected}", found.role().name()),
            found: format!("{} {fp}", found.role().name()),
        });
    }
    Ok(())
}

fn check_window(ts: usize, ds: &Dataset) -> Result<()> {
    if ts != ds.header.window_len {
        return Err(Error::Incompatible {
            expected: format!("window length {}", ds.header.window_len),
            found: format!("ts encoder window length {ts}"),
        });
    }
    Ok(())
}

/// Reconstructions and predictions from pressure windows alone.
fn infer_chain<S: Scalar>(
    ts: &TsEncoder<S>,
    dec: &ImageDecoder<S>,
    cls: &ImageClassifier<S>,
    ds: &Dataset,
    indices: &[usize],
) -> Result<(Vec<f64>, Vec<FlameFrame>)> {
    let _ftz = FlushToZero::enable();
    let px = FRAME_SIZE * FRAME_SIZE;
    let mut logits = Vec::with_capacity(indices.len());
    let mut recon = Vec::with_capacity(indices.len());
    for chunk in indices.chunks(EVAL_BATCH) {
        let emb = ts.infer(&windows_tensor::<S>(ds, chunk)?)?;
        let image = dec.infer(&emb)?.image;
        let z = cls.infer(&image)?;
        logits.extend(z.data().iter().map(|v| v.as_f64()));
        recon.extend(image.data().chunks(px).map(|c| FlameFrame { pixels: c.iter().map(|v| v.as_f32()).collect() }));
    }
    Ok((logits, recon))
}

/// Window → embedding → reconstructed frame → logit. True frames are read
/// only afterwards, to score the reconstructions.
pub fn run_test_pipeline<S: Scalar>(
    ts: &TsEncoder<S>,
    dec: &ImageDecoder<S>,
    cls: &ImageClassifier<S>,
    ds: &Dataset,
    indices: &[usize],
    expected: Option<&TrioFingerprints>,
) -> Result<PipelineResult> {
    if let Some(fp) = expected {
        check_fingerprint(&fp.ts_encoder, ts)?;
        check_fingerprint(&fp.image_decoder, dec)?;
        check_fingerprint(&fp.image_classifier, cls)?;
    }
    check_window(ts.window_len(), ds)?;
    let (logits, reconstructions) = infer_chain(ts, dec, cls, ds, indices)?;
    let mut s = Vec::with_capacity(indices.len());
    let mut m = Vec::with_capacity(indices.len());
    for (r, &i) in reconstructions.iter().zip(indices) {
        let truth = &ds.samples[i].frame;
        s.push(ssim(r, truth)?);
        m.push(pixel_mse(&r.pixels, &truth.pixels)?);
    }
    Ok(PipelineResult {
        indices: indices.to_vec(),
        predictions: logits.iter().map(|&z| predict_unstable(z)).collect(),
        logits,
        reconstructions,
        ssim: s,
        mse: m,
    })
}

/// Logits of the image classifier on true frames.
pub fn classify_frames<S: Scalar>(cls: &ImageClassifier<S>, ds: &Dataset, indices: &[usize]) -> Result<Vec<f64>> {
    let _ftz = FlushToZero::enable();
    let mut out = Vec::with_capacity(indices.len());
    for chunk in indices.chunks(EVAL_BATCH) {
        out.extend(cls.infer(&frames_tensor::<S>(ds, chunk))?.data().iter().map(|v| v.as_f64()));
    }
    Ok(out)
}

/// Logits of the time-series classifier on pressure windows.
pub fn classify_windows<S: Scalar>(cls: &TsClassifier<S>, ds: &Dataset, indices: &[usize]) -> Result<Vec<f64>> {
    check_window(cls.trunk().window_len(), ds)?;
    let _ftz = FlushToZero::enable();
    let mut out = Vec::with_capacity(indices.len());
    for chunk in indices.chunks(EVAL_BATCH) {
        out.extend(cls.infer(&windows_tensor::<S>(ds, chunk)?)?.data().iter().map(|v| v.as_f64()));
    }
    Ok(out)
}

pub fn actual_unstable(ds: &Dataset, indices: &[usize]) -> Vec<bool> {
    indices.iter().map(|&i| ds.samples[i].label == Label::Unstable).collect()
}

/// Largest per-pixel temporal standard deviation of reconstructions within
/// any stable condition.
pub fn stable_temporal_std(ds: &Dataset, indices: &[usize], recon: &[FlameFrame]) -> Option<f64> {
    let mut worst: Option<f64> = None;
    for cond in ds.conditions.iter().filter(|c| c.label == Label::Stable) {
        let frames: Vec<&FlameFrame> =
            indices.iter().zip(recon).filter(|(&i, _)| ds.samples[i].condition_id == cond.id).map(|(_, f)| f).collect();
        if frames.len() < 2 {
            continue;
        }
        let n = frames.len() as f64;
        let px = frames[0].pixels.len();
        for k in 0..px {
            let mean = frames.iter().map(|f| f.pixels[k] as f64).sum::<f64>() / n;
            let var = frames.iter().map(|f| (f.pixels[k] as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
            worst = Some(worst.map_or(var.sqrt(), |w| w.max(var.sqrt())));
        }
    }
    worst
}
