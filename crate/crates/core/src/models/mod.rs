//! Network architectures for the four cross-modal roles plus the
//! time-series classifier baseline.
//!
//! Layer stacks:
//! - image encoder: 3 × [conv3×3 → relu → maxpool2] (1→16→32→64), flatten, dense 4096→128
//! - image decoder: dense 128→4096 → reshape 64×8×8, then 3 × [upsample2 → convT3×3]
//!   (64→32→16→1) with relu between blocks and a final sigmoid; the output of the
//!   second block is exposed as the feature tap
//! - time-series encoder: lstm(4→64) → dropout → lstm(64→128) → last step → dropout → dense 128→128
//! - image classifier: 2 × [conv3×3 → relu → maxpool2] (1→16→32), dense 8192→64 → relu → dense 64→1
//! - time-series classifier: time-series encoder → dense 128→32 → relu → dense 32→1

mod io;
mod spec;

pub use io::{decode_model, encode_model, load_model, read_model_header, save_model, ModelHeader};
pub use spec::{hex, parameter_digest, ModelSpec, Role};

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::numerics::layer::{
    Activation, Conv2d, ConvTranspose2d, Dense, Dropout, LastStep, Lstm, MaxPool2d, Reshape, Sequential, Upsample2d,
};
use crate::numerics::Tensor;
use crate::rng::Prng;
use crate::scalar::Scalar;

pub const EMBEDDING_DIM: usize = 128;
pub const FRAME_SIZE: usize = 64;
pub const PRESSURE_CHANNELS: usize = 4;
/// Fixed pressure scale for model input (Pa).
pub const PRESSURE_SCALE: f64 = 1000.0;
pub const LSTM1_HIDDEN: usize = 64;
pub const LSTM2_HIDDEN: usize = 128;

/// Common surface of every network role.
pub trait Network<S: Scalar> {
    fn role(&self) -> Role;

    /// Canonical layer descriptions, in declaration order.
    fn layers(&self) -> Vec<String>;

    fn params(&self) -> Vec<&Tensor<S>>;

    fn params_mut(&mut self) -> Vec<&mut Tensor<S>>;

    /// Number of forward evaluations (training and inference) so far.
    fn forward_calls(&self) -> u64;

    fn spec(&self) -> ModelSpec {
        let count = self.params().iter().map(|p| p.numel()).sum();
        ModelSpec::new(self.role(), self.layers(), count)
    }

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// SHA-256 over parameter values, used for frozen-component checks.
    fn param_digest(&self) -> String {
        parameter_digest(&self.params())
    }
}

#[derive(Default)]
struct CallCounter(AtomicU64);

impl CallCounter {
    fn bump(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }

    fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

fn expect_frames<S: Scalar>(op: &'static str, frames: &Tensor<S>) -> Result<()> {
    match *frames.shape() {
        [_, 1, FRAME_SIZE, FRAME_SIZE] => Ok(()),
        _ => {
            Err(Error::dim(op, format!("expected [N, 1, {FRAME_SIZE}, {FRAME_SIZE}] frames, got {:?}", frames.shape())))
        }
    }
}

fn expect_embeddings<S: Scalar>(op: &'static str, emb: &Tensor<S>) -> Result<()> {
    match *emb.shape() {
        [_, EMBEDDING_DIM] => Ok(()),
        _ => Err(Error::dim(op, format!("expected [N, {EMBEDDING_DIM}] embeddings, got {:?}", emb.shape()))),
    }
}

pub struct ImageEncoder<S> {
    net: Sequential<S>,
    calls: CallCounter,
}

impl<S: Scalar> ImageEncoder<S> {
    pub fn new(rng: &mut Prng) -> Self {
        let net = Sequential::new()
            .push(Conv2d::new(1, 16, 3, 1, 1, rng))
            .push(Activation::relu())
            .push(MaxPool2d::new(2))
            .push(Conv2d::new(16, 32, 3, 1, 1, rng))
            .push(Activation::relu())
            .push(MaxPool2d::new(2))
            .push(Conv2d::new(32, 64, 3, 1, 1, rng))
            .push(Activation::relu())
            .push(MaxPool2d::new(2))
            .push(Reshape::new(&[64 * 8 * 8]))
            .push(Dense::new(64 * 8 * 8, EMBEDDING_DIM, rng));
        ImageEncoder { net, calls: CallCounter::default() }
    }

    /// `[N, 1, 64, 64]` frames → `[N, 128]` embeddings, caching for backward.
    pub fn forward(&mut self, frames: &Tensor<S>, rng: &mut Prng) -> Result<Tensor<S>> {
        expect_frames("image_encoder_forward", frames)?;
        self.calls.bump();
        self.net.forward(frames, rng)
    }

    pub fn backward(&mut self, d_embedding: &Tensor<S>) -> Result<Tensor<S>> {
        self.net.backward(d_embedding)
    }

    pub fn infer(&self, frames: &Tensor<S>) -> Result<Tensor<S>> {
        expect_frames("image_encoder_forward", frames)?;
        self.calls.bump();
        self.net.infer(frames)
    }
}

impl<S: Scalar> Network<S> for ImageEncoder<S> {
    fn role(&self) -> Role {
        Role::ImageEncoder
    }
    fn layers(&self) -> Vec<String> {
        self.net.describe()
    }
    fn params(&self) -> Vec<&Tensor<S>> {
        self.net.params()
    }
    fn params_mut(&mut self) -> Vec<&mut Tensor<S>> {
        self.net.params_mut()
    }
    fn forward_calls(&self) -> u64 {
        self.calls.get()
    }
}

/// Decoder output together with the feature map after the second
/// transposed-convolution block.
pub struct Decoded<S> {
    pub image: Tensor<S>,
    pub tap: Tensor<S>,
}

pub struct ImageDecoder<S> {
    head: Sequential<S>,
    tail: Sequential<S>,
    calls: CallCounter,
}

/// Shape of the decoder feature tap for one item.
pub const DECODER_TAP_SHAPE: [usize; 3] = [16, 32, 32];

impl<S: Scalar> ImageDecoder<S> {
    pub fn new(rng: &mut Prng) -> Self {
        let head = Sequential::new()
            .push(Dense::new(EMBEDDING_DIM, 64 * 8 * 8, rng))
            .push(Reshape::new(&[64, 8, 8]))
            .push(Upsample2d { factor: 2 })
            .push(ConvTranspose2d::new(64, 32, 3, 1, 1, rng))
            .push(Activation::relu())
            .push(Upsample2d { factor: 2 })
            .push(ConvTranspose2d::new(32, 16, 3, 1, 1, rng))
            .push(Activation::relu());
        let tail = Sequential::new()
            .push(Upsample2d { factor: 2 })
            .push(ConvTranspose2d::new(16, 1, 3, 1, 1, rng))
            .push(Activation::sigmoid());
        ImageDecoder { head, tail, calls: CallCounter::default() }
    }

    pub fn forward(&mut self, embeddings: &Tensor<S>, rng: &mut Prng) -> Result<Decoded<S>> {
        expect_embeddings("image_decoder_forward", embeddings)?;
        self.calls.bump();
        let tap = self.head.forward(embeddings, rng)?;
        let image = self.tail.forward(&tap, rng)?;
        Ok(Decoded { image, tap })
    }

    /// Backward from the image gradient plus an optional gradient injected
    /// at the feature tap.
    pub fn backward(&mut self, d_image: &Tensor<S>, d_tap: Option<&Tensor<S>>) -> Result<Tensor<S>> {
        let mut g = self.tail.backward(d_image)?;
        if let Some(extra) = d_tap {
            if extra.shape() != g.shape() {
                return Err(Error::dim(
                    "image_decoder_backward",
                    format!("tap gradient {:?} vs tap {:?}", extra.shape(), g.shape()),
                ));
            }
            for (a, &b) in g.data_mut().iter_mut().zip(extra.data()) {
                *a += b;
            }
        }
        self.head.backward(&g)
    }

    pub fn infer(&self, embeddings: &Tensor<S>) -> Result<Decoded<S>> {
        expect_embeddings("image_decoder_forward", embeddings)?;
        self.calls.bump();
        let tap = self.head.infer(embeddings)?;
        let image = self.tail.infer(&tap)?;
        Ok(Decoded { image, tap })
    }

    /// Feature tap only (skips the last block).
    pub fn infer_tap(&self, embeddings: &Tensor<S>) -> Result<Tensor<S>> {
        expect_embeddings("image_decoder_forward", embeddings)?;
        self.calls.bump();
        self.head.infer(embeddings)
    }
}

impl<S: Scalar> Network<S> for ImageDecoder<S> {
    fn role(&self) -> Role {
        Role::ImageDecoder
    }
    fn layers(&self) -> Vec<String> {
        let mut l = self.head.describe();
        l.push("tap".into());
        l.extend(self.tail.describe());
        l
    }
    fn params(&self) -> Vec<&Tensor<S>> {
        let mut p = self.head.params();
        p.extend(self.tail.params());
        p
    }
    fn params_mut(&mut self) -> Vec<&mut Tensor<S>> {
        let mut p = self.head.params_mut();
        p.extend(self.tail.params_mut());
        p
    }
    fn forward_calls(&self) -> u64 {
        self.calls.get()
    }
}

/// Converts raw pressure windows (channel-major, Pa) into model input
/// `[N, W, 4]`, scaled by [`PRESSURE_SCALE`].
pub fn windows_to_input<S: Scalar>(windows: &[&[f32]], window_len: usize) -> Result<Tensor<S>> {
    let n = windows.len();
    let mut data = vec![S::zero(); n * window_len * PRESSURE_CHANNELS];
    let scale = 1.0 / PRESSURE_SCALE;
    for (i, w) in windows.iter().enumerate() {
        if w.len() != PRESSURE_CHANNELS * window_len {
            return Err(Error::dim(
                "ts_encoder_forward",
                format!("window holds {} values, expected {PRESSURE_CHANNELS}×{window_len}", w.len()),
            ));
        }
        for c in 0..PRESSURE_CHANNELS {
            for t in 0..window_len {
                data[(i * window_len + t) * PRESSURE_CHANNELS + c] = S::lit(w[c * window_len + t] as f64 * scale);
            }
        }
    }
    Tensor::new(&[n, window_len, PRESSURE_CHANNELS], data)
}

pub struct TsEncoder<S> {
    window_len: usize,
    net: Sequential<S>,
    calls: CallCounter,
}

impl<S: Scalar> TsEncoder<S> {
    pub fn new(window_len: usize, dropout_rate: f64, rng: &mut Prng) -> Result<Self> {
        if window_len == 0 {
            return Err(Error::param("ts_encoder", "window length must be positive"));
        }
        let net = Sequential::new()
            .push(Lstm::new(PRESSURE_CHANNELS, LSTM1_HIDDEN, rng))
            .push(Dropout::new(dropout_rate)?)
            .push(Lstm::new(LSTM1_HIDDEN, LSTM2_HIDDEN, rng))
            .push(LastStep::new())
            .push(Dropout::new(dropout_rate)?)
            .push(Dense::new(LSTM2_HIDDEN, EMBEDDING_DIM, rng));
        Ok(TsEncoder { window_len, net, calls: CallCounter::default() })
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    /// Overwrites the bias of the output projection, e.g. to start a
    /// regression at the target mean.
    pub fn set_output_bias(&mut self, bias: &[S]) -> Result<()> {
        let b = self.net.params_mut().pop().expect("encoder has parameters");
        if b.numel() != bias.len() {
            return Err(Error::dim("ts_encoder_bias", format!("{} values for a bias of {}", bias.len(), b.numel())));
        }
        b.data_mut().copy_from_slice(bias);
        Ok(())
    }

    fn check(&self, x: &Tensor<S>) -> Result<()> {
        match *x.shape() {
            [_, w, PRESSURE_CHANNELS] if w == self.window_len => Ok(()),
            _ => Err(Error::dim(
                "ts_encoder_forward",
                format!("expected [N, {}, {PRESSURE_CHANNELS}] input, got {:?}", self.window_len, x.shape()),
            )),
        }
    }

    /// Training-mode forward (dropout active) over `[N, W, 4]` input.
    pub fn forward(&mut self, x: &Tensor<S>, rng: &mut Prng) -> Result<Tensor<S>> {
        self.check(x)?;
        self.calls.bump();
        self.net.forward(x, rng)
    }

    pub fn backward(&mut self, d_embedding: &Tensor<S>) -> Result<Tensor<S>> {
        self.net.backward(d_embedding)
    }

    /// Evaluation-mode forward (dropout off).
    pub fn infer(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        self.check(x)?;
        self.calls.bump();
        self.net.infer(x)
    }
}

impl<S: Scalar> Network<S> for TsEncoder<S> {
    fn role(&self) -> Role {
        Role::TsEncoder
    }
    fn layers(&self) -> Vec<String> {
        let mut l = vec![format!("input(W={},C={PRESSURE_CHANNELS},scale={PRESSURE_SCALE})", self.window_len)];
        l.extend(self.net.describe());
        l
    }
    fn params(&self) -> Vec<&Tensor<S>> {
        self.net.params()
    }
    fn params_mut(&mut self) -> Vec<&mut Tensor<S>> {
        self.net.params_mut()
    }
    fn forward_calls(&self) -> u64 {
        self.calls.get()
    }
}

pub struct ImageClassifier<S> {
    net: Sequential<S>,
    calls: CallCounter,
}

impl<S: Scalar> ImageClassifier<S> {
    pub fn new(rng: &mut Prng) -> Self {
        let net = Sequential::new()
            .push(Conv2d::new(1, 16, 3, 1, 1, rng))
            .push(Activation::relu())
            .push(MaxPool2d::new(2))
            .push(Conv2d::new(16, 32, 3, 1, 1, rng))
            .push(Activation::relu())
            .push(MaxPool2d::new(2))
            .push(Reshape::new(&[32 * 16 * 16]))
            .push(Dense::new(32 * 16 * 16, 64, rng))
            .push(Activation::relu())
            .push(Dense::new(64, 1, rng));
        ImageClassifier { net, calls: CallCounter::default() }
    }

    /// `[N, 1, 64, 64]` → `[N, 1]` logits.
    pub fn forward(&mut self, frames: &Tensor<S>, rng: &mut Prng) -> Result<Tensor<S>> {
        expect_frames("image_classifier_forward", frames)?;
        self.calls.bump();
        self.net.forward(frames, rng)
    }

    pub fn backward(&mut self, d_logits: &Tensor<S>) -> Result<Tensor<S>> {
        self.net.backward(d_logits)
    }

    pub fn infer(&self, frames: &Tensor<S>) -> Result<Tensor<S>> {
        expect_frames("image_classifier_forward", frames)?;
        self.calls.bump();
        self.net.infer(frames)
    }
}

impl<S: Scalar> Network<S> for ImageClassifier<S> {
    fn role(&self) -> Role {
        Role::ImageClassifier
    }
    fn layers(&self) -> Vec<String> {
        self.net.describe()
    }
    fn params(&self) -> Vec<&Tensor<S>> {
        self.net.params()
    }
    fn params_mut(&mut self) -> Vec<&mut Tensor<S>> {
        self.net.params_mut()
    }
    fn forward_calls(&self) -> u64 {
        self.calls.get()
    }
}

pub struct TsClassifier<S> {
    trunk: TsEncoder<S>,
    head: Sequential<S>,
}

impl<S: Scalar> TsClassifier<S> {
    pub fn new(window_len: usize, dropout_rate: f64, rng: &mut Prng) -> Result<Self> {
        let trunk = TsEncoder::new(window_len, dropout_rate, rng)?;
        let head = Sequential::new()
            .push(Dense::new(EMBEDDING_DIM, 32, rng))
            .push(Activation::relu())
            .push(Dense::new(32, 1, rng));
        Ok(TsClassifier { trunk, head })
    }

    pub fn trunk(&self) -> &TsEncoder<S> {
        &self.trunk
    }

    pub fn head_layers(&self) -> Vec<String> {
        self.head.describe()
    }

    pub fn forward(&mut self, x: &Tensor<S>, rng: &mut Prng) -> Result<Tensor<S>> {
        let emb = self.trunk.forward(x, rng)?;
        self.head.forward(&emb, rng)
    }

    pub fn backward(&mut self, d_logits: &Tensor<S>) -> Result<Tensor<S>> {
        let g = self.head.backward(d_logits)?;
        self.trunk.backward(&g)
    }

    pub fn infer(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let emb = self.trunk.infer(x)?;
        self.head.infer(&emb)
    }
}

impl<S: Scalar> Network<S> for TsClassifier<S> {
    fn role(&self) -> Role {
        Role::TsClassifier
    }
    fn layers(&self) -> Vec<String> {
        let mut l = self.trunk.layers();
        l.extend(self.head.describe());
        l
    }
    fn params(&self) -> Vec<&Tensor<S>> {
        let mut p = self.trunk.params();
        p.extend(self.head.params());
        p
    }
    fn params_mut(&mut self) -> Vec<&mut Tensor<S>> {
        let mut p = self.trunk.params_mut();
        p.extend(self.head.params_mut());
        p
    }
    fn forward_calls(&self) -> u64 {
        self.trunk.forward_calls()
    }
}

/// Decision rule shared by both classifiers: unstable iff σ(logit) > 0.5,
/// so a logit of exactly 0 is classified stable.
pub fn predict_unstable<S: Scalar>(logit: S) -> bool {
    logit > S::zero()
}
