//! Trainable layers with cached forward state and explicit backward passes.
//!
//! Every layer sees a leading batch axis. `forward` runs in training mode and
//! caches what `backward` needs; `infer` runs in evaluation mode and is pure.

use rand::RngExt;

use super::activation;
use super::conv::{conv2d, conv2d_backward, conv_transpose2d, conv_transpose2d_backward};
use super::dense::{dense, dense_backward};
use super::dropout::{check_rate, dropout, Mode};
use super::lstm::{lstm_backward, lstm_forward, LstmParams, LstmTrace};
use super::pool::{maxpool2d, maxpool2d_backward, upsample2d_backward, upsample2d_nearest};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::Prng;
use crate::scalar::Scalar;

pub trait Module<S: Scalar> {
    fn forward(&mut self, x: &Tensor<S>, rng: &mut Prng) -> Result<Tensor<S>>;

    /// Accumulates parameter gradients and returns the input gradient.
    fn backward(&mut self, grad_out: &Tensor<S>) -> Result<Tensor<S>>;

    fn infer(&self, x: &Tensor<S>) -> Result<Tensor<S>>;

    fn params(&self) -> Vec<&Tensor<S>> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<S>> {
        Vec::new()
    }

    /// Canonical description used for architecture fingerprints.
    fn describe(&self) -> String;
}

/// Uniform in `[−1/√fan_in, 1/√fan_in]`.
pub fn init_uniform<S: Scalar>(shape: &[usize], fan_in: usize, rng: &mut Prng) -> Tensor<S> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    Tensor::from_fn(shape, |_| S::lit((rng.random::<f64>() * 2.0 - 1.0) * bound))
}

fn missing_cache(op: &'static str) -> Error {
    Error::Sequencing(format!("{op}: backward called without a cached forward pass"))
}

pub struct Conv2d<S> {
    pub weight: Tensor<S>,
    pub bias: Tensor<S>,
    pub stride: usize,
    pub padding: usize,
    input: Option<Tensor<S>>,
}

impl<S: Scalar> Conv2d<S> {
    pub fn new(c_in: usize, c_out: usize, kernel: usize, stride: usize, padding: usize, rng: &mut Prng) -> Self {
        let fan_in = c_in * kernel * kernel;
        Conv2d {
            weight: init_uniform(&[c_out, c_in, kernel, kernel], fan_in, rng),
            bias: init_uniform(&[c_out], fan_in, rng),
            stride,
            padding,
            input: None,
        }
    }
}

impl<S: Scalar> Module<S> for Conv2d<S> {
    fn forward(&mut self, x: &Tensor<S>, _rng: &mut Prng) -> Result<Tensor<S>> {
        let y = self.infer(x)?;
        self.input = Some(x.clone());
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor<S>) -> Result<Tensor<S>> {
        let x = self.input.as_ref().ok_or_else(|| missing_cache("conv2d"))?;
        let (dx, dw, db) = conv2d_backward(x, &self.weight, grad_out, self.stride, self.padding)?;
        accumulate(&mut self.weight, &dw);
        accumulate(&mut self.bias, &db);
        Ok(dx)
    }

    fn infer(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        conv2d(x, &self.weight, &self.bias, self.stride, self.padding)
    }

    fn params(&self) -> Vec<&Tensor<S>> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<S>> {
        vec![&mut self.weight, &mut self.bias]
    }

    fn describe(&self) -> String {
        let s = self.weight.shape();
        format!("conv2d({}->{},k{},s{},p{})", s[1], s[0], s[2], self.stride, self.padding)
    }
}

pub struct ConvTranspose2d<S> {
    /// `[C_in, C_out, k, k]`
    pub weight: Tensor<S>,
    pub bias: Tensor<S>,
    pub stride: usize,
    pub padding: usize,
    input: Option<Tensor<S>>,
}

impl<S: Scalar> ConvTranspose2d<S> {
    pub fn new(c_in: usize, c_out: usize, kernel: usize, stride: usize, padding: usize, rng: &mut Prng) -> Self {
        let fan_in = c_in * kernel * kernel;
        ConvTranspose2d {
            weight: init_uniform(&[c_in, c_out, kernel, kernel], fan_in, rng),
            bias: init_uniform(&[c_out], fan_in, rng),
            stride,
            padding,
            input: None,
        }
    }
}

impl<S: Scalar> Module<S> for ConvTranspose2d<S> {
    fn forward(&mut self, x: &Tensor<S>, _rng: &mut Prng) -> Result<Tensor<S>> {
        let y = self.infer(x)?;
        self.input = Some(x.clone());
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor<S>) -> Result<Tensor<S>> {
        let x = self.input.as_ref().ok_or_else(|| missing_cache("conv_transpose2d"))?;
        let (dx, dw, db) = conv_transpose2d_backward(x, &self.weight, grad_out, self.stride, self.padding)?;
        accumulate(&mut self.weight, &dw);
        accumulate(&mut self.bias, &db);
        Ok(dx)
    }

    fn infer(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        conv_transpose2d(x, &self.weight, &self.bias, self.stride, self.padding)
    }

    fn params(&self) -> Vec<&Tensor<S>> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<S>> {
        vec![&mut self.weight, &mut self.bias]
    }

    fn describe(&self) -> String {
        let s = self.weight.shape();
        format!("conv_transpose2d({}->{},k{},s{},p{})", s[0], s[1], s[2], self.stride, self.padding)
    }
}

pub struct MaxPool2d {
    pub window: usize,
    cache: Option<(Vec<usize>, Vec<usize>)>,
}

impl MaxPool2d {
    pub fn new(window: usize) -> Self {
        MaxPool2d { window, cache: None }
    }
}

impl<S: Scalar> Module<S> for MaxPool2d {
    fn forward(&mut self, x: &Tensor<S>, _rng: &mut Prng) -> Result<Tensor<S>> {
        let (y, idx) = maxpool2d(x, self.window)?;
        self.cache = Some((x.shape().to_vec(), idx));
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor<S>) -> Result<Tensor<S>> {
        let (shape, idx) = self.cache.as_ref().ok_or_else(|| missing_cache("maxpool2d"))?;
        maxpool2d_backward(shape, idx, grad_out)
    }

    fn infer(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        maxpool2d(x, self.window).map(|(y, _)| y)
    }

    fn describe(&self) -> String {
        format!("maxpool2d({})", self.window)
    }
}

pub struct Upsample2d {
    pub factor: usize,
}

impl<S: Scalar> Module<S> for Upsample2d {
    fn forward(&mut self, x: &Tensor<S>, _rng: &mut Prng) -> Result<Tensor<S>> {
        upsample2d_nearest(x, self.factor)
    }

    fn backward(&mut self, grad_out: &Tensor<S>) -> Result<Tensor<S>> {
        upsample2d_backward(grad_out, self.factor)
    }

    fn infer(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        upsample2d_nearest(x, self.factor)
    }

    fn describe(&self) -> String {
        format!("upsample2d({})", self.factor)
    }
}

pub struct Dense<S> {
    /// `[out, in]`
    pub weight: Tensor<S>,
    pub bias: Tensor<S>,
    input: Option<Tensor<S>>,
}

impl<S: Scalar> Dense<S> {
    pub fn new(n_in: usize, n_out: usize, rng: &mut Prng) -> Self {
        Dense { weight: init_uniform(&[n_out, n_in], n_in, rng), bias: init_uniform(&[n_out], n_in, rng), input: None }
    }
}

impl<S: Scalar> Module<S> for Dense<S> {
    fn forward(&mut self, x: &Tensor<S>, _rng: &mut Prng) -> Result<Tensor<S>> {
        let y = self.infer(x)?;
        self.input = Some(x.clone());
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor<S>) -> Result<Tensor<S>> {
        let x = self.input.as_ref().ok_or_else(|| missing_cache("dense"))?;
        let (dx, dw, db) = dense_backward(x, &self.weight, grad_out)?;
        accumulate(&mut self.weight, &dw);
        accumulate(&mut self.bias, &db);
        Ok(dx)
    }

    fn infer(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        dense(x, &self.weight, &self.bias)
    }

    fn params(&self) -> Vec<&Tensor<S>> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<S>> {
        vec![&mut self.weight, &mut self.bias]
    }

    fn describe(&self) -> String {
        format!("dense({}->{})", self.weight.dim(1), self.weight.dim(0))
    }
}

/// LSTM over `[N, T, D]`, emitting the full hidden sequence `[N, T, H]`.
pub struct Lstm<S> {
    pub params: LstmParams<S>,
    cache: Option<(Tensor<S>, LstmTrace<S>)>,
}

impl<S: Scalar> Lstm<S> {
    pub fn new(input: usize, hidden: usize, rng: &mut Prng) -> Self {
        Lstm {
            params: LstmParams {
                w_ih: init_uniform(&[4 * hidden, input], hidden, rng),
                w_hh: init_uniform(&[4 * hidden, hidden], hidden, rng),
                bias: init_uniform(&[4 * hidden], hidden, rng),
            },
            cache: None,
        }
    }
}

impl<S: Scalar> Module<S> for Lstm<S> {
    fn forward(&mut self, x: &Tensor<S>, _rng: &mut Prng) -> Result<Tensor<S>> {
        let (out, trace) = lstm_forward(x, &self.params, None)?;
        self.cache = Some((x.clone(), trace));
        Ok(out.hidden)
    }

    fn backward(&mut self, grad_out: &Tensor<S>) -> Result<Tensor<S>> {
        let (x, trace) = self.cache.as_ref().ok_or_else(|| missing_cache("lstm"))?;
        let g = lstm_backward(x, &self.params, trace, grad_out)?;
        accumulate(&mut self.params.w_ih, &g.params.w_ih);
        accumulate(&mut self.params.w_hh, &g.params.w_hh);
        accumulate(&mut self.params.bias, &g.params.bias);
        Ok(g.d_input)
    }

    fn infer(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        lstm_forward(x, &self.params, None).map(|(out, _)| out.hidden)
    }

    fn params(&self) -> Vec<&Tensor<S>> {
        vec![&self.params.w_ih, &self.params.w_hh, &self.params.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<S>> {
        vec![&mut self.params.w_ih, &mut self.params.w_hh, &mut self.params.bias]
    }

    fn describe(&self) -> String {
        format!("lstm({}->{})", self.params.input(), self.params.hidden())
    }
}

/// Selects the last step of a `[N, T, H]` sequence.
pub struct LastStep {
    shape: Option<Vec<usize>>,
}

impl LastStep {
    pub fn new() -> Self {
        LastStep { shape: None }
    }
}

impl Default for LastStep {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Module<S> for LastStep {
    fn forward(&mut self, x: &Tensor<S>, _rng: &mut Prng) -> Result<Tensor<S>> {
        let y = self.infer(x)?;
        self.shape = Some(x.shape().to_vec());
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor<S>) -> Result<Tensor<S>> {
        let shape = self.shape.as_ref().ok_or_else(|| missing_cache("last_step"))?;
        let (n, t, h) = (shape[0], shape[1], shape[2]);
        let mut d = Tensor::zeros(shape);
        for i in 0..n {
            d.data_mut()[(i * t + t - 1) * h..(i * t + t) * h].copy_from_slice(&grad_out.data()[i * h..(i + 1) * h]);
        }
        Ok(d)
    }

    fn infer(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let [n, t, h] = *x.shape() else {
            return Err(Error::dim("last_step", format!("expected [N, T, H], got {:?}", x.shape())));
        };
        let mut out = Vec::with_capacity(n * h);
        for i in 0..n {
            out.extend_from_slice(&x.data()[(i * t + t - 1) * h..(i * t + t) * h]);
        }
        Tensor::new(&[n, h], out)
    }

    fn describe(&self) -> String {
        "last_step".into()
    }
}

pub struct Dropout<S> {
    pub rate: f64,
    mask: Option<Vec<S>>,
}

impl<S: Scalar> Dropout<S> {
    pub fn new(rate: f64) -> Result<Self> {
        check_rate(rate)?;
        Ok(Dropout { rate, mask: None })
    }
}

impl<S: Scalar> Module<S> for Dropout<S> {
    fn forward(&mut self, x: &Tensor<S>, rng: &mut Prng) -> Result<Tensor<S>> {
        let (y, mask) = dropout(x, self.rate, Mode::Train, rng)?;
        self.mask = Some(mask);
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor<S>) -> Result<Tensor<S>> {
        let mask = self.mask.as_ref().ok_or_else(|| missing_cache("dropout"))?;
        let data = grad_out.data().iter().zip(mask).map(|(&g, &m)| g * m).collect();
        Tensor::new(grad_out.shape(), data)
    }

    fn infer(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        Ok(x.clone())
    }

    fn describe(&self) -> String {
        format!("dropout({})", self.rate)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActivationKind {
    Relu,
    Sigmoid,
    Tanh,
}

pub struct Activation<S> {
    pub kind: ActivationKind,
    /// Input for relu, output for sigmoid/tanh.
    saved: Option<Tensor<S>>,
}

impl<S: Scalar> Activation<S> {
    pub fn new(kind: ActivationKind) -> Self {
        Activation { kind, saved: None }
    }

    pub fn relu() -> Self {
        Self::new(ActivationKind::Relu)
    }

    pub fn sigmoid() -> Self {
        Self::new(ActivationKind::Sigmoid)
    }

    pub fn tanh() -> Self {
        Self::new(ActivationKind::Tanh)
    }
}

impl<S: Scalar> Module<S> for Activation<S> {
    fn forward(&mut self, x: &Tensor<S>, _rng: &mut Prng) -> Result<Tensor<S>> {
        let y = self.infer(x)?;
        self.saved = Some(if self.kind == ActivationKind::Relu { x.clone() } else { y.clone() });
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor<S>) -> Result<Tensor<S>> {
        let saved = self.saved.as_ref().ok_or_else(|| missing_cache("activation"))?;
        Ok(match self.kind {
            ActivationKind::Relu => activation::relu_backward(saved, grad_out),
            ActivationKind::Sigmoid => activation::sigmoid_backward(saved, grad_out),
            ActivationKind::Tanh => activation::tanh_backward(saved, grad_out),
        })
    }

    fn infer(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        Ok(match self.kind {
            ActivationKind::Relu => activation::relu(x),
            ActivationKind::Sigmoid => activation::sigmoid(x),
            ActivationKind::Tanh => activation::tanh(x),
        })
    }

    fn describe(&self) -> String {
        match self.kind {
            ActivationKind::Relu => "relu",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Tanh => "tanh",
        }
        .into()
    }
}

/// Reinterprets each batch item as `item_shape`.
pub struct Reshape {
    pub item_shape: Vec<usize>,
    input_shape: Option<Vec<usize>>,
}

impl Reshape {
    pub fn new(item_shape: &[usize]) -> Self {
        Reshape { item_shape: item_shape.to_vec(), input_shape: None }
    }
}

impl<S: Scalar> Module<S> for Reshape {
    fn forward(&mut self, x: &Tensor<S>, _rng: &mut Prng) -> Result<Tensor<S>> {
        let y = self.infer(x)?;
        self.input_shape = Some(x.shape().to_vec());
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor<S>) -> Result<Tensor<S>> {
        let shape = self.input_shape.as_ref().ok_or_else(|| missing_cache("reshape"))?;
        grad_out.clone().reshape(shape)
    }

    fn infer(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let mut shape = vec![x.dim(0)];
        shape.extend_from_slice(&self.item_shape);
        x.clone().reshape(&shape)
    }

    fn describe(&self) -> String {
        format!("reshape({:?})", self.item_shape)
    }
}

fn accumulate<S: Scalar>(param: &mut Tensor<S>, delta: &Tensor<S>) {
    for (g, &d) in param.grad_mut().iter_mut().zip(delta.data()) {
        *g += d;
    }
}

/// Ordered stack of layers.
#[derive(Default)]
pub struct Sequential<S> {
    layers: Vec<Box<dyn Module<S>>>,
}

impl<S: Scalar> Sequential<S> {
    pub fn new() -> Self {
        Sequential { layers: Vec::new() }
    }

    pub fn push(mut self, layer: impl Module<S> + 'static) -> Self {
        self.layers.push(Box::new(layer));
        self
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn layers(&self) -> &[Box<dyn Module<S>>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Box<dyn Module<S>>] {
        &mut self.layers
    }

    pub fn forward(&mut self, x: &Tensor<S>, rng: &mut Prng) -> Result<Tensor<S>> {
        let mut cur = x.clone();
        for layer in &mut self.layers {
            cur = layer.forward(&cur, rng)?;
        }
        Ok(cur)
    }

    pub fn backward(&mut self, grad_out: &Tensor<S>) -> Result<Tensor<S>> {
        let mut cur = grad_out.clone();
        for layer in self.layers.iter_mut().rev() {
            cur = layer.backward(&cur)?;
        }
        Ok(cur)
    }

    pub fn infer(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let mut cur = x.clone();
        for layer in &self.layers {
            cur = layer.infer(&cur)?;
        }
        Ok(cur)
    }

    pub fn params(&self) -> Vec<&Tensor<S>> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<S>> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn describe(&self) -> Vec<String> {
        self.layers.iter().map(|l| l.describe()).collect()
    }
}
