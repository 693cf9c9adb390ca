use std::cell::Cell;

use rand::seq::SliceRandom;

use crate::datagen::{Dataset, Label, Split};
use crate::error::{Error, Result};
use crate::models::{windows_to_input, FRAME_SIZE};
use crate::numerics::Tensor;
use crate::rng::Prng;
use crate::scalar::Scalar;

/// Training view over one split of a dataset; counts tensor assembly so
/// tests can check which modalities a regime touches.
pub struct TrainSet<'a> {
    ds: &'a Dataset,
    indices: Vec<usize>,
    frame_batches: Cell<u64>,
    window_batches: Cell<u64>,
}

impl<'a> TrainSet<'a> {
    pub fn new(ds: &'a Dataset, split: Split) -> Result<Self> {
        Self::from_indices(ds, ds.indices(split))
    }

    pub fn from_indices(ds: &'a Dataset, indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::param("training", "no training samples"));
        }
        Ok(TrainSet { ds, indices, frame_batches: Cell::new(0), window_batches: Cell::new(0) })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn window_len(&self) -> usize {
        self.ds.header.window_len
    }

    pub fn frame_batches(&self) -> u64 {
        self.frame_batches.get()
    }

    pub fn window_batches(&self) -> u64 {
        self.window_batches.get()
    }

    /// Shuffled positions split into batches; the last may be partial.
    pub fn epoch_batches(&self, batch_size: usize, rng: &mut Prng) -> Vec<Vec<usize>> {
        let mut order = self.indices.clone();
        order.shuffle(rng);
        order.chunks(batch_size).map(<[usize]>::to_vec).collect()
    }

    pub fn frames<S: Scalar>(&self, batch: &[usize]) -> Tensor<S> {
        self.frame_batches.set(self.frame_batches.get() + 1);
        frames_tensor(self.ds, batch)
    }

    pub fn windows<S: Scalar>(&self, batch: &[usize]) -> Result<Tensor<S>> {
        self.window_batches.set(self.window_batches.get() + 1);
        windows_tensor(self.ds, batch)
    }

    pub fn labels(&self, batch: &[usize]) -> Vec<u8> {
        batch.iter().map(|&i| self.ds.samples[i].label.as_u8()).collect()
    }

    pub fn require_both_classes(&self) -> Result<()> {
        let unstable = self.indices.iter().filter(|&&i| self.ds.samples[i].label == Label::Unstable).count();
        if unstable == 0 || unstable == self.indices.len() {
            return Err(Error::param("training", "classifier needs both classes in the training data"));
        }
        Ok(())
    }
}

/// `[N, 1, 64, 64]` frames for the given sample indices.
pub fn frames_tensor<S: Scalar>(ds: &Dataset, batch: &[usize]) -> Tensor<S> {
    let px = FRAME_SIZE * FRAME_SIZE;
    let mut data = Vec::with_capacity(batch.len() * px);
    for &i in batch {
        data.extend(ds.samples[i].frame.pixels.iter().map(|&p| S::lit(p as f64)));
    }
    Tensor::new(&[batch.len(), 1, FRAME_SIZE, FRAME_SIZE], data).expect("frame size fixed by dataset")
}

/// Scaled `[N, W, 4]` model input for the given sample indices.
pub fn windows_tensor<S: Scalar>(ds: &Dataset, batch: &[usize]) -> Result<Tensor<S>> {
    let w: Vec<&[f32]> = batch.iter().map(|&i| ds.samples[i].window.as_slice()).collect();
    windows_to_input(&w, ds.header.window_len)
}
