use serde::{Deserialize, Serialize};

use super::config::{LossWeights, TrainConfig};

/// Sample-weighted epoch means of each loss term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub emb: f64,
    pub rec: f64,
    pub cls: f64,
    pub feat: f64,
}

impl Components {
    pub fn total(&self, w: &LossWeights) -> f64 {
        w.emb * self.emb + w.rec * self.rec + w.cls * self.cls + w.feat * self.feat
    }

    pub fn is_finite(&self) -> bool {
        [self.emb, self.rec, self.cls, self.feat].iter().all(|v| v.is_finite())
    }

    pub(crate) fn add_scaled(&mut self, other: &Components, k: f64) {
        self.emb += k * other.emb;
        self.rec += k * other.rec;
        self.cls += k * other.cls;
        self.feat += k * other.feat;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLosses {
    pub epoch: usize,
    pub emb: f64,
    pub rec: f64,
    pub cls: f64,
    pub feat: f64,
    pub total: f64,
}

impl EpochLosses {
    pub fn components(&self) -> Components {
        Components { emb: self.emb, rec: self.rec, cls: self.cls, feat: self.feat }
    }
}

/// One optimization phase; VS2 has two.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub name: String,
    pub weights: LossWeights,
    pub trainable: Vec<String>,
    pub frozen: Vec<String>,
    pub epochs: Vec<EpochLosses>,
}

/// Parameter digest of a frozen component, identical at every check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrozenRecord {
    pub role: String,
    pub digest: String,
    pub checks: usize,
}

/// Data-flow counters collected while training.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Instrumentation {
    pub image_encoder_calls: u64,
    pub frame_batches: u64,
    pub window_batches: u64,
    /// Classifier batches fed with true frames.
    pub classifier_true_frame_batches: u64,
    /// Classifier batches fed with decoder output.
    pub classifier_reconstruction_batches: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub role: String,
    pub fingerprint: String,
    pub param_digest: String,
    pub path: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub regime: String,
    pub seed: u64,
    pub config: TrainConfig,
    pub train_samples: usize,
    pub phases: Vec<PhaseReport>,
    pub frozen: Vec<FrozenRecord>,
    pub instrumentation: Instrumentation,
    pub models: Vec<ModelRecord>,
}

impl TrainReport {
    /// Largest deviation between a logged total and its weighted components.
    pub fn bookkeeping_error(&self) -> f64 {
        self.phases
            .iter()
            .flat_map(|p| p.epochs.iter().map(move |e| (e.total - e.components().total(&p.weights)).abs()))
            .fold(0.0, f64::max)
    }
}
