//! Training regimes: autoencoder pretraining, VSenseNet I and II with their
//! ablations, the cross-modal baseline and both single-modality classifiers.

mod config;
mod data;
mod regimes;
mod report;

pub use config::{LossWeights, Regime, TrainConfig};
pub use data::{frames_tensor, windows_tensor, TrainSet};
pub use regimes::{
    pretrain_autoencoder, train, train_crossmodal, train_image_classifier, train_ts_classifier, train_vsensenet1,
    train_vsensenet2, train_vsensenet2a, Outcome, Pretrained, Trained, Vs2Session,
};
pub use report::{Components, EpochLosses, FrozenRecord, Instrumentation, ModelRecord, PhaseReport, TrainReport};
