use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vsense_core::datagen::{ConditionSpec, GeneratorConfig, Label, Split};
use vsense_core::rng::derive_seed;
use vsense_core::training::{LossWeights, Regime, TrainConfig};
use vsense_core::util::sha256;

use crate::error::CliError;

/// One operating point; its id is its position in the roster and its
/// seed is derived from the master seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionEntry {
    pub premixing_length: f32,
    pub ffr: f32,
    pub afr: f32,
    pub label: Label,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetParams {
    pub master_seed: u64,
    pub window_len: usize,
    pub stride: usize,
    pub conditions: Vec<ConditionEntry>,
    pub generator: GeneratorConfig,
}

impl Default for DatasetParams {
    fn default() -> Self {
        let conditions = vsense_core::datagen::default_conditions(0)
            .into_iter()
            .map(|c| ConditionEntry {
                premixing_length: c.premixing_length,
                ffr: c.ffr,
                afr: c.afr,
                label: c.label,
                split: c.split,
            })
            .collect();
        DatasetParams { master_seed: 7, window_len: 75, stride: 36, conditions, generator: GeneratorConfig::default() }
    }
}

/// Fields left out fall back to the shared training defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegimeOverride {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dropout_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss_weights: Option<LossWeights>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingParams {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub dropout_rate: f64,
    pub loss_weights: LossWeights,
    pub overrides: BTreeMap<Regime, RegimeOverride>,
}

impl Default for TrainingParams {
    fn default() -> Self {
        let base = TrainConfig::new(Regime::AE, 0);
        TrainingParams {
            lr: base.lr,
            batch_size: base.batch_size,
            epochs: 4,
            dropout_rate: base.dropout_rate,
            loss_weights: base.loss_weights,
            overrides: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetParams,
    pub training: TrainingParams,
    pub seeds: Vec<u64>,
    /// Regimes run by `train all` and scored by `evaluate`.
    pub regimes: Vec<Regime>,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: DatasetParams::default(),
            training: TrainingParams::default(),
            seeds: (1..=5).collect(),
            regimes: Regime::ALL.to_vec(),
            out_dir: PathBuf::from("runs"),
        }
    }
}

/// The part of the config that determines artifact contents. Seeds,
/// regime selection and output location only choose which runs exist.
#[derive(Serialize)]
struct Hashed<'a> {
    dataset: &'a DatasetParams,
    training: &'a TrainingParams,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))
    }

    pub fn conditions(&self) -> Vec<ConditionSpec> {
        self.dataset
            .conditions
            .iter()
            .enumerate()
            .map(|(i, c)| ConditionSpec {
                id: i as u32,
                premixing_length: c.premixing_length,
                ffr: c.ffr,
                afr: c.afr,
                label: c.label,
                split: c.split,
                seed: derive_seed(self.dataset.master_seed, i as u64),
            })
            .collect()
    }

    pub fn train_config(&self, regime: Regime, seed: u64) -> TrainConfig {
        let t = &self.training;
        let o = t.overrides.get(&regime).cloned().unwrap_or_default();
        TrainConfig {
            regime,
            lr: o.lr.unwrap_or(t.lr),
            batch_size: o.batch_size.unwrap_or(t.batch_size),
            epochs: o.epochs.unwrap_or(t.epochs),
            seed,
            loss_weights: o.loss_weights.unwrap_or(t.loss_weights),
            dropout_rate: o.dropout_rate.unwrap_or(t.dropout_rate),
        }
    }

    pub fn provenance(&self) -> [u8; 32] {
        let view = Hashed { dataset: &self.dataset, training: &self.training };
        sha256(&serde_json::to_vec(&view).expect("config serializes"))
    }

    pub fn hash(&self) -> String {
        vsense_core::models::hex(&self.provenance())
    }

    /// Config as echoed into JSON artifacts (output location omitted so
    /// artifacts do not depend on where they were written).
    pub fn echo(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(m) = v.as_object_mut() {
            m.remove("out_dir");
        }
        v
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        let d = &self.dataset;
        if d.stride == 0 || !d.stride.is_multiple_of(3) {
            return bad(format!("stride {} must be a positive multiple of 3", d.stride));
        }
        if d.window_len == 0 || d.window_len > vsense_core::datagen::SERIES_LEN {
            return bad(format!("window length {} out of range", d.window_len));
        }
        d.generator.validate().map_err(|e| CliError::Config(e.to_string()))?;
        for split in [Split::Train, Split::Test] {
            for label in [Label::Stable, Label::Unstable] {
                if !d.conditions.iter().any(|c| c.split == split && c.label == label) {
                    return bad(format!("roster has no {} condition in the {split:?} split", label.name()));
                }
            }
        }
        if self.seeds.len() < 2 {
            return bad("at least two seeds are needed for mean ± std reporting".into());
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return bad("duplicate seeds".into());
        }
        let mut regimes = self.regimes.clone();
        regimes.sort();
        regimes.dedup();
        if regimes.len() != self.regimes.len() || regimes.is_empty() {
            return bad("regime selection must be non-empty and without duplicates".into());
        }
        for &r in &Regime::ALL {
            self.train_config(r, 0).validate().map_err(|e| CliError::Config(format!("{r}: {e}")))?;
        }
        Ok(())
    }
}
