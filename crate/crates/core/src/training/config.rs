use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::AdamConfig;

#[allow(clippy::upper_case_acronyms)]
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Regime {
    AE,
    VS1,
    VS1A,
    VS1B,
    VS2,
    VS2A,
    XMODAL,
    #[serde(rename = "IMG_CLS")]
    ImgCls,
    #[serde(rename = "TS_CLS")]
    TsCls,
}

impl Regime {
    pub const ALL: [Regime; 9] = [
        Regime::AE,
        Regime::VS1,
        Regime::VS1A,
        Regime::VS1B,
        Regime::VS2,
        Regime::VS2A,
        Regime::XMODAL,
        Regime::ImgCls,
        Regime::TsCls,
    ];

    /// The eight models compared at test time, in table order.
    pub const EVALUATED: [Regime; 8] = [
        Regime::ImgCls,
        Regime::TsCls,
        Regime::XMODAL,
        Regime::VS1,
        Regime::VS1A,
        Regime::VS1B,
        Regime::VS2,
        Regime::VS2A,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Regime::AE => "AE",
            Regime::VS1 => "VS1",
            Regime::VS1A => "VS1A",
            Regime::VS1B => "VS1B",
            Regime::VS2 => "VS2",
            Regime::VS2A => "VS2A",
            Regime::XMODAL => "XMODAL",
            Regime::ImgCls => "IMG_CLS",
            Regime::TsCls => "TS_CLS",
        }
    }

    pub fn parse(s: &str) -> Option<Regime> {
        Regime::ALL.iter().copied().find(|r| r.name().eq_ignore_ascii_case(s))
    }

    /// Human-readable model name for result tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Regime::AE => "Autoencoder",
            Regime::VS1 => "VSenseNet I",
            Regime::VS1A => "VSenseNet I(A)",
            Regime::VS1B => "VSenseNet I(B)",
            Regime::VS2 => "VSenseNet II",
            Regime::VS2A => "VSenseNet II(A)",
            Regime::XMODAL => "Cross-Modal",
            Regime::ImgCls => "Image Classifier",
            Regime::TsCls => "Time Series Classifier",
        }
    }

    /// Regimes whose trained artifacts this one consumes.
    pub fn prerequisites(self) -> &'static [Regime] {
        match self {
            Regime::VS1 | Regime::VS2 | Regime::VS2A | Regime::VS1B | Regime::XMODAL => &[Regime::AE],
            _ => &[],
        }
    }

    /// Whether the test pipeline produces reconstructions.
    pub fn reconstructs(self) -> bool {
        !matches!(self, Regime::ImgCls | Regime::TsCls | Regime::AE)
    }

    /// Which loss terms the regime optimizes.
    pub fn relevant(self) -> LossWeights {
        let (emb, rec, cls, feat) = match self {
            Regime::AE => (0, 1, 0, 0),
            Regime::VS1 => (1, 1, 0, 0),
            Regime::VS1A => (0, 1, 0, 0),
            Regime::VS1B => (1, 1, 0, 1),
            Regime::VS2 | Regime::VS2A => (1, 1, 1, 0),
            Regime::XMODAL => (1, 0, 0, 0),
            Regime::ImgCls | Regime::TsCls => (0, 0, 1, 0),
        };
        LossWeights { emb: emb as f64, rec: rec as f64, cls: cls as f64, feat: feat as f64 }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub emb: f64,
    pub rec: f64,
    pub cls: f64,
    pub feat: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { emb: 1.0, rec: 1.0, cls: 1.0, feat: 1.0 }
    }
}

impl LossWeights {
    /// Zeroes the weights that `regime` does not use.
    pub fn masked(self, regime: Regime) -> LossWeights {
        let r = regime.relevant();
        let keep = |w: f64, m: f64| if m > 0.0 { w } else { 0.0 };
        LossWeights {
            emb: keep(self.emb, r.emb),
            rec: keep(self.rec, r.rec),
            cls: keep(self.cls, r.cls),
            feat: keep(self.feat, r.feat),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub regime: Regime,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub loss_weights: LossWeights,
    pub dropout_rate: f64,
}

impl TrainConfig {
    pub fn new(regime: Regime, seed: u64) -> Self {
        TrainConfig {
            regime,
            lr: 1e-3,
            batch_size: 32,
            epochs: 30,
            seed,
            loss_weights: LossWeights::default(),
            dropout_rate: 0.2,
        }
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }

    pub fn weights(&self) -> LossWeights {
        self.loss_weights.masked(self.regime)
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, ..AdamConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        self.adam().validate()?;
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::param("train_config", "batch size and epochs must be positive"));
        }
        let w = self.loss_weights;
        if [w.emb, w.rec, w.cls, w.feat].iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::param("train_config", "loss weights must be finite and non-negative"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::param("train_config", format!("dropout rate {} not in [0, 1)", self.dropout_rate)));
        }
        Ok(())
    }
}
