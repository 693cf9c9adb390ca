use std::path::{Path, PathBuf};

use vsense_core::models::Role;
use vsense_core::training::Regime;

/// Artifact locations under one output directory.
#[derive(Clone, Debug)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn dataset(&self) -> PathBuf {
        self.root.join("dataset.vsns")
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn run_dir(&self, regime: Regime, seed: u64) -> PathBuf {
        self.root.join(regime.name()).join(seed.to_string())
    }

    pub fn model(&self, regime: Regime, seed: u64, role: Role) -> PathBuf {
        self.run_dir(regime, seed).join(format!("{}.vsnm", role.name()))
    }

    pub fn train_report(&self, regime: Regime, seed: u64) -> PathBuf {
        self.run_dir(regime, seed).join("report.json")
    }

    /// Wall-clock sidecar, kept apart from the deterministic report.
    pub fn timing(&self, regime: Regime, seed: u64) -> PathBuf {
        self.run_dir(regime, seed).join("timing.json")
    }

    pub fn eval_report(&self) -> PathBuf {
        self.root.join("eval").join("eval_report.json")
    }

    pub fn table(&self) -> PathBuf {
        self.root.join("eval").join("table.txt")
    }

    pub fn summary(&self) -> PathBuf {
        self.root.join("report.txt")
    }

    pub fn reconstruction_dir(&self, regime: Regime, seed: u64) -> PathBuf {
        self.root.join("reconstructions").join(regime.name()).join(seed.to_string())
    }
}

/// Models a regime's run directory holds after training.
pub fn produced_roles(regime: Regime) -> &'static [Role] {
    match regime {
        Regime::AE => &[Role::ImageEncoder, Role::ImageDecoder],
        Regime::ImgCls => &[Role::ImageClassifier],
        Regime::TsCls => &[Role::TsClassifier],
        Regime::VS1 | Regime::VS1A | Regime::VS1B | Regime::XMODAL => &[Role::TsEncoder, Role::ImageDecoder],
        Regime::VS2 | Regime::VS2A => &[Role::TsEncoder, Role::ImageDecoder, Role::ImageClassifier],
    }
}

/// Models scored at test time and the regime whose run supplies each.
/// Regimes without their own classifier borrow the image classifier of
/// the same seed.
pub fn test_chain(regime: Regime) -> Vec<(Role, Regime)> {
    match regime {
        Regime::AE => vec![],
        Regime::ImgCls => vec![(Role::ImageClassifier, Regime::ImgCls)],
        Regime::TsCls => vec![(Role::TsClassifier, Regime::TsCls)],
        Regime::VS2 | Regime::VS2A => {
            vec![(Role::TsEncoder, regime), (Role::ImageDecoder, regime), (Role::ImageClassifier, regime)]
        }
        _ => vec![(Role::TsEncoder, regime), (Role::ImageDecoder, regime), (Role::ImageClassifier, Regime::ImgCls)],
    }
}
