use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::metrics::{ConfusionCounts, Metrics};
use crate::error::{Error, Result};
use crate::training::Regime;

/// Scores of one trained model (one regime, one seed) on the test split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub regime: Regime,
    pub seed: u64,
    pub config_hash: String,
    pub dataset_digest: String,
    /// Architecture fingerprints of the models in the test chain.
    pub fingerprints: Vec<String>,
    pub samples: usize,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
    /// Per-image means over the test split; absent for classifiers.
    pub ssim_mean: Option<f64>,
    pub mse_mean: Option<f64>,
    pub stable_recon_max_std: Option<f64>,
}

/// Mean and sample standard deviation over the runs where a value is defined.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: Option<f64>,
    pub n: usize,
}

impl Stat {
    /// Order-independent: values are sorted before summation.
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let mean = v.iter().sum::<f64>() / n as f64;
        let std = (n > 1).then(|| {
            let mut d: Vec<f64> = v.iter().map(|x| (x - mean).powi(2)).collect();
            d.sort_by(f64::total_cmp);
            (d.iter().sum::<f64>() / (n - 1) as f64).sqrt()
        });
        Some(Stat { mean, std, n })
    }

    pub fn fmt_pm(&self) -> String {
        match self.std {
            Some(s) => format!("{:.4} ± {:.4}", self.mean, s),
            None => format!("{:.4}", self.mean),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub regime: Regime,
    pub model: String,
    pub seeds: Vec<u64>,
    pub accuracy: Option<Stat>,
    pub f1: Option<Stat>,
    pub fnr: Option<Stat>,
    pub ssim: Option<Stat>,
    pub mse: Option<Stat>,
    pub stable_recon_max_std: Option<f64>,
}

fn collect(runs: &[RunResult], f: impl Fn(&RunResult) -> Option<f64>) -> Option<Stat> {
    Stat::of(&runs.iter().filter_map(f).collect::<Vec<_>>())
}

/// Mean ± sample std of each metric over seeds of one regime.
pub fn aggregate_runs(runs: &[RunResult]) -> Result<ModelSummary> {
    if runs.len() < 2 {
        return Err(Error::Aggregation(format!("need at least 2 runs, got {}", runs.len())));
    }
    let first = &runs[0];
    for r in &runs[1..] {
        let mismatch = if r.regime != first.regime {
            Some("regime")
        } else if r.config_hash != first.config_hash {
            Some("config hash")
        } else if r.dataset_digest != first.dataset_digest {
            Some("dataset")
        } else if r.fingerprints != first.fingerprints {
            Some("model fingerprints")
        } else {
            None
        };
        if let Some(what) = mismatch {
            return Err(Error::Aggregation(format!("runs disagree on {what} (seeds {} and {})", first.seed, r.seed)));
        }
    }
    let mut seeds: Vec<u64> = runs.iter().map(|r| r.seed).collect();
    seeds.sort_unstable();
    Ok(ModelSummary {
        regime: first.regime,
        model: first.regime.display_name().to_string(),
        seeds,
        accuracy: collect(runs, |r| r.metrics.accuracy),
        f1: collect(runs, |r| r.metrics.f1),
        fnr: collect(runs, |r| r.metrics.fnr),
        ssim: collect(runs, |r| r.ssim_mean),
        mse: collect(runs, |r| r.mse_mean),
        stable_recon_max_std: runs.iter().filter_map(|r| r.stable_recon_max_std).reduce(f64::max),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config_hash: String,
    pub dataset_digest: String,
    pub seeds: Vec<u64>,
    pub models: Vec<ModelSummary>,
    pub runs: Vec<RunResult>,
}

impl EvalReport {
    pub fn model(&self, regime: Regime) -> Option<&ModelSummary> {
        self.models.iter().find(|m| m.regime == regime)
    }
}

pub const TABLE_COLUMNS: [&str; 6] = ["Model", "SSIM", "MSE", "Accuracy", "F1 Score", "FNR"];

/// Plain-text results table: one row per model, reconstruction scores as
/// means (NA for classifiers) and classification scores as mean ± std.
pub fn render_table(report: &EvalReport) -> String {
    let cell = |s: &Option<Stat>| s.as_ref().map_or_else(|| "undefined".to_string(), Stat::fmt_pm);
    let plain = |s: &Option<Stat>, recon: bool| match (recon, s) {
        (false, _) => "NA".to_string(),
        (true, Some(s)) => format!("{:.4}", s.mean),
        (true, None) => "undefined".to_string(),
    };
    let rows: Vec<[String; 6]> = report
        .models
        .iter()
        .map(|m| {
            let recon = m.regime.reconstructs();
            [m.model.clone(), plain(&m.ssim, recon), plain(&m.mse, recon), cell(&m.accuracy), cell(&m.f1), cell(&m.fnr)]
        })
        .collect();
    let mut widths = TABLE_COLUMNS.map(|c| c.chars().count());
    for r in &rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &[String]| -> String {
        let padded: Vec<String> =
            cells.iter().zip(&widths).map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count()))).collect();
        format!("| {} |", padded.join(" | "))
    };
    let mut out = String::new();
    let _ = writeln!(out, "{}", line(&TABLE_COLUMNS.map(String::from)));
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    let _ = writeln!(out, "|-{}-|", rule.join("-|-"));
    for r in &rows {
        let _ = writeln!(out, "{}", line(r));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_run_sample_std() {
        let s = Stat::of(&[0.98, 1.00]).unwrap();
        assert!((s.mean - 0.99).abs() < 1e-12);
        assert!((s.std.unwrap() - 0.014_142_135_623_730_95).abs() < 1e-9);
        let d = Stat::of(&[0.5, 0.5]).unwrap();
        assert_eq!(d.std, Some(0.0));
    }

    #[test]
    fn order_independent() {
        let v = [0.1, 0.7, 0.30000000000000004, 0.9, 1e-9];
        let mut w = v;
        w.reverse();
        assert_eq!(Stat::of(&v), Stat::of(&w));
    }
}
