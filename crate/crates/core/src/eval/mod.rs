//! Metrics, the end-to-end test pipeline and multi-seed aggregation.

mod aggregate;
mod metrics;
mod pipeline;
pub mod signal;
mod ssim;

pub use aggregate::{aggregate_runs, render_table, EvalReport, ModelSummary, RunResult, Stat, TABLE_COLUMNS};
pub use metrics::{classification_metrics, fmt_metric, ConfusionCounts, Metrics};
pub use pipeline::{
    actual_unstable, classify_frames, classify_windows, run_test_pipeline, stable_temporal_std, PipelineResult,
    TrioFingerprints, EVAL_BATCH,
};
pub use signal::{dominant_frequency, rms, SpectralPeak};
pub use ssim::{pixel_mse, ssim, ssim_images};
