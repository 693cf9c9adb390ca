use std::collections::BTreeSet;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use vsense_core::datagen::{frame_to_pgm, generate, write_dataset, Dataset, FlameFrame, Label, OracleReport, Split};
use vsense_core::eval::{
    actual_unstable, aggregate_runs, classification_metrics, classify_frames, classify_windows, render_table,
    run_test_pipeline, stable_temporal_std, ConfusionCounts, EvalReport, RunResult, EVAL_BATCH,
};
use vsense_core::models::{
    hex, load_model, predict_unstable, read_model_header, save_model, ImageClassifier, ImageDecoder, ImageEncoder,
    Network, Role, TsClassifier, TsEncoder, FRAME_SIZE,
};
use vsense_core::numerics::FlushToZero;
use vsense_core::rng::seeded;
use vsense_core::training::{train, windows_tensor, Pretrained, Regime, TrainReport, TrainSet};
use vsense_core::util::{sha256, write_atomic};
use vsense_core::Error;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::layout::{produced_roles, test_chain, Layout};

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("artifact serializes");
    bytes.push(b'\n');
    Ok(write_atomic(path, &bytes)?)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
    serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Dependency(format!("unreadable artifact {}: {e}", path.display())))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionManifest {
    pub id: u32,
    pub name: String,
    pub label: Label,
    pub split: Split,
    pub seed: u64,
    pub samples: usize,
    pub oracle: OracleReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub config: serde_json::Value,
    pub dataset_file: String,
    pub dataset_sha256: String,
    pub train_samples: usize,
    pub test_samples: usize,
    pub conditions: Vec<ConditionManifest>,
}

/// Builds the synthetic dataset and its manifest.
pub fn cmd_generate(cfg: &RunConfig, layout: &Layout) -> Result<Manifest, CliError> {
    cfg.validate()?;
    let conds = cfg.conditions();
    let d = &cfg.dataset;
    let (mut ds, reports) = generate(&conds, d.window_len, d.stride, &d.generator, d.master_seed)?;
    ds.header.provenance = cfg.provenance();
    let path = layout.dataset();
    write_dataset(&ds, &path)?;
    let bytes = std::fs::read(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
    let conditions = conds
        .iter()
        .zip(reports)
        .map(|(c, oracle)| ConditionManifest {
            id: c.id,
            name: c.name(),
            label: c.label,
            split: c.split,
            seed: c.seed,
            samples: ds.samples.iter().filter(|s| s.condition_id == c.id).count(),
            oracle,
        })
        .collect();
    let manifest = Manifest {
        config_hash: cfg.hash(),
        config: cfg.echo(),
        dataset_file: "dataset.vsns".into(),
        dataset_sha256: hex(&sha256(&bytes)),
        train_samples: ds.indices(Split::Train).len(),
        test_samples: ds.indices(Split::Test).len(),
        conditions,
    };
    write_json(&layout.manifest(), &manifest)?;
    Ok(manifest)
}

/// Reads the dataset and checks it was generated from this config.
pub fn load_dataset(cfg: &RunConfig, layout: &Layout) -> Result<(Dataset, String), CliError> {
    let path = layout.dataset();
    if !path.exists() {
        return Err(CliError::Dependency(format!("no dataset at {}; run `vsense generate` first", path.display())));
    }
    let bytes = std::fs::read(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
    let ds = vsense_core::datagen::decode_dataset(&bytes)?;
    if ds.header.provenance != cfg.provenance() {
        return Err(CliError::Dependency(format!(
            "dataset {} was generated under config {}, current config is {}; rerun `vsense generate`",
            path.display(),
            hex(&ds.header.provenance),
            cfg.hash()
        )));
    }
    Ok((ds, hex(&sha256(&bytes))))
}

/// Loads a model file into `net` after checking it exists and carries the
/// current config hash.
fn load_artifact<N: Network<f32>>(
    cfg: &RunConfig,
    layout: &Layout,
    owner: Regime,
    seed: u64,
    role: Role,
    mut net: N,
) -> Result<N, CliError> {
    let path = layout.model(owner, seed, role);
    if !path.exists() {
        return Err(CliError::Dependency(format!(
            "{} for seed {seed} not found at {}; run `vsense train {owner}` first",
            role.name(),
            path.display()
        )));
    }
    let header = read_model_header(&path)?;
    if header.provenance != cfg.provenance() {
        return Err(CliError::Dependency(format!(
            "{} was trained under config {}, current config is {}; refusing to mix artifacts",
            path.display(),
            hex(&header.provenance),
            cfg.hash()
        )));
    }
    load_model(&path, &mut net)?;
    Ok(net)
}

fn blank_image_encoder() -> ImageEncoder<f32> {
    ImageEncoder::new(&mut seeded(0))
}

fn blank_image_decoder() -> ImageDecoder<f32> {
    ImageDecoder::new(&mut seeded(0))
}

fn blank_image_classifier() -> ImageClassifier<f32> {
    ImageClassifier::new(&mut seeded(0))
}

fn blank_ts_encoder(cfg: &RunConfig, regime: Regime) -> Result<TsEncoder<f32>, CliError> {
    let dropout = cfg.train_config(regime, 0).dropout_rate;
    Ok(TsEncoder::new(cfg.dataset.window_len, dropout, &mut seeded(0))?)
}

fn blank_ts_classifier(cfg: &RunConfig) -> Result<TsClassifier<f32>, CliError> {
    let dropout = cfg.train_config(Regime::TsCls, 0).dropout_rate;
    Ok(TsClassifier::new(cfg.dataset.window_len, dropout, &mut seeded(0))?)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainRunFile {
    pub config_hash: String,
    pub config: serde_json::Value,
    pub report: TrainReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Timing {
    pub regime: Regime,
    pub seed: u64,
    pub wall_seconds: f64,
}

fn missing_prerequisites(layout: &Layout, regime: Regime, seeds: &[u64]) -> Vec<String> {
    let mut missing = Vec::new();
    for &pre in regime.prerequisites() {
        for &seed in seeds {
            let complete = layout.train_report(pre, seed).exists()
                && produced_roles(pre).iter().all(|&r| layout.model(pre, seed, r).exists());
            if !complete {
                missing.push(format!("{pre} seed {seed}"));
            }
        }
    }
    missing
}

/// Trains one regime for every configured seed.
pub fn cmd_train(cfg: &RunConfig, layout: &Layout, regime: Regime) -> Result<Vec<Timing>, CliError> {
    cfg.validate()?;
    let (ds, _) = load_dataset(cfg, layout)?;
    let missing = missing_prerequisites(layout, regime, &cfg.seeds);
    if !missing.is_empty() {
        let pre: Vec<&str> = regime.prerequisites().iter().map(|r| r.name()).collect();
        return Err(CliError::Dependency(format!(
            "{regime} requires {} (missing: {}); run `vsense pretrain` first",
            pre.join(", "),
            missing.join(", ")
        )));
    }
    let mut timings = Vec::new();
    for &seed in &cfg.seeds {
        let t = train_run(cfg, layout, &ds, regime, seed)?;
        eprintln!("{regime} seed {seed}: {:.1} s", t.wall_seconds);
        timings.push(t);
    }
    Ok(timings)
}

/// `train all`: every selected regime plus whatever it trains from or is
/// tested with, autoencoder first.
pub fn cmd_train_all(cfg: &RunConfig, layout: &Layout) -> Result<Vec<Timing>, CliError> {
    let mut needed: Vec<Regime> = cfg.regimes.clone();
    let mut i = 0;
    while i < needed.len() {
        let r = needed[i];
        let deps = r.prerequisites().iter().copied().chain(test_chain(r).into_iter().map(|(_, owner)| owner));
        for d in deps {
            if !needed.contains(&d) {
                needed.push(d);
            }
        }
        i += 1;
    }
    let order: Vec<Regime> = Regime::ALL.into_iter().filter(|r| needed.contains(r)).collect();
    let mut all = Vec::new();
    for r in order {
        all.extend(cmd_train(cfg, layout, r)?);
    }
    Ok(all)
}

fn train_run(cfg: &RunConfig, layout: &Layout, ds: &Dataset, regime: Regime, seed: u64) -> Result<Timing, CliError> {
    let tc = cfg.train_config(regime, seed);
    let data = TrainSet::new(ds, Split::Train)?;
    let needs_ae = regime.prerequisites().contains(&Regime::AE);
    let (enc, dec) = if needs_ae {
        (
            Some(load_artifact(cfg, layout, Regime::AE, seed, Role::ImageEncoder, blank_image_encoder())?),
            Some(load_artifact(cfg, layout, Regime::AE, seed, Role::ImageDecoder, blank_image_decoder())?),
        )
    } else {
        (None, None)
    };
    let pre = Pretrained { encoder: enc.as_ref(), decoder: dec.as_ref() };
    let start = Instant::now();
    let outcome = train::<f32>(&tc, &data, pre)?;
    let wall_seconds = start.elapsed().as_secs_f64();

    let prov = cfg.provenance();
    let mut report = outcome.report;
    let mut nets = outcome.models.networks();
    // The cross-modal baseline reconstructs through the pretrained decoder;
    // a copy keeps its run directory self-contained.
    if regime == Regime::XMODAL {
        if let Some(d) = dec.as_ref() {
            nets.push(d);
        }
    }
    for net in &nets {
        let role = net.role();
        let path = layout.model(regime, seed, role);
        save_model(&path, *net, prov)?;
        let file = format!("{}.vsnm", role.name());
        match report.models.iter_mut().find(|m| m.role == role.name()) {
            Some(m) => m.path = Some(file),
            None => report.models.push(vsense_core::training::ModelRecord {
                role: role.name().to_string(),
                fingerprint: net.spec().fingerprint,
                param_digest: net.param_digest(),
                path: Some(file),
            }),
        }
    }
    let file = TrainRunFile { config_hash: cfg.hash(), config: cfg.echo(), report };
    write_json(&layout.train_report(regime, seed), &file)?;
    let timing = Timing { regime, seed, wall_seconds };
    write_json(&layout.timing(regime, seed), &timing)?;
    Ok(timing)
}

fn evaluated_regimes(cfg: &RunConfig) -> Vec<Regime> {
    Regime::EVALUATED.iter().copied().filter(|r| cfg.regimes.contains(r)).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalFile {
    pub config: serde_json::Value,
    pub report: EvalReport,
}

/// Scores every selected regime and seed on the test split and writes the
/// consolidated report and table.
pub fn cmd_evaluate(cfg: &RunConfig, layout: &Layout) -> Result<(EvalReport, String), CliError> {
    cfg.validate()?;
    let regimes = evaluated_regimes(cfg);
    if regimes.is_empty() {
        return Err(CliError::Config("no evaluated regime selected".into()));
    }
    let (ds, dataset_digest) = load_dataset(cfg, layout)?;

    let mut missing = BTreeSet::new();
    for &r in &regimes {
        for &seed in &cfg.seeds {
            for (role, owner) in test_chain(r) {
                if !layout.model(owner, seed, role).exists() || !layout.train_report(owner, seed).exists() {
                    missing.insert(format!("{owner} seed {seed}"));
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(CliError::Dependency(format!(
            "missing runs: {}",
            missing.into_iter().collect::<Vec<_>>().join(", ")
        )));
    }

    let test = ds.indices(Split::Test);
    let actual = actual_unstable(&ds, &test);
    let mut runs = Vec::new();
    let mut models = Vec::new();
    for &r in &regimes {
        let mut per_seed = Vec::new();
        for &seed in &cfg.seeds {
            per_seed.push(eval_run(cfg, layout, &ds, &dataset_digest, &test, &actual, r, seed)?);
        }
        models.push(aggregate_runs(&per_seed)?);
        runs.extend(per_seed);
    }
    let mut seeds = cfg.seeds.clone();
    seeds.sort_unstable();
    let report = EvalReport { config_hash: cfg.hash(), dataset_digest, seeds, models, runs };
    let table = render_table(&report);
    write_json(&layout.eval_report(), &EvalFile { config: cfg.echo(), report: report.clone() })?;
    write_atomic(&layout.table(), table.as_bytes())?;
    Ok((report, table))
}

#[allow(clippy::too_many_arguments)]
fn eval_run(
    cfg: &RunConfig,
    layout: &Layout,
    ds: &Dataset,
    digest: &str,
    test: &[usize],
    actual: &[bool],
    regime: Regime,
    seed: u64,
) -> Result<RunResult, CliError> {
    let (logits, fingerprints, recon) = match regime {
        Regime::ImgCls => {
            let cls = load_artifact(cfg, layout, regime, seed, Role::ImageClassifier, blank_image_classifier())?;
            (classify_frames(&cls, ds, test)?, vec![cls.spec().fingerprint], None)
        }
        Regime::TsCls => {
            let cls = load_artifact(cfg, layout, regime, seed, Role::TsClassifier, blank_ts_classifier(cfg)?)?;
            (classify_windows(&cls, ds, test)?, vec![cls.spec().fingerprint], None)
        }
        _ => {
            let chain = test_chain(regime);
            let ts = load_artifact(cfg, layout, chain[0].1, seed, Role::TsEncoder, blank_ts_encoder(cfg, regime)?)?;
            let dec = load_artifact(cfg, layout, chain[1].1, seed, Role::ImageDecoder, blank_image_decoder())?;
            let cls = load_artifact(cfg, layout, chain[2].1, seed, Role::ImageClassifier, blank_image_classifier())?;
            let out = run_test_pipeline(&ts, &dec, &cls, ds, test, None)?;
            let fps = vec![ts.spec().fingerprint, dec.spec().fingerprint, cls.spec().fingerprint];
            let n = test.len() as f64;
            let ssim = out.ssim.iter().sum::<f64>() / n;
            let mse = out.mse.iter().sum::<f64>() / n;
            let std = stable_temporal_std(ds, test, &out.reconstructions);
            (out.logits, fps, Some((ssim, mse, std)))
        }
    };
    let predicted: Vec<bool> = logits.iter().map(|&z| predict_unstable(z)).collect();
    let counts = ConfusionCounts::from_predictions(&predicted, actual)?;
    Ok(RunResult {
        regime,
        seed,
        config_hash: cfg.hash(),
        dataset_digest: digest.to_string(),
        fingerprints,
        samples: test.len(),
        counts,
        metrics: classification_metrics(&counts),
        ssim_mean: recon.map(|r| r.0),
        mse_mean: recon.map(|r| r.1),
        stable_recon_max_std: recon.and_then(|r| r.2),
    })
}

#[derive(Clone, Debug)]
pub struct ReconstructRequest {
    pub regime: Regime,
    pub seed: u64,
    /// Condition name (e.g. `stable_120_45_450`) or numeric id.
    pub condition: String,
    /// Position of the first sample within the condition.
    pub start: usize,
    pub count: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReconstructSummary {
    pub files: Vec<String>,
    /// Largest per-pixel standard deviation across the dumped reconstructions.
    pub max_pixel_std: Option<f64>,
}

/// Dumps true and reconstructed frames side by side as PGM files.
pub fn cmd_reconstruct(
    cfg: &RunConfig,
    layout: &Layout,
    req: &ReconstructRequest,
) -> Result<ReconstructSummary, CliError> {
    cfg.validate()?;
    let regime = req.regime;
    if !regime.reconstructs() {
        return Err(CliError::Config(format!("{regime} does not reconstruct frames")));
    }
    let (ds, _) = load_dataset(cfg, layout)?;
    let cond = ds
        .conditions
        .iter()
        .find(|c| c.name() == req.condition || c.id.to_string() == req.condition)
        .ok_or_else(|| CliError::Config(format!("unknown condition {:?}", req.condition)))?
        .clone();
    let members: Vec<usize> = (0..ds.samples.len()).filter(|&i| ds.samples[i].condition_id == cond.id).collect();
    if req.count == 0 || req.start.checked_add(req.count).is_none_or(|end| end > members.len()) {
        return Err(Error::Parameter {
            op: "reconstruct",
            detail: format!(
                "frames {}..{} out of range for {} ({} samples)",
                req.start,
                req.start.saturating_add(req.count),
                cond.name(),
                members.len()
            ),
        }
        .into());
    }
    let chain = test_chain(regime);
    let ts = load_artifact(cfg, layout, chain[0].1, req.seed, Role::TsEncoder, blank_ts_encoder(cfg, regime)?)?;
    let dec = load_artifact(cfg, layout, chain[1].1, req.seed, Role::ImageDecoder, blank_image_decoder())?;
    let picked = &members[req.start..req.start + req.count];

    let px = FRAME_SIZE * FRAME_SIZE;
    let mut recon = Vec::with_capacity(picked.len());
    {
        let _ftz = FlushToZero::enable();
        for chunk in picked.chunks(EVAL_BATCH) {
            let image = dec.infer(&ts.infer(&windows_tensor::<f32>(&ds, chunk)?)?)?.image;
            recon.extend(image.data().chunks(px).map(|c| FlameFrame { pixels: c.to_vec() }));
        }
    }

    let dir = layout.reconstruction_dir(regime, req.seed);
    let mut files = Vec::new();
    for (&i, r) in picked.iter().zip(&recon) {
        let s = &ds.samples[i];
        for (tag, frame) in [("true", &s.frame), (regime.name(), r)] {
            let name = format!("{}_{}_{}.pgm", cond.name(), s.frame_index, tag);
            write_atomic(&dir.join(&name), &frame_to_pgm(frame))?;
            files.push(name);
        }
    }
    Ok(ReconstructSummary { files, max_pixel_std: max_pixel_std(&recon) })
}

fn max_pixel_std(frames: &[FlameFrame]) -> Option<f64> {
    if frames.len() < 2 {
        return None;
    }
    let n = frames.len() as f64;
    let px = frames[0].pixels.len();
    (0..px)
        .map(|k| {
            let mean = frames.iter().map(|f| f.pixels[k] as f64).sum::<f64>() / n;
            (frames.iter().map(|f| (f.pixels[k] as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        })
        .reduce(f64::max)
}

/// Assembles the results table and a training summary into `report.txt`.
pub fn cmd_report(cfg: &RunConfig, layout: &Layout) -> Result<String, CliError> {
    let path = layout.eval_report();
    if !path.exists() {
        return Err(CliError::Dependency(format!("no evaluation at {}; run `vsense evaluate` first", path.display())));
    }
    let eval: EvalFile = read_json(&path)?;
    if eval.report.config_hash != cfg.hash() {
        return Err(CliError::Dependency(format!(
            "evaluation was produced under config {}, current config is {}",
            eval.report.config_hash,
            cfg.hash()
        )));
    }
    let mut out = String::new();
    out.push_str(&format!(
        "config {}\ndataset {}\nseeds {:?}\n\n",
        eval.report.config_hash, eval.report.dataset_digest, eval.report.seeds
    ));
    out.push_str(&render_table(&eval.report));
    out.push_str("\nFinal training losses (last epoch of last phase):\n");
    let mut regimes = cfg.regimes.clone();
    regimes.sort_by_key(|r| Regime::ALL.iter().position(|a| a == r));
    for r in regimes {
        for &seed in &cfg.seeds {
            let p = layout.train_report(r, seed);
            if !p.exists() {
                continue;
            }
            let run: TrainRunFile = read_json(&p)?;
            if let Some(e) = run.report.phases.last().and_then(|ph| ph.epochs.last()) {
                out.push_str(&format!(
                    "{:<8} seed {:<3} emb {:.6} rec {:.6} cls {:.6} feat {:.6} total {:.6}\n",
                    r.name(),
                    seed,
                    e.emb,
                    e.rec,
                    e.cls,
                    e.feat,
                    e.total
                ));
            }
        }
    }
    write_atomic(&layout.summary(), out.as_bytes())?;
    Ok(out)
}
