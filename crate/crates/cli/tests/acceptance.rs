//! End-to-end acceptance: one PASS/FAIL line per criterion on stderr.
//!
//! Includes the full desk-scale run with the default configuration
//! (five seeds, every regime), so this takes tens of minutes on one core.

use std::collections::BTreeMap;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::RngExt;
use rand_distr::{Distribution, Normal};
use vsense_cli::{cmd_evaluate, cmd_generate, cmd_train_all, Layout, RunConfig, TrainRunFile};
use vsense_core::datagen::{
    build_dataset, default_conditions, label_oracle, FlameFrame, GeneratorConfig, Label, PressureSeries, Split,
    CHANNELS, PRESSURE_RATE, SERIES_LEN,
};
use vsense_core::eval::{classification_metrics, ssim, ConfusionCounts, EvalReport, ModelSummary, TABLE_COLUMNS};
use vsense_core::models::{load_model, ImageDecoder, Network};
use vsense_core::numerics::{
    adam_step, bce_with_logits, check_module, finite_difference_check, mse_loss_grad, Activation, AdamConfig,
    AdamState, Conv2d, ConvTranspose2d, Dense, LastStep, Lstm, MaxPool2d, Module, Tensor,
};
use vsense_core::rng::{seeded, Prng};
use vsense_core::training::{train, Outcome, Pretrained, Regime, TrainConfig, TrainSet};

// Tolerances, pinned.
const GRAD_TOL: f64 = 1e-4;
const GRAD_EPS: f64 = 1e-5;
const GRAD_TRIALS: u64 = 20;
const GRAD_BUDGET_S: f64 = 120.0;
const ADAM_TOL: f64 = 1e-9;
const SSIM_IDENTITY_TOL: f64 = 1e-9;
const SSIM_SYMMETRY_TOL: f64 = 1e-12;
const IMG_CLS_MIN_ACC: f64 = 0.97;
const TS_CLS_MIN_ACC: f64 = 0.90;
const PIPELINE_MARGIN: f64 = 0.02;
const VS1_MIN_SSIM: f64 = 0.5;
const VS1_MAX_MSE: f64 = 0.02;
const STABLE_MAX_PIXEL_STD: f64 = 0.05;
const DESK_TARGET_S: f64 = 30.0 * 60.0;

type Verdict = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

/// Bypasses libtest's capture so the lines reach the terminal and any tee.
fn say(line: &str) {
    let mut e = std::io::stderr().lock();
    let _ = writeln!(e, "{line}");
    let _ = e.flush();
}

struct Sheet {
    failures: Vec<String>,
}

impl Sheet {
    fn check(&mut self, id: usize, name: &str, f: impl FnOnce() -> Verdict) {
        let t = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = t.elapsed().as_secs_f64();
        match v {
            Ok(d) => say(&format!("PASS [{id:>2}] {name}: {d} ({secs:.1} s)")),
            Err(d) => {
                say(&format!("FAIL [{id:>2}] {name}: {d} ({secs:.1} s)"));
                self.failures.push(format!("[{id}] {name}"));
            }
        }
    }
}

fn scratch(name: &str) -> PathBuf {
    let p = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    let _ = std::fs::remove_dir_all(&p);
    std::fs::create_dir_all(&p).unwrap();
    p
}

// ---------------------------------------------------------------- gradients

fn uniform(shape: &[usize], lo: f64, hi: f64, r: &mut Prng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| lo + (hi - lo) * r.random::<f64>())
}

fn gradient_fidelity() -> Verdict {
    let start = Instant::now();
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    let mut record = |name: &'static str, err: f64| {
        let w = worst.entry(name).or_insert(0.0);
        *w = w.max(err);
    };
    let module =
        |m: &mut dyn Module<f64>, x: &Tensor<f64>, t: u64| check_module(m, x, 7000 + t, GRAD_EPS).unwrap().max();
    for t in 0..GRAD_TRIALS {
        let mut r = seeded(90_000 + t);
        let (ci, co) = (r.random_range(1..4usize), r.random_range(1..4usize));
        let k = [1usize, 3][r.random_range(0..2usize)];
        let stride = r.random_range(1..3usize);
        let pad = r.random_range(0..=k / 2);
        let hw = (r.random_range(2..5usize) - 1) * stride + k - 2 * pad;
        let x = uniform(&[2, ci, hw, hw], -1.0, 1.0, &mut r);
        record("conv2d", module(&mut Conv2d::new(ci, co, k, stride, pad, &mut r), &x, t));

        let x = uniform(&[2, ci, 3, 3], -1.0, 1.0, &mut r);
        record("conv_transpose2d", module(&mut ConvTranspose2d::new(ci, co, k, stride, pad, &mut r), &x, t));

        // distinct values keep every pooling maximum unique
        let mut v: Vec<f64> = (0..2 * 2 * 4 * 4).map(|i| i as f64 * 0.01).collect();
        v.shuffle(&mut r);
        record("maxpool2d", module(&mut MaxPool2d::new(2), &Tensor::new(&[2, 2, 4, 4], v).unwrap(), t));

        let (ni, no) = (r.random_range(1..10usize), r.random_range(1..10usize));
        let x = uniform(&[3, ni], -1.0, 1.0, &mut r);
        record("dense", module(&mut Dense::new(ni, no, &mut r), &x, t));

        let (f, h, steps) = (r.random_range(1..5usize), r.random_range(1..6usize), r.random_range(1..7usize));
        let x = uniform(&[2, steps, f], -1.5, 1.5, &mut r);
        record("lstm", module(&mut Lstm::new(f, h, &mut r), &x, t));
        record("last_step", module(&mut LastStep::new(), &x, t));

        // kinks of relu kept outside the probe step
        let x = Tensor::from_fn(&[3, 5], |_| {
            let m = 0.2 + 3.8 * r.random::<f64>();
            if r.random::<bool>() {
                m
            } else {
                -m
            }
        });
        record("relu", module(&mut Activation::relu(), &x, t));
        record("sigmoid", module(&mut Activation::sigmoid(), &x, t));
        record("tanh", module(&mut Activation::tanh(), &x, t));

        let shape = [2, r.random_range(1..8usize)];
        let pred = uniform(&shape, -1.0, 1.0, &mut r);
        let target = uniform(&shape, -1.0, 1.0, &mut r);
        let (_, g) = mse_loss_grad(&pred, &target).unwrap();
        let f = |p: &[f64]| mse_loss_grad(&Tensor::new(&shape, p.to_vec()).unwrap(), &target).unwrap().0;
        record("mse", finite_difference_check(f, pred.data(), g.data(), GRAD_EPS));

        let n = r.random_range(1..10usize);
        let logits = uniform(&[n, 1], -6.0, 6.0, &mut r);
        let labels: Vec<u8> = (0..n).map(|_| r.random_range(0..2u8)).collect();
        let (_, g) = bce_with_logits(&logits, &labels).unwrap();
        let f = |z: &[f64]| bce_with_logits(&Tensor::new(&[n, 1], z.to_vec()).unwrap(), &labels).unwrap().0;
        record("bce", finite_difference_check(f, logits.data(), g.data(), GRAD_EPS));
    }
    let secs = start.elapsed().as_secs_f64();
    let (name, max) = worst.iter().fold(("", 0.0f64), |a, (&k, &v)| if v > a.1 { (k, v) } else { a });
    let detail = format!("{} checks x {GRAD_TRIALS} trials, max rel err {max:.2e} ({name}), {secs:.1} s", worst.len());
    ensure(max < GRAD_TOL, format!("{detail} exceeds {GRAD_TOL:e}"))?;
    ensure(secs < GRAD_BUDGET_S, format!("{detail} over the {GRAD_BUDGET_S} s budget"))?;
    Ok(detail)
}

// ---------------------------------------------------------------- optimizer

fn adam_oracle() -> Verdict {
    let cfg = AdamConfig { lr: 0.001, beta1: 0.9, beta2: 0.999, eps: 1e-8 };
    let mut state = AdamState::<f64>::new(cfg, &[1]).unwrap();
    let mut w = [1.0f64];
    let g = 2.0 * w[0];
    adam_step(&mut w, &[g], &mut state).unwrap();
    // m = 0.1 g, v = 0.001 g^2; bias correction restores g and g^2
    let m_hat = (0.1 * g) / (1.0 - 0.9);
    let v_hat = (0.001 * g * g) / (1.0 - 0.999);
    let expected = 1.0 - 0.001 * m_hat / (v_hat.sqrt() + 1e-8);
    let err = (w[0] - expected).abs();
    ensure(err <= ADAM_TOL, format!("w = {} expected {expected}, diff {err:e}", w[0]))?;
    Ok(format!("w = {:.12} (expected {expected:.12}, diff {err:.1e})", w[0]))
}

// ---------------------------------------------------------------- metrics

fn metric_oracles() -> Verdict {
    let mut r = seeded(4242);
    for trial in 0..1000 {
        let n = r.random_range(1..80usize);
        let p_pos = r.random::<f64>();
        let actual: Vec<bool> = (0..n).map(|_| r.random::<f64>() < p_pos).collect();
        let pred: Vec<bool> = (0..n).map(|_| r.random::<bool>()).collect();
        let m = classification_metrics(&ConfusionCounts::from_predictions(&pred, &actual).unwrap());
        let mut c = [[0.0f64; 2]; 2]; // [predicted][actual]
        for (&p, &a) in pred.iter().zip(&actual) {
            c[p as usize][a as usize] += 1.0;
        }
        let (tp, fp, tn, fne) = (c[1][1], c[1][0], c[0][0], c[0][1]);
        let acc = (tp + tn) / n as f64;
        let prec = (tp + fp > 0.0).then(|| tp / (tp + fp));
        let rec = (tp + fne > 0.0).then(|| tp / (tp + fne));
        let f1 = match (prec, rec) {
            (Some(p), Some(q)) if p + q > 0.0 => Some(2.0 * p * q / (p + q)),
            _ => None,
        };
        let fnr = (tp + fne > 0.0).then(|| fne / (tp + fne));
        ensure(
            m.accuracy == Some(acc) && m.f1 == f1 && m.fnr == fnr,
            format!("trial {trial}: {m:?} vs acc {acc} f1 {f1:?} fnr {fnr:?}"),
        )?;
    }
    let frame = |r: &mut Prng| FlameFrame { pixels: (0..64 * 64).map(|_| r.random::<f32>()).collect() };
    let (mut worst_id, mut worst_sym) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let (a, b) = (frame(&mut r), frame(&mut r));
        worst_id = worst_id.max((ssim(&a, &a).unwrap() - 1.0).abs());
        worst_sym = worst_sym.max((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs());
    }
    ensure(worst_id <= SSIM_IDENTITY_TOL, format!("SSIM(x,x) off by {worst_id:e}"))?;
    ensure(worst_sym <= SSIM_SYMMETRY_TOL, format!("SSIM asymmetry {worst_sym:e}"))?;
    Ok(format!("1000 vectors exact; SSIM identity err {worst_id:.1e}, symmetry err {worst_sym:.1e} over 100 pairs"))
}

// ---------------------------------------------------------------- labeling

fn labeling_oracle() -> Verdict {
    let t = |i: usize| i as f64 / PRESSURE_RATE as f64;
    for seed in 0..50u64 {
        let mut r = seeded(10_000 + seed);
        let amp = 800.0 * std::f64::consts::SQRT_2;
        let sine = PressureSeries {
            sample_rate: PRESSURE_RATE,
            channels: (0..CHANNELS)
                .map(|_| {
                    let phase = r.random::<f64>() * std::f64::consts::TAU;
                    (0..SERIES_LEN).map(|i| amp * (std::f64::consts::TAU * 140.0 * t(i) + phase).sin()).collect()
                })
                .collect(),
        };
        let got = label_oracle(&sine).map_err(|e| format!("seed {seed} sine: {e}"))?;
        ensure(got == Label::Unstable, format!("seed {seed}: 140 Hz sine labeled {got:?}"))?;

        let normal = Normal::new(0.0, 1.0).unwrap();
        let noise = PressureSeries {
            sample_rate: PRESSURE_RATE,
            channels: (0..CHANNELS)
                .map(|_| {
                    let x: Vec<f64> = (0..SERIES_LEN).map(|_| normal.sample(&mut r)).collect();
                    let mean = x.iter().sum::<f64>() / x.len() as f64;
                    let rms = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len() as f64).sqrt();
                    x.iter().map(|v| (v - mean) * 50.0 / rms).collect()
                })
                .collect(),
        };
        let got = label_oracle(&noise).map_err(|e| format!("seed {seed} noise: {e}"))?;
        ensure(got == Label::Stable, format!("seed {seed}: 50 Pa broadband labeled {got:?}"))?;
    }
    Ok("50/50 sines unstable, 50/50 broadband stable".into())
}

// ---------------------------------------------------------------- desk run

struct Desk {
    layout: Layout,
    cfg: RunConfig,
    report: EvalReport,
    secs: f64,
    train_samples: usize,
    test_samples: usize,
}

impl Desk {
    fn model(&self, r: Regime) -> Result<&ModelSummary, String> {
        self.report.models.iter().find(|m| m.regime == r).ok_or_else(|| format!("no {r} row"))
    }
}

fn desk_run() -> Result<Desk, String> {
    let dir = scratch("desk");
    let cfg = RunConfig { out_dir: dir.clone(), ..RunConfig::default() };
    let layout = Layout::new(&dir);
    let start = Instant::now();
    let manifest = cmd_generate(&cfg, &layout).map_err(|e| e.to_string())?;
    say(&format!("       desk dataset generated: {} train / {} test", manifest.train_samples, manifest.test_samples));
    let timings = cmd_train_all(&cfg, &layout).map_err(|e| e.to_string())?;
    let mut per_regime: BTreeMap<String, f64> = BTreeMap::new();
    for t in &timings {
        *per_regime.entry(t.regime.name().to_string()).or_default() += t.wall_seconds;
    }
    let parts: Vec<String> = per_regime.iter().map(|(k, v)| format!("{k} {v:.0}s")).collect();
    say(&format!("       desk training times: {}", parts.join(", ")));
    let (report, _) = cmd_evaluate(&cfg, &layout).map_err(|e| e.to_string())?;
    Ok(Desk {
        layout,
        cfg,
        report,
        secs: start.elapsed().as_secs_f64(),
        train_samples: manifest.train_samples,
        test_samples: manifest.test_samples,
    })
}

fn acc(m: &ModelSummary) -> Result<f64, String> {
    m.accuracy.as_ref().map(|s| s.mean).ok_or_else(|| format!("{} accuracy undefined", m.model))
}

fn desk_accuracy(d: &Desk) -> Verdict {
    let img = acc(d.model(Regime::ImgCls)?)?;
    let ts = acc(d.model(Regime::TsCls)?)?;
    let vs1 = acc(d.model(Regime::VS1)?)?;
    let vs2 = acc(d.model(Regime::VS2)?)?;
    let floor = ts - PIPELINE_MARGIN;
    let mins = d.secs / 60.0;
    let timing = if d.secs < DESK_TARGET_S { "within" } else { "OVER" };
    let detail = format!(
        "{} train / {} test, {} seeds; IMG {img:.4}, TS {ts:.4}, VS1 {vs1:.4}, VS2 {vs2:.4} (floor {floor:.4}); \
         wall {mins:.1} min, {timing} the 30 min target",
        d.train_samples,
        d.test_samples,
        d.cfg.seeds.len()
    );
    ensure(img >= IMG_CLS_MIN_ACC, format!("image classifier below {IMG_CLS_MIN_ACC}: {detail}"))?;
    ensure(ts >= TS_CLS_MIN_ACC, format!("time series classifier below {TS_CLS_MIN_ACC}: {detail}"))?;
    ensure(vs1 >= floor && vs2 >= floor, format!("pipeline below TS mean - {PIPELINE_MARGIN}: {detail}"))?;
    Ok(detail)
}

fn reconstruction_quality(d: &Desk) -> Verdict {
    let m = d.model(Regime::VS1)?;
    let s = m.ssim.as_ref().ok_or("VS1 SSIM missing")?.mean;
    let e = m.mse.as_ref().ok_or("VS1 MSE missing")?.mean;
    let std = m.stable_recon_max_std.ok_or("no stable test condition")?;
    let detail = format!("VS1 SSIM {s:.4}, MSE {e:.5}, stable max per-pixel std {std:.4} (worst seed)");
    ensure(s >= VS1_MIN_SSIM && e <= VS1_MAX_MSE && std < STABLE_MAX_PIXEL_STD, detail.clone())?;
    Ok(detail)
}

// ---------------------------------------------------------------- identities

fn regime_identities() -> Verdict {
    let ds = build_dataset(&default_conditions(11), 24, 300, &GeneratorConfig::default(), 11).unwrap();
    let data = TrainSet::new(&ds, Split::Train).unwrap();
    let ae = train::<f32>(&TrainConfig::new(Regime::AE, 3).with_epochs(1), &data, Pretrained::none()).unwrap();
    let (enc, dec) = (ae.models.image_encoder.as_ref().unwrap(), ae.models.image_decoder.as_ref().unwrap());
    let pre = Pretrained { encoder: Some(enc), decoder: Some(dec) };
    let run = |c: TrainConfig| train::<f32>(&c, &data, pre).unwrap();
    let digests = |o: &Outcome<f32>| -> Vec<(String, String)> {
        o.models.networks().iter().map(|n| (n.role().name().to_string(), n.param_digest())).collect()
    };
    for seed in [1u64, 2] {
        let mut c = TrainConfig::new(Regime::VS1, seed).with_epochs(2);
        c.loss_weights.emb = 0.0;
        let a = digests(&run(c));
        let b = digests(&run(TrainConfig::new(Regime::VS1A, seed).with_epochs(2)));
        ensure(a == b, format!("seed {seed}: VS1(emb=0) {a:?} != VS1A {b:?}"))?;

        let mut c = TrainConfig::new(Regime::VS1B, seed).with_epochs(2);
        c.loss_weights.feat = 0.0;
        let a = digests(&run(c));
        let b = digests(&run(TrainConfig::new(Regime::VS1, seed).with_epochs(2)));
        ensure(a == b, format!("seed {seed}: VS1B(feat=0) {a:?} != VS1 {b:?}"))?;
    }
    Ok("parameter digests equal for seeds 1 and 2".into())
}

// ---------------------------------------------------------------- frozen

fn read_run(layout: &Layout, r: Regime, seed: u64) -> Result<TrainRunFile, String> {
    let p = layout.train_report(r, seed);
    let bytes = std::fs::read(&p).map_err(|e| format!("{}: {e}", p.display()))?;
    serde_json::from_slice(&bytes).map_err(|e| format!("{}: {e}", p.display()))
}

fn digest_of(run: &TrainRunFile, role: &str) -> Result<String, String> {
    run.report
        .models
        .iter()
        .find(|m| m.role == role)
        .map(|m| m.param_digest.clone())
        .ok_or_else(|| format!("{} seed {} has no {role}", run.report.regime, run.report.seed))
}

fn frozen_hashes(d: &Desk) -> Verdict {
    let mut checked = 0;
    for &seed in &d.cfg.seeds {
        let ae = read_run(&d.layout, Regime::AE, seed)?;
        let enc = digest_of(&ae, "image_encoder")?;
        let dec = digest_of(&ae, "image_decoder")?;
        for r in [Regime::VS1, Regime::VS1B, Regime::XMODAL, Regime::VS2] {
            let run = read_run(&d.layout, r, seed)?;
            let epochs = run.report.config.epochs;
            let expected: Vec<(&str, String)> = match r {
                Regime::VS1 => vec![("image_encoder", enc.clone())],
                Regime::VS1B | Regime::XMODAL => vec![("image_encoder", enc.clone()), ("image_decoder", dec.clone())],
                _ => vec![
                    ("image_encoder", enc.clone()),
                    ("image_encoder", enc.clone()),
                    ("ts_encoder", digest_of(&run, "ts_encoder")?),
                ],
            };
            let got: Vec<(&str, String)> =
                run.report.frozen.iter().map(|f| (f.role.as_str(), f.digest.clone())).collect();
            ensure(got == expected, format!("{r} seed {seed}: frozen {got:?}, expected {expected:?}"))?;
            for f in &run.report.frozen {
                ensure(f.checks == epochs + 1, format!("{r} seed {seed}: {} checked {} times", f.role, f.checks))?;
                checked += 1;
            }
        }
        // the decoder shipped with the cross-modal run is the pretrained one, bit for bit
        let mut a = ImageDecoder::<f32>::new(&mut seeded(0));
        let mut b = ImageDecoder::<f32>::new(&mut seeded(1));
        load_model(&d.layout.model(Regime::AE, seed, vsense_core::models::Role::ImageDecoder), &mut a)
            .map_err(|e| e.to_string())?;
        load_model(&d.layout.model(Regime::XMODAL, seed, vsense_core::models::Role::ImageDecoder), &mut b)
            .map_err(|e| e.to_string())?;
        ensure(a.param_digest() == b.param_digest(), format!("seed {seed}: XMODAL decoder file differs from AE"))?;
    }
    Ok(format!("{checked} frozen records across {} seeds, each constant at every epoch boundary", d.cfg.seeds.len()))
}

// ---------------------------------------------------------------- reproducibility

const REDUCED: &str = r#"{
  "dataset": { "stride": 300 },
  "training": { "epochs": 1 },
  "seeds": [1, 2]
}"#;

fn vsense(args: &[&str]) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_vsense"))
        .args(args)
        .env_remove("VSENSE_OUT")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(o.status.success(), format!("vsense {args:?}: {}", String::from_utf8_lossy(&o.stderr)))
}

fn files_under(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn reproducibility(desk: Option<&Desk>) -> Verdict {
    let dir = scratch("repro");
    let config = dir.join("config.json");
    std::fs::write(&config, REDUCED).unwrap();
    let mut trees = Vec::new();
    for name in ["a", "b"] {
        let out = dir.join(name);
        let (c, o) = (config.to_str().unwrap(), out.to_str().unwrap());
        for cmd in [&["generate"][..], &["train", "all"], &["evaluate"], &["report"]] {
            let mut args = vec!["--config", c, "--out", o];
            args.extend_from_slice(cmd);
            vsense(&args)?;
        }
        trees.push(files_under(&out));
    }
    let (a, b) = (&trees[0], &trees[1]);
    ensure(a.keys().eq(b.keys()), "the two executions wrote different file sets")?;
    let mut compared = 0;
    for (path, bytes) in a {
        if path.file_name().is_some_and(|n| n == "timing.json") {
            continue;
        }
        ensure(bytes == &b[path], format!("{} differs", path.display()))?;
        compared += 1;
    }
    let models = a.keys().filter(|p| p.extension().is_some_and(|e| e == "vsnm")).count();
    let mut detail =
        format!("reduced config twice: {compared} files identical ({models} models), timing sidecars excluded");

    if let Some(d) = desk {
        let regen = scratch("regen");
        let cfg = RunConfig { out_dir: regen.clone(), ..d.cfg.clone() };
        cmd_generate(&cfg, &Layout::new(&regen)).map_err(|e| e.to_string())?;
        for f in ["dataset.vsns", "manifest.json"] {
            let same = std::fs::read(regen.join(f)).unwrap() == std::fs::read(d.layout.root().join(f)).unwrap();
            ensure(same, format!("regenerated default {f} differs from the desk run"))?;
        }
        detail.push_str("; default dataset regenerated byte-identically");
    } else {
        return Err(format!("{detail}; desk run unavailable for the default dataset comparison"));
    }
    Ok(detail)
}

// ---------------------------------------------------------------- report shape

fn report_shape(d: &Desk) -> Verdict {
    let table = std::fs::read_to_string(d.layout.table()).map_err(|e| e.to_string())?;
    let rows: Vec<Vec<String>> = table
        .lines()
        .filter(|l| !l.starts_with("|-"))
        .map(|l| l.trim().trim_matches('|').split('|').map(|c| c.trim().to_string()).collect())
        .collect();
    ensure(rows.first().is_some_and(|h| *h == TABLE_COLUMNS), format!("header {:?}", rows.first()))?;
    let body = &rows[1..];
    ensure(body.len() == 8, format!("{} model rows", body.len()))?;
    let is_pm = |c: &str| {
        let parts: Vec<&str> = c.split(" ± ").collect();
        parts.len() == 2 && parts.iter().all(|p| p.parse::<f64>().is_ok())
    };
    for (row, r) in body.iter().zip(Regime::EVALUATED) {
        ensure(row[0] == r.display_name(), format!("row {:?} where {} expected", row[0], r.display_name()))?;
        if r.reconstructs() {
            ensure(row[1].parse::<f64>().is_ok() && row[2].parse::<f64>().is_ok(), format!("{row:?}"))?;
        } else {
            ensure(row[1] == "NA" && row[2] == "NA", format!("{row:?} should have NA reconstruction cells"))?;
        }
        ensure(row[3..].iter().all(|c| is_pm(c)), format!("{row:?} not in mean ± std form"))?;
    }
    vsense(&["--out", d.layout.root().to_str().unwrap(), "report"])?;
    let summary = std::fs::read_to_string(d.layout.summary()).map_err(|e| e.to_string())?;
    ensure(summary.contains(&table), "report.txt does not carry the table")?;
    say(&table);
    Ok("8 rows x {SSIM, MSE, Accuracy, F1 Score, FNR}, NA for both classifiers, mean ± std cells; report.txt written"
        .into())
}

fn with_desk(desk: &Result<Desk, String>, f: fn(&Desk) -> Verdict) -> impl FnOnce() -> Verdict + '_ {
    move || match desk {
        Ok(d) => f(d),
        Err(e) => Err(format!("desk run failed: {e}")),
    }
}

#[test]
fn acceptance() {
    let mut sheet = Sheet { failures: Vec::new() };
    sheet.check(1, "gradient fidelity", gradient_fidelity);
    sheet.check(2, "optimizer oracle", adam_oracle);
    sheet.check(3, "metric oracles", metric_oracles);
    sheet.check(4, "labeling oracle", labeling_oracle);

    let desk = catch_unwind(desk_run).unwrap_or_else(|_| Err("desk run panicked".into()));
    sheet.check(5, "desk-scale accuracy", with_desk(&desk, desk_accuracy));
    sheet.check(6, "reconstruction quality", with_desk(&desk, reconstruction_quality));
    sheet.check(7, "regime identities", regime_identities);
    sheet.check(8, "frozen-component hashes", with_desk(&desk, frozen_hashes));
    sheet.check(9, "full reproducibility", || reproducibility(desk.as_ref().ok()));
    sheet.check(10, "report shape", with_desk(&desk, report_shape));

    say(&format!("acceptance: {}/10 criteria passed", 10 - sheet.failures.len()));
    assert!(sheet.failures.is_empty(), "failed: {}", sheet.failures.join(", "));
}
