use super::config::{LossWeights, Regime, TrainConfig};
use super::data::TrainSet;
use super::report::{Components, EpochLosses, FrozenRecord, Instrumentation, ModelRecord, PhaseReport, TrainReport};
use crate::error::{Error, Result};
use crate::models::{ImageClassifier, ImageDecoder, ImageEncoder, Network, TsClassifier, TsEncoder, EMBEDDING_DIM};
use crate::numerics::{bce_with_logits, mse_loss_grad, AdamState, FlushToZero, Tensor};
use crate::rng::{stream, Prng};
use crate::scalar::Scalar;

// Stream tags under the run seed. Each model draws its initial weights from
// its own stream so that regimes sharing a model start identically.
const SHUFFLE: u64 = 1;
const DROPOUT: u64 = 2;
const SHUFFLE_STEP2: u64 = 3;
const INIT_IMAGE_ENCODER: u64 = 10;
const INIT_IMAGE_DECODER: u64 = 11;
const INIT_TS_ENCODER: u64 = 12;
const INIT_IMAGE_CLASSIFIER: u64 = 13;
const INIT_TS_CLASSIFIER: u64 = 14;
const EVAL_CHUNK: usize = 64;

/// Pretrained autoencoder halves consumed by the cross-modal regimes.
#[derive(Clone, Copy)]
pub struct Pretrained<'a, S> {
    pub encoder: Option<&'a ImageEncoder<S>>,
    pub decoder: Option<&'a ImageDecoder<S>>,
}

impl<'a, S> Pretrained<'a, S> {
    pub fn none() -> Self {
        Pretrained { encoder: None, decoder: None }
    }

    fn encoder(&self, regime: Regime) -> Result<&'a ImageEncoder<S>> {
        self.encoder.ok_or_else(|| Error::Sequencing(format!("{regime} needs the pretrained image encoder from AE")))
    }

    fn decoder(&self, regime: Regime) -> Result<&'a ImageDecoder<S>> {
        self.decoder.ok_or_else(|| Error::Sequencing(format!("{regime} needs the pretrained image decoder from AE")))
    }
}

/// Models produced by a regime; fields not trained by it are `None`.
pub struct Trained<S> {
    pub image_encoder: Option<ImageEncoder<S>>,
    pub image_decoder: Option<ImageDecoder<S>>,
    pub ts_encoder: Option<TsEncoder<S>>,
    pub image_classifier: Option<ImageClassifier<S>>,
    pub ts_classifier: Option<TsClassifier<S>>,
}

impl<S: Scalar> Trained<S> {
    fn empty() -> Self {
        Trained {
            image_encoder: None,
            image_decoder: None,
            ts_encoder: None,
            image_classifier: None,
            ts_classifier: None,
        }
    }

    pub fn networks(&self) -> Vec<&dyn Network<S>> {
        let mut v: Vec<&dyn Network<S>> = Vec::new();
        if let Some(m) = &self.image_encoder {
            v.push(m);
        }
        if let Some(m) = &self.image_decoder {
            v.push(m);
        }
        if let Some(m) = &self.ts_encoder {
            v.push(m);
        }
        if let Some(m) = &self.image_classifier {
            v.push(m);
        }
        if let Some(m) = &self.ts_classifier {
            v.push(m);
        }
        v
    }

    fn records(&self) -> Vec<ModelRecord> {
        self.networks()
            .iter()
            .map(|n| ModelRecord {
                role: n.role().name().to_string(),
                fingerprint: n.spec().fingerprint,
                param_digest: n.param_digest(),
                path: None,
            })
            .collect()
    }
}

pub struct Outcome<S> {
    pub models: Trained<S>,
    pub report: TrainReport,
}

/// Frozen components and their digests, re-checked after every epoch.
struct Guard<'a, S> {
    items: Vec<(&'a dyn Network<S>, String)>,
    checks: usize,
}

impl<'a, S: Scalar> Guard<'a, S> {
    fn new(nets: Vec<&'a dyn Network<S>>) -> Self {
        Guard { items: nets.into_iter().map(|n| (n, n.param_digest())).collect(), checks: 0 }
    }

    fn check(&mut self) -> Result<()> {
        for (n, digest) in &self.items {
            if n.param_digest() != *digest {
                return Err(Error::Invariant(format!("frozen {} parameters changed", n.role().name())));
            }
        }
        self.checks += 1;
        Ok(())
    }

    fn names(&self) -> Vec<String> {
        self.items.iter().map(|(n, _)| n.role().name().to_string()).collect()
    }

    fn records(&self) -> Vec<FrozenRecord> {
        self.items
            .iter()
            .map(|(n, d)| FrozenRecord { role: n.role().name().to_string(), digest: d.clone(), checks: self.checks })
            .collect()
    }
}

fn optimizer<S: Scalar>(cfg: &TrainConfig, net: &mut dyn Network<S>) -> Result<AdamState<S>> {
    AdamState::for_params(cfg.adam(), &net.params_mut())
}

fn update<S: Scalar>(opt: &mut AdamState<S>, net: &mut dyn Network<S>) -> Result<()> {
    opt.step(&mut net.params_mut())
}

fn scaled<S: Scalar>(mut t: Tensor<S>, k: f64) -> Tensor<S> {
    if k != 1.0 {
        let k = S::lit(k);
        t.data_mut().iter_mut().for_each(|v| *v *= k);
    }
    t
}

fn axpy<S: Scalar>(y: &mut Tensor<S>, x: &Tensor<S>, k: f64) {
    let k = S::lit(k);
    for (a, &b) in y.data_mut().iter_mut().zip(x.data()) {
        *a += k * b;
    }
}

#[allow(clippy::too_many_arguments)]
fn run_phase<S: Scalar>(
    name: &str,
    cfg: &TrainConfig,
    weights: LossWeights,
    data: &TrainSet,
    shuffle_tag: u64,
    guard: &mut Guard<S>,
    trainable: &[&str],
    mut step: impl FnMut(&[usize]) -> Result<Components>,
) -> Result<PhaseReport> {
    let _ftz = FlushToZero::enable();
    let mut rng = stream(cfg.seed, shuffle_tag);
    guard.check()?;
    let mut epochs = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let mut sum = Components::default();
        for batch in data.epoch_batches(cfg.batch_size, &mut rng) {
            let c = step(&batch)?;
            if !c.is_finite() {
                return Err(Error::NonFinite { op: "training_loss", index: epoch });
            }
            sum.add_scaled(&c, batch.len() as f64);
        }
        let mut mean = Components::default();
        mean.add_scaled(&sum, 1.0 / data.len() as f64);
        epochs.push(EpochLosses {
            epoch,
            emb: mean.emb,
            rec: mean.rec,
            cls: mean.cls,
            feat: mean.feat,
            total: mean.total(&weights),
        });
        guard.check()?;
    }
    Ok(PhaseReport {
        name: name.to_string(),
        weights,
        trainable: trainable.iter().map(|s| s.to_string()).collect(),
        frozen: guard.names(),
        epochs,
    })
}

fn finish<S: Scalar>(
    cfg: &TrainConfig,
    data: &TrainSet,
    models: Trained<S>,
    phases: Vec<PhaseReport>,
    frozen: Vec<FrozenRecord>,
    mut instrumentation: Instrumentation,
) -> Outcome<S> {
    instrumentation.frame_batches = data.frame_batches();
    instrumentation.window_batches = data.window_batches();
    let report = TrainReport {
        regime: cfg.regime.name().to_string(),
        seed: cfg.seed,
        config: cfg.clone(),
        train_samples: data.len(),
        phases,
        frozen,
        instrumentation,
        models: models.records(),
    };
    Outcome { models, report }
}

/// Mean image embedding of the training frames under the frozen encoder.
fn mean_embedding<S: Scalar>(enc: &ImageEncoder<S>, data: &TrainSet) -> Result<Vec<S>> {
    let _ftz = FlushToZero::enable();
    let mut sum = vec![0.0f64; EMBEDDING_DIM];
    for chunk in data.indices().chunks(EVAL_CHUNK) {
        let e = enc.infer(&data.frames::<S>(chunk))?;
        for row in e.data().chunks(EMBEDDING_DIM) {
            for (s, v) in sum.iter_mut().zip(row) {
                *s += v.as_f64();
            }
        }
    }
    Ok(sum.iter().map(|s| S::lit(s / data.len() as f64)).collect())
}

fn calls<S: Scalar>(enc: Option<&ImageEncoder<S>>) -> u64 {
    enc.map_or(0, |e| e.forward_calls())
}

/// Trains any regime except VS2's two steps, which go through [`Vs2Session`]
/// (also reachable here).
pub fn train<S: Scalar>(cfg: &TrainConfig, data: &TrainSet, pre: Pretrained<S>) -> Result<Outcome<S>> {
    cfg.validate()?;
    match cfg.regime {
        Regime::AE => pretrain_autoencoder(cfg, data),
        Regime::VS1 | Regime::VS1A | Regime::VS1B => train_vsensenet1(cfg, data, pre),
        Regime::VS2 => train_vsensenet2(cfg, data, pre),
        Regime::VS2A => train_vsensenet2a(cfg, data, pre),
        Regime::XMODAL => train_crossmodal(cfg, data, pre),
        Regime::ImgCls => train_image_classifier(cfg, data),
        Regime::TsCls => train_ts_classifier(cfg, data),
    }
}

fn expect_regime(cfg: &TrainConfig, allowed: &[Regime]) -> Result<()> {
    if !allowed.contains(&cfg.regime) {
        return Err(Error::param("training", format!("config regime {} does not match trainer", cfg.regime)));
    }
    cfg.validate()
}

pub fn pretrain_autoencoder<S: Scalar>(cfg: &TrainConfig, data: &TrainSet) -> Result<Outcome<S>> {
    expect_regime(cfg, &[Regime::AE])?;
    let w = cfg.weights();
    let mut enc = ImageEncoder::<S>::new(&mut stream(cfg.seed, INIT_IMAGE_ENCODER));
    let mut dec = ImageDecoder::<S>::new(&mut stream(cfg.seed, INIT_IMAGE_DECODER));
    let mut opt_e = optimizer(cfg, &mut enc)?;
    let mut opt_d = optimizer(cfg, &mut dec)?;
    let mut drop: Prng = stream(cfg.seed, DROPOUT);
    let mut guard = Guard::<S>::new(vec![]);
    let phase =
        run_phase("autoencoder", cfg, w, data, SHUFFLE, &mut guard, &["image_encoder", "image_decoder"], |b| {
            let x = data.frames::<S>(b);
            enc.zero_grad();
            dec.zero_grad();
            let emb = enc.forward(&x, &mut drop)?;
            let out = dec.forward(&emb, &mut drop)?;
            let (rec, g) = mse_loss_grad(&out.image, &x)?;
            let d_emb = dec.backward(&scaled(g, w.rec), None)?;
            enc.backward(&d_emb)?;
            update(&mut opt_e, &mut enc)?;
            update(&mut opt_d, &mut dec)?;
            Ok(Components { rec: rec.as_f64(), ..Default::default() })
        })?;
    let image_encoder_calls = enc.forward_calls();
    let models = Trained { image_encoder: Some(enc), image_decoder: Some(dec), ..Trained::empty() };
    let instr = Instrumentation { image_encoder_calls, ..Default::default() };
    Ok(finish(cfg, data, models, vec![phase], vec![], instr))
}

/// VS1 and its ablations: I(A) drops the embedding loss and never touches
/// the image encoder; I(B) adds feature matching at the decoder tap against
/// the frozen pretrained decoder.
pub fn train_vsensenet1<S: Scalar>(cfg: &TrainConfig, data: &TrainSet, pre: Pretrained<S>) -> Result<Outcome<S>> {
    expect_regime(cfg, &[Regime::VS1, Regime::VS1A, Regime::VS1B])?;
    let w = cfg.weights();
    let enc = match cfg.regime {
        Regime::VS1A => None,
        r => Some(pre.encoder(r)?),
    };
    let pdec = match cfg.regime {
        Regime::VS1B => Some(pre.decoder(Regime::VS1B)?),
        _ => None,
    };
    let mut frozen: Vec<&dyn Network<S>> = Vec::new();
    if let Some(e) = enc {
        frozen.push(e);
    }
    if let Some(d) = pdec {
        frozen.push(d);
    }
    let calls0 = calls(enc);
    let mut guard = Guard::new(frozen);
    let mut ts = TsEncoder::<S>::new(data.window_len(), cfg.dropout_rate, &mut stream(cfg.seed, INIT_TS_ENCODER))?;
    if w.emb > 0.0 {
        ts.set_output_bias(&mean_embedding(enc.expect("encoder present when its losses are active"), data)?)?;
    }
    let mut dec = ImageDecoder::<S>::new(&mut stream(cfg.seed, INIT_IMAGE_DECODER));
    let mut opt_t = optimizer(cfg, &mut ts)?;
    let mut opt_d = optimizer(cfg, &mut dec)?;
    let mut drop = stream(cfg.seed, DROPOUT);
    let phase =
        run_phase(cfg.regime.name(), cfg, w, data, SHUFFLE, &mut guard, &["ts_encoder", "image_decoder"], |b| {
            let x = data.windows::<S>(b)?;
            let y = data.frames::<S>(b);
            ts.zero_grad();
            dec.zero_grad();
            let emb = ts.forward(&x, &mut drop)?;
            let img_emb = if w.emb > 0.0 || w.feat > 0.0 {
                Some(enc.expect("encoder present when its losses are active").infer(&y)?)
            } else {
                None
            };
            let out = dec.forward(&emb, &mut drop)?;
            let (rec, g_rec) = mse_loss_grad(&out.image, &y)?;
            let mut c = Components { rec: rec.as_f64(), ..Default::default() };
            let d_tap = match (w.feat > 0.0, pdec, &img_emb) {
                (true, Some(p), Some(ie)) => {
                    let target = p.infer_tap(ie)?;
                    if target.shape() != out.tap.shape() {
                        return Err(Error::dim(
                            "feature_loss",
                            format!("tap {:?} vs {:?}", out.tap.shape(), target.shape()),
                        ));
                    }
                    let (feat, g) = mse_loss_grad(&out.tap, &target)?;
                    c.feat = feat.as_f64();
                    Some(scaled(g, w.feat))
                }
                _ => None,
            };
            let mut d_emb = dec.backward(&scaled(g_rec, w.rec), d_tap.as_ref())?;
            if w.emb > 0.0 {
                let (emb_loss, g) = mse_loss_grad(&emb, img_emb.as_ref().expect("computed above"))?;
                c.emb = emb_loss.as_f64();
                axpy(&mut d_emb, &g, w.emb);
            }
            ts.backward(&d_emb)?;
            update(&mut opt_t, &mut ts)?;
            update(&mut opt_d, &mut dec)?;
            Ok(c)
        })?;
    let instr = Instrumentation { image_encoder_calls: calls(enc) - calls0, ..Default::default() };
    let frozen = guard.records();
    let models = Trained { ts_encoder: Some(ts), image_decoder: Some(dec), ..Trained::empty() };
    Ok(finish(cfg, data, models, vec![phase], frozen, instr))
}

/// Embedding regression of a fresh time-series encoder onto the frozen
/// image encoder. Shared by the cross-modal baseline and VS2 step 1.
fn regress_embeddings<S: Scalar>(
    name: &str,
    cfg: &TrainConfig,
    data: &TrainSet,
    enc: &ImageEncoder<S>,
    guard: &mut Guard<S>,
) -> Result<(TsEncoder<S>, PhaseReport)> {
    let w = LossWeights { emb: cfg.loss_weights.emb, rec: 0.0, cls: 0.0, feat: 0.0 };
    let mut ts = TsEncoder::<S>::new(data.window_len(), cfg.dropout_rate, &mut stream(cfg.seed, INIT_TS_ENCODER))?;
    ts.set_output_bias(&mean_embedding(enc, data)?)?;
    let mut opt = optimizer(cfg, &mut ts)?;
    let mut drop = stream(cfg.seed, DROPOUT);
    let phase = run_phase(name, cfg, w, data, SHUFFLE, guard, &["ts_encoder"], |b| {
        let x = data.windows::<S>(b)?;
        let y = data.frames::<S>(b);
        ts.zero_grad();
        let emb = ts.forward(&x, &mut drop)?;
        let target = enc.infer(&y)?;
        let (l, g) = mse_loss_grad(&emb, &target)?;
        ts.backward(&scaled(g, w.emb))?;
        update(&mut opt, &mut ts)?;
        Ok(Components { emb: l.as_f64(), ..Default::default() })
    })?;
    Ok((ts, phase))
}

/// Cross-modal baseline: only the time-series encoder learns; the frozen
/// pretrained decoder renders its embeddings at test time.
pub fn train_crossmodal<S: Scalar>(cfg: &TrainConfig, data: &TrainSet, pre: Pretrained<S>) -> Result<Outcome<S>> {
    expect_regime(cfg, &[Regime::XMODAL])?;
    let enc = pre.encoder(Regime::XMODAL)?;
    let pdec = pre.decoder(Regime::XMODAL)?;
    let calls0 = enc.forward_calls();
    let mut guard = Guard::new(vec![enc as &dyn Network<S>, pdec]);
    let (ts, phase) = regress_embeddings("XMODAL", cfg, data, enc, &mut guard)?;
    let instr = Instrumentation { image_encoder_calls: enc.forward_calls() - calls0, ..Default::default() };
    let models = Trained { ts_encoder: Some(ts), ..Trained::empty() };
    Ok(finish(cfg, data, models, vec![phase], guard.records(), instr))
}

/// VS2 as an explicit two-step session: step 2 refuses to run before step 1
/// has completed.
pub struct Vs2Session<'a, 'd, S> {
    cfg: TrainConfig,
    data: &'a TrainSet<'d>,
    encoder: &'a ImageEncoder<S>,
    calls0: u64,
    step1: Option<(TsEncoder<S>, PhaseReport, Vec<FrozenRecord>)>,
}

impl<'a, 'd, S: Scalar> Vs2Session<'a, 'd, S> {
    pub fn new(cfg: &TrainConfig, data: &'a TrainSet<'d>, pre: Pretrained<'a, S>) -> Result<Self> {
        expect_regime(cfg, &[Regime::VS2])?;
        if cfg.weights().cls > 0.0 {
            data.require_both_classes()?;
        }
        let encoder = pre.encoder(Regime::VS2)?;
        Ok(Vs2Session { cfg: cfg.clone(), data, encoder, calls0: encoder.forward_calls(), step1: None })
    }

    /// Regress the time-series encoder onto the image embedding.
    pub fn step1(&mut self) -> Result<&PhaseReport> {
        let mut guard = Guard::new(vec![self.encoder as &dyn Network<S>]);
        let (ts, phase) = regress_embeddings("step1", &self.cfg, self.data, self.encoder, &mut guard)?;
        self.step1 = Some((ts, phase, guard.records()));
        Ok(&self.step1.as_ref().expect("just set").1)
    }

    /// Train decoder and classifier on embeddings from the frozen encoder.
    pub fn step2(self) -> Result<Outcome<S>> {
        let Vs2Session { cfg, data, encoder, calls0, step1 } = self;
        let (ts, phase1, frozen1) =
            step1.ok_or_else(|| Error::Sequencing("VS2 step 2 requires a completed step 1".into()))?;
        let w = LossWeights { emb: 0.0, ..cfg.weights() };
        let mut dec = ImageDecoder::<S>::new(&mut stream(cfg.seed, INIT_IMAGE_DECODER));
        let mut cls = ImageClassifier::<S>::new(&mut stream(cfg.seed, INIT_IMAGE_CLASSIFIER));
        let mut opt_d = optimizer(&cfg, &mut dec)?;
        let mut opt_c = optimizer(&cfg, &mut cls)?;
        let mut drop = stream(cfg.seed, DROPOUT);
        let mut recon_batches = 0u64;
        let mut guard = Guard::new(vec![encoder as &dyn Network<S>, &ts]);
        let phase2 = run_phase(
            "step2",
            &cfg,
            w,
            data,
            SHUFFLE_STEP2,
            &mut guard,
            &["image_decoder", "image_classifier"],
            |b| {
                let x = data.windows::<S>(b)?;
                let y = data.frames::<S>(b);
                dec.zero_grad();
                cls.zero_grad();
                let emb = ts.infer(&x)?;
                let out = dec.forward(&emb, &mut drop)?;
                let (rec, g_rec) = mse_loss_grad(&out.image, &y)?;
                let mut c = Components { rec: rec.as_f64(), ..Default::default() };
                let mut d_img = scaled(g_rec, w.rec);
                if w.cls > 0.0 {
                    recon_batches += 1;
                    let logits = cls.forward(&out.image, &mut drop)?;
                    let (l, g) = bce_with_logits(&logits, &data.labels(b))?;
                    c.cls = l.as_f64();
                    let d = cls.backward(&scaled(g, w.cls))?;
                    axpy(&mut d_img, &d, 1.0);
                }
                dec.backward(&d_img, None)?;
                update(&mut opt_d, &mut dec)?;
                update(&mut opt_c, &mut cls)?;
                Ok(c)
            },
        )?;
        let mut frozen = frozen1;
        frozen.extend(guard.records());
        let instr = Instrumentation {
            image_encoder_calls: encoder.forward_calls() - calls0,
            classifier_reconstruction_batches: recon_batches,
            ..Default::default()
        };
        let models =
            Trained { ts_encoder: Some(ts), image_decoder: Some(dec), image_classifier: Some(cls), ..Trained::empty() };
        Ok(finish(&cfg, data, models, vec![phase1, phase2], frozen, instr))
    }
}

pub fn train_vsensenet2<S: Scalar>(cfg: &TrainConfig, data: &TrainSet, pre: Pretrained<S>) -> Result<Outcome<S>> {
    let mut session = Vs2Session::new(cfg, data, pre)?;
    session.step1()?;
    session.step2()
}

/// Single-step VS2: encoder, decoder and classifier trained jointly.
pub fn train_vsensenet2a<S: Scalar>(cfg: &TrainConfig, data: &TrainSet, pre: Pretrained<S>) -> Result<Outcome<S>> {
    expect_regime(cfg, &[Regime::VS2A])?;
    let w = cfg.weights();
    if w.cls > 0.0 {
        data.require_both_classes()?;
    }
    let enc = pre.encoder(Regime::VS2A)?;
    let calls0 = enc.forward_calls();
    let mut guard = Guard::new(vec![enc as &dyn Network<S>]);
    let mut ts = TsEncoder::<S>::new(data.window_len(), cfg.dropout_rate, &mut stream(cfg.seed, INIT_TS_ENCODER))?;
    if w.emb > 0.0 {
        ts.set_output_bias(&mean_embedding(enc, data)?)?;
    }
    let mut dec = ImageDecoder::<S>::new(&mut stream(cfg.seed, INIT_IMAGE_DECODER));
    let mut cls = ImageClassifier::<S>::new(&mut stream(cfg.seed, INIT_IMAGE_CLASSIFIER));
    let mut opt_t = optimizer(cfg, &mut ts)?;
    let mut opt_d = optimizer(cfg, &mut dec)?;
    let mut opt_c = optimizer(cfg, &mut cls)?;
    let mut drop = stream(cfg.seed, DROPOUT);
    let mut recon_batches = 0u64;
    let trainable = ["ts_encoder", "image_decoder", "image_classifier"];
    let phase = run_phase("VS2A", cfg, w, data, SHUFFLE, &mut guard, &trainable, |b| {
        let x = data.windows::<S>(b)?;
        let y = data.frames::<S>(b);
        ts.zero_grad();
        dec.zero_grad();
        cls.zero_grad();
        let emb = ts.forward(&x, &mut drop)?;
        let img_emb = if w.emb > 0.0 { Some(enc.infer(&y)?) } else { None };
        let out = dec.forward(&emb, &mut drop)?;
        let (rec, g_rec) = mse_loss_grad(&out.image, &y)?;
        let mut c = Components { rec: rec.as_f64(), ..Default::default() };
        let mut d_img = scaled(g_rec, w.rec);
        if w.cls > 0.0 {
            recon_batches += 1;
            let logits = cls.forward(&out.image, &mut drop)?;
            let (l, g) = bce_with_logits(&logits, &data.labels(b))?;
            c.cls = l.as_f64();
            let d = cls.backward(&scaled(g, w.cls))?;
            axpy(&mut d_img, &d, 1.0);
        }
        let mut d_emb = dec.backward(&d_img, None)?;
        if let Some(ie) = &img_emb {
            let (l, g) = mse_loss_grad(&emb, ie)?;
            c.emb = l.as_f64();
            axpy(&mut d_emb, &g, w.emb);
        }
        ts.backward(&d_emb)?;
        update(&mut opt_t, &mut ts)?;
        update(&mut opt_d, &mut dec)?;
        if w.cls > 0.0 {
            update(&mut opt_c, &mut cls)?;
        }
        Ok(c)
    })?;
    let instr = Instrumentation {
        image_encoder_calls: enc.forward_calls() - calls0,
        classifier_reconstruction_batches: recon_batches,
        ..Default::default()
    };
    let frozen = guard.records();
    let models =
        Trained { ts_encoder: Some(ts), image_decoder: Some(dec), image_classifier: Some(cls), ..Trained::empty() };
    Ok(finish(cfg, data, models, vec![phase], frozen, instr))
}

pub fn train_image_classifier<S: Scalar>(cfg: &TrainConfig, data: &TrainSet) -> Result<Outcome<S>> {
    expect_regime(cfg, &[Regime::ImgCls])?;
    data.require_both_classes()?;
    let w = cfg.weights();
    let mut cls = ImageClassifier::<S>::new(&mut stream(cfg.seed, INIT_IMAGE_CLASSIFIER));
    let mut opt = optimizer(cfg, &mut cls)?;
    let mut drop = stream(cfg.seed, DROPOUT);
    let mut true_batches = 0u64;
    let mut guard = Guard::<S>::new(vec![]);
    let phase = run_phase("IMG_CLS", cfg, w, data, SHUFFLE, &mut guard, &["image_classifier"], |b| {
        let y = data.frames::<S>(b);
        cls.zero_grad();
        true_batches += 1;
        let logits = cls.forward(&y, &mut drop)?;
        let (l, g) = bce_with_logits(&logits, &data.labels(b))?;
        cls.backward(&scaled(g, w.cls))?;
        update(&mut opt, &mut cls)?;
        Ok(Components { cls: l.as_f64(), ..Default::default() })
    })?;
    let instr = Instrumentation { classifier_true_frame_batches: true_batches, ..Default::default() };
    let models = Trained { image_classifier: Some(cls), ..Trained::empty() };
    Ok(finish(cfg, data, models, vec![phase], vec![], instr))
}

pub fn train_ts_classifier<S: Scalar>(cfg: &TrainConfig, data: &TrainSet) -> Result<Outcome<S>> {
    expect_regime(cfg, &[Regime::TsCls])?;
    data.require_both_classes()?;
    let w = cfg.weights();
    let mut cls =
        TsClassifier::<S>::new(data.window_len(), cfg.dropout_rate, &mut stream(cfg.seed, INIT_TS_CLASSIFIER))?;
    let mut opt = optimizer(cfg, &mut cls)?;
    let mut drop = stream(cfg.seed, DROPOUT);
    let mut guard = Guard::<S>::new(vec![]);
    let phase = run_phase("TS_CLS", cfg, w, data, SHUFFLE, &mut guard, &["ts_classifier"], |b| {
        let x = data.windows::<S>(b)?;
        cls.zero_grad();
        let logits = cls.forward(&x, &mut drop)?;
        let (l, g) = bce_with_logits(&logits, &data.labels(b))?;
        cls.backward(&scaled(g, w.cls))?;
        update(&mut opt, &mut cls)?;
        Ok(Components { cls: l.as_f64(), ..Default::default() })
    })?;
    let models = Trained { ts_classifier: Some(cls), ..Trained::empty() };
    Ok(finish(cfg, data, models, vec![phase], vec![], Instrumentation::default()))
}
