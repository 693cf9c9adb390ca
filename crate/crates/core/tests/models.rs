use rand::RngExt;
use vsense_core::models::{
    decode_model, encode_model, load_model, predict_unstable, save_model, ImageClassifier, ImageDecoder, ImageEncoder,
    Network, TsClassifier, TsEncoder, DECODER_TAP_SHAPE, EMBEDDING_DIM,
};
use vsense_core::rng::{seeded, Prng};
use vsense_core::{Error, Tensor32, Tensor64};

const W: usize = 24;

fn frames(n: usize, r: &mut Prng) -> Tensor32 {
    Tensor32::from_fn(&[n, 1, 64, 64], |_| r.random::<f32>())
}

fn windows(n: usize, r: &mut Prng) -> Tensor32 {
    Tensor32::from_fn(&[n, W, 4], |_| r.random::<f32>() * 2.0 - 1.0)
}

fn zero_params<S: vsense_core::Scalar>(net: &mut dyn Network<S>) {
    for p in net.params_mut() {
        p.data_mut().fill(S::zero());
    }
}

#[test]
fn shape_contract_and_sigmoid_bounds() {
    let mut r = seeded(1);
    let enc = ImageEncoder::<f32>::new(&mut r);
    let dec = ImageDecoder::<f32>::new(&mut r);
    for n in [1, 3, 7] {
        let e = enc.infer(&frames(n, &mut r)).unwrap();
        assert_eq!(e.shape(), &[n, EMBEDDING_DIM]);
        let z = Tensor32::from_fn(&[n, EMBEDDING_DIM], |_| r.random::<f32>() * 20.0 - 10.0);
        let out = dec.infer(&z).unwrap();
        assert_eq!(out.image.shape(), &[n, 1, 64, 64]);
        assert_eq!(out.tap.shape()[1..], DECODER_TAP_SHAPE);
        assert!(out.image.data().iter().all(|&p| (0.0..=1.0).contains(&p)));
    }
}

#[test]
fn wrong_shapes_are_dimension_errors() {
    let mut r = seeded(2);
    let enc = ImageEncoder::<f32>::new(&mut r);
    let dec = ImageDecoder::<f32>::new(&mut r);
    let cls = ImageClassifier::<f32>::new(&mut r);
    let ts = TsEncoder::<f32>::new(W, 0.2, &mut r).unwrap();
    let small = Tensor32::zeros(&[2, 1, 32, 32]);
    assert!(matches!(enc.infer(&small), Err(Error::Dimension { .. })));
    assert!(matches!(cls.infer(&small), Err(Error::Dimension { .. })));
    assert!(matches!(dec.infer(&Tensor32::zeros(&[2, 64])), Err(Error::Dimension { .. })));
    assert!(matches!(ts.infer(&Tensor32::zeros(&[2, W + 1, 4])), Err(Error::Dimension { .. })));
}

#[test]
fn eval_forwards_are_deterministic_and_input_sensitive() {
    let mut r = seeded(3);
    let enc = ImageEncoder::<f32>::new(&mut r);
    let cls = ImageClassifier::<f32>::new(&mut r);
    let ts = TsEncoder::<f32>::new(W, 0.2, &mut r).unwrap();
    let tsc = TsClassifier::<f32>::new(W, 0.2, &mut r).unwrap();
    let x = frames(2, &mut r);
    let w = windows(2, &mut r);
    assert_eq!(enc.infer(&x).unwrap(), enc.infer(&x).unwrap());
    assert_eq!(cls.infer(&x).unwrap(), cls.infer(&x).unwrap());
    assert_eq!(ts.infer(&w).unwrap(), ts.infer(&w).unwrap());
    assert_eq!(tsc.infer(&w).unwrap(), tsc.infer(&w).unwrap());

    let e = enc.infer(&x).unwrap();
    let diff: f32 = e.item(0).iter().zip(e.item(1)).map(|(a, b)| (a - b).powi(2)).sum();
    assert!(diff > 0.0);
    assert_eq!(cls.infer(&x).unwrap().shape(), &[2, 1]);
}

#[test]
fn same_seed_builds_identical_models() {
    let a = ImageEncoder::<f32>::new(&mut seeded(9));
    let b = ImageEncoder::<f32>::new(&mut seeded(9));
    assert_eq!(a.param_digest(), b.param_digest());
}

#[test]
fn zero_weights_give_half_grey_image() {
    let mut dec = ImageDecoder::<f64>::new(&mut seeded(4));
    zero_params(&mut dec);
    let out = dec.infer(&Tensor64::zeros(&[2, EMBEDDING_DIM])).unwrap();
    assert!(out.image.data().iter().all(|&p| p == 0.5));
}

#[test]
fn zero_parameters_give_zero_embedding_and_stable_tie() {
    let mut ts = TsEncoder::<f64>::new(W, 0.2, &mut seeded(5)).unwrap();
    zero_params(&mut ts);
    let e = ts.infer(&Tensor64::zeros(&[3, W, 4])).unwrap();
    assert!(e.data().iter().all(|&v| v == 0.0));

    let mut tsc = TsClassifier::<f64>::new(W, 0.2, &mut seeded(5)).unwrap();
    zero_params(&mut tsc);
    let z = tsc.infer(&Tensor64::from_fn(&[3, W, 4], |i| (i as f64).sin())).unwrap();
    assert!(z.data().iter().all(|&v| v == 0.0));
    assert!(z.data().iter().all(|&v| !predict_unstable(v)));
    assert!(!predict_unstable(0.0f32));
    assert!(predict_unstable(1e-6f32));
}

#[test]
fn time_order_matters() {
    let mut r = seeded(6);
    let ts = TsEncoder::<f64>::new(W, 0.2, &mut r).unwrap();
    let x = Tensor64::from_fn(&[1, W, 4], |i| ((i / 4) as f64 * 0.7).sin());
    let mut order: Vec<usize> = (0..W).collect();
    order.reverse();
    let mut shuffled = x.clone();
    for (t, &s) in order.iter().enumerate() {
        for c in 0..4 {
            shuffled.data_mut()[t * 4 + c] = x.data()[s * 4 + c];
        }
    }
    let a = ts.infer(&x).unwrap();
    let b = ts.infer(&shuffled).unwrap();
    assert!(a.data().iter().zip(b.data()).any(|(p, q)| (p - q).abs() > 1e-6));
}

#[test]
fn ts_classifier_adds_exactly_two_dense_layers() {
    let mut r = seeded(7);
    let ts = TsEncoder::<f32>::new(W, 0.2, &mut r).unwrap();
    let tsc = TsClassifier::<f32>::new(W, 0.2, &mut r).unwrap();
    let trunk = ts.layers();
    let full = tsc.layers();
    assert_eq!(full[..trunk.len()], trunk[..]);
    let extra = &full[trunk.len()..];
    assert_eq!(extra.iter().filter(|l| l.starts_with("dense")).count(), 2);
    assert_eq!(extra.first().unwrap(), "dense(128->32)");
    assert_eq!(extra.last().unwrap(), "dense(32->1)");
}

#[test]
fn fingerprints_are_stable_and_role_specific() {
    let a = ImageEncoder::<f32>::new(&mut seeded(1)).spec();
    let b = ImageEncoder::<f64>::new(&mut seeded(2)).spec();
    assert_eq!(a.fingerprint, b.fingerprint);
    assert_eq!(a.fingerprint.len(), 64);
    let d = ImageDecoder::<f32>::new(&mut seeded(1)).spec();
    assert_ne!(a.fingerprint, d.fingerprint);
    // pinned so that a silent architecture change shows up here
    assert_eq!(a.layers[0], "conv2d(1->16,k3,s1,p1)");
    assert_eq!(a.fingerprint, PINNED_ENCODER_FINGERPRINT);
}

const PINNED_ENCODER_FINGERPRINT: &str = "680f63f6ce32c441450909e11580fdb7d98a6518501448e71fc69f4f1c3d183d";

#[test]
fn save_load_roundtrip_is_bitwise() {
    let mut r = seeded(8);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("enc.vsnm");
    let enc = ImageEncoder::<f32>::new(&mut r);
    save_model(&path, &enc, [7; 32]).unwrap();
    let mut back = ImageEncoder::<f32>::new(&mut seeded(99));
    let header = load_model(&path, &mut back).unwrap();
    assert_eq!(header.provenance, [7; 32]);
    let x = frames(2, &mut r);
    assert_eq!(enc.infer(&x).unwrap(), back.infer(&x).unwrap());

    let ts = TsClassifier::<f32>::new(W, 0.2, &mut r).unwrap();
    let bytes = encode_model(&ts, [0; 32]);
    let mut ts2 = TsClassifier::<f32>::new(W, 0.2, &mut seeded(1)).unwrap();
    decode_model(&bytes, &mut ts2).unwrap();
    let w = windows(3, &mut r);
    assert_eq!(ts.infer(&w).unwrap(), ts2.infer(&w).unwrap());
}

#[test]
fn corrupt_and_mismatched_files_are_rejected() {
    let mut r = seeded(10);
    let enc = ImageEncoder::<f32>::new(&mut r);
    let bytes = encode_model(&enc, [0; 32]);
    let mut target = ImageEncoder::<f32>::new(&mut r);

    let cut = &bytes[..bytes.len() - 5];
    assert!(matches!(decode_model(cut, &mut target), Err(Error::Format { .. })));
    assert!(matches!(decode_model(&bytes[..20], &mut target), Err(Error::Format { .. })));
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(decode_model(&bad, &mut target), Err(Error::Format { offset: 0, .. })));

    let mut dec = ImageDecoder::<f32>::new(&mut r);
    match decode_model(&bytes, &mut dec) {
        Err(Error::Incompatible { expected, found }) => {
            assert!(expected.contains("image_decoder") && found.contains("image_encoder"));
            assert_ne!(expected, found);
        }
        other => panic!("expected incompatibility, got {other:?}"),
    }
    let mut other_window = TsEncoder::<f32>::new(W + 1, 0.2, &mut r).unwrap();
    let ts_bytes = encode_model(&TsEncoder::<f32>::new(W, 0.2, &mut r).unwrap(), [0; 32]);
    assert!(decode_model(&ts_bytes, &mut other_window).is_err());
}
