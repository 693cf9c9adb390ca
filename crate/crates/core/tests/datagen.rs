use std::collections::HashSet;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use vsense_core::datagen::*;
use vsense_core::eval::signal::dominant_frequency;
use vsense_core::rng::{seeded, stream};
use vsense_core::Error;

fn small(master: u64) -> Dataset {
    build_dataset(&default_conditions(master), DEFAULT_WINDOW, 300, &GeneratorConfig::default(), master).unwrap()
}

#[test]
fn generator_agrees_with_oracle_over_seeds() {
    let gen = GeneratorConfig::default();
    for master in 0..20u64 {
        for cond in default_conditions(master) {
            let (series, _) = synth_pressure(&cond, &gen, &mut stream(cond.seed, 1)).unwrap();
            assert_eq!(label_oracle(&series).unwrap(), cond.label, "seed {master} condition {}", cond.id);
        }
    }
}

#[test]
fn stable_spectrum_has_no_sharp_peak() {
    let gen = GeneratorConfig::default();
    for master in 0..5u64 {
        let cond = &default_conditions(master)[0];
        let (series, _) = synth_pressure(cond, &gen, &mut seeded(master)).unwrap();
        let r = oracle_report(&series).unwrap();
        assert!(r.peak_ratio < 10.0, "{r:?}");
        assert!(r.rms >= 30.0 && r.rms <= 90.0);
    }
}

#[test]
fn unstable_rms_within_band() {
    let gen = GeneratorConfig::default();
    for master in 0..10u64 {
        let cond = &default_conditions(master)[2];
        let (series, osc) = synth_pressure(cond, &gen, &mut seeded(master)).unwrap();
        let r = oracle_report(&series).unwrap();
        assert!(r.rms > 500.0 && r.rms < 900.0, "{r:?}");
        let osc = osc.unwrap();
        assert!((130.0..=150.0).contains(&osc.frequency));
        let p = dominant_frequency(&series.channels[0], 9000.0).unwrap();
        assert!((p.frequency - osc.frequency).abs() <= 0.5);
    }
}

#[test]
fn default_roster_and_split() {
    let conds = default_conditions(1);
    assert_eq!(conds.len(), 6);
    let train: Vec<_> = conds.iter().filter(|c| c.split == Split::Train).collect();
    let test: Vec<_> = conds.iter().filter(|c| c.split == Split::Test).collect();
    assert_eq!(train.len(), 4);
    assert_eq!(train.iter().filter(|c| c.label == Label::Stable).count(), 2);
    let tags: Vec<_> = test.iter().map(|c| (c.premixing_length, c.ffr, c.afr, c.label)).collect();
    assert_eq!(tags, vec![(120.0, 45.0, 450.0, Label::Stable), (90.0, 45.0, 900.0, Label::Unstable)]);
}

#[test]
fn windows_end_at_frame_time() {
    let ds = build_dataset(&default_conditions(4)[2..4], 75, 3, &GeneratorConfig::default(), 4).unwrap();
    let per_cond = frame_indices(27_000, 75, 3).len();
    assert_eq!(per_cond, 9000 - 25);
    assert_eq!(ds.samples.len(), 2 * per_cond);
    // regenerate one condition's pressure and check the copied window directly
    let cond = &ds.conditions[1];
    let (series, _) = synth_pressure(cond, &GeneratorConfig::default(), &mut stream(cond.seed, 1)).unwrap();
    for s in ds.samples.iter().filter(|s| s.condition_id == cond.id).step_by(97) {
        let end = s.window_end();
        assert_eq!(end, 3 * s.frame_index as usize);
        for (c, ch) in series.channels.iter().enumerate() {
            assert_eq!(s.window[c * 75 + 74], ch[end] as f32);
            assert_eq!(s.window[c * 75], ch[end - 74] as f32);
        }
    }
    assert!(ds.samples.iter().all(|s| s.window_end() >= 74 && s.window.len() == 300));
}

#[test]
fn splits_are_disjoint() {
    let ds = small(2);
    let train: HashSet<u32> = ds.indices(Split::Train).iter().map(|&i| ds.samples[i].condition_id).collect();
    let test: HashSet<u32> = ds.indices(Split::Test).iter().map(|&i| ds.samples[i].condition_id).collect();
    assert!(train.is_disjoint(&test));
    assert_eq!(train.len() + test.len(), 6);
}

fn fundamental(series: &[f64], rate: f64) -> Vec<f64> {
    let n = series.len();
    let f0 = dominant_frequency(series, rate).unwrap().frequency;
    let mut buf: Vec<Complex<f64>> = series.iter().map(|&x| Complex::new(x, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let f = k.min(n - k) as f64 * rate / n as f64;
        if (f - f0).abs() > 3.0 {
            *c = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

#[test]
fn flame_motion_is_phase_locked() {
    let gen = GeneratorConfig::default();
    for master in [3u64, 8] {
        let conds: Vec<_> = default_conditions(master).into_iter().filter(|c| c.label == Label::Unstable).collect();
        let ds = build_dataset(&conds[..1], 75, 3, &gen, master).unwrap();
        let (series, _) = synth_pressure(&conds[0], &gen, &mut stream(conds[0].seed, 1)).unwrap();
        let fund = fundamental(&series.channels[0], 9000.0);
        let rows: Vec<f64> = ds.samples.iter().map(|s| s.frame.centroid().0).collect();
        let p: Vec<f64> = ds.samples.iter().map(|s| fund[s.window_end()]).collect();
        let mr = rows.iter().sum::<f64>() / rows.len() as f64;
        let xcorr = |lag: i64| -> f64 {
            let mut acc = 0.0;
            for i in 0..rows.len() as i64 {
                let j = i + lag;
                if j >= 0 && (j as usize) < p.len() {
                    acc += (rows[i as usize] - mr) * p[j as usize];
                }
            }
            acc
        };
        let best = (-10..=10).max_by(|&a, &b| xcorr(a).total_cmp(&xcorr(b))).unwrap();
        assert!(best.abs() <= 1, "peak at lag {best}");
    }
}

#[test]
fn stable_frames_are_near_constant() {
    let ds = build_dataset(&default_conditions(5)[..1], 75, 3, &GeneratorConfig::default(), 5).unwrap();
    let frames: Vec<_> = ds.samples.iter().take(100).map(|s| &s.frame).collect();
    let n = frames.len() as f64;
    let worst = (0..4096)
        .map(|k| {
            let m = frames.iter().map(|f| f.pixels[k] as f64).sum::<f64>() / n;
            (frames.iter().map(|f| (f.pixels[k] as f64 - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        })
        .fold(0.0, f64::max);
    assert!(worst < 0.05, "{worst}");
}

#[test]
fn round_trip_is_identity_and_size_is_predicted() {
    let mut ds = small(6);
    ds.header.provenance = [7; 32];
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ds.vsns");
    write_dataset(&ds, &path).unwrap();
    let size = std::fs::metadata(&path).unwrap().len();
    assert_eq!(size, predicted_size(&ds.header, ds.conditions.len(), ds.samples.len()));
    assert_eq!(read_dataset(&path).unwrap(), ds);
}

#[test]
fn corrupt_files_report_offsets() {
    let ds = small(7);
    let bytes = encode_dataset(&ds);
    let mut bad = bytes.clone();
    bad[1] = b'X';
    assert!(matches!(decode_dataset(&bad), Err(Error::Format { offset: 0, .. })));
    let mut bad = bytes.clone();
    bad[4] = 9;
    assert!(matches!(decode_dataset(&bad), Err(Error::Format { offset: 4, .. })));
    let cut = &bytes[..bytes.len() - 10];
    match decode_dataset(cut) {
        Err(Error::Format { offset, .. }) => assert_eq!(offset, cut.len() as u64),
        other => panic!("{other:?}"),
    }
    assert!(matches!(decode_dataset(&bytes[..20]), Err(Error::Format { .. })));
}

#[test]
fn generation_is_deterministic() {
    assert_eq!(encode_dataset(&small(9)), encode_dataset(&small(9)));
    assert_ne!(encode_dataset(&small(9)), encode_dataset(&small(10)));
}

#[test]
fn pgm_quantization_within_one_level() {
    let ds = small(11);
    let f = &ds.samples[ds.samples.len() - 1].frame;
    let back = pgm_to_frame(&frame_to_pgm(f)).unwrap();
    for (a, b) in f.pixels.iter().zip(&back.pixels) {
        assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
    }
}
