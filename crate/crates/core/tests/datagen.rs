use std::path::Path;

use incell::cells::{Architecture, ModelSpec};
use incell::data::mnist::{self, encode_idx, parse_idx};
use incell::data::synthetic::{generate, generate_split, BoxKind, DatasetConfig};
use incell::data::{icts, Split, Splits};
use incell::train::{train, TrainConfig};
use incell::Error;
use proptest::prelude::*;

fn small(kind: BoxKind, seed: u64) -> DatasetConfig {
    DatasetConfig {
        train: 40,
        test: 12,
        ..DatasetConfig::new(kind, seed)
    }
}

#[test]
fn earlier_masks_cover_only_the_early_band() {
    let d = generate_split(&small(BoxKind::Earlier, 1), Split::Train, 10).unwrap();
    for s in &d.samples {
        let m = s.mask.as_ref().unwrap();
        for t in 0..100 {
            for i in 0..100 {
                let inside = t < 30 && (10..40).contains(&i);
                assert_eq!(m.get(t, i), if inside { 1.0 } else { 0.0 });
            }
        }
    }
}

#[test]
fn static_kinds_occupy_their_time_regions() {
    let region = |k: BoxKind| match k {
        BoxKind::Earlier | BoxKind::ThreeEarlier => (0, 30),
        BoxKind::Middle | BoxKind::ThreeMiddle => (30, 70),
        BoxKind::Latter | BoxKind::ThreeLatter => (70, 100),
        _ => (0, 100),
    };
    for kind in BoxKind::STATIC {
        let d = generate_split(&small(kind, 2), Split::Test, 6).unwrap();
        let (lo, hi) = region(kind);
        for s in &d.samples {
            let m = s.mask.as_ref().unwrap();
            assert!(m.sum() >= 1.0, "{kind}");
            for t in 0..100 {
                if !(lo..hi).contains(&t) {
                    assert!(m.row_slice(t).iter().all(|&v| v == 0.0), "{kind} t={t}");
                }
            }
        }
    }
}

#[test]
fn moving_boxes_span_twenty_steps() {
    for start in BoxKind::MOVING_STARTS {
        let d = generate_split(&small(BoxKind::Moving { start }, 3), Split::Train, 2).unwrap();
        let m = d.samples[0].mask.as_ref().unwrap();
        let active: Vec<usize> = (0..100).filter(|&t| m.row_slice(t).iter().any(|&v| v > 0.0)).collect();
        assert_eq!(active, (start..start + 20).collect::<Vec<_>>());
    }
    let mut bad = small(BoxKind::Moving { start: 90 }, 0);
    bad.train = 2;
    assert!(matches!(generate(&bad), Err(Error::Validation(_))));
}

#[test]
fn box_shift_is_two_between_classes() {
    let d = generate_split(&small(BoxKind::Middle, 4), Split::Train, 600).unwrap();
    let (mut pos, mut neg) = ((0.0, 0usize), (0.0, 0usize));
    for s in &d.samples {
        let m = s.mask.as_ref().unwrap();
        for (v, w) in s.x.data().iter().zip(m.data()) {
            if *w == 1.0 {
                let acc = if s.label == 1 { &mut pos } else { &mut neg };
                acc.0 += v;
                acc.1 += 1;
            }
        }
    }
    let diff = pos.0 / pos.1 as f64 - neg.0 / neg.1 as f64;
    assert!((diff - 2.0).abs() <= 0.1, "{diff}");
}

#[test]
fn noise_is_standard_normal_off_the_box() {
    let d = generate_split(&small(BoxKind::Latter, 5), Split::Train, 20).unwrap();
    let vals: Vec<f64> = d
        .samples
        .iter()
        .flat_map(|s| s.x.data().iter().zip(s.mask.as_ref().unwrap().data()).filter(|(_, m)| **m == 0.0).map(|(v, _)| *v))
        .collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
    assert!(mean.abs() < 0.02, "{mean}");
    assert!((var - 1.0).abs() < 0.03, "{var}");
}

#[test]
fn classes_are_balanced_and_splits_disjoint() {
    let Splits { train, test } = generate(&small(BoxKind::Mixed, 6)).unwrap();
    for d in [&train, &test] {
        let ones = d.labels().iter().filter(|&&l| l == 1).count();
        assert!((2 * ones as i64 - d.len() as i64).abs() <= 1);
    }
    for a in &train.samples {
        assert!(test.samples.iter().all(|b| a.x != b.x));
    }
}

#[test]
fn same_seed_same_bytes() {
    let a = icts::encode(&generate(&small(BoxKind::Mixed, 7)).unwrap().train).unwrap();
    let b = icts::encode(&generate(&small(BoxKind::Mixed, 7)).unwrap().train).unwrap();
    let c = icts::encode(&generate(&small(BoxKind::Mixed, 8)).unwrap().train).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn samples_do_not_depend_on_the_split_size() {
    let few = generate_split(&small(BoxKind::Earlier, 9), Split::Test, 3).unwrap();
    let many = generate_split(&small(BoxKind::Earlier, 9), Split::Test, 30).unwrap();
    assert_eq!(few.samples[..], many.samples[..3]);
}

/// Zero amplitude leaves only noise, so a trained model sits at chance.
#[test]
fn pure_noise_trains_to_chance() {
    let config = DatasetConfig {
        steps: 10,
        features: 10,
        train: 200,
        test: 400,
        amplitude: 0.0,
        ..DatasetConfig::new(BoxKind::Earlier, 10)
    };
    let data = generate(&config).unwrap();
    let mut spec = ModelSpec::new(Architecture::LSTM, 10, 10, 2);
    spec.hidden = 8;
    let tc = TrainConfig {
        max_epochs: 5,
        ..TrainConfig::default()
    };
    let r = train(spec, &data, &tc).unwrap();
    let last = r.history.last().unwrap().test_accuracy;
    assert!((0.40..=0.60).contains(&last), "{last}");
}

fn idx_pair(images: &[u8], labels: &[u8]) -> (Vec<u8>, Vec<u8>) {
    let n = labels.len();
    (encode_idx(&[n, 28, 28], images), encode_idx(&[n], labels))
}

#[test]
fn idx_header_is_big_endian() {
    let (img, _) = idx_pair(&[0u8; 784], &[1]);
    assert_eq!(&img[..16], &[0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 28, 0, 0, 0, 28]);
    let parsed = parse_idx(&img).unwrap();
    assert_eq!(parsed.dims, vec![1, 28, 28]);
}

#[test]
fn idx_subset_selection_and_scaling() {
    let mut pixels = vec![0u8; 4 * 784];
    pixels[784] = 255;
    pixels[2 * 784 + 29] = 51;
    let (img, lab) = idx_pair(&pixels, &[1, 7, 6, 3]);
    let d = mnist::from_idx(&parse_idx(&img).unwrap(), &parse_idx(&lab).unwrap(), &[1, 6, 7]).unwrap();
    assert_eq!(d.len(), 3);
    assert_eq!(d.labels(), vec![0, 2, 1]);
    assert!(d.samples[0].x.data().iter().all(|&v| v == 0.0));
    assert_eq!(d.samples[1].x.get(0, 0), 1.0);
    assert!((d.samples[2].x.get(1, 1) - 0.2).abs() < 1e-15);
    assert!(!d.has_masks());
    assert_eq!((d.steps, d.features, d.classes), (28, 28, 3));
}

#[test]
fn idx_errors_report_offsets() {
    let (img, _) = idx_pair(&[0u8; 2 * 784], &[1, 6]);
    let at = |r: incell::Result<_>| match r {
        Err(Error::Format { offset, .. }) => offset,
        other => panic!("expected a format error, got {other:?}"),
    };
    let mut bad = img.clone();
    bad[2] = 9;
    assert_eq!(at(parse_idx(&bad).map(|_| ())), 2);
    assert!(at(parse_idx(&img[..img.len() - 1]).map(|_| ())) >= 16);
    assert!(at(parse_idx(&img[..10]).map(|_| ())) <= 10);

    let narrow = encode_idx(&[1, 27, 28], &[0u8; 27 * 28]);
    let one = encode_idx(&[1], &[1]);
    assert!(matches!(
        mnist::from_idx(&parse_idx(&narrow).unwrap(), &parse_idx(&one).unwrap(), &[1]),
        Err(Error::Format { .. })
    ));
    assert!(matches!(
        mnist::from_idx(&parse_idx(&img).unwrap(), &parse_idx(&one).unwrap(), &[1]),
        Err(Error::Format { .. }) | Err(Error::Validation(_))
    ));
}

/// The bundled subset agrees with a direct scan of its label file.
#[test]
fn bundled_subset_counts_match_label_scan() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist167");
    let labels = std::fs::read(dir.join("t10k-labels-idx1-ubyte")).unwrap();
    let n = u32::from_be_bytes(labels[4..8].try_into().unwrap()) as usize;
    let scan = labels[8..8 + n].iter().filter(|&&d| d == 1 || d == 6 || d == 7).count();
    let Splits { train, test } = mnist::load_dir(&dir, &mnist::DEFAULT_DIGITS).unwrap();
    assert_eq!(test.len(), scan);
    assert!(train.len() > test.len());
    assert!(test.samples.iter().all(|s| s.x.data().iter().all(|v| (0.0..=1.0).contains(v))));
}

#[test]
fn icts_truncation_is_located() {
    let d = generate_split(&small(BoxKind::Earlier, 11), Split::Train, 3).unwrap();
    let bytes = icts::encode(&d).unwrap();
    let per_sample = (bytes.len() - 26) / 3;
    match icts::decode(&bytes[..bytes.len() - 5]) {
        Err(Error::Format { offset, .. }) => assert_eq!(offset as usize, 26 + 2 * per_sample),
        other => panic!("{other:?}"),
    }
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(icts::decode(&bad), Err(Error::Format { offset: 0, .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn icts_round_trips(seed in 0u64..1000, steps in 1usize..12, features in 1usize..12, count in 0usize..6) {
        let config = DatasetConfig {
            steps: steps.max(10),
            features: features.max(10),
            kind: BoxKind::Mixed,
            ..DatasetConfig::new(BoxKind::Mixed, seed)
        };
        let d = generate_split(&config, Split::Train, count).unwrap();
        let back = icts::decode(&icts::encode(&d).unwrap()).unwrap();
        prop_assert_eq!(back, d);
    }

    #[test]
    fn generation_is_a_pure_function_of_the_seed(seed in 0u64..1000) {
        let c = DatasetConfig { steps: 10, features: 10, ..DatasetConfig::new(BoxKind::ThreeMiddle, seed) };
        prop_assert_eq!(generate_split(&c, Split::Train, 4).unwrap(), generate_split(&c, Split::Train, 4).unwrap());
    }
}
