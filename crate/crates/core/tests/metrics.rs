mod common;

use common::*;
use incell::autodiff::Var;
use incell::cells::ScoreModel;
use incell::data::{Dataset, Sample};
use incell::metrics::*;
use incell::tensor::Tensor;
use incell::{Error, Result};
use proptest::prelude::*;

fn row(v: &[f64]) -> Tensor {
    Tensor::row(v.to_vec()).unwrap()
}

#[test]
fn euclidean_distance_hand_values() {
    for (r, s, want) in euclidean_cases() {
        let got = euclidean_distance(&row(&r), &row(&s)).unwrap();
        assert!((got - want).abs() <= 1e-12, "{r:?} {s:?}: {got}");
    }
    assert!(matches!(euclidean_distance(&row(&[0.0, 0.0]), &row(&[1.0, 1.0])), Err(Error::Validation(_))));
    assert!(matches!(euclidean_distance(&row(&[1.0]), &row(&[1.0, 1.0])), Err(Error::Shape { .. })));
}

#[test]
fn weighted_jaccard_hand_values() {
    for (x, s, want) in jaccard_cases() {
        let got = weighted_jaccard(&row(&x), &row(&s)).unwrap();
        assert!((got - want).abs() <= 1e-12, "{x:?} {s:?}: {got}");
    }
    assert!(weighted_jaccard(&row(&[-1.0]), &row(&[1.0])).is_err());
}

#[test]
fn weighted_jaccard_is_not_scale_covariant() {
    let a = row(&[1.0, 1.0]);
    let doubled = row(&[2.0, 2.0]);
    assert_eq!(weighted_jaccard(&a, &a).unwrap(), 1.0);
    assert_eq!(weighted_jaccard(&doubled, &a).unwrap(), 0.5);
    assert_eq!(weighted_jaccard(&a, &doubled).unwrap(), 0.5);
}

#[test]
fn bucket_mass_examples() {
    let uniform_map = Tensor::full(8, 3, 0.7);
    for &v in &bucket_mass(&uniform_map, 4).unwrap().mass {
        assert!((v - 0.25).abs() < 1e-15);
    }
    let mut last = Tensor::zeros(8, 3);
    last.set(7, 1, 2.0);
    assert_eq!(bucket_mass(&last, 4).unwrap().mass, vec![0.0, 0.0, 0.0, 1.0]);
}

/// Scores only the sum of the input, so zeroed cells move every class alike.
struct SumModel;

impl ScoreModel for SumModel {
    fn classes(&self) -> usize {
        2
    }

    fn features(&self) -> usize {
        2
    }

    fn scores<'t>(&self, x: Var<'t>, batch: usize) -> Result<Var<'t>> {
        let tape = x.tape();
        let rows = x.value().rows();
        let mut sel = Tensor::zeros(batch, rows);
        for r in 0..rows {
            sel.set(r % batch, r, 1.0);
        }
        let per_sample = tape.constant(sel)?.matmul(x)?;
        per_sample.matmul(tape.constant(Tensor::from_rows(&[&[-1.0, 1.0], &[-1.0, 1.0]])?)?)
    }
}

fn toy_dataset() -> Dataset {
    let samples = (0..6)
        .map(|i| {
            let label = i % 2;
            let v = if label == 1 { 1.0 + i as f64 } else { -1.0 - i as f64 };
            Sample {
                x: Tensor::matrix(3, 2, vec![v, 0.1, v, -0.1, 0.2, v]).unwrap(),
                label,
                mask: None,
            }
        })
        .collect();
    Dataset::new(samples, 3, 2, 2).unwrap()
}

#[test]
fn feature_drop_end_points() {
    let d = toy_dataset();
    let maps: Vec<Tensor> = d.samples.iter().map(|s| s.x.map(f64::abs)).collect();
    let curve = feature_drop_eval(&SumModel, &d, &maps, &[0.0, 10.0, 100.0]).unwrap();
    assert_eq!(curve[0].accuracy, 1.0);
    assert_eq!(curve[2].accuracy, 0.5);
    assert_eq!(curve.iter().map(|p| p.percent).collect::<Vec<_>>(), vec![0.0, 10.0, 100.0]);

    assert!(matches!(feature_drop_eval(&SumModel, &d, &maps, &[]), Err(Error::Validation(_))));
    assert!(matches!(feature_drop_eval(&SumModel, &d, &maps, &[120.0]), Err(Error::Validation(_))));
    assert!(feature_drop_eval(&SumModel, &d, &maps[..2], &[10.0]).is_err());
}

#[test]
fn drop_counts_round_up() {
    assert_eq!(drop_count(0.0, 100), 0);
    assert_eq!(drop_count(10.0, 10_000), 1000);
    assert_eq!(drop_count(0.5, 10), 1);
    assert_eq!(drop_count(100.0, 7), 7);
}

#[test]
fn random_maps_are_seeded() {
    let d = toy_dataset();
    assert_eq!(random_maps(&d, 3), random_maps(&d, 3));
    assert_ne!(random_maps(&d, 3), random_maps(&d, 4));
}

fn pair(max_len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..max_len).prop_flat_map(|n| (prop::collection::vec(0.0f64..5.0, n), prop::collection::vec(0.0f64..5.0, n)))
}

proptest! {
    #[test]
    fn jaccard_is_symmetric_and_bounded((a, b) in pair(20)) {
        let ab = weighted_jaccard(&row(&a), &row(&b)).unwrap();
        let ba = weighted_jaccard(&row(&b), &row(&a)).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn euclidean_ignores_cell_order((a, b) in pair(20), rot in 0usize..20) {
        let mask: Vec<f64> = a.iter().map(|v| if *v > 2.0 { 1.0 } else { 0.0 }).collect();
        prop_assume!(mask.iter().sum::<f64>() > 0.0);
        let k = rot % mask.len();
        let (mut m2, mut b2) = (mask.clone(), b.clone());
        m2.rotate_left(k);
        b2.rotate_left(k);
        let d1 = euclidean_distance(&row(&mask), &row(&b)).unwrap();
        let d2 = euclidean_distance(&row(&m2), &row(&b2)).unwrap();
        prop_assert!((d1 - d2).abs() <= 1e-12 * d1.max(1.0));
        prop_assert!(d1 >= 0.0);
    }

    #[test]
    fn bucket_mass_sums_to_one(v in prop::collection::vec(0.0f64..3.0, 4..60), n in 1usize..5) {
        let t = Tensor::matrix(v.len(), 1, v).unwrap();
        let b = bucket_mass(&t, n.min(t.rows())).unwrap();
        prop_assert!((b.mass.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn spearman_of_a_monotone_map_is_one(v in prop::collection::hash_set(-1000i32..1000, 2..12)) {
        let a: Vec<f64> = v.iter().map(|&x| x as f64).collect();
        let b: Vec<f64> = a.iter().map(|x| x.powi(3) + 2.0).collect();
        prop_assert!((spearman(&a, &b).unwrap() - 1.0).abs() < 1e-12);
    }
}
