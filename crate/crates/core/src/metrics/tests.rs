use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::data::{generate_synthetic, ColorMode, SyntheticKind, SyntheticSpec};
use crate::model::{Model, ModelConfig, Task};

#[test]
fn accuracy_examples() {
    let diag = ConfusionMatrix::from_rows(&[&[3, 0], &[0, 5]]);
    assert_eq!(diag.overall_accuracy(), 1.0);
    assert_eq!(diag.mean_iou(), 1.0);
    let cm = ConfusionMatrix::from_rows(&[&[1, 1], &[0, 2]]);
    assert_eq!(cm.overall_accuracy(), 0.75);
    assert_eq!(cm.mean_class_accuracy(), 0.75);
    // Class 2 never occurs in the ground truth and is left out of mAcc.
    let gap = ConfusionMatrix::from_rows(&[&[2, 0, 0], &[0, 1, 1], &[0, 0, 0]]);
    assert_eq!(gap.mean_class_accuracy(), 0.75);
    assert_eq!(ConfusionMatrix::new(3).overall_accuracy(), 0.0);
}

#[test]
fn iou_examples() {
    let cm = ConfusionMatrix::from_rows(&[&[2, 1], &[1, 2]]);
    assert_eq!(cm.class_iou(), vec![Some(0.5), Some(0.5)]);
    assert_eq!(cm.mean_iou(), 0.5);
    // Class 1 is always predicted as class 0.
    let miss = ConfusionMatrix::from_rows(&[&[4, 0, 0], &[3, 0, 0], &[0, 0, 2]]);
    assert_eq!(miss.class_iou()[1], Some(0.0));
    // A class absent from both ground truth and predictions is skipped.
    let absent = ConfusionMatrix::from_rows(&[&[2, 0, 0], &[0, 2, 0], &[0, 0, 0]]);
    assert_eq!(absent.class_iou()[2], None);
    assert_eq!(absent.mean_iou(), 1.0);
}

#[test]
fn add_checks_labels() {
    let mut cm = ConfusionMatrix::new(2);
    cm.add_all(&[0, 1, 1], &[0, 1, 0]).unwrap();
    assert_eq!(cm.total(), 3);
    assert!(cm.add(2, 0).is_err());
    assert!(cm.add_all(&[0], &[0, 1]).is_err());
    assert!(cm.merge(&ConfusionMatrix::new(3)).is_err());
}

#[test]
fn instance_iou_examples() {
    let perfect = ShapePrediction { gt: vec![0, 0, 1], pred: vec![0, 0, 1], parts: vec![0, 1] };
    assert_eq!(instance_mean_iou(&[perfect.clone()]).unwrap(), 1.0);
    // Part 2 belongs to the category but appears nowhere.
    let absent = ShapePrediction { parts: vec![0, 1, 2], ..perfect.clone() };
    assert_eq!(instance_mean_iou(&[absent]).unwrap(), 1.0);
    // Part 1 keeps one of its three points; the other two go to a foreign label.
    let halved = ShapePrediction { gt: vec![0, 0, 1, 1, 1], pred: vec![0, 0, 1, 5, 5], parts: vec![0, 1] };
    let v = instance_mean_iou(&[halved.clone()]).unwrap();
    assert!((v - (1.0 + 1.0 / 3.0) / 2.0).abs() < 1e-15);
    let both = instance_mean_iou(&[perfect, halved]).unwrap();
    assert!((both - (1.0 + v) / 2.0).abs() < 1e-15);
}

fn random_cm(k: usize, pairs: &[(usize, usize)]) -> ConfusionMatrix {
    let mut cm = ConfusionMatrix::new(k);
    for &(g, p) in pairs {
        cm.add(g % k, p % k).unwrap();
    }
    cm
}

proptest! {
    #[test]
    fn metrics_lie_in_unit_interval(pairs in proptest::collection::vec((0usize..6, 0usize..6), 0..80)) {
        let cm = random_cm(6, &pairs);
        for m in [cm.overall_accuracy(), cm.mean_class_accuracy(), cm.mean_iou()] {
            prop_assert!((0.0..=1.0).contains(&m));
        }
        prop_assert_eq!(cm.total(), pairs.len() as u64);
    }

    #[test]
    fn metrics_invariant_under_relabeling(
        pairs in proptest::collection::vec((0usize..5, 0usize..5), 1..80),
        perm in Just((0..5).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let a = random_cm(5, &pairs);
        let relabeled: Vec<_> = pairs.iter().map(|&(g, p)| (perm[g], perm[p])).collect();
        let b = random_cm(5, &relabeled);
        prop_assert_eq!(a.overall_accuracy(), b.overall_accuracy());
        prop_assert!((a.mean_class_accuracy() - b.mean_class_accuracy()).abs() < 1e-12);
        prop_assert!((a.mean_iou() - b.mean_iou()).abs() < 1e-12);
    }

    #[test]
    fn merge_is_associative_and_commutative(
        x in proptest::collection::vec((0usize..4, 0usize..4), 0..30),
        y in proptest::collection::vec((0usize..4, 0usize..4), 0..30),
        z in proptest::collection::vec((0usize..4, 0usize..4), 0..30),
    ) {
        let (a, b, c) = (random_cm(4, &x), random_cm(4, &y), random_cm(4, &z));
        let mut left = a.clone();
        left.merge(&b).unwrap();
        left.merge(&c).unwrap();
        let mut right = c.clone();
        let mut ab = b.clone();
        ab.merge(&a).unwrap();
        right.merge(&ab).unwrap();
        prop_assert_eq!(left, right);
    }
}

fn tiny_model() -> Model {
    let mut cfg = ModelConfig::preset("pointnext-s", Task::Classification).unwrap();
    cfg.width = 8;
    cfg.k = 8;
    cfg.num_classes = 3;
    Model::build(cfg).unwrap()
}

fn one_cloud() -> crate::PointCloud {
    generate_synthetic(&SyntheticSpec { kind: SyntheticKind::Cls3, count: 1, points: 64, noise: 0.0, seed: 2, colors: ColorMode::Random })
        .unwrap()
        .remove(0)
}

#[test]
fn voting_with_unit_scale_is_a_plain_forward() {
    let m = tiny_model();
    let cloud = one_cloud();
    let single = m.predict(std::slice::from_ref(&cloud), 1).unwrap().remove(0);
    let voted = voting_eval(&m, &cloud, 10, (1.0, 1.0), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(voted.data(), single.data());
}

#[test]
fn voting_is_seeded() {
    let m = tiny_model();
    let cloud = one_cloud();
    let run = |seed| voting_eval(&m, &cloud, 4, (0.8, 1.2), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    assert_eq!(run(5).data(), run(5).data());
    assert_ne!(run(5).data(), run(6).data());
    // One vote is one scaled pass with the same draw.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let scaled = crate::augment::random_scale(&cloud, 0.8, 1.2, &mut rng).unwrap();
    let direct = m.predict(&[scaled], 1).unwrap().remove(0);
    assert_eq!(run(9).data().len(), direct.len());
    let one = voting_eval(&m, &cloud, 1, (0.8, 1.2), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    assert_eq!(one.data(), direct.data());
    assert!(voting_eval(&m, &cloud, 0, (1.0, 1.0), &mut rng).is_err());
}

#[test]
fn throughput_report_names_the_shape() {
    let m = tiny_model();
    let r = throughput_bench(&m, 2, 64, 1, 2, 2).unwrap();
    assert_eq!(r.shape, "2x64");
    assert_eq!((r.warmup, r.iters), (1, 2));
    assert!(r.mean > 0.0 && r.std >= 0.0);
    assert!(throughput_bench(&m, 0, 64, 0, 1, 1).is_err());
}
