use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::autodiff::{check_store, Eager, Graph, ParamStore, Tape, Tensor};
use crate::data::Point;
use crate::error::Error;
use crate::geometry::FpsStart;

fn cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point> {
    (0..n).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect()
}

fn feats(rng: &mut ChaCha8Rng, rows: usize, c: usize) -> Vec<f32> {
    (0..rows * c).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn spec(cin: usize, cout: usize, layers: usize, residual: bool, stride: usize) -> SaSpec {
    SaSpec { cin, cout, mlp_layers: layers, residual, stride, k: 8, radius: 0.6, normalize: true, fps: FpsStart::LowestPosition }
}

fn stage<V>(positions: Vec<Vec<Point>>, features: V) -> StageFeatures<V> {
    StageFeatures { positions, features, stage: 0, radius: 0.3 }
}

#[test]
fn sa_output_widths_and_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut store = ParamStore::<f32>::new();
    let pos = cloud(&mut rng, 64);
    let mut widths = vec![32];
    let mut blocks = Vec::new();
    for w in [64, 128, 256, 512] {
        let s = spec(*widths.last().unwrap(), w, 2, true, 2);
        let b = SaBlock::new(&mut store, "sa", s, &mut rng).unwrap();
        assert_eq!(b.param_count(), s.param_count().unwrap());
        blocks.push(b);
        widths.push(w);
    }
    let mut g = Eager::new(&store, false);
    let x = g.input(Tensor::matrix(64, 32, feats(&mut rng, 64, 32)).unwrap());
    let mut st = stage(vec![pos], x);
    for (b, w) in blocks.iter().zip(&widths[1..]) {
        st = b.forward(&mut g, &st).unwrap();
        assert_eq!(g.value(&st.features).cols(), *w);
        assert_eq!(g.value(&st.features).rows(), st.points());
    }
    assert_eq!(st.points(), 4);
    assert_eq!(st.stage, 4);
}

#[test]
fn sa_stride_larger_than_cloud_is_count_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut store = ParamStore::<f32>::new();
    let b = SaBlock::new(&mut store, "sa", spec(2, 4, 1, false, 8), &mut rng).unwrap();
    let mut g = Eager::new(&store, false);
    let x = g.input(Tensor::zeros(vec![4, 2]));
    assert!(matches!(b.forward(&mut g, &stage(vec![cloud(&mut rng, 4)], x)), Err(Error::Count { .. })));
    assert!(matches!(SaBlock::new(&mut store, "bad", spec(2, 4, 4, false, 1), &mut rng), Err(Error::Config(_))));
}

#[test]
fn sa_is_permutation_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut store = ParamStore::<f32>::new();
    let b = SaBlock::new(&mut store, "sa", spec(4, 16, 2, true, 4), &mut rng).unwrap();
    let pos = cloud(&mut rng, 64);
    let x = feats(&mut rng, 64, 4);
    let mut perm: Vec<usize> = (0..64).collect();
    for i in (1..64).rev() {
        perm.swap(i, rng.gen_range(0..=i));
    }
    let ppos: Vec<Point> = perm.iter().map(|&i| pos[i]).collect();
    let px: Vec<f32> = perm.iter().flat_map(|&i| x[i * 4..i * 4 + 4].to_vec()).collect();
    let mut g = Eager::new(&store, false);
    let a = g.input(Tensor::matrix(64, 4, x).unwrap());
    let pa = g.input(Tensor::matrix(64, 4, px).unwrap());
    let oa = b.forward(&mut g, &stage(vec![pos], a)).unwrap();
    let ob = b.forward(&mut g, &stage(vec![ppos], pa)).unwrap();
    assert_eq!(oa.positions, ob.positions);
    assert_eq!(g.value(&oa.features).data(), g.value(&ob.features).data());
}

#[test]
fn sa_degenerate_neighborhood_passes_features() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut store = ParamStore::<f32>::new();
    let mut s = spec(2, 2, 1, false, 1);
    s.k = 1;
    s.radius = 1e-3;
    let b = SaBlock::new(&mut store, "sa", s, &mut rng).unwrap();
    // Weight [I ; 0] keeps x and drops the Δp channels.
    store.tensor_mut(b.layers[0].w).data_mut().copy_from_slice(&[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let pos = cloud(&mut rng, 8);
    let x: Vec<f32> = (0..16).map(|i| i as f32 * 0.25).collect();
    let mut g = Eager::new(&store, false);
    let v = g.input(Tensor::matrix(8, 2, x.clone()).unwrap());
    let out = b.forward(&mut g, &stage(vec![pos.clone()], v)).unwrap();
    assert_eq!(out.positions[0], pos);
    let scale = 1.0 / (1.0f32 + 1e-5).sqrt();
    for (o, e) in g.value(&out.features).data().iter().zip(&x) {
        assert!((o - e * scale).abs() < 1e-6);
    }
}

#[test]
fn invres_zero_branch_is_relu_of_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut store = ParamStore::<f32>::new();
    let b = InvResMlp::new(&mut store, "ir", 8, 4, 8, 0.5, true, &mut rng);
    for l in [&b.local, &b.expand, &b.project] {
        store.tensor_mut(l.w).data_mut().fill(0.0);
    }
    let x = feats(&mut rng, 32, 8);
    let mut g = Eager::new(&store, true);
    let v = g.input(Tensor::matrix(32, 8, x.clone()).unwrap());
    let out = b.forward(&mut g, &stage(vec![cloud(&mut rng, 32)], v)).unwrap();
    let expect: Vec<f32> = x.iter().map(|v| v.max(0.0)).collect();
    assert_eq!(g.value(&out.features).data(), &expect[..]);
    assert_eq!(out.points(), 32);
}

#[test]
fn invres_count_and_width_check() {
    let c = 32;
    let expect = c * (c + 3 + 1) + c * 4 * c + 4 * c + 4 * c * c + c + 2 * (c + 4 * c + c);
    assert_eq!(InvResMlp::count(c, 4), expect);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut store = ParamStore::<f32>::new();
    let b = InvResMlp::new(&mut store, "ir", c, 4, 8, 0.5, true, &mut rng);
    assert_eq!(b.param_count(), expect);
    assert_eq!(store.count(), expect);
    let mut g = Eager::new(&store, false);
    let v = g.input(Tensor::zeros(vec![4, 16]));
    assert!(matches!(b.forward(&mut g, &stage(vec![cloud(&mut rng, 4)], v)), Err(Error::Dimension(_))));
}

#[test]
fn stem_shapes_and_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut store = ParamStore::<f32>::new();
    let stem = Layer::new(&mut store, "stem", 4, 32, true, true, &mut rng);
    assert_eq!(store.count(), 4 * 32 + 32 + 2 * 32);
    let x = feats(&mut rng, 10, 4);
    {
        let mut g = Eager::new(&store, true);
        let v = g.input(Tensor::matrix(10, 4, x.clone()).unwrap());
        let y = stem.forward(&mut g, &v).unwrap();
        assert_eq!(g.value(&y).shape(), &[10, 32]);
    }
    store.tensor_mut(stem.w).data_mut().fill(0.0);
    let mut g = Eager::new(&store, true);
    let v = g.input(Tensor::matrix(10, 4, x).unwrap());
    let y = stem.forward(&mut g, &v).unwrap();
    assert!(g.value(&y).data().iter().all(|&v| v == 0.0));
}

#[test]
fn fp_identity_levels_copy_features() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut store = ParamStore::<f32>::new();
    let fp = FpBlock::new(&mut store, "fp", 3, 2, 2, &mut rng);
    assert_eq!(fp.param_count(), FpBlock::count(3, 2, 2));
    let pos = cloud(&mut rng, 12);
    let mut g = Eager::new(&store, false);
    let cx = feats(&mut rng, 12, 3);
    let coarse = stage(vec![pos.clone()], g.input(Tensor::matrix(12, 3, cx.clone()).unwrap()));
    let fine = stage(vec![pos.clone()], g.input(Tensor::matrix(12, 2, feats(&mut rng, 12, 2)).unwrap()));
    let idx: Vec<u32> = (0..12).collect();
    let up = g.weighted_gather(&coarse.features, idx, vec![1.0; 12], 1).unwrap();
    assert_eq!(g.value(&up).data(), &cx[..]);
    let out = fp.forward(&mut g, &coarse, &fine).unwrap();
    assert_eq!(g.value(&out.features).shape(), &[12, 2]);
    let empty = stage(vec![Vec::new()], g.input(Tensor::zeros(vec![0, 3])));
    assert!(fp.forward(&mut g, &empty, &fine).is_err());
}

#[test]
fn head_pools_and_shapes() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut store = ParamStore::<f32>::new();
    let gb = GlobalBlock::new(&mut store, "global", 8, &mut rng);
    let head = Head::new(&mut store, "head", 8, &[16, 8], 5, 0.5, &mut rng);
    assert_eq!(head.param_count(), Head::count(8, &[16, 8], 5));
    let mut g = Eager::new(&store, false);
    let pos = cloud(&mut rng, 6);
    let x = feats(&mut rng, 6, 8);
    let v = g.input(Tensor::matrix(6, 8, x.clone()).unwrap());
    let pooled = gb.forward(&mut g, &stage(vec![pos.clone()], v)).unwrap();
    let logits = head.forward(&mut g, &pooled, &mut rng).unwrap();
    assert_eq!(g.value(&logits).shape(), &[1, 5]);
    let mut perm: Vec<usize> = (0..6).rev().collect();
    perm.swap(0, 3);
    let pp: Vec<Point> = perm.iter().map(|&i| pos[i]).collect();
    let px: Vec<f32> = perm.iter().flat_map(|&i| x[i * 8..i * 8 + 8].to_vec()).collect();
    let v2 = g.input(Tensor::matrix(6, 8, px).unwrap());
    let pooled2 = gb.forward(&mut g, &stage(vec![pp], v2)).unwrap();
    let logits2 = head.forward(&mut g, &pooled2, &mut rng).unwrap();
    assert_eq!(g.value(&logits).data(), g.value(&logits2).data());
    // One point: the pool is that point's row.
    let one = g.input(Tensor::matrix(1, 3, vec![1.0, -2.0, 3.0]).unwrap());
    assert_eq!(g.max_reduce(&one, 1).map(|v| g.value(&v).data().to_vec()).unwrap(), vec![1.0, -2.0, 3.0]);
}

#[test]
fn dropout_is_identity_in_eval_and_masks_in_training() {
    let store = ParamStore::<f32>::new();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut g = Eager::new(&store, false);
    let x = g.input(Tensor::full(vec![100, 10], 1.0));
    let y = dropout(&mut g, &x, 0.5, &mut rng).unwrap();
    assert_eq!(g.value(&y).data(), g.value(&x).data());
    let mut g = Eager::new(&store, true);
    let x = g.input(Tensor::full(vec![100, 10], 1.0));
    let y = dropout(&mut g, &x, 0.5, &mut rng).unwrap();
    let zeros = g.value(&y).data().iter().filter(|&&v| v == 0.0).count();
    assert!((400..600).contains(&zeros));
    assert!(g.value(&y).data().iter().all(|&v| v == 0.0 || v == 2.0));
}

#[test]
fn sa_invres_fp_stack_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut store = ParamStore::<f64>::new();
    let sa = SaBlock::new(&mut store, "sa", SaSpec { k: 4, ..spec(3, 6, 2, true, 4) }, &mut rng).unwrap();
    let ir = InvResMlp::new(&mut store, "ir", 6, 2, 4, 0.6, true, &mut rng);
    let fp = FpBlock::new(&mut store, "fp", 6, 3, 4, &mut rng);
    let pos = cloud(&mut rng, 16);
    let x: Vec<f64> = (0..48).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let c: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let report = check_store(
        &mut store,
        |t: &mut Tape<'_, f64>| {
            let v = t.input(Tensor::matrix(16, 3, x.clone())?);
            let fine = stage(vec![pos.clone()], v);
            let s1 = sa.forward(t, &fine)?;
            let s2 = ir.forward(t, &s1)?;
            let out = fp.forward(t, &s2, &fine)?;
            t.dot_const(&out.features, c.clone())
        },
        1e-5,
        Some(12),
        3,
    )
    .unwrap();
    assert!(report.passes(1e-3), "{report:?}");
    assert!(report.checked > 50);
}

#[test]
fn gradient_suite_passes_for_every_block() {
    let cases = gradient_suite(1).unwrap();
    assert_eq!(cases.len(), 8);
    for c in &cases {
        assert!(c.report.passes(1e-3) && c.report.checked > 0, "{}: {:?}", c.name, c.report);
        assert!(c.report.skipped.len() * 4 <= c.report.checked, "{}: {:?}", c.name, c.report);
    }
}
