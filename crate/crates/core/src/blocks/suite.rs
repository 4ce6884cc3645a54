use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{FpBlock, GlobalBlock, Head, InvResMlp, Layer, SaBlock, SaSpec, StageFeatures};
use crate::autodiff::{check_store, GradCheckReport, Graph, ParamStore, Tape, Tensor, Var};
use crate::data::Point;
use crate::error::Result;
use crate::geometry::FpsStart;

/// Finite-difference result for one block type.
#[derive(Clone, Debug)]
pub struct SuiteCase {
    pub name: &'static str,
    pub report: GradCheckReport,
}

const POINTS: usize = 24;
const STEP: f64 = 1e-5;
const COORDS: usize = 16;

struct Toy {
    rng: ChaCha8Rng,
    pos: Vec<Point>,
    x: Vec<f64>,
}

impl Toy {
    fn new(seed: u64, channels: usize) -> Toy {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pos = (0..POINTS).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        let x = (0..POINTS * channels).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Toy { rng, pos, x }
    }

    fn weights(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.rng.gen_range(-1.0..1.0)).collect()
    }

    fn input(&self, t: &mut Tape<'_, f64>, channels: usize) -> Result<StageFeatures<Var>> {
        let v = t.input(Tensor::matrix(POINTS, channels, self.x.clone())?);
        Ok(StageFeatures { positions: vec![self.pos.clone()], features: v, stage: 0, radius: 0.7 })
    }
}

fn sa_spec(cin: usize, cout: usize, stride: usize) -> SaSpec {
    SaSpec { cin, cout, mlp_layers: 2, residual: true, stride, k: 6, radius: 0.7, normalize: true, fps: FpsStart::Index(0) }
}

/// Compares analytic and central-difference gradients of every block type on
/// 24-point toys in double precision. The objective is a fixed random projection of
/// the block output (or a loss, for the heads).
pub fn gradient_suite(seed: u64) -> Result<Vec<SuiteCase>> {
    let mut out = Vec::new();
    let mut case = |name: &'static str, report: GradCheckReport| out.push(SuiteCase { name, report });

    // Affine with bias, no normalization or activation.
    let mut toy = Toy::new(seed, 5);
    let mut store = ParamStore::<f64>::new();
    let layer = Layer::new(&mut store, "affine", 5, 4, false, false, &mut toy.rng);
    let c = toy.weights(POINTS * 4);
    case("affine", check_store(&mut store, |t| {
        let x = toy.input(t, 5)?;
        let y = layer.forward(t, &x.features)?;
        t.dot_const(&y, c.clone())
    }, STEP, None, seed)?);

    // Affine, batch normalization and ReLU.
    let mut store = ParamStore::<f64>::new();
    let layer = Layer::new(&mut store, "norm", 5, 4, true, true, &mut toy.rng);
    case("batch_norm", check_store(&mut store, |t| {
        let x = toy.input(t, 5)?;
        let y = layer.forward(t, &x.features)?;
        t.dot_const(&y, c.clone())
    }, STEP, None, seed)?);

    // Max over groups of 4 rows after an affine map.
    let mut store = ParamStore::<f64>::new();
    let layer = Layer::new(&mut store, "pre", 5, 3, false, false, &mut toy.rng);
    let c = toy.weights(POINTS / 4 * 3);
    case("max_reduce", check_store(&mut store, |t| {
        let x = toy.input(t, 5)?;
        let y = layer.forward(t, &x.features)?;
        let m = t.max_reduce(&y, 4)?;
        t.dot_const(&m, c.clone())
    }, STEP, None, seed)?);

    let mut toy = Toy::new(seed + 1, 4);
    let mut store = ParamStore::<f64>::new();
    let sa = SaBlock::new(&mut store, "sa", sa_spec(4, 6, 2), &mut toy.rng)?;
    let c = toy.weights(POINTS / 2 * 6);
    case("set_abstraction", check_store(&mut store, |t| {
        let x = toy.input(t, 4)?;
        let y = sa.forward(t, &x)?;
        t.dot_const(&y.features, c.clone())
    }, STEP, Some(COORDS), seed)?);

    let mut store = ParamStore::<f64>::new();
    let ir = InvResMlp::new(&mut store, "invres", 4, 2, 6, 0.7, true, &mut toy.rng);
    let c = toy.weights(POINTS * 4);
    case("inv_res_mlp", check_store(&mut store, |t| {
        let x = toy.input(t, 4)?;
        let y = ir.forward(t, &x)?;
        t.dot_const(&y.features, c.clone())
    }, STEP, Some(COORDS), seed)?);

    // Coarse level from a stride-4 set abstraction, propagated back to all points.
    let mut store = ParamStore::<f64>::new();
    let down = SaBlock::new(&mut store, "down", SaSpec { mlp_layers: 1, residual: false, ..sa_spec(4, 5, 4) }, &mut toy.rng)?;
    let fp = FpBlock::new(&mut store, "fp", 5, 4, 3, &mut toy.rng);
    let c = toy.weights(POINTS * 3);
    case("feature_propagation", check_store(&mut store, |t| {
        let fine = toy.input(t, 4)?;
        let coarse = down.forward(t, &fine)?;
        let y = fp.forward(t, &coarse, &fine)?;
        t.dot_const(&y.features, c.clone())
    }, STEP, Some(COORDS), seed)?);

    // Classification head: global pooling over two clouds, MLP with dropout, smoothed CE.
    let mut toy = Toy::new(seed + 2, 4);
    let mut store = ParamStore::<f64>::new();
    let global = GlobalBlock::new(&mut store, "global", 4, &mut toy.rng);
    let head = Head::new(&mut store, "cls", 4, &[6], 3, 0.5, &mut toy.rng);
    let half = POINTS / 2;
    case("classification_head", check_store(&mut store, |t| {
        let v = t.input(Tensor::matrix(POINTS, 4, toy.x.clone())?);
        let two = StageFeatures { positions: vec![toy.pos[..half].to_vec(), toy.pos[half..].to_vec()], features: v, stage: 3, radius: 0.7 };
        let pooled = global.forward(t, &two)?;
        let logits = head.forward(t, &pooled, &mut ChaCha8Rng::seed_from_u64(seed))?;
        t.cross_entropy(&logits, &[0, 2], 0.3, None)
    }, STEP, Some(COORDS), seed)?);

    // Segmentation head: per-point MLP and Poly-1 focal loss.
    let mut store = ParamStore::<f64>::new();
    let head = Head::new(&mut store, "seg", 4, &[4], 2, 0.0, &mut toy.rng);
    let targets: Vec<usize> = toy.pos.iter().map(|p| usize::from(p[2] >= 0.0)).collect();
    case("segmentation_head", check_store(&mut store, |t| {
        let x = toy.input(t, 4)?;
        let logits = head.forward(t, &x.features, &mut ChaCha8Rng::seed_from_u64(seed))?;
        t.poly_focal(&logits, &targets, 2.0, 0.25, 1.0, None)
    }, STEP, Some(COORDS), seed)?);

    Ok(out)
}
