use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Batch, BlockKind, ModelConfig, Task};
use crate::autodiff::{Eager, Graph, ParamStore, Real, Tensor};
use crate::blocks::{FpBlock, GlobalBlock, Head, InvResMlp, Layer, SaBlock, SaSpec, StageFeatures};
use crate::error::{Error, Result};

/// A stride-1 block stacked after a stage's set abstraction.
#[derive(Clone, Debug)]
pub enum DepthBlock {
    InvRes(InvResMlp),
    Sa(SaBlock),
}

impl DepthBlock {
    pub fn param_count(&self) -> usize {
        match self {
            DepthBlock::InvRes(b) => b.param_count(),
            DepthBlock::Sa(b) => b.param_count(),
        }
    }

    pub fn macs(&self, points: usize) -> u64 {
        match self {
            DepthBlock::InvRes(b) => b.macs(points),
            DepthBlock::Sa(b) => b.macs(points),
        }
    }

    fn forward<T: Real, G: Graph<T>>(&self, g: &mut G, x: &StageFeatures<G::Var>) -> Result<StageFeatures<G::Var>> {
        match self {
            DepthBlock::InvRes(b) => b.forward(g, x),
            DepthBlock::Sa(b) => b.forward(g, x),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EncoderStage {
    pub sa: SaBlock,
    pub blocks: Vec<DepthBlock>,
}

impl EncoderStage {
    pub fn param_count(&self) -> usize {
        self.sa.param_count() + self.blocks.iter().map(DepthBlock::param_count).sum::<usize>()
    }
}

/// Parameter layout of a full model. The values live in a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Network {
    pub stem: Option<Layer>,
    pub stages: Vec<EncoderStage>,
    /// `decoder[i]` lifts level `i + 1` onto level `i` (segmentation only).
    pub decoder: Vec<FpBlock>,
    /// Classification only.
    pub global: Option<GlobalBlock>,
    pub head: Head,
}

fn sa_spec(cfg: &ModelConfig, cin: usize, cout: usize, stride: usize, radius: f32, layers: usize, residual: bool) -> SaSpec {
    SaSpec { cin, cout, mlp_layers: layers, residual, stride, k: cfg.k, radius, normalize: cfg.normalize_dp, fps: cfg.fps_start }
}

fn head_hidden(cfg: &ModelConfig) -> Vec<usize> {
    match cfg.task {
        Task::Classification => vec![512, 256],
        Task::Segmentation => vec![cfg.width],
    }
}

impl Network {
    pub fn build<T: Real>(cfg: &ModelConfig, store: &mut ParamStore<T>, rng: &mut impl Rng) -> Result<Network> {
        cfg.validate()?;
        let stem = cfg.stem.then(|| Layer::new(store, "stem", cfg.features.width(), cfg.width, true, true, rng));
        let widths = cfg.stage_widths();
        let radii = cfg.stage_radii();
        let layers = cfg.effective_sa_layers();
        let residual = cfg.effective_sa_residual();
        let mut cin = cfg.level0_width();
        let mut stages = Vec::new();
        for i in 0..4 {
            let cout = widths[i];
            let spec = sa_spec(cfg, cin, cout, cfg.strides[i], radii[i], layers, residual);
            let sa = SaBlock::new(store, &format!("enc{i}.sa"), spec, rng)?;
            let mut blocks = Vec::new();
            for j in 0..cfg.blocks[i] {
                let name = format!("enc{i}.block{j}");
                blocks.push(match cfg.block_kind {
                    BlockKind::InvResMlp => {
                        DepthBlock::InvRes(InvResMlp::new(store, &name, cout, cfg.expansion, cfg.k, radii[i], cfg.normalize_dp, rng))
                    }
                    BlockKind::SetAbstraction => {
                        let spec = sa_spec(cfg, cout, cout, 1, radii[i], layers, residual);
                        DepthBlock::Sa(SaBlock::new(store, &name, spec, rng)?)
                    }
                });
            }
            stages.push(EncoderStage { sa, blocks });
            cin = cout;
        }
        let (decoder, global, head) = match cfg.task {
            Task::Classification => {
                let global = GlobalBlock::new(store, "global", widths[3], rng);
                let head = Head::new(store, "head", widths[3], &head_hidden(cfg), cfg.num_classes, cfg.dropout, rng);
                (Vec::new(), Some(global), head)
            }
            Task::Segmentation => {
                let skip = [cfg.level0_width(), widths[0], widths[1], widths[2]];
                let out = [cfg.width, widths[0], widths[1], widths[2]];
                let mut decoder: Vec<FpBlock> = Vec::new();
                for i in (0..4).rev() {
                    let coarse = if i == 3 { widths[3] } else { out[i + 1] };
                    decoder.push(FpBlock::new(store, &format!("dec{i}"), coarse, skip[i], out[i], rng));
                }
                decoder.reverse();
                let head = Head::new(store, "head", cfg.width, &head_hidden(cfg), cfg.num_classes, cfg.dropout, rng);
                (decoder, None, head)
            }
        };
        Ok(Network { stem, stages, decoder, global, head })
    }

    /// Trainable scalars, summed block by block.
    pub fn param_count(&self) -> usize {
        self.stem.as_ref().map_or(0, Layer::param_count)
            + self.stages.iter().map(EncoderStage::param_count).sum::<usize>()
            + self.decoder.iter().map(FpBlock::param_count).sum::<usize>()
            + self.global.as_ref().map_or(0, GlobalBlock::param_count)
            + self.head.param_count()
    }

    /// Logits: `[batch, classes]` for classification, `[batch · points, classes]` for segmentation.
    pub fn forward<T: Real, G: Graph<T>>(&self, g: &mut G, batch: &Batch, rng: &mut impl Rng) -> Result<G::Var> {
        let x = g.input(batch.features.cast());
        let x = match &self.stem {
            Some(s) => s.forward(g, &x)?,
            None => x,
        };
        let mut level = StageFeatures { positions: batch.positions.clone(), features: x, stage: 0, radius: 0.0 };
        let mut levels = Vec::with_capacity(5);
        for st in &self.stages {
            let mut next = st.sa.forward(g, &level)?;
            for b in &st.blocks {
                next = b.forward(g, &next)?;
            }
            levels.push(level);
            level = next;
        }
        if let Some(global) = &self.global {
            let pooled = global.forward(g, &level)?;
            return self.head.forward(g, &pooled, rng);
        }
        for (fp, fine) in self.decoder.iter().zip(&levels).rev() {
            level = fp.forward(g, &level, fine)?;
        }
        self.head.forward(g, &level.features, rng)
    }
}

/// A network together with its configuration and parameter values.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub net: Network,
    pub store: ParamStore<f32>,
}

impl Model {
    pub fn build(config: ModelConfig) -> Result<Model> {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let net = Network::build(&config, &mut store, &mut rng)?;
        Ok(Model { config, net, store })
    }

    pub fn preset(name: &str, task: Task) -> Result<Model> {
        Self::build(ModelConfig::preset(name, task)?)
    }

    pub fn count_params(&self) -> usize {
        self.store.count()
    }

    /// Eval-mode logits per cloud, in micro-batches of `micro` clouds: `[1, classes]` for
    /// classification, `[points, classes]` for segmentation.
    pub fn predict(&self, clouds: &[crate::data::PointCloud], micro: usize) -> Result<Vec<Tensor<f32>>> {
        let mut out = Vec::with_capacity(clouds.len());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for chunk in clouds.chunks(micro.max(1)) {
            let batch = Batch::from_clouds(chunk, &self.config.features, &mut rng)?;
            let mut g = Eager::new(&self.store, false);
            let v = self.net.forward(&mut g, &batch, &mut rng)?;
            let logits = g.into_tensor(v);
            let k = logits.cols();
            match self.config.task {
                Task::Classification => {
                    for r in 0..chunk.len() {
                        out.push(Tensor::matrix(1, k, logits.row(r).to_vec())?);
                    }
                }
                Task::Segmentation => {
                    let p = batch.points();
                    for (s, &n) in batch.sizes.iter().enumerate() {
                        let rows = logits.data()[s * p * k..(s * p + n) * k].to_vec();
                        out.push(Tensor::matrix(n, k, rows)?);
                    }
                }
            }
        }
        if out.len() != clouds.len() {
            return Err(Error::Contract("prediction count mismatch".into()));
        }
        Ok(out)
    }
}
