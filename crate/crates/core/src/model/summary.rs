use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{BlockKind, Model, ModelConfig, Network, Task};
use crate::blocks::{FpBlock, GlobalBlock, Head, InvResMlp, Layer, SaSpec};
use crate::error::Result;

/// Parameter count derived from the configuration alone, without building anything.
pub fn analytic_param_count(cfg: &ModelConfig) -> Result<usize> {
    cfg.validate()?;
    let widths = cfg.stage_widths();
    let layers = cfg.effective_sa_layers();
    let residual = cfg.effective_sa_residual();
    let spec = |cin, cout, stride| SaSpec {
        cin,
        cout,
        mlp_layers: layers,
        residual,
        stride,
        k: cfg.k,
        radius: cfg.radius,
        normalize: cfg.normalize_dp,
        fps: cfg.fps_start,
    };
    let mut n = if cfg.stem { Layer::count(cfg.features.width(), cfg.width, true) } else { 0 };
    let mut cin = cfg.level0_width();
    for i in 0..4 {
        let c = widths[i];
        n += spec(cin, c, cfg.strides[i]).param_count()?;
        let per_block = match cfg.block_kind {
            BlockKind::InvResMlp => InvResMlp::count(c, cfg.expansion),
            BlockKind::SetAbstraction => spec(c, c, 1).param_count()?,
        };
        n += cfg.blocks[i] * per_block;
        cin = c;
    }
    match cfg.task {
        Task::Classification => {
            n += GlobalBlock::count(widths[3]) + Head::count(widths[3], &[512, 256], cfg.num_classes);
        }
        Task::Segmentation => {
            let skip = [cfg.level0_width(), widths[0], widths[1], widths[2]];
            let out = [cfg.width, widths[0], widths[1], widths[2]];
            for i in 0..4 {
                let coarse = if i == 3 { widths[3] } else { out[i + 1] };
                n += FpBlock::count(coarse, skip[i], out[i]);
            }
            n += Head::count(cfg.width, &[cfg.width], cfg.num_classes);
        }
    }
    Ok(n)
}

/// One row of the per-stage table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRow {
    pub name: String,
    pub points: usize,
    pub channels: usize,
    pub radius: Option<f32>,
    pub params: usize,
    pub flops: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub name: String,
    pub task: Task,
    pub params: usize,
    /// Affine-layer FLOPs (2 per multiply-add) for `shape`.
    pub flops: u64,
    pub shape: String,
    pub stages: Vec<StageRow>,
}

impl Network {
    fn rows(&self, cfg: &ModelConfig, points: usize) -> Vec<StageRow> {
        let mut rows = Vec::new();
        if let Some(s) = &self.stem {
            rows.push(StageRow {
                name: "stem".into(),
                points,
                channels: s.cout,
                radius: None,
                params: s.param_count(),
                flops: 2 * s.macs(points),
            });
        }
        let mut p = points;
        let mut level_points = Vec::new();
        for (i, st) in self.stages.iter().enumerate() {
            level_points.push(p);
            let mut macs = st.sa.macs(p);
            p /= st.sa.stride;
            macs += st.blocks.iter().map(|b| b.macs(p)).sum::<u64>();
            rows.push(StageRow {
                name: format!("stage{}", i + 1),
                points: p,
                channels: st.sa.cout,
                radius: Some(st.sa.radius),
                params: st.param_count(),
                flops: 2 * macs,
            });
        }
        if let Some(gb) = &self.global {
            rows.push(StageRow {
                name: "global".into(),
                points: 1,
                channels: self.stages[3].sa.cout,
                radius: None,
                params: gb.param_count(),
                flops: 2 * gb.macs(p),
            });
        }
        for (i, fp) in self.decoder.iter().enumerate().rev() {
            rows.push(StageRow {
                name: format!("decoder{i}"),
                points: level_points[i],
                channels: fp.out,
                radius: None,
                params: fp.param_count(),
                flops: 2 * fp.macs(level_points[i]),
            });
        }
        let head_rows = if cfg.task == Task::Classification { 1 } else { points };
        rows.push(StageRow {
            name: "head".into(),
            points: head_rows,
            channels: cfg.num_classes,
            radius: None,
            params: self.head.param_count(),
            flops: 2 * self.head.macs(head_rows),
        });
        rows
    }
}

impl Model {
    /// Affine-layer FLOPs (2 per multiply-add) for `batch` clouds of `points` points.
    /// Normalization, activations, pooling and spatial queries are not counted.
    pub fn estimate_flops(&self, batch: usize, points: usize) -> u64 {
        batch as u64 * self.net.rows(&self.config, points).iter().map(|r| r.flops).sum::<u64>()
    }

    pub fn summary(&self, batch: usize, points: usize) -> ModelSummary {
        ModelSummary {
            name: self.config.name.clone(),
            task: self.config.task,
            params: self.count_params(),
            flops: self.estimate_flops(batch, points),
            shape: format!("{batch}x{points}"),
            stages: self.net.rows(&self.config, points),
        }
    }
}

impl ModelSummary {
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} ({:?}), input {}", self.name, self.task, self.shape);
        let _ = writeln!(s, "{:<10} {:>8} {:>9} {:>8} {:>12} {:>14}", "block", "points", "channels", "radius", "params", "flops/cloud");
        for r in &self.stages {
            let radius = r.radius.map_or("-".to_string(), |v| format!("{v:.3}"));
            let _ = writeln!(s, "{:<10} {:>8} {:>9} {:>8} {:>12} {:>14}", r.name, r.points, r.channels, radius, r.params, r.flops);
        }
        let _ = writeln!(s, "total params {:.3} M, FLOPs {:.3} G", self.params as f64 / 1e6, self.flops as f64 / 1e9);
        s
    }
}
