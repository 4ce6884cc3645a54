use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use pointnext::blocks::gradient_suite;
use pointnext::data::read_dir;
use pointnext::metrics::{throughput_bench, voting_eval, ConfusionMatrix};
use pointnext::model::{Model, ModelConfig, Task};
use pointnext::training::{evaluate, fit, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

#[derive(Parser)]
#[command(name = "pnx", version, about = "Train, evaluate and inspect point-cloud networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Cls,
    Seg,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Task {
        match t {
            TaskArg::Cls => Task::Classification,
            TaskArg::Seg => Task::Segmentation,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train from a JSON config and write a checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Checkpoint path.
        #[arg(long, default_value = "model.pnxc")]
        out: PathBuf,
    },
    /// Score a checkpoint on a directory of labeled clouds.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Average logits over this many randomly scaled copies of every cloud.
        #[arg(long)]
        vote: Option<usize>,
        #[arg(long, default_value = "0.8,1.2", value_parser = parse_range)]
        scale: (f32, f32),
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        batch: usize,
    },
    /// Measure eval-mode throughput on random input.
    Bench {
        #[arg(long, default_value = "pointnext-s")]
        preset: String,
        #[arg(long, value_enum, default_value = "seg")]
        task: TaskArg,
        /// `<batch>x<points>`.
        #[arg(long, default_value = "128x1024", value_parser = parse_shape)]
        shape: (usize, usize),
        #[arg(long, default_value_t = 1)]
        warmup: usize,
        #[arg(long, default_value_t = 3)]
        iters: usize,
        /// Clouds per forward pass.
        #[arg(long, default_value_t = 16)]
        micro: usize,
    },
    /// Compare analytic and finite-difference gradients for every block type.
    Gradcheck {
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print a preset's per-stage points, widths, parameters and FLOPs.
    Info {
        #[arg(long)]
        preset: String,
        #[arg(long, value_enum, default_value = "seg")]
        task: TaskArg,
        #[arg(long, default_value_t = 1)]
        batch: usize,
        #[arg(long, default_value_t = 16384)]
        points: usize,
        /// Emit JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
}

fn parse_range(s: &str) -> Result<(f32, f32), String> {
    let (a, b) = s.split_once(',').ok_or("expected lo,hi")?;
    let lo: f32 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f32 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if !(lo > 0.0 && lo <= hi) {
        return Err("expected 0 < lo ≤ hi".into());
    }
    Ok((lo, hi))
}

fn parse_shape(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once('x').ok_or("expected <batch>x<points>")?;
    let batch = a.parse().map_err(|e| format!("{e}"))?;
    let points = b.parse().map_err(|e| format!("{e}"))?;
    Ok((batch, points))
}

fn metrics_json(task: Task, cm: &ConfusionMatrix) -> serde_json::Value {
    json!({
        "task": task,
        "count": cm.total(),
        "overall_accuracy": cm.overall_accuracy(),
        "mean_class_accuracy": cm.mean_class_accuracy(),
        "mean_iou": cm.mean_iou(),
    })
}

fn train(config: &Path, seed: Option<u64>, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let mut cfg = TrainConfig::from_json(&text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let base = config.parent().unwrap_or(Path::new("."));
    if let Some(log) = &cfg.log {
        cfg.log = Some(base.join(log));
    }
    let (train, val) = cfg.data.load(base)?;
    let mut model_cfg = cfg.model.resolve(cfg.task)?;
    if seed.is_some() {
        model_cfg.seed = cfg.seed;
    }
    let mut model = Model::build(model_cfg)?;
    eprintln!("training {} ({} params) on {} clouds, {} for validation", model.config.name, model.count_params(), train.len(), val.len());
    let report = fit(&mut model, &train, &val, &cfg)?;
    for e in &report.epochs {
        println!("{}", serde_json::to_string(e)?);
    }
    model.save(out).with_context(|| format!("writing {}", out.display()))?;
    eprintln!("saved {}", out.display());
    Ok(())
}

fn eval(model: &Path, data: &Path, vote: Option<usize>, scale: (f32, f32), seed: u64, batch: usize) -> Result<()> {
    let model = Model::load(model).with_context(|| format!("loading {}", model.display()))?;
    let clouds = read_dir(data)?;
    if clouds.is_empty() {
        bail!(pointnext::Error::Input(format!("no clouds in {}", data.display())));
    }
    let task = model.config.task;
    let cm = match vote {
        None => evaluate(&model, &clouds, batch)?,
        Some(n) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut cm = ConfusionMatrix::new(model.config.num_classes);
            for c in &clouds {
                let logits = voting_eval(&model, c, n, scale, &mut rng)?;
                let pred: Vec<usize> = (0..logits.rows())
                    .map(|r| {
                        let row = logits.row(r);
                        (0..row.len()).fold(0, |b, j| if row[j] > row[b] { j } else { b })
                    })
                    .collect();
                let gt: Vec<usize> = match task {
                    Task::Classification => vec![c.cloud_label().context("cloud without a class label")? as usize],
                    Task::Segmentation => c.point_labels().context("cloud without point labels")?.iter().map(|&l| l as usize).collect(),
                };
                cm.add_all(&gt, &pred)?;
            }
            cm
        }
    };
    println!("{}", serde_json::to_string_pretty(&metrics_json(task, &cm))?);
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Train { config, seed, out } => train(&config, seed, &out)?,
        Command::Eval { model, data, vote, scale, seed, batch } => eval(&model, &data, vote, scale, seed, batch)?,
        Command::Bench { preset, task, shape, warmup, iters, micro } => {
            let model = Model::preset(&preset, task.into())?;
            let report = throughput_bench(&model, shape.0, shape.1, warmup, iters, micro)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Gradcheck { tol, seed } => {
            let mut ok = true;
            for case in gradient_suite(seed)? {
                let pass = case.report.passes(tol) && case.report.checked > 0;
                ok &= pass;
                println!(
                    "{:<20} {}  max rel error {:.2e}  checked {}  skipped {}",
                    case.name,
                    if pass { "ok  " } else { "FAIL" },
                    case.report.max_rel_error,
                    case.report.checked,
                    case.report.skipped.len()
                );
            }
            if !ok {
                eprintln!("gradient check failed at tolerance {tol:e}");
                return Ok(ExitCode::from(3));
            }
        }
        Command::Info { preset, task, batch, points, json } => {
            let cfg = ModelConfig::preset(&preset, task.into())?;
            let summary = Model::build(cfg)?.summary(batch, points);
            if json {
                println!("{}", serde_json::to_string_pretty(&summary)?);
            } else {
                print!("{}", summary.to_table());
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use pointnext::Error as E;
    match err.downcast_ref::<E>() {
        Some(E::Config(_)) | Some(E::Json(_)) => 2,
        Some(E::Numeric(_)) | Some(E::Diverged { .. }) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
