use std::path::PathBuf;

use anyhow::{bail, Context as _, Result};
use braidkit::multitask::{train_toy, EpochRecord, TrainerConfig};
use braidkit::synth::{generate_mixed, GridSpec, ScenarioKind};
use braidkit::Scene;
use clap::Args;
use serde::Serialize;

use super::{Context, Run};
use crate::batch::{display, expand_inputs, load_scene, par_map};
use crate::manifest::write_atomic;

/// First line of trace.csv.
pub const TRACE_NOTE: &str = "# loss_total = winner-takes-all joint squared error (m^2) \
+ mode cross-entropy + lambda * weighted braid cross-entropy at the best joint mode pair; \
all are training surrogates, metrics are on the held-out split";

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// TrainerConfig JSON; flags below override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scene files or directories; without it a synthetic dataset is generated
    #[arg(long, num_args = 1..)]
    pub data: Vec<PathBuf>,
    /// Synthetic scenes per kind when --data is absent
    #[arg(long, default_value_t = 100)]
    pub scenes_per_kind: usize,
    /// Comma-separated scenario kinds when --data is absent (default: all)
    #[arg(long, value_delimiter = ',')]
    pub kinds: Vec<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Config<'a> {
    trainer: &'a TrainerConfig,
    data: &'a str,
    scenes_per_kind: Option<usize>,
    kinds: Option<Vec<&'static str>>,
}

pub fn load_config(args: &TrainArgs) -> Result<TrainerConfig> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("invalid trainer config {}", p.display()))?
        }
        None => TrainerConfig::default(),
    };
    if let Some(l) = args.lambda {
        cfg.lambda = l;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(e) = args.epochs {
        cfg.epochs = e;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(ctx: &Context, args: &TrainArgs) -> Result<usize> {
    let cfg = load_config(args)?;
    let synthetic = args.data.is_empty();
    let kinds: Vec<ScenarioKind> = if args.kinds.is_empty() {
        ScenarioKind::ALL.to_vec()
    } else {
        args.kinds.iter().map(|k| k.parse()).collect::<braidkit::Result<_>>()?
    };
    let mut run = Run::new(
        "train-toy",
        Config {
            trainer: &cfg,
            data: if synthetic { "synthetic" } else { "files" },
            scenes_per_kind: synthetic.then_some(args.scenes_per_kind),
            kinds: synthetic.then(|| kinds.iter().map(|k| k.as_str()).collect()),
        },
        Some(cfg.seed),
    )?;
    if let Some(p) = &args.config {
        run.input(p);
    }

    let scenes: Vec<Scene> = if synthetic {
        generate_mixed(&kinds, args.scenes_per_kind, cfg.seed, GridSpec::default())?
            .into_iter()
            .map(|g| g.scene)
            .collect()
    } else {
        let files = expand_inputs(&args.data)?;
        let loaded = par_map(&files, |p| load_scene(p));
        let mut scenes = Vec::new();
        for (p, res) in files.iter().zip(loaded) {
            run.input(p);
            match res {
                Ok(s) => scenes.push(s),
                Err(e) => run.fail(display(p), &e),
            }
        }
        scenes
    };
    if scenes.len() < 2 {
        bail!("need at least two scenes to train and evaluate, got {}", scenes.len());
    }
    log::info!("training on {} scenes", scenes.len());
    let outcome = train_toy(&scenes, &cfg)?;

    std::fs::create_dir_all(&args.out)?;
    let trace = args.out.join("trace.csv");
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(EpochRecord::CSV_HEADER)?;
    for r in &outcome.trace {
        w.write_record(r.csv_row())?;
    }
    let mut bytes = format!("{TRACE_NOTE}\n").into_bytes();
    bytes.extend(w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?);
    write_atomic(&trace, &bytes)?;
    run.output(&trace);

    let model = args.out.join("model.json");
    write_atomic(&model, serde_json::to_string(&outcome.model)?.as_bytes())?;
    run.output(&model);
    let agg = args.out.join("aggregate.json");
    write_atomic(&agg, serde_json::to_string_pretty(&outcome.eval)?.as_bytes())?;
    run.output(&agg);
    run.finish(ctx, &args.out)
}
