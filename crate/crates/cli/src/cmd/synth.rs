use std::path::PathBuf;

use anyhow::{Context as _, Result};
use braidkit::io::scene_to_json;
use braidkit::synth::{generate, kind_seed, GeneratedScene, GridSpec, ScenarioKind, ScenarioTemplate};
use clap::Args;
use serde::{Deserialize, Serialize};

use super::{json_out, Context, Run};
use crate::batch::par_map;
use crate::manifest::write_atomic;

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// JSON file with generator settings; flags below override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated scenario kinds (default: all)
    #[arg(long, value_delimiter = ',')]
    pub kinds: Vec<String>,
    /// Scenes per kind
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Generator settings. Template fields apply to every kind.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub kinds: Vec<ScenarioKind>,
    pub scenes_per_kind: usize,
    pub seed: u64,
    pub speed_range: (f64, f64),
    pub lateral_offset_range: (f64, f64),
    pub crossing_time_fraction: (f64, f64),
    pub yield_informativeness: f64,
    pub grid: GridSpec,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let t = ScenarioTemplate::default();
        SynthConfig {
            kinds: ScenarioKind::ALL.to_vec(),
            scenes_per_kind: 100,
            seed: 0,
            speed_range: t.speed_range,
            lateral_offset_range: t.lateral_offset_range,
            crossing_time_fraction: t.crossing_time_fraction,
            yield_informativeness: t.yield_informativeness,
            grid: t.grid,
        }
    }
}

impl SynthConfig {
    fn template(&self, index: usize) -> ScenarioTemplate {
        ScenarioTemplate {
            kind: self.kinds[index],
            speed_range: self.speed_range,
            lateral_offset_range: self.lateral_offset_range,
            crossing_time_fraction: self.crossing_time_fraction,
            yield_informativeness: self.yield_informativeness,
            grid: self.grid,
            seed: kind_seed(self.seed, index),
        }
    }
}

pub fn load_config(args: &SynthArgs) -> Result<SynthConfig> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("invalid synth config {}", p.display()))?
        }
        None => SynthConfig::default(),
    };
    if !args.kinds.is_empty() {
        cfg.kinds = args.kinds.iter().map(|k| k.parse()).collect::<braidkit::Result<_>>()?;
    }
    if let Some(n) = args.n {
        cfg.scenes_per_kind = n;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    for i in 0..cfg.kinds.len() {
        cfg.template(i).validate()?;
    }
    Ok(cfg)
}

pub fn run(ctx: &Context, args: &SynthArgs) -> Result<usize> {
    let cfg = load_config(args)?;
    let mut run = Run::new("synth", &cfg, Some(cfg.seed))?;
    if let Some(p) = &args.config {
        run.input(p);
    }
    std::fs::create_dir_all(&args.out)?;
    let indices: Vec<usize> = (0..cfg.kinds.len()).collect();
    let batches = par_map(&indices, |&i| generate(&cfg.template(i), cfg.scenes_per_kind));
    for (i, res) in batches.into_iter().enumerate() {
        let scenes: Vec<GeneratedScene> = match res {
            Ok(s) => s,
            Err(e) => {
                run.fail(cfg.kinds[i].as_str(), &e.into());
                continue;
            }
        };
        for g in scenes {
            let id = g.scene.scene_id().to_owned();
            let scene_path = json_out(&args.out, "scenes", &id);
            write_atomic(&scene_path, scene_to_json(&g.scene).as_bytes())?;
            let expected_path = json_out(&args.out, "expected", &id);
            write_atomic(&expected_path, g.expected_json().as_bytes())?;
            run.output(&scene_path);
            run.output(&expected_path);
        }
    }
    run.finish(ctx, &args.out)
}
