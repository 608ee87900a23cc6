use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use braidkit::braid::build_interaction_graph;
use braidkit::metrics::{default_agents, Aggregate, SceneReport};
use braidkit::{Error, PredictionSet};
use clap::Args;
use serde::Serialize;

use super::{Context, Run, CHUNK};
use crate::batch::{display, expand_inputs, load_predictions, load_scene, par_map, write_csv};
use crate::manifest::write_atomic;
use crate::GraphArgs;

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Ground-truth scene files or directories
    #[arg(long, required = true, num_args = 1..)]
    pub scenes: Vec<PathBuf>,
    /// Candidate prediction files or directories, matched to scenes by scene_id
    #[arg(long, required = true, num_args = 1..)]
    pub predictions: Vec<PathBuf>,
    /// Baseline prediction files or directories
    #[arg(long, num_args = 1..)]
    pub baseline: Vec<PathBuf>,
    /// Also report the subset of scenes where BrSim_K improves over the baseline
    #[arg(long, requires = "baseline")]
    pub filter_improved: bool,
    /// Number of top modes evaluated
    #[arg(long, default_value_t = 6)]
    pub k: usize,
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Config {
    k: usize,
    delta: f64,
    max_neighbors: usize,
    baseline: bool,
    filter_improved: bool,
    jobs: usize,
}

#[derive(Serialize)]
struct AggregateFile<'a> {
    candidate: &'a Aggregate,
    #[serde(skip_serializing_if = "Option::is_none")]
    baseline: Option<&'a Aggregate>,
}

/// Prediction sets keyed by scene id. Duplicates and unreadable files are
/// recorded as failures.
fn index_predictions(paths: &[PathBuf], run: &mut Run) -> Result<BTreeMap<String, (PathBuf, PredictionSet)>> {
    let files = expand_inputs(paths)?;
    let loaded = par_map(&files, |p| load_predictions(p));
    let mut map = BTreeMap::new();
    for (p, res) in files.iter().zip(loaded) {
        run.input(p);
        match res {
            Ok(ps) => {
                let id = ps.scene_id().to_owned();
                if map.contains_key(&id) {
                    run.fail(display(p), &anyhow::anyhow!("duplicate predictions for scene {id}"));
                } else {
                    map.insert(id, (p.clone(), ps));
                }
            }
            Err(e) => run.fail(display(p), &e),
        }
    }
    Ok(map)
}

pub fn run(ctx: &Context, args: &EvaluateArgs) -> Result<usize> {
    if args.k == 0 {
        bail!("--k must be at least 1");
    }
    if !(args.graph.delta > 0.0) || args.graph.max_neighbors == 0 {
        bail!("--delta must be positive and --max-neighbors at least 1");
    }
    let with_baseline = !args.baseline.is_empty();
    let mut run = Run::new(
        "evaluate",
        Config {
            k: args.k,
            delta: args.graph.delta,
            max_neighbors: args.graph.max_neighbors,
            baseline: with_baseline,
            filter_improved: args.filter_improved,
            jobs: ctx.jobs,
        },
        None,
    )?;
    let cand = index_predictions(&args.predictions, &mut run)?;
    let base = if with_baseline {
        Some(index_predictions(&args.baseline, &mut run)?)
    } else {
        None
    };
    let files = expand_inputs(&args.scenes)?;
    std::fs::create_dir_all(&args.out)?;

    let mut reports: Vec<SceneReport> = Vec::new();
    let mut base_reports: Vec<SceneReport> = Vec::new();
    let mut matched = HashSet::new();
    for chunk in files.chunks(CHUNK) {
        let results = par_map(chunk, |p| -> Result<(SceneReport, Option<SceneReport>)> {
            let scene = load_scene(p)?;
            let id = scene.scene_id();
            let lookup = |m: &BTreeMap<String, (PathBuf, PredictionSet)>| -> Result<PredictionSet> {
                m.get(id)
                    .map(|(_, ps)| ps.clone())
                    .ok_or_else(|| Error::UnmatchedScene(id.to_owned()).into())
            };
            let preds = lookup(&cand)?;
            let graph = build_interaction_graph(&scene, args.graph.delta, args.graph.max_neighbors)?;
            let agents = default_agents(&scene);
            let report = SceneReport::compute(&scene, &preds, &graph, args.k, &agents)?;
            let b = match &base {
                Some(m) => Some(SceneReport::compute(&scene, &lookup(m)?, &graph, args.k, &agents)?),
                None => None,
            };
            Ok((report, b))
        });
        for (path, res) in chunk.iter().zip(results) {
            run.input(path);
            match res {
                Ok((r, b)) => {
                    if !matched.insert(r.scene_id.clone()) {
                        run.fail(display(path), &anyhow::anyhow!("duplicate scene id {}", r.scene_id));
                        continue;
                    }
                    reports.push(r);
                    base_reports.extend(b);
                }
                Err(e) => run.fail(display(path), &e),
            }
        }
    }
    for (id, (p, _)) in cand.iter().chain(base.iter().flatten()) {
        if !matched.contains(id) {
            run.fail(display(p), &anyhow::Error::new(Error::UnmatchedScene(id.clone())));
        }
    }

    write_reports(&mut run, &args.out, "", &reports, with_baseline.then_some(&base_reports[..]))?;
    if args.filter_improved {
        let keep: Vec<bool> = reports
            .iter()
            .zip(&base_reports)
            .map(|(c, b)| matches!((c.brsim_k, b.brsim_k), (Some(c), Some(b)) if c > b))
            .collect();
        let pick = |rs: &[SceneReport]| -> Vec<SceneReport> {
            rs.iter().zip(&keep).filter(|(_, k)| **k).map(|(r, _)| r.clone()).collect()
        };
        let (c, b) = (pick(&reports), pick(&base_reports));
        log::info!("{} of {} scenes improve BrSim_K over the baseline", c.len(), reports.len());
        write_reports(&mut run, &args.out, "_improved", &c, Some(&b))?;
    }
    run.finish(ctx, &args.out)
}

fn write_reports(
    run: &mut Run,
    out: &Path,
    suffix: &str,
    reports: &[SceneReport],
    baseline: Option<&[SceneReport]>,
) -> Result<()> {
    let per_scene = out.join(format!("per_scene{suffix}.csv"));
    write_csv(&per_scene, &SceneReport::CSV_HEADER, reports.iter().map(|r| r.csv_row()))?;
    run.output(&per_scene);
    if let Some(b) = baseline {
        let p = out.join(format!("per_scene{suffix}_baseline.csv"));
        write_csv(&p, &SceneReport::CSV_HEADER, b.iter().map(|r| r.csv_row()))?;
        run.output(&p);
    }
    let cand = Aggregate::from_reports(reports);
    let base = baseline.map(Aggregate::from_reports);
    let agg = out.join(format!("aggregate{suffix}.json"));
    let file = AggregateFile {
        candidate: &cand,
        baseline: base.as_ref(),
    };
    write_atomic(&agg, serde_json::to_string_pretty(&file)?.as_bytes())?;
    run.output(&agg);
    Ok(())
}
