use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use braidkit::braid::build_interaction_graph;
use braidkit::InteractionGraph;
use serde::Serialize;

use super::{json_out, Context, Run, CHUNK};
use crate::batch::{display, expand_inputs, load_scene, par_map, write_csv};
use crate::manifest::write_atomic;
use crate::GraphArgs;

pub const SUMMARY_HEADER: [&str; 7] = ["scene_id", "input", "num_agents", "num_edges", "below", "over", "no_crossing"];

#[derive(Serialize)]
struct Config {
    delta: f64,
    max_neighbors: usize,
    jobs: usize,
}

pub fn run(ctx: &Context, scenes: &[PathBuf], args: &GraphArgs, out: &Path) -> Result<usize> {
    if !(args.delta > 0.0) || args.max_neighbors == 0 {
        bail!("--delta must be positive and --max-neighbors at least 1");
    }
    let mut run = Run::new(
        "label",
        Config {
            delta: args.delta,
            max_neighbors: args.max_neighbors,
            jobs: ctx.jobs,
        },
        None,
    )?;
    let files = expand_inputs(scenes)?;
    std::fs::create_dir_all(out)?;
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut totals = [0usize; 5];
    let mut seen = HashSet::new();
    for chunk in files.chunks(CHUNK) {
        let results = par_map(chunk, |p| -> Result<(usize, InteractionGraph)> {
            let scene = load_scene(p)?;
            Ok((scene.agents().len(), build_interaction_graph(&scene, args.delta, args.max_neighbors)?))
        });
        for (path, res) in chunk.iter().zip(results) {
            run.input(path);
            let (n_agents, graph) = match res {
                Ok(v) => v,
                Err(e) => {
                    run.fail(display(path), &e);
                    continue;
                }
            };
            if !seen.insert(graph.scene_id.clone()) {
                run.fail(display(path), &anyhow::anyhow!("duplicate scene id {}", graph.scene_id));
                continue;
            }
            let dest = json_out(out, "graphs", &graph.scene_id);
            write_atomic(&dest, graph.to_json().as_bytes())?;
            run.output(&dest);
            let c = graph.class_counts();
            for (t, v) in totals.iter_mut().zip([n_agents, graph.edges.len(), c[0], c[1], c[2]]) {
                *t += v;
            }
            rows.push(vec![
                graph.scene_id.clone(),
                display(path),
                n_agents.to_string(),
                graph.edges.len().to_string(),
                c[0].to_string(),
                c[1].to_string(),
                c[2].to_string(),
            ]);
        }
    }
    if !rows.is_empty() {
        let mut total = vec!["TOTAL".to_owned(), String::new()];
        total.extend(totals.iter().map(|v| v.to_string()));
        rows.push(total);
    }
    let summary = out.join("label_summary.csv");
    write_csv(&summary, &SUMMARY_HEADER, rows)?;
    run.output(&summary);
    run.finish(ctx, out)
}
