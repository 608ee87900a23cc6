use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use serde::Serialize;

use super::{Context, Run};
use crate::batch::{display, write_csv};
use crate::manifest::RunManifest;

pub const HEADER: [&str; 5] = ["run", "command", "epoch", "metric", "value"];

#[derive(Serialize)]
struct Config {
    runs: usize,
}

type Row = [String; 5];

fn row(run: &str, command: &str, epoch: Option<&str>, metric: &str, value: impl ToString) -> Row {
    [
        run.to_owned(),
        command.to_owned(),
        epoch.unwrap_or("").to_owned(),
        metric.to_owned(),
        value.to_string(),
    ]
}

/// Every numeric field of a JSON object, flattened with dotted names.
fn json_rows(rows: &mut Vec<Row>, run: &str, command: &str, prefix: &str, v: &serde_json::Value) {
    match v {
        serde_json::Value::Object(m) => {
            for (k, v) in m {
                let name = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                json_rows(rows, run, command, &name, v);
            }
        }
        serde_json::Value::Number(n) => rows.push(row(run, command, None, prefix, n)),
        _ => {}
    }
}

/// Long-format rows of a CSV whose first column is the epoch (or row key).
fn csv_rows(rows: &mut Vec<Row>, run: &str, command: &str, path: &Path, key_is_epoch: bool) -> Result<()> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let header = r.headers()?.clone();
    for rec in r.records() {
        let rec = rec?;
        let key = rec.get(0).unwrap_or("");
        for (name, value) in header.iter().zip(rec.iter()).skip(1) {
            if value.is_empty() || value.parse::<f64>().is_err() {
                continue;
            }
            if key_is_epoch {
                rows.push(row(run, command, Some(key), name, value));
            } else {
                rows.push(row(run, command, None, &format!("{key}.{name}"), value));
            }
        }
    }
    Ok(())
}

fn collect(dir: &Path) -> Result<Vec<Row>> {
    let text = std::fs::read_to_string(dir.join("manifest.json"))
        .with_context(|| format!("{} has no readable manifest.json", dir.display()))?;
    let m: RunManifest = serde_json::from_str(&text).with_context(|| format!("invalid manifest in {}", dir.display()))?;
    let run = display(dir);
    let cmd = m.command.as_str();
    let mut rows = vec![row(&run, cmd, None, "failures", m.failures.len())];
    match cmd {
        "train-toy" => {
            csv_rows(&mut rows, &run, cmd, &dir.join("trace.csv"), true)?;
            json_rows(&mut rows, &run, cmd, "eval", &read_json(&dir.join("aggregate.json"))?);
        }
        "evaluate" => {
            for name in ["aggregate", "aggregate_improved"] {
                let p = dir.join(format!("{name}.json"));
                if p.exists() {
                    json_rows(&mut rows, &run, cmd, name, &read_json(&p)?);
                }
            }
        }
        "label" => {
            // only the TOTAL row; per-scene counts stay in label_summary.csv
            let mut all = Vec::new();
            csv_rows(&mut all, &run, cmd, &dir.join("label_summary.csv"), false)?;
            rows.extend(all.into_iter().filter(|r| r[3].starts_with("TOTAL.")));
        }
        _ => rows.push(row(&run, cmd, None, "outputs", m.outputs.len())),
    }
    Ok(rows)
}

fn read_json(p: &Path) -> Result<serde_json::Value> {
    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn run(ctx: &Context, runs: &[PathBuf], out: &Path) -> Result<usize> {
    if runs.is_empty() {
        bail!("no run directories given");
    }
    let mut run = Run::new("report", Config { runs: runs.len() }, None)?;
    let mut rows = Vec::new();
    for dir in runs {
        run.input(dir);
        match collect(dir) {
            Ok(r) => rows.extend(r),
            Err(e) => run.fail(display(dir), &e),
        }
    }
    std::fs::create_dir_all(out)?;
    let dest = out.join("report.csv");
    write_csv(&dest, &HEADER, rows)?;
    run.output(&dest);
    run.finish(ctx, out)
}
