use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use braidkit::{PredictionSet, Scene};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// A per-item failure; the run continues and exits nonzero.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Failure {
    pub input: String,
    pub code: String,
    pub message: String,
}

impl Failure {
    pub fn new(input: impl Into<String>, err: &anyhow::Error) -> Self {
        let f = Failure {
            input: input.into(),
            code: error_code(err).to_owned(),
            message: format!("{err:#}"),
        };
        log::error!("{}: {}", f.input, f.message);
        f
    }
}

pub fn error_code(err: &anyhow::Error) -> &'static str {
    if let Some(e) = err.downcast_ref::<braidkit::Error>() {
        e.code()
    } else if err.downcast_ref::<std::io::Error>().is_some() {
        "io"
    } else {
        "error"
    }
}

/// Files as given; directories expand to their `*.json` entries, sorted.
pub fn expand_inputs(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| format!("reading {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|e| e.is_file() && e.extension().is_some_and(|x| x == "json"))
                .collect();
            entries.sort();
            out.extend(entries);
        } else if p.is_file() {
            out.push(p.clone());
        } else {
            bail!("input {} does not exist", p.display());
        }
    }
    Ok(out)
}

pub fn load_scene(path: &Path) -> Result<Scene> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(braidkit::io::scene_from_json(&text)?)
}

pub fn load_predictions(path: &Path) -> Result<PredictionSet> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(braidkit::io::predictions_from_json(&text)?)
}

/// Maps in parallel on the current pool, keeping input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    items.par_iter().map(f).collect()
}

/// A file-name-safe form of a scene id.
pub fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

pub fn display(p: &Path) -> String {
    p.display().to_string()
}

/// Writes CSV rows through [`crate::manifest::write_atomic`].
pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
    crate::manifest::write_atomic(path, &bytes)
}
