use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use braidkit::{extract_braid_word, free_reduce, AgentId, BraidWord, ReferenceFrame};
use serde::Serialize;

use super::{json_out, Context, Run, CHUNK};
use crate::batch::{display, expand_inputs, load_scene, par_map};
use crate::manifest::write_atomic;

#[derive(Debug, Clone, PartialEq)]
pub enum FrameSpec {
    Scene,
    Agent(AgentId),
}

impl FrameSpec {
    pub fn parse(s: &str) -> Result<Self> {
        if s == "scene" {
            return Ok(FrameSpec::Scene);
        }
        match s.strip_prefix("agent:") {
            Some(id) if !id.is_empty() => Ok(FrameSpec::Agent(AgentId::new(id))),
            _ => bail!("--frame must be `scene` or `agent:<id>`, got `{s}`"),
        }
    }

    fn label(&self) -> String {
        match self {
            FrameSpec::Scene => "scene".into(),
            FrameSpec::Agent(id) => format!("agent:{id}"),
        }
    }
}

#[derive(Serialize)]
struct Config<'a> {
    frame: &'a str,
    raw: bool,
    jobs: usize,
}

#[derive(Serialize)]
struct WordFile<'a> {
    scene_id: &'a str,
    frame: String,
    free_reduced: bool,
    #[serde(flatten)]
    braid: &'a BraidWord,
}

pub fn run(ctx: &Context, scenes: &[PathBuf], frame: &str, raw: bool, out: &Path) -> Result<usize> {
    let spec = FrameSpec::parse(frame)?;
    let mut run = Run::new(
        "braid-word",
        Config {
            frame,
            raw,
            jobs: ctx.jobs,
        },
        None,
    )?;
    let files = expand_inputs(scenes)?;
    std::fs::create_dir_all(out)?;
    let mut seen = HashSet::new();
    for chunk in files.chunks(CHUNK) {
        let results = par_map(chunk, |p| -> Result<(String, BraidWord)> {
            let scene = load_scene(p)?;
            let f = match &spec {
                FrameSpec::Scene => ReferenceFrame::IDENTITY,
                FrameSpec::Agent(id) => scene.frame_of_agent(id)?,
            };
            let word = extract_braid_word(&scene, &f)?;
            let word = if raw { word } else { free_reduce(&word) };
            Ok((scene.scene_id().to_owned(), word))
        });
        for (path, res) in chunk.iter().zip(results) {
            run.input(path);
            let (id, word) = match res {
                Ok(v) => v,
                Err(e) => {
                    run.fail(display(path), &e);
                    continue;
                }
            };
            if !seen.insert(id.clone()) {
                run.fail(display(path), &anyhow::anyhow!("duplicate scene id {id}"));
                continue;
            }
            let file = WordFile {
                scene_id: &id,
                frame: spec.label(),
                free_reduced: !raw,
                braid: &word,
            };
            let dest = json_out(out, "words", &id);
            write_atomic(&dest, serde_json::to_string_pretty(&file)?.as_bytes())?;
            run.output(&dest);
        }
    }
    run.finish(ctx, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_specs() {
        assert_eq!(FrameSpec::parse("scene").unwrap(), FrameSpec::Scene);
        assert_eq!(FrameSpec::parse("agent:7").unwrap(), FrameSpec::Agent(AgentId::new("7")));
        assert!(FrameSpec::parse("agent:").is_err());
        assert!(FrameSpec::parse("ego").is_err());
    }
}
