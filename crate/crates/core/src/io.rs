//! JSON interchange formats for scenes and prediction sets (`format_version`
//! `"1"`). Agent ids may be written as strings or integers; they are always
//! read back as strings.

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::scene::{AgentId, AgentPrediction, AgentState, PredictionSet, Scene, Trajectory};

pub const FORMAT_VERSION: &str = "1";

fn default_version() -> String {
    FORMAT_VERSION.to_owned()
}

fn check_version(v: &str) -> Result<()> {
    if v == FORMAT_VERSION {
        Ok(())
    } else {
        Err(Error::invalid(
            "format_version",
            format!("unsupported version {v:?}, expected {FORMAT_VERSION:?}"),
        ))
    }
}

fn id_from_any<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<AgentId, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum AnyId {
        Str(String),
        Int(i64),
    }
    Ok(match AnyId::deserialize(d)? {
        AnyId::Str(s) => AgentId(s),
        AnyId::Int(i) => AgentId(i.to_string()),
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct StateRecord {
    t: i64,
    x: f64,
    y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    heading: Option<f64>,
    #[serde(default = "default_true")]
    valid: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Serialize, Deserialize)]
struct AgentRecord {
    #[serde(deserialize_with = "id_from_any")]
    id: AgentId,
    states: Vec<StateRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SceneRecord {
    #[serde(default = "default_version")]
    format_version: String,
    scene_id: String,
    timestep_duration: f64,
    past_horizon: usize,
    future_horizon: usize,
    agents: Vec<AgentRecord>,
}

pub fn scene_from_json(text: &str) -> Result<Scene> {
    let rec: SceneRecord = serde_json::from_str(text)?;
    check_version(&rec.format_version)?;
    let agents = rec
        .agents
        .into_iter()
        .map(|a| {
            let states = a
                .states
                .into_iter()
                .map(|s| AgentState {
                    t: s.t,
                    position: Point2::new(s.x, s.y),
                    heading: s.heading,
                    valid: s.valid,
                })
                .collect();
            Trajectory::new(a.id, states)
        })
        .collect::<Result<Vec<_>>>()?;
    Scene::new(
        rec.scene_id,
        agents,
        rec.past_horizon,
        rec.future_horizon,
        rec.timestep_duration,
    )
}

pub fn scene_to_json(scene: &Scene) -> String {
    let rec = SceneRecord {
        format_version: default_version(),
        scene_id: scene.scene_id().to_owned(),
        timestep_duration: scene.timestep_duration(),
        past_horizon: scene.past_horizon(),
        future_horizon: scene.future_horizon(),
        agents: scene
            .agents()
            .iter()
            .map(|a| AgentRecord {
                id: a.agent_id().clone(),
                states: a
                    .states()
                    .iter()
                    .map(|s| StateRecord {
                        t: s.t,
                        x: s.position.x,
                        y: s.position.y,
                        heading: s.heading,
                        valid: s.valid,
                    })
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&rec).expect("scene serialization cannot fail")
}

#[derive(Debug, Serialize, Deserialize)]
struct PredictedAgentRecord {
    #[serde(deserialize_with = "id_from_any")]
    id: AgentId,
    modes: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PredictionRecord {
    #[serde(default = "default_version")]
    format_version: String,
    scene_id: String,
    num_modes: usize,
    mode_probs: Vec<f64>,
    agents: Vec<PredictedAgentRecord>,
}

pub fn predictions_from_json(text: &str) -> Result<PredictionSet> {
    let rec: PredictionRecord = serde_json::from_str(text)?;
    check_version(&rec.format_version)?;
    if rec.num_modes != rec.mode_probs.len() {
        return Err(Error::invalid(
            "prediction set",
            format!(
                "{}: num_modes = {} but {} probabilities given",
                rec.scene_id,
                rec.num_modes,
                rec.mode_probs.len()
            ),
        ));
    }
    let agents = rec
        .agents
        .into_iter()
        .map(|a| AgentPrediction {
            agent_id: a.id,
            modes: a
                .modes
                .into_iter()
                .map(|m| m.into_iter().map(Point2::from).collect())
                .collect(),
        })
        .collect();
    PredictionSet::new(rec.scene_id, rec.mode_probs, agents)
}

pub fn predictions_to_json(preds: &PredictionSet) -> String {
    let rec = PredictionRecord {
        format_version: default_version(),
        scene_id: preds.scene_id().to_owned(),
        num_modes: preds.num_modes(),
        mode_probs: preds.mode_probs().to_vec(),
        agents: preds
            .agents()
            .iter()
            .map(|a| PredictedAgentRecord {
                id: a.agent_id.clone(),
                modes: a
                    .modes
                    .iter()
                    .map(|m| m.iter().map(|&p| p.into()).collect())
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&rec).expect("prediction serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCENE: &str = r#"{
        "format_version": "1",
        "scene_id": "demo",
        "timestep_duration": 0.1,
        "past_horizon": 2,
        "future_horizon": 2,
        "agents": [
            {"id": 7, "states": [
                {"t": -1, "x": 0.0, "y": 0.0, "valid": true},
                {"t": 0, "x": 1.0, "y": 0.0, "heading": 0.0, "valid": true},
                {"t": 1, "x": 2.0, "y": 0.0, "valid": true},
                {"t": 2, "x": 3.0, "y": 0.0, "valid": false}
            ]},
            {"id": "b", "states": [{"t": 0, "x": 5.0, "y": 1.0}]}
        ]
    }"#;

    #[test]
    fn parses_scene() {
        let scene = scene_from_json(SCENE).unwrap();
        assert_eq!(scene.scene_id(), "demo");
        assert_eq!(scene.agents().len(), 2);
        assert_eq!(scene.agents()[0].agent_id().as_str(), "7");
        assert!(!scene.agents()[0].states()[3].valid);
        let back = scene_from_json(&scene_to_json(&scene)).unwrap();
        assert_eq!(back, scene);
    }

    #[test]
    fn rejects_fractional_timesteps_and_bad_versions() {
        let bad = SCENE.replace("\"t\": 1,", "\"t\": 1.5,");
        assert!(matches!(scene_from_json(&bad), Err(Error::Json(_))));
        let bad = SCENE.replace("\"format_version\": \"1\"", "\"format_version\": \"2\"");
        assert!(matches!(scene_from_json(&bad), Err(Error::Invalid { .. })));
    }

    #[test]
    fn parses_predictions() {
        let text = r#"{"format_version": "1", "scene_id": "demo", "num_modes": 2, "mode_probs": [0.25, 0.75],
            "agents": [{"id": 7, "modes": [[[1,0],[2,0]], [[1,1],[2,2]]]}]}"#;
        let p = predictions_from_json(text).unwrap();
        assert_eq!(p.num_modes(), 2);
        assert_eq!(p.horizon(), 2);
        assert_eq!(p.agents()[0].modes[1][1], Point2::new(2.0, 2.0));
        assert_eq!(predictions_from_json(&predictions_to_json(&p)).unwrap(), p);

        let mismatch = text.replace("\"num_modes\": 2", "\"num_modes\": 3");
        assert!(predictions_from_json(&mismatch).is_err());
    }
}
