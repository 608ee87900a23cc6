//! Joint and marginal displacement metrics, the pairwise best mode used to
//! gate the braid loss, and Braid Similarity.
//!
//! Mode indices are zero-based. "Top-K" always means the K most probable
//! modes (ties by lower index); among them, ties in a metric go to the lower
//! mode index.

use serde::{Deserialize, Serialize};

use crate::braid::{label_in_frame, CrossingClass, InteractionGraph};
use crate::error::{Error, Result};
use crate::scene::{AgentId, PredictionSet, Scene};

/// `errors[a][m][s]`: distance between the prediction of agent `a` in mode
/// `m` and the ground truth at `t = s + 1`.
fn displacement_table(scene: &Scene, preds: &PredictionSet, agents: &[AgentId]) -> Result<Vec<Vec<Vec<f64>>>> {
    if agents.is_empty() {
        return Err(Error::invalid("evaluated agents", "no agents to evaluate"));
    }
    let tf = scene.future_horizon();
    if preds.horizon() != tf {
        return Err(Error::HorizonMismatch {
            expected: tf,
            found: preds.horizon(),
        });
    }
    agents
        .iter()
        .map(|id| {
            let gt_traj = scene.agent(id)?;
            let pred = preds.agent(id)?;
            let gt = (1..=tf as i64)
                .map(|t| {
                    gt_traj.position_at(t).ok_or_else(|| Error::MissingGroundTruth {
                        agent: id.clone(),
                        t,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(pred
                .modes
                .iter()
                .map(|m| m.iter().zip(&gt).map(|(p, g)| p.distance(*g)).collect())
                .collect())
        })
        .collect()
}

fn argmin_over(modes: &[usize], value: impl Fn(usize) -> f64) -> (f64, usize) {
    let mut best = (f64::INFINITY, modes[0]);
    for &m in modes {
        let v = value(m);
        if v < best.0 {
            best = (v, m);
        }
    }
    best
}

fn joint_fde_of(table: &[Vec<Vec<f64>>], mode: usize) -> f64 {
    table.iter().map(|a| *a[mode].last().expect("T_F >= 1")).sum::<f64>() / table.len() as f64
}

fn joint_ade_of(table: &[Vec<Vec<f64>>], mode: usize) -> f64 {
    table
        .iter()
        .map(|a| a[mode].iter().sum::<f64>() / a[mode].len() as f64)
        .sum::<f64>()
        / table.len() as f64
}

/// Agents evaluated when the caller does not say otherwise: valid at `t = 0`
/// with a complete future.
pub fn default_agents(scene: &Scene) -> Vec<AgentId> {
    scene.fully_observed_agents()
}

/// MinJointFDE_K over the default agents. Returns the value and its mode.
pub fn min_joint_fde(scene: &Scene, preds: &PredictionSet, k: usize) -> Result<(f64, usize)> {
    min_joint_fde_over(scene, preds, k, &default_agents(scene))
}

pub fn min_joint_fde_over(scene: &Scene, preds: &PredictionSet, k: usize, agents: &[AgentId]) -> Result<(f64, usize)> {
    let modes = preds.top_modes(k)?;
    let table = displacement_table(scene, preds, agents)?;
    Ok(argmin_over(&modes, |m| joint_fde_of(&table, m)))
}

/// MinJointADE_K over the default agents.
pub fn min_joint_ade(scene: &Scene, preds: &PredictionSet, k: usize) -> Result<(f64, usize)> {
    min_joint_ade_over(scene, preds, k, &default_agents(scene))
}

pub fn min_joint_ade_over(scene: &Scene, preds: &PredictionSet, k: usize, agents: &[AgentId]) -> Result<(f64, usize)> {
    let modes = preds.top_modes(k)?;
    let table = displacement_table(scene, preds, agents)?;
    Ok(argmin_over(&modes, |m| joint_ade_of(&table, m)))
}

/// MinFDE_K: each agent's best final displacement over the top-K modes,
/// averaged over agents.
pub fn min_fde_marginal(scene: &Scene, preds: &PredictionSet, k: usize) -> Result<f64> {
    min_fde_marginal_over(scene, preds, k, &default_agents(scene))
}

pub fn min_fde_marginal_over(scene: &Scene, preds: &PredictionSet, k: usize, agents: &[AgentId]) -> Result<f64> {
    let modes = preds.top_modes(k)?;
    let table = displacement_table(scene, preds, agents)?;
    let total: f64 = table
        .iter()
        .map(|a| argmin_over(&modes, |m| *a[m].last().expect("T_F >= 1")).0)
        .sum();
    Ok(total / table.len() as f64)
}

/// `k*` for the pair `(i, j)`: the mode with the lowest summed average
/// displacement of both agents, over all modes.
pub fn best_mode_pair(scene: &Scene, preds: &PredictionSet, i: &AgentId, j: &AgentId) -> Result<usize> {
    let table = displacement_table(scene, preds, &[i.clone(), j.clone()])?;
    let modes: Vec<usize> = (0..preds.num_modes()).collect();
    let tf = scene.future_horizon() as f64;
    Ok(argmin_over(&modes, |m| {
        (table[0][m].iter().sum::<f64>() + table[1][m].iter().sum::<f64>()) / tf
    })
    .1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointMetricsReport {
    pub k: usize,
    pub min_joint_fde_k: f64,
    pub min_joint_ade_k: f64,
    /// Joint FDE of the single most probable mode.
    pub min_joint_fde_1: f64,
    pub min_fde_k: f64,
    pub best_joint_mode: usize,
}

impl JointMetricsReport {
    pub fn compute(scene: &Scene, preds: &PredictionSet, k: usize, agents: &[AgentId]) -> Result<Self> {
        let modes = preds.top_modes(k)?;
        let table = displacement_table(scene, preds, agents)?;
        let (min_joint_fde_k, best_joint_mode) = argmin_over(&modes, |m| joint_fde_of(&table, m));
        let (min_joint_ade_k, _) = argmin_over(&modes, |m| joint_ade_of(&table, m));
        let top = preds.ranked_modes()[0];
        let min_fde_k = table
            .iter()
            .map(|a| argmin_over(&modes, |m| *a[m].last().expect("T_F >= 1")).0)
            .sum::<f64>()
            / table.len() as f64;
        Ok(JointMetricsReport {
            k,
            min_joint_fde_k,
            min_joint_ade_k,
            min_joint_fde_1: joint_fde_of(&table, top),
            min_fde_k,
            best_joint_mode,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrSimReport {
    pub brsim_k: f64,
    pub brsim_1: f64,
    /// The evaluated (top-K) modes, ascending.
    pub modes: Vec<usize>,
    /// Accuracy of each evaluated mode, aligned with `modes`.
    pub per_mode_accuracy: Vec<f64>,
    /// Induced label per evaluated mode and graph edge; `None` marks an
    /// ambiguous induced crossing, which counts as a mismatch.
    pub induced_labels: Vec<Vec<Option<CrossingClass>>>,
}

/// Braid Similarity of the top-K modes against a ground-truth graph.
///
/// Each mode induces a label on every edge by running the labeling on the
/// predicted futures of that mode, in the target agent's ground-truth
/// `t = 0` frame. A mode's accuracy is the fraction of edges whose induced
/// label matches; BrSim_K is the best accuracy among the top-K modes and
/// BrSim_1 the accuracy of the most probable mode.
pub fn braid_similarity(scene: &Scene, preds: &PredictionSet, graph: &InteractionGraph, k: usize) -> Result<BrSimReport> {
    if graph.edges.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let modes = preds.top_modes(k)?;
    if preds.horizon() != scene.future_horizon() {
        return Err(Error::HorizonMismatch {
            expected: scene.future_horizon(),
            found: preds.horizon(),
        });
    }
    for e in &graph.edges {
        preds.agent(&e.src)?;
        preds.agent(&e.dst)?;
    }
    let frames = graph
        .edges
        .iter()
        .map(|e| scene.frame_of_agent(&e.dst))
        .collect::<Result<Vec<_>>>()?;

    let mut induced_labels = Vec::with_capacity(modes.len());
    let mut per_mode_accuracy = Vec::with_capacity(modes.len());
    for &m in &modes {
        let mut labels = Vec::with_capacity(graph.edges.len());
        let mut hits = 0usize;
        for (edge, frame) in graph.edges.iter().zip(&frames) {
            let ti = preds.mode_trajectory(&edge.src, m)?;
            let tj = preds.mode_trajectory(&edge.dst, m)?;
            let induced = match label_in_frame(&ti, &tj, frame) {
                Ok(c) => Some(c),
                Err(Error::AmbiguousCrossing { .. }) | Err(Error::InsufficientOverlap { .. }) => None,
                Err(e) => return Err(e),
            };
            if induced == Some(edge.label) {
                hits += 1;
            }
            labels.push(induced);
        }
        per_mode_accuracy.push(hits as f64 / graph.edges.len() as f64);
        induced_labels.push(labels);
    }
    let brsim_k = per_mode_accuracy.iter().copied().fold(0.0, f64::max);
    let top = preds.ranked_modes()[0];
    let top_pos = modes.iter().position(|&m| m == top).expect("most probable mode is in every top-K");
    Ok(BrSimReport {
        brsim_k,
        brsim_1: per_mode_accuracy[top_pos],
        modes,
        per_mode_accuracy,
        induced_labels,
    })
}

/// One evaluated scene. `brsim_*` are `None` when the graph has no edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneReport {
    pub scene_id: String,
    pub num_agents: usize,
    pub num_edges: usize,
    #[serde(flatten)]
    pub joint: JointMetricsReport,
    pub brsim_k: Option<f64>,
    pub brsim_1: Option<f64>,
}

impl SceneReport {
    pub const CSV_HEADER: [&'static str; 11] = [
        "scene_id",
        "num_agents",
        "num_edges",
        "k",
        "min_joint_fde_k",
        "min_joint_ade_k",
        "min_joint_fde_1",
        "min_fde_k",
        "best_joint_mode",
        "brsim_k",
        "brsim_1",
    ];

    pub fn compute(scene: &Scene, preds: &PredictionSet, graph: &InteractionGraph, k: usize, agents: &[AgentId]) -> Result<Self> {
        let joint = JointMetricsReport::compute(scene, preds, k, agents)?;
        let (brsim_k, brsim_1) = match braid_similarity(scene, preds, graph, k) {
            Ok(r) => (Some(r.brsim_k), Some(r.brsim_1)),
            Err(Error::EmptyGraph) => (None, None),
            Err(e) => return Err(e),
        };
        Ok(SceneReport {
            scene_id: scene.scene_id().to_owned(),
            num_agents: agents.len(),
            num_edges: graph.edges.len(),
            joint,
            brsim_k,
            brsim_1,
        })
    }

    pub fn csv_row(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
        vec![
            self.scene_id.clone(),
            self.num_agents.to_string(),
            self.num_edges.to_string(),
            self.joint.k.to_string(),
            self.joint.min_joint_fde_k.to_string(),
            self.joint.min_joint_ade_k.to_string(),
            self.joint.min_joint_fde_1.to_string(),
            self.joint.min_fde_k.to_string(),
            self.joint.best_joint_mode.to_string(),
            opt(self.brsim_k),
            opt(self.brsim_1),
        ]
    }
}

/// Dataset-level means. BrSim means cover only scenes where it is defined.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub num_scenes: usize,
    pub num_brsim_scenes: usize,
    pub min_joint_fde_k: f64,
    pub min_joint_ade_k: f64,
    pub min_joint_fde_1: f64,
    pub min_fde_k: f64,
    pub brsim_k: Option<f64>,
    pub brsim_1: Option<f64>,
}

impl Aggregate {
    pub fn from_reports<'a>(reports: impl IntoIterator<Item = &'a SceneReport>) -> Self {
        let mut sums = [0.0f64; 6];
        let (mut n, mut nb) = (0usize, 0usize);
        for r in reports {
            n += 1;
            sums[0] += r.joint.min_joint_fde_k;
            sums[1] += r.joint.min_joint_ade_k;
            sums[2] += r.joint.min_joint_fde_1;
            sums[3] += r.joint.min_fde_k;
            if let (Some(k), Some(one)) = (r.brsim_k, r.brsim_1) {
                nb += 1;
                sums[4] += k;
                sums[5] += one;
            }
        }
        let mean = |s: f64, c: usize| if c == 0 { 0.0 } else { s / c as f64 };
        Aggregate {
            num_scenes: n,
            num_brsim_scenes: nb,
            min_joint_fde_k: mean(sums[0], n),
            min_joint_ade_k: mean(sums[1], n),
            min_joint_fde_1: mean(sums[2], n),
            min_fde_k: mean(sums[3], n),
            brsim_k: (nb > 0).then(|| sums[4] / nb as f64),
            brsim_1: (nb > 0).then(|| sums[5] / nb as f64),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::braid::build_interaction_graph;
    use crate::geometry::Point2;
    use crate::scene::{AgentPrediction, AgentState, Trajectory};

    fn straight(id: &str, y: f64, tf: i64) -> Trajectory {
        let states = (0..=tf).map(|t| AgentState::new(t, t as f64, y).with_heading(0.0)).collect();
        Trajectory::new(id, states).unwrap()
    }

    fn two_agent_scene() -> Scene {
        Scene::new("m", vec![straight("a", 0.0, 3), straight("b", 10.0, 3)], 1, 3, 0.1).unwrap()
    }

    fn gt_points(scene: &Scene, id: &str) -> Vec<Point2> {
        let a = scene.agent(&id.into()).unwrap();
        (1..=3).map(|t| a.position_at(t).unwrap()).collect()
    }

    fn shifted(points: &[Point2], dx: f64, dy: f64) -> Vec<Point2> {
        points.iter().map(|p| Point2::new(p.x + dx, p.y + dy)).collect()
    }

    #[test]
    fn exact_predictions_score_zero() {
        let s = two_agent_scene();
        let p = PredictionSet::from_ground_truth(&s, 3).unwrap();
        assert_eq!(min_joint_fde(&s, &p, 3).unwrap(), (0.0, 0));
        assert_eq!(min_joint_ade(&s, &p, 3).unwrap().0, 0.0);
        assert_eq!(min_fde_marginal(&s, &p, 3).unwrap(), 0.0);
    }

    #[test]
    fn joint_fde_is_agent_mean() {
        let s = two_agent_scene();
        let a = gt_points(&s, "a");
        let b = gt_points(&s, "b");
        let p = PredictionSet::new(
            "m",
            vec![1.0],
            vec![
                AgentPrediction {
                    agent_id: "a".into(),
                    modes: vec![shifted(&a, 3.0, 0.0)],
                },
                AgentPrediction {
                    agent_id: "b".into(),
                    modes: vec![shifted(&b, 0.0, 4.0)],
                },
            ],
        )
        .unwrap();
        assert_eq!(min_joint_fde(&s, &p, 1).unwrap(), (3.5, 0));
    }

    #[test]
    fn constant_offset_ade() {
        let s = Scene::new("m", vec![straight("a", 0.0, 3)], 1, 3, 0.1).unwrap();
        let a = gt_points(&s, "a");
        let p = PredictionSet::new(
            "m",
            vec![1.0],
            vec![AgentPrediction {
                agent_id: "a".into(),
                modes: vec![shifted(&a, 0.0, 2.0)],
            }],
        )
        .unwrap();
        assert_eq!(min_joint_ade(&s, &p, 1).unwrap().0, 2.0);
    }

    #[test]
    fn marginal_beats_joint() {
        let s = two_agent_scene();
        let a = gt_points(&s, "a");
        let b = gt_points(&s, "b");
        let p = PredictionSet::new(
            "m",
            vec![0.5, 0.5],
            vec![
                AgentPrediction {
                    agent_id: "a".into(),
                    modes: vec![shifted(&a, 5.0, 0.0), shifted(&a, 1.0, 0.0)],
                },
                AgentPrediction {
                    agent_id: "b".into(),
                    modes: vec![shifted(&b, 2.0, 0.0), shifted(&b, 9.0, 0.0)],
                },
            ],
        )
        .unwrap();
        assert_eq!(min_fde_marginal(&s, &p, 2).unwrap(), 1.5);
        assert_eq!(min_joint_fde(&s, &p, 2).unwrap(), (3.5, 0));
    }

    #[test]
    fn best_mode_pair_and_ties() {
        let s = two_agent_scene();
        let a = gt_points(&s, "a");
        let b = gt_points(&s, "b");
        let p = PredictionSet::new(
            "m",
            vec![0.2, 0.3, 0.5],
            vec![
                AgentPrediction {
                    agent_id: "a".into(),
                    modes: vec![shifted(&a, 1.0, 0.0), a.clone(), shifted(&a, 0.0, 1.0)],
                },
                AgentPrediction {
                    agent_id: "b".into(),
                    modes: vec![b.clone(), b.clone(), shifted(&b, 1.0, 0.0)],
                },
            ],
        )
        .unwrap();
        assert_eq!(best_mode_pair(&s, &p, &"a".into(), &"b".into()).unwrap(), 1);

        let same = PredictionSet::from_ground_truth(&s, 4).unwrap();
        assert_eq!(best_mode_pair(&s, &same, &"a".into(), &"b".into()).unwrap(), 0);
        assert!(matches!(
            best_mode_pair(&s, &same, &"a".into(), &"zz".into()),
            Err(Error::MissingAgent(_))
        ));
    }

    #[test]
    fn precondition_errors() {
        let s = two_agent_scene();
        let p = PredictionSet::from_ground_truth(&s, 2).unwrap();
        assert!(matches!(min_joint_fde(&s, &p, 3), Err(Error::TooManyModes { .. })));
        let short = PredictionSet::new(
            "m",
            vec![1.0],
            vec![AgentPrediction {
                agent_id: "a".into(),
                modes: vec![vec![Point2::ORIGIN; 2]],
            }],
        )
        .unwrap();
        assert!(matches!(min_joint_fde(&s, &short, 1), Err(Error::HorizonMismatch { .. })));
        let only_a = p.with_agents(vec![p.agents()[0].clone()]).unwrap();
        assert!(matches!(min_joint_fde(&s, &only_a, 1), Err(Error::MissingAgent(_))));
    }

    #[test]
    fn brsim_self_match_and_empty_graph() {
        // b passes a on the left
        let a = Trajectory::new("a", (0..=4).map(|t| AgentState::new(t, t as f64, 0.0).with_heading(0.0)).collect()).unwrap();
        let b = Trajectory::new(
            "b",
            (0..=4).map(|t| AgentState::new(t, -2.5 + 2.0 * t as f64, 2.0).with_heading(0.0)).collect(),
        )
        .unwrap();
        let s = Scene::new("x", vec![a, b], 1, 4, 0.1).unwrap();
        let g = build_interaction_graph(&s, 50.0, 8).unwrap();
        assert_eq!(g.edges.len(), 2);
        let p = PredictionSet::from_ground_truth(&s, 2).unwrap();
        let r = braid_similarity(&s, &p, &g, 2).unwrap();
        assert_eq!(r.brsim_k, 1.0);
        assert_eq!(r.brsim_1, 1.0);

        let empty = InteractionGraph {
            edges: vec![],
            ..g.clone()
        };
        assert_eq!(braid_similarity(&s, &p, &empty, 2), Err(Error::EmptyGraph));
    }

    #[test]
    fn brsim_half_when_every_mode_gets_one_edge() {
        // b drives along +x; a overtakes it on the left (over), c stays behind
        // on the right (no_crossing)
        let line = |id: &str, x0: f64, v: f64, y: f64| {
            Trajectory::new(id, (0..=4).map(|t| AgentState::new(t, x0 + v * t as f64, y).with_heading(0.0)).collect())
                .unwrap()
        };
        let s = Scene::new("x", vec![line("a", -2.5, 2.0, 2.0), line("b", 0.0, 1.0, 0.0), line("c", -3.0, 1.0, -2.0)], 1, 4, 0.1)
            .unwrap();
        let full = build_interaction_graph(&s, 50.0, 8).unwrap();
        let keep = |src: &str| full.edges.iter().find(|e| e.src.as_str() == src && e.dst.as_str() == "b").unwrap().clone();
        let g = InteractionGraph {
            edges: vec![keep("a"), keep("c")],
            ..full.clone()
        };
        assert_eq!(g.edges[0].label, CrossingClass::Over);
        assert_eq!(g.edges[1].label, CrossingClass::NoCrossing);

        let pts = |x0: f64, v: f64, y: f64| (1..=4).map(|t| Point2::new(x0 + v * t as f64, y)).collect::<Vec<_>>();
        // mode 0: a correct, c wrongly passes b; mode 1: a wrongly stays behind, c correct
        let p = PredictionSet::new(
            "x",
            vec![0.5, 0.5],
            vec![
                AgentPrediction {
                    agent_id: "a".into(),
                    modes: vec![pts(-2.5, 2.0, 2.0), pts(-2.5, 1.0, 2.0)],
                },
                AgentPrediction {
                    agent_id: "b".into(),
                    modes: vec![pts(0.0, 1.0, 0.0); 2],
                },
                AgentPrediction {
                    agent_id: "c".into(),
                    modes: vec![pts(-3.0, 2.0, -2.0), pts(-3.0, 1.0, -2.0)],
                },
            ],
        )
        .unwrap();
        let r = braid_similarity(&s, &p, &g, 2).unwrap();
        assert_eq!(r.per_mode_accuracy, vec![0.5, 0.5]);
        assert_eq!(r.brsim_k, 0.5);
        assert_eq!(r.induced_labels[0][1], Some(CrossingClass::Below));
    }
}
