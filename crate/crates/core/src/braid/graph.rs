//! Directed crossing labels and the interaction graph built from them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::crossing::{find_crossings, CrossingEvent, RawCrossing};
use crate::error::{Error, Result};
use crate::geometry::ReferenceFrame;
use crate::scene::{AgentId, Scene, Trajectory};

/// Distance threshold for admitting an edge, in meters.
pub const DEFAULT_DELTA: f64 = 50.0;
/// Cap on incoming edges per target agent.
pub const DEFAULT_MAX_NEIGHBORS: usize = 16;

/// Relative depth of strand `i` with respect to strand `j` at their first
/// crossing in `j`'s frame. The discriminant is the logit column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossingClass {
    Below = 0,
    Over = 1,
    NoCrossing = 2,
}

impl CrossingClass {
    pub const ALL: [CrossingClass; 3] = [CrossingClass::Below, CrossingClass::Over, CrossingClass::NoCrossing];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CrossingClass::Below => "below",
            CrossingClass::Over => "over",
            CrossingClass::NoCrossing => "no_crossing",
        }
    }

    fn from_dy(dy: f64) -> Self {
        if dy < 0.0 {
            CrossingClass::Below
        } else {
            CrossingClass::Over
        }
    }

    pub fn from_event(event: Option<CrossingEvent>) -> Self {
        event.map_or(CrossingClass::NoCrossing, |e| Self::from_dy(e.dy_at_cross))
    }
}

impl fmt::Display for CrossingClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CrossingClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "below" => Ok(CrossingClass::Below),
            "over" => Ok(CrossingClass::Over),
            "no_crossing" => Ok(CrossingClass::NoCrossing),
            other => Err(Error::invalid("crossing class", other.to_owned())),
        }
    }
}

/// Label of `traj_i` relative to `traj_j` in a given frame.
pub fn label_in_frame(traj_i: &Trajectory, traj_j: &Trajectory, frame: &ReferenceFrame) -> Result<CrossingClass> {
    super::crossing::detect_crossing(traj_i, traj_j, frame).map(CrossingClass::from_event)
}

/// `c_{i→j}`: both ground-truth futures projected on the xt plane of `j`'s
/// current frame.
pub fn label_edge(scene: &Scene, i: &AgentId, j: &AgentId) -> Result<CrossingClass> {
    let frame = scene.frame_of_agent(j)?;
    label_in_frame(scene.agent(i)?, scene.agent(j)?, &frame)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: AgentId,
    pub dst: AgentId,
    pub label: CrossingClass,
    pub distance_t0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionGraph {
    pub scene_id: String,
    pub delta: f64,
    pub max_neighbors: usize,
    pub nodes: Vec<AgentId>,
    pub edges: Vec<Edge>,
}

impl InteractionGraph {
    pub fn class_counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for e in &self.edges {
            counts[e.label.index()] += 1;
        }
        counts
    }

    pub fn label(&self, src: &AgentId, dst: &AgentId) -> Option<CrossingClass> {
        self.edges
            .iter()
            .find(|e| &e.src == src && &e.dst == dst)
            .map(|e| e.label)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn label_from_raw(first: Option<RawCrossing>, scene_id: &str, i: &AgentId, j: &AgentId) -> CrossingClass {
    match first {
        None => CrossingClass::NoCrossing,
        Some(c) if c.is_ambiguous() => {
            log::warn!(
                "{scene_id}: ambiguous crossing {i}->{j} at t* = {:.4} (dy = {:.3e}); using nearest-sample dy = {:.3e}",
                c.t_star,
                c.dy_at_cross,
                c.dy_nearest_sample
            );
            CrossingClass::from_dy(c.dy_nearest_sample)
        }
        Some(c) => CrossingClass::from_dy(c.dy_at_cross),
    }
}

/// Builds the interaction graph of `scene`.
///
/// Nodes are the agents valid at `t = 0`. For every target `j`, the sources
/// within `delta` of it at `t = 0` are ranked by distance (ties by scene
/// order) and the nearest `max_neighbors` become edges. Edges whose agents
/// share fewer than two future samples are dropped; near-collision crossings
/// fall back to the nearest-sample sign of `d_y`. Edges are ordered by
/// (source, target) scene order.
pub fn build_interaction_graph(scene: &Scene, delta: f64, max_neighbors: usize) -> Result<InteractionGraph> {
    if !(delta > 0.0) {
        return Err(Error::invalid("delta", format!("must be > 0, got {delta}")));
    }
    if max_neighbors == 0 {
        return Err(Error::invalid("max_neighbors", "must be >= 1"));
    }
    let nodes: Vec<(usize, &Trajectory, ReferenceFrame)> = scene
        .agents()
        .iter()
        .enumerate()
        .filter_map(|(idx, a)| scene.frame_of_agent(a.agent_id()).ok().map(|f| (idx, a, f)))
        .collect();

    let mut edges: Vec<(usize, usize, Edge)> = Vec::new();
    for (dst_idx, dst, frame) in &nodes {
        let mut sources: Vec<(f64, usize, &Trajectory)> = nodes
            .iter()
            .filter(|(src_idx, _, _)| src_idx != dst_idx)
            .map(|(src_idx, src, src_frame)| (src_frame.origin.distance(frame.origin), *src_idx, *src))
            .filter(|(d, _, _)| *d <= delta)
            .collect();
        sources.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        sources.truncate(max_neighbors);

        for (distance, src_idx, src) in sources {
            let crossings = match find_crossings(src, dst, frame) {
                Ok(c) => c,
                Err(e) => {
                    log::debug!("{}: dropping edge {}->{}: {e}", scene.scene_id(), src.agent_id(), dst.agent_id());
                    continue;
                }
            };
            let label = label_from_raw(crossings.first().copied(), scene.scene_id(), src.agent_id(), dst.agent_id());
            edges.push((
                src_idx,
                *dst_idx,
                Edge {
                    src: src.agent_id().clone(),
                    dst: dst.agent_id().clone(),
                    label,
                    distance_t0: distance,
                },
            ));
        }
    }
    edges.sort_by_key(|(s, d, _)| (*s, *d));
    Ok(InteractionGraph {
        scene_id: scene.scene_id().to_owned(),
        delta,
        max_neighbors,
        nodes: nodes.iter().map(|(_, a, _)| a.agent_id().clone()).collect(),
        edges: edges.into_iter().map(|(_, _, e)| e).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::AgentState;

    /// Constant-velocity agent with heading along its velocity, t in [-2, tf].
    fn mover(id: &str, x0: f64, y0: f64, vx: f64, vy: f64, tf: i64) -> Trajectory {
        let h = vy.atan2(vx);
        let states = (-2..=tf)
            .map(|t| AgentState::new(t, x0 + vx * t as f64, y0 + vy * t as f64).with_heading(h))
            .collect();
        Trajectory::new(id, states).unwrap()
    }

    fn scene(agents: Vec<Trajectory>) -> Scene {
        Scene::new("test", agents, 3, 10, 0.1).unwrap()
    }

    #[test]
    fn parallel_lanes_never_cross() {
        let s = scene(vec![mover("a", 0.0, 0.0, 1.0, 0.0, 10), mover("b", 5.0, 3.5, 1.0, 0.0, 10)]);
        assert_eq!(label_edge(&s, &"a".into(), &"b".into()).unwrap(), CrossingClass::NoCrossing);
        assert_eq!(label_edge(&s, &"b".into(), &"a".into()).unwrap(), CrossingClass::NoCrossing);
    }

    #[test]
    fn lateral_cut_in_front_is_over() {
        // j drives along +x; i starts behind-left, passes j at a 1 m offset
        let s = scene(vec![mover("i", -4.5, 1.0, 2.0, 0.0, 10), mover("j", 0.0, 0.0, 1.0, 0.0, 10)]);
        assert_eq!(label_edge(&s, &"i".into(), &"j".into()).unwrap(), CrossingClass::Over);
        assert_eq!(label_edge(&s, &"j".into(), &"i".into()).unwrap(), CrossingClass::Below);
    }

    #[test]
    fn merge_labels_depend_on_the_frame() {
        // a drives straight along +x. b comes up a ramp at 60° and stays
        // behind a along x, so x_b − x_a keeps its sign in a's frame; along
        // b's rotated axis b's progress overtakes a's projection.
        let a = mover("a", 0.0, 0.0, 2.0, 0.0, 10);
        let b = mover("b", -3.0, -6.0, 1.0, 3f64.sqrt(), 10);
        let s = scene(vec![a, b]);
        let ab = label_edge(&s, &"a".into(), &"b".into()).unwrap();
        let ba = label_edge(&s, &"b".into(), &"a".into()).unwrap();
        assert_eq!(ba, CrossingClass::NoCrossing);
        assert_ne!(ab, CrossingClass::NoCrossing);
    }

    #[test]
    fn graph_thresholds_and_degree() {
        let s = scene(vec![
            mover("a", 0.0, 0.0, 1.0, 0.0, 10),
            mover("b", 5.0, 3.5, 1.0, 0.0, 10),
            mover("c", 10.0, -3.5, 1.0, 0.0, 10),
        ]);
        let g = build_interaction_graph(&s, DEFAULT_DELTA, 2).unwrap();
        assert_eq!(g.edges.len(), 6);
        let g = build_interaction_graph(&s, DEFAULT_DELTA, 1).unwrap();
        assert_eq!(g.edges.len(), 3);

        let far = scene(vec![mover("a", 0.0, 0.0, 1.0, 0.0, 10), mover("b", 60.0, 0.0, 1.0, 0.0, 10)]);
        assert!(build_interaction_graph(&far, 50.0, 4).unwrap().edges.is_empty());
        assert!(build_interaction_graph(&far, 0.0, 4).is_err());
        assert!(build_interaction_graph(&far, 50.0, 0).is_err());
    }

    #[test]
    fn edges_without_overlap_are_dropped() {
        let a = mover("a", 0.0, 0.0, 1.0, 0.0, 10);
        let b = Trajectory::new("b", vec![AgentState::new(0, 1.0, 1.0), AgentState::new(1, 2.0, 1.0)]).unwrap();
        let g = build_interaction_graph(&scene(vec![a, b]), 50.0, 4).unwrap();
        assert!(g.edges.is_empty());
        assert_eq!(g.nodes.len(), 2);
    }

    #[test]
    fn ambiguous_crossings_fall_back_to_nearest_sample() {
        // i passes through j's position at t* = 5.5 with dy = 0 exactly, and
        // dy of the nearest sample (t = 5) is positive
        let j = mover("j", 0.0, 0.0, 1.0, 0.0, 10);
        let states = (-2..=10)
            .map(|t| {
                let t = t as f64;
                let y = if t <= 5.0 { 0.5 } else { -0.5 };
                AgentState::new(t as i64, -5.5 + 2.0 * t, y).with_heading(0.0)
            })
            .collect();
        let i = Trajectory::new("i", states).unwrap();
        let s = scene(vec![i, j]);
        assert!(matches!(
            label_edge(&s, &"i".into(), &"j".into()),
            Err(Error::AmbiguousCrossing { .. })
        ));
        let g = build_interaction_graph(&s, 50.0, 4).unwrap();
        assert_eq!(g.label(&"i".into(), &"j".into()), Some(CrossingClass::Over));
    }

    #[test]
    fn class_round_trip() {
        for c in CrossingClass::ALL {
            assert_eq!(c.as_str().parse::<CrossingClass>().unwrap(), c);
            assert_eq!(CrossingClass::from_index(c.index()), Some(c));
        }
    }
}
