//! Scene, trajectory and prediction containers, plus the agent-centric frame
//! construction every other module builds on.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Point2, ReferenceFrame};

/// Displacements shorter than this do not define a direction.
pub const MIN_DISPLACEMENT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub String);

impl AgentId {
    pub fn new(id: impl Into<String>) -> Self {
        AgentId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AgentId {
    fn from(s: &str) -> Self {
        AgentId(s.to_owned())
    }
}

impl From<String> for AgentId {
    fn from(s: String) -> Self {
        AgentId(s)
    }
}

/// One observation of an agent on the shared timestep grid. `t <= 0` is past,
/// `t >= 1` is future.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    pub t: i64,
    pub position: Point2,
    pub heading: Option<f64>,
    pub valid: bool,
}

impl AgentState {
    pub fn new(t: i64, x: f64, y: f64) -> Self {
        AgentState {
            t,
            position: Point2::new(x, y),
            heading: None,
            valid: true,
        }
    }

    pub fn with_heading(mut self, heading: f64) -> Self {
        self.heading = Some(wrap_angle(heading));
        self
    }

    pub fn invalid(mut self) -> Self {
        self.valid = false;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    agent_id: AgentId,
    states: Vec<AgentState>,
}

impl Trajectory {
    /// Builds a trajectory, checking that timesteps strictly increase and that
    /// every position is finite. Headings are wrapped into (−π, π].
    pub fn new(agent_id: impl Into<AgentId>, mut states: Vec<AgentState>) -> Result<Self> {
        let agent_id = agent_id.into();
        for w in states.windows(2) {
            if w[1].t <= w[0].t {
                return Err(Error::invalid(
                    "trajectory",
                    format!(
                        "agent {agent_id}: timesteps must strictly increase ({} then {})",
                        w[0].t, w[1].t
                    ),
                ));
            }
        }
        for s in &mut states {
            if !s.position.is_finite() {
                return Err(Error::invalid(
                    "trajectory",
                    format!("agent {agent_id}: non-finite position at t = {}", s.t),
                ));
            }
            if let Some(h) = s.heading {
                if !h.is_finite() {
                    return Err(Error::invalid(
                        "trajectory",
                        format!("agent {agent_id}: non-finite heading at t = {}", s.t),
                    ));
                }
                s.heading = Some(wrap_angle(h));
            }
        }
        Ok(Trajectory { agent_id, states })
    }

    /// A fully valid, heading-less trajectory sampled at `t = first_t, first_t + 1, ...`.
    pub fn from_points(
        agent_id: impl Into<AgentId>,
        first_t: i64,
        points: impl IntoIterator<Item = Point2>,
    ) -> Result<Self> {
        let states = points
            .into_iter()
            .enumerate()
            .map(|(k, p)| AgentState::new(first_t + k as i64, p.x, p.y))
            .collect();
        Trajectory::new(agent_id, states)
    }

    pub fn agent_id(&self) -> &AgentId {
        &self.agent_id
    }

    pub fn states(&self) -> &[AgentState] {
        &self.states
    }

    pub fn state_at(&self, t: i64) -> Option<&AgentState> {
        self.states
            .binary_search_by_key(&t, |s| s.t)
            .ok()
            .map(|i| &self.states[i])
    }

    pub fn valid_state_at(&self, t: i64) -> Option<&AgentState> {
        self.state_at(t).filter(|s| s.valid)
    }

    pub fn position_at(&self, t: i64) -> Option<Point2> {
        self.valid_state_at(t).map(|s| s.position)
    }

    /// Valid states with `t >= 1`.
    pub fn future(&self) -> impl Iterator<Item = &AgentState> {
        self.states.iter().filter(|s| s.t >= 1 && s.valid)
    }

    /// True when every future step `1..=horizon` has a valid state.
    pub fn has_full_future(&self, horizon: usize) -> bool {
        (1..=horizon as i64).all(|t| self.valid_state_at(t).is_some())
    }

    /// Expresses every state in `frame`: positions are translated by −origin
    /// then rotated by −axis_angle; headings are shifted and rewrapped.
    pub fn to_frame(&self, frame: &ReferenceFrame) -> Trajectory {
        let states = self
            .states
            .iter()
            .map(|s| AgentState {
                t: s.t,
                position: frame.to_local(s.position),
                heading: s.heading.map(|h| frame.heading_to_local(h)),
                valid: s.valid,
            })
            .collect();
        Trajectory {
            agent_id: self.agent_id.clone(),
            states,
        }
    }

    /// Inverse of [`Trajectory::to_frame`].
    pub fn from_frame(&self, frame: &ReferenceFrame) -> Trajectory {
        let states = self
            .states
            .iter()
            .map(|s| AgentState {
                t: s.t,
                position: frame.to_scene(s.position),
                heading: s.heading.map(|h| frame.heading_to_scene(h)),
                valid: s.valid,
            })
            .collect();
        Trajectory {
            agent_id: self.agent_id.clone(),
            states,
        }
    }

    pub fn map_positions(&self, f: impl Fn(Point2) -> Point2, g: impl Fn(f64) -> f64) -> Trajectory {
        let states = self
            .states
            .iter()
            .map(|s| AgentState {
                position: f(s.position),
                heading: s.heading.map(&g),
                ..*s
            })
            .collect();
        Trajectory {
            agent_id: self.agent_id.clone(),
            states,
        }
    }
}

/// Free-function form of [`Trajectory::to_frame`].
pub fn to_frame(traj: &Trajectory, frame: &ReferenceFrame) -> Trajectory {
    traj.to_frame(frame)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    scene_id: String,
    agents: Vec<Trajectory>,
    past_horizon: usize,
    future_horizon: usize,
    timestep_duration: f64,
}

impl Scene {
    pub fn new(
        scene_id: impl Into<String>,
        agents: Vec<Trajectory>,
        past_horizon: usize,
        future_horizon: usize,
        timestep_duration: f64,
    ) -> Result<Self> {
        let scene_id = scene_id.into();
        if past_horizon < 1 || future_horizon < 1 {
            return Err(Error::invalid(
                "scene",
                format!("{scene_id}: horizons must be >= 1 (got T_H = {past_horizon}, T_F = {future_horizon})"),
            ));
        }
        if !(timestep_duration.is_finite() && timestep_duration > 0.0) {
            return Err(Error::invalid(
                "scene",
                format!("{scene_id}: timestep_duration must be positive, got {timestep_duration}"),
            ));
        }
        let first = 1 - past_horizon as i64;
        let last = future_horizon as i64;
        let mut seen = HashSet::new();
        for traj in &agents {
            if !seen.insert(traj.agent_id().clone()) {
                return Err(Error::invalid(
                    "scene",
                    format!("{scene_id}: duplicate agent id {}", traj.agent_id()),
                ));
            }
            if let Some(s) = traj.states().iter().find(|s| s.t < first || s.t > last) {
                return Err(Error::invalid(
                    "scene",
                    format!(
                        "{scene_id}: agent {} has t = {} outside the grid [{first}, {last}]",
                        traj.agent_id(),
                        s.t
                    ),
                ));
            }
        }
        Ok(Scene {
            scene_id,
            agents,
            past_horizon,
            future_horizon,
            timestep_duration,
        })
    }

    pub fn scene_id(&self) -> &str {
        &self.scene_id
    }

    pub fn agents(&self) -> &[Trajectory] {
        &self.agents
    }

    pub fn past_horizon(&self) -> usize {
        self.past_horizon
    }

    pub fn future_horizon(&self) -> usize {
        self.future_horizon
    }

    pub fn timestep_duration(&self) -> f64 {
        self.timestep_duration
    }

    pub fn agent(&self, id: &AgentId) -> Result<&Trajectory> {
        self.agents
            .iter()
            .find(|a| a.agent_id() == id)
            .ok_or_else(|| Error::MissingAgent(id.clone()))
    }

    /// Reference frame of `agent_id` at the current timestep.
    pub fn frame_of_agent(&self, agent_id: &AgentId) -> Result<ReferenceFrame> {
        frame_of_agent(self, agent_id)
    }

    /// Agents with a valid `t = 0` state and a complete future window.
    pub fn fully_observed_agents(&self) -> Vec<AgentId> {
        self.agents
            .iter()
            .filter(|a| a.valid_state_at(0).is_some() && a.has_full_future(self.future_horizon))
            .map(|a| a.agent_id().clone())
            .collect()
    }

    /// Applies `f` to every position and `g` to every heading.
    pub fn map_positions(&self, f: impl Fn(Point2) -> Point2, g: impl Fn(f64) -> f64) -> Scene {
        Scene {
            agents: self.agents.iter().map(|a| a.map_positions(&f, &g)).collect(),
            ..self.clone()
        }
    }
}

/// Frame at the agent's `t = 0` pose. The axis comes from the heading when one
/// is recorded, otherwise from the last valid past displacement, otherwise 0.
pub fn frame_of_agent(scene: &Scene, agent_id: &AgentId) -> Result<ReferenceFrame> {
    let traj = scene.agent(agent_id)?;
    let current = traj
        .valid_state_at(0)
        .ok_or_else(|| Error::MissingCurrentState(agent_id.clone()))?;
    let angle = match current.heading {
        Some(h) => h,
        None => traj
            .states()
            .iter()
            .rev()
            .find(|s| s.t < 0 && s.valid)
            .map(|prev| current.position - prev.position)
            .filter(|d| d.norm() >= MIN_DISPLACEMENT)
            .map_or(0.0, |d| d.y.atan2(d.x)),
    };
    Ok(ReferenceFrame::new(current.position, angle))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentPrediction {
    pub agent_id: AgentId,
    /// `modes[k][s]` is the predicted position at `t = s + 1`.
    pub modes: Vec<Vec<Point2>>,
}

/// K joint modes for one scene. Mode indices are zero-based throughout the
/// library.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    scene_id: String,
    mode_probs: Vec<f64>,
    agents: Vec<AgentPrediction>,
}

impl PredictionSet {
    pub fn new(
        scene_id: impl Into<String>,
        mode_probs: Vec<f64>,
        agents: Vec<AgentPrediction>,
    ) -> Result<Self> {
        let scene_id = scene_id.into();
        let k = mode_probs.len();
        if k == 0 {
            return Err(Error::invalid("prediction set", format!("{scene_id}: K must be >= 1")));
        }
        if mode_probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::invalid(
                "prediction set",
                format!("{scene_id}: mode probabilities must be finite and non-negative"),
            ));
        }
        let total: f64 = mode_probs.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(
                "prediction set",
                format!("{scene_id}: mode probabilities sum to {total}, expected 1"),
            ));
        }
        let mut seen = HashSet::new();
        let mut horizon = None;
        for a in &agents {
            if !seen.insert(a.agent_id.clone()) {
                return Err(Error::invalid(
                    "prediction set",
                    format!("{scene_id}: duplicate agent id {}", a.agent_id),
                ));
            }
            if a.modes.len() != k {
                return Err(Error::invalid(
                    "prediction set",
                    format!("{scene_id}: agent {} has {} modes, expected {k}", a.agent_id, a.modes.len()),
                ));
            }
            for m in &a.modes {
                if m.iter().any(|p| !p.is_finite()) {
                    return Err(Error::invalid(
                        "prediction set",
                        format!("{scene_id}: agent {} has a non-finite point", a.agent_id),
                    ));
                }
                match horizon {
                    None => horizon = Some(m.len()),
                    Some(h) if h != m.len() => {
                        return Err(Error::HorizonMismatch {
                            expected: h,
                            found: m.len(),
                        })
                    }
                    _ => {}
                }
            }
        }
        Ok(PredictionSet {
            scene_id,
            mode_probs,
            agents,
        })
    }

    /// Every mode replays the ground-truth future; probabilities are uniform.
    /// Requires every listed agent to have a complete future.
    pub fn from_ground_truth(scene: &Scene, num_modes: usize) -> Result<Self> {
        let tf = scene.future_horizon() as i64;
        let mut agents = Vec::new();
        for traj in scene.agents() {
            let points = (1..=tf)
                .map(|t| {
                    traj.position_at(t).ok_or_else(|| Error::MissingGroundTruth {
                        agent: traj.agent_id().clone(),
                        t,
                    })
                })
                .collect::<Result<Vec<_>>>();
            match points {
                Ok(points) => agents.push(AgentPrediction {
                    agent_id: traj.agent_id().clone(),
                    modes: vec![points; num_modes],
                }),
                // agents without a full future are simply not predicted
                Err(_) => continue,
            }
        }
        let p = 1.0 / num_modes as f64;
        PredictionSet::new(scene.scene_id(), vec![p; num_modes], agents)
    }

    pub fn scene_id(&self) -> &str {
        &self.scene_id
    }

    pub fn num_modes(&self) -> usize {
        self.mode_probs.len()
    }

    pub fn mode_probs(&self) -> &[f64] {
        &self.mode_probs
    }

    pub fn agents(&self) -> &[AgentPrediction] {
        &self.agents
    }

    /// Number of predicted future points (0 when no agent is predicted).
    pub fn horizon(&self) -> usize {
        self.agents
            .first()
            .and_then(|a| a.modes.first())
            .map_or(0, Vec::len)
    }

    pub fn agent(&self, id: &AgentId) -> Result<&AgentPrediction> {
        self.agents
            .iter()
            .find(|a| &a.agent_id == id)
            .ok_or_else(|| Error::MissingAgent(id.clone()))
    }

    /// Mode indices sorted by decreasing probability, ties by lower index.
    pub fn ranked_modes(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.num_modes()).collect();
        idx.sort_by(|&a, &b| self.mode_probs[b].total_cmp(&self.mode_probs[a]).then(a.cmp(&b)));
        idx
    }

    /// The `k` most probable modes, in ascending index order.
    pub fn top_modes(&self, k: usize) -> Result<Vec<usize>> {
        if k == 0 || k > self.num_modes() {
            return Err(Error::TooManyModes {
                requested: k,
                available: self.num_modes(),
            });
        }
        let mut top: Vec<usize> = self.ranked_modes().into_iter().take(k).collect();
        top.sort_unstable();
        Ok(top)
    }

    /// Predicted future of one agent in one mode as a trajectory over `t = 1..`.
    pub fn mode_trajectory(&self, id: &AgentId, mode: usize) -> Result<Trajectory> {
        let a = self.agent(id)?;
        Trajectory::from_points(id.clone(), 1, a.modes[mode].iter().copied())
    }

    pub fn with_agents(&self, agents: Vec<AgentPrediction>) -> Result<Self> {
        PredictionSet::new(self.scene_id.clone(), self.mode_probs.clone(), agents)
    }

    pub fn map_positions(&self, f: impl Fn(Point2) -> Point2) -> PredictionSet {
        PredictionSet {
            agents: self
                .agents
                .iter()
                .map(|a| AgentPrediction {
                    agent_id: a.agent_id.clone(),
                    modes: a.modes.iter().map(|m| m.iter().map(|&p| f(p)).collect()).collect(),
                })
                .collect(),
            ..self.clone()
        }
    }
}
