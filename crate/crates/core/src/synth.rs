//! Synthetic multi-agent scenes with analytically known crossing labels and
//! braid words.
//!
//! Every template builds its agents from continuous motion primitives in a
//! canonical template frame and then applies a random rigid transform. The
//! expected labels and words are computed from the motion equations alone:
//! `parallel`, `overtake` and `yield` by construction rules, `crossing_paths`
//! and `merge` by evaluating the equations on the timestep grid. Draws whose
//! crossings come too close to a sample, or whose depth at the crossing is
//! too small to be unambiguous, are rejected and redrawn.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::braid::{BraidWord, CrossingClass, Edge, InteractionGraph, Letter, Sign, DEFAULT_DELTA, DEFAULT_MAX_NEIGHBORS};
use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Point2, ReferenceFrame, RigidTransform};
use crate::scene::{AgentId, AgentPrediction, AgentState, PredictionSet, Scene, Trajectory};

/// Minimum |x_i − x_j| at every sample.
pub const DX_MARGIN: f64 = 0.05;
/// Minimum |y_i − y_j| at both samples bracketing a crossing.
pub const DY_MARGIN: f64 = 0.3;
/// Minimum pairwise distance at every timestep.
pub const MIN_SEPARATION: f64 = 0.5;
/// Edges are only expected below this distance, well inside the default δ.
const MAX_SPAWN_DISTANCE: f64 = 45.0;
const MAX_RETRIES: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Parallel,
    CrossingPaths,
    Overtake,
    Yield,
    Merge,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::Parallel,
        ScenarioKind::CrossingPaths,
        ScenarioKind::Overtake,
        ScenarioKind::Yield,
        ScenarioKind::Merge,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Parallel => "parallel",
            ScenarioKind::CrossingPaths => "crossing_paths",
            ScenarioKind::Overtake => "overtake",
            ScenarioKind::Yield => "yield",
            ScenarioKind::Merge => "merge",
        }
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid("scenario kind", s.to_owned()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub past_horizon: usize,
    pub future_horizon: usize,
    pub timestep_duration: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            past_horizon: 10,
            future_horizon: 30,
            timestep_duration: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioTemplate {
    pub kind: ScenarioKind,
    /// m/s
    pub speed_range: (f64, f64),
    /// m
    pub lateral_offset_range: (f64, f64),
    /// Fraction of the future window at which the first interaction happens.
    pub crossing_time_fraction: (f64, f64),
    /// Probability that the agent with the earlier constant-speed arrival
    /// goes first in `yield` scenes.
    pub yield_informativeness: f64,
    pub grid: GridSpec,
    pub seed: u64,
}

impl Default for ScenarioTemplate {
    fn default() -> Self {
        ScenarioTemplate {
            kind: ScenarioKind::Parallel,
            speed_range: (6.0, 14.0),
            lateral_offset_range: (2.5, 4.0),
            crossing_time_fraction: (0.25, 0.75),
            yield_informativeness: 0.8,
            grid: GridSpec::default(),
            seed: 0,
        }
    }
}

impl ScenarioTemplate {
    pub fn new(kind: ScenarioKind, seed: u64) -> Self {
        ScenarioTemplate {
            kind,
            seed,
            ..Default::default()
        }
    }

    /// Checks every field; `generate` calls this first.
    pub fn validate(&self) -> Result<()> {
        let ok_range = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi;
        if !ok_range(self.speed_range) {
            return Err(Error::invalid("speed_range", format!("{:?}", self.speed_range)));
        }
        if !ok_range(self.lateral_offset_range) || self.lateral_offset_range.0 < 2.0 * MIN_SEPARATION {
            return Err(Error::invalid("lateral_offset_range", format!("{:?}", self.lateral_offset_range)));
        }
        let (f0, f1) = self.crossing_time_fraction;
        if !(f0 > 0.0 && f0 <= f1 && f1 < 1.0) {
            return Err(Error::invalid("crossing_time_fraction", format!("{:?}", self.crossing_time_fraction)));
        }
        if !(0.0..=1.0).contains(&self.yield_informativeness) {
            return Err(Error::invalid("yield_informativeness", self.yield_informativeness.to_string()));
        }
        if self.grid.future_horizon < 4 || self.grid.past_horizon < 2 || !(self.grid.timestep_duration > 0.0) {
            return Err(Error::invalid("grid", format!("{:?}", self.grid)));
        }
        Ok(())
    }
}

/// Continuous motion in the template frame; `t` in seconds, 0 = current.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Motion {
    /// Constant speed along `heading`, with constant acceleration applied on
    /// `[0, accel_until]` only.
    Straight {
        p0: Point2,
        heading: f64,
        speed: f64,
        accel: f64,
        accel_until: f64,
    },
    /// Constant speed and yaw rate; passes `p_ref` with `heading_ref` at `t_ref`.
    Arc {
        p_ref: Point2,
        heading_ref: f64,
        t_ref: f64,
        speed: f64,
        yaw_rate: f64,
    },
    /// Straight ramp along `ramp_heading` reaching `merge_point` at
    /// `t_merge`, then along +x at the same speed.
    Merge {
        merge_point: Point2,
        ramp_heading: f64,
        t_merge: f64,
        speed: f64,
    },
}

impl Motion {
    fn progress(&self, t: f64) -> f64 {
        match *self {
            Motion::Straight {
                speed,
                accel,
                accel_until,
                ..
            } => {
                if t <= 0.0 {
                    speed * t
                } else if t <= accel_until {
                    speed * t + 0.5 * accel * t * t
                } else {
                    let s_end = speed * accel_until + 0.5 * accel * accel_until * accel_until;
                    s_end + (speed + accel * accel_until) * (t - accel_until)
                }
            }
            _ => unreachable!("progress is only defined for straight motion"),
        }
    }

    fn position(&self, t: f64) -> Point2 {
        match *self {
            Motion::Straight { p0, heading, .. } => p0 + Point2::new(heading.cos(), heading.sin()) * self.progress(t),
            Motion::Arc {
                p_ref,
                heading_ref,
                t_ref,
                speed,
                yaw_rate,
            } => {
                let h = heading_ref + yaw_rate * (t - t_ref);
                let r = speed / yaw_rate;
                p_ref + Point2::new(h.sin() - heading_ref.sin(), -h.cos() + heading_ref.cos()) * r
            }
            Motion::Merge {
                merge_point,
                ramp_heading,
                t_merge,
                speed,
            } => {
                let s = speed * (t - t_merge);
                if t <= t_merge {
                    merge_point + Point2::new(ramp_heading.cos(), ramp_heading.sin()) * s
                } else {
                    merge_point + Point2::new(s, 0.0)
                }
            }
        }
    }

    fn heading(&self, t: f64) -> f64 {
        match *self {
            Motion::Straight { heading, .. } => heading,
            Motion::Arc {
                heading_ref,
                t_ref,
                yaw_rate,
                ..
            } => wrap_angle(heading_ref + yaw_rate * (t - t_ref)),
            Motion::Merge {
                ramp_heading, t_merge, ..
            } => {
                if t <= t_merge {
                    ramp_heading
                } else {
                    0.0
                }
            }
        }
    }

    fn frame(&self) -> ReferenceFrame {
        ReferenceFrame::new(self.position(0.0), self.heading(0.0))
    }
}

/// A generated scene with its oracle outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedScene {
    pub kind: ScenarioKind,
    pub scene: Scene,
    pub expected_graph: InteractionGraph,
    /// Expected free-reduced braid word in `braid_frame`.
    pub expected_word: BraidWord,
    /// Agent whose current frame the expected word is expressed in.
    pub braid_frame_agent: AgentId,
}

impl GeneratedScene {
    pub fn braid_frame(&self) -> ReferenceFrame {
        self.scene
            .frame_of_agent(&self.braid_frame_agent)
            .expect("generated agents are valid at t = 0")
    }

    /// Sidecar document with the oracle graph and braid word.
    pub fn expected_json(&self) -> String {
        #[derive(Serialize)]
        struct Sidecar<'a> {
            scene_id: &'a str,
            kind: ScenarioKind,
            braid_frame: String,
            graph: &'a InteractionGraph,
            braid_word: &'a BraidWord,
        }
        serde_json::to_string_pretty(&Sidecar {
            scene_id: self.scene.scene_id(),
            kind: self.kind,
            braid_frame: format!("agent:{}", self.braid_frame_agent),
            graph: &self.expected_graph,
            braid_word: &self.expected_word,
        })
        .expect("sidecar serialization cannot fail")
    }
}

/// Oracle labels and word computed in the template frame.
struct Oracle {
    labels: Vec<(usize, usize, CrossingClass)>,
    /// Letters (index, sign) before free reduction.
    word: Vec<(usize, Sign)>,
}

/// Longitudinal and lateral gaps of `mi` relative to `mj` in `frame`.
fn gaps(frame: &ReferenceFrame, mi: &Motion, mj: &Motion, t: f64) -> (f64, f64) {
    let d = frame.to_local(mi.position(t)) - frame.to_local(mj.position(t));
    (d.x, d.y)
}

/// First crossing label of `mi` through `mj` in `mj`'s frame over future
/// samples, or `None` if the draw violates the margins.
fn analytic_label(mi: &Motion, mj: &Motion, grid: &GridSpec) -> Option<CrossingClass> {
    let frame = mj.frame();
    let dt = grid.timestep_duration;
    let samples: Vec<(f64, f64)> = (1..=grid.future_horizon).map(|k| gaps(&frame, mi, mj, k as f64 * dt)).collect();
    if samples.iter().any(|s| s.0.abs() < DX_MARGIN) {
        return None;
    }
    let mut label = CrossingClass::NoCrossing;
    for w in samples.windows(2) {
        if (w[0].0 > 0.0) != (w[1].0 > 0.0) {
            let (a, b) = (w[0].1, w[1].1);
            if a.abs() < DY_MARGIN || b.abs() < DY_MARGIN || (a > 0.0) != (b > 0.0) {
                return None;
            }
            if label == CrossingClass::NoCrossing {
                label = if a > 0.0 { CrossingClass::Over } else { CrossingClass::Below };
            }
        }
    }
    Some(label)
}

/// Word letters of a two-strand scene in `frame` over samples `0..=T_F`, or
/// `None` on a margin violation.
fn analytic_word_two(m0: &Motion, m1: &Motion, frame: &ReferenceFrame, grid: &GridSpec) -> Option<Vec<(usize, Sign)>> {
    let dt = grid.timestep_duration;
    let local = |m: &Motion, k: usize| frame.to_local(m.position(k as f64 * dt));
    let mut letters = Vec::new();
    for k in 0..=grid.future_horizon {
        if (local(m1, k).x - local(m0, k).x).abs() < DX_MARGIN {
            return None;
        }
    }
    for k in 0..grid.future_horizon {
        let (a0, a1) = (local(m0, k), local(m0, k + 1));
        let (b0, b1) = (local(m1, k), local(m1, k + 1));
        let before = a0.x < b0.x;
        let after = a1.x < b1.x;
        if before != after {
            // the strand on the left before the swap moves right
            let (dy0, dy1) = if before { (a0.y - b0.y, a1.y - b1.y) } else { (b0.y - a0.y, b1.y - a1.y) };
            if dy0.abs() < DY_MARGIN || dy1.abs() < DY_MARGIN || (dy0 > 0.0) != (dy1 > 0.0) {
                return None;
            }
            letters.push((1, if dy0 > 0.0 { Sign::Positive } else { Sign::Negative }));
        }
    }
    Some(letters)
}

/// No pair changes x order in `frame` over samples `0..=T_F`.
fn analytic_no_swaps(motions: &[Motion], frame: &ReferenceFrame, grid: &GridSpec) -> bool {
    let dt = grid.timestep_duration;
    for i in 0..motions.len() {
        for j in i + 1..motions.len() {
            let d0 = frame.to_local(motions[i].position(0.0)).x - frame.to_local(motions[j].position(0.0)).x;
            for k in 0..=grid.future_horizon {
                let t = k as f64 * dt;
                let d = frame.to_local(motions[i].position(t)).x - frame.to_local(motions[j].position(t)).x;
                if d.abs() < DX_MARGIN || (d > 0.0) != (d0 > 0.0) {
                    return false;
                }
            }
        }
    }
    true
}

fn min_separation(motions: &[Motion], grid: &GridSpec) -> f64 {
    let dt = grid.timestep_duration;
    let mut best = f64::INFINITY;
    for k in (1 - grid.past_horizon as i64)..=grid.future_horizon as i64 {
        let t = k as f64 * dt;
        for i in 0..motions.len() {
            for j in i + 1..motions.len() {
                best = best.min(motions[i].position(t).distance(motions[j].position(t)));
            }
        }
    }
    best
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn coin(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random_bool(0.5) {
        1.0
    } else {
        -1.0
    }
}

fn straight(p0: Point2, heading: f64, speed: f64) -> Motion {
    Motion::Straight {
        p0,
        heading,
        speed,
        accel: 0.0,
        accel_until: 0.0,
    }
}

/// One draw of a template: motions plus construction-rule labels and word
/// (`None` where the template defers to analytic evaluation).
struct Draw {
    motions: Vec<Motion>,
    construction: Option<Oracle>,
}

fn draw_parallel(tpl: &ScenarioTemplate, rng: &mut ChaCha8Rng) -> Draw {
    let n = rng.random_range(2..=4usize);
    let speed = uniform(rng, tpl.speed_range);
    let lane = uniform(rng, tpl.lateral_offset_range);
    let mut xs: Vec<f64> = Vec::new();
    while xs.len() < n {
        let x = rng.random_range(-15.0..15.0);
        if xs.iter().all(|&o: &f64| (o - x).abs() >= 2.0) {
            xs.push(x);
        }
    }
    let motions = xs
        .iter()
        .enumerate()
        .map(|(k, &x)| straight(Point2::new(x, k as f64 * lane), 0.0, speed))
        .collect();
    let labels = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j, CrossingClass::NoCrossing)))
        .collect();
    Draw {
        motions,
        construction: Some(Oracle { labels, word: vec![] }),
    }
}

fn draw_overtake(tpl: &ScenarioTemplate, rng: &mut ChaCha8Rng) -> Draw {
    let horizon = tpl.grid.future_horizon as f64 * tpl.grid.timestep_duration;
    let slow = uniform(rng, tpl.speed_range);
    let dv = rng.random_range(2.0..6.0);
    let side = coin(rng);
    let offset = uniform(rng, tpl.lateral_offset_range);
    let t_cross = uniform(rng, tpl.crossing_time_fraction) * horizon;
    let gap = dv * t_cross;
    let motions = vec![
        straight(Point2::ORIGIN, 0.0, slow),
        straight(Point2::new(-gap, side * offset), 0.0, slow + dv),
    ];
    // the overtaker (1) crosses the overtaken agent (0) on its `side`
    let over_if_left = if side > 0.0 { CrossingClass::Over } else { CrossingClass::Below };
    let other = if side > 0.0 { CrossingClass::Below } else { CrossingClass::Over };
    let sign = if side > 0.0 { Sign::Positive } else { Sign::Negative };
    Draw {
        motions,
        construction: Some(Oracle {
            labels: vec![(1, 0, over_if_left), (0, 1, other)],
            word: vec![(1, sign)],
        }),
    }
}

fn draw_yield(tpl: &ScenarioTemplate, rng: &mut ChaCha8Rng) -> Option<Draw> {
    let horizon = tpl.grid.future_horizon as f64 * tpl.grid.timestep_duration;
    let dir = coin(rng); // agent 1 drives along dir * y
    let v = [uniform(rng, tpl.speed_range), uniform(rng, tpl.speed_range)];
    let (f0, f1) = tpl.crossing_time_fraction;
    // constant-speed arrival times at the conflict point
    let eta = [uniform(rng, (f0, f1)) * horizon, uniform(rng, (f0, f1)) * horizon];
    let dist = [v[0] * eta[0], v[1] * eta[1]];
    let earlier = if eta[0] <= eta[1] { 0 } else { 1 };
    let first = if rng.random_bool(tpl.yield_informativeness) { earlier } else { 1 - earlier };
    let second = 1 - first;

    // the first agent keeps its speed, or speeds up if it would not arrive
    // clearly before the other's constant-speed arrival
    let t_first = eta[first].min(eta[second] - 0.4).max(0.2 * horizon);
    let margin = rng.random_range(0.6..1.2);
    let t_second = t_first + margin;
    if t_second > 0.9 * horizon {
        return None;
    }
    let accel_for = |d: f64, v0: f64, t: f64| 2.0 * (d - v0 * t) / (t * t);
    let a_first = accel_for(dist[first], v[first], t_first);
    let a_second = accel_for(dist[second], v[second], t_second);
    if v[second] + a_second * t_second < 1.0 || a_first.abs() > 6.0 || a_second.abs() > 6.0 {
        return None;
    }
    let mut accel = [0.0; 2];
    let mut until = [0.0; 2];
    accel[first] = a_first;
    until[first] = t_first;
    accel[second] = a_second;
    until[second] = t_second;
    let heading = [0.0, dir * FRAC_PI_2];
    let motions: Vec<Motion> = (0..2)
        .map(|k| {
            let h: f64 = heading[k];
            Motion::Straight {
                p0: Point2::new(h.cos(), h.sin()) * -dist[k],
                heading: h,
                speed: v[k],
                accel: accel[k],
                accel_until: until[k],
            }
        })
        .collect();
    let t_of = [if first == 0 { t_first } else { t_second }, if first == 1 { t_first } else { t_second }];
    let zero_first = first == 0;
    // progress of 0 when 1 passes the conflict point, and vice versa
    let s0_at_t1 = if zero_first { 1.0 } else { -1.0 };
    let s1_at_t0 = -s0_at_t1;
    let class = |dy: f64| if dy > 0.0 { CrossingClass::Over } else { CrossingClass::Below };
    let in_window = |t: f64| t < horizon;
    let mut labels = Vec::new();
    // 0 -> 1 in 1's frame: dy = -dir * s0(t1)
    labels.push((
        0,
        1,
        if in_window(t_of[1]) { class(-dir * s0_at_t1) } else { CrossingClass::NoCrossing },
    ));
    // 1 -> 0 in 0's frame: dy = dir * s1(t0)
    labels.push((
        1,
        0,
        if in_window(t_of[0]) { class(dir * s1_at_t0) } else { CrossingClass::NoCrossing },
    ));
    // in 0's frame agent 0 starts left and passes the conflict point at t0,
    // with agent 1 at y = dir * s1(t0)
    let sign = if -dir * s1_at_t0 > 0.0 { Sign::Positive } else { Sign::Negative };
    Some(Draw {
        motions,
        construction: Some(Oracle {
            labels,
            word: vec![(1, sign)],
        }),
    })
}

fn draw_crossing_paths(tpl: &ScenarioTemplate, rng: &mut ChaCha8Rng) -> Draw {
    let horizon = tpl.grid.future_horizon as f64 * tpl.grid.timestep_duration;
    let v0 = uniform(rng, tpl.speed_range);
    let v1 = uniform(rng, tpl.speed_range);
    let t0 = uniform(rng, tpl.crossing_time_fraction) * horizon;
    let t1 = t0 + coin(rng) * rng.random_range(0.5..1.2);
    let angle = coin(rng) * rng.random_range(0.3 * PI..0.7 * PI);
    let yaw = coin(rng) * rng.random_range(0.1..0.35);
    let motions = vec![
        straight(Point2::new(-v0 * t0, 0.0), 0.0, v0),
        Motion::Arc {
            p_ref: Point2::ORIGIN,
            heading_ref: angle,
            t_ref: t1,
            speed: v1,
            yaw_rate: yaw,
        },
    ];
    Draw {
        motions,
        construction: None,
    }
}

fn draw_merge(tpl: &ScenarioTemplate, rng: &mut ChaCha8Rng) -> Draw {
    let horizon = tpl.grid.future_horizon as f64 * tpl.grid.timestep_duration;
    let v0 = uniform(rng, tpl.speed_range);
    // the ramp agent merges ahead when faster and behind when slower, so it
    // may pass the main-lane agent (or be passed) before reaching the lane
    let side = coin(rng);
    let v1 = (v0 + side * rng.random_range(1.0..6.0)).max(2.0);
    let t_merge = uniform(rng, tpl.crossing_time_fraction) * horizon;
    let gap = side * rng.random_range(5.0..10.0);
    let ramp = rng.random_range(0.15..0.5);
    let main = straight(Point2::ORIGIN, 0.0, v0);
    let merge_point = Point2::new(v0 * t_merge + gap, 0.0);
    let motions = vec![
        main,
        Motion::Merge {
            merge_point,
            ramp_heading: ramp,
            t_merge,
            speed: v1,
        },
    ];
    Draw {
        motions,
        construction: None,
    }
}

fn draw(tpl: &ScenarioTemplate, rng: &mut ChaCha8Rng) -> Option<Draw> {
    match tpl.kind {
        ScenarioKind::Parallel => Some(draw_parallel(tpl, rng)),
        ScenarioKind::Overtake => Some(draw_overtake(tpl, rng)),
        ScenarioKind::Yield => draw_yield(tpl, rng),
        ScenarioKind::CrossingPaths => Some(draw_crossing_paths(tpl, rng)),
        ScenarioKind::Merge => Some(draw_merge(tpl, rng)),
    }
}

/// Analytic oracle of a draw, checking margins; `None` rejects the draw.
fn analytic_oracle(motions: &[Motion], grid: &GridSpec) -> Option<Oracle> {
    let n = motions.len();
    let mut labels = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                labels.push((i, j, analytic_label(&motions[i], &motions[j], grid)?));
            }
        }
    }
    let frame = motions[0].frame();
    let word = if n == 2 {
        analytic_word_two(&motions[0], &motions[1], &frame, grid)?
    } else if analytic_no_swaps(motions, &frame, grid) {
        vec![]
    } else {
        return None;
    };
    Some(Oracle { labels, word })
}

fn free_reduced(letters: &[(usize, Sign)]) -> Vec<(usize, Sign)> {
    let mut stack: Vec<(usize, Sign)> = Vec::new();
    for &(i, s) in letters {
        if matches!(stack.last(), Some(&(j, r)) if j == i && r != s) {
            stack.pop();
        } else {
            stack.push((i, s));
        }
    }
    stack
}

fn build_scene(id: String, motions: &[Motion], grid: &GridSpec, transform: &RigidTransform) -> Scene {
    let dt = grid.timestep_duration;
    let agents = motions
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let states = ((1 - grid.past_horizon as i64)..=grid.future_horizon as i64)
                .map(|t| {
                    let ts = t as f64 * dt;
                    let p = transform.apply(m.position(ts));
                    AgentState::new(t, p.x, p.y).with_heading(transform.apply_heading(m.heading(ts)))
                })
                .collect();
            Trajectory::new(k.to_string(), states).expect("synthetic states are on a strictly increasing grid")
        })
        .collect();
    Scene::new(id, agents, grid.past_horizon, grid.future_horizon, dt).expect("synthetic scenes are valid")
}

fn generate_one(tpl: &ScenarioTemplate, index: usize, rng: &mut ChaCha8Rng) -> Result<GeneratedScene> {
    for _ in 0..MAX_RETRIES {
        let Some(d) = draw(tpl, rng) else { continue };
        let Some(analytic) = analytic_oracle(&d.motions, &tpl.grid) else {
            continue;
        };
        let oracle = match d.construction {
            Some(c) => {
                // construction and analytic evaluation describe the same motion
                debug_assert!(c.labels.iter().all(|l| analytic.labels.contains(l)), "{:?}", tpl.kind);
                debug_assert_eq!(free_reduced(&c.word), free_reduced(&analytic.word), "{:?}", tpl.kind);
                c
            }
            None => analytic,
        };
        if min_separation(&d.motions, &tpl.grid) < MIN_SEPARATION {
            continue;
        }
        let p0: Vec<Point2> = d.motions.iter().map(|m| m.position(0.0)).collect();
        let far = p0.iter().enumerate().any(|(i, a)| p0[i + 1..].iter().any(|b| a.distance(*b) > MAX_SPAWN_DISTANCE));
        if far {
            continue;
        }

        let transform = RigidTransform {
            rotation: rng.random_range(-PI..PI),
            translation: Point2::new(rng.random_range(-200.0..200.0), rng.random_range(-200.0..200.0)),
        };
        let id = format!("{}-{}-{index:05}", tpl.kind.as_str(), tpl.seed);
        let scene = build_scene(id, &d.motions, &tpl.grid, &transform);

        let ids: Vec<AgentId> = scene.agents().iter().map(|a| a.agent_id().clone()).collect();
        let mut labels = oracle.labels.clone();
        labels.sort_by_key(|&(i, j, _)| (i, j));
        let edges = labels
            .iter()
            .map(|&(i, j, label)| Edge {
                src: ids[i].clone(),
                dst: ids[j].clone(),
                label,
                distance_t0: p0[i].distance(p0[j]),
            })
            .collect();
        let expected_graph = InteractionGraph {
            scene_id: scene.scene_id().to_owned(),
            delta: DEFAULT_DELTA,
            max_neighbors: DEFAULT_MAX_NEIGHBORS,
            nodes: ids.clone(),
            edges,
        };

        // strand order by x in agent 0's frame at t = 0
        let frame = d.motions[0].frame();
        let mut order: Vec<usize> = (0..ids.len()).collect();
        order.sort_by(|&a, &b| {
            frame.to_local(p0[a]).x.total_cmp(&frame.to_local(p0[b]).x).then_with(|| ids[a].cmp(&ids[b]))
        });
        let reduced = free_reduced(&oracle.word);
        let mut permutation: Vec<usize> = (0..ids.len()).collect();
        if reduced.len() % 2 == 1 {
            permutation.swap(0, 1);
        }
        let expected_word = BraidWord {
            n_strands: ids.len(),
            strand_order: order.iter().map(|&k| ids[k].clone()).collect(),
            letters: reduced
                .iter()
                .map(|&(index, sign)| Letter {
                    index,
                    sign,
                    t_star: None,
                })
                .collect(),
            permutation,
        };
        return Ok(GeneratedScene {
            kind: tpl.kind,
            scene,
            expected_graph,
            expected_word,
            braid_frame_agent: ids[0].clone(),
        });
    }
    Err(Error::InfeasibleParameters(format!(
        "{:?}: no admissible draw after {MAX_RETRIES} attempts",
        tpl.kind
    )))
}

/// Generates `n_scenes` scenes from `template`, deterministically in its seed.
pub fn generate(template: &ScenarioTemplate, n_scenes: usize) -> Result<Vec<GeneratedScene>> {
    template.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(template.seed);
    (0..n_scenes).map(|i| generate_one(template, i, &mut rng)).collect()
}

/// Template seed for the `index`-th kind of a mixed dataset.
pub fn kind_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(31).wrapping_add(index as u64)
}

/// A mixed dataset: `per_kind` scenes of every listed kind, interleaved.
pub fn generate_mixed(kinds: &[ScenarioKind], per_kind: usize, seed: u64, grid: GridSpec) -> Result<Vec<GeneratedScene>> {
    let mut by_kind = Vec::new();
    for (k, &kind) in kinds.iter().enumerate() {
        let tpl = ScenarioTemplate {
            kind,
            grid,
            seed: kind_seed(seed, k),
            ..Default::default()
        };
        by_kind.push(generate(&tpl, per_kind)?);
    }
    let mut out = Vec::with_capacity(kinds.len() * per_kind);
    for i in 0..per_kind {
        for scenes in &by_kind {
            out.push(scenes[i].clone());
        }
    }
    Ok(out)
}

/// Adds smooth, seed-deterministic noise to every predicted trajectory:
/// a random drift growing linearly over the horizon plus a half-sine bump,
/// both scaled by `noise_scale` meters. Mode probabilities pass through.
pub fn perturb(preds: &PredictionSet, noise_scale: f64, seed: u64) -> Result<PredictionSet> {
    if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
        return Err(Error::invalid("noise_scale", noise_scale.to_string()));
    }
    if noise_scale == 0.0 {
        return Ok(preds.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { rng.sample(StandardNormal) };
    let agents = preds
        .agents()
        .iter()
        .map(|a| AgentPrediction {
            agent_id: a.agent_id.clone(),
            modes: a
                .modes
                .iter()
                .map(|m| {
                    let drift = Point2::new(normal(), normal());
                    let bump = Point2::new(normal(), normal());
                    let n = m.len() as f64;
                    m.iter()
                        .enumerate()
                        .map(|(s, &p)| {
                            let u = (s + 1) as f64 / n;
                            p + (drift * u + bump * (PI * u).sin()) * noise_scale
                        })
                        .collect()
                })
                .collect(),
        })
        .collect();
    preds.with_agents(agents)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_in_seed() {
        for kind in ScenarioKind::ALL {
            let tpl = ScenarioTemplate::new(kind, 7);
            let a = generate(&tpl, 5).unwrap();
            let b = generate(&tpl, 5).unwrap();
            assert_eq!(a, b);
            let c = generate(&ScenarioTemplate::new(kind, 8), 5).unwrap();
            assert_ne!(a[0].scene, c[0].scene);
        }
    }

    #[test]
    fn construction_rules_agree_with_analytic_evaluation() {
        for kind in [ScenarioKind::Parallel, ScenarioKind::Overtake, ScenarioKind::Yield] {
            let tpl = ScenarioTemplate::new(kind, 99);
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let mut checked = 0;
            while checked < 300 {
                let Some(d) = draw(&tpl, &mut rng) else { continue };
                let Some(analytic) = analytic_oracle(&d.motions, &tpl.grid) else { continue };
                let c = d.construction.unwrap();
                let mut a = analytic.labels.clone();
                let mut b = c.labels.clone();
                a.sort_by_key(|l| (l.0, l.1));
                b.sort_by_key(|l| (l.0, l.1));
                assert_eq!(a, b, "{kind:?}");
                assert_eq!(free_reduced(&analytic.word), free_reduced(&c.word), "{kind:?}");
                checked += 1;
            }
        }
    }

    #[test]
    fn parallel_scenes_never_cross() {
        for g in generate(&ScenarioTemplate::new(ScenarioKind::Parallel, 1), 20).unwrap() {
            assert!(g.expected_graph.edges.iter().all(|e| e.label == CrossingClass::NoCrossing));
            assert!(g.expected_word.is_empty());
            let n = g.scene.agents().len();
            assert_eq!(g.expected_graph.edges.len(), n * (n - 1));
        }
    }

    #[test]
    fn overtake_labels_follow_side() {
        for g in generate(&ScenarioTemplate::new(ScenarioKind::Overtake, 2), 20).unwrap() {
            let l10 = g.expected_graph.label(&"1".into(), &"0".into()).unwrap();
            let l01 = g.expected_graph.label(&"0".into(), &"1".into()).unwrap();
            assert_ne!(l10, CrossingClass::NoCrossing);
            assert_ne!(l10, l01);
            assert_eq!(g.expected_word.len(), 1);
        }
    }

    #[test]
    fn yield_edges_agree() {
        // for perpendicular paths both directed edges carry the same label
        for g in generate(&ScenarioTemplate::new(ScenarioKind::Yield, 3), 30).unwrap() {
            let l10 = g.expected_graph.label(&"1".into(), &"0".into()).unwrap();
            let l01 = g.expected_graph.label(&"0".into(), &"1".into()).unwrap();
            assert_eq!(l10, l01);
            assert_ne!(l10, CrossingClass::NoCrossing);
        }
    }

    #[test]
    fn scenes_are_collision_free() {
        for kind in ScenarioKind::ALL {
            for g in generate(&ScenarioTemplate::new(kind, 11), 10).unwrap() {
                let s = &g.scene;
                for t in (1 - s.past_horizon() as i64)..=s.future_horizon() as i64 {
                    let ps: Vec<Point2> = s.agents().iter().map(|a| a.position_at(t).unwrap()).collect();
                    for i in 0..ps.len() {
                        for j in i + 1..ps.len() {
                            assert!(ps[i].distance(ps[j]) >= MIN_SEPARATION);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn infeasible_template_is_reported() {
        let tpl = ScenarioTemplate {
            kind: ScenarioKind::Yield,
            crossing_time_fraction: (0.95, 0.99),
            ..ScenarioTemplate::new(ScenarioKind::Yield, 0)
        };
        assert!(matches!(generate(&tpl, 1), Err(Error::InfeasibleParameters(_))));
        let bad = ScenarioTemplate {
            speed_range: (5.0, 1.0),
            ..ScenarioTemplate::new(ScenarioKind::Parallel, 0)
        };
        assert!(matches!(generate(&bad, 1), Err(Error::Invalid { .. })));
    }

    #[test]
    fn perturb_identity_and_passthrough() {
        let g = &generate(&ScenarioTemplate::new(ScenarioKind::Overtake, 4), 1).unwrap()[0];
        let p = PredictionSet::from_ground_truth(&g.scene, 3).unwrap();
        assert_eq!(perturb(&p, 0.0, 5).unwrap(), p);
        let q = perturb(&p, 2.0, 5).unwrap();
        assert_ne!(q, p);
        assert_eq!(q.mode_probs(), p.mode_probs());
        assert_eq!(q, perturb(&p, 2.0, 5).unwrap());
        assert!(perturb(&p, -1.0, 5).is_err());
    }
}
