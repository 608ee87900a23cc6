#![allow(dead_code)]

use braidkit::synth::perturb;
use braidkit::{AgentPrediction, Point2, PredictionSet, RigidTransform, Scene, Trajectory};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Agents moving roughly straight with a random walk on top, so that the
/// sampled polylines bend and cross often. All states are valid.
pub fn random_scene(rng: &mut ChaCha8Rng, id: &str, n_agents: usize, past: usize, future: usize) -> Scene {
    let agents = (0..n_agents)
        .map(|a| {
            let p0 = Point2::new(rng.random_range(-15.0..15.0), rng.random_range(-15.0..15.0));
            let v = Point2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let mut pts: Vec<Point2> = (0..past).rev().map(|k| p0 - v * k as f64).collect();
            let mut p = p0;
            let mut vel = v;
            for _ in 0..future {
                vel = vel + Point2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                p = p + vel;
                pts.push(p);
            }
            Trajectory::from_points(a.to_string(), 1 - past as i64, pts).unwrap()
        })
        .collect();
    Scene::new(id, agents, past, future, 0.1).unwrap()
}

/// Random joint predictions with random (non-uniform) mode probabilities.
pub fn random_predictions(rng: &mut ChaCha8Rng, scene: &Scene, k: usize, spread: f64) -> PredictionSet {
    let tf = scene.future_horizon() as i64;
    let agents = scene
        .agents()
        .iter()
        .map(|traj| AgentPrediction {
            agent_id: traj.agent_id().clone(),
            modes: (0..k)
                .map(|_| {
                    (1..=tf)
                        .map(|t| {
                            let g = traj.position_at(t).unwrap();
                            g + Point2::new(rng.random_range(-spread..spread), rng.random_range(-spread..spread))
                        })
                        .collect()
                })
                .collect(),
        })
        .collect();
    PredictionSet::new(scene.scene_id(), random_probs(rng, k), agents).unwrap()
}

pub fn random_probs(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Ground truth with smooth noise per mode and shuffled probabilities.
pub fn perturbed_predictions(rng: &mut ChaCha8Rng, scene: &Scene, k: usize, noise: f64) -> PredictionSet {
    let gt = PredictionSet::from_ground_truth(scene, k).unwrap();
    let noisy = perturb(&gt, noise, rng.random()).unwrap();
    PredictionSet::new(scene.scene_id(), random_probs(rng, k), noisy.agents().to_vec()).unwrap()
}

pub fn random_transform(rng: &mut ChaCha8Rng) -> RigidTransform {
    RigidTransform {
        rotation: rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        translation: Point2::new(rng.random_range(-200.0..200.0), rng.random_range(-200.0..200.0)),
    }
}

pub fn transform_scene(scene: &Scene, tf: &RigidTransform) -> Scene {
    scene.map_positions(|p| tf.apply(p), |h| tf.apply_heading(h))
}

pub fn transform_predictions(preds: &PredictionSet, tf: &RigidTransform) -> PredictionSet {
    preds.map_positions(|p| tf.apply(p))
}

/// `|a − b| / max(|a|, |b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
