//! A small joint-prediction model for exercising the braid loss end to end.
//!
//! Each agent is encoded from its own past and its nearest neighbour's past,
//! both in the agent's `t = 0` frame. A shared ReLU encoder feeds `K` linear
//! mode heads that produce the per-mode embeddings; each embedding is decoded
//! into a residual over constant-velocity extrapolation and scored, with the
//! scene-level mode score being the mean over agents. Training minimizes a
//! winner-takes-all joint regression loss, the mode cross-entropy towards the
//! winner, and `λ` times the braid loss.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{EmbeddingSet, RelativeEncoding};
use super::head::{EdgeClassifierHead, DEFAULT_HEAD_HIDDEN};
use super::loss::{combined_loss, scene_braid_loss, BraidLossConfig, ClassWeights};
use super::nn::{Adam, Mlp, Trace};
use crate::braid::{build_interaction_graph, InteractionGraph, DEFAULT_DELTA, DEFAULT_MAX_NEIGHBORS};
use crate::error::{Error, Result};
use crate::geometry::{Point2, ReferenceFrame};
use crate::metrics::{default_agents, Aggregate, SceneReport};
use crate::scene::{AgentId, AgentPrediction, PredictionSet, Scene};

/// Meters per model unit for positions.
const POS_SCALE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "D")]
    pub d: usize,
    /// Hidden width of the edge classifier; 0 makes it a single linear layer.
    #[serde(rename = "H")]
    pub h: usize,
    /// Width of the two-layer agent encoder.
    pub encoder_width: usize,
    pub lambda: f64,
    pub class_weights: ClassWeights,
    /// Multiplier on the regression loss (squared error in m², summed over
    /// the future horizon).
    pub regression_weight: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Fraction of the dataset held out for evaluation (taken from the end).
    pub holdout_fraction: f64,
    pub seed: u64,
    pub delta: f64,
    pub max_neighbors: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            k: 6,
            d: 32,
            h: DEFAULT_HEAD_HIDDEN,
            encoder_width: 128,
            lambda: BraidLossConfig::default().lambda,
            class_weights: ClassWeights::default(),
            regression_weight: 1.0,
            lr: 2e-3,
            epochs: 20,
            batch_size: 16,
            holdout_fraction: 0.2,
            seed: 0,
            delta: DEFAULT_DELTA,
            max_neighbors: DEFAULT_MAX_NEIGHBORS,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.d == 0 || self.encoder_width == 0 || self.batch_size == 0 {
            return Err(Error::invalid("trainer config", "K, D, encoder_width and batch_size must be positive"));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::invalid("holdout_fraction", self.holdout_fraction.to_string()));
        }
        if !(self.regression_weight >= 0.0 && self.regression_weight.is_finite()) {
            return Err(Error::invalid("regression_weight", self.regression_weight.to_string()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda", self.lambda.to_string()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid("lr", self.lr.to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyModel {
    pub k: usize,
    pub d: usize,
    pub past: usize,
    pub future: usize,
    encoder: Mlp,
    modes: Mlp,
    decoder: Mlp,
    scorer: Mlp,
    pub head: EdgeClassifierHead,
}

fn input_dim(past: usize) -> usize {
    4 * past + 1
}

impl ToyModel {
    pub fn new(cfg: &TrainerConfig, past: usize, future: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        ToyModel {
            k: cfg.k,
            d: cfg.d,
            past,
            future,
            encoder: Mlp::new(&[input_dim(past), cfg.encoder_width, cfg.encoder_width], true, &mut rng),
            modes: Mlp::new(&[cfg.encoder_width, cfg.k * cfg.d], false, &mut rng),
            decoder: Mlp::new(&[cfg.d, 2 * future], false, &mut rng),
            scorer: Mlp::new(&[cfg.d, 1], false, &mut rng),
            head: EdgeClassifierHead::new(cfg.d, if cfg.h == 0 { &[] } else { std::slice::from_ref(&cfg.h) }, &mut rng),
        }
    }

    fn parts(&self) -> [&Mlp; 5] {
        [&self.encoder, &self.modes, &self.decoder, &self.scorer, self.head.mlp()]
    }

    fn parts_mut(&mut self) -> [&mut Mlp; 5] {
        [
            &mut self.encoder,
            &mut self.modes,
            &mut self.decoder,
            &mut self.scorer,
            self.head.mlp_mut(),
        ]
    }

    /// Every trainable parameter, part by part.
    pub fn params(&self) -> Vec<f64> {
        self.parts().iter().flat_map(|m| m.params().iter().copied()).collect()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        let n: usize = self.parts().iter().map(|m| m.num_params()).sum();
        if params.len() != n {
            return Err(Error::WidthMismatch {
                expected: n,
                found: params.len(),
            });
        }
        let mut rest = params;
        for m in self.parts_mut() {
            let (head, tail) = rest.split_at(m.num_params());
            m.params_mut().copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    /// Total training loss of one scene and its gradient, laid out like
    /// [`ToyModel::params`].
    pub fn loss_and_grad(&self, scene: &Scene, cfg: &TrainerConfig) -> Result<(f64, Vec<f64>)> {
        let p = Prepared::new(scene, self, Some((cfg.delta, cfg.max_neighbors)))?;
        let g = scene_step(self, &p, cfg)?;
        Ok((g.total, g.grads.concat()))
    }

    /// Joint predictions in scene coordinates and the per-mode embeddings.
    pub fn predict(&self, scene: &Scene) -> Result<(PredictionSet, EmbeddingSet)> {
        let p = Prepared::new(scene, self, None)?;
        let f = self.forward(&p);
        Ok((f.preds, f.embeddings))
    }

    fn forward(&self, p: &Prepared) -> Forward {
        let (k, d) = (self.k, self.d);
        let n = p.agents.len();
        let mut enc = Vec::with_capacity(n);
        let mut mode_traces = Vec::with_capacity(n);
        let mut dec = Vec::with_capacity(n);
        let mut scores = vec![vec![0.0; k]; n];
        let mut score_traces = Vec::with_capacity(n);
        let mut emb = Vec::with_capacity(n * k * d);
        let mut local = Vec::with_capacity(n);
        for a in 0..n {
            let te = self.encoder.forward_trace(&p.inputs[a]);
            let tm = self.modes.forward_trace(te.output());
            let mut dec_a = Vec::with_capacity(k);
            let mut sc_a = Vec::with_capacity(k);
            let mut loc_a = Vec::with_capacity(k);
            for m in 0..k {
                let e = &tm.output()[m * d..(m + 1) * d];
                emb.extend_from_slice(e);
                let td = self.decoder.forward_trace(e);
                let ts = self.scorer.forward_trace(e);
                scores[a][m] = ts.output()[0];
                loc_a.push(
                    (0..self.future)
                        .map(|s| p.cv[a][s] + Point2::new(td.output()[2 * s], td.output()[2 * s + 1]) * POS_SCALE)
                        .collect::<Vec<_>>(),
                );
                dec_a.push(td);
                sc_a.push(ts);
            }
            enc.push(te);
            mode_traces.push(tm);
            dec.push(dec_a);
            score_traces.push(sc_a);
            local.push(loc_a);
        }
        let scene_scores: Vec<f64> = (0..k).map(|m| scores.iter().map(|s| s[m]).sum::<f64>() / n as f64).collect();
        let probs = softmax_vec(&scene_scores);
        let agents = (0..n)
            .map(|a| AgentPrediction {
                agent_id: p.agents[a].clone(),
                modes: local[a]
                    .iter()
                    .map(|m| m.iter().map(|&q| p.frames[a].to_scene(q)).collect())
                    .collect(),
            })
            .collect();
        let preds = PredictionSet::new(p.scene.scene_id(), probs.clone(), agents)
            .expect("model outputs are finite and probabilities normalized");
        let embeddings = EmbeddingSet {
            agents: p.agents.clone(),
            num_modes: k,
            dim: d,
            data: emb,
        };
        Forward {
            enc,
            mode_traces,
            dec,
            score_traces,
            local,
            scene_scores,
            probs,
            preds,
            embeddings,
        }
    }
}

fn softmax_vec(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

struct Forward {
    enc: Vec<Trace>,
    mode_traces: Vec<Trace>,
    dec: Vec<Vec<Trace>>,
    score_traces: Vec<Vec<Trace>>,
    /// `[agent][mode][s]`, agent frame.
    local: Vec<Vec<Vec<Point2>>>,
    scene_scores: Vec<f64>,
    probs: Vec<f64>,
    preds: PredictionSet,
    embeddings: EmbeddingSet,
}

/// A scene with model inputs and targets precomputed.
struct Prepared {
    scene: Scene,
    agents: Vec<AgentId>,
    frames: Vec<ReferenceFrame>,
    inputs: Vec<Vec<f64>>,
    /// Constant-velocity extrapolation in the agent frame.
    cv: Vec<Vec<Point2>>,
    /// Ground-truth future in the agent frame; empty without targets.
    gt: Vec<Vec<Point2>>,
    graph: Option<InteractionGraph>,
}

impl Prepared {
    fn new(scene: &Scene, model: &ToyModel, graph_params: Option<(f64, usize)>) -> Result<Self> {
        if scene.past_horizon() != model.past || scene.future_horizon() != model.future {
            return Err(Error::HorizonMismatch {
                expected: model.future,
                found: scene.future_horizon(),
            });
        }
        let agents = if graph_params.is_some() {
            default_agents(scene)
        } else {
            scene.agents().iter().filter(|a| a.valid_state_at(0).is_some()).map(|a| a.agent_id().clone()).collect()
        };
        if agents.is_empty() {
            return Err(Error::invalid("scene", format!("{} has no agent to model", scene.scene_id())));
        }
        let frames = agents.iter().map(|id| scene.frame_of_agent(id)).collect::<Result<Vec<_>>>()?;
        let past = model.past as i64;
        let current: Vec<Point2> = scene
            .agents()
            .iter()
            .map(|a| a.valid_state_at(0).map_or(Point2::new(f64::NAN, f64::NAN), |s| s.position))
            .collect();
        let mut inputs = Vec::with_capacity(agents.len());
        let mut cv = Vec::with_capacity(agents.len());
        for (id, frame) in agents.iter().zip(&frames) {
            let me = scene.agent(id)?;
            let here = scene.agents().iter().position(|a| a.agent_id() == id).expect("agent is in scene");
            let past_local = |traj: &crate::scene::Trajectory| -> Vec<f64> {
                let fallback = traj.valid_state_at(0).map_or(Point2::ORIGIN, |s| s.position);
                (1 - past..=0)
                    .flat_map(|t| {
                        let q = frame.to_local(traj.valid_state_at(t).map_or(fallback, |s| s.position)) * (1.0 / POS_SCALE);
                        [q.x, q.y]
                    })
                    .collect()
            };
            let mut x = past_local(me);
            let nearest = (0..current.len())
                .filter(|&o| o != here && current[o].is_finite())
                .min_by(|&a, &b| current[a].distance(current[here]).total_cmp(&current[b].distance(current[here])));
            match nearest {
                Some(o) => {
                    x.extend(past_local(&scene.agents()[o]));
                    x.push(1.0);
                }
                None => {
                    x.extend(std::iter::repeat_n(0.0, 2 * model.past + 1));
                }
            }
            inputs.push(x);
            let p0 = me.valid_state_at(0).expect("modeled agents are valid at t = 0").position;
            let v = me.valid_state_at(-1).map_or(Point2::ORIGIN, |s| frame.to_local(p0) - frame.to_local(s.position));
            let base = frame.to_local(p0);
            cv.push((1..=model.future).map(|s| base + v * s as f64).collect());
        }
        let (gt, graph) = match graph_params {
            None => (vec![], None),
            Some((delta, max_neighbors)) => {
                let gt = agents
                    .iter()
                    .zip(&frames)
                    .map(|(id, f)| {
                        let traj = scene.agent(id)?;
                        (1..=model.future as i64)
                            .map(|t| {
                                traj.position_at(t).map(|q| f.to_local(q)).ok_or_else(|| Error::MissingGroundTruth {
                                    agent: id.clone(),
                                    t,
                                })
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                let mut g = build_interaction_graph(scene, delta, max_neighbors)?;
                g.edges.retain(|e| agents.contains(&e.src) && agents.contains(&e.dst));
                (gt, Some(g))
            }
        };
        Ok(Prepared {
            scene: scene.clone(),
            agents,
            frames,
            inputs,
            cv,
            gt,
            graph,
        })
    }
}

/// One scene's losses and gradients, one buffer per model part.
struct SceneGrad {
    total: f64,
    braid: f64,
    grads: [Vec<f64>; 5],
}

fn scene_step(model: &ToyModel, p: &Prepared, cfg: &TrainerConfig) -> Result<SceneGrad> {
    let f = model.forward(p);
    let (k, d, n) = (model.k, model.d, p.agents.len());
    let graph = p.graph.as_ref().expect("training scenes carry a graph");

    // winner-takes-all over joint modes; squared error in m² summed over
    // the horizon, averaged over agents
    let err = |a: usize, m: usize| -> f64 { f.local[a][m].iter().zip(&p.gt[a]).map(|(q, g)| (*q - *g).norm().powi(2)).sum::<f64>() };
    let joint: Vec<f64> = (0..k).map(|m| (0..n).map(|a| err(a, m)).sum()).collect();
    let winner = (0..k).min_by(|&a, &b| joint[a].total_cmp(&joint[b])).expect("K >= 1");
    let reg = cfg.regression_weight * joint[winner] / n as f64;
    let lse = {
        let mx = f.scene_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        mx + f.scene_scores.iter().map(|s| (s - mx).exp()).sum::<f64>().ln()
    };
    let cls = lse - f.scene_scores[winner];

    let encoding = RelativeEncoding::ZeroPad { position_scale: POS_SCALE };
    let braid = scene_braid_loss(&p.scene, &f.preds, graph, &f.embeddings, &model.head, &encoding, &cfg.class_weights)?;
    let total = combined_loss(reg, cls, braid.loss, cfg.lambda);

    let mut grads = model.parts().map(|m| vec![0.0; m.num_params()]);
    let mut d_emb = vec![vec![0.0; d]; n * k];
    for a in 0..n {
        // regression, through the decoder of the winning mode
        let dout: Vec<f64> = f.local[a][winner]
            .iter()
            .zip(&p.gt[a])
            .flat_map(|(q, g)| {
                let r = (*q - *g) * (2.0 * cfg.regression_weight * POS_SCALE / n as f64);
                [r.x, r.y]
            })
            .collect();
        let de = model.decoder.backward(&f.dec[a][winner], &dout, &mut grads[2]);
        add(&mut d_emb[a * k + winner], &de);
        // mode classification, through every scorer
        for m in 0..k {
            let ds = (f.probs[m] - if m == winner { 1.0 } else { 0.0 }) / n as f64;
            let de = model.scorer.backward(&f.score_traces[a][m], &[ds], &mut grads[3]);
            add(&mut d_emb[a * k + m], &de);
        }
    }
    if cfg.lambda != 0.0 {
        for (slot, chunk) in d_emb.iter_mut().zip(braid.d_embeddings.chunks(d)) {
            for (x, y) in slot.iter_mut().zip(chunk) {
                *x += cfg.lambda * y;
            }
        }
        for (x, y) in grads[4].iter_mut().zip(&braid.d_head) {
            *x += cfg.lambda * y;
        }
    }
    for a in 0..n {
        let dm: Vec<f64> = d_emb[a * k..(a + 1) * k].concat();
        let dh = model.modes.backward(&f.mode_traces[a], &dm, &mut grads[1]);
        model.encoder.backward(&f.enc[a], &dh, &mut grads[0]);
    }
    Ok(SceneGrad {
        total,
        braid: braid.loss,
        grads,
    })
}

fn add(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

/// Per-epoch training trace; metrics are on the evaluation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub min_joint_fde: f64,
    pub min_joint_ade: f64,
    pub brsim_k: Option<f64>,
    pub brsim_1: Option<f64>,
    pub loss_total: f64,
    pub loss_braid: f64,
}

impl EpochRecord {
    pub const CSV_HEADER: [&'static str; 7] = [
        "epoch",
        "min_joint_fde",
        "min_joint_ade",
        "brsim_k",
        "brsim_1",
        "loss_total",
        "loss_braid",
    ];

    pub fn csv_row(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
        vec![
            self.epoch.to_string(),
            self.min_joint_fde.to_string(),
            self.min_joint_ade.to_string(),
            opt(self.brsim_k),
            opt(self.brsim_1),
            self.loss_total.to_string(),
            self.loss_braid.to_string(),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ToyModel,
    pub trace: Vec<EpochRecord>,
    /// Evaluation-set metrics after the last epoch.
    pub eval: Aggregate,
}

/// Scene reports of `model` on `scenes` at `K = model.k`.
pub fn evaluate_model(model: &ToyModel, scenes: &[Scene], delta: f64, max_neighbors: usize) -> Result<Vec<SceneReport>> {
    scenes
        .iter()
        .map(|s| {
            let p = Prepared::new(s, model, Some((delta, max_neighbors)))?;
            let f = model.forward(&p);
            SceneReport::compute(s, &f.preds, p.graph.as_ref().expect("graph"), model.k, &p.agents)
        })
        .collect()
}

/// Trains on the first part of `dataset` and evaluates on the last
/// `cfg.holdout_fraction` after every epoch. Deterministic in `cfg.seed`.
pub fn train_toy(dataset: &[Scene], cfg: &TrainerConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let held = (dataset.len() as f64 * cfg.holdout_fraction).round() as usize;
    let (train, eval) = dataset.split_at(dataset.len() - held);
    train_toy_split(train, eval, cfg)
}

/// Trains a fresh model on `train` and evaluates on `eval` after every epoch.
pub fn train_toy_split(train: &[Scene], eval: &[Scene], cfg: &TrainerConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let first = train.first().ok_or_else(|| Error::invalid("training set", "empty"))?;
    let mut model = ToyModel::new(cfg, first.past_horizon(), first.future_horizon());
    let prepared = train
        .iter()
        .map(|s| Prepared::new(s, &model, Some((cfg.delta, cfg.max_neighbors))))
        .collect::<Result<Vec<_>>>()?;
    let mut opts: Vec<Adam> = model.parts().iter().map(|m| Adam::new(m.num_params(), cfg.lr)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut eval_agg = Aggregate::default();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut sum_total, mut sum_braid) = (0.0, 0.0);
        for (step, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut acc = model.parts().map(|m| vec![0.0; m.num_params()]);
            for &i in batch {
                let g = scene_step(&model, &prepared[i], cfg)?;
                if !g.total.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        step,
                        detail: format!("scene {}", prepared[i].scene.scene_id()),
                    });
                }
                sum_total += g.total;
                sum_braid += g.braid;
                for (a, b) in acc.iter_mut().zip(&g.grads) {
                    add(a, b);
                }
            }
            let scale = 1.0 / batch.len() as f64;
            for ((part, opt), g) in model.parts_mut().into_iter().zip(&mut opts).zip(&mut acc) {
                g.iter_mut().for_each(|v| *v *= scale);
                opt.step(part.params_mut(), g);
            }
        }
        let n = prepared.len() as f64;
        if !eval.is_empty() {
            eval_agg = Aggregate::from_reports(&evaluate_model(&model, eval, cfg.delta, cfg.max_neighbors)?);
        }
        log::info!(
            "epoch {epoch}: loss {:.4} braid {:.4} minJointFDE {:.3} brsim_1 {:?}",
            sum_total / n,
            sum_braid / n,
            eval_agg.min_joint_fde_k,
            eval_agg.brsim_1
        );
        trace.push(EpochRecord {
            epoch,
            min_joint_fde: eval_agg.min_joint_fde_k,
            min_joint_ade: eval_agg.min_joint_ade_k,
            brsim_k: eval_agg.brsim_k,
            brsim_1: eval_agg.brsim_1,
            loss_total: sum_total / n,
            loss_braid: sum_braid / n,
        });
    }
    Ok(TrainOutcome {
        model,
        trace,
        eval: eval_agg,
    })
}
