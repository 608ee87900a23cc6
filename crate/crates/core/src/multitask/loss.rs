//! The class-weighted braid cross-entropy and the combined objective.

use serde::{Deserialize, Serialize};

use super::features::{edge_features, relative_feature, EmbeddingSet, RelativeEncoding};
use super::head::EdgeClassifierHead;
use crate::braid::{CrossingClass, InteractionGraph};
use crate::error::{Error, Result};
use crate::metrics::best_mode_pair;
use crate::scene::{PredictionSet, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub below: f64,
    pub over: f64,
    pub no_crossing: f64,
}

impl Default for ClassWeights {
    fn default() -> Self {
        ClassWeights {
            below: 8.0,
            over: 8.0,
            no_crossing: 1.0,
        }
    }
}

impl ClassWeights {
    pub const UNIFORM: ClassWeights = ClassWeights {
        below: 1.0,
        over: 1.0,
        no_crossing: 1.0,
    };

    pub fn get(&self, c: CrossingClass) -> f64 {
        match c {
            CrossingClass::Below => self.below,
            CrossingClass::Over => self.over,
            CrossingClass::NoCrossing => self.no_crossing,
        }
    }

    fn validate(&self) -> Result<()> {
        for w in [self.below, self.over, self.no_crossing] {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::invalid("class weight", w.to_string()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BraidLossConfig {
    pub lambda: f64,
    pub class_weights: ClassWeights,
}

impl Default for BraidLossConfig {
    fn default() -> Self {
        BraidLossConfig {
            lambda: 1.0,
            class_weights: ClassWeights::default(),
        }
    }
}

pub fn softmax(logits: &[f64; 3]) -> [f64; 3] {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = logits.map(|z| (z - m).exp());
    let s: f64 = e.iter().sum();
    e.map(|v| v / s)
}

fn log_sum_exp(logits: &[f64; 3]) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln()
}

/// `w_c · (−log softmax(logits)_c)` for one edge.
pub fn edge_loss(logits: &[f64; 3], label: CrossingClass, weights: &ClassWeights) -> f64 {
    weights.get(label) * (log_sum_exp(logits) - logits[label.index()])
}

/// Edge loss and its gradient `w_c · (softmax − onehot_c)`.
pub fn edge_loss_grad(logits: &[f64; 3], label: CrossingClass, weights: &ClassWeights) -> (f64, [f64; 3]) {
    let w = weights.get(label);
    let mut g = softmax(logits);
    g[label.index()] -= 1.0;
    (edge_loss(logits, label, weights), g.map(|v| w * v))
}

/// Weighted cross-entropy of `true_class` at mode `k_star` (zero-based) and
/// its gradient with respect to all `K × 3` logits; only row `k_star` is
/// nonzero.
pub fn braid_loss(
    logits: &[[f64; 3]],
    true_class: CrossingClass,
    k_star: usize,
    weights: &ClassWeights,
) -> Result<(f64, Vec<[f64; 3]>)> {
    weights.validate()?;
    if k_star >= logits.len() {
        return Err(Error::TooManyModes {
            requested: k_star + 1,
            available: logits.len(),
        });
    }
    let (l, g) = edge_loss_grad(&logits[k_star], true_class, weights);
    let mut grad = vec![[0.0; 3]; logits.len()];
    grad[k_star] = g;
    Ok((l, grad))
}

/// Batch braid loss: the mean of per-edge losses, 0 without edges.
pub fn mean_braid_loss(per_edge: &[f64]) -> f64 {
    if per_edge.is_empty() {
        0.0
    } else {
        per_edge.iter().sum::<f64>() / per_edge.len() as f64
    }
}

/// `L_reg + L_cls + λ · L_braid`.
pub fn combined_loss(reg: f64, cls: f64, braid: f64, lambda: f64) -> f64 {
    reg + cls + lambda * braid
}

/// The braid loss of one scene and its gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneBraidLoss {
    /// Mean over graph edges.
    pub loss: f64,
    /// The gating mode of every edge, aligned with `graph.edges`.
    pub k_star: Vec<usize>,
    /// `∂loss/∂embeddings`, laid out like [`EmbeddingSet::data`]. Only the
    /// `k*` rows of each edge's endpoints are nonzero.
    pub d_embeddings: Vec<f64>,
    /// `∂loss/∂θ_head`.
    pub d_head: Vec<f64>,
}

/// Braid loss of a scene: every edge `i → j` of the ground-truth graph is
/// classified from the embeddings of the mode `k*` closest to the joint
/// ground truth of `i` and `j`, and scored against its label.
pub fn scene_braid_loss(
    scene: &Scene,
    preds: &PredictionSet,
    graph: &InteractionGraph,
    embeddings: &EmbeddingSet,
    head: &EdgeClassifierHead,
    encoding: &RelativeEncoding,
    weights: &ClassWeights,
) -> Result<SceneBraidLoss> {
    weights.validate()?;
    if head.dim() != embeddings.dim {
        return Err(Error::WidthMismatch {
            expected: head.dim(),
            found: embeddings.dim,
        });
    }
    if preds.num_modes() != embeddings.num_modes {
        return Err(Error::WidthMismatch {
            expected: preds.num_modes(),
            found: embeddings.num_modes,
        });
    }
    let mut out = SceneBraidLoss {
        loss: 0.0,
        k_star: Vec::with_capacity(graph.edges.len()),
        d_embeddings: vec![0.0; embeddings.data.len()],
        d_head: vec![0.0; head.mlp().num_params()],
    };
    if graph.edges.is_empty() {
        return Ok(out);
    }
    let scale = 1.0 / graph.edges.len() as f64;
    let d = embeddings.dim;
    for e in &graph.edges {
        let (i, j) = (embeddings.index_of(&e.src)?, embeddings.index_of(&e.dst)?);
        let k = best_mode_pair(scene, preds, &e.src, &e.dst)?;
        let r = encoding.encode(&relative_feature(scene, &e.src, &e.dst)?, d)?;
        let f = edge_features(embeddings, &r, i, j)?;
        let logits = head.classify_edge(&f)?;
        let (l, grad) = braid_loss(&logits, e.label, k, weights)?;
        out.loss += l * scale;
        // only the k* row carries gradient
        let (_, trace) = head.forward_row(&f.rows[k])?;
        let dx = head.mlp().backward(&trace, &grad[k].map(|v| v * scale), &mut out.d_head);
        for (slot, part) in [(embeddings.offset(i, k), &dx[..d]), (embeddings.offset(j, k), &dx[d..2 * d])] {
            for (a, b) in out.d_embeddings[slot..slot + d].iter_mut().zip(part) {
                *a += b;
            }
        }
        out.k_star.push(k);
    }
    Ok(out)
}
