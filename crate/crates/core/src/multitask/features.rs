//! Per-mode agent embeddings and pairwise relative features.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::wrap_angle;
use crate::scene::{AgentId, Scene};

pub const RELATIVE_FEATURE_DIM: usize = 5;

/// `K` embeddings of width `D` per agent, stored `[agent][mode][d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSet {
    pub agents: Vec<AgentId>,
    pub num_modes: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl EmbeddingSet {
    pub fn new(agents: Vec<AgentId>, num_modes: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if num_modes == 0 || dim == 0 {
            return Err(Error::invalid("embedding shape", format!("K = {num_modes}, D = {dim}")));
        }
        let expected = agents.len() * num_modes * dim;
        if data.len() != expected {
            return Err(Error::WidthMismatch {
                expected,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("embeddings", "non-finite value"));
        }
        Ok(EmbeddingSet {
            agents,
            num_modes,
            dim,
            data,
        })
    }

    pub fn zeros(agents: Vec<AgentId>, num_modes: usize, dim: usize) -> Self {
        let n = agents.len() * num_modes * dim;
        EmbeddingSet {
            agents,
            num_modes,
            dim,
            data: vec![0.0; n],
        }
    }

    pub fn index_of(&self, id: &AgentId) -> Result<usize> {
        self.agents
            .iter()
            .position(|a| a == id)
            .ok_or_else(|| Error::MissingAgent(id.clone()))
    }

    /// Flat offset of `(agent, mode)`.
    pub fn offset(&self, agent: usize, mode: usize) -> usize {
        (agent * self.num_modes + mode) * self.dim
    }

    pub fn get(&self, agent: usize, mode: usize) -> &[f64] {
        let o = self.offset(agent, mode);
        &self.data[o..o + self.dim]
    }

    pub fn get_mut(&mut self, agent: usize, mode: usize) -> &mut [f64] {
        let o = self.offset(agent, mode);
        &mut self.data[o..o + self.dim]
    }
}

/// `[Δx, Δy, cos Δθ, sin Δθ, ‖Δp‖]` of agent `i` relative to agent `j`,
/// expressed in `j`'s `t = 0` frame.
pub fn relative_feature(scene: &Scene, i: &AgentId, j: &AgentId) -> Result<[f64; RELATIVE_FEATURE_DIM]> {
    let fi = scene.frame_of_agent(i)?;
    let fj = scene.frame_of_agent(j)?;
    let d = fj.to_local(fi.origin);
    let dtheta = wrap_angle(fi.axis_angle - fj.axis_angle);
    Ok([d.x, d.y, dtheta.cos(), dtheta.sin(), d.norm()])
}

/// Maps the 5-d relative feature to width `D`. Positional components are
/// divided by `position_scale` first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RelativeEncoding {
    /// Scaled feature followed by zeros (`D ≥ 5`) or truncated (`D < 5`).
    ZeroPad { position_scale: f64 },
    /// A fixed linear projection, weight `D × 5` row-major.
    Linear { position_scale: f64, weight: Vec<f64> },
}

impl Default for RelativeEncoding {
    fn default() -> Self {
        RelativeEncoding::ZeroPad { position_scale: 1.0 }
    }
}

impl RelativeEncoding {
    pub fn encode(&self, r: &[f64; RELATIVE_FEATURE_DIM], dim: usize) -> Result<Vec<f64>> {
        let scale = match self {
            RelativeEncoding::ZeroPad { position_scale } | RelativeEncoding::Linear { position_scale, .. } => *position_scale,
        };
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid("position_scale", scale.to_string()));
        }
        let s = [r[0] / scale, r[1] / scale, r[2], r[3], r[4] / scale];
        match self {
            RelativeEncoding::ZeroPad { .. } => {
                let mut out = vec![0.0; dim];
                for (o, v) in out.iter_mut().zip(s) {
                    *o = v;
                }
                Ok(out)
            }
            RelativeEncoding::Linear { weight, .. } => {
                if weight.len() != dim * RELATIVE_FEATURE_DIM {
                    return Err(Error::WidthMismatch {
                        expected: dim * RELATIVE_FEATURE_DIM,
                        found: weight.len(),
                    });
                }
                Ok(weight
                    .chunks(RELATIVE_FEATURE_DIM)
                    .map(|row| row.iter().zip(&s).map(|(a, b)| a * b).sum())
                    .collect())
            }
        }
    }
}

/// Per-mode classifier inputs for one edge: row `k` is `[e_i^k, e_j^k, r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFeature {
    pub rows: Vec<Vec<f64>>,
}

/// `[e_i, e_j, r]`, one row of an [`EdgeFeature`].
pub fn concat_features(e_i: &[f64], e_j: &[f64], r: &[f64]) -> Result<Vec<f64>> {
    if e_i.len() != e_j.len() || r.len() != e_i.len() {
        return Err(Error::WidthMismatch {
            expected: e_i.len(),
            found: if e_j.len() != e_i.len() { e_j.len() } else { r.len() },
        });
    }
    Ok([e_i, e_j, r].concat())
}

/// Edge features of `i → j` for every mode of `emb`.
pub fn edge_features(emb: &EmbeddingSet, r: &[f64], i: usize, j: usize) -> Result<EdgeFeature> {
    for a in [i, j] {
        if a >= emb.agents.len() {
            return Err(Error::invalid("agent index", format!("{a} of {}", emb.agents.len())));
        }
    }
    let rows = (0..emb.num_modes)
        .map(|k| concat_features(emb.get(i, k), emb.get(j, k), r))
        .collect::<Result<_>>()?;
    Ok(EdgeFeature { rows })
}
