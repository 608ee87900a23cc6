use rand::Rng;
use serde::{Deserialize, Serialize};

use super::features::{concat_features, EdgeFeature};
use super::nn::{Mlp, Trace};
use crate::braid::CrossingClass;
use crate::error::{Error, Result};

/// Default hidden width of the classifier.
pub const DEFAULT_HEAD_HIDDEN: usize = 64;

/// Maps `[e_i, e_j, r]` (width `3D`) to logits over
/// `[below, over, no_crossing]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeClassifierHead {
    mlp: Mlp,
}

impl EdgeClassifierHead {
    /// `hidden` lists the ReLU layer widths; empty gives a single linear layer.
    pub fn new(dim: usize, hidden: &[usize], rng: &mut impl Rng) -> Self {
        let mut sizes = vec![3 * dim];
        sizes.extend_from_slice(hidden);
        sizes.push(CrossingClass::ALL.len());
        EdgeClassifierHead {
            mlp: Mlp::new(&sizes, false, rng),
        }
    }

    pub fn from_mlp(mlp: Mlp) -> Result<Self> {
        if mlp.input_dim() % 3 != 0 || mlp.output_dim() != 3 {
            return Err(Error::invalid(
                "classifier head",
                format!("needs 3D inputs and 3 outputs, got {:?}", mlp.sizes()),
            ));
        }
        Ok(EdgeClassifierHead { mlp })
    }

    /// Embedding width `D`.
    pub fn dim(&self) -> usize {
        self.mlp.input_dim() / 3
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp {
        &mut self.mlp
    }

    /// One logit row per mode.
    pub fn classify_edge(&self, f: &EdgeFeature) -> Result<Vec<[f64; 3]>> {
        f.rows.iter().map(|row| Ok(self.forward_row(row)?.0)).collect()
    }

    pub(crate) fn forward_row(&self, row: &[f64]) -> Result<([f64; 3], Trace)> {
        if row.len() != self.mlp.input_dim() {
            return Err(Error::WidthMismatch {
                expected: self.mlp.input_dim(),
                found: row.len(),
            });
        }
        let trace = self.mlp.forward_trace(row);
        let o = trace.output();
        Ok(([o[0], o[1], o[2]], trace))
    }
}

/// Mode-free variant: logits from current-time agent encodings.
pub fn classify_edge_from_encodings(enc_i: &[f64], enc_j: &[f64], r: &[f64], head: &EdgeClassifierHead) -> Result<[f64; 3]> {
    Ok(head.forward_row(&concat_features(enc_i, enc_j, r)?)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multitask::features::{edge_features, EmbeddingSet};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_head_gives_zero_logits() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut head = EdgeClassifierHead::new(2, &[4], &mut rng);
        head.mlp_mut().params_mut().fill(0.0);
        let f = EdgeFeature {
            rows: vec![vec![1.0; 6], vec![-3.0; 6]],
        };
        assert_eq!(head.classify_edge(&f).unwrap(), vec![[0.0; 3]; 2]);
        assert!(head.classify_edge(&EdgeFeature { rows: vec![vec![0.0; 5]] }).is_err());
    }

    #[test]
    fn linear_head_on_basis_vector_selects_a_column() {
        // weight row-major 3 × 3, bias 0
        let w: Vec<f64> = (1..=9).map(f64::from).collect();
        let head = EdgeClassifierHead::from_mlp(Mlp::from_params(&[3, 3], false, [w, vec![0.0; 3]].concat()).unwrap()).unwrap();
        let z = classify_edge_from_encodings(&[0.0], &[1.0], &[0.0], &head).unwrap();
        assert_eq!(z, [2.0, 5.0, 8.0]);
    }

    #[test]
    fn single_mode_matches_encoding_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let head = EdgeClassifierHead::new(3, &[DEFAULT_HEAD_HIDDEN], &mut rng);
        let emb = EmbeddingSet::new(vec!["a".into(), "b".into()], 1, 3, vec![0.1, -0.2, 0.3, 0.5, 0.0, -1.0]).unwrap();
        let r = [0.4, 0.0, 2.0];
        let a = head.classify_edge(&edge_features(&emb, &r, 0, 1).unwrap()).unwrap();
        let b = classify_edge_from_encodings(emb.get(0, 0), emb.get(1, 0), &r, &head).unwrap();
        assert_eq!(a, vec![b]);
    }
}
