//! Embeddings on the unit hypersphere and batched similarity scores.
//!
//! Scores are cosine similarities of unit-normalized embeddings, so every
//! score lives in `[-1, 1]`. A [`ScoreBatch`] collects, per anchor, one
//! positive score and a nonempty vector of negative scores; it is the input
//! to every loss and every robust-reweighting solver in this crate.

use crate::error::{Error, Result};
use crate::num;

/// Tolerance for the unit-norm check in [`cosine_similarity`].
const UNIT_NORM_TOL: f64 = 1e-6;

/// A d-dimensional embedding. Constructed through [`normalize`], which
/// guarantees unit Euclidean norm; [`Embedding::from_raw`] skips the
/// guarantee for callers that need to exercise the error paths.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    /// Wrap coordinates without normalizing. The norm check is deferred to
    /// the operations that require unit inputs.
    pub fn from_raw(coords: Vec<f64>) -> Self {
        Embedding(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        num::euclidean_norm(&self.0)
    }
}

/// Project a vector onto the unit sphere, preserving direction.
///
/// The zero vector (and anything non-finite) is rejected rather than mapped.
pub fn normalize(v: &[f64]) -> Result<Embedding> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            what: "embedding coordinates",
        });
    }
    let norm = num::euclidean_norm(v);
    if norm == 0.0 {
        return Err(Error::DegenerateEmbedding);
    }
    Ok(Embedding(v.iter().map(|x| x / norm).collect()))
}

/// Inner product of two unit-norm embeddings, in `[-1, 1]`.
///
/// Inputs whose norm deviates from 1 by more than `1e-6` are rejected.
pub fn cosine_similarity(u: &Embedding, v: &Embedding) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::LengthMismatch {
            left: u.dim(),
            right: v.dim(),
        });
    }
    for e in [u, v] {
        let dev = (e.norm() - 1.0).abs();
        if dev > UNIT_NORM_TOL {
            return Err(Error::NotUnitNorm { deviation: dev });
        }
    }
    Ok(num::dot(u.coords(), v.coords()))
}

/// Per-anchor positive score and negative-score vector.
///
/// Rows may have differing negative counts; every row must be nonempty and
/// every score finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreBatch {
    pos: Vec<f64>,
    negs: Vec<Vec<f64>>,
}

impl ScoreBatch {
    pub fn new(pos: Vec<f64>, negs: Vec<Vec<f64>>) -> Result<Self> {
        if pos.is_empty() {
            return Err(Error::InvalidParameter {
                name: "anchors",
                constraint: "at least 1",
                value: 0.0,
            });
        }
        if pos.len() != negs.len() {
            return Err(Error::LengthMismatch {
                left: pos.len(),
                right: negs.len(),
            });
        }
        if pos.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite {
                what: "positive scores",
            });
        }
        for row in &negs {
            if row.is_empty() {
                return Err(Error::EmptyNegatives);
            }
            if row.iter().any(|s| !s.is_finite()) {
                return Err(Error::NonFinite {
                    what: "negative scores",
                });
            }
        }
        Ok(ScoreBatch { pos, negs })
    }

    /// Single-anchor batch.
    pub fn single(pos: f64, negs: Vec<f64>) -> Result<Self> {
        ScoreBatch::new(vec![pos], vec![negs])
    }

    pub fn num_anchors(&self) -> usize {
        self.pos.len()
    }

    pub fn pos_scores(&self) -> &[f64] {
        &self.pos
    }

    pub fn neg_rows(&self) -> &[Vec<f64>] {
        &self.negs
    }

    /// Iterate `(pos, negs)` pairs per anchor.
    pub fn rows(&self) -> impl Iterator<Item = (f64, &[f64])> {
        self.pos
            .iter()
            .copied()
            .zip(self.negs.iter().map(|r| r.as_slice()))
    }

    /// A copy with `c` added to every score (positives and negatives).
    pub fn shifted(&self, c: f64) -> ScoreBatch {
        ScoreBatch {
            pos: self.pos.iter().map(|s| s + c).collect(),
            negs: self
                .negs
                .iter()
                .map(|row| row.iter().map(|s| s + c).collect())
                .collect(),
        }
    }
}

/// Score one anchor against its positive and a nonempty set of negatives.
pub fn build_score_batch(
    anchor: &Embedding,
    positive: &Embedding,
    negatives: &[Embedding],
) -> Result<ScoreBatch> {
    if negatives.is_empty() {
        return Err(Error::EmptyNegatives);
    }
    let pos = cosine_similarity(anchor, positive)?;
    let negs = negatives
        .iter()
        .map(|n| cosine_similarity(anchor, n))
        .collect::<Result<Vec<f64>>>()?;
    ScoreBatch::single(pos, negs)
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn arb_direction(dim: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-1.0f64..1.0, dim)
            .prop_filter("nonzero", |v| num::euclidean_norm(v) > 1e-6)
    }

    fn arb_direction_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..8).prop_flat_map(|d| (arb_direction(d), arb_direction(d)))
    }

    fn arb_direction_triple() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
        (2usize..8).prop_flat_map(|d| (arb_direction(d), arb_direction(d), arb_direction(d)))
    }

    proptest! {
        #[test]
        fn normalized_vectors_have_unit_norm(v in (2usize..8).prop_flat_map(arb_direction)) {
            let e = normalize(&v).unwrap();
            prop_assert!((e.norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn cosine_is_symmetric((u, v) in arb_direction_pair()) {
            let eu = normalize(&u).unwrap();
            let ev = normalize(&v).unwrap();
            let uv = cosine_similarity(&eu, &ev).unwrap();
            let vu = cosine_similarity(&ev, &eu).unwrap();
            prop_assert_eq!(uv, vu);
        }

        #[test]
        fn scores_stay_in_range((a, p, n) in arb_direction_triple()) {
            let ea = normalize(&a).unwrap();
            let ep = normalize(&p).unwrap();
            let en = normalize(&n).unwrap();
            let b = build_score_batch(&ea, &ep, &[en]).unwrap();
            for (pos, negs) in b.rows() {
                prop_assert!(pos.abs() <= 1.0 + 1e-12);
                prop_assert!(negs.iter().all(|s| s.abs() <= 1.0 + 1e-12));
            }
        }
    }
}
