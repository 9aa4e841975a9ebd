//! Multi-layer word-embedding (MLWE) features.
//!
//! Layered wordpiece embeddings are collapsed to one vector per token,
//! reduced with PCA and clustered with K-Means for every `K` in
//! `[2, K_max]`. Each partition is scored by the spread of its
//! size-normalised cluster influences and the best one is kept.

mod aggregate;
mod kmeans;
mod pca;

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::features::{ClusterRef, FeatureMethod, InterpretableFeature};

pub use aggregate::{aggregate_layers, align_to_document};
pub use kmeans::{kmeans, partition_sse, KMeansFit, KMeansParams, MAX_ITERATIONS, SHIFT_TOLERANCE};
pub use pca::{pca_reduce, PcaFit, EIGEN_FLOOR};

pub const DEFAULT_PCA_COMPONENTS: usize = 16;
pub const DEFAULT_SEED: u64 = 42;

/// One row per token, aligned with document positions.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenEmbeddingMatrix {
    pub rows: DMatrix<f64>,
    pub token_positions: Vec<usize>,
}

/// A K-Means partition of the embedded tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub k: usize,
    /// Cluster id of each row of the clustered matrix.
    pub assignment: Vec<usize>,
    /// One MLWE feature per cluster, in cluster-id order.
    pub clusters: Vec<InterpretableFeature>,
}

impl Partition {
    pub fn from_assignment(k: usize, assignment: Vec<usize>, token_positions: &[usize]) -> Self {
        let n_clusters = assignment.iter().max().map_or(0, |m| m + 1);
        let clusters = (0..n_clusters)
            .map(|c| {
                let positions: BTreeSet<usize> = assignment
                    .iter()
                    .zip(token_positions)
                    .filter(|(a, _)| **a == c)
                    .map(|(_, p)| *p)
                    .collect();
                let mut f = InterpretableFeature::new(
                    FeatureMethod::Mlwe,
                    format!("mlwe-K{k}-c{c}"),
                    positions,
                );
                f.cluster = Some(ClusterRef { k, index: c });
                f
            })
            .collect();
        Self {
            k,
            assignment,
            clusters,
        }
    }
}

/// Clusters `matrix` into `k` groups and wraps the result as features.
pub fn cluster_tokens(matrix: &TokenEmbeddingMatrix, k: usize, seed: u64, restarts: usize) -> Result<Partition> {
    let fit = kmeans(&matrix.rows, KMeansParams::new(k, seed).with_restarts(restarts))?;
    Ok(Partition::from_assignment(k, fit.assignment, &matrix.token_positions))
}

/// Largest cluster count to try: `floor(sqrt(n_words + 1))` clamped to
/// `[2, n_words]`. Callers skip MLWE entirely below two words.
pub fn k_max(n_words: usize) -> usize {
    let root = ((n_words + 1) as f64).sqrt().floor() as usize;
    root.max(2).min(n_words.max(2))
}

/// Spread of size-normalised cluster influences, in `[0, 2]`.
///
/// Each entry is `(npir, cluster_size)`.
pub fn k_score(cluster_explanations: &[(f64, usize)]) -> f64 {
    let normalised = cluster_explanations
        .iter()
        .map(|(npir, size)| npir / (*size).max(1) as f64);
    let (lo, hi) = normalised.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if lo.is_finite() {
        hi - lo
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KScore {
    pub k: usize,
    pub score: f64,
}

/// Index of the highest-scoring entry; ties go to the smallest `k`.
pub fn select_best_partition(scores: &[KScore]) -> Option<usize> {
    scores
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| b.score.total_cmp(&a.score).then(a.k.cmp(&b.k)))
        .map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn k_max_values() {
        assert_eq!(k_max(15), 4);
        assert_eq!(k_max(3), 2);
        assert_eq!(k_max(99), 10);
        assert_eq!(k_max(2), 2);
        assert_eq!(k_max(8), 3);
    }

    #[test]
    fn k_score_extremes() {
        assert_eq!(k_score(&[(1.0, 1), (-1.0, 1)]), 2.0);
        assert_eq!(k_score(&[(0.0, 3), (0.0, 1), (0.0, 2)]), 0.0);
        assert!((k_score(&[(0.8, 2), (-0.4, 4)]) - 0.5).abs() < 1e-12);
        assert_eq!(k_score(&[]), 0.0);
    }

    #[test]
    fn best_partition_ties_go_to_smallest_k() {
        let s = |k, score| KScore { k, score };
        assert_eq!(select_best_partition(&[s(2, 0.3), s(3, 0.9), s(4, 0.9)]), Some(1));
        assert_eq!(select_best_partition(&[s(5, 0.1)]), Some(0));
        assert_eq!(select_best_partition(&[s(2, 0.0), s(3, 0.0), s(4, 0.0)]), Some(0));
        assert_eq!(select_best_partition(&[s(4, 0.0), s(2, 0.0)]), Some(1));
        assert_eq!(select_best_partition(&[]), None);
    }

    #[test]
    fn partition_features_cover_tokens() {
        let p = Partition::from_assignment(2, vec![0, 1, 0, 1], &[0, 2, 5, 7]);
        assert_eq!(p.clusters.len(), 2);
        assert_eq!(p.clusters[0].token_positions, [0, 5]);
        assert_eq!(p.clusters[1].label, "mlwe-K2-c1");
        assert_eq!(p.clusters[1].cluster, Some(ClusterRef { k: 2, index: 1 }));
    }

    proptest! {
        #[test]
        fn k_score_range_and_permutation(
            mut entries in prop::collection::vec((-1.0f64..=1.0, 1usize..20), 1..10),
            rot in 0usize..10,
        ) {
            let s = k_score(&entries);
            prop_assert!((0.0..=2.0).contains(&s));
            let r = rot % entries.len();
            entries.rotate_left(r);
            prop_assert_eq!(k_score(&entries), s);
            entries.reverse();
            prop_assert_eq!(k_score(&entries), s);
        }
    }
}
