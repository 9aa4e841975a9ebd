use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::TokenEmbeddingMatrix;

/// Eigenvalues below this (scaled by the largest eigenvalue when that
/// exceeds 1) count as zero variance.
pub const EIGEN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct PcaFit {
    /// `(c x d)`; row `i` is the `i`-th principal axis.
    pub components: DMatrix<f64>,
    /// Variances along the retained axes, descending.
    pub eigenvalues: Vec<f64>,
    /// Retained variance over total variance, per axis.
    pub explained_variance_ratio: Vec<f64>,
    pub mean: DVector<f64>,
}

/// Mean-centres the rows and projects them onto the leading principal axes.
///
/// Covariances use the population normaliser `1/t`. At most
/// `min(t, d, max_components)` axes are kept, minus those with (near) zero
/// variance, but never fewer than one. Each axis is oriented so that its
/// largest-magnitude loading is positive.
pub fn pca_reduce(matrix: &TokenEmbeddingMatrix, max_components: usize) -> (TokenEmbeddingMatrix, PcaFit) {
    let x = &matrix.rows;
    let (t, d) = x.shape();
    assert!(t >= 1 && d >= 1, "pca_reduce needs a non-empty matrix");

    let mean = x.row_mean().transpose();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }

    let (eigenvalues, axes) = principal_axes(&centered);
    let total: f64 = eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let largest = eigenvalues.first().copied().unwrap_or(0.0);
    let floor = EIGEN_FLOOR * largest.max(1.0);
    let limit = t.min(d).min(max_components.max(1));

    let mut kept: Vec<(f64, DVector<f64>)> = eigenvalues
        .iter()
        .zip(axes)
        .take(limit)
        .filter(|(v, _)| **v >= floor)
        .map(|(v, a)| (*v, a))
        .collect();
    if kept.is_empty() {
        let mut axis = DVector::zeros(d);
        axis[0] = 1.0;
        kept.push((largest.max(0.0), axis));
    }

    let c = kept.len();
    let mut components = DMatrix::zeros(c, d);
    for (i, (_, axis)) in kept.iter().enumerate() {
        let axis = orient(axis.clone());
        components.set_row(i, &axis.transpose());
    }
    let projected = &centered * components.transpose();
    let eigenvalues: Vec<f64> = kept.iter().map(|(v, _)| *v).collect();
    let explained_variance_ratio = eigenvalues
        .iter()
        .map(|v| if total > 0.0 { v / total } else { 0.0 })
        .collect();

    (
        TokenEmbeddingMatrix {
            rows: projected,
            token_positions: matrix.token_positions.clone(),
        },
        PcaFit {
            components,
            eigenvalues,
            explained_variance_ratio,
            mean,
        },
    )
}

/// Eigenpairs of the covariance of `centered`, sorted by eigenvalue
/// descending. Uses the `t x t` Gram matrix when there are fewer rows than
/// columns.
fn principal_axes(centered: &DMatrix<f64>) -> (Vec<f64>, Vec<DVector<f64>>) {
    let (t, d) = centered.shape();
    let n = t as f64;
    let mut pairs: Vec<(f64, DVector<f64>)> = if d <= t {
        let cov = centered.transpose() * centered / n;
        let eig = SymmetricEigen::new(cov);
        eig.eigenvalues
            .iter()
            .zip(eig.eigenvectors.column_iter())
            .map(|(v, col)| (*v, col.into_owned()))
            .collect()
    } else {
        let gram = centered * centered.transpose() / n;
        let eig = SymmetricEigen::new(gram);
        eig.eigenvalues
            .iter()
            .zip(eig.eigenvectors.column_iter())
            .map(|(v, u)| {
                let axis = centered.transpose() * u;
                let norm = axis.norm();
                if norm > 0.0 {
                    (*v, axis / norm)
                } else {
                    (0.0, axis)
                }
            })
            .collect()
    };
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs.into_iter().unzip()
}

fn orient(axis: DVector<f64>) -> DVector<f64> {
    let mut best = 0;
    for (i, v) in axis.iter().enumerate() {
        if v.abs() > axis[best].abs() {
            best = i;
        }
    }
    if axis[best] < 0.0 {
        -axis
    } else {
        axis
    }
}
