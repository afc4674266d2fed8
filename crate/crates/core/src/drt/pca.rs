use nalgebra::DMatrix;

use super::LinearMap;
use crate::linalg::truncated_svd;

/// Projection onto the top `m` right singular vectors of the preprocessed
/// (already centered) matrix.
pub(super) fn fit(x: &DMatrix<f64>, m: usize) -> LinearMap {
    let svd = truncated_svd(x, m);
    LinearMap {
        decoder: svd.v.transpose(),
        encoder: svd.v,
    }
}
