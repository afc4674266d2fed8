//! FastICA, parallel (symmetric) variant with the log-cosh contrast.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::LinearMap;
use crate::linalg::{symmetric_decorrelation, truncated_svd};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcaConfig {
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for IcaConfig {
    fn default() -> Self {
        IcaConfig {
            tolerance: 1e-6,
            max_iter: 500,
        }
    }
}

/// Whitens `x` onto its top `m` principal directions, then rotates the
/// whitened coordinates to maximize non-Gaussianity.
pub(super) fn fit(x: &DMatrix<f64>, m: usize, seed: u64, config: &IcaConfig) -> LinearMap {
    let n = x.nrows() as f64;
    let svd = truncated_svd(x, m);
    let floor = svd.singular_values[0].max(f64::MIN_POSITIVE) * 1e-12;
    let sv: Vec<f64> = svd.singular_values.iter().map(|s| s.max(floor)).collect();

    // whitening: x V diag(sqrt(n) / s)  (p × m)
    let mut whiten = svd.v.clone();
    for (c, mut col) in whiten.column_iter_mut().enumerate() {
        col *= n.sqrt() / sv[c];
    }
    // and its pseudo-inverse diag(s / sqrt(n)) Vᵀ  (m × p)
    let mut unwhiten = svd.v.transpose();
    for (r, mut row) in unwhiten.row_iter_mut().enumerate() {
        row *= sv[r] / n.sqrt();
    }

    let white = x * &whiten;
    let unmixing = rotate(&white, seed, config);

    LinearMap {
        encoder: whiten * unmixing.transpose(),
        decoder: unmixing * unwhiten,
    }
}

fn rotate(white: &DMatrix<f64>, seed: u64, config: &IcaConfig) -> DMatrix<f64> {
    let m = white.ncols();
    let n = white.nrows() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = DMatrix::from_fn(m, m, |_, _| StandardNormal.sample(&mut rng));
    let mut w = symmetric_decorrelation(&init);

    for _ in 0..config.max_iter {
        // projections, one column per component
        let y = white * w.transpose();
        let g = y.map(f64::tanh);
        let g_prime_mean: Vec<f64> = g
            .column_iter()
            .map(|c| c.iter().map(|t| 1.0 - t * t).sum::<f64>() / n)
            .collect();
        let mut next = (g.transpose() * white) / n;
        for (k, mut row) in next.row_iter_mut().enumerate() {
            row -= w.row(k) * g_prime_mean[k];
        }
        let next = symmetric_decorrelation(&next);
        let lim = (0..m)
            .map(|k| (next.row(k).dot(&w.row(k)).abs() - 1.0).abs())
            .fold(0.0, f64::max);
        w = next;
        if lim < config.tolerance {
            break;
        }
    }
    w
}
