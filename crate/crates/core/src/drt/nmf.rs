//! Nonnegative matrix factorization by Lee–Seung multiplicative updates on
//! the squared Frobenius error.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmfConfig {
    pub max_iter: usize,
    /// Stop once the relative objective decrease falls below this.
    pub tolerance: f64,
}

impl Default for NmfConfig {
    fn default() -> Self {
        NmfConfig {
            max_iter: 500,
            tolerance: 1e-6,
        }
    }
}

const DENOM_FLOOR: f64 = 1e-300;

fn objective(x: &DMatrix<f64>, w: &DMatrix<f64>, h: &DMatrix<f64>) -> f64 {
    (x - w * h).norm_squared()
}

/// Factorizes nonnegative `x ≈ W H` and returns the components `H` (`m × p`)
/// together with the objective after initialization and after each iteration.
pub(super) fn fit(
    x: &DMatrix<f64>,
    m: usize,
    seed: u64,
    config: &NmfConfig,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let (n, p) = x.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = (x.mean() / m as f64).sqrt().max(1e-3);
    let mut w = DMatrix::from_fn(n, m, |_, _| scale * rng.random_range(0.01..1.0));
    let mut h = DMatrix::from_fn(m, p, |_, _| scale * rng.random_range(0.01..1.0));

    let mut trace = vec![objective(x, &w, &h)];
    for step in 0..config.max_iter {
        let num = w.transpose() * x;
        let den = (w.transpose() * &w) * &h;
        h.zip_zip_apply(&num, &den, |hv, a, b| *hv *= a / b.max(DENOM_FLOOR));

        let num = x * h.transpose();
        let den = &w * (&h * h.transpose());
        w.zip_zip_apply(&num, &den, |wv, a, b| *wv *= a / b.max(DENOM_FLOOR));

        let obj = objective(x, &w, &h);
        if !obj.is_finite() {
            return Err(Error::FitDiverged { step });
        }
        let prev = *trace.last().unwrap();
        trace.push(obj);
        if prev - obj <= config.tolerance * prev.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok((h, trace))
}

/// Latent codes of each row of `x`: the nonnegative least-squares fit
/// against the fixed components.
pub(super) fn encode(x: &DMatrix<f64>, components: &DMatrix<f64>) -> DMatrix<f64> {
    let gram = components * components.transpose();
    let cross = x * components.transpose();
    let m = components.nrows();
    let mut z = DMatrix::zeros(x.nrows(), m);
    for i in 0..x.nrows() {
        let c = cross.row(i).transpose();
        let sol = nnls(&gram, &c);
        z.set_row(i, &sol.transpose());
    }
    z
}

/// Minimizes `½ zᵀ G z − cᵀ z` over `z ≥ 0` for a positive semidefinite `G`.
///
/// Small problems are solved exactly by enumerating the faces of the
/// orthant; larger ones fall back to cyclic projected coordinate descent.
pub fn nnls(gram: &DMatrix<f64>, c: &DVector<f64>) -> DVector<f64> {
    let m = c.len();
    if m <= 10 {
        exact_nnls(gram, c)
    } else {
        coordinate_nnls(gram, c)
    }
}

fn quad(gram: &DMatrix<f64>, c: &DVector<f64>, z: &DVector<f64>) -> f64 {
    0.5 * z.dot(&(gram * z)) - c.dot(z)
}

fn exact_nnls(gram: &DMatrix<f64>, c: &DVector<f64>) -> DVector<f64> {
    let m = c.len();
    let mut best = DVector::zeros(m);
    let mut best_val = 0.0;
    for mask in 1u32..(1 << m) {
        let idx: Vec<usize> = (0..m).filter(|&k| mask & (1 << k) != 0).collect();
        let sub = gram.select_rows(&idx).select_columns(&idx);
        let rhs = DVector::from_iterator(idx.len(), idx.iter().map(|&k| c[k]));
        let Some(sol) = sub.lu().solve(&rhs) else {
            continue;
        };
        if sol.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            continue;
        }
        let mut z = DVector::zeros(m);
        for (s, &k) in sol.iter().zip(&idx) {
            z[k] = *s;
        }
        let val = quad(gram, c, &z);
        if val < best_val {
            best_val = val;
            best = z;
        }
    }
    best
}

fn coordinate_nnls(gram: &DMatrix<f64>, c: &DVector<f64>) -> DVector<f64> {
    let m = c.len();
    let mut z = DVector::zeros(m);
    for _ in 0..5000 {
        let mut change = 0.0f64;
        for k in 0..m {
            let g = gram[(k, k)];
            if g <= 0.0 {
                continue;
            }
            let grad = gram.row(k).transpose().dot(&z) - c[k];
            let next = (z[k] - grad / g).max(0.0);
            change = change.max((next - z[k]).abs());
            z[k] = next;
        }
        if change <= 1e-14 * (1.0 + z.amax()) {
            break;
        }
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DataMatrix;
    use crate::drt::{fit_with, DrtKind, DrtParams, DrtSettings};

    fn rank_two(seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = DMatrix::from_fn(30, 2, |_, _| rng.random_range(0.0..2.0));
        let h = DMatrix::from_fn(2, 8, |_, _| rng.random_range(0.0..2.0));
        w * h
    }

    #[test]
    fn recovers_nonnegative_rank_two() {
        let x = rank_two(1);
        let data = DataMatrix::from_matrix(x.clone()).unwrap();
        let mut settings = DrtSettings::default();
        settings.nmf = NmfConfig {
            max_iter: 20_000,
            tolerance: 1e-12,
        };
        let model = fit_with(DrtKind::Nmf, &data, 2, 0, &settings).unwrap();
        let rec = model.decode(&model.encode(&data).unwrap()).unwrap();
        let rel = (rec.as_matrix() - &x).norm() / x.norm();
        assert!(rel < 1e-3, "relative error {rel}");
    }

    #[test]
    fn objective_never_increases_and_factors_stay_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = DMatrix::from_fn(25, 7, |_, _| rng.random_range(-1.0..3.0));
        let data = DataMatrix::from_matrix(x).unwrap();
        let model = crate::drt::fit(DrtKind::Nmf, &data, 2, 4).unwrap();
        for pair in model.loss_trace.windows(2) {
            assert!(pair[1] <= pair[0], "{} -> {}", pair[0], pair[1]);
        }
        let DrtParams::Nmf { components } = &model.params else {
            panic!()
        };
        assert!(components.iter().all(|&v| v >= 0.0));
        let z = model.encode(&data).unwrap();
        assert!(z.as_matrix().iter().all(|&v| v >= 0.0));
        // decoded rows, shifted back into the factorized domain, are nonnegative
        let shift = match model.preprocess {
            crate::drt::Preprocess::Shift(s) => s,
            _ => unreachable!(),
        };
        assert!(shift > 0.0);
        let dec = model.decode(&z).unwrap();
        assert!(dec.as_matrix().iter().all(|&v| v + shift >= -1e-12));
    }

    #[test]
    fn nnls_matches_brute_force_grid() {
        let gram = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        for c in [[1.0, 1.0], [-1.0, 2.0], [3.0, -2.0], [-1.0, -1.0]] {
            let c = DVector::from_row_slice(&c);
            let z = nnls(&gram, &c);
            let val = quad(&gram, &c, &z);
            let mut grid_best = f64::INFINITY;
            for a in 0..=400 {
                for b in 0..=400 {
                    let g = DVector::from_row_slice(&[a as f64 * 0.01, b as f64 * 0.01]);
                    grid_best = grid_best.min(quad(&gram, &c, &g));
                }
            }
            assert!(val <= grid_best + 1e-12);
            let cd = coordinate_nnls(&gram, &c);
            assert!((cd - &z).amax() < 1e-8);
        }
    }
}
