use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, Standardizer};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LofConfig {
    pub k: usize,
}

impl LofConfig {
    pub const DEFAULT_GRID: [usize; 3] = [10, 20, 35];

    pub fn grid() -> Vec<LofConfig> {
        Self::DEFAULT_GRID
            .iter()
            .map(|&k| LofConfig { k })
            .collect()
    }
}

/// Guards the reachability density against duplicate neighbourhoods.
const DENSITY_EPS: f64 = 1e-10;

fn pairwise_distances(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = x.shape();
    if p <= 64 {
        let rows: Vec<Vec<f64>> = x.row_iter().map(|r| r.iter().copied().collect()).collect();
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let s: f64 = rows[i]
                    .iter()
                    .zip(&rows[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                d[(i, j)] = s.sqrt();
                d[(j, i)] = d[(i, j)];
            }
        }
        d
    } else {
        let gram = x * x.transpose();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                0.0
            } else {
                (gram[(i, i)] + gram[(j, j)] - 2.0 * gram[(i, j)])
                    .max(0.0)
                    .sqrt()
            }
        })
    }
}

/// Local outlier factor with Euclidean distance on standardized features.
///
/// Each point's neighbourhood is exactly its `k` nearest other points, ties
/// broken by row index.
pub fn lof_scores(data: &DataMatrix, config: LofConfig) -> Result<Vec<f64>> {
    let n = data.n_samples();
    let k = config.k;
    if k == 0 || k >= n {
        return Err(Error::KTooLarge { k, n });
    }
    let x = Standardizer::fit(data).transform_matrix(data.as_matrix());
    let d = pairwise_distances(&x);

    let neighbours: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| d[(i, a)].total_cmp(&d[(i, b)]).then(a.cmp(&b)));
            others.truncate(k);
            others
        })
        .collect();
    let k_distance: Vec<f64> = (0..n)
        .map(|i| d[(i, *neighbours[i].last().unwrap())])
        .collect();
    let lrd: Vec<f64> = (0..n)
        .map(|i| {
            let reach: f64 = neighbours[i]
                .iter()
                .map(|&o| k_distance[o].max(d[(i, o)]))
                .sum();
            1.0 / (reach / k as f64 + DENSITY_EPS)
        })
        .collect();
    Ok((0..n)
        .map(|i| neighbours[i].iter().map(|&o| lrd[o]).sum::<f64>() / (k as f64 * lrd[i]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    /// Textbook LOF evaluated straight from the definitions, no shared code.
    fn reference_lof(points: &[Vec<f64>], k: usize, i: usize) -> f64 {
        let dist = |a: usize, b: usize| -> f64 {
            points[a]
                .iter()
                .zip(&points[b])
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let knn = |a: usize| -> Vec<usize> {
            let mut o: Vec<usize> = (0..points.len()).filter(|&b| b != a).collect();
            o.sort_by(|&x, &y| dist(a, x).partial_cmp(&dist(a, y)).unwrap().then(x.cmp(&y)));
            o.truncate(k);
            o
        };
        let kdist = |a: usize| dist(a, *knn(a).last().unwrap());
        let lrd = |a: usize| {
            let nb = knn(a);
            k as f64 / nb.iter().map(|&o| kdist(o).max(dist(a, o))).sum::<f64>()
        };
        knn(i).iter().map(|&o| lrd(o)).sum::<f64>() / (k as f64 * lrd(i))
    }

    #[test]
    fn grid_interior_point_is_unremarkable() {
        let mut rows = Vec::new();
        for a in 0..7 {
            for b in 0..7 {
                rows.push(vec![a as f64, b as f64]);
            }
        }
        let data = DataMatrix::from_rows(&rows).unwrap();
        let scores = lof_scores(&data, LofConfig { k: 4 }).unwrap();
        let centre = 3 * 7 + 3;
        assert!((0.8..=1.2).contains(&scores[centre]), "{}", scores[centre]);
        // standardization is a uniform rescale here, so LOF matches the raw formula
        let expected = reference_lof(&rows, 4, centre);
        assert!((scores[centre] - expected).abs() < 1e-6);
    }

    #[test]
    fn far_point_has_highest_lof() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let normal = Normal::new(0.0, 0.1).unwrap();
        let mut rows: Vec<Vec<f64>> = (0..100)
            .map(|_| (0..3).map(|_| normal.sample(&mut rng)).collect())
            .collect();
        rows.push(vec![10.0 / 3f64.sqrt(); 3]);
        let data = DataMatrix::from_rows(&rows).unwrap();
        let scores = lof_scores(&data, LofConfig { k: 10 }).unwrap();
        let top = (0..101)
            .max_by(|&a, &b| scores[a].total_cmp(&scores[b]))
            .unwrap();
        assert_eq!(top, 100);
    }

    #[test]
    fn duplicated_rows_score_identically_and_keep_the_outlier_on_top() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let normal = Normal::new(0.0, 0.1).unwrap();
        let mut rows: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..2).map(|_| normal.sample(&mut rng)).collect())
            .collect();
        rows.push(vec![5.0, 5.0]);
        let doubled: Vec<Vec<f64>> = rows.iter().chain(rows.iter()).cloned().collect();
        let data = DataMatrix::from_rows(&doubled).unwrap();
        let scores = lof_scores(&data, LofConfig { k: 10 }).unwrap();
        for i in 0..41 {
            assert_eq!(scores[i], scores[i + 41]);
        }
        let top = (0..82)
            .max_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(b.cmp(&a)))
            .unwrap();
        assert_eq!(top, 40);
    }

    #[test]
    fn rejects_large_k() {
        let data = DataMatrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        assert!(matches!(
            lof_scores(&data, LofConfig { k: 3 }),
            Err(Error::KTooLarge { k: 3, n: 3 })
        ));
    }
}
