//! Ward clustering in latent space and cluster-mean prototypes.

use nalgebra::DMatrix;

use crate::data::{DataMatrix, LatentMatrix};
use crate::drt::DrtModel;
use crate::error::{Error, Result};
use crate::linalg::column_means;
use crate::metrics::{feature_scales, Precision};

/// Cluster label per row; ids are `0..n_clusters` in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub n_clusters: usize,
    pub n_s: u32,
}

impl ClusterAssignment {
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == cluster)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_clusters];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

/// Number of clusters for split depth `n_s`: `min(2^n_s, n)`.
pub fn cluster_count(n_s: u32, n: usize) -> usize {
    if n_s >= usize::BITS - 1 {
        n
    } else {
        (1usize << n_s).min(n)
    }
}

/// One Ward merge: clusters are named by their smallest row index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    /// Increase in total within-cluster sum of squares.
    pub cost: f64,
}

/// Full Ward merge tree over `n` points.
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub n: usize,
    pub merges: Vec<Merge>,
}

struct Active {
    size: f64,
    centroid: Vec<f64>,
}

fn ward_cost(a: &Active, b: &Active) -> f64 {
    let d2: f64 = a
        .centroid
        .iter()
        .zip(&b.centroid)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    a.size * b.size / (a.size + b.size) * d2
}

impl Dendrogram {
    /// Greedy Ward agglomeration. Each step merges the pair with the smallest
    /// SSE increase; exact ties go to the lexicographically smallest
    /// `(lower id, higher id)`.
    pub fn build(points: &DMatrix<f64>) -> Self {
        let n = points.nrows();
        let mut slots: Vec<Option<Active>> = (0..n)
            .map(|i| {
                Some(Active {
                    size: 1.0,
                    centroid: points.row(i).iter().copied().collect(),
                })
            })
            .collect();
        // nearest higher-id partner of each slot
        let mut nn: Vec<Option<(f64, usize)>> = vec![None; n];
        let upper_nn = |slots: &[Option<Active>], k: usize| -> Option<(f64, usize)> {
            let a = slots[k].as_ref()?;
            let mut best: Option<(f64, usize)> = None;
            for (l, s) in slots.iter().enumerate().skip(k + 1) {
                if let Some(b) = s {
                    let d = ward_cost(a, b);
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, l));
                    }
                }
            }
            best
        };
        for k in 0..n {
            nn[k] = upper_nn(&slots, k);
        }

        let mut merges = Vec::with_capacity(n.saturating_sub(1));
        for _ in 1..n {
            let mut pick: Option<(f64, usize, usize)> = None;
            for (k, entry) in nn.iter().enumerate() {
                if let Some((d, l)) = *entry {
                    if pick.is_none_or(|(pd, _, _)| d < pd) {
                        pick = Some((d, k, l));
                    }
                }
            }
            let (cost, a, b) = pick.expect("at least two active clusters");
            let sb = slots[b].take().unwrap();
            let sa = slots[a].as_mut().unwrap();
            let total = sa.size + sb.size;
            for (ca, cb) in sa.centroid.iter_mut().zip(&sb.centroid) {
                *ca = (*ca * sa.size + cb * sb.size) / total;
            }
            sa.size = total;
            merges.push(Merge { a, b, cost });
            nn[b] = None;

            for k in 0..n {
                if slots[k].is_none() {
                    continue;
                }
                let stale = matches!(nn[k], Some((_, l)) if l == a || l == b);
                if k == a || stale {
                    nn[k] = upper_nn(&slots, k);
                } else if k < a {
                    let d = ward_cost(slots[k].as_ref().unwrap(), slots[a].as_ref().unwrap());
                    if let Some((bd, bl)) = nn[k] {
                        if d < bd || (d == bd && a < bl) {
                            nn[k] = Some((d, a));
                        }
                    }
                }
            }
        }
        Dendrogram { n, merges }
    }

    /// Replays merges until `k` clusters remain.
    pub fn cut(&self, k: usize) -> Vec<usize> {
        let k = k.clamp(1, self.n.max(1));
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for m in self.merges.iter().take(self.n - k) {
            let ra = find(&mut parent, m.a);
            let rb = find(&mut parent, m.b);
            parent[rb] = ra;
        }
        let mut relabel = vec![usize::MAX; self.n];
        let mut next = 0;
        (0..self.n)
            .map(|i| {
                let r = find(&mut parent, i);
                if relabel[r] == usize::MAX {
                    relabel[r] = next;
                    next += 1;
                }
                relabel[r]
            })
            .collect()
    }

    pub fn assignment(&self, n_s: u32) -> ClusterAssignment {
        let k = cluster_count(n_s, self.n);
        let labels = self.cut(k);
        let n_clusters = labels.iter().copied().max().map_or(0, |m| m + 1);
        ClusterAssignment {
            labels,
            n_clusters,
            n_s,
        }
    }
}

/// Ward clustering of the latent rows, cut at `min(2^n_s, n)` clusters.
pub fn agglomerate(latent: &LatentMatrix, n_s: u32) -> ClusterAssignment {
    Dendrogram::build(latent.as_matrix()).assignment(n_s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    Latent,
    Original,
}

/// Regularized cluster covariance `C = U Uᵀ + ridge · I`.
///
/// `U` stacks the scaled, centered cluster rows and the scaled, centered
/// rows of the whole training set, so that
/// `U Uᵀ = (1 − β) S_cluster + β S_global` with
/// `β = clamp((p + 1 − n_k) / p, 0, 1)`.
#[derive(Debug, Clone)]
pub struct ClusterCovariance {
    pub factor: DMatrix<f64>,
    pub ridge: f64,
    pub shrinkage: f64,
}

impl ClusterCovariance {
    fn new(members: &DMatrix<f64>, centered_global: &DMatrix<f64>) -> Self {
        let (n_k, p) = members.shape();
        let n = centered_global.nrows();
        let beta = ((p as f64 + 1.0 - n_k as f64) / p as f64).clamp(0.0, 1.0);

        let mut blocks: Vec<DMatrix<f64>> = Vec::new();
        if beta < 1.0 && n_k >= 2 {
            let mean = column_means(members);
            let w = ((1.0 - beta) / (n_k as f64 - 1.0)).sqrt();
            let mut c = members.transpose();
            for mut col in c.column_iter_mut() {
                col -= &mean;
                col *= w;
            }
            blocks.push(c);
        }
        if beta > 0.0 && n >= 2 {
            blocks.push(centered_global.transpose() * (beta / (n as f64 - 1.0)).sqrt());
        }
        let r: usize = blocks.iter().map(|b| b.ncols()).sum();
        let mut factor = DMatrix::zeros(p, r);
        let mut at = 0;
        for b in &blocks {
            factor.columns_mut(at, b.ncols()).copy_from(b);
            at += b.ncols();
        }
        let trace = factor.norm_squared();
        let ridge = (1e-6 * trace / p as f64).max(1e-12);
        ClusterCovariance {
            factor,
            ridge,
            shrinkage: beta,
        }
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let p = self.factor.nrows();
        &self.factor * self.factor.transpose() + DMatrix::identity(p, p) * self.ridge
    }

    pub fn precision(&self) -> Result<Precision> {
        let (p, r) = self.factor.shape();
        if p <= r {
            Precision::from_covariance(&self.dense())
        } else {
            Precision::from_low_rank(self.factor.clone(), self.ridge)
        }
    }
}

/// Cluster centres plus what the weighted and covariance metrics need in the
/// same space.
#[derive(Debug, Clone)]
pub struct PrototypeSet {
    /// `k × p`
    pub prototypes: DMatrix<f64>,
    pub space: Space,
    pub member_counts: Vec<usize>,
    pub covariances: Vec<ClusterCovariance>,
    /// Per-feature population std of the training rows in this space.
    pub sigma: Vec<f64>,
}

impl PrototypeSet {
    pub fn len(&self) -> usize {
        self.prototypes.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.prototypes.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.prototypes.ncols()
    }

    pub fn row(&self, j: usize) -> Vec<f64> {
        self.prototypes.row(j).iter().copied().collect()
    }
}

/// Cluster means of the latent rows, decoded to feature space when
/// `decode` is set.
///
/// Covariances and feature scales are computed in the same space as the
/// prototypes: from the training features when decoded, from the latent rows
/// otherwise.
pub fn extract_prototypes(
    data: &DataMatrix,
    latent: &LatentMatrix,
    assignment: &ClusterAssignment,
    model: &DrtModel,
    decode: bool,
) -> Result<PrototypeSet> {
    let n = data.n_samples();
    if latent.n_samples() != n {
        return Err(Error::LengthMismatch(latent.n_samples(), n));
    }
    if assignment.labels.len() != n {
        return Err(Error::LengthMismatch(assignment.labels.len(), n));
    }
    let z = latent.as_matrix();
    let k = assignment.n_clusters;
    let members: Vec<Vec<usize>> = (0..k).map(|c| assignment.members(c)).collect();
    let mut means = DMatrix::zeros(k, z.ncols());
    for (c, idx) in members.iter().enumerate() {
        let rows = z.select_rows(idx);
        means.set_row(c, &column_means(&rows).transpose());
    }

    let (prototypes, space, source) = if decode {
        let decoded = model.decode(&LatentMatrix::from_matrix(means)?)?;
        (decoded.into_matrix(), Space::Original, data.as_matrix())
    } else {
        (means, Space::Latent, z)
    };

    let global_mean = column_means(source);
    let mut centered = source.clone();
    for mut row in centered.row_iter_mut() {
        row -= global_mean.transpose();
    }
    let covariances = members
        .iter()
        .map(|idx| ClusterCovariance::new(&source.select_rows(idx), &centered))
        .collect();

    Ok(PrototypeSet {
        prototypes,
        space,
        member_counts: members.iter().map(Vec::len).collect(),
        covariances,
        sigma: feature_scales(source),
    })
}
