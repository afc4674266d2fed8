use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IforestConfig {
    pub trees: usize,
    /// Clamped to the number of rows.
    pub subsample: usize,
    pub seed: u64,
}

impl Default for IforestConfig {
    fn default() -> Self {
        IforestConfig {
            trees: 100,
            subsample: 256,
            seed: 0,
        }
    }
}

impl IforestConfig {
    pub const DEFAULT_SUBSAMPLES: [usize; 3] = [64, 128, 256];

    pub fn grid(seed: u64) -> Vec<IforestConfig> {
        Self::DEFAULT_SUBSAMPLES
            .iter()
            .map(|&subsample| IforestConfig {
                trees: 100,
                subsample,
                seed,
            })
            .collect()
    }
}

fn harmonic(n: usize) -> f64 {
    if n <= 1024 {
        (1..=n).map(|i| 1.0 / i as f64).sum()
    } else {
        (n as f64).ln() + 0.577_215_664_901_532_9 + 1.0 / (2.0 * n as f64)
    }
}

/// Expected path length of an unsuccessful binary-search-tree lookup among
/// `n` points; the normalizer `c(n)`.
pub fn average_path_length(n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        2.0 * harmonic(n - 1) - 2.0 * (n as f64 - 1.0) / n as f64
    }
}

#[derive(Debug, Clone)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        size: usize,
    },
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn grow(
        rows: &[Vec<f64>],
        subset: Vec<usize>,
        height_cap: usize,
        rng: &mut ChaCha8Rng,
    ) -> Tree {
        let mut tree = Tree { nodes: Vec::new() };
        tree.build(rows, subset, 0, height_cap, rng);
        tree
    }

    fn build(
        &mut self,
        rows: &[Vec<f64>],
        subset: Vec<usize>,
        depth: usize,
        cap: usize,
        rng: &mut ChaCha8Rng,
    ) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { size: subset.len() });
        if depth >= cap || subset.len() <= 1 {
            return id;
        }
        let p = rows[subset[0]].len();
        let ranges: Vec<(usize, f64, f64)> = (0..p)
            .filter_map(|f| {
                let (lo, hi) = subset
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                        (lo.min(rows[i][f]), hi.max(rows[i][f]))
                    });
                (hi > lo).then_some((f, lo, hi))
            })
            .collect();
        if ranges.is_empty() {
            return id;
        }
        let (feature, lo, hi) = ranges[rng.random_range(0..ranges.len())];
        let mut threshold = rng.random_range(lo..hi);
        if threshold <= lo {
            threshold = hi.min(lo + (hi - lo) * 0.5);
        }
        let (l, r): (Vec<usize>, Vec<usize>) = subset
            .into_iter()
            .partition(|&i| rows[i][feature] < threshold);
        let left = self.build(rows, l, depth + 1, cap, rng);
        let right = self.build(rows, r, depth + 1, cap, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    /// Edges from the root to the leaf reached by `x`, and that leaf's size.
    fn depth(&self, x: &[f64]) -> (usize, usize) {
        let mut at = 0;
        let mut depth = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { size } => return (depth, size),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[feature] < threshold { left } else { right };
                    depth += 1;
                }
            }
        }
    }

    fn path_length(&self, x: &[f64]) -> f64 {
        let (d, size) = self.depth(x);
        d as f64 + average_path_length(size)
    }
}

/// A fitted isolation forest.
#[derive(Debug, Clone)]
pub struct IsolationForest {
    trees: Vec<Tree>,
    subsample: usize,
}

impl IsolationForest {
    /// Subsamples are drawn as seeded index draws over the rows sorted by
    /// content, so the forest does not depend on row order.
    pub fn fit(data: &DataMatrix, config: IforestConfig) -> Result<Self> {
        if config.trees == 0 || config.subsample == 0 {
            return Err(Error::InvalidArgument(
                "isolation forest needs trees ≥ 1 and subsample ≥ 1".into(),
            ));
        }
        let rows = data.rows();
        let n = rows.len();
        let psi = config.subsample.min(n);
        let cap = (psi as f64).log2().ceil() as usize;
        let mut sorted: Vec<usize> = (0..n).collect();
        sorted.sort_by(|&a, &b| {
            rows[a]
                .iter()
                .zip(&rows[b])
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let trees = (0..config.trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(t as u64);
                let subset: Vec<usize> = sample(&mut rng, n, psi)
                    .into_iter()
                    .map(|i| sorted[i])
                    .collect();
                Tree::grow(&rows, subset, cap, &mut rng)
            })
            .collect();
        Ok(IsolationForest {
            trees,
            subsample: psi,
        })
    }

    pub fn height_cap(&self) -> usize {
        (self.subsample as f64).log2().ceil() as usize
    }

    /// Mean number of edges from root to leaf, without the leaf-size correction.
    pub fn mean_depth(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.depth(x).0 as f64).sum::<f64>() / self.trees.len() as f64
    }

    /// `2^(−E[h(x)] / c(ψ))`.
    pub fn score(&self, x: &[f64]) -> f64 {
        let c = average_path_length(self.subsample);
        if c == 0.0 {
            return 0.5;
        }
        let mean =
            self.trees.iter().map(|t| t.path_length(x)).sum::<f64>() / self.trees.len() as f64;
        2f64.powf(-mean / c)
    }
}

pub fn iforest_scores(data: &DataMatrix, config: IforestConfig) -> Result<Vec<f64>> {
    let forest = IsolationForest::fit(data, config)?;
    Ok(data.rows().iter().map(|r| forest.score(r)).collect())
}
