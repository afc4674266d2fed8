//! The detection pipeline and seen-anomaly hyperparameter selection.
//!
//! [`run_pipeline`] fits one reduction, clusters the latent training rows,
//! builds prototypes and scores each test row by its distance to the nearest
//! prototype. [`evaluate_candidates`] does the same for a whole grid while
//! sharing the expensive pieces: one reduction fit and one merge tree per
//! `(technique, latent size, seed, settings)`, one prototype set per split
//! depth and decode flag.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{iforest_scores, lof_scores, IforestConfig, LofConfig};
use crate::data::{DataMatrix, Dataset, LabelVector, LatentMatrix};
use crate::drt::{self, DrtKind, DrtModel, DrtSettings};
use crate::error::{Error, Result};
use crate::metrics::{distance, MetricContext, MetricKind, Precision};
use crate::prototypes::{extract_prototypes, Dendrogram, PrototypeSet, Space};
use crate::scoring::{auc, descending_order, rws};

/// One cell of the hyperparameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub drt: DrtKind,
    pub metric: MetricKind,
    pub n_s: u32,
    pub latent_dim: usize,
    pub decode: bool,
    pub seed: u64,
    pub settings: DrtSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            drt: DrtKind::Pca,
            metric: MetricKind::L2,
            n_s: 1,
            latent_dim: 2,
            decode: false,
            seed: 0,
            settings: DrtSettings::default(),
        }
    }
}

impl RunConfig {
    /// Compact identifier, e.g. `pca/l2/ns1/m2/decode-off`. Seed and
    /// technique settings are reported separately.
    pub fn id(&self) -> String {
        format!(
            "{}/{}/ns{}/m{}/decode-{}",
            self.drt,
            self.metric,
            self.n_s,
            self.latent_dim,
            if self.decode { "on" } else { "off" }
        )
    }

    fn fit_key_matches(&self, other: &RunConfig) -> bool {
        self.drt == other.drt
            && self.latent_dim == other.latent_dim
            && self.seed == other.seed
            && self.settings == other.settings
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl FromStr for RunConfig {
    type Err = Error;

    /// Parses the output of [`RunConfig::id`]; seed and settings default.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("malformed config id {s:?}"));
        let parts: Vec<&str> = s.trim().split('/').collect();
        let [drt, metric, ns, m, dec] = parts.as_slice() else {
            return Err(bad());
        };
        Ok(RunConfig {
            drt: drt.parse()?,
            metric: metric.parse()?,
            n_s: ns
                .strip_prefix("ns")
                .and_then(|v| v.parse().ok())
                .ok_or_else(bad)?,
            latent_dim: m
                .strip_prefix('m')
                .and_then(|v| v.parse().ok())
                .ok_or_else(bad)?,
            decode: match *dec {
                "decode-on" => true,
                "decode-off" => false,
                _ => return Err(bad()),
            },
            ..RunConfig::default()
        })
    }
}

/// Per-sample scores and the descending-score order.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyRanking {
    pub scores: Vec<f64>,
    /// Sample indices, most anomalous first; ties by ascending index.
    pub order: Vec<usize>,
    pub config: RunConfig,
}

impl AnomalyRanking {
    pub fn new(scores: Vec<f64>, config: RunConfig) -> Self {
        let order = descending_order(&scores);
        AnomalyRanking {
            scores,
            order,
            config,
        }
    }

    /// 1-based rank of every sample.
    pub fn ranks(&self) -> Vec<usize> {
        let mut ranks = vec![0; self.order.len()];
        for (pos, &i) in self.order.iter().enumerate() {
            ranks[i] = pos + 1;
        }
        ranks
    }
}

/// A fitted reduction with its training encoding and merge tree.
pub struct Embedding {
    pub model: DrtModel,
    pub latent: LatentMatrix,
    pub dendrogram: Dendrogram,
}

impl Embedding {
    pub fn fit(train: &DataMatrix, config: &RunConfig) -> Result<Self> {
        let model = drt::fit_with(
            config.drt,
            train,
            config.latent_dim,
            config.seed,
            &config.settings,
        )?;
        let latent = model.encode(train)?;
        let dendrogram = Dendrogram::build(latent.as_matrix());
        Ok(Embedding {
            model,
            latent,
            dendrogram,
        })
    }

    pub fn prototypes(&self, train: &DataMatrix, n_s: u32, decode: bool) -> Result<PrototypeSet> {
        let assignment = self.dendrogram.assignment(n_s);
        extract_prototypes(train, &self.latent, &assignment, &self.model, decode)
    }

    /// Test rows expressed in the space the prototypes live in.
    pub fn project(&self, test: &DataMatrix, space: Space) -> Result<DMatrix<f64>> {
        match space {
            Space::Original => Ok(test.as_matrix().clone()),
            Space::Latent => Ok(self.model.encode(test)?.as_matrix().clone()),
        }
    }
}

/// Nearest-prototype distances under any metric, with the per-cluster
/// precisions built on first use.
pub struct Scorer {
    pub set: PrototypeSet,
    precisions: Option<Vec<Precision>>,
}

impl Scorer {
    pub fn new(set: PrototypeSet) -> Self {
        Scorer {
            set,
            precisions: None,
        }
    }

    /// `min_j d(x_i, c_j)` for every row of `points`.
    pub fn scores(&mut self, points: &DMatrix<f64>, metric: MetricKind) -> Result<Vec<f64>> {
        if points.ncols() != self.set.dim() {
            return Err(Error::ShapeMismatch {
                expected: self.set.dim(),
                found: points.ncols(),
            });
        }
        let n = points.nrows();
        let mut best = vec![f64::INFINITY; n];
        if metric == MetricKind::Mahalanobis {
            if self.precisions.is_none() {
                let built = self
                    .set
                    .covariances
                    .iter()
                    .map(|c| c.precision())
                    .collect::<Result<Vec<_>>>()?;
                self.precisions = Some(built);
            }
            let precisions = self.precisions.as_ref().unwrap();
            let pts_t = points.transpose();
            for (j, precision) in precisions.iter().enumerate() {
                let mut diffs = pts_t.clone();
                let proto = self.set.prototypes.row(j).transpose();
                for mut col in diffs.column_iter_mut() {
                    col -= &proto;
                }
                for (b, q) in best.iter_mut().zip(precision.quadratic_forms(&diffs)?) {
                    *b = b.min(q.sqrt());
                }
            }
        } else {
            let ctx = if metric.needs_scale() {
                MetricContext::with_sigma(self.set.sigma.clone())
            } else {
                MetricContext::default()
            };
            let protos: Vec<Vec<f64>> = (0..self.set.len()).map(|j| self.set.row(j)).collect();
            for (i, b) in best.iter_mut().enumerate() {
                let row: Vec<f64> = points.row(i).iter().copied().collect();
                for proto in &protos {
                    *b = b.min(distance(metric, &row, proto, &ctx)?);
                }
            }
        }
        Ok(best)
    }
}

/// Fits on `train` and ranks the rows of `test`.
pub fn run_pipeline(
    train: &DataMatrix,
    test: &DataMatrix,
    config: &RunConfig,
) -> Result<AnomalyRanking> {
    if train.n_features() != test.n_features() {
        return Err(Error::ShapeMismatch {
            expected: train.n_features(),
            found: test.n_features(),
        });
    }
    let embedding = Embedding::fit(train, config)?;
    let set = embedding.prototypes(train, config.n_s, config.decode)?;
    let points = embedding.project(test, set.space)?;
    let scores = Scorer::new(set).scores(&points, config.metric)?;
    Ok(AnomalyRanking::new(scores, config.clone()))
}

/// Axis values for [`grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxes {
    pub drts: Vec<DrtKind>,
    pub metrics: Vec<MetricKind>,
    pub n_s: Vec<u32>,
    pub decode: Vec<bool>,
    pub latent_dim: usize,
    pub seed: u64,
    pub settings: DrtSettings,
}

impl Default for GridAxes {
    fn default() -> Self {
        GridAxes {
            drts: DrtKind::ALL.to_vec(),
            metrics: MetricKind::ALL.to_vec(),
            n_s: vec![1, 2, 3],
            decode: vec![false, true],
            latent_dim: 2,
            seed: 0,
            settings: DrtSettings::default(),
        }
    }
}

/// Cartesian product in technique, metric, split depth, decode-flag order.
pub fn grid(axes: &GridAxes) -> Result<Vec<RunConfig>> {
    if axes.drts.is_empty()
        || axes.metrics.is_empty()
        || axes.n_s.is_empty()
        || axes.decode.is_empty()
    {
        return Err(Error::InvalidArgument(
            "every grid axis needs at least one value".into(),
        ));
    }
    let mut out = Vec::new();
    for &drt in &axes.drts {
        for &metric in &axes.metrics {
            for &n_s in &axes.n_s {
                for &decode in &axes.decode {
                    out.push(RunConfig {
                        drt,
                        metric,
                        n_s,
                        latent_dim: axes.latent_dim,
                        decode,
                        seed: axes.seed,
                        settings: axes.settings.clone(),
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Anything that turns a dataset into one anomaly score per row.
#[derive(Debug, Clone, PartialEq)]
pub enum Candidate {
    Drama(RunConfig),
    Lof(LofConfig),
    Iforest(IforestConfig),
}

impl Candidate {
    pub fn algorithm(&self) -> &'static str {
        match self {
            Candidate::Drama(_) => "drama",
            Candidate::Lof(_) => "lof",
            Candidate::Iforest(_) => "iforest",
        }
    }

    pub fn id(&self) -> String {
        match self {
            Candidate::Drama(c) => c.id(),
            Candidate::Lof(c) => format!("k{}", c.k),
            Candidate::Iforest(c) => format!("trees{}/psi{}", c.trees, c.subsample),
        }
    }
}

/// Transductive scores for every candidate, in input order. A failing
/// candidate yields its error without affecting the others.
pub fn evaluate_candidates(data: &DataMatrix, candidates: &[Candidate]) -> Vec<Result<Vec<f64>>> {
    // group pipeline configs that can share one reduction fit
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        if let Candidate::Drama(cfg) = c {
            let found = groups.iter_mut().find(|g| match &candidates[g[0]] {
                Candidate::Drama(head) => head.fit_key_matches(cfg),
                _ => false,
            });
            match found {
                Some(g) => g.push(i),
                None => groups.push(vec![i]),
            }
        }
    }

    let mut results: Vec<Option<Result<Vec<f64>>>> = (0..candidates.len()).map(|_| None).collect();
    let grouped: Vec<Vec<(usize, Result<Vec<f64>>)>> = groups
        .par_iter()
        .map(|group| {
            let configs: Vec<&RunConfig> = group
                .iter()
                .map(|&i| match &candidates[i] {
                    Candidate::Drama(c) => c,
                    _ => unreachable!(),
                })
                .collect();
            group
                .iter()
                .copied()
                .zip(score_fit_group(data, &configs))
                .collect()
        })
        .collect();
    for (i, r) in grouped.into_iter().flatten() {
        results[i] = Some(r);
    }

    let baseline: Vec<(usize, Result<Vec<f64>>)> = candidates
        .par_iter()
        .enumerate()
        .filter_map(|(i, c)| match c {
            Candidate::Lof(cfg) => Some((i, lof_scores(data, *cfg))),
            Candidate::Iforest(cfg) => Some((i, iforest_scores(data, *cfg))),
            Candidate::Drama(_) => None,
        })
        .collect();
    for (i, r) in baseline {
        results[i] = Some(r);
    }
    results
        .into_iter()
        .map(|r| r.expect("every candidate evaluated"))
        .collect()
}

/// Scores a set of configs that share one reduction fit.
fn score_fit_group(data: &DataMatrix, configs: &[&RunConfig]) -> Vec<Result<Vec<f64>>> {
    let embedding = match Embedding::fit(data, configs[0]) {
        Ok(e) => e,
        Err(e) => {
            let msg = e.to_string();
            let is_diverged = matches!(e, Error::FitDiverged { .. });
            return configs
                .iter()
                .map(|_| {
                    Err(if is_diverged {
                        Error::FitDiverged { step: 0 }
                    } else {
                        Error::InvalidArgument(msg.clone())
                    })
                })
                .collect();
        }
    };
    let mut scorers: BTreeMap<(u32, bool), Result<(Scorer, DMatrix<f64>)>> = BTreeMap::new();
    configs
        .iter()
        .map(|cfg| {
            let entry = scorers.entry((cfg.n_s, cfg.decode)).or_insert_with(|| {
                let set = embedding.prototypes(data, cfg.n_s, cfg.decode)?;
                let points = embedding.project(data, set.space)?;
                Ok((Scorer::new(set), points))
            });
            match entry {
                Ok((scorer, points)) => scorer.scores(points, cfg.metric),
                Err(e) => Err(Error::InvalidArgument(e.to_string())),
            }
        })
        .collect()
}

/// Which partial-label score picks the winner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Criterion {
    #[default]
    Auc,
    Rws,
}

/// `n_seen` outlier indices drawn without replacement from the sorted
/// outlier list. The draw is a prefix of one seeded shuffle, so for a fixed
/// seed the seen set only grows with `n_seen`.
pub fn sample_seen(labels: &LabelVector, n_seen: usize, seed: u64) -> Result<Vec<usize>> {
    if n_seen == 0 {
        return Err(Error::InvalidArgument("n_seen must be at least 1".into()));
    }
    let outliers = labels.outlier_indices();
    if n_seen > outliers.len() {
        return Err(Error::NotEnoughOutliers {
            requested: n_seen,
            available: outliers.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = outliers;
    shuffled.shuffle(&mut rng);
    let mut seen = shuffled[..n_seen].to_vec();
    seen.sort_unstable();
    Ok(seen)
}

/// Score on the rows that are either inliers or seen outliers; unseen
/// outliers are left out entirely.
pub fn partial_score(
    scores: &[f64],
    labels: &LabelVector,
    seen: &[usize],
    criterion: Criterion,
) -> Result<f64> {
    let keep: Vec<usize> = (0..labels.len())
        .filter(|&i| !labels.is_outlier(i) || seen.binary_search(&i).is_ok())
        .collect();
    let sub_scores: Vec<f64> = keep.iter().map(|&i| scores[i]).collect();
    let sub_labels = labels.select(&keep);
    match criterion {
        Criterion::Auc => auc(&sub_scores, &sub_labels),
        Criterion::Rws => rws(&descending_order(&sub_scores), &sub_labels),
    }
}

/// Winner of a score table under partial labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub best: usize,
    pub seen: Vec<usize>,
    /// Partial-label score per candidate; `None` where the candidate failed.
    pub partial: Vec<Option<f64>>,
}

/// Picks the highest partial-label score; ties go to the earliest entry,
/// failed entries are skipped.
pub fn select_with_seen(
    scores: &[Result<Vec<f64>>],
    labels: &LabelVector,
    n_seen: usize,
    seed: u64,
    criterion: Criterion,
) -> Result<Selection> {
    let seen = sample_seen(labels, n_seen, seed)?;
    let partial: Vec<Option<f64>> = scores
        .iter()
        .map(|s| match s {
            Ok(v) => partial_score(v, labels, &seen, criterion).ok(),
            Err(_) => None,
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in partial.iter().enumerate() {
        if let Some(v) = *p {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
    }
    let (best, _) = best.ok_or(Error::NoValidCandidate)?;
    Ok(Selection {
        best,
        seen,
        partial,
    })
}

/// One row of a tuning report.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub candidate: Candidate,
    pub partial: Option<f64>,
    /// Against the full labels.
    pub auc: Option<f64>,
    pub rws: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tuning {
    pub best: usize,
    pub seen: Vec<usize>,
    pub rows: Vec<TableRow>,
}

impl Tuning {
    pub fn best_row(&self) -> &TableRow {
        &self.rows[self.best]
    }
}

pub fn tune_candidates(
    data: &Dataset,
    n_seen: usize,
    candidates: &[Candidate],
    seed: u64,
    criterion: Criterion,
) -> Result<Tuning> {
    let labels = data.labels()?;
    sample_seen(labels, n_seen, seed)?;
    if candidates.is_empty() {
        return Err(Error::NoValidCandidate);
    }
    let scores = evaluate_candidates(&data.data, candidates);
    let selection = select_with_seen(&scores, labels, n_seen, seed, criterion)?;
    let rows = candidates
        .iter()
        .zip(&scores)
        .zip(&selection.partial)
        .map(|((c, s), p)| {
            let (auc_full, rws_full) = match s {
                Ok(v) => (auc(v, labels).ok(), rws(&descending_order(v), labels).ok()),
                Err(_) => (None, None),
            };
            TableRow {
                candidate: c.clone(),
                partial: *p,
                auc: auc_full,
                rws: rws_full,
            }
        })
        .collect();
    Ok(Tuning {
        best: selection.best,
        seen: selection.seen,
        rows,
    })
}

/// Seen-anomaly selection over a grid of pipeline configs, by partial AUC.
pub fn tune_with_seen_anomalies(
    data: &Dataset,
    n_seen: usize,
    grid: &[RunConfig],
    seed: u64,
) -> Result<Tuning> {
    let candidates: Vec<Candidate> = grid.iter().cloned().map(Candidate::Drama).collect();
    tune_candidates(data, n_seen, &candidates, seed, Criterion::Auc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn blob_with_far_points(seed: u64) -> DataMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 0.1).unwrap();
        let mut rows: Vec<Vec<f64>> = (0..100)
            .map(|_| (0..10).map(|_| normal.sample(&mut rng)).collect())
            .collect();
        // three far points spanning one plane: +-10 e0 and 10 e1
        for (k, v) in [(0, 10.0), (0, -10.0), (1, 10.0)] {
            let mut r = vec![0.0; 10];
            r[k] = v;
            rows.push(r);
        }
        DataMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn far_points_rank_first() {
        let data = blob_with_far_points(1);
        // centering only: standardizing would give every feature unit
        // variance and leave the leading principal plane arbitrary
        let mut config = RunConfig {
            n_s: 0,
            ..RunConfig::default()
        };
        config.settings.standardize = false;
        let ranking = run_pipeline(&data, &data, &config).unwrap();
        let mut top: Vec<usize> = ranking.order[..3].to_vec();
        top.sort_unstable();
        assert_eq!(top, vec![100, 101, 102]);
        // oracle: distance to the data mean in feature space
        let x = data.as_matrix();
        let mean = crate::linalg::column_means(x);
        let oracle: Vec<f64> = (0..103)
            .map(|i| (x.row(i).transpose() - &mean).norm())
            .collect();
        let mut oracle_top = descending_order(&oracle)[..3].to_vec();
        oracle_top.sort_unstable();
        assert_eq!(oracle_top, top);
    }

    #[test]
    fn decoded_full_rank_single_prototype_is_distance_to_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = DMatrix::from_fn(30, 4, |_, _| rng.random_range(-2.0..2.0));
        let data = DataMatrix::from_matrix(x.clone()).unwrap();
        let config = RunConfig {
            n_s: 0,
            latent_dim: 4,
            decode: true,
            ..RunConfig::default()
        };
        let ranking = run_pipeline(&data, &data, &config).unwrap();
        let mean = crate::linalg::column_means(&x);
        let oracle: Vec<f64> = (0..30)
            .map(|i| (x.row(i).transpose() - &mean).norm())
            .collect();
        for (a, b) in ranking.scores.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-8);
        }
        assert_eq!(ranking.order, descending_order(&oracle));
    }

    #[test]
    fn prototype_row_scores_zero_and_ranks_last() {
        let data = blob_with_far_points(3);
        let config = RunConfig {
            n_s: 0,
            latent_dim: 10,
            decode: true,
            ..RunConfig::default()
        };
        let embedding = Embedding::fit(&data, &config).unwrap();
        let set = embedding.prototypes(&data, 0, true).unwrap();
        let mut rows = data.rows();
        rows.push(set.row(0));
        let test = DataMatrix::from_rows(&rows).unwrap();
        let ranking = run_pipeline(&data, &test, &config).unwrap();
        assert!(ranking.scores[103] < 1e-9);
        assert_eq!(*ranking.order.last().unwrap(), 103);
    }

    #[test]
    fn grid_sizes_and_order() {
        let one = GridAxes {
            drts: vec![DrtKind::Pca],
            metrics: vec![MetricKind::L1],
            n_s: vec![1],
            decode: vec![false],
            ..GridAxes::default()
        };
        assert_eq!(grid(&one).unwrap().len(), 1);
        let full = grid(&GridAxes::default()).unwrap();
        assert_eq!(full.len(), 300);
        assert_eq!(full[0].id(), "pca/l1/ns1/m2/decode-off");
        assert_eq!(full[1].id(), "pca/l1/ns1/m2/decode-on");
        assert_eq!(full[2].id(), "pca/l1/ns2/m2/decode-off");
        assert_eq!(full[6].id(), "pca/l2/ns1/m2/decode-off");
        assert_eq!(full[60].drt, DrtKind::Ica);
        let empty = GridAxes {
            metrics: vec![],
            ..GridAxes::default()
        };
        assert!(grid(&empty).is_err());
    }

    #[test]
    fn config_ids_round_trip() {
        for c in grid(&GridAxes::default()).unwrap() {
            assert_eq!(c.id().parse::<RunConfig>().unwrap(), c);
        }
        assert!("pca/l2".parse::<RunConfig>().is_err());
    }

    #[test]
    fn grid_evaluation_matches_individual_runs() {
        let data = blob_with_far_points(4);
        let axes = GridAxes {
            drts: vec![DrtKind::Pca, DrtKind::Ica],
            n_s: vec![1, 2],
            ..GridAxes::default()
        };
        let configs = grid(&axes).unwrap();
        let candidates: Vec<Candidate> = configs.iter().cloned().map(Candidate::Drama).collect();
        let batch = evaluate_candidates(&data, &candidates);
        for (cfg, got) in configs.iter().zip(batch) {
            let single = run_pipeline(&data, &data, cfg).map(|r| r.scores);
            match (got, single) {
                (Ok(a), Ok(b)) => assert_eq!(a, b, "{cfg}"),
                (Err(_), Err(_)) => {}
                (a, b) => panic!("{cfg}: {:?} vs {:?}", a.is_ok(), b.is_ok()),
            }
        }
    }

    #[test]
    fn selection_picks_the_separating_config() {
        let labels = LabelVector::from_flags(&[false, false, true, false, true]);
        let good = vec![0.1, 0.2, 0.9, 0.3, 0.8];
        let bad: Vec<f64> = good.iter().map(|v| -v).collect();
        let table = vec![Ok(bad), Ok(good)];
        let s = select_with_seen(&table, &labels, 1, 0, Criterion::Auc).unwrap();
        assert_eq!(s.best, 1);
        assert_eq!(s.partial[1], Some(1.0));
        let single = vec![Ok(vec![0.0; 5])];
        assert_eq!(
            select_with_seen(&single, &labels, 2, 0, Criterion::Auc)
                .unwrap()
                .best,
            0
        );
        assert!(matches!(
            select_with_seen(&single, &labels, 3, 0, Criterion::Auc),
            Err(Error::NotEnoughOutliers {
                requested: 3,
                available: 2
            })
        ));
        let failed: Vec<Result<Vec<f64>>> = vec![Err(Error::NoValidCandidate)];
        assert!(matches!(
            select_with_seen(&failed, &labels, 1, 0, Criterion::Auc),
            Err(Error::NoValidCandidate)
        ));
    }

    #[test]
    fn partial_labels_drop_unseen_outliers() {
        let labels = LabelVector::from_flags(&[true, true, false, false]);
        // unseen outlier 1 scores lowest; it must not count against the ranking
        let scores = [0.9, 0.0, 0.5, 0.4];
        assert_eq!(
            partial_score(&scores, &labels, &[0], Criterion::Auc).unwrap(),
            1.0
        );
        assert_eq!(
            partial_score(&scores, &labels, &[0, 1], Criterion::Auc).unwrap(),
            0.5
        );
    }

    #[test]
    fn seen_sampling_is_seeded() {
        let labels = LabelVector::from_flags(&(0..50).map(|i| i % 5 == 0).collect::<Vec<_>>());
        let a = sample_seen(&labels, 4, 7).unwrap();
        assert_eq!(a, sample_seen(&labels, 4, 7).unwrap());
        assert!(a.iter().all(|&i| labels.is_outlier(i)));
        assert!(a.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn tuning_returns_argmax_of_table() {
        let data = blob_with_far_points(5);
        let flags: Vec<bool> = (0..103).map(|i| i >= 100).collect();
        let ds = Dataset::new("blob", data, Some(LabelVector::from_flags(&flags))).unwrap();
        let axes = GridAxes {
            drts: vec![DrtKind::Pca],
            n_s: vec![1, 2],
            ..GridAxes::default()
        };
        let configs = grid(&axes).unwrap();
        let t = tune_with_seen_anomalies(&ds, 2, &configs, 1).unwrap();
        let best = t.best_row().partial.unwrap();
        for (i, r) in t.rows.iter().enumerate() {
            if let Some(p) = r.partial {
                assert!(p <= best);
                if p == best {
                    assert!(i >= t.best);
                }
            }
        }
    }
}
