//! Seen-anomaly comparison of the pipeline against the baselines.
//!
//! For every dataset and seed, all candidates of every algorithm are scored
//! once. Then, per number of seen anomalies, each algorithm's best candidate
//! is chosen on the partial labels and evaluated on the full labels.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use crate::baselines::{IforestConfig, LofConfig};
use crate::data::Dataset;
use crate::detector::{
    evaluate_candidates, grid, select_with_seen, Candidate, Criterion, GridAxes,
};
use crate::error::{Error, Result};
use crate::io::{read_dataset, write_atomic, ResultRow};
use crate::scoring::{auc, descending_order, rws};
use crate::simgen::{generate, Challenge, ChallengeSpec, Scale, N_SHAPES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Drama,
    Lof,
    Iforest,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Drama, Algorithm::Lof, Algorithm::Iforest];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Drama => "drama",
            Algorithm::Lof => "lof",
            Algorithm::Iforest => "iforest",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Algorithm::ALL
            .iter()
            .copied()
            .find(|a| a.name() == lower)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown algorithm {s:?}")))
    }
}

/// Hyperparameter grids searched for each algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmGrids {
    /// The seed field is overwritten per run.
    pub drama: GridAxes,
    pub lof_k: Vec<usize>,
    pub iforest_subsamples: Vec<usize>,
    pub iforest_trees: usize,
}

impl Default for AlgorithmGrids {
    fn default() -> Self {
        AlgorithmGrids {
            drama: GridAxes::default(),
            lof_k: LofConfig::DEFAULT_GRID.to_vec(),
            iforest_subsamples: IforestConfig::DEFAULT_SUBSAMPLES.to_vec(),
            iforest_trees: 100,
        }
    }
}

impl AlgorithmGrids {
    /// Candidates of one algorithm for a dataset of `n` rows. LOF sizes that
    /// do not fit (`k ≥ n`) are dropped.
    pub fn candidates(&self, algorithm: Algorithm, seed: u64, n: usize) -> Result<Vec<Candidate>> {
        Ok(match algorithm {
            Algorithm::Drama => {
                let axes = GridAxes {
                    seed,
                    ..self.drama.clone()
                };
                grid(&axes)?.into_iter().map(Candidate::Drama).collect()
            }
            Algorithm::Lof => self
                .lof_k
                .iter()
                .filter(|&&k| k < n)
                .map(|&k| Candidate::Lof(LofConfig { k }))
                .collect(),
            Algorithm::Iforest => self
                .iforest_subsamples
                .iter()
                .map(|&subsample| {
                    Candidate::Iforest(IforestConfig {
                        trees: self.iforest_trees,
                        subsample,
                        seed,
                    })
                })
                .collect(),
        })
    }
}

/// What to run on each dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    pub algorithms: Vec<Algorithm>,
    pub grids: AlgorithmGrids,
    pub n_seen: Vec<usize>,
    pub criterion: Criterion,
    /// Record wall time; off keeps result files reproducible byte for byte.
    pub timing: bool,
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol {
            algorithms: Algorithm::ALL.to_vec(),
            grids: AlgorithmGrids::default(),
            n_seen: vec![1, 2, 5, 10, 20, 50],
            criterion: Criterion::Auc,
            timing: false,
        }
    }
}

/// Scores every algorithm on one labelled dataset with one seed and returns a
/// row per `(n_seen, algorithm)`. `n_seen` values above the outlier count are
/// skipped; an algorithm whose candidates all fail is skipped too.
pub fn evaluate_dataset(
    dataset: &Dataset,
    seed: u64,
    protocol: &Protocol,
) -> Result<Vec<ResultRow>> {
    if protocol.n_seen.is_empty() {
        return Err(Error::InvalidArgument("n_seen list is empty".into()));
    }
    let labels = dataset.labels()?;
    let n = dataset.data.n_samples();
    let mut per_algorithm = Vec::new();
    for &algorithm in &protocol.algorithms {
        let candidates = protocol.grids.candidates(algorithm, seed, n)?;
        let start = Instant::now();
        let scores = evaluate_candidates(&dataset.data, &candidates);
        let seconds = if protocol.timing {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        };
        per_algorithm.push((algorithm, candidates, scores, seconds));
    }

    let mut rows = Vec::new();
    for &n_seen in &protocol.n_seen {
        if n_seen == 0 || n_seen > labels.n_outliers() {
            continue;
        }
        for (algorithm, candidates, scores, seconds) in &per_algorithm {
            let selection = match select_with_seen(scores, labels, n_seen, seed, protocol.criterion)
            {
                Ok(s) => s,
                Err(Error::NoValidCandidate) => continue,
                Err(e) => return Err(e),
            };
            let chosen = scores[selection.best]
                .as_ref()
                .expect("selected candidate succeeded");
            rows.push(ResultRow {
                dataset: dataset.name.clone(),
                algorithm: algorithm.name().into(),
                config: candidates[selection.best].id(),
                seed,
                n_seen,
                auc: auc(chosen, labels)?,
                rws: rws(&descending_order(chosen), labels)?,
                seconds: *seconds,
            });
        }
    }
    Ok(rows)
}

/// Mean and best (over seeds) of the selected candidate's full-label scores.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub n_seen: usize,
    pub algorithm: String,
    pub mean_auc: f64,
    pub best_auc: f64,
    pub mean_rws: f64,
    pub best_rws: f64,
    pub runs: usize,
}

/// Groups rows by `(n_seen, algorithm)` in first-appearance order.
pub fn aggregate(rows: &[ResultRow]) -> Vec<CurvePoint> {
    let mut keys: Vec<(usize, String)> = Vec::new();
    for r in rows {
        let key = (r.n_seen, r.algorithm.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(n_seen, algorithm)| {
            let group: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| r.n_seen == n_seen && r.algorithm == algorithm)
                .collect();
            let k = group.len() as f64;
            CurvePoint {
                n_seen,
                mean_auc: group.iter().map(|r| r.auc).sum::<f64>() / k,
                best_auc: group
                    .iter()
                    .map(|r| r.auc)
                    .fold(f64::NEG_INFINITY, f64::max),
                mean_rws: group.iter().map(|r| r.rws).sum::<f64>() / k,
                best_rws: group
                    .iter()
                    .map(|r| r.rws)
                    .fold(f64::NEG_INFINITY, f64::max),
                runs: group.len(),
                algorithm,
            }
        })
        .collect()
}

/// Full comparison on one synthetic challenge. Seed `s` generates the
/// dataset with shape (or anomaly class) `s mod 10`.
pub fn run_challenge_curve(
    challenge: Challenge,
    seeds: &[u64],
    scale: Scale,
    protocol: &Protocol,
) -> Result<(Vec<ResultRow>, Vec<CurvePoint>)> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("seed list is empty".into()));
    }
    let mut rows = Vec::new();
    for &seed in seeds {
        let spec = ChallengeSpec::new(challenge, (seed % N_SHAPES as u64) as usize, seed, scale);
        let generated = generate(&spec)?;
        rows.extend(evaluate_dataset(&generated.dataset, seed, protocol)?);
    }
    let points = aggregate(&rows);
    Ok((rows, points))
}

/// Best AUC per algorithm on one dataset and the winner.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSummary {
    pub dataset: String,
    pub best_auc: Vec<(String, f64)>,
    pub winner: String,
}

/// Winner = highest best-over-runs AUC; ties go to the earlier algorithm.
pub fn summarize_winners(rows: &[ResultRow], algorithms: &[Algorithm]) -> Vec<DatasetSummary> {
    let mut names: Vec<String> = Vec::new();
    for r in rows {
        if !names.contains(&r.dataset) {
            names.push(r.dataset.clone());
        }
    }
    names
        .into_iter()
        .map(|dataset| {
            let best_auc: Vec<(String, f64)> = algorithms
                .iter()
                .filter_map(|a| {
                    rows.iter()
                        .filter(|r| r.dataset == dataset && r.algorithm == a.name())
                        .map(|r| r.auc)
                        .reduce(f64::max)
                        .map(|v| (a.name().to_string(), v))
                })
                .collect();
            let mut winner = String::new();
            let mut top = f64::NEG_INFINITY;
            for (a, v) in &best_auc {
                if *v > top {
                    top = *v;
                    winner = a.clone();
                }
            }
            DatasetSummary {
                dataset,
                best_auc,
                winner,
            }
        })
        .collect()
}

/// Every `*.csv` in `dir`, sorted by file name.
pub fn dataset_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no .csv datasets in {}",
            dir.display()
        )));
    }
    Ok(files)
}

/// Runs the comparison on every labelled CSV in `dir`.
pub fn run_odds_suite(
    dir: &Path,
    seeds: &[u64],
    protocol: &Protocol,
) -> Result<(Vec<ResultRow>, Vec<DatasetSummary>)> {
    if protocol.n_seen.is_empty() {
        return Err(Error::InvalidArgument("n_seen list is empty".into()));
    }
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("seed list is empty".into()));
    }
    let mut rows = Vec::new();
    for path in dataset_files(dir)? {
        let dataset = read_dataset(&path)?;
        for &seed in seeds {
            rows.extend(evaluate_dataset(&dataset, seed, protocol)?);
        }
    }
    let summary = summarize_winners(&rows, &protocol.algorithms);
    Ok((rows, summary))
}

/// Curve points per dataset, datasets in first-appearance order.
pub fn curves_by_dataset(rows: &[ResultRow]) -> Vec<(String, Vec<CurvePoint>)> {
    let mut names: Vec<&str> = Vec::new();
    for r in rows {
        if !names.contains(&r.dataset.as_str()) {
            names.push(&r.dataset);
        }
    }
    names
        .into_iter()
        .map(|name| {
            let subset: Vec<ResultRow> =
                rows.iter().filter(|r| r.dataset == name).cloned().collect();
            (name.to_string(), aggregate(&subset))
        })
        .collect()
}

/// Plot-ready table; `group` is a challenge or dataset name.
pub fn curve_table(groups: &[(String, Vec<CurvePoint>)]) -> String {
    let mut out = String::from("group,n_seen,algorithm,mean_auc,best_auc,mean_rws,best_rws,runs\n");
    for (group, points) in groups {
        for p in points {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                group,
                p.n_seen,
                p.algorithm,
                p.mean_auc,
                p.best_auc,
                p.mean_rws,
                p.best_rws,
                p.runs
            ));
        }
    }
    out
}

pub fn write_curves(groups: &[(String, Vec<CurvePoint>)], path: &Path) -> Result<()> {
    write_atomic(path, curve_table(groups).as_bytes())
}

pub fn write_summary(summary: &[DatasetSummary], path: &Path) -> Result<()> {
    let mut out = String::from("dataset,algorithm,best_auc,winner\n");
    for s in summary {
        for (a, v) in &s.best_auc {
            out.push_str(&format!(
                "{},{},{},{}\n",
                s.dataset,
                a,
                v,
                u8::from(*a == s.winner)
            ));
        }
    }
    write_atomic(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drt::DrtKind;
    use crate::metrics::MetricKind;

    fn small_protocol() -> Protocol {
        Protocol {
            grids: AlgorithmGrids {
                drama: GridAxes {
                    drts: vec![DrtKind::Pca],
                    metrics: vec![MetricKind::L2, MetricKind::Correlation],
                    n_s: vec![1, 2],
                    ..GridAxes::default()
                },
                lof_k: vec![5, 10],
                iforest_subsamples: vec![32],
                iforest_trees: 20,
            },
            n_seen: vec![1, 3],
            ..Protocol::default()
        }
    }

    fn small_c2(seed: u64) -> Dataset {
        let spec = ChallengeSpec::new(Challenge::C2a, 3, seed, Scale::Desk)
            .with_counts(8, 4)
            .with_features(20);
        generate(&spec).unwrap().dataset
    }

    #[test]
    fn one_row_per_n_seen_and_algorithm() {
        let rows = evaluate_dataset(&small_c2(1), 1, &small_protocol()).unwrap();
        assert_eq!(rows.len(), 6);
        let points = aggregate(&rows);
        assert_eq!(points.len(), 6);
        for p in &points {
            assert_eq!(p.runs, 1);
            assert_eq!(p.mean_auc, p.best_auc);
        }
    }

    #[test]
    fn aggregation_matches_independent_pass() {
        let protocol = small_protocol();
        let mut rows = Vec::new();
        for seed in 0..3 {
            rows.extend(evaluate_dataset(&small_c2(seed), seed, &protocol).unwrap());
        }
        for p in aggregate(&rows) {
            let mut sum = 0.0;
            let mut best = f64::NEG_INFINITY;
            let mut count = 0;
            for r in &rows {
                if r.n_seen == p.n_seen && r.algorithm == p.algorithm {
                    sum += r.auc;
                    best = best.max(r.auc);
                    count += 1;
                }
            }
            assert_eq!(p.runs, count);
            assert_eq!(p.mean_auc, sum / count as f64);
            assert_eq!(p.best_auc, best);
            assert!(p.best_auc >= p.mean_auc);
        }
    }

    #[test]
    fn n_seen_beyond_outliers_is_skipped_and_empty_list_rejected() {
        let protocol = Protocol {
            n_seen: vec![1, 50],
            ..small_protocol()
        };
        let rows = evaluate_dataset(&small_c2(2), 2, &protocol).unwrap();
        assert!(rows.iter().all(|r| r.n_seen == 1));
        let empty = Protocol {
            n_seen: vec![],
            ..small_protocol()
        };
        assert!(matches!(
            evaluate_dataset(&small_c2(2), 2, &empty),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn winners_break_ties_by_algorithm_order() {
        let row = |a: &str, auc: f64| ResultRow {
            dataset: "d".into(),
            algorithm: a.into(),
            config: String::new(),
            seed: 0,
            n_seen: 1,
            auc,
            rws: 0.0,
            seconds: 0.0,
        };
        let rows = vec![row("drama", 0.8), row("lof", 0.9), row("iforest", 0.9)];
        let s = summarize_winners(&rows, &Algorithm::ALL);
        assert_eq!(s[0].winner, "lof");
    }

    #[test]
    fn algorithm_names() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
    }
}
