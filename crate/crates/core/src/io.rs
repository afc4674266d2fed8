//! CSV datasets, rankings, result tables and key=value config files.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! value reads back bit-identically. Files are written to a temporary
//! sibling and renamed into place.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, Dataset, Label, LabelVector};
use crate::error::{Error, Result};

pub const LABEL_COLUMN: &str = "label";
pub const RESULTS_HEADER: [&str; 8] = [
    "dataset",
    "algorithm",
    "config",
    "seed",
    "n_seen",
    "auc",
    "rws",
    "seconds",
];

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if let csv::ErrorKind::Io(io) = e.kind() {
        return Error::Io(std::io::Error::new(
            io.kind(),
            format!("{}: {io}", path.display()),
        ));
    }
    let line = e.position().map_or(0, |p| p.line() as usize);
    parse_error(path, line, e.to_string())
}

/// Writes `bytes` to a temporary file next to `path`, then renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_csv<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> std::result::Result<(), csv::Error>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    fill(&mut w).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}

fn parse_label(path: &Path, line: usize, raw: &str) -> Result<Label> {
    match raw.trim().parse::<f64>() {
        Ok(v) if v == 0.0 => Ok(Label::Inlier),
        Ok(v) if v == 1.0 => Ok(Label::Outlier),
        _ => Err(Error::BadLabelValue {
            path: path.to_path_buf(),
            line,
            value: raw.to_string(),
        }),
    }
}

/// Reads a headed CSV. A column named `label` (0 inlier, 1 outlier) becomes
/// the label vector; every other column is a numeric feature. The dataset is
/// named after the file stem.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    parse_dataset(&text, &name, path)
}

/// [`read_dataset`] on in-memory text; `path` is only used in diagnostics.
pub fn parse_dataset(text: &str, name: &str, path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(parse_error(path, 1, "missing header row"));
    }
    let label_col = header.iter().position(|h| h == LABEL_COLUMN);
    let n_features = header.len() - usize::from(label_col.is_some());
    if n_features == 0 {
        return Err(parse_error(path, 1, "no feature columns"));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record
            .position()
            .map_or(rows.len() + 2, |p| p.line() as usize);
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        if record.len() != header.len() {
            return Err(parse_error(
                path,
                line,
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        let mut row = Vec::with_capacity(n_features);
        for (c, field) in record.iter().enumerate() {
            if Some(c) == label_col {
                labels.push(parse_label(path, line, field)?);
                continue;
            }
            let v = field.trim().parse::<f64>().ok().filter(|v| v.is_finite());
            match v {
                Some(v) => row.push(v),
                None => {
                    return Err(Error::NonNumericFeature {
                        path: path.to_path_buf(),
                        column: header[c].clone(),
                        line,
                        value: field.to_string(),
                    })
                }
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let data = DataMatrix::from_rows(&rows)?;
    let labels = label_col.map(|_| LabelVector::new(labels));
    Dataset::new(name, data, labels)
}

/// Feature columns `f0, f1, …` plus `label` when labels are present.
pub fn write_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let p = dataset.data.n_features();
    write_csv(path, |w| {
        let mut header: Vec<String> = (0..p).map(|j| format!("f{j}")).collect();
        if dataset.labels.is_some() {
            header.push(LABEL_COLUMN.into());
        }
        w.write_record(&header)?;
        let x = dataset.data.as_matrix();
        for i in 0..dataset.data.n_samples() {
            let mut rec: Vec<String> = (0..p).map(|j| x[(i, j)].to_string()).collect();
            if let Some(l) = &dataset.labels {
                rec.push(if l.is_outlier(i) { "1" } else { "0" }.into());
            }
            w.write_record(&rec)?;
        }
        Ok(())
    })
}

/// One evaluated (dataset, algorithm, config, seed) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub algorithm: String,
    pub config: String,
    pub seed: u64,
    pub n_seen: usize,
    pub auc: f64,
    pub rws: f64,
    pub seconds: f64,
}

pub fn write_results(rows: &[ResultRow], path: &Path) -> Result<()> {
    write_csv(path, |w| {
        w.write_record(RESULTS_HEADER)?;
        for r in rows {
            w.write_record([
                r.dataset.clone(),
                r.algorithm.clone(),
                r.config.clone(),
                r.seed.to_string(),
                r.n_seen.to_string(),
                r.auc.to_string(),
                r.rws.to_string(),
                r.seconds.to_string(),
            ])?;
        }
        Ok(())
    })
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(String::from)
        .collect();
    if header != RESULTS_HEADER {
        return Err(parse_error(path, 1, "unexpected results header"));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(|e| csv_error(path, e)))
        .collect()
}

/// `index,score,rank` rows in index order; rank is 1-based.
pub fn write_ranking(scores: &[f64], ranks: &[usize], path: &Path) -> Result<()> {
    write_csv(path, |w| {
        w.write_record(["index", "score", "rank"])?;
        for (i, (s, r)) in scores.iter().zip(ranks).enumerate() {
            w.write_record([i.to_string(), s.to_string(), r.to_string()])?;
        }
        Ok(())
    })
}

/// A ranking file read back: scores by sample index and the rank order.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingFile {
    pub scores: Vec<f64>,
    /// Sample indices, rank 1 first.
    pub order: Vec<usize>,
}

pub fn read_ranking(path: &Path) -> Result<RankingFile> {
    #[derive(Deserialize)]
    struct Row {
        index: usize,
        score: f64,
        rank: usize,
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let rows: Vec<Row> = reader
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| csv_error(path, e))?;
    let n = rows.len();
    let mut scores = vec![f64::NAN; n];
    let mut order = vec![usize::MAX; n];
    for (line, r) in rows.iter().enumerate() {
        if r.index >= n
            || r.rank == 0
            || r.rank > n
            || !scores[r.index].is_nan()
            || order[r.rank - 1] != usize::MAX
        {
            return Err(parse_error(
                path,
                line + 2,
                "indices and ranks must each be a permutation",
            ));
        }
        scores[r.index] = r.score;
        order[r.rank - 1] = r.index;
    }
    Ok(RankingFile { scores, order })
}

/// Flat `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str, path: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| parse_error(path, i + 1, "expected key=value"))?;
        out.insert(k.trim().replace('_', "-"), v.trim().to_string());
    }
    Ok(out)
}

pub fn read_config(path: &Path) -> Result<BTreeMap<String, String>> {
    parse_config(&fs::read_to_string(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_with_labels() {
        let ds = parse_dataset("a,b,label\n1,2,0\n3,4,1\n", "t", Path::new("t.csv")).unwrap();
        assert_eq!(ds.data.as_matrix().shape(), (2, 2));
        assert_eq!(ds.data.row(1), vec![3.0, 4.0]);
        let l = ds.labels.unwrap();
        assert!(!l.is_outlier(0) && l.is_outlier(1));
    }

    #[test]
    fn labels_are_optional() {
        let ds = parse_dataset("a,b\n1,2\n3,4\n", "t", Path::new("t.csv")).unwrap();
        assert!(ds.labels.is_none());
    }

    #[test]
    fn parse_errors_carry_location() {
        let p = Path::new("t.csv");
        assert!(matches!(
            parse_dataset("a,b\n1,x\n", "t", p),
            Err(Error::NonNumericFeature { line: 2, ref column, .. }) if column == "b"
        ));
        assert!(matches!(
            parse_dataset("a,label\n1,2\n", "t", p),
            Err(Error::BadLabelValue { line: 2, .. })
        ));
        assert!(matches!(
            parse_dataset("a,b\n1,2\n3\n", "t", p),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            parse_dataset("a,b\n", "t", p),
            Err(Error::EmptyMatrix)
        ));
        assert!(matches!(
            parse_dataset("a,b\n1,nan\n", "t", p),
            Err(Error::NonNumericFeature { .. })
        ));
    }

    #[test]
    fn dataset_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let rows = vec![
            vec![0.1 + 0.2, -1e-300, 12345.678901234567],
            vec![1.0 / 3.0, 2.0, f64::MAX],
        ];
        let ds = Dataset::new(
            "d",
            DataMatrix::from_rows(&rows).unwrap(),
            Some(LabelVector::from_flags(&[false, true])),
        )
        .unwrap();
        write_dataset(&ds, &path).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn results_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_results(&[], &path).unwrap();
        assert_eq!(
            fs::read_to_string(&path).unwrap(),
            format!("{}\n", RESULTS_HEADER.join(","))
        );
        let row = ResultRow {
            dataset: "wine".into(),
            algorithm: "drama".into(),
            config: "pca/l2/ns1/m2/decode-off".into(),
            seed: 3,
            n_seen: 5,
            auc: 0.1 + 0.7,
            rws: 2.0 / 3.0,
            seconds: 0.0,
        };
        write_results(std::slice::from_ref(&row), &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 2);
        assert_eq!(read_results(&path).unwrap(), vec![row]);
    }

    #[test]
    fn ranking_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rank.csv");
        write_ranking(&[0.5, 2.0, 1.0], &[3, 1, 2], &path).unwrap();
        let r = read_ranking(&path).unwrap();
        assert_eq!(r.scores, vec![0.5, 2.0, 1.0]);
        assert_eq!(r.order, vec![1, 2, 0]);
    }

    #[test]
    fn config_lines() {
        let c = parse_config(
            "# comment\ndrt = ica\nn_seen=3 # trailing\n\n",
            Path::new("c"),
        )
        .unwrap();
        assert_eq!(c["drt"], "ica");
        assert_eq!(c["n-seen"], "3");
        assert!(parse_config("oops\n", Path::new("c")).is_err());
    }
}
