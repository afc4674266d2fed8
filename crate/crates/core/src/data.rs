//! Numeric containers shared by every stage of the pipeline.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `n_d × n_f` table of finite reals: one row per sample, one column per feature.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
}

impl DataMatrix {
    /// Validates a row-major table. Rows must all have the same length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        for (i, r) in rows.iter().enumerate() {
            if r.as_ref().len() != n_cols {
                return Err(Error::RaggedRows {
                    row: i,
                    expected: n_cols,
                    found: r.as_ref().len(),
                });
            }
        }
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::EmptyMatrix);
        }
        let values = DMatrix::from_fn(n_rows, n_cols, |i, j| rows[i].as_ref()[j]);
        Self::from_matrix(values)
    }

    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        check_finite(&values)?;
        Ok(DataMatrix { values })
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.values
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    /// Rows copied into contiguous vectors.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_samples()).map(|i| self.row(i)).collect()
    }

    pub fn select_rows(&self, indices: &[usize]) -> DataMatrix {
        DataMatrix {
            values: self.values.select_rows(indices),
        }
    }
}

/// Encoded data: row `i` is the latent representation of source row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentMatrix {
    values: DMatrix<f64>,
}

impl LatentMatrix {
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::EmptyMatrix);
        }
        check_finite(&values)?;
        Ok(LatentMatrix { values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let data = DataMatrix::from_rows(rows)?;
        Ok(LatentMatrix {
            values: data.values,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn latent_dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    pub fn select_rows(&self, indices: &[usize]) -> LatentMatrix {
        LatentMatrix {
            values: self.values.select_rows(indices),
        }
    }
}

fn check_finite(values: &DMatrix<f64>) -> Result<()> {
    if values.nrows() == 0 || values.ncols() == 0 {
        return Err(Error::EmptyMatrix);
    }
    // Report the first offending entry in row-major order.
    for i in 0..values.nrows() {
        for j in 0..values.ncols() {
            if !values[(i, j)].is_finite() {
                return Err(Error::NonFiniteEntry { row: i, col: j });
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Inlier,
    Outlier,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector(Vec<Label>);

impl LabelVector {
    pub fn new(labels: Vec<Label>) -> Self {
        LabelVector(labels)
    }

    /// `true` marks an outlier.
    pub fn from_flags(flags: &[bool]) -> Self {
        LabelVector(
            flags
                .iter()
                .map(|&f| if f { Label::Outlier } else { Label::Inlier })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_outlier(&self, i: usize) -> bool {
        self.0[i] == Label::Outlier
    }

    pub fn n_outliers(&self) -> usize {
        self.0.iter().filter(|&&l| l == Label::Outlier).count()
    }

    pub fn n_inliers(&self) -> usize {
        self.len() - self.n_outliers()
    }

    pub fn outlier_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_outlier(i)).collect()
    }

    pub fn as_slice(&self) -> &[Label] {
        &self.0
    }

    pub fn select(&self, indices: &[usize]) -> LabelVector {
        LabelVector(indices.iter().map(|&i| self.0[i]).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub data: DataMatrix,
    pub labels: Option<LabelVector>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        data: DataMatrix,
        labels: Option<LabelVector>,
    ) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != data.n_samples() {
                return Err(Error::LabelLengthMismatch {
                    labels: l.len(),
                    rows: data.n_samples(),
                });
            }
        }
        Ok(Dataset {
            name: name.into(),
            data,
            labels,
        })
    }

    pub fn labels(&self) -> Result<&LabelVector> {
        self.labels.as_ref().ok_or(Error::MissingLabels)
    }
}

/// Per-feature centering and scaling record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Population mean and standard deviation per column. Columns whose
    /// spread is zero (relative to their magnitude) keep scale 1.
    pub fn fit(data: &DataMatrix) -> Self {
        let x = data.as_matrix();
        let n = x.nrows() as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut scale = Vec::with_capacity(x.ncols());
        for col in x.column_iter() {
            let mu = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
            let sd = var.sqrt();
            mean.push(mu);
            scale.push(if sd > 1e-12 * (1.0 + mu.abs()) {
                sd
            } else {
                1.0
            });
        }
        Standardizer { mean, scale }
    }

    /// Centering only; every scale is 1.
    pub fn center_only(data: &DataMatrix) -> Self {
        let mut s = Self::fit(data);
        s.scale.iter_mut().for_each(|v| *v = 1.0);
        s
    }

    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_matrix(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let (mu, sd) = (self.mean[j], self.scale[j]);
            col.iter_mut().for_each(|v| *v = (*v - mu) / sd);
        }
        out
    }

    pub fn inverse_matrix(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let (mu, sd) = (self.mean[j], self.scale[j]);
            col.iter_mut().for_each(|v| *v = *v * sd + mu);
        }
        out
    }

    pub fn transform(&self, data: &DataMatrix) -> Result<DataMatrix> {
        if data.n_features() != self.n_features() {
            return Err(Error::ShapeMismatch {
                expected: self.n_features(),
                found: data.n_features(),
            });
        }
        DataMatrix::from_matrix(self.transform_matrix(data.as_matrix()))
    }

    pub fn inverse_transform(&self, data: &DataMatrix) -> Result<DataMatrix> {
        if data.n_features() != self.n_features() {
            return Err(Error::ShapeMismatch {
                expected: self.n_features(),
                found: data.n_features(),
            });
        }
        DataMatrix::from_matrix(self.inverse_matrix(data.as_matrix()))
    }
}

/// Centers every column and scales it to unit population variance.
pub fn standardize(data: &DataMatrix) -> (DataMatrix, Standardizer) {
    let record = Standardizer::fit(data);
    let values = record.transform_matrix(data.as_matrix());
    (DataMatrix { values }, record)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeros_validate() {
        let m = DataMatrix::from_rows(&[vec![0.0; 3], vec![0.0; 3]]).unwrap();
        assert_eq!((m.n_samples(), m.n_features()), (2, 3));
    }

    #[test]
    fn nan_is_rejected_with_position() {
        let err = DataMatrix::from_rows(&[vec![0.0, f64::NAN, 1.0], vec![0.0; 3]]).unwrap_err();
        assert!(matches!(err, Error::NonFiniteEntry { row: 0, col: 1 }));
        let err = DataMatrix::from_rows(&[vec![0.0], vec![f64::INFINITY]]).unwrap_err();
        assert!(matches!(err, Error::NonFiniteEntry { row: 1, col: 0 }));
    }

    #[test]
    fn empty_and_ragged_are_rejected() {
        let rows: Vec<Vec<f64>> = vec![];
        assert!(matches!(
            DataMatrix::from_rows(&rows),
            Err(Error::EmptyMatrix)
        ));
        assert!(matches!(
            DataMatrix::from_rows(&[Vec::<f64>::new()]),
            Err(Error::EmptyMatrix)
        ));
        assert!(matches!(
            DataMatrix::from_rows(&[vec![1.0, 2.0], vec![1.0]]),
            Err(Error::RaggedRows { row: 1, .. })
        ));
    }

    #[test]
    fn constant_column_is_centered_with_unit_scale() {
        let m = DataMatrix::from_rows(&[[1.0], [1.0], [1.0]]).unwrap();
        let (s, rec) = standardize(&m);
        assert_eq!(rec.scale, vec![1.0]);
        assert!(s.as_matrix().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_point_column() {
        let m = DataMatrix::from_rows(&[[0.0], [2.0]]).unwrap();
        let (s, rec) = standardize(&m);
        // mean 1, population std sqrt(((0-1)^2 + (2-1)^2) / 2) = 1
        assert_eq!(rec.mean, vec![1.0]);
        assert_eq!(rec.scale, vec![1.0]);
        assert_eq!(s.row(0), vec![-1.0]);
        assert_eq!(s.row(1), vec![1.0]);
    }

    #[test]
    fn restandardizing_is_idempotent() {
        let m = DataMatrix::from_rows(&[[1.0, 5.0], [2.0, -3.0], [7.0, 0.5], [-4.0, 2.0]]).unwrap();
        let (s1, _) = standardize(&m);
        let (s2, _) = standardize(&s1);
        for (a, b) in s1.as_matrix().iter().zip(s2.as_matrix().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn label_length_is_checked() {
        let m = DataMatrix::from_rows(&[[1.0], [2.0]]).unwrap();
        let labels = LabelVector::from_flags(&[true]);
        assert!(Dataset::new("x", m, Some(labels)).is_err());
    }
}
