//! Distances between a sample and a prototype.
//!
//! Every function takes two equal-length slices. The weighted Minkowski
//! metrics need a per-feature scale vector and Mahalanobis needs a prepared
//! inverse covariance; both travel in a [`MetricContext`].

use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MetricKind {
    L1,
    L2,
    L4,
    WL2,
    WL4,
    BrayCurtis,
    Chebyshev,
    Canberra,
    Correlation,
    Mahalanobis,
}

impl MetricKind {
    pub const ALL: [MetricKind; 10] = [
        MetricKind::L1,
        MetricKind::L2,
        MetricKind::L4,
        MetricKind::WL2,
        MetricKind::WL4,
        MetricKind::BrayCurtis,
        MetricKind::Chebyshev,
        MetricKind::Canberra,
        MetricKind::Correlation,
        MetricKind::Mahalanobis,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::L1 => "l1",
            MetricKind::L2 => "l2",
            MetricKind::L4 => "l4",
            MetricKind::WL2 => "wl2",
            MetricKind::WL4 => "wl4",
            MetricKind::BrayCurtis => "braycurtis",
            MetricKind::Chebyshev => "chebyshev",
            MetricKind::Canberra => "canberra",
            MetricKind::Correlation => "correlation",
            MetricKind::Mahalanobis => "mahalanobis",
        }
    }

    pub fn needs_scale(self) -> bool {
        matches!(self, MetricKind::WL2 | MetricKind::WL4)
    }

    pub fn needs_precision(self) -> bool {
        self == MetricKind::Mahalanobis
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        // "cityblock" is the common alias of L1.
        if lower == "cityblock" || lower == "manhattan" {
            return Ok(MetricKind::L1);
        }
        MetricKind::ALL
            .iter()
            .copied()
            .find(|m| m.name() == lower)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown metric {s:?}")))
    }
}

fn check_len(u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch(u.len(), v.len()));
    }
    Ok(())
}

fn pnorm<I: Iterator<Item = f64>>(abs_diffs: I, p: u32) -> f64 {
    match p {
        1 => abs_diffs.sum(),
        2 => abs_diffs.map(|d| d * d).sum::<f64>().sqrt(),
        4 => abs_diffs
            .map(|d| (d * d) * (d * d))
            .sum::<f64>()
            .sqrt()
            .sqrt(),
        _ => abs_diffs
            .map(|d| d.powi(p as i32))
            .sum::<f64>()
            .powf(1.0 / p as f64),
    }
}

/// `||u - v||_p` for integer `p >= 1`.
pub fn minkowski(u: &[f64], v: &[f64], p: u32) -> Result<f64> {
    check_len(u, v)?;
    if p == 0 {
        return Err(Error::InvalidArgument(
            "Minkowski order must be >= 1".into(),
        ));
    }
    Ok(pnorm(u.iter().zip(v).map(|(a, b)| (a - b).abs()), p))
}

/// `||(u - v) / sigma||_p` with the division taken elementwise.
pub fn weighted_minkowski(u: &[f64], v: &[f64], p: u32, sigma: &[f64]) -> Result<f64> {
    check_len(u, v)?;
    check_len(u, sigma)?;
    if p == 0 {
        return Err(Error::InvalidArgument(
            "Minkowski order must be >= 1".into(),
        ));
    }
    if let Some(index) = sigma.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::NonPositiveScale { index });
    }
    Ok(pnorm(
        u.iter()
            .zip(v)
            .zip(sigma)
            .map(|((a, b), s)| ((a - b) / s).abs()),
        p,
    ))
}

/// `sum |u_i - v_i| / sum |u_i + v_i|`; zero when both sums vanish.
pub fn bray_curtis(u: &[f64], v: &[f64]) -> Result<f64> {
    check_len(u, v)?;
    let (num, den) = u.iter().zip(v).fold((0.0, 0.0), |(n, d), (a, b)| {
        (n + (a - b).abs(), d + (a + b).abs())
    });
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok(num / den)
}

pub fn chebyshev(u: &[f64], v: &[f64]) -> Result<f64> {
    check_len(u, v)?;
    Ok(u.iter()
        .zip(v)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Sum of `|u_i - v_i| / (|u_i| + |v_i|)`; coordinates where both are zero contribute 0.
pub fn canberra(u: &[f64], v: &[f64]) -> Result<f64> {
    check_len(u, v)?;
    Ok(u.iter()
        .zip(v)
        .map(|(a, b)| {
            let den = a.abs() + b.abs();
            if den == 0.0 {
                0.0
            } else {
                (a - b).abs() / den
            }
        })
        .sum())
}

/// Centered copy of `u` and its squared norm.
fn centered(u: &[f64]) -> Result<(Vec<f64>, f64)> {
    let mean = u.iter().sum::<f64>() / u.len() as f64;
    let c: Vec<f64> = u.iter().map(|x| x - mean).collect();
    let sq = c.iter().map(|x| x * x).sum::<f64>();
    let raw = u.iter().map(|x| x * x).sum::<f64>();
    if sq <= 1e-26 * raw || sq == 0.0 {
        return Err(Error::ZeroVarianceVector);
    }
    Ok((c, sq))
}

/// One minus the Pearson correlation of `u` and `v`, in `[0, 2]`.
pub fn correlation_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    check_len(u, v)?;
    let (cu, su) = centered(u)?;
    let (cv, sv) = centered(v)?;
    let dot: f64 = cu.iter().zip(&cv).map(|(a, b)| a * b).sum();
    // sqrt(s * s) == s exactly, so identical inputs give exactly 0
    Ok((1.0 - dot / (su * sv).sqrt()).clamp(0.0, 2.0))
}

/// `sqrt((u - v) C^-1 (u - v)^T)` for an explicit inverse covariance.
pub fn mahalanobis(u: &[f64], v: &[f64], inv_covariance: &DMatrix<f64>) -> Result<f64> {
    check_len(u, v)?;
    if inv_covariance.nrows() != u.len() || inv_covariance.ncols() != u.len() {
        return Err(Error::ShapeMismatch {
            expected: u.len(),
            found: inv_covariance.nrows(),
        });
    }
    let d: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - b).collect();
    Ok(dense_quadratic_form(inv_covariance, &d)?.sqrt())
}

fn dense_quadratic_form(m: &DMatrix<f64>, d: &[f64]) -> Result<f64> {
    let p = d.len();
    let mut q = 0.0;
    let mut magnitude = 0.0;
    for j in 0..p {
        let col = m.column(j);
        let mut acc = 0.0;
        let mut acc_abs = 0.0;
        for i in 0..p {
            acc += d[i] * col[i];
            acc_abs += (d[i] * col[i]).abs();
        }
        q += acc * d[j];
        magnitude += acc_abs * d[j].abs();
    }
    settle_quadratic(q, magnitude)
}

// Rounding can push a PSD form slightly below zero; anything beyond the
// rounding envelope means the matrix was not PSD.
fn settle_quadratic(q: f64, magnitude: f64) -> Result<f64> {
    if q >= 0.0 {
        Ok(q)
    } else if q >= -1e-9 * magnitude.max(f64::MIN_POSITIVE) {
        Ok(0.0)
    } else {
        Err(Error::NegativeQuadraticForm(q))
    }
}

/// A prepared inverse covariance.
///
/// `Dense` holds `C^-1` outright. `LowRank` represents `C = U U^T + ridge I`
/// and evaluates quadratic forms through the Woodbury identity, which keeps
/// memory at `p × r` when the feature count `p` exceeds the rank `r`.
#[derive(Debug, Clone)]
pub enum Precision {
    Dense(DMatrix<f64>),
    LowRank {
        factor: DMatrix<f64>,
        ridge: f64,
        inner: Cholesky<f64, Dyn>,
    },
}

impl Precision {
    /// Inverts a symmetric positive definite covariance.
    pub fn from_covariance(cov: &DMatrix<f64>) -> Result<Self> {
        let sym = (cov + cov.transpose()) * 0.5;
        let chol = Cholesky::new(sym)
            .ok_or_else(|| Error::InvalidArgument("covariance is not positive definite".into()))?;
        let inv = chol.inverse();
        Ok(Precision::Dense((&inv + inv.transpose()) * 0.5))
    }

    pub fn from_inverse(inv_covariance: DMatrix<f64>) -> Self {
        Precision::Dense(inv_covariance)
    }

    /// `C = factor · factorᵀ + ridge · I` with `ridge > 0`.
    pub fn from_low_rank(factor: DMatrix<f64>, ridge: f64) -> Result<Self> {
        if !(ridge > 0.0) {
            return Err(Error::InvalidArgument("ridge must be positive".into()));
        }
        let r = factor.ncols();
        let inner = factor.transpose() * &factor + DMatrix::identity(r, r) * ridge;
        let inner = Cholesky::new(inner).ok_or_else(|| {
            Error::InvalidArgument("Woodbury core is not positive definite".into())
        })?;
        Ok(Precision::LowRank {
            factor,
            ridge,
            inner,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Precision::Dense(m) => m.nrows(),
            Precision::LowRank { factor, .. } => factor.nrows(),
        }
    }

    /// Materializes `C^-1`. Only sensible for small `p`.
    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Precision::Dense(m) => m.clone(),
            Precision::LowRank {
                factor,
                ridge,
                inner,
            } => {
                let p = factor.nrows();
                let correction = factor * inner.solve(&factor.transpose());
                (DMatrix::identity(p, p) - correction) / *ridge
            }
        }
    }

    pub fn quadratic_form(&self, d: &[f64]) -> Result<f64> {
        if d.len() != self.dim() {
            return Err(Error::LengthMismatch(d.len(), self.dim()));
        }
        match self {
            Precision::Dense(m) => dense_quadratic_form(m, d),
            Precision::LowRank { .. } => {
                let diffs = DMatrix::from_column_slice(d.len(), 1, d);
                Ok(self.quadratic_forms(&diffs)?[0])
            }
        }
    }

    /// Quadratic forms of every column of `diffs` (a `p × n` matrix).
    pub fn quadratic_forms(&self, diffs: &DMatrix<f64>) -> Result<Vec<f64>> {
        if diffs.nrows() != self.dim() {
            return Err(Error::LengthMismatch(diffs.nrows(), self.dim()));
        }
        match self {
            Precision::Dense(m) => {
                let md = m * diffs;
                (0..diffs.ncols())
                    .map(|j| {
                        let col: Vec<f64> = diffs.column(j).iter().copied().collect();
                        let q = diffs.column(j).dot(&md.column(j));
                        if q >= 0.0 {
                            Ok(q)
                        } else {
                            dense_quadratic_form(m, &col)
                        }
                    })
                    .collect()
            }
            Precision::LowRank {
                factor,
                ridge,
                inner,
            } => {
                let y = factor.transpose() * diffs;
                let solved = inner.solve(&y);
                (0..diffs.ncols())
                    .map(|j| {
                        let dd = diffs.column(j).norm_squared();
                        let corr = y.column(j).dot(&solved.column(j));
                        settle_quadratic((dd - corr) / ridge, dd / ridge)
                    })
                    .collect()
            }
        }
    }
}

/// Side information for the weighted and covariance-based metrics.
#[derive(Debug, Clone, Default)]
pub struct MetricContext {
    pub sigma: Option<Vec<f64>>,
    pub precision: Option<Precision>,
}

impl MetricContext {
    pub fn with_sigma(sigma: Vec<f64>) -> Self {
        MetricContext {
            sigma: Some(sigma),
            precision: None,
        }
    }

    pub fn with_precision(precision: Precision) -> Self {
        MetricContext {
            sigma: None,
            precision: Some(precision),
        }
    }
}

/// Dispatches on `kind`.
pub fn distance(kind: MetricKind, u: &[f64], v: &[f64], ctx: &MetricContext) -> Result<f64> {
    match kind {
        MetricKind::L1 => minkowski(u, v, 1),
        MetricKind::L2 => minkowski(u, v, 2),
        MetricKind::L4 => minkowski(u, v, 4),
        MetricKind::WL2 | MetricKind::WL4 => {
            let sigma = ctx
                .sigma
                .as_deref()
                .ok_or(Error::MissingContext("weighted Minkowski"))?;
            weighted_minkowski(u, v, if kind == MetricKind::WL2 { 2 } else { 4 }, sigma)
        }
        MetricKind::BrayCurtis => bray_curtis(u, v),
        MetricKind::Chebyshev => chebyshev(u, v),
        MetricKind::Canberra => canberra(u, v),
        MetricKind::Correlation => correlation_distance(u, v),
        MetricKind::Mahalanobis => {
            check_len(u, v)?;
            let precision = ctx
                .precision
                .as_ref()
                .ok_or(Error::MissingContext("mahalanobis"))?;
            let d: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - b).collect();
            Ok(precision.quadratic_form(&d)?.sqrt())
        }
    }
}

/// Population standard deviation of each column, floored at `1e-8`.
pub fn feature_scales(x: &DMatrix<f64>) -> Vec<f64> {
    let n = x.nrows() as f64;
    x.column_iter()
        .map(|c| {
            let mu = c.sum() / n;
            let var = c.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
            var.sqrt().max(1e-8)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-5.0..5.0)).collect()
    }

    #[test]
    fn worked_examples() {
        assert_eq!(minkowski(&[1.0, 2.0], &[0.0, 0.0], 1).unwrap(), 3.0);
        assert_eq!(minkowski(&[3.0, 4.0], &[0.0, 0.0], 2).unwrap(), 5.0);
        assert_eq!(
            weighted_minkowski(&[2.0, 0.0], &[0.0, 0.0], 2, &[2.0, 1.0]).unwrap(),
            1.0
        );
        assert_eq!(bray_curtis(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(bray_curtis(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(chebyshev(&[1.0, 5.0], &[2.0, 2.0]).unwrap(), 3.0);
        assert_eq!(canberra(&[1.0, 0.0, 2.0], &[0.0, 0.0, 2.0]).unwrap(), 1.0);
        assert!(
            (correlation_distance(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() - 2.0).abs() < 1e-12
        );
        let inv = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]));
        assert_eq!(mahalanobis(&[1.0, 0.0], &[0.0, 0.0], &inv).unwrap(), 2.0);
    }

    #[test]
    fn canberra_opposite_signs_contribute_one_each() {
        let u = [1.5, -2.0, 7.0];
        let v = [-1.5, 2.0, -7.0];
        assert!((canberra(&u, &v).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn unit_scales_reduce_to_minkowski() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let u = random_vec(&mut rng, 7);
            let v = random_vec(&mut rng, 7);
            for p in [2, 4] {
                let a = weighted_minkowski(&u, &v, p, &[1.0; 7]).unwrap();
                let b = minkowski(&u, &v, p).unwrap();
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn l4_is_the_true_four_norm() {
        let d = minkowski(&[2.0, 0.0], &[0.0, 0.0], 4).unwrap();
        assert!((d - 2.0).abs() < 1e-15);
        let d = minkowski(&[1.0, 1.0], &[0.0, 0.0], 4).unwrap();
        assert!((d - 2f64.powf(0.25)).abs() < 1e-15);
    }

    #[test]
    fn affine_correlation_is_zero() {
        let u = [0.3, -1.2, 4.0, 2.2];
        let v: Vec<f64> = u.iter().map(|x| 2.0 * x + 3.0).collect();
        assert!(correlation_distance(&u, &v).unwrap().abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            minkowski(&[1.0], &[1.0, 2.0], 2),
            Err(Error::LengthMismatch(1, 2))
        ));
        assert!(matches!(
            weighted_minkowski(&[1.0, 2.0], &[1.0, 2.0], 2, &[1.0, 0.0]),
            Err(Error::NonPositiveScale { index: 1 })
        ));
        assert!(matches!(
            correlation_distance(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(Error::ZeroVarianceVector)
        ));
        let bad = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1.0]));
        assert!(matches!(
            mahalanobis(&[1.0, 0.0], &[0.0, 0.0], &bad),
            Err(Error::NegativeQuadraticForm(_))
        ));
        assert!(matches!(
            distance(MetricKind::WL2, &[1.0], &[2.0], &MetricContext::default()),
            Err(Error::MissingContext(_))
        ));
    }

    #[test]
    fn names_round_trip() {
        for m in MetricKind::ALL {
            assert_eq!(m.name().parse::<MetricKind>().unwrap(), m);
        }
        assert_eq!("cityblock".parse::<MetricKind>().unwrap(), MetricKind::L1);
        assert!("l3".parse::<MetricKind>().is_err());
    }

    #[test]
    fn woodbury_matches_dense_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (p, r) = (6, 3);
        let u = DMatrix::from_fn(p, r, |_, _| rng.random_range(-1.0..1.0));
        let ridge = 0.3;
        let cov = &u * u.transpose() + DMatrix::identity(p, p) * ridge;
        let dense = Precision::from_covariance(&cov).unwrap();
        let low = Precision::from_low_rank(u, ridge).unwrap();
        assert!((dense.to_dense() - low.to_dense()).abs().max() < 1e-10);
        for _ in 0..20 {
            let d = random_vec(&mut rng, p);
            let a = dense.quadratic_form(&d).unwrap();
            let b = low.quadratic_form(&d).unwrap();
            assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
        }
    }
}
