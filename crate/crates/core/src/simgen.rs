//! Synthetic time-series challenges.
//!
//! Ten base shapes on `[0, 1]` are sampled on an `n_f`-point grid, stretched
//! in time and amplitude, and corrupted with Gaussian noise. Challenge I
//! plants a small Gaussian bump on some curves of one shape; Challenge II
//! uses nine shapes as inliers and the tenth as anomalies.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, Dataset, LabelVector};
use crate::error::{Error, Result};

pub const N_SHAPES: usize = 10;

/// Base shape `k` at time `t ∈ [0, 1]`.
pub fn base_shape(k: usize, t: f64) -> f64 {
    use std::f64::consts::PI;
    match k {
        0 => 0.0,
        1 => t,
        2 => (2.0 * PI * t).sin(),
        3 => (6.0 * PI * t).sin(),
        4 => (-(t - 0.5).powi(2) / (2.0 * 0.15 * 0.15)).exp(),
        5 => {
            if t >= 0.5 {
                1.0
            } else {
                0.0
            }
        }
        6 => (3.0 * t).fract(),
        7 => (-3.0 * t).exp() * (8.0 * PI * t).sin(),
        8 => 4.0 * (t - 0.5).powi(2),
        9 => 1.0 / (1.0 + (-12.0 * (t - 0.5)).exp()),
        _ => panic!("shape index {k} out of range"),
    }
}

fn grid_point(i: usize, n_f: usize) -> f64 {
    if n_f == 1 {
        0.0
    } else {
        i as f64 / (n_f - 1) as f64
    }
}

/// Shape `k` on the grid, stretched by `x_scale` about `t = 0.5` (clamped to
/// the interval) and multiplied by `y_scale`. No noise.
pub fn sample_base(k: usize, n_f: usize, x_scale: f64, y_scale: f64) -> Result<Vec<f64>> {
    if k >= N_SHAPES {
        return Err(Error::InvalidArgument(format!(
            "shape index {k} out of range"
        )));
    }
    if !(x_scale > 0.0) {
        return Err(Error::NonPositiveScale { index: 0 });
    }
    if !(y_scale > 0.0) {
        return Err(Error::NonPositiveScale { index: 1 });
    }
    Ok((0..n_f)
        .map(|i| {
            let t = (0.5 + (grid_point(i, n_f) - 0.5) / x_scale).clamp(0.0, 1.0);
            base_shape(k, t) * y_scale
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Challenge {
    C1a,
    C1b,
    C2a,
    C2b,
}

impl Challenge {
    pub const ALL: [Challenge; 4] = [
        Challenge::C1a,
        Challenge::C1b,
        Challenge::C2a,
        Challenge::C2b,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Challenge::C1a => "c1a",
            Challenge::C1b => "c1b",
            Challenge::C2a => "c2a",
            Challenge::C2b => "c2b",
        }
    }

    pub fn n_features(self) -> usize {
        match self {
            Challenge::C1a | Challenge::C2a => 100,
            Challenge::C1b | Challenge::C2b => 3000,
        }
    }

    pub fn is_bump_challenge(self) -> bool {
        matches!(self, Challenge::C1a | Challenge::C1b)
    }
}

impl fmt::Display for Challenge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Challenge {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase().replace(['-', '_'], "");
        Challenge::ALL
            .iter()
            .copied()
            .find(|c| c.name() == lower)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown challenge {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scale {
    Desk,
    Paper,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            _ => Err(Error::InvalidArgument(format!("unknown scale {s:?}"))),
        }
    }
}

pub const BUMP_AMPLITUDE: (f64, f64) = (0.3, 0.4);
pub const BUMP_WIDTH: (f64, f64) = (0.08, 0.1);
pub const SCALE_RANGE: (f64, f64) = (0.8, 1.2);

/// Full parameter set of one generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChallengeSpec {
    pub challenge: Challenge,
    pub n_features: usize,
    /// Challenge I: the shape carrying every curve. Challenge II: the
    /// anomaly class.
    pub shape: usize,
    pub inliers_per_shape: usize,
    pub anomalies: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl ChallengeSpec {
    /// Full-scale counts (`Scale::Paper`): Challenge I 1000 + 50 per shape, Challenge II
    /// 500 per inlier shape + 50. Desk scale: C-Ia 200 + 20, C-Ib 100 + 10,
    /// Challenge II 100 per shape + 10.
    pub fn new(challenge: Challenge, shape: usize, seed: u64, scale: Scale) -> Self {
        let (inliers_per_shape, anomalies) = match (scale, challenge) {
            (Scale::Paper, Challenge::C1a | Challenge::C1b) => (1000, 50),
            (Scale::Paper, _) => (500, 50),
            (Scale::Desk, Challenge::C1a) => (200, 20),
            (Scale::Desk, Challenge::C1b) => (100, 10),
            (Scale::Desk, _) => (100, 10),
        };
        let noise_sigma = if challenge.is_bump_challenge() {
            0.3
        } else {
            0.8
        };
        ChallengeSpec {
            challenge,
            n_features: challenge.n_features(),
            shape,
            inliers_per_shape,
            anomalies,
            noise_sigma,
            seed,
        }
    }

    pub fn with_counts(mut self, inliers_per_shape: usize, anomalies: usize) -> Self {
        self.inliers_per_shape = inliers_per_shape;
        self.anomalies = anomalies;
        self
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn with_features(mut self, n_features: usize) -> Self {
        self.n_features = n_features;
        self
    }

    pub fn n_inliers(&self) -> usize {
        if self.challenge.is_bump_challenge() {
            self.inliers_per_shape
        } else {
            self.inliers_per_shape * (N_SHAPES - 1)
        }
    }

    pub fn n_samples(&self) -> usize {
        self.n_inliers() + self.anomalies
    }

    pub fn dataset_name(&self) -> String {
        format!("{}_k{}_seed{}", self.challenge, self.shape, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowMeta {
    pub shape: usize,
    pub x_scale: f64,
    pub y_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpMeta {
    pub row: usize,
    pub amplitude: f64,
    pub width: f64,
    pub center: f64,
}

/// Everything needed to reconstruct the noiseless curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub spec: ChallengeSpec,
    pub rows: Vec<RowMeta>,
    pub bumps: Vec<BumpMeta>,
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub dataset: Dataset,
    pub metadata: Metadata,
}

/// Builds the dataset: inliers first (shape-major for Challenge II), then
/// anomalies. Scales and bumps come from one random stream and noise from a
/// second, so changing the noise level leaves every curve parameter intact.
pub fn generate(spec: &ChallengeSpec) -> Result<Generated> {
    if spec.shape >= N_SHAPES {
        return Err(Error::InvalidArgument(format!(
            "shape index {} out of range",
            spec.shape
        )));
    }
    if spec.n_features == 0 {
        return Err(Error::EmptyMatrix);
    }
    if !(spec.noise_sigma >= 0.0) {
        return Err(Error::InvalidArgument(
            "noise sigma must be nonnegative".into(),
        ));
    }
    let mut params = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    noise_rng.set_stream(1);
    let noise =
        Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;

    let mut shapes: Vec<usize> = if spec.challenge.is_bump_challenge() {
        vec![spec.shape; spec.inliers_per_shape]
    } else {
        (0..N_SHAPES)
            .filter(|&k| k != spec.shape)
            .flat_map(|k| std::iter::repeat_n(k, spec.inliers_per_shape))
            .collect()
    };
    let n_inliers = shapes.len();
    shapes.extend(std::iter::repeat_n(spec.shape, spec.anomalies));

    let n_f = spec.n_features;
    let mut rows = Vec::with_capacity(shapes.len());
    let mut row_meta = Vec::with_capacity(shapes.len());
    let mut bumps = Vec::new();
    for (i, &k) in shapes.iter().enumerate() {
        let x_scale = params.random_range(SCALE_RANGE.0..SCALE_RANGE.1);
        let y_scale = params.random_range(SCALE_RANGE.0..SCALE_RANGE.1);
        let mut row = sample_base(k, n_f, x_scale, y_scale)?;
        if i >= n_inliers && spec.challenge.is_bump_challenge() {
            let amplitude = params.random_range(BUMP_AMPLITUDE.0..BUMP_AMPLITUDE.1);
            let width = params.random_range(BUMP_WIDTH.0..BUMP_WIDTH.1);
            let center = params.random_range(0.0..1.0);
            for (j, v) in row.iter_mut().enumerate() {
                *v += bump(grid_point(j, n_f), amplitude, width, center);
            }
            bumps.push(BumpMeta {
                row: i,
                amplitude,
                width,
                center,
            });
        }
        if spec.noise_sigma > 0.0 {
            for v in row.iter_mut() {
                *v += noise.sample(&mut noise_rng);
            }
        }
        rows.push(row);
        row_meta.push(RowMeta {
            shape: k,
            x_scale,
            y_scale,
        });
    }

    let flags: Vec<bool> = (0..shapes.len()).map(|i| i >= n_inliers).collect();
    let dataset = Dataset::new(
        spec.dataset_name(),
        DataMatrix::from_rows(&rows)?,
        Some(LabelVector::from_flags(&flags)),
    )?;
    Ok(Generated {
        dataset,
        metadata: Metadata {
            spec: spec.clone(),
            rows: row_meta,
            bumps,
        },
    })
}

/// `a · exp(−(t − t₀)² / (2w²))`.
pub fn bump(t: f64, amplitude: f64, width: f64, center: f64) -> f64 {
    amplitude * (-(t - center).powi(2) / (2.0 * width * width)).exp()
}

pub fn generate_c1(n_features: usize, shape: usize, seed: u64) -> Result<Dataset> {
    let challenge = if n_features == 100 {
        Challenge::C1a
    } else {
        Challenge::C1b
    };
    let spec = ChallengeSpec::new(challenge, shape, seed, Scale::Paper).with_features(n_features);
    Ok(generate(&spec)?.dataset)
}

pub fn generate_c2(n_features: usize, anomaly_class: usize, seed: u64) -> Result<Dataset> {
    let challenge = if n_features == 100 {
        Challenge::C2a
    } else {
        Challenge::C2b
    };
    let spec =
        ChallengeSpec::new(challenge, anomaly_class, seed, Scale::Paper).with_features(n_features);
    Ok(generate(&spec)?.dataset)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_sampling_examples() {
        assert!(sample_base(0, 50, 1.1, 0.9)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        let plain = sample_base(2, 11, 1.0, 1.0).unwrap();
        for (i, v) in plain.iter().enumerate() {
            assert!((v - (2.0 * std::f64::consts::PI * i as f64 / 10.0).sin()).abs() < 1e-14);
        }
        let double = sample_base(2, 11, 1.0, 2.0).unwrap();
        for (a, b) in plain.iter().zip(&double) {
            assert_eq!(2.0 * a, *b);
        }
        assert!(sample_base(10, 5, 1.0, 1.0).is_err());
        assert!(sample_base(1, 5, 0.0, 1.0).is_err());
    }

    #[test]
    fn shapes_are_bounded_and_distinct() {
        let curves: Vec<Vec<f64>> = (0..N_SHAPES)
            .map(|k| sample_base(k, 200, 1.0, 1.0).unwrap())
            .collect();
        for c in &curves {
            assert!(c.iter().all(|v| v.abs() <= 1.0 + 1e-12));
        }
        for a in 0..N_SHAPES {
            for b in (a + 1)..N_SHAPES {
                let d: f64 = curves[a]
                    .iter()
                    .zip(&curves[b])
                    .map(|(x, y)| (x - y).abs())
                    .sum();
                assert!(d > 1.0, "shapes {a} and {b} nearly coincide");
            }
        }
    }

    #[test]
    fn stretching_clamps_to_endpoints() {
        let v = sample_base(1, 101, 0.5, 1.0).unwrap();
        assert_eq!(v[0], 0.0);
        assert_eq!(v[10], 0.0);
        assert_eq!(v[100], 1.0);
        assert!((v[50] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn full_scale_counts() {
        let c1 = ChallengeSpec::new(Challenge::C1a, 3, 0, Scale::Paper);
        assert_eq!((c1.n_inliers(), c1.anomalies), (1000, 50));
        let c2 = ChallengeSpec::new(Challenge::C2b, 3, 0, Scale::Paper);
        assert_eq!(
            (c2.n_samples(), c2.anomalies, c2.n_features),
            (4550, 50, 3000)
        );
        assert_eq!(c2.noise_sigma, 0.8);
        assert_eq!(c1.noise_sigma, 0.3);
    }

    #[test]
    fn noiseless_anomaly_is_base_plus_logged_bump() {
        let spec = ChallengeSpec::new(Challenge::C1a, 4, 9, Scale::Desk).with_noise(0.0);
        let g = generate(&spec).unwrap();
        let labels = g.dataset.labels.as_ref().unwrap();
        assert_eq!(labels.n_outliers(), 20);
        for b in &g.metadata.bumps {
            let meta = &g.metadata.rows[b.row];
            let base = sample_base(meta.shape, 100, meta.x_scale, meta.y_scale).unwrap();
            let row = g.dataset.data.row(b.row);
            let diff: Vec<f64> = row.iter().zip(&base).map(|(a, c)| a - c).collect();
            let peak = diff.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(peak <= b.amplitude + 1e-12 && peak >= 0.3 - 1e-12);
            for (j, d) in diff.iter().enumerate() {
                let expected = b.amplitude
                    * (-(j as f64 / 99.0 - b.center).powi(2) / (2.0 * b.width * b.width)).exp();
                assert!((d - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn noise_switch_keeps_curve_parameters() {
        let spec = ChallengeSpec::new(Challenge::C2a, 1, 3, Scale::Desk);
        let noisy = generate(&spec).unwrap();
        let clean = generate(&spec.clone().with_noise(0.0)).unwrap();
        assert_eq!(noisy.metadata.rows, clean.metadata.rows);
        let residual = noisy.dataset.data.as_matrix() - clean.dataset.data.as_matrix();
        let n = residual.len() as f64;
        let se = 0.8 / n.sqrt();
        assert!(residual.mean().abs() < 4.0 * se);
    }

    #[test]
    fn challenge_two_layout() {
        let spec = ChallengeSpec::new(Challenge::C2a, 7, 1, Scale::Desk);
        let g = generate(&spec).unwrap();
        assert_eq!(g.dataset.data.n_samples(), 910);
        let labels = g.dataset.labels.as_ref().unwrap();
        assert_eq!(labels.n_outliers(), 10);
        assert!(g.metadata.rows[..900].iter().all(|r| r.shape != 7));
        assert!(g.metadata.rows[900..].iter().all(|r| r.shape == 7));
        assert!(g.metadata.bumps.is_empty());
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = ChallengeSpec::new(Challenge::C1a, 2, 5, Scale::Desk);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.dataset.data, b.dataset.data);
        assert_eq!(a.metadata, b.metadata);
    }

    #[test]
    fn names_round_trip() {
        for c in Challenge::ALL {
            assert_eq!(c.name().parse::<Challenge>().unwrap(), c);
        }
        assert_eq!(
            "C-IIb"
                .to_ascii_lowercase()
                .replace("ii", "2")
                .parse::<Challenge>()
                .unwrap(),
            Challenge::C2b
        );
    }
}
