//! Dimensionality-reduction techniques.
//!
//! Every technique is fitted once and then frozen into a [`DrtModel`] that
//! can encode feature rows into the latent space and decode latent rows back
//! into feature space. PCA and ICA reduce to a pair of linear maps on
//! standardized features; NMF works on min-shifted nonnegative data; AE and
//! VAE are small fully connected networks.

mod autoencoder;
mod ica;
mod nmf;
mod pca;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, LatentMatrix, Standardizer};
use crate::error::{Error, Result};

pub use autoencoder::{ae_gradient, AeConfig, Gradients, Network, NetworkKind};
pub use ica::IcaConfig;
pub use nmf::{nnls, NmfConfig};

/// Tag written at the top of serialized models.
pub const MODEL_FORMAT: &str = "drama-drt-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DrtKind {
    Pca,
    Ica,
    Nmf,
    Ae,
    Vae,
}

impl DrtKind {
    pub const ALL: [DrtKind; 5] = [
        DrtKind::Pca,
        DrtKind::Ica,
        DrtKind::Nmf,
        DrtKind::Ae,
        DrtKind::Vae,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DrtKind::Pca => "pca",
            DrtKind::Ica => "ica",
            DrtKind::Nmf => "nmf",
            DrtKind::Ae => "ae",
            DrtKind::Vae => "vae",
        }
    }
}

impl fmt::Display for DrtKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DrtKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        DrtKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == lower)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown reduction technique {s:?}")))
    }
}

/// Per-technique knobs. The defaults are what every pipeline run uses unless
/// told otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrtSettings {
    /// Standardize features before PCA/ICA/AE/VAE. When off, features are
    /// only centered. NMF ignores this and uses a min-shift.
    pub standardize: bool,
    pub ae: AeConfig,
    pub ica: IcaConfig,
    pub nmf: NmfConfig,
}

impl Default for DrtSettings {
    fn default() -> Self {
        DrtSettings {
            standardize: true,
            ae: AeConfig::default(),
            ica: IcaConfig::default(),
            nmf: NmfConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Preprocess {
    Affine(Standardizer),
    /// Added to every entry before NMF; subtracted after decoding.
    Shift(f64),
}

impl Preprocess {
    fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Preprocess::Affine(s) => s.transform_matrix(x),
            Preprocess::Shift(c) => x.add_scalar(*c),
        }
    }

    fn backward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Preprocess::Affine(s) => s.inverse_matrix(x),
            Preprocess::Shift(c) => x.add_scalar(-*c),
        }
    }
}

/// `encoder` is `p × m`, `decoder` is `m × p`; both act on preprocessed rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearMap {
    pub encoder: DMatrix<f64>,
    pub decoder: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DrtParams {
    Linear(LinearMap),
    /// NMF components, `m × p`, all entries nonnegative.
    Nmf {
        components: DMatrix<f64>,
    },
    Network(Network),
}

/// A fitted, frozen reduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrtModel {
    pub kind: DrtKind,
    pub latent_dim: usize,
    pub n_features: usize,
    pub preprocess: Preprocess,
    pub params: DrtParams,
    /// Per-iteration objective (NMF) or per-epoch loss (AE/VAE); empty otherwise.
    pub loss_trace: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct StoredModel {
    format: String,
    model: DrtModel,
}

/// Fits `kind` with default settings.
pub fn fit(kind: DrtKind, data: &DataMatrix, latent_dim: usize, seed: u64) -> Result<DrtModel> {
    fit_with(kind, data, latent_dim, seed, &DrtSettings::default())
}

pub fn fit_with(
    kind: DrtKind,
    data: &DataMatrix,
    latent_dim: usize,
    seed: u64,
    settings: &DrtSettings,
) -> Result<DrtModel> {
    let (n, p) = (data.n_samples(), data.n_features());
    if n < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            found: n,
        });
    }
    let max = match kind {
        DrtKind::Pca | DrtKind::Ica => p.min(n),
        _ => p,
    };
    if latent_dim == 0 || latent_dim > max {
        return Err(Error::LatentDimTooLarge { latent_dim, max });
    }

    if kind == DrtKind::Nmf {
        let min = data.as_matrix().min();
        let shift = if min < 0.0 { -min } else { 0.0 };
        let preprocess = Preprocess::Shift(shift);
        let x = preprocess.forward(data.as_matrix());
        let (components, trace) = nmf::fit(&x, latent_dim, seed, &settings.nmf)?;
        return Ok(DrtModel {
            kind,
            latent_dim,
            n_features: p,
            preprocess,
            params: DrtParams::Nmf { components },
            loss_trace: trace,
        });
    }

    let record = if settings.standardize {
        Standardizer::fit(data)
    } else {
        Standardizer::center_only(data)
    };
    let x = record.transform_matrix(data.as_matrix());
    let preprocess = Preprocess::Affine(record);
    let (params, loss_trace) = match kind {
        DrtKind::Pca => (DrtParams::Linear(pca::fit(&x, latent_dim)), Vec::new()),
        DrtKind::Ica => (
            DrtParams::Linear(ica::fit(&x, latent_dim, seed, &settings.ica)),
            Vec::new(),
        ),
        DrtKind::Ae | DrtKind::Vae => {
            let net_kind = if kind == DrtKind::Ae {
                NetworkKind::Autoencoder
            } else {
                NetworkKind::Variational
            };
            let (net, trace) = autoencoder::train(&x, net_kind, latent_dim, seed, &settings.ae)?;
            (DrtParams::Network(net), trace)
        }
        DrtKind::Nmf => unreachable!(),
    };
    Ok(DrtModel {
        kind,
        latent_dim,
        n_features: p,
        preprocess,
        params,
        loss_trace,
    })
}

impl DrtModel {
    pub fn encode(&self, data: &DataMatrix) -> Result<LatentMatrix> {
        if data.n_features() != self.n_features {
            return Err(Error::ShapeMismatch {
                expected: self.n_features,
                found: data.n_features(),
            });
        }
        let x = self.preprocess.forward(data.as_matrix());
        let z = match &self.params {
            DrtParams::Linear(map) => &x * &map.encoder,
            DrtParams::Nmf { components } => nmf::encode(&x, components),
            DrtParams::Network(net) => net.encode(&x),
        };
        LatentMatrix::from_matrix(z)
    }

    pub fn decode(&self, latent: &LatentMatrix) -> Result<DataMatrix> {
        if latent.latent_dim() != self.latent_dim {
            return Err(Error::ShapeMismatch {
                expected: self.latent_dim,
                found: latent.latent_dim(),
            });
        }
        let z = latent.as_matrix();
        let x = match &self.params {
            DrtParams::Linear(map) => z * &map.decoder,
            DrtParams::Nmf { components } => z * components,
            DrtParams::Network(net) => net.decode(z),
        };
        DataMatrix::from_matrix(self.preprocess.backward(&x))
    }

    /// Mean over rows of the squared reconstruction error in feature space.
    pub fn reconstruction_error(&self, data: &DataMatrix) -> Result<f64> {
        let rec = self.decode(&self.encode(data)?)?;
        let diff = rec.as_matrix() - data.as_matrix();
        Ok(diff.norm_squared() / data.n_samples() as f64)
    }

    pub fn to_json(&self) -> Result<String> {
        let stored = StoredModel {
            format: MODEL_FORMAT.to_string(),
            model: self.clone(),
        };
        Ok(serde_json::to_string(&stored)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let stored: StoredModel = serde_json::from_str(text)?;
        if stored.format != MODEL_FORMAT {
            return Err(Error::InvalidArgument(format!(
                "unsupported model format {:?}",
                stored.format
            )));
        }
        Ok(stored.model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
