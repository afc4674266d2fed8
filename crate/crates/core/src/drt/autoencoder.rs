//! Fully connected autoencoder and variational autoencoder.
//!
//! Layer widths are `(n_f, n_f/2, m, n_f/2, n_f)`. The two `n_f/2` layers use
//! ReLU, the bottleneck and output layers are linear. The reconstruction loss
//! is the mean squared error over all entries of the batch; the VAE adds `kl_weight` times the batch-averaged KL divergence of the
//! diagonal-Gaussian posterior from the standard normal.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Datasets smaller than this train full-batch.
    pub full_batch_below: usize,
    /// Only used by the VAE.
    pub kl_weight: f64,
}

impl Default for AeConfig {
    fn default() -> Self {
        AeConfig {
            epochs: 200,
            learning_rate: 1e-3,
            batch_size: 256,
            full_batch_below: 1024,
            kl_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NetworkKind {
    Autoencoder,
    Variational,
}

/// `out = input · weights + bias`, weights stored `in × out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Dense {
    fn init(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        Dense {
            weights: DMatrix::from_fn(fan_in, fan_out, |_, _| rng.random_range(-bound..bound)),
            bias: DVector::zeros(fan_out),
        }
    }

    fn zeros_like(&self) -> Self {
        Dense {
            weights: DMatrix::zeros(self.weights.nrows(), self.weights.ncols()),
            bias: DVector::zeros(self.bias.len()),
        }
    }

    fn forward(&self, input: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = input * &self.weights;
        for (j, mut col) in z.column_iter_mut().enumerate() {
            col.add_scalar_mut(self.bias[j]);
        }
        z
    }

    /// Gradient of this layer given its input and the gradient w.r.t. its output.
    fn backward(&self, input: &DMatrix<f64>, grad_out: &DMatrix<f64>) -> Dense {
        Dense {
            weights: input.transpose() * grad_out,
            bias: DVector::from_iterator(grad_out.ncols(), grad_out.column_iter().map(|c| c.sum())),
        }
    }

    fn grad_input(&self, grad_out: &DMatrix<f64>) -> DMatrix<f64> {
        grad_out * self.weights.transpose()
    }

    fn step(&mut self, grad: &Dense, lr: f64) {
        self.weights -= &grad.weights * lr;
        self.bias.axpy(-lr, &grad.bias, 1.0);
    }

    fn push_flat(&self, out: &mut Vec<f64>) {
        out.extend(self.weights.iter());
        out.extend(self.bias.iter());
    }

    fn read_flat(&mut self, src: &[f64]) -> usize {
        let nw = self.weights.len();
        let nb = self.bias.len();
        self.weights.copy_from_slice(&src[..nw]);
        self.bias.copy_from_slice(&src[nw..nw + nb]);
        nw + nb
    }
}

fn relu(z: &DMatrix<f64>) -> DMatrix<f64> {
    z.map(|v| v.max(0.0))
}

fn relu_mask(grad: &mut DMatrix<f64>, pre: &DMatrix<f64>) {
    grad.zip_apply(pre, |g, z| {
        if z <= 0.0 {
            *g = 0.0
        }
    });
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub kind: NetworkKind,
    pub encoder_hidden: Dense,
    pub encoder_mean: Dense,
    /// VAE log-variance head.
    pub encoder_log_var: Option<Dense>,
    pub decoder_hidden: Dense,
    pub decoder_out: Dense,
    pub kl_weight: f64,
}

/// Same layout as [`Network`], holding loss gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub encoder_hidden: Dense,
    pub encoder_mean: Dense,
    pub encoder_log_var: Option<Dense>,
    pub decoder_hidden: Dense,
    pub decoder_out: Dense,
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.encoder_hidden.push_flat(&mut out);
        self.encoder_mean.push_flat(&mut out);
        if let Some(l) = &self.encoder_log_var {
            l.push_flat(&mut out);
        }
        self.decoder_hidden.push_flat(&mut out);
        self.decoder_out.push_flat(&mut out);
        out
    }
}

/// Hidden width for `n_f` features: `floor(n_f / 2)`, at least 1.
pub fn hidden_width(n_features: usize) -> usize {
    (n_features / 2).max(1)
}

impl Network {
    pub fn new(
        kind: NetworkKind,
        n_features: usize,
        latent_dim: usize,
        kl_weight: f64,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::init(kind, n_features, latent_dim, kl_weight, &mut rng)
    }

    fn init(
        kind: NetworkKind,
        n_features: usize,
        latent_dim: usize,
        kl_weight: f64,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let h = hidden_width(n_features);
        let encoder_hidden = Dense::init(n_features, h, rng);
        let encoder_mean = Dense::init(h, latent_dim, rng);
        let encoder_log_var = match kind {
            NetworkKind::Variational => Some(Dense::init(h, latent_dim, rng)),
            NetworkKind::Autoencoder => None,
        };
        let decoder_hidden = Dense::init(latent_dim, h, rng);
        let decoder_out = Dense::init(h, n_features, rng);
        Network {
            kind,
            encoder_hidden,
            encoder_mean,
            encoder_log_var,
            decoder_hidden,
            decoder_out,
            kl_weight,
        }
    }

    /// Unit counts per layer, input to output.
    pub fn widths(&self) -> Vec<usize> {
        vec![
            self.encoder_hidden.weights.nrows(),
            self.encoder_hidden.weights.ncols(),
            self.encoder_mean.weights.ncols(),
            self.decoder_hidden.weights.ncols(),
            self.decoder_out.weights.ncols(),
        ]
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder_mean.weights.ncols()
    }

    /// Deterministic encoding (the posterior mean for a VAE).
    pub fn encode(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.encoder_mean
            .forward(&relu(&self.encoder_hidden.forward(x)))
    }

    pub fn decode(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        self.decoder_out
            .forward(&relu(&self.decoder_hidden.forward(z)))
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.encoder_hidden.push_flat(&mut out);
        self.encoder_mean.push_flat(&mut out);
        if let Some(l) = &self.encoder_log_var {
            l.push_flat(&mut out);
        }
        self.decoder_hidden.push_flat(&mut out);
        self.decoder_out.push_flat(&mut out);
        out
    }

    pub fn set_flat(&mut self, src: &[f64]) {
        let mut at = 0;
        at += self.encoder_hidden.read_flat(&src[at..]);
        at += self.encoder_mean.read_flat(&src[at..]);
        if let Some(l) = &mut self.encoder_log_var {
            at += l.read_flat(&src[at..]);
        }
        at += self.decoder_hidden.read_flat(&src[at..]);
        at += self.decoder_out.read_flat(&src[at..]);
        assert_eq!(at, src.len(), "flat parameter length mismatch");
    }

    /// Training loss on `batch`. `noise` is the reparameterization draw
    /// (`batch × m`); ignored by the plain autoencoder, zero when absent.
    pub fn loss(&self, batch: &DMatrix<f64>, noise: Option<&DMatrix<f64>>) -> f64 {
        self.forward(batch, noise).loss
    }

    fn forward(&self, x: &DMatrix<f64>, noise: Option<&DMatrix<f64>>) -> Forward {
        let b = x.nrows() as f64;
        let pre1 = self.encoder_hidden.forward(x);
        let act1 = relu(&pre1);
        let mean = self.encoder_mean.forward(&act1);
        let (latent, log_var, kl) = match &self.encoder_log_var {
            Some(head) => {
                let log_var = head.forward(&act1);
                let mut z = mean.clone();
                if let Some(eps) = noise {
                    z.zip_zip_apply(eps, &log_var, |zv, e, lv| *zv += (0.5 * lv).exp() * e);
                }
                let kl = mean
                    .iter()
                    .zip(log_var.iter())
                    .map(|(mu, lv)| 0.5 * (mu * mu + lv.exp() - 1.0 - lv))
                    .sum::<f64>()
                    / b;
                (z, Some(log_var), kl)
            }
            None => (mean.clone(), None, 0.0),
        };
        let pre3 = self.decoder_hidden.forward(&latent);
        let act3 = relu(&pre3);
        let out = self.decoder_out.forward(&act3);
        let recon = (&out - x).norm_squared() / (b * x.ncols() as f64);
        Forward {
            pre1,
            act1,
            mean,
            log_var,
            latent,
            pre3,
            act3,
            out,
            loss: recon + self.kl_weight * kl,
        }
    }

    fn apply(&mut self, grad: &Gradients, lr: f64) {
        self.encoder_hidden.step(&grad.encoder_hidden, lr);
        self.encoder_mean.step(&grad.encoder_mean, lr);
        if let (Some(l), Some(g)) = (&mut self.encoder_log_var, &grad.encoder_log_var) {
            l.step(g, lr);
        }
        self.decoder_hidden.step(&grad.decoder_hidden, lr);
        self.decoder_out.step(&grad.decoder_out, lr);
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            encoder_hidden: self.encoder_hidden.zeros_like(),
            encoder_mean: self.encoder_mean.zeros_like(),
            encoder_log_var: self.encoder_log_var.as_ref().map(Dense::zeros_like),
            decoder_hidden: self.decoder_hidden.zeros_like(),
            decoder_out: self.decoder_out.zeros_like(),
        }
    }
}

struct Forward {
    pre1: DMatrix<f64>,
    act1: DMatrix<f64>,
    mean: DMatrix<f64>,
    log_var: Option<DMatrix<f64>>,
    latent: DMatrix<f64>,
    pre3: DMatrix<f64>,
    act3: DMatrix<f64>,
    out: DMatrix<f64>,
    loss: f64,
}

/// Loss and gradient with respect to every weight and bias, by backpropagation.
pub fn ae_gradient(
    net: &Network,
    batch: &DMatrix<f64>,
    noise: Option<&DMatrix<f64>>,
) -> (f64, Gradients) {
    let b = batch.nrows() as f64;
    let f = net.forward(batch, noise);

    let d_out = (&f.out - batch) * (2.0 / (b * batch.ncols() as f64));
    let g_out = net.decoder_out.backward(&f.act3, &d_out);
    let mut d_pre3 = net.decoder_out.grad_input(&d_out);
    relu_mask(&mut d_pre3, &f.pre3);
    let g_dec_hidden = net.decoder_hidden.backward(&f.latent, &d_pre3);
    let d_latent = net.decoder_hidden.grad_input(&d_pre3);

    let kl = net.kl_weight / b;
    let (d_mean, g_log_var, d_act1) = match (&net.encoder_log_var, &f.log_var) {
        (Some(head), Some(log_var)) => {
            let d_mean = &d_latent + &f.mean * kl;
            let mut d_lv = DMatrix::zeros(log_var.nrows(), log_var.ncols());
            for idx in 0..log_var.len() {
                let lv = log_var[idx];
                let eps = noise.map_or(0.0, |e| e[idx]);
                d_lv[idx] =
                    d_latent[idx] * eps * 0.5 * (0.5 * lv).exp() + kl * 0.5 * (lv.exp() - 1.0);
            }
            let g_lv = head.backward(&f.act1, &d_lv);
            let d_act1 = net.encoder_mean.grad_input(&d_mean) + head.grad_input(&d_lv);
            (d_mean, Some(g_lv), d_act1)
        }
        _ => {
            let d_act1 = net.encoder_mean.grad_input(&d_latent);
            (d_latent, None, d_act1)
        }
    };
    let g_mean = net.encoder_mean.backward(&f.act1, &d_mean);
    let mut d_pre1 = d_act1;
    relu_mask(&mut d_pre1, &f.pre1);
    let g_hidden = net.encoder_hidden.backward(batch, &d_pre1);

    (
        f.loss,
        Gradients {
            encoder_hidden: g_hidden,
            encoder_mean: g_mean,
            encoder_log_var: g_log_var,
            decoder_hidden: g_dec_hidden,
            decoder_out: g_out,
        },
    )
}

/// Fixed-step gradient descent; returns the trained network and the mean
/// training loss of each epoch.
pub(super) fn train(
    x: &DMatrix<f64>,
    kind: NetworkKind,
    latent_dim: usize,
    seed: u64,
    config: &AeConfig,
) -> Result<(Network, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::init(kind, x.ncols(), latent_dim, config.kl_weight, &mut rng);
    let n = x.nrows();
    let batch = if n < config.full_batch_below {
        n
    } else {
        config.batch_size.clamp(1, n)
    };
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        if batch < n {
            order.shuffle(&mut rng);
        }
        let mut total = 0.0;
        for chunk in order.chunks(batch) {
            let owned;
            let xb = if batch == n {
                x
            } else {
                owned = x.select_rows(chunk);
                &owned
            };
            let noise = (kind == NetworkKind::Variational).then(|| {
                DMatrix::from_fn(xb.nrows(), latent_dim, |_, _| {
                    StandardNormal.sample(&mut rng)
                })
            });
            let (loss, grad) = ae_gradient(&net, xb, noise.as_ref());
            if !loss.is_finite() {
                return Err(Error::FitDiverged { step: epoch });
            }
            net.apply(&grad, config.learning_rate);
            total += loss * chunk.len() as f64;
        }
        trace.push(total / n as f64);
    }
    if net.flatten().iter().any(|v| !v.is_finite()) {
        return Err(Error::FitDiverged {
            step: config.epochs,
        });
    }
    Ok((net, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(seed: u64, rows: usize, cols: usize) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn relative_error(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
    }

    /// Random weights and biases; nonzero biases keep every ReLU away from its kink.
    fn randomized(kind: NetworkKind, seed: u64) -> Network {
        let mut net = Network::new(kind, 4, 2, 1.0, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let flat: Vec<f64> = net
            .flatten()
            .iter()
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        net.set_flat(&flat);
        net
    }

    fn check_against_finite_differences(
        net: &Network,
        x: &DMatrix<f64>,
        noise: Option<&DMatrix<f64>>,
    ) {
        let (_, grad) = ae_gradient(net, x, noise);
        let analytic = grad.flatten();
        let params = net.flatten();
        let h = 1e-5;
        let mut probe = net.clone();
        for (i, &g) in analytic.iter().enumerate() {
            let mut p = params.clone();
            p[i] += h;
            probe.set_flat(&p);
            let up = probe.loss(x, noise);
            p[i] -= 2.0 * h;
            probe.set_flat(&p);
            let down = probe.loss(x, noise);
            let numeric = (up - down) / (2.0 * h);
            assert!(
                relative_error(g, numeric) < 1e-4,
                "coordinate {i}: analytic {g}, numeric {numeric}"
            );
        }
    }

    #[test]
    fn widths_follow_the_symmetric_pattern() {
        let net = Network::new(NetworkKind::Autoencoder, 100, 2, 1.0, 0);
        assert_eq!(net.widths(), vec![100, 50, 2, 50, 100]);
        let net = Network::new(NetworkKind::Autoencoder, 7, 2, 1.0, 0);
        assert_eq!(net.widths(), vec![7, 3, 2, 3, 7]);
    }

    #[test]
    fn autoencoder_gradient_matches_finite_differences() {
        let net = randomized(NetworkKind::Autoencoder, 42);
        assert_eq!(net.widths(), vec![4, 2, 2, 2, 4]);
        check_against_finite_differences(&net, &batch(1, 6, 4), None);
    }

    #[test]
    fn vae_gradient_matches_finite_differences() {
        let net = randomized(NetworkKind::Variational, 17);
        let noise = batch(3, 6, 2);
        check_against_finite_differences(&net, &batch(2, 6, 4), Some(&noise));
    }

    #[test]
    fn zero_network_on_zero_input_has_zero_gradient() {
        let mut net = Network::new(NetworkKind::Autoencoder, 4, 2, 1.0, 0);
        let n = net.flatten().len();
        net.set_flat(&vec![0.0; n]);
        let (loss, grad) = ae_gradient(&net, &DMatrix::zeros(3, 4), None);
        assert_eq!(loss, 0.0);
        assert!(grad.flatten().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn vae_without_kl_and_noise_matches_plain_autoencoder() {
        let mut vae = Network::new(NetworkKind::Variational, 4, 2, 0.0, 5);
        let mut ae = Network::new(NetworkKind::Autoencoder, 4, 2, 0.0, 5);
        ae.encoder_hidden = vae.encoder_hidden.clone();
        ae.encoder_mean = vae.encoder_mean.clone();
        ae.decoder_hidden = vae.decoder_hidden.clone();
        ae.decoder_out = vae.decoder_out.clone();
        vae.kl_weight = 0.0;
        let x = batch(9, 5, 4);
        let zeros = DMatrix::zeros(5, 2);
        let (la, ga) = ae_gradient(&ae, &x, None);
        let (lv, gv) = ae_gradient(&vae, &x, Some(&zeros));
        assert_eq!(la, lv);
        assert_eq!(ga.encoder_hidden, gv.encoder_hidden);
        assert_eq!(ga.encoder_mean, gv.encoder_mean);
        assert_eq!(ga.decoder_hidden, gv.decoder_hidden);
        assert_eq!(ga.decoder_out, gv.decoder_out);
        assert!(gv
            .encoder_log_var
            .unwrap()
            .flatten_all()
            .iter()
            .all(|&g| g == 0.0));
    }

    impl Dense {
        fn flatten_all(&self) -> Vec<f64> {
            let mut v = Vec::new();
            self.push_flat(&mut v);
            v
        }
    }

    #[test]
    fn training_lowers_reconstruction_error_on_a_sine_family() {
        // 200 phase-shifted sine curves sampled at 50 points: a 1-D family.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = DMatrix::from_fn(200, 50, |_, _| 0.0);
        let phases: Vec<f64> = (0..200)
            .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
            .collect();
        let x = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            (std::f64::consts::TAU * j as f64 / 49.0 + phases[i]).sin()
        });
        let cfg = AeConfig::default();
        let untrained = AeConfig {
            epochs: 0,
            ..cfg.clone()
        };
        let (trained_net, trace) = train(&x, NetworkKind::Autoencoder, 2, 3, &cfg).unwrap();
        let (raw_net, _) = train(&x, NetworkKind::Autoencoder, 2, 3, &untrained).unwrap();
        assert_eq!(trace.len(), 200);
        assert!(trace.iter().all(|l| l.is_finite()));
        let err = |net: &Network| (net.decode(&net.encode(&x)) - &x).norm_squared() / 200.0;
        assert!(
            err(&trained_net) < err(&raw_net),
            "{} vs {}",
            err(&trained_net),
            err(&raw_net)
        );
    }

    #[test]
    fn minibatches_are_used_for_large_inputs() {
        let x = batch(4, 40, 6);
        let cfg = AeConfig {
            epochs: 3,
            full_batch_below: 10,
            batch_size: 16,
            ..AeConfig::default()
        };
        let (_, trace) = train(&x, NetworkKind::Variational, 2, 1, &cfg).unwrap();
        assert_eq!(trace.len(), 3);
    }

    #[test]
    fn divergence_is_reported() {
        let x = batch(4, 10, 6) * 1e3;
        let cfg = AeConfig {
            epochs: 50,
            learning_rate: 10.0,
            ..AeConfig::default()
        };
        assert!(matches!(
            train(&x, NetworkKind::Autoencoder, 2, 1, &cfg),
            Err(Error::FitDiverged { .. })
        ));
    }
}
