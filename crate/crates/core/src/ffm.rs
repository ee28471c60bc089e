//! Random-Fourier-feature regression baseline.
//!
//! Instead of factorizing the tensor through per-orbital features and a
//! shared kernel, this model embeds the raw index-geometry coordinate
//! (p, q, r, s, R) with a frozen Gaussian frequency matrix and regresses the
//! tensor entry with an MLP on [cos(2 pi B v); sin(2 pi B v)]. It consumes
//! the same ordered sample stream as effective-phase training of the
//! factorized model, which makes it the controlled comparison for
//! generalization across geometry.

use std::collections::HashMap;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::mask::IndexMask;
use crate::model::Mlp;
use crate::symmetry::Symmetry;
use crate::tensor::{InteractionTensor2B, TensorKind};
use crate::train::{
    adam_step, cosine_lr, mlp_backward_accumulate, shuffle_seed, shuffled_indices, AdamState,
    LossReport, TrainConfig, TrainSample,
};

pub const DEFAULT_N_FREQ: usize = 256;
pub const DEFAULT_SIGMA_F: f64 = 10.0;
pub const DEFAULT_FFM_EPOCHS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FfmConfig {
    pub n_act: usize,
    pub n_freq: usize,
    pub sigma_f: f64,
    pub hidden_width: usize,
    pub depth: usize,
}

impl FfmConfig {
    pub fn new(
        n_act: usize,
        n_freq: usize,
        sigma_f: f64,
        hidden_width: usize,
        depth: usize,
    ) -> Result<Self> {
        let cfg = FfmConfig {
            n_act,
            n_freq,
            sigma_f,
            hidden_width,
            depth,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn defaults(n_act: usize) -> Result<Self> {
        Self::new(n_act, DEFAULT_N_FREQ, DEFAULT_SIGMA_F, 200, 4)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_act == 0 {
            return Err(Error::InvalidConfig("n_act must be >= 1".into()));
        }
        if self.n_freq == 0 {
            return Err(Error::InvalidConfig("n_freq must be >= 1".into()));
        }
        if self.hidden_width == 0 || self.depth < 2 {
            return Err(Error::InvalidConfig(
                "baseline MLP needs hidden_width >= 1 and depth >= 2".into(),
            ));
        }
        if !(self.sigma_f.is_finite() && self.sigma_f > 0.0) {
            return Err(Error::InvalidConfig(
                "sigma_f must be finite and > 0".into(),
            ));
        }
        Ok(())
    }

    /// Scalar head on top of the feature embedding: 2 n_freq -> M -> ... -> 1.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![(self.hidden_width, 2 * self.n_freq)];
        for _ in 0..self.depth.saturating_sub(2) {
            dims.push((self.hidden_width, self.hidden_width));
        }
        dims.push((1, self.hidden_width));
        dims
    }
}

#[derive(Debug, Clone)]
pub struct FfmModel {
    pub config: FfmConfig,
    /// Frozen frequency matrix, n_freq x 5, entries N(0, sigma_f^2).
    pub b_matrix: Array2<f64>,
    pub net: Mlp,
}

impl FfmModel {
    /// Frequencies then network weights are drawn from one seeded stream.
    pub fn init(config: &FfmConfig, seed: u64) -> Result<FfmModel> {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        config.validate()?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, config.sigma_f).expect("positive sigma");
        let mut b = Array2::zeros((config.n_freq, 5));
        for k in 0..config.n_freq {
            for c in 0..5 {
                b[(k, c)] = normal.sample(&mut rng);
            }
        }
        let net = Mlp::xavier_init(&config.layer_dims(), &mut rng);
        Ok(FfmModel {
            config: *config,
            b_matrix: b,
            net,
        })
    }

    /// Coordinate embedding: indices normalized to [0, 1] by (n_act - 1),
    /// geometry left raw, then [cos(2 pi B v); sin(2 pi B v)].
    pub fn features(&self, key: [usize; 4], geometry: f64) -> Result<Vec<f64>> {
        let n = self.config.n_act;
        for &i in &key {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, n_act: n });
            }
        }
        if !geometry.is_finite() {
            return Err(Error::NonFinite("geometry".into()));
        }
        let denom = (n - 1).max(1) as f64;
        let v = [
            key[0] as f64 / denom,
            key[1] as f64 / denom,
            key[2] as f64 / denom,
            key[3] as f64 / denom,
            geometry,
        ];
        let nf = self.config.n_freq;
        let mut out = vec![0.0; 2 * nf];
        let b = self.b_matrix.as_slice().expect("standard layout");
        for k in 0..nf {
            let row = &b[k * 5..(k + 1) * 5];
            let mut w = 0.0;
            for c in 0..5 {
                w += row[c] * v[c];
            }
            let angle = 2.0 * std::f64::consts::PI * w;
            out[k] = angle.cos();
            out[nf + k] = angle.sin();
        }
        Ok(out)
    }

    pub fn predict(&self, key: [usize; 4], geometry: f64) -> Result<f64> {
        let x = self.features(key, geometry)?;
        Ok(self.net.forward(&x)[0])
    }

    /// Dense effective tensor: canonical pair-swap entries predicted, the
    /// rest replicated, masked entries pinned to zero.
    pub fn eval_tensor(&self, geometry: f64, mask: &IndexMask) -> Result<InteractionTensor2B> {
        let n = self.config.n_act;
        if mask.n_act() != n {
            return Err(Error::ShapeMismatch(format!(
                "mask n_act {} vs model n_act {}",
                mask.n_act(),
                n
            )));
        }
        let mut err = None;
        let tensor = InteractionTensor2B::from_canonical(
            n,
            Symmetry::Fourfold,
            TensorKind::Effective,
            geometry,
            |key| match mask.is_masked(key) {
                Some(true) => 0.0,
                Some(false) => match self.predict(key, geometry) {
                    Ok(v) => v,
                    Err(e) => {
                        err.get_or_insert(e);
                        0.0
                    }
                },
                None => {
                    err.get_or_insert(Error::ShapeMismatch(format!(
                        "mask lacks canonical key {key:?}"
                    )));
                    0.0
                }
            },
        );
        match err {
            Some(e) => Err(e),
            None => tensor,
        }
    }
}

fn mlp_shapes(dims: &[(usize, usize)]) -> Vec<usize> {
    let mut shapes = Vec::with_capacity(2 * dims.len());
    for &(r, c) in dims {
        shapes.push(r * c);
        shapes.push(r);
    }
    shapes
}

fn mlp_slices(net: &mut Mlp) -> Vec<&mut [f64]> {
    let mut out: Vec<&mut [f64]> = Vec::new();
    for (w, b) in net.weights.iter_mut().zip(net.biases.iter_mut()) {
        out.push(w.as_slice_mut().expect("standard layout"));
        out.push(b.as_mut_slice());
    }
    out
}

/// Mean squared residual with features recomputed per sample.
pub fn ffm_loss_mse(model: &FfmModel, samples: &[TrainSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("loss over empty sample set".into()));
    }
    let mut cache: HashMap<(u64, [u16; 4]), Vec<f64>> = HashMap::new();
    let mut sum = 0.0;
    for s in samples {
        let ck = (
            s.geometry.to_bits(),
            [
                s.key[0] as u16,
                s.key[1] as u16,
                s.key[2] as u16,
                s.key[3] as u16,
            ],
        );
        let x = match cache.entry(ck) {
            std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(model.features(s.key, s.geometry)?)
            }
        };
        let e = model.net.forward(x)[0] - s.target;
        sum += e * e;
    }
    Ok(sum / samples.len() as f64)
}

/// Exact gradient of the batch-mean squared residual for the baseline MLP
/// (the frequency matrix is frozen). Arrays ordered [W1, b1, ..., WL, bL].
pub fn ffm_backward(model: &FfmModel, batch: &[(TrainSample, &Vec<f64>)]) -> Result<Vec<Vec<f64>>> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("gradient over empty batch".into()));
    }
    let dims = model.config.layer_dims();
    let mut dw: Vec<Array2<f64>> = dims.iter().map(|&(r, c)| Array2::zeros((r, c))).collect();
    let mut db: Vec<Vec<f64>> = dims.iter().map(|&(r, _)| vec![0.0; r]).collect();
    let m = batch.len() as f64;
    for (s, x) in batch {
        let trace = model.net.forward_trace(x);
        let pred = trace.zs.last().expect("nonempty net")[0];
        let grad_out = [2.0 * (pred - s.target) / m];
        mlp_backward_accumulate(&model.net, &trace, &grad_out, &mut dw, &mut db);
    }
    let mut arrays = Vec::with_capacity(2 * dims.len());
    for (w, b) in dw.into_iter().zip(db) {
        arrays.push(w.into_raw_vec());
        arrays.push(b);
    }
    Ok(arrays)
}

#[derive(Debug, Clone)]
pub struct FfmTrainer {
    pub model: FfmModel,
    pub config: TrainConfig,
    pub adam: AdamState,
    pub epochs_done: usize,
}

impl FfmTrainer {
    pub fn new(mcfg: &FfmConfig, tcfg: &TrainConfig) -> Result<FfmTrainer> {
        tcfg.validate()?;
        let model = FfmModel::init(mcfg, tcfg.seed)?;
        let adam = AdamState::new(&mlp_shapes(&mcfg.layer_dims()));
        Ok(FfmTrainer {
            model,
            config: *tcfg,
            adam,
            epochs_done: 0,
        })
    }

    /// Same schedule skeleton as the factorized trainer: per-epoch shuffles
    /// derived from (seed, epoch), cosine rate on the global step, final
    /// short batch included. Features are precomputed once per sample list.
    pub fn train(
        &mut self,
        samples: &[TrainSample],
        heldout: Option<&[TrainSample]>,
    ) -> Result<Vec<LossReport>> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("training sample set".into()));
        }
        let feats: Vec<Vec<f64>> = samples
            .iter()
            .map(|s| self.model.features(s.key, s.geometry))
            .collect::<Result<_>>()?;
        let steps_per_epoch = (samples.len() as u64).div_ceil(self.config.batch_size as u64);
        let total_steps = steps_per_epoch * self.config.epochs as u64;
        let mut history = Vec::new();
        for epoch in self.epochs_done..self.config.epochs {
            let order = shuffled_indices(
                samples.len(),
                shuffle_seed(self.config.seed, epoch, TensorKind::Effective),
            );
            for chunk in order.chunks(self.config.batch_size) {
                let batch: Vec<(TrainSample, &Vec<f64>)> =
                    chunk.iter().map(|&i| (samples[i], &feats[i])).collect();
                let grads = ffm_backward(&self.model, &batch)?;
                let lr = cosine_lr(self.adam.t, total_steps, self.config.lr0)?;
                let mut params = mlp_slices(&mut self.model.net);
                adam_step(
                    &mut self.adam,
                    &mut params,
                    &grads,
                    lr,
                    self.config.beta1,
                    self.config.beta2,
                    self.config.eps_adam,
                )?;
            }
            self.epochs_done = epoch + 1;
            let train_mse = ffm_loss_mse(&self.model, samples)?;
            let heldout_mse = match heldout {
                Some(h) => {
                    let due = self.config.heldout_every != 0
                        && (epoch + 1) % self.config.heldout_every == 0;
                    if due || epoch + 1 == self.config.epochs {
                        Some(ffm_loss_mse(&self.model, h)?)
                    } else {
                        None
                    }
                }
                None => None,
            };
            history.push(LossReport {
                epoch: epoch + 1,
                train_mse,
                heldout_mse,
            });
        }
        Ok(history)
    }
}

/// Convenience wrapper mirroring `finetune`: trains the baseline on the given
/// ordered sample stream.
pub fn ffm_train(
    mcfg: &FfmConfig,
    tcfg: &TrainConfig,
    samples: &[TrainSample],
    heldout: Option<&[TrainSample]>,
) -> Result<(FfmModel, Vec<LossReport>)> {
    let mut trainer = FfmTrainer::new(mcfg, tcfg)?;
    let history = trainer.train(samples, heldout)?;
    Ok((trainer.model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetry::Key4;

    fn tiny_config() -> FfmConfig {
        FfmConfig::new(3, 8, 10.0, 6, 3).unwrap()
    }

    fn tiny_samples() -> Vec<TrainSample> {
        let keys = crate::symmetry::canonical_unit(3, Symmetry::Fourfold);
        let mut out = Vec::new();
        for &g in &[1.0, 1.5] {
            for (i, &key) in keys.iter().enumerate() {
                out.push(TrainSample {
                    geometry: g,
                    key,
                    target: 0.01 * (i as f64) - 0.05 * g,
                });
            }
        }
        out
    }

    #[test]
    fn feature_vector_has_cos_sin_layout() {
        let model = FfmModel::init(&tiny_config(), 5).unwrap();
        let x = model.features([0, 1, 2, 0], 1.25).unwrap();
        assert_eq!(x.len(), 16);
        for k in 0..8 {
            // cos^2 + sin^2 = 1 pins the pairing between the two halves.
            let s = x[k] * x[k] + x[8 + k] * x[8 + k];
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert!(model.features([0, 0, 0, 3], 1.0).is_err());
        assert!(model.features([0, 0, 0, 0], f64::NAN).is_err());
    }

    #[test]
    fn init_is_deterministic_and_seed_sensitive() {
        let a = FfmModel::init(&tiny_config(), 5).unwrap();
        let b = FfmModel::init(&tiny_config(), 5).unwrap();
        let c = FfmModel::init(&tiny_config(), 6).unwrap();
        assert_eq!(a.b_matrix, b.b_matrix);
        assert_eq!(a.net.weights[0], b.net.weights[0]);
        assert!(a.b_matrix != c.b_matrix);
    }

    #[test]
    fn frequency_matrix_scales_with_sigma() {
        let narrow = FfmModel::init(&FfmConfig::new(3, 64, 1.0, 4, 2).unwrap(), 9).unwrap();
        let wide = FfmModel::init(&FfmConfig::new(3, 64, 10.0, 4, 2).unwrap(), 9).unwrap();
        let rms = |m: &Array2<f64>| (m.iter().map(|x| x * x).sum::<f64>() / m.len() as f64).sqrt();
        let ratio = rms(&wide.b_matrix) / rms(&narrow.b_matrix);
        assert!((ratio - 10.0).abs() < 1e-9, "rms ratio {ratio}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let model = FfmModel::init(&tiny_config(), 11).unwrap();
        let samples = tiny_samples();
        let feats: Vec<Vec<f64>> = samples
            .iter()
            .map(|s| model.features(s.key, s.geometry).unwrap())
            .collect();
        let batch: Vec<(TrainSample, &Vec<f64>)> =
            samples.iter().copied().zip(feats.iter()).collect();
        let analytic = ffm_backward(&model, &batch).unwrap();

        let loss = |m: &FfmModel| ffm_loss_mse(m, &samples).unwrap();
        let h = 1e-5;
        let mut worst = 0.0f64;
        for arr_idx in 0..analytic.len() {
            for i in 0..analytic[arr_idx].len() {
                let mut mp = model.clone();
                mlp_slices(&mut mp.net)[arr_idx][i] += h;
                let plus = loss(&mp);
                let mut mm = model.clone();
                mlp_slices(&mut mm.net)[arr_idx][i] -= h;
                let minus = loss(&mm);
                let fd = (plus - minus) / (2.0 * h);
                let denom = analytic[arr_idx][i].abs().max(fd.abs()).max(1e-6);
                worst = worst.max((analytic[arr_idx][i] - fd).abs() / denom);
            }
        }
        assert!(worst < 1e-6, "worst rel err {worst:.3e}");
    }

    #[test]
    fn training_is_deterministic_and_reduces_loss() {
        let mcfg = tiny_config();
        let tcfg = TrainConfig {
            epochs: 40,
            lr0: 3e-3,
            batch_size: 16,
            ..TrainConfig::pretrain_default(21)
        };
        let samples = tiny_samples();
        let before = ffm_loss_mse(&FfmModel::init(&mcfg, tcfg.seed).unwrap(), &samples).unwrap();
        let (m1, h1) = ffm_train(&mcfg, &tcfg, &samples, None).unwrap();
        let (m2, h2) = ffm_train(&mcfg, &tcfg, &samples, None).unwrap();
        assert_eq!(h1, h2);
        assert_eq!(m1.net.weights[0], m2.net.weights[0]);
        let after = h1.last().unwrap().train_mse;
        assert!(after < before, "loss {before:.3e} -> {after:.3e}");
    }

    #[test]
    fn predicted_tensor_is_pair_swap_symmetric_and_respects_mask() {
        let model = FfmModel::init(&tiny_config(), 13).unwrap();
        let masked: Vec<Key4> = vec![[0, 1, 0, 1]];
        let mask = IndexMask::new(3, Symmetry::Fourfold, &masked).unwrap();
        let t = model.eval_tensor(1.3, &mask).unwrap();
        assert_eq!(t.kind(), TensorKind::Effective);
        assert_eq!(t.symmetry(), Symmetry::Fourfold);
        assert_eq!(t.value([0, 1, 0, 1]), 0.0);
        assert_eq!(t.value([1, 0, 1, 0]), 0.0);
        let (dev, _) = t.symmetry_deviation();
        assert_eq!(dev, 0.0);
        // Unmasked canonical entries come straight from the network head.
        let key = [0, 0, 1, 2];
        assert_eq!(t.value(key), model.predict(key, 1.3).unwrap());
    }
}
