//! Two-phase training of the factorized ansatz.
//!
//! Pretraining fits the orbital network and the bare kernel to bare tensors
//! across many geometries; finetuning then fits the effective kernel (started
//! from a copy of the trained bare kernel) and the network to effective
//! tensors at a few reference geometries, with the bare kernel frozen.
//!
//! Gradients are exact analytical backpropagation, reduced in a fixed order,
//! so whole trajectories are bit-for-bit reproducible from (seed, data).

use std::collections::{BTreeMap, HashMap};
use std::io::Write as IoWrite;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, matvec_t};
use crate::mask::IndexMask;
use crate::model::{
    encode_input, gamma_pattern, init_params, silu_prime, KernelMatrix, Mlp, MlpTrace, ModelConfig,
    VNetModel,
};
use crate::symmetry::{Key4, Symmetry};
use crate::tensor::{GeometrySeries, TensorKind};

#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr0: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    /// Evaluate held-out loss every k epochs (0 = never); the final epoch is
    /// always evaluated when held-out samples are supplied.
    pub heldout_every: usize,
}

impl TrainConfig {
    /// Bare-phase defaults: 5000 epochs at lr0 = 1e-3.
    pub fn pretrain_default(seed: u64) -> Self {
        TrainConfig {
            epochs: 5000,
            lr0: 1e-3,
            batch_size: 4096,
            seed,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            heldout_every: 1,
        }
    }

    /// Effective-phase defaults: 500 epochs at lr0 = 2e-4.
    pub fn finetune_default(seed: u64) -> Self {
        TrainConfig {
            epochs: 500,
            lr0: 2e-4,
            ..Self::pretrain_default(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !(self.lr0.is_finite() && self.lr0 > 0.0) {
            return Err(Error::InvalidConfig("lr0 must be finite and > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    /// 1-based epoch index; the report is taken after the epoch's updates.
    pub epoch: usize,
    pub train_mse: f64,
    pub heldout_mse: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSample {
    pub geometry: f64,
    pub key: Key4,
    pub target: f64,
}

/// Samples in canonical order: geometry-major (series order), then retained
/// canonical keys lexicographically. This order is the contract for sample
/// stream hashing and for teacher/baseline comparisons.
pub fn build_samples(series: &GeometrySeries, mask: &IndexMask) -> Result<Vec<TrainSample>> {
    if series.n_act() != mask.n_act() {
        return Err(Error::ShapeMismatch(format!(
            "series n_act {} vs mask n_act {}",
            series.n_act(),
            mask.n_act()
        )));
    }
    let mut samples = Vec::with_capacity(series.len() * mask.n_retained());
    for entry in series.entries() {
        for key in mask.retained_keys() {
            samples.push(TrainSample {
                geometry: entry.geometry,
                key,
                target: entry.two_body.value(key),
            });
        }
    }
    if samples.is_empty() {
        return Err(Error::EmptyInput("no retained training samples".into()));
    }
    Ok(samples)
}

/// FNV-1a over the exact byte content of the ordered sample stream.
pub fn sample_stream_hash(samples: &[TrainSample]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |byte: u8| {
        h ^= byte as u64;
        h = h.wrapping_mul(0x100000001b3);
    };
    for s in samples {
        for b in s.geometry.to_bits().to_le_bytes() {
            eat(b);
        }
        for idx in s.key {
            for b in (idx as u16).to_le_bytes() {
                eat(b);
            }
        }
        for b in s.target.to_bits().to_le_bytes() {
            eat(b);
        }
    }
    h
}

/// lr0 * 0.5 * (1 + cos(pi t / T)) for 0 <= t <= T.
pub fn cosine_lr(t: u64, total: u64, lr0: f64) -> Result<f64> {
    if total == 0 || t > total {
        return Err(Error::InvalidConfig(format!(
            "cosine schedule needs 0 <= t <= T with T > 0, got t = {t}, T = {total}"
        )));
    }
    Ok(lr0 * 0.5 * (1.0 + (std::f64::consts::PI * t as f64 / total as f64).cos()))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Shuffle seed derived from (root seed, epoch, phase); epochs reshuffle
/// independently so resumed runs reproduce the interrupted schedule.
pub fn shuffle_seed(seed: u64, epoch: usize, phase: TensorKind) -> u64 {
    let tag = match phase {
        TensorKind::Bare => 0x42,
        TensorKind::Effective => 0xD0,
    };
    splitmix64(seed ^ splitmix64(epoch as u64 ^ (tag << 56)))
}

/// Fisher-Yates permutation of 0..n driven by a seeded ChaCha stream.
pub fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
    idx
}

// ---------------------------------------------------------------------------
// Adam

#[derive(Debug, Clone)]
pub struct AdamState {
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(shapes: &[usize]) -> Self {
        AdamState {
            t: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

/// One Adam update with bias correction; `t` increments once per call.
/// Denominator is sqrt(v_hat) + eps.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut [&mut [f64]],
    grads: &[Vec<f64>],
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::ShapeMismatch(
            "adam arrays disagree with parameter arrays".into(),
        ));
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        if p.len() != g.len() {
            return Err(Error::ShapeMismatch("gradient array shape".into()));
        }
        for i in 0..p.len() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Forward evaluation over sample sets (shared by loss and by metrics paths)

struct PhiCache<'m> {
    model: &'m VNetModel,
    g1: u8,
    g2: u8,
    phi: HashMap<(u64, u8, u16), Vec<f64>>,
    pair: HashMap<(u64, u16, u16), Vec<f64>>,
    kvec: HashMap<(u64, u16, u16), Vec<f64>>,
}

impl<'m> PhiCache<'m> {
    fn new(model: &'m VNetModel, phase: TensorKind) -> Self {
        let (g1, g2) = gamma_pattern(phase);
        PhiCache {
            model,
            g1,
            g2,
            phi: HashMap::new(),
            pair: HashMap::new(),
            kvec: HashMap::new(),
        }
    }

    fn phi(&mut self, r: f64, gamma: u8, i: usize) -> &Vec<f64> {
        let key = (r.to_bits(), gamma, i as u16);
        let model = self.model;
        let n = model.config.n_act;
        self.phi.entry(key).or_insert_with(|| {
            let x = encode_input(i, r, gamma, n).expect("validated index");
            model.net.forward(&x)
        })
    }

    fn pair(&mut self, r: f64, a: usize, b: usize) -> Vec<f64> {
        let key = (r.to_bits(), a as u16, b as u16);
        if let Some(u) = self.pair.get(&key) {
            return u.clone();
        }
        let (g1, g2) = (self.g1, self.g2);
        let pa = self.phi(r, g1, a).clone();
        let pb = self.phi(r, g2, b);
        let u: Vec<f64> = pa.iter().zip(pb).map(|(x, y)| x * y).collect();
        self.pair.insert(key, u.clone());
        u
    }

    fn kernel_vec(&mut self, kernel: &KernelMatrix, r: f64, a: usize, b: usize) -> Vec<f64> {
        let key = (r.to_bits(), a as u16, b as u16);
        if let Some(w) = self.kvec.get(&key) {
            return w.clone();
        }
        let v = self.pair(r, a, b);
        let mut w = vec![0.0; kernel.ell()];
        kernel.apply(&v, &mut w);
        self.kvec.insert(key, w.clone());
        w
    }
}

/// Prediction for one sample; identical arithmetic to `eval_element`.
fn predict(cache: &mut PhiCache, kernel: &KernelMatrix, s: &TrainSample) -> f64 {
    let [p, q, r, sidx] = s.key;
    let u = cache.pair(s.geometry, p, q);
    let kv = cache.kernel_vec(kernel, s.geometry, r, sidx);
    dot(&u, &kv)
}

/// Mean squared residual (prediction - target) over the sample set.
pub fn loss_mse(model: &VNetModel, phase: TensorKind, samples: &[TrainSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("loss over empty sample set".into()));
    }
    let kernel = model.kernel(phase)?;
    let mut cache = PhiCache::new(model, phase);
    let mut sum = 0.0;
    for s in samples {
        let e = predict(&mut cache, kernel, s) - s.target;
        sum += e * e;
    }
    Ok(sum / samples.len() as f64)
}

// ---------------------------------------------------------------------------
// Exact gradients

/// Flat gradient arrays ordered [W1, b1, ..., WL, bL, kernel(phase)].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub arrays: Vec<Vec<f64>>,
}

pub fn trainable_shapes(config: &ModelConfig) -> Vec<usize> {
    let mut shapes = Vec::new();
    for (rows, cols) in config.layer_dims() {
        shapes.push(rows * cols);
        shapes.push(rows);
    }
    shapes.push(KernelMatrix::packed_len(config.ell));
    shapes
}

/// Mutable views of the trainable parameters in `Gradients` order.
pub fn trainable_slices<'a>(net: &'a mut Mlp, kernel: &'a mut KernelMatrix) -> Vec<&'a mut [f64]> {
    let mut slices: Vec<&mut [f64]> = Vec::new();
    for (w, b) in net.weights.iter_mut().zip(net.biases.iter_mut()) {
        slices.push(w.as_slice_mut().expect("standard layout"));
        slices.push(b.as_mut_slice());
    }
    slices.push(kernel.packed_mut());
    slices
}

/// Backprop one output-gradient through the MLP, accumulating into dw/db.
pub(crate) fn mlp_backward_accumulate(
    net: &Mlp,
    trace: &MlpTrace,
    grad_out: &[f64],
    dw: &mut [Array2<f64>],
    db: &mut [Vec<f64>],
) {
    let last = net.layer_count() - 1;
    let mut delta = grad_out.to_vec();
    for k in (0..=last).rev() {
        let h_prev: &[f64] = if k == 0 {
            &trace.input
        } else {
            &trace.hs[k - 1]
        };
        let cols = h_prev.len();
        let dwk = dw[k].as_slice_mut().expect("standard layout");
        for (i, &d) in delta.iter().enumerate() {
            axpy(d, h_prev, &mut dwk[i * cols..(i + 1) * cols]);
        }
        for (dbi, &d) in db[k].iter_mut().zip(&delta) {
            *dbi += d;
        }
        if k > 0 {
            let mut prev = vec![0.0; cols];
            matvec_t(&net.weights[k], &delta, &mut prev);
            for (pd, &z) in prev.iter_mut().zip(&trace.zs[k - 1]) {
                *pd *= silu_prime(z);
            }
            delta = prev;
        }
    }
}

/// Exact gradient of the batch-mean squared residual with respect to the
/// network parameters and the kernel of `phase`.
///
/// Per sample with residual e and c = 2e/m: the dense kernel contribution is
/// the rank-one c u v^T; packing symmetrizes it, so an off-diagonal packed
/// entry receives the sum of its two mirror positions and a diagonal entry
/// receives its single position. Feature gradients flow back through the
/// elementwise products into the shared network.
pub fn backward(model: &VNetModel, phase: TensorKind, batch: &[TrainSample]) -> Result<Gradients> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("gradient over empty batch".into()));
    }
    let kernel = model.kernel(phase)?;
    let ell = model.config.ell;
    let n = model.config.n_act;
    let (g1, g2) = gamma_pattern(phase);
    let m = batch.len() as f64;

    // Slot = one distinct orbital-network evaluation (R, gamma, orbital).
    let mut slot_ids: BTreeMap<(u64, u8, u16), usize> = BTreeMap::new();
    let mut traces: Vec<MlpTrace> = Vec::new();
    let mut phis: Vec<Vec<f64>> = Vec::new();
    let mut phi_grads: Vec<Vec<f64>> = Vec::new();
    {
        let mut ensure_slot = |r: f64, gamma: u8, i: usize| -> Result<usize> {
            use std::collections::btree_map::Entry;
            match slot_ids.entry((r.to_bits(), gamma, i as u16)) {
                Entry::Occupied(e) => Ok(*e.get()),
                Entry::Vacant(e) => {
                    let x = encode_input(i, r, gamma, n)?;
                    let trace = model.net.forward_trace(&x);
                    let phi = trace.zs.last().expect("at least one layer").clone();
                    traces.push(trace);
                    phis.push(phi);
                    phi_grads.push(vec![0.0; ell]);
                    let id = traces.len() - 1;
                    e.insert(id);
                    Ok(id)
                }
            }
        };
        for s in batch {
            ensure_slot(s.geometry, g1, s.key[0])?;
            ensure_slot(s.geometry, g2, s.key[1])?;
            ensure_slot(s.geometry, g1, s.key[2])?;
            ensure_slot(s.geometry, g2, s.key[3])?;
        }
    }
    let slot = |r: f64, gamma: u8, i: usize| -> usize { slot_ids[&(r.to_bits(), gamma, i as u16)] };

    // Pair vectors and kernel products, cached per (R, ordered pair).
    let mut pairs: HashMap<(u64, u16, u16), Vec<f64>> = HashMap::new();
    let mut kvecs: HashMap<(u64, u16, u16), Vec<f64>> = HashMap::new();

    // Dense accumulator for sum_k c_k u_k v_k^T.
    let mut g_dense = vec![0.0; ell * ell];

    for s in batch {
        let [p, q, r_idx, s_idx] = s.key;
        let rb = s.geometry.to_bits();
        let (sp, sq) = (slot(s.geometry, g1, p), slot(s.geometry, g2, q));
        let (sr, ss) = (slot(s.geometry, g1, r_idx), slot(s.geometry, g2, s_idx));
        let upair_key = (rb, p as u16, q as u16);
        pairs
            .entry(upair_key)
            .or_insert_with(|| phis[sp].iter().zip(&phis[sq]).map(|(a, b)| a * b).collect());
        let vpair_key = (rb, r_idx as u16, s_idx as u16);
        pairs
            .entry(vpair_key)
            .or_insert_with(|| phis[sr].iter().zip(&phis[ss]).map(|(a, b)| a * b).collect());
        for key in [upair_key, vpair_key] {
            kvecs.entry(key).or_insert_with(|| {
                let mut w = vec![0.0; ell];
                kernel.apply(&pairs[&key], &mut w);
                w
            });
        }
        let u = &pairs[&upair_key];
        let v = &pairs[&vpair_key];
        let kv = &kvecs[&vpair_key];
        let ku = &kvecs[&upair_key];

        let e = dot(u, kv) - s.target;
        let c = 2.0 * e / m;

        for i in 0..ell {
            axpy(c * u[i], v, &mut g_dense[i * ell..(i + 1) * ell]);
        }
        // d pred / d phi decompositions of u = phi_p . phi_q, v = phi_r . phi_s.
        {
            let (gp, gq) = (c, c);
            let phi_q = phis[sq].clone();
            let phi_p = phis[sp].clone();
            let acc_p = &mut phi_grads[sp];
            for t in 0..ell {
                acc_p[t] += gp * kv[t] * phi_q[t];
            }
            let acc_q = &mut phi_grads[sq];
            for t in 0..ell {
                acc_q[t] += gq * kv[t] * phi_p[t];
            }
            let phi_s = phis[ss].clone();
            let phi_r = phis[sr].clone();
            let acc_r = &mut phi_grads[sr];
            for t in 0..ell {
                acc_r[t] += c * ku[t] * phi_s[t];
            }
            let acc_s = &mut phi_grads[ss];
            for t in 0..ell {
                acc_s[t] += c * ku[t] * phi_r[t];
            }
        }
    }

    // MLP gradients, slots reduced in key order.
    let dims = model.config.layer_dims();
    let mut dw: Vec<Array2<f64>> = dims.iter().map(|&(r, c)| Array2::zeros((r, c))).collect();
    let mut db: Vec<Vec<f64>> = dims.iter().map(|&(r, _)| vec![0.0; r]).collect();
    for (&_k, &id) in slot_ids.iter() {
        mlp_backward_accumulate(&model.net, &traces[id], &phi_grads[id], &mut dw, &mut db);
    }

    // Packed kernel gradient from the dense accumulator.
    let mut kernel_grad = vec![0.0; KernelMatrix::packed_len(ell)];
    let mut k = 0;
    for i in 0..ell {
        kernel_grad[k] = g_dense[i * ell + i];
        k += 1;
        for j in (i + 1)..ell {
            kernel_grad[k] = g_dense[i * ell + j] + g_dense[j * ell + i];
            k += 1;
        }
    }

    let mut arrays = Vec::with_capacity(2 * dims.len() + 1);
    for (w, b) in dw.into_iter().zip(db) {
        arrays.push(w.into_raw_vec());
        arrays.push(b);
    }
    arrays.push(kernel_grad);
    Ok(Gradients { arrays })
}

// ---------------------------------------------------------------------------
// Training driver

#[derive(Debug, Clone)]
pub struct Trainer {
    pub model: VNetModel,
    pub phase: TensorKind,
    pub config: TrainConfig,
    pub adam: AdamState,
    pub epochs_done: usize,
    /// Ablation marker: effective-phase training that skipped pretraining.
    pub from_scratch: bool,
}

impl Trainer {
    pub fn new_pretrain(mcfg: &ModelConfig, tcfg: &TrainConfig) -> Result<Trainer> {
        tcfg.validate()?;
        let model = init_params(mcfg, tcfg.seed)?;
        let adam = AdamState::new(&trainable_shapes(mcfg));
        Ok(Trainer {
            model,
            phase: TensorKind::Bare,
            config: *tcfg,
            adam,
            epochs_done: 0,
            from_scratch: false,
        })
    }

    /// Effective-phase trainer from a pretrained model. The effective kernel
    /// starts as a copy of the trained bare kernel, which stays frozen.
    pub fn new_finetune(pretrained: VNetModel, tcfg: &TrainConfig) -> Result<Trainer> {
        tcfg.validate()?;
        let mut model = pretrained;
        model.kernel_eff = Some(model.kernel_bare.clone());
        let adam = AdamState::new(&trainable_shapes(&model.config));
        Ok(Trainer {
            model,
            phase: TensorKind::Effective,
            config: *tcfg,
            adam,
            epochs_done: 0,
            from_scratch: false,
        })
    }

    /// Ablation: effective-phase training from random initialization.
    pub fn new_finetune_scratch(mcfg: &ModelConfig, tcfg: &TrainConfig) -> Result<Trainer> {
        let mut t = Trainer::new_pretrain(mcfg, tcfg)?;
        t.model.kernel_eff = Some(t.model.kernel_bare.clone());
        t.phase = TensorKind::Effective;
        t.from_scratch = true;
        Ok(t)
    }

    pub fn steps_per_epoch(&self, n_samples: usize) -> u64 {
        (n_samples as u64).div_ceil(self.config.batch_size as u64)
    }

    /// Runs the remaining epochs. Each epoch shuffles with a seed derived
    /// from (seed, epoch, phase), walks contiguous batches of the permuted
    /// sample list (final short batch included), and applies one Adam step
    /// per batch at the cosine rate indexed by the global step count. The
    /// per-epoch report carries the full-training-set loss evaluated after
    /// the epoch's updates.
    pub fn train(
        &mut self,
        samples: &[TrainSample],
        heldout: Option<&[TrainSample]>,
    ) -> Result<Vec<LossReport>> {
        self.train_until(samples, heldout, self.config.epochs)
    }

    /// As `train`, but stops after epoch `stop_epoch` (clamped to the
    /// configured total). The cosine schedule is fixed by the configured
    /// total regardless of where a call stops, so interrupt-checkpoint-resume
    /// reproduces an uninterrupted run bit for bit.
    pub fn train_until(
        &mut self,
        samples: &[TrainSample],
        heldout: Option<&[TrainSample]>,
        stop_epoch: usize,
    ) -> Result<Vec<LossReport>> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("training sample set".into()));
        }
        let total_steps = self.steps_per_epoch(samples.len()) * self.config.epochs as u64;
        let stop = stop_epoch.min(self.config.epochs);
        let mut history = Vec::with_capacity(stop.saturating_sub(self.epochs_done));
        for epoch in self.epochs_done..stop {
            let order = shuffled_indices(
                samples.len(),
                shuffle_seed(self.config.seed, epoch, self.phase),
            );
            for chunk in order.chunks(self.config.batch_size) {
                let batch: Vec<TrainSample> = chunk.iter().map(|&i| samples[i]).collect();
                let grads = backward(&self.model, self.phase, &batch)?;
                let lr = cosine_lr(self.adam.t, total_steps, self.config.lr0)?;
                let kernel = match self.phase {
                    TensorKind::Bare => &mut self.model.kernel_bare,
                    TensorKind::Effective => self
                        .model
                        .kernel_eff
                        .as_mut()
                        .ok_or(Error::MissingEffectiveKernel)?,
                };
                let mut params = trainable_slices(&mut self.model.net, kernel);
                adam_step(
                    &mut self.adam,
                    &mut params,
                    &grads.arrays,
                    lr,
                    self.config.beta1,
                    self.config.beta2,
                    self.config.eps_adam,
                )?;
            }
            self.epochs_done = epoch + 1;
            let train_mse = loss_mse(&self.model, self.phase, samples)?;
            let heldout_mse = match heldout {
                Some(h) => {
                    let due = self.config.heldout_every != 0
                        && (epoch + 1) % self.config.heldout_every == 0;
                    let last = epoch + 1 == self.config.epochs;
                    if due || last {
                        Some(loss_mse(&self.model, self.phase, h)?)
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

    pub fn into_model(self) -> VNetModel {
        self.model
    }
}

/// Bare-phase training over a series of bare EIGHTFOLD tensors.
pub fn pretrain(
    series: &GeometrySeries,
    mask: &IndexMask,
    mcfg: &ModelConfig,
    tcfg: &TrainConfig,
) -> Result<(VNetModel, Vec<LossReport>)> {
    if series.kind() != TensorKind::Bare || series.symmetry() != Symmetry::Eightfold {
        return Err(Error::InvalidConfig(
            "pretraining consumes bare EIGHTFOLD series".into(),
        ));
    }
    if mcfg.n_act != series.n_act() {
        return Err(Error::ShapeMismatch("model n_act vs series n_act".into()));
    }
    let samples = build_samples(series, mask)?;
    let mut trainer = Trainer::new_pretrain(mcfg, tcfg)?;
    let history = trainer.train(&samples, None)?;
    Ok((trainer.into_model(), history))
}

/// Effective-phase training at reference geometries, from a pretrained model.
/// `heldout` supplies effective tensors at non-reference geometries for
/// generalization tracking only; they never influence updates.
pub fn finetune(
    pretrained: VNetModel,
    references: &GeometrySeries,
    mask: &IndexMask,
    tcfg: &TrainConfig,
    heldout: Option<&GeometrySeries>,
) -> Result<(VNetModel, Vec<LossReport>)> {
    if references.kind() != TensorKind::Effective {
        return Err(Error::InvalidConfig(
            "finetuning consumes effective tensor series".into(),
        ));
    }
    let samples = build_samples(references, mask)?;
    let heldout_samples = match heldout {
        Some(series) => Some(build_samples(series, mask)?),
        None => None,
    };
    let mut trainer = Trainer::new_finetune(pretrained, tcfg)?;
    let history = trainer.train(&samples, heldout_samples.as_deref())?;
    Ok((trainer.into_model(), history))
}

/// CSV emitter for loss trajectories: `epoch,train_mse,heldout_mse` with an
/// empty third field when no held-out evaluation ran that epoch.
pub fn write_loss_csv<W: IoWrite>(mut w: W, history: &[LossReport]) -> std::io::Result<()> {
    writeln!(w, "epoch,train_mse,heldout_mse")?;
    for rep in history {
        match rep.heldout_mse {
            Some(h) => writeln!(w, "{},{:.16e},{:.16e}", rep.epoch, rep.train_mse, h)?,
            None => writeln!(w, "{},{:.16e},", rep.epoch, rep.train_mse)?,
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Finite-difference gradient verification (also wired to the CLI)

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// (array name, relative error) per parameter array, worst batch.
    pub per_array: Vec<(String, f64)>,
}

pub fn trainable_names(config: &ModelConfig) -> Vec<String> {
    let mut names = Vec::new();
    for k in 0..config.layer_dims().len() {
        names.push(format!("w{}", k + 1));
        names.push(format!("b{}", k + 1));
    }
    names.push("kernel".into());
    names
}

/// Compares `backward` against central finite differences of `loss_mse` at
/// step `fd_step`, over `n_batches` random batches. Per parameter array the
/// error is ||analytic - fd||_inf / max(||analytic||_inf, ||fd||_inf, 1e-12).
/// `corrupt` deliberately damages one analytic entry (negative control).
pub fn grad_check(
    mcfg: &ModelConfig,
    phase: TensorKind,
    seed: u64,
    n_batches: usize,
    batch_size: usize,
    fd_step: f64,
    corrupt: bool,
) -> Result<GradCheckReport> {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut model = init_params(mcfg, seed ^ 0x515c0ffee)?;
    if phase == TensorKind::Effective {
        model.kernel_eff = Some(model.kernel_bare.scaled(0.9));
    }
    let names = trainable_names(mcfg);
    let keys = crate::symmetry::canonical_unit(mcfg.n_act, Symmetry::Fourfold);
    let mut worst: Vec<f64> = vec![0.0; names.len()];

    for _ in 0..n_batches {
        let batch: Vec<TrainSample> = (0..batch_size)
            .map(|_| TrainSample {
                geometry: rng.gen_range(0.5..3.0),
                key: keys[rng.gen_range(0..keys.len())],
                target: rng.gen_range(-1.0..1.0),
            })
            .collect();
        let analytic = backward(&model, phase, &batch)?;
        for (arr_idx, analytic_arr) in analytic.arrays.iter().enumerate() {
            let mut fd_arr = vec![0.0; analytic_arr.len()];
            for i in 0..analytic_arr.len() {
                let read = |model: &VNetModel, phase: TensorKind| -> Result<f64> {
                    loss_mse(model, phase, &batch)
                };
                let probe = |delta: f64| -> Result<f64> {
                    let mut m = model.clone();
                    let kernel = match phase {
                        TensorKind::Bare => &mut m.kernel_bare,
                        TensorKind::Effective => m.kernel_eff.as_mut().unwrap(),
                    };
                    let mut slices = trainable_slices(&mut m.net, kernel);
                    slices[arr_idx][i] += delta;
                    drop(slices);
                    read(&m, phase)
                };
                let plus = probe(fd_step)?;
                let minus = probe(-fd_step)?;
                fd_arr[i] = (plus - minus) / (2.0 * fd_step);
            }
            let mut analytic_arr = analytic_arr.clone();
            if corrupt && arr_idx == 0 && !analytic_arr.is_empty() {
                analytic_arr[0] = analytic_arr[0] * 1.5 + 1e-3;
            }
            let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
            let denom = inf(&analytic_arr).max(inf(&fd_arr)).max(1e-12);
            let diff = analytic_arr
                .iter()
                .zip(&fd_arr)
                .fold(0.0f64, |m, (a, f)| m.max((a - f).abs()));
            worst[arr_idx] = worst[arr_idx].max(diff / denom);
        }
    }
    let per_array: Vec<(String, f64)> = names.into_iter().zip(worst.iter().copied()).collect();
    let max_rel_error = worst.iter().fold(0.0f64, |m, &x| m.max(x));
    Ok(GradCheckReport {
        max_rel_error,
        per_array,
    })
}
