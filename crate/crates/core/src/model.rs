//! Factorized ansatz for two-body interaction tensors.
//!
//! One shared MLP maps (geometry scalar R, symmetry flag gamma, one-hot
//! orbital index) to an l-dimensional feature vector phi. A tensor entry is
//! the bilinear form
//!
//!   (pq|rs) ~ [phi(p,R,g1) . phi(q,R,g2)]^T  W  [phi(r,R,g1) . phi(s,R,g2)]
//!
//! with "." the elementwise product and W a symmetric l x l kernel that is
//! independent of geometry. Bare evaluation uses gamma pattern (0,0) and the
//! bare kernel, which makes the value invariant under the full eight-element
//! index group; effective evaluation uses pattern (0,1) and its own kernel,
//! keeping only the pair-swap subgroup.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, matvec};
use crate::mask::IndexMask;
use crate::symmetry::{Key4, Symmetry};
use crate::tensor::{InteractionTensor2B, TensorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub n_act: usize,
    /// Feature dimension l of the orbital vectors.
    pub ell: usize,
    /// Hidden width M.
    pub hidden_width: usize,
    /// Number of weight layers L (so L - 1 hidden activations).
    pub depth: usize,
}

impl ModelConfig {
    pub fn new(n_act: usize, ell: usize, hidden_width: usize, depth: usize) -> Result<Self> {
        let cfg = ModelConfig {
            n_act,
            ell,
            hidden_width,
            depth,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_act == 0 {
            return Err(Error::InvalidConfig("n_act must be >= 1".into()));
        }
        if self.ell == 0 || self.hidden_width == 0 {
            return Err(Error::InvalidConfig(
                "ell and hidden_width must be >= 1".into(),
            ));
        }
        if self.depth < 2 {
            return Err(Error::InvalidConfig(
                "depth counts weight layers and must be >= 2".into(),
            ));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.n_act + 2
    }

    /// Per-layer (rows, cols) shapes, input to output.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let m = self.hidden_width;
        let mut dims = vec![(m, self.input_dim())];
        for _ in 0..self.depth.saturating_sub(2) {
            dims.push((m, m));
        }
        dims.push((self.ell, m));
        dims
    }
}

/// Production-scale defaults: l = 300, M = 200, L = 4.
pub const DEFAULT_ELL: usize = 300;
pub const DEFAULT_HIDDEN_WIDTH: usize = 200;
pub const DEFAULT_DEPTH: usize = 4;

pub fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

/// d/dx silu(x) = s(x) (1 + x (1 - s(x))) with s the logistic function.
pub fn silu_prime(x: f64) -> f64 {
    let s = 1.0 / (1.0 + (-x).exp());
    s * (1.0 + x * (1.0 - s))
}

/// Network input [R, gamma, onehot(i)].
pub fn encode_input(i: usize, r: f64, gamma: u8, n_act: usize) -> Result<Vec<f64>> {
    if i >= n_act {
        return Err(Error::IndexOutOfRange { index: i, n_act });
    }
    if !r.is_finite() {
        return Err(Error::NonFinite("geometry scalar".into()));
    }
    let mut x = vec![0.0; n_act + 2];
    x[0] = r;
    x[1] = gamma as f64;
    x[2 + i] = 1.0;
    Ok(x)
}

/// Plain MLP with SiLU hidden activations and a linear output layer. Also
/// reused by the Fourier-feature baseline (different input/output widths).
#[derive(Debug, Clone)]
pub struct Mlp {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Cached activations of one forward pass, for exact backpropagation.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    pub input: Vec<f64>,
    /// Pre-activations z_k of every layer; the last one is the output.
    pub zs: Vec<Vec<f64>>,
    /// Hidden activations h_k = silu(z_k) for k < L - 1.
    pub hs: Vec<Vec<f64>>,
}

impl Mlp {
    pub fn xavier_init(dims: &[(usize, usize)], rng: &mut ChaCha8Rng) -> Mlp {
        let mut weights = Vec::with_capacity(dims.len());
        let mut biases = Vec::with_capacity(dims.len());
        for &(rows, cols) in dims {
            let bound = (6.0 / (rows + cols) as f64).sqrt();
            let mut w = Array2::zeros((rows, cols));
            for v in w.iter_mut() {
                *v = rng.gen_range(-bound..bound);
            }
            weights.push(w);
            biases.push(vec![0.0; rows]);
        }
        Mlp { weights, biases }
    }

    pub fn layer_count(&self) -> usize {
        self.weights.len()
    }

    pub fn in_dim(&self) -> usize {
        self.weights[0].ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights[self.weights.len() - 1].nrows()
    }

    pub fn param_count(&self) -> usize {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.len() + b.len())
            .sum()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let last = self.layer_count() - 1;
        let mut h = x.to_vec();
        for (k, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = vec![0.0; w.nrows()];
            matvec(w, &h, &mut z);
            for (zi, bi) in z.iter_mut().zip(b) {
                *zi += bi;
            }
            if k < last {
                for zi in z.iter_mut() {
                    *zi = silu(*zi);
                }
            }
            h = z;
        }
        h
    }

    /// Forward pass keeping pre-activations and hidden activations.
    /// The final output is `trace.zs.last()`.
    pub fn forward_trace(&self, x: &[f64]) -> MlpTrace {
        let last = self.layer_count() - 1;
        let mut zs = Vec::with_capacity(self.layer_count());
        let mut hs = Vec::with_capacity(last);
        let mut h = x.to_vec();
        for (k, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = vec![0.0; w.nrows()];
            matvec(w, &h, &mut z);
            for (zi, bi) in z.iter_mut().zip(b) {
                *zi += bi;
            }
            zs.push(z.clone());
            if k < last {
                for zi in z.iter_mut() {
                    *zi = silu(*zi);
                }
                hs.push(z.clone());
                h = z;
            }
        }
        MlpTrace {
            input: x.to_vec(),
            zs,
            hs,
        }
    }
}

/// Symmetric kernel stored as the packed upper triangle, row-major:
/// entry (i, j), i <= j, lives at i*l - i(i-1)/2 + (j - i).
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    ell: usize,
    packed: Vec<f64>,
}

impl KernelMatrix {
    pub fn packed_len(ell: usize) -> usize {
        ell * (ell + 1) / 2
    }

    pub fn zeros(ell: usize) -> Self {
        KernelMatrix {
            ell,
            packed: vec![0.0; Self::packed_len(ell)],
        }
    }

    pub fn from_packed(ell: usize, packed: Vec<f64>) -> Result<Self> {
        if packed.len() != Self::packed_len(ell) {
            return Err(Error::ShapeMismatch(format!(
                "packed kernel length {} does not match l = {}",
                packed.len(),
                ell
            )));
        }
        Ok(KernelMatrix { ell, packed })
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    #[inline]
    pub fn packed_index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * (2 * self.ell + 1 - i) / 2 + (j - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.packed[self.packed_index(i, j)]
    }

    pub fn packed(&self) -> &[f64] {
        &self.packed
    }

    pub fn packed_mut(&mut self) -> &mut [f64] {
        &mut self.packed
    }

    /// out = W v in one fixed-order pass over the packed entries.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.ell);
        debug_assert_eq!(out.len(), self.ell);
        out.fill(0.0);
        let mut k = 0;
        for i in 0..self.ell {
            let wii = self.packed[k];
            out[i] += wii * v[i];
            k += 1;
            for j in (i + 1)..self.ell {
                let w = self.packed[k];
                out[i] += w * v[j];
                out[j] += w * v[i];
                k += 1;
            }
        }
    }

    /// u^T W v.
    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        let mut wv = vec![0.0; self.ell];
        self.apply(v, &mut wv);
        dot(u, &wv)
    }

    /// Dense symmetric materialization (exactly symmetric by construction).
    pub fn to_dense(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.ell, self.ell));
        for i in 0..self.ell {
            for j in i..self.ell {
                let v = self.get(i, j);
                m[[i, j]] = v;
                m[[j, i]] = v;
            }
        }
        m
    }

    pub fn scaled(&self, c: f64) -> KernelMatrix {
        KernelMatrix {
            ell: self.ell,
            packed: self.packed.iter().map(|v| c * v).collect(),
        }
    }
}

/// Trainable parameter count: MLP weights and biases plus one packed kernel.
pub fn param_count(config: &ModelConfig) -> usize {
    let mlp: usize = config
        .layer_dims()
        .iter()
        .map(|&(rows, cols)| rows * cols + rows)
        .sum();
    mlp + KernelMatrix::packed_len(config.ell)
}

#[derive(Debug, Clone)]
pub struct VNetModel {
    pub config: ModelConfig,
    pub net: Mlp,
    pub kernel_bare: KernelMatrix,
    pub kernel_eff: Option<KernelMatrix>,
}

/// Xavier-uniform MLP weights, zero biases, kernel entries uniform in
/// [-1/l, 1/l]. Fully determined by the seed.
pub fn init_params(config: &ModelConfig, seed: u64) -> Result<VNetModel> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = Mlp::xavier_init(&config.layer_dims(), &mut rng);
    let bound = 1.0 / config.ell as f64;
    let mut packed = vec![0.0; KernelMatrix::packed_len(config.ell)];
    for v in packed.iter_mut() {
        *v = rng.gen_range(-bound..bound);
    }
    Ok(VNetModel {
        config: *config,
        net,
        kernel_bare: KernelMatrix::from_packed(config.ell, packed)?,
        kernel_eff: None,
    })
}

/// Gamma inputs for the two slots of each orbital pair: (first, second).
pub fn gamma_pattern(phase: TensorKind) -> (u8, u8) {
    match phase {
        TensorKind::Bare => (0, 0),
        TensorKind::Effective => (0, 1),
    }
}

impl VNetModel {
    pub fn kernel(&self, phase: TensorKind) -> Result<&KernelMatrix> {
        match phase {
            TensorKind::Bare => Ok(&self.kernel_bare),
            TensorKind::Effective => self
                .kernel_eff
                .as_ref()
                .ok_or(Error::MissingEffectiveKernel),
        }
    }

    /// Feature vector phi(i, R, gamma).
    pub fn orbital_forward(&self, i: usize, r: f64, gamma: u8) -> Result<Vec<f64>> {
        let x = encode_input(i, r, gamma, self.config.n_act)?;
        Ok(self.net.forward(&x))
    }

    /// Single tensor entry (pq|rs) at geometry `r`.
    pub fn eval_element(&self, phase: TensorKind, key: Key4, r: f64) -> Result<f64> {
        let kernel = self.kernel(phase)?;
        let (g1, g2) = gamma_pattern(phase);
        let [p, q, rr, s] = key;
        let phi_p = self.orbital_forward(p, r, g1)?;
        let phi_q = self.orbital_forward(q, r, g2)?;
        let phi_r = self.orbital_forward(rr, r, g1)?;
        let phi_s = self.orbital_forward(s, r, g2)?;
        let u: Vec<f64> = phi_p.iter().zip(&phi_q).map(|(a, b)| a * b).collect();
        let v: Vec<f64> = phi_r.iter().zip(&phi_s).map(|(a, b)| a * b).collect();
        Ok(kernel.bilinear(&u, &v))
    }

    /// Full tensor at geometry `r`. Retained canonical keys are evaluated
    /// (with per-pair feature and kernel-product caching) and replicated over
    /// their orbits, so the output satisfies its symmetry class bitwise;
    /// masked entries are exactly zero and never evaluated.
    pub fn eval_tensor(
        &self,
        phase: TensorKind,
        r: f64,
        mask: &IndexMask,
    ) -> Result<InteractionTensor2B> {
        let n = self.config.n_act;
        if mask.n_act() != n {
            return Err(Error::ShapeMismatch(format!(
                "mask n_act {} vs model n_act {}",
                mask.n_act(),
                n
            )));
        }
        let kernel = self.kernel(phase)?;
        let ell = self.config.ell;
        let (g1, g2) = gamma_pattern(phase);

        let mut phi_g1: Vec<Option<Vec<f64>>> = vec![None; n];
        let mut phi_g2: Vec<Option<Vec<f64>>> = vec![None; n];
        // pair_vec[a*n + b] = phi(a, g1) . phi(b, g2); kernel_vec = W pair_vec.
        let mut pair_vec: Vec<Option<Vec<f64>>> = vec![None; n * n];
        let mut kernel_vec: Vec<Option<Vec<f64>>> = vec![None; n * n];

        let out_class = match phase {
            TensorKind::Bare => Symmetry::Eightfold,
            TensorKind::Effective => Symmetry::Fourfold,
        };

        // Every EIGHTFOLD-canonical key is FOURFOLD-canonical (the fourfold
        // images are a subset), so mask lookups below always succeed.
        let mut err: Option<Error> = None;
        let tensor = InteractionTensor2B::from_canonical(n, out_class, phase, r, |key: Key4| {
            if err.is_some() {
                return 0.0;
            }
            match mask.is_masked(key) {
                Some(true) => 0.0,
                None => {
                    err = Some(Error::InvalidConfig(format!(
                        "key {key:?} missing from mask canonical unit"
                    )));
                    0.0
                }
                Some(false) => {
                    let [p, q, rr, s] = key;
                    let ensure_phi = |slot: &mut Vec<Option<Vec<f64>>>, i: usize, g: u8| {
                        if slot[i].is_none() {
                            let x = encode_input(i, r, g, n).expect("index in range");
                            slot[i] = Some(self.net.forward(&x));
                        }
                    };
                    ensure_phi(&mut phi_g1, p, g1);
                    ensure_phi(&mut phi_g2, q, g2);
                    ensure_phi(&mut phi_g1, rr, g1);
                    ensure_phi(&mut phi_g2, s, g2);
                    let make_pair = |a: &[f64], b: &[f64]| -> Vec<f64> {
                        a.iter().zip(b).map(|(x, y)| x * y).collect()
                    };
                    if pair_vec[p * n + q].is_none() {
                        pair_vec[p * n + q] = Some(make_pair(
                            phi_g1[p].as_ref().unwrap(),
                            phi_g2[q].as_ref().unwrap(),
                        ));
                    }
                    if pair_vec[rr * n + s].is_none() {
                        pair_vec[rr * n + s] = Some(make_pair(
                            phi_g1[rr].as_ref().unwrap(),
                            phi_g2[s].as_ref().unwrap(),
                        ));
                    }
                    if kernel_vec[rr * n + s].is_none() {
                        let mut wv = vec![0.0; ell];
                        kernel.apply(pair_vec[rr * n + s].as_ref().unwrap(), &mut wv);
                        kernel_vec[rr * n + s] = Some(wv);
                    }
                    dot(
                        pair_vec[p * n + q].as_ref().unwrap(),
                        kernel_vec[rr * n + s].as_ref().unwrap(),
                    )
                }
            }
        })?;
        match err {
            Some(e) => Err(e),
            None => Ok(tensor),
        }
    }
}
