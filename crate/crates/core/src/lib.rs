//! Learning effective two-body interaction tensors.
//!
//! An effective (downfolded) interaction tensor is predicted from per-orbital
//! feature vectors contracted through a geometry-independent symmetric
//! kernel: bare tensors share one kernel, effective tensors another, and the
//! orbital network is shared between both phases. The crate covers the whole
//! workflow around that ansatz:
//!
//! - [`tensor`], [`symmetry`], [`mask`]: tensor containers, index-permutation
//!   classes, and screening of structurally zero entries;
//! - [`model`]: the factorized ansatz and its evaluation;
//! - [`train`], [`checkpoint`]: two-phase training with exact gradients,
//!   deterministic schedules, and lossless resume;
//! - [`ffm`]: a random-Fourier-feature regression baseline on identical
//!   sample streams;
//! - [`analysis`]: prediction metrics and kernel screening analysis
//!   (congruence diagonality, ratio profiles, tangent fits);
//! - [`energy`]: exact active-space ground energies and correlation
//!   decompositions from predicted or reference tensors;
//! - [`synth`]: a deterministic synthetic benchmark with tunable screening;
//! - [`exchange`], [`linalg`], [`error`]: the file format, the numerical
//!   primitives, and the error type.

// Matrix kernels below index in lockstep across several arrays; explicit
// loops read clearer there than iterator chains.
#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod checkpoint;
pub mod energy;
pub mod error;
pub mod exchange;
pub mod ffm;
pub mod linalg;
pub mod mask;
pub mod model;
pub mod symmetry;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use mask::{build_zero_mask, IndexMask, MASK_EPS};
pub use model::{init_params, KernelMatrix, Mlp, ModelConfig, VNetModel};
pub use symmetry::{canonical_key, canonical_unit, symmetry_orbit, Key4, Symmetry};
pub use tensor::{
    GeometryEntry, GeometrySeries, InteractionTensor2B, OneBodyTensor, ScalarTerm, TensorKind,
    SYMMETRY_TOL,
};
pub use train::{finetune, pretrain, TrainConfig, Trainer};
