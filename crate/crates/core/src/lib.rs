//! Hybrid quantum-classical network intrusion detection.
//!
//! Everything runs on a built-in dense statevector simulator ([`qsim`]):
//!
//! - [`encode`]: min-max scaling, product-RY angle encoding and exact
//!   amplitude state preparation.
//! - [`qwpt`]: quantum Haar wavelet packet transform, its classical oracle,
//!   sub-band energies and wavelet packet energy entropy.
//! - [`behave`]: normalized entropy, chi-square goodness-of-fit decisions,
//!   descriptive statistics.
//! - [`qkernel`]: ZZ / phase / trainable feature maps and fidelity kernels,
//!   exact or estimated by compute-uncompute sampling under Pauli noise.
//! - [`svm`]: SMO dual solver, one-class SVM, weighted hinge loss, metrics.
//! - [`spsa`]: SPSA minimizer used to train kernel parameters.
//! - [`pipeline`]: data loading, PCA, splitting and experiment sweeps.
//!
//! Qubit 0 is the least-significant bit of a basis-state index throughout.

pub mod behave;
pub mod encode;
mod error;
pub mod linalg;
pub mod pipeline;
pub mod qkernel;
pub mod qsim;
pub mod qwpt;
pub mod spsa;
pub mod svm;

pub use error::{Error, Result};

/// Deterministic 64-bit mixer used to derive per-task seeds from a global seed.
pub fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(splitmix(splitmix(seed) ^ a.wrapping_mul(0xD6E8_FEB8_6659_FD93)) ^ b)
}
