//! Autonomous quantum error correction of spin-oscillator hybrid qubits.
//!
//! The crate builds the open-system dynamics of a spin-1/2 coupled to a
//! truncated bosonic mode (optionally a second, lossy bath mode), evolves
//! density matrices under the resulting Lindbladians and extracts the
//! quantities of interest: logical error rates, concatenated repetition-code
//! error probabilities and displacement-sensing bounds.
//!
//! All superoperators use column stacking, `vec(A ρ B) = (Bᵀ ⊗ A) vec(ρ)`.
//!
//! The crate is `no_std` compatible (it needs `alloc`). The default `std`
//! feature only switches on runtime SIMD dispatch inside the dense kernels.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![forbid(unsafe_code)]
// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analysis;
pub mod code;
pub mod concat;
pub mod error;
pub mod liouville;
pub mod math;
pub mod metrology;
pub mod propagate;
pub mod qspace;

mod linalg;

pub use error::{Error, Result};
pub use faer::Mat;
pub use num_complex::Complex64 as C64;

pub use linalg::{expm, hermitian_eigen, kron, trace_distance};
