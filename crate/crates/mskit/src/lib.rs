//! Construction and verification of the mixed Schur transform.
//!
//! The mixed Schur transform is the unitary that simultaneously block-diagonalizes
//! `U^⊗n ⊗ Ū^⊗m` (for every `U ∈ U(d)`) and the partially transposed permutation
//! operators, labelling its output basis by an irrep (a [`staircase::Staircase`]),
//! a Gelfand–Tsetlin pattern, and a path in the Bratteli diagram of the walled
//! Brauer tower. This crate builds the transform explicitly from Clebsch–Gordan
//! cascades, verifies it, and uses it to analyse unitary-equivariant channels.
//!
//! # Modules
//!
//! - [`staircase`]: irrep labels, box moves, interlacing, Weyl dimension.
//! - [`gelfand`]: Gelfand–Tsetlin patterns and their canonical indexing.
//! - [`bratteli`]: the Bratteli diagram, up-down tableaux, and the irrep census.
//! - [`brauer`]: walled Brauer diagrams and their matrix representation.
//! - [`wigner`]: reduced Wigner coefficients for the dual defining irrep.
//! - [`cg`]: dual and defining Clebsch–Gordan transforms.
//! - [`schur`]: the cascaded transform, its verification battery, and amplitudes.
//! - [`channels`]: Choi matrices, twirling, and teleportation-based simulation.
//! - [`io`]: the plain-text matrix file format.
//!
//! # Quick start
//!
//! ```
//! use mskit::bratteli::FactorOrder;
//! use mskit::schur::SchurTransform;
//! use mskit::Limits;
//!
//! let w = SchurTransform::build(2, 1, 2, &FactorOrder::standard(2, 1), &Limits::default()).unwrap();
//! assert_eq!(w.dim(), 8);
//! assert!(w.unitarity_residual() < 1e-12);
//! ```

pub mod bratteli;
pub mod brauer;
pub mod cg;
pub mod channels;
pub mod error;
pub mod gelfand;
pub mod io;
pub mod linalg;
pub mod random;
pub mod schur;
pub mod staircase;
pub mod wigner;

pub use error::{Error, Result};

/// Default cap on the tensor-space dimension `d^(n+m)`.
pub const DEFAULT_DIM_CAP: usize = 4096;

/// Default cap on the size `dim(γ)·d` of a single Clebsch–Gordan transform.
pub const DEFAULT_CG_CAP: usize = 65536;

/// Size limits guarding dense constructions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    /// Largest allowed tensor-space dimension `d^(n+m)`.
    pub dim_cap: usize,
    /// Largest allowed Clebsch–Gordan transform size `dim(γ)·d`.
    pub cg_cap: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { dim_cap: DEFAULT_DIM_CAP, cg_cap: DEFAULT_CG_CAP }
    }
}

impl Limits {
    /// Defaults, with the dimension cap overridden by `MSKIT_CAP` when set.
    pub fn from_env() -> Result<Self> {
        let mut limits = Limits::default();
        if let Ok(raw) = std::env::var("MSKIT_CAP") {
            limits.dim_cap = raw.trim().parse().map_err(|e| Error::Parse(format!("MSKIT_CAP={raw:?}: {e}")))?;
        }
        Ok(limits)
    }

    /// Returns `d^k` if it is within the dimension cap.
    pub fn check_tensor_dim(&self, d: usize, k: usize) -> Result<usize> {
        let dim = (d as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
        if dim > self.dim_cap as u128 {
            return Err(Error::CapExceeded { dim, cap: self.dim_cap });
        }
        Ok(dim as usize)
    }

    /// Returns `size` if it is within the Clebsch–Gordan cap.
    pub fn check_cg(&self, size: usize) -> Result<usize> {
        if size > self.cg_cap {
            return Err(Error::CapExceeded { dim: size as u128, cap: self.cg_cap });
        }
        Ok(size)
    }
}
