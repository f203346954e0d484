//! Seeded random objects: Haar unitaries, isometries, and density matrices.
//!
//! All randomness flows from a [`ChaCha20Rng`] seeded explicitly, so every
//! sample is reproducible from its seed.
//!
//! ```
//! use mskit::random::{haar_unitary, seeded_rng};
//!
//! let mut rng = seeded_rng(7);
//! let u = haar_unitary(3, &mut rng);
//! let residual = (u.adjoint() * &u - nalgebra::DMatrix::identity(3, 3)).camax();
//! assert!(residual < 1e-12);
//! ```

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

/// The generator used throughout the crate.
pub fn seeded_rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// A `rows × cols` matrix of i.i.d. standard complex Gaussians.
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<Complex64> {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    })
}

/// A Haar-random isometry `ℂ^cols → ℂ^rows` (`rows ≥ cols`): the Q factor of
/// a Ginibre matrix with the phases of R's diagonal absorbed.
pub fn haar_isometry<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<Complex64> {
    assert!(rows >= cols, "an isometry needs rows ≥ cols");
    let qr = ginibre(rows, cols, rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    for c in 0..cols {
        let diag = r[(c, c)];
        let phase = if diag.norm() > 0.0 { diag / diag.norm() } else { Complex64::new(1.0, 0.0) };
        for x in q.column_mut(c).iter_mut() {
            *x *= phase;
        }
    }
    q
}

/// A Haar-random `d × d` unitary.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<Complex64> {
    haar_isometry(d, d, rng)
}

/// A random full-rank density matrix `GG†/tr(GG†)` of size `dim`.
pub fn random_density_matrix<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<Complex64> {
    let g = ginibre(dim, dim, rng);
    let rho = &g * g.adjoint();
    let tr = rho.trace();
    rho / tr
}
