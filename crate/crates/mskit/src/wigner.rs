//! Reduced Wigner coefficients for tensoring with the dual defining irrep.
//!
//! In shifted coordinates `s_k = μ_k − k` and `s′_k = μ′_k − k`, the coefficient
//! `T̂(μ, j, μ′, j′)` connects the source `(μ, μ′)` to the target
//! `(μ − e_j, μ′ − e_{j′})`, where `j′ = 0` leaves `μ′` unchanged:
//!
//! * `j′ = 0`: `|∏_{k<d}(s′_k − s_j) / ∏_{k≠j}(s_k − s_j)|^{1/2}`;
//! * `j′ ≥ 1`: `S(j,j′)·|∏_{k≠j′}(s′_k − s_j)/(s′_k − s′_{j′} + 1) ·
//!   ∏_{k≠j}(s_k − s′_{j′} + 1)/(s_k − s_j)|^{1/2}` with `S = +1` iff `j ≤ j′`.
//!
//! For a fixed `μ` and target second row `ν′` the coefficients form a square
//! orthogonal matrix, rows `j` (targets `μ − e_j` that `ν′` interlaces) and
//! columns `j′` (sources `μ′ = ν′ + e_{j′}` interlacing `μ`).
//!
//! ```
//! use mskit::staircase::Staircase;
//! use mskit::wigner::dual_reduced_wigner;
//!
//! let mu = Staircase::new(vec![2, 0]).unwrap();
//! assert_eq!(dual_reduced_wigner(&mu, 2, &[2], 0).unwrap(), 1.0);
//! assert_eq!(dual_reduced_wigner(&mu, 1, &[2], 0).unwrap(), 0.0);
//! ```

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::staircase::Staircase;

fn is_decreasing(v: &[i64]) -> bool {
    v.windows(2).all(|w| w[0] >= w[1])
}

/// Whether the length-`(k−1)` tuple `low` interlaces the length-`k` tuple `high`.
fn interlaces_slice(low: &[i64], high: &[i64]) -> bool {
    low.len() + 1 == high.len() && low.iter().enumerate().all(|(i, &x)| high[i] >= x && x >= high[i + 1])
}

/// Exact ratio `num/den` of integer products, falling back to floating point on overflow.
struct Ratio {
    num: Option<i128>,
    den: Option<i128>,
    approx: f64,
}

impl Ratio {
    fn one() -> Self {
        Ratio { num: Some(1), den: Some(1), approx: 1.0 }
    }

    fn mul(&mut self, num: i64, den: i64) {
        self.num = self.num.and_then(|x| x.checked_mul(num as i128));
        self.den = self.den.and_then(|x| x.checked_mul(den as i128));
        self.approx *= num as f64 / den as f64;
    }

    fn abs_sqrt(&self) -> f64 {
        match (self.num, self.den) {
            (Some(n), Some(d)) => (n.unsigned_abs() as f64 / d.unsigned_abs() as f64).sqrt(),
            _ => self.approx.abs().sqrt(),
        }
    }

    fn is_zero(&self) -> bool {
        self.num == Some(0) || self.approx == 0.0
    }
}

/// The unmasked coefficient formula.
///
/// Indices `j ∈ 1..=d` and `j′ ∈ 0..d` are 1-based like the staircase entries.
/// No validity check is made on the target, so the result may be non-finite
/// when the target second row `μ′ − e_{j′}` is not weakly decreasing.
pub fn raw_reduced_wigner(mu: &[i64], j: usize, mu_prime: &[i64], jp: usize) -> f64 {
    let d = mu.len();
    let s: Vec<i64> = mu.iter().enumerate().map(|(k, &x)| x - (k as i64 + 1)).collect();
    let sp: Vec<i64> = mu_prime.iter().enumerate().map(|(k, &x)| x - (k as i64 + 1)).collect();
    let sj = s[j - 1];
    let mut r = Ratio::one();
    if jp == 0 {
        for &x in &sp {
            r.mul(x - sj, 1);
        }
        for (k, &x) in s.iter().enumerate() {
            if k != j - 1 {
                r.mul(1, x - sj);
            }
        }
        return r.abs_sqrt();
    }
    let spj = sp[jp - 1];
    for (k, &x) in sp.iter().enumerate() {
        if k != jp - 1 {
            r.mul(x - sj, x - spj + 1);
        }
    }
    for (k, &x) in s.iter().enumerate().take(d) {
        if k != j - 1 {
            r.mul(x - spj + 1, x - sj);
        }
    }
    let sign = if j <= jp { 1.0 } else { -1.0 };
    if r.is_zero() {
        return 0.0;
    }
    sign * r.abs_sqrt()
}

fn target_is_valid(mu: &[i64], j: usize, mu_prime: &[i64], jp: usize) -> bool {
    let mut g = mu.to_vec();
    g[j - 1] -= 1;
    let mut nu = mu_prime.to_vec();
    if jp > 0 {
        nu[jp - 1] -= 1;
    }
    is_decreasing(&g) && is_decreasing(&nu) && interlaces_slice(&nu, &g)
}

/// The reduced Wigner coefficient `T̂(μ, j, μ′, j′)`, masked to zero whenever the
/// target `(μ − e_j, μ′ − e_{j′})` is not a valid pair of interlacing staircases.
///
/// `mu_prime` must interlace `μ`; it is empty when `d = 1`.
pub fn dual_reduced_wigner(mu: &Staircase, j: usize, mu_prime: &[i64], jp: usize) -> Result<f64> {
    let d = mu.d();
    if mu_prime.len() + 1 != d {
        return Err(Error::LengthMismatch { expected: d - 1, found: mu_prime.len() });
    }
    if !interlaces_slice(mu_prime, mu.entries()) {
        return Err(Error::Precondition(format!("{mu_prime:?} does not interlace {mu}")));
    }
    if !(1..=d).contains(&j) {
        return Err(Error::IndexOutOfRange { index: j, size: d + 1 });
    }
    if jp >= d {
        return Err(Error::IndexOutOfRange { index: jp, size: d });
    }
    if !target_is_valid(mu.entries(), j, mu_prime, jp) {
        return Ok(0.0);
    }
    Ok(raw_reduced_wigner(mu.entries(), j, mu_prime, jp))
}

/// The square orthogonal block of `T̂` for a fixed `μ` and target second row `ν′`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedWignerBlock {
    /// The source staircase `μ`.
    pub mu: Staircase,
    /// The target second row `ν′` (length `d − 1`, empty when `d = 1`).
    pub nu_prime: Vec<i64>,
    /// Row labels `j`: the target is `μ − e_j`.
    pub rows: Vec<usize>,
    /// Column labels `j′`: the source second row is `ν′ + e_{j′}` (`ν′` itself for `j′ = 0`).
    pub cols: Vec<usize>,
    /// Coefficients, `matrix[(r, c)] = T̂(μ, rows[r], ν′ + e_{cols[c]}, cols[c])`.
    pub matrix: DMatrix<f64>,
}

impl ReducedWignerBlock {
    /// `‖MᵀM − I‖_max`, or infinity if the block is not square.
    pub fn orthogonality_residual(&self) -> f64 {
        if self.matrix.nrows() != self.matrix.ncols() {
            return f64::INFINITY;
        }
        let n = self.matrix.nrows();
        (self.matrix.transpose() * &self.matrix - DMatrix::identity(n, n)).amax()
    }
}

/// Assembles the block of `T̂` with source `μ` and target second row `ν′`.
///
/// `ν′` must be a weakly decreasing tuple of length `d − 1`; the block is empty
/// when no valid source or target exists.
pub fn reduced_wigner_operator(mu: &Staircase, nu_prime: &[i64]) -> Result<ReducedWignerBlock> {
    let d = mu.d();
    if nu_prime.len() + 1 != d {
        return Err(Error::LengthMismatch { expected: d - 1, found: nu_prime.len() });
    }
    if !is_decreasing(nu_prime) {
        return Err(Error::InvalidStaircase(nu_prime.to_vec()));
    }
    let m = mu.entries();
    let rows: Vec<usize> = (1..=d)
        .filter(|&j| {
            let mut g = m.to_vec();
            g[j - 1] -= 1;
            is_decreasing(&g) && interlaces_slice(nu_prime, &g)
        })
        .collect();
    let sources: Vec<(usize, Vec<i64>)> = (0..d)
        .filter_map(|jp| {
            let mut src = nu_prime.to_vec();
            if jp > 0 {
                src[jp - 1] += 1;
            }
            (is_decreasing(&src) && interlaces_slice(&src, m)).then_some((jp, src))
        })
        .collect();
    let mut matrix = DMatrix::zeros(rows.len(), sources.len());
    for (r, &j) in rows.iter().enumerate() {
        for (c, (jp, src)) in sources.iter().enumerate() {
            matrix[(r, c)] = dual_reduced_wigner(mu, j, src, *jp)?;
        }
    }
    Ok(ReducedWignerBlock {
        mu: mu.clone(),
        nu_prime: nu_prime.to_vec(),
        rows,
        cols: sources.into_iter().map(|(jp, _)| jp).collect(),
        matrix,
    })
}

/// Every target second row `ν′` with a non-empty block for `μ`, ascending.
pub fn target_second_rows(mu: &Staircase) -> Vec<Vec<i64>> {
    let d = mu.d();
    if d == 1 {
        return vec![Vec::new()];
    }
    let mut out: Vec<Vec<i64>> =
        mu.remove_box_set().iter().flat_map(|g| g.branch_down()).map(|s| s.entries().to_vec()).collect();
    out.sort();
    out.dedup();
    out
}
