//! Unitary-equivariant channels through their Choi matrices.
//!
//! A channel `N` from `m` qudits to `n` qudits is stored as its normalized Choi
//! matrix `J = (id ⊗ N)(|Ω⟩⟨Ω|)` on the registers (input ⊗ output), with
//! `|Ω⟩ = d^{−m/2} Σ_i |i⟩|i⟩`. The channel is equivariant exactly when `J`
//! commutes with `Ū^⊗m ⊗ U^⊗n` for every `U`, which puts `J` in the same
//! block form as the mixed Schur transform with the dual factors first.
//!
//! Besides validation and Schur-basis analysis, the module simulates the
//! teleportation-based implementation of `m = 1` equivariant channels: a Bell
//! measurement over the Weyl operators followed by the correction
//! `W_{a,b}^{†⊗n}` reproduces `N(ρ)` deterministically.
//!
//! ```
//! use mskit::channels::{apply_direct, ChoiMatrix};
//! use nalgebra::DMatrix;
//! use num_complex::Complex64;
//!
//! let id = ChoiMatrix::identity(2);
//! let rho = DMatrix::from_row_slice(2, 2, &[
//!     Complex64::new(0.75, 0.0), Complex64::new(0.1, 0.2),
//!     Complex64::new(0.1, -0.2), Complex64::new(0.25, 0.0),
//! ]);
//! let out = apply_direct(&id, &rho).unwrap();
//! assert!((out - &rho).camax() < 1e-15);
//! ```

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::Ratio;
use rand::Rng;

use crate::bratteli::FactorOrder;
use crate::error::{Error, Result};
use crate::linalg::{kron_all, max_abs, max_abs_diff, min_eigenvalue, partial_trace, ONE, ZERO};
use crate::random::{haar_isometry, haar_unitary};
use crate::schur::SchurTransform;
use crate::staircase::Staircase;

/// Tolerance on the commutator residual used by the teleportation precondition.
pub const TELEPORT_EQUIVARIANCE_TOL: f64 = 1e-8;

/// A normalized Choi matrix on (input ⊗ output) registers.
#[derive(Clone, Debug, PartialEq)]
pub struct ChoiMatrix {
    m_in: usize,
    n_out: usize,
    d: usize,
    matrix: DMatrix<Complex64>,
}

impl ChoiMatrix {
    /// Wraps a `d^(m+n)`-dimensional matrix; only the shape is checked.
    pub fn new(m_in: usize, n_out: usize, d: usize, matrix: DMatrix<Complex64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::Precondition("local dimension must be positive".into()));
        }
        let dim =
            d.checked_pow((m_in + n_out) as u32).ok_or_else(|| Error::ShapeMismatch("dimension overflows".into()))?;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::ShapeMismatch(format!(
                "Choi matrix is {}×{}, expected {dim}×{dim} for m={m_in}, n={n_out}, d={d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(ChoiMatrix { m_in, n_out, d, matrix })
    }

    /// The Choi matrix of a linear map given by its action on matrix units.
    pub fn from_map(
        m_in: usize,
        n_out: usize,
        d: usize,
        map: impl Fn(&DMatrix<Complex64>) -> DMatrix<Complex64>,
    ) -> Result<Self> {
        let din = d.pow(m_in as u32);
        let dout = d.pow(n_out as u32);
        let scale = Complex64::new(1.0 / din as f64, 0.0);
        let mut j = DMatrix::zeros(din * dout, din * dout);
        for a in 0..din {
            for b in 0..din {
                let mut unit = DMatrix::zeros(din, din);
                unit[(a, b)] = ONE;
                let out = map(&unit);
                if out.nrows() != dout || out.ncols() != dout {
                    return Err(Error::ShapeMismatch(format!(
                        "map output is {}×{}, expected {dout}×{dout}",
                        out.nrows(),
                        out.ncols()
                    )));
                }
                j.view_mut((a * dout, b * dout), (dout, dout)).copy_from(&(out * scale));
            }
        }
        ChoiMatrix::new(m_in, n_out, d, j)
    }

    /// The identity channel on one qudit: the maximally entangled projector.
    pub fn identity(d: usize) -> Self {
        ChoiMatrix::from_map(1, 1, d, |x| x.clone()).expect("identity map has matching shapes")
    }

    /// The completely depolarizing channel, `J = I / d^(m+n)`.
    pub fn depolarizing(m_in: usize, n_out: usize, d: usize) -> Self {
        let dim = d.pow((m_in + n_out) as u32);
        let j = DMatrix::identity(dim, dim) * Complex64::new(1.0 / dim as f64, 0.0);
        ChoiMatrix { m_in, n_out, d, matrix: j }
    }

    /// The Choi matrix of a Kraus-free unitary channel `ρ ↦ VρV†` on one qudit.
    pub fn unitary(v: &DMatrix<Complex64>) -> Result<Self> {
        if !v.is_square() {
            return Err(Error::ShapeMismatch("unitary channel needs a square matrix".into()));
        }
        ChoiMatrix::from_map(1, 1, v.nrows(), |x| v * x * v.adjoint())
    }

    /// Number of input qudits.
    pub fn m_in(&self) -> usize {
        self.m_in
    }

    /// Number of output qudits.
    pub fn n_out(&self) -> usize {
        self.n_out
    }

    /// Local dimension.
    pub fn d(&self) -> usize {
        self.d
    }

    /// `d^m`.
    pub fn input_dim(&self) -> usize {
        self.d.pow(self.m_in as u32)
    }

    /// `d^n`.
    pub fn output_dim(&self) -> usize {
        self.d.pow(self.n_out as u32)
    }

    /// The normalized matrix `J`.
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// Consumes the wrapper.
    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    /// The unnormalized Choi matrix `J̃ = d^m · J`.
    pub fn unnormalized(&self) -> DMatrix<Complex64> {
        &self.matrix * Complex64::new(self.input_dim() as f64, 0.0)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.matrix)
    }

    /// `‖J − J†‖_max`.
    pub fn hermiticity_residual(&self) -> f64 {
        max_abs_diff(&self.matrix, &self.matrix.adjoint())
    }

    /// `‖Tr_out J − I/d^m‖_max`; zero exactly for trace-preserving maps.
    pub fn trace_preservation_residual(&self) -> f64 {
        let din = self.input_dim();
        let marginal = partial_trace(&self.matrix, &[din, self.output_dim()], &[true, false]);
        max_abs_diff(&marginal, &(DMatrix::identity(din, din) * Complex64::new(1.0 / din as f64, 0.0)))
    }

    /// Completely positive (PSD and Hermitian) within `tol`.
    pub fn is_cp(&self, tol: f64) -> bool {
        self.hermiticity_residual() <= tol && self.min_eigenvalue() >= -tol
    }

    /// Completely positive and trace preserving within `tol`.
    pub fn is_cptp(&self, tol: f64) -> bool {
        self.is_cp(tol) && self.trace_preservation_residual() <= tol
    }

    /// Total tensor order and factor order of the symmetry `Ū^⊗m ⊗ U^⊗n`.
    pub fn factor_order(&self) -> FactorOrder {
        FactorOrder::dual_first(self.n_out, self.m_in)
    }
}

/// `Ū^⊗m ⊗ U^⊗n`, the symmetry an equivariant Choi matrix commutes with.
pub fn symmetry_operator(u: &DMatrix<Complex64>, m: usize, n: usize) -> DMatrix<Complex64> {
    let ubar = u.conjugate();
    let mut ops = vec![ubar; m];
    ops.extend(std::iter::repeat_n(u.clone(), n));
    if ops.is_empty() {
        return DMatrix::identity(1, 1);
    }
    kron_all(&ops)
}

/// Outcome of a randomized equivariance test.
#[derive(Clone, Debug, PartialEq)]
pub struct EquivarianceReport {
    /// Whether every trial stayed within tolerance.
    pub equivariant: bool,
    /// Largest `‖[J, Ū^⊗m ⊗ U^⊗n]‖_max` seen.
    pub max_residual: f64,
}

/// Commutes `J` with `Ū^⊗m ⊗ U^⊗n` for `trials` Haar-random `U`.
pub fn is_equivariant<R: Rng + ?Sized>(j: &ChoiMatrix, trials: usize, tol: f64, rng: &mut R) -> EquivarianceReport {
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let u = haar_unitary(j.d, rng);
        let r = symmetry_operator(&u, j.m_in, j.n_out);
        worst = worst.max(max_abs_diff(&(&j.matrix * &r), &(&r * &j.matrix)));
    }
    EquivarianceReport { equivariant: worst <= tol, max_residual: worst }
}

/// Deterministic equivariance residual: the commutator of `J` with the
/// infinitesimal generators `Σ_duals (−Hᵀ) + Σ_defining H` over a basis of
/// Hermitian `H`. Since `U(d)` is connected this vanishes exactly for
/// equivariant `J`.
pub fn generator_residual(j: &ChoiMatrix) -> f64 {
    let d = j.d;
    let k = j.m_in + j.n_out;
    let dim = j.matrix.nrows();
    let mut worst = 0.0f64;
    for h in hermitian_basis(d) {
        let mut gen = DMatrix::<Complex64>::zeros(dim, dim);
        for site in 0..k {
            let local = if site < j.m_in { -h.transpose() } else { h.clone() };
            let mut ops = vec![DMatrix::<Complex64>::identity(d, d); k];
            ops[site] = local;
            gen += kron_all(&ops);
        }
        worst = worst.max(max_abs_diff(&(&j.matrix * &gen), &(&gen * &j.matrix)));
    }
    worst
}

fn hermitian_basis(d: usize) -> Vec<DMatrix<Complex64>> {
    let mut basis = Vec::with_capacity(d * d);
    for a in 0..d {
        for b in a..d {
            let mut re = DMatrix::zeros(d, d);
            re[(a, b)] = ONE;
            re[(b, a)] = ONE;
            basis.push(re);
            if a != b {
                let mut im = DMatrix::zeros(d, d);
                im[(a, b)] = Complex64::new(0.0, 1.0);
                im[(b, a)] = Complex64::new(0.0, -1.0);
                basis.push(im);
            }
        }
    }
    basis
}

/// The Schur-basis form of a Choi matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ChoiSchurReport {
    /// `W J W†`.
    pub transformed: DMatrix<Complex64>,
    /// Largest entry outside the diagonal `γ` blocks.
    pub off_block_residual: f64,
    /// Largest deviation inside a `γ` block from `I_{dim γ} ⊗ X_γ`.
    pub structure_residual: f64,
    /// The multiplicity-space matrices `X_γ` (averaged over the GT index).
    pub blocks: Vec<(Staircase, DMatrix<Complex64>)>,
}

impl ChoiSchurReport {
    /// The larger of the two residuals.
    pub fn max_residual(&self) -> f64 {
        self.off_block_residual.max(self.structure_residual)
    }

    /// `X_γ` for a given irrep.
    pub fn block(&self, gamma: &Staircase) -> Option<&DMatrix<Complex64>> {
        self.blocks.iter().find(|(g, _)| g == gamma).map(|(_, x)| x)
    }
}

fn check_transform_for(j: &ChoiMatrix, w: &SchurTransform) -> Result<()> {
    if w.d() != j.d || w.n() != j.n_out || w.m() != j.m_in {
        return Err(Error::ShapeMismatch(format!(
            "transform for (n={}, m={}, d={}) cannot analyse a Choi matrix with n={}, m={}, d={}",
            w.n(),
            w.m(),
            w.d(),
            j.n_out,
            j.m_in,
            j.d
        )));
    }
    if *w.order() != j.factor_order() {
        return Err(Error::ShapeMismatch(format!(
            "transform factor order {} must place the dual factors first ({})",
            w.order(),
            j.factor_order()
        )));
    }
    Ok(())
}

/// Expresses `J` in the mixed Schur basis and measures its deviation from
/// `⊕_γ I_{dim γ} ⊗ X_γ`.
pub fn choi_to_schur(j: &ChoiMatrix, w: &SchurTransform) -> Result<ChoiSchurReport> {
    check_transform_for(j, w)?;
    let wd = crate::linalg::complexify(&w.to_dense());
    let x = &wd * &j.matrix * wd.transpose();
    let mut off = 0.0f64;
    let mut structure = 0.0f64;
    let mut blocks = Vec::with_capacity(w.blocks().len());
    for ba in w.blocks() {
        let rows = ba.offset..ba.offset + ba.dim * ba.mult;
        for bb in w.blocks() {
            if bb.gamma == ba.gamma {
                continue;
            }
            for r in rows.clone() {
                for c in bb.offset..bb.offset + bb.dim * bb.mult {
                    off = off.max(x[(r, c)].norm());
                }
            }
        }
        let avg = multiplicity_average(&x, ba);
        for q in 0..ba.dim {
            for qq in 0..ba.dim {
                for p in 0..ba.mult {
                    for pp in 0..ba.mult {
                        let expect = if q == qq { avg[(p, pp)] } else { ZERO };
                        structure = structure.max((x[(ba.row(q, p), ba.row(qq, pp))] - expect).norm());
                    }
                }
            }
        }
        blocks.push((ba.gamma.clone(), avg));
    }
    Ok(ChoiSchurReport { transformed: x, off_block_residual: off, structure_residual: structure, blocks })
}

/// `(1/dim γ) Σ_q X[(q,p), (q,p')]`.
fn multiplicity_average(x: &DMatrix<Complex64>, blk: &crate::schur::IrrepBlock) -> DMatrix<Complex64> {
    let scale = Complex64::new(1.0 / blk.dim as f64, 0.0);
    DMatrix::from_fn(blk.mult, blk.mult, |p, pp| {
        (0..blk.dim).map(|q| x[(blk.row(q, p), blk.row(q, pp))]).sum::<Complex64>() * scale
    })
}

/// The exact projection onto the commutant: in the Schur basis, drop the
/// off-`γ` blocks and replace each block by `I_{dim γ} ⊗ X_γ`.
pub fn twirl(j: &ChoiMatrix, w: &SchurTransform) -> Result<ChoiMatrix> {
    check_transform_for(j, w)?;
    let wd = crate::linalg::complexify(&w.to_dense());
    let x = &wd * &j.matrix * wd.transpose();
    let dim = x.nrows();
    let mut y = DMatrix::<Complex64>::zeros(dim, dim);
    for blk in w.blocks() {
        let avg = multiplicity_average(&x, blk);
        for q in 0..blk.dim {
            for p in 0..blk.mult {
                for pp in 0..blk.mult {
                    y[(blk.row(q, p), blk.row(q, pp))] = avg[(p, pp)];
                }
            }
        }
    }
    let back = wd.transpose() * y * &wd;
    ChoiMatrix::new(j.m_in, j.n_out, j.d, back)
}

/// `Σ_{a,b} K[a,b] J[(a,·),(b,·)]`: contracts the input register of `J` with `K`.
fn contract_input(j: &ChoiMatrix, k: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let din = j.input_dim();
    let dout = j.output_dim();
    let mut out = DMatrix::zeros(dout, dout);
    for a in 0..din {
        for b in 0..din {
            let c = k[(a, b)];
            if c == ZERO {
                continue;
            }
            out += j.matrix.view((a * dout, b * dout), (dout, dout)) * c;
        }
    }
    out
}

fn check_state(rho: &DMatrix<Complex64>, dim: usize) -> Result<()> {
    if rho.nrows() != dim || rho.ncols() != dim {
        return Err(Error::ShapeMismatch(format!("state is {}×{}, expected {dim}×{dim}", rho.nrows(), rho.ncols())));
    }
    Ok(())
}

/// `N(ρ) = Tr_A[J̃ (ρᵀ ⊗ I)]` with `J̃ = d^m J`.
pub fn apply_direct(j: &ChoiMatrix, rho: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    check_state(rho, j.input_dim())?;
    Ok(contract_input(j, rho) * Complex64::new(j.input_dim() as f64, 0.0))
}

/// The Weyl operator `W_{a,b} = T^a P^b` with `T = Σ|j+1⟩⟨j|` and
/// `P = Σ e^{2πij/d}|j⟩⟨j|`; indices are taken mod `d`.
pub fn weyl_operator(a: usize, b: usize, d: usize) -> DMatrix<Complex64> {
    let mut w = DMatrix::zeros(d, d);
    for j in 0..d {
        let phase = 2.0 * std::f64::consts::PI * ((b * j) % d) as f64 / d as f64;
        w[((j + a) % d, j)] = Complex64::from_polar(1.0, phase);
    }
    w
}

/// Exact result of the teleportation-based implementation.
#[derive(Clone, Debug, PartialEq)]
pub struct TeleportResult {
    /// The outcome-averaged, corrected output state.
    pub output: DMatrix<Complex64>,
    /// Probability of outcome `(a, b)` at index `a·d + b`.
    pub distribution: Vec<f64>,
    /// The corrected, normalized output for each outcome (same indexing).
    pub branches: Vec<DMatrix<Complex64>>,
}

/// Simulates the teleportation protocol for an equivariant `m = 1` channel
/// over all `d²` outcomes.
///
/// Alice measures her input `ρ` together with the input half of `J` in the
/// basis `(I ⊗ W̄_{a,b})|Φ⟩`; Bob corrects the output half with
/// `W_{a,b}^{†⊗n}`. Every branch then equals `N(ρ)`.
pub fn teleport_apply(j: &ChoiMatrix, rho: &DMatrix<Complex64>) -> Result<TeleportResult> {
    check_teleport(j)?;
    let d = j.d;
    check_state(rho, d)?;
    let inv_sqrt_d = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
    let mut output = DMatrix::zeros(j.output_dim(), j.output_dim());
    let mut distribution = Vec::with_capacity(d * d);
    let mut branches = Vec::with_capacity(d * d);
    for a in 0..d {
        for b in 0..d {
            let w = weyl_operator(a, b, d);
            // Coefficients φ[r, a'] of (I ⊗ W̄)|Φ⟩ on (Alice's input, Choi input).
            let phi = w.adjoint() * inv_sqrt_d;
            let k = phi.adjoint() * rho * &phi;
            let conditional = contract_input(j, &k);
            let prob = conditional.trace().re;
            let correction = kron_all(&vec![w.adjoint(); j.n_out]);
            let corrected = &correction * conditional * correction.adjoint();
            output += &corrected;
            distribution.push(prob);
            let norm = if prob > 0.0 { Complex64::new(1.0 / prob, 0.0) } else { ZERO };
            branches.push(corrected * norm);
        }
    }
    Ok(TeleportResult { output, distribution, branches })
}

/// A sampled run of the teleportation protocol.
#[derive(Clone, Debug, PartialEq)]
pub struct TeleportSample {
    /// Outcome counts at index `a·d + b`.
    pub counts: Vec<usize>,
    /// Average of the corrected branch states over the shots.
    pub output: DMatrix<Complex64>,
}

/// Samples `shots` measurement outcomes from the exact distribution and
/// averages the corrected branch states.
pub fn teleport_sample<R: Rng + ?Sized>(
    j: &ChoiMatrix,
    rho: &DMatrix<Complex64>,
    shots: usize,
    rng: &mut R,
) -> Result<TeleportSample> {
    if shots == 0 {
        return Err(Error::Precondition("at least one shot is required".into()));
    }
    let exact = teleport_apply(j, rho)?;
    let dist = rand::distributions::WeightedIndex::new(exact.distribution.iter().map(|p| p.max(0.0)))
        .map_err(|e| Error::Precondition(format!("outcome distribution: {e}")))?;
    let mut counts = vec![0; exact.distribution.len()];
    for _ in 0..shots {
        counts[rng.sample(&dist)] += 1;
    }
    let dim = j.output_dim();
    let mut output = DMatrix::zeros(dim, dim);
    for (c, branch) in counts.iter().zip(&exact.branches) {
        output += branch * Complex64::new(*c as f64 / shots as f64, 0.0);
    }
    Ok(TeleportSample { counts, output })
}

fn check_teleport(j: &ChoiMatrix) -> Result<()> {
    if j.m_in != 1 {
        return Err(Error::Precondition(format!("teleportation needs one input qudit, the channel has {}", j.m_in)));
    }
    let scale = max_abs(&j.matrix).max(1.0);
    let residual = generator_residual(j);
    if residual > TELEPORT_EQUIVARIANCE_TOL * scale {
        return Err(Error::Precondition(format!("channel is not equivariant (generator residual {residual:e})")));
    }
    Ok(())
}

/// Success probability `(d − 1)/(2d)` of the probabilistic `m = 2` protocol.
pub fn m2_success_probability(d: usize) -> Result<Ratio<u64>> {
    if d < 2 {
        return Err(Error::Precondition(format!("the m = 2 protocol needs d ≥ 2, got {d}")));
    }
    Ok(Ratio::new(d as u64 - 1, 2 * d as u64))
}

/// The normalization `C = d³(d − 1)/2`.
pub fn m2_normalization(d: usize) -> Ratio<u64> {
    let d = d as u64;
    Ratio::new(d * d * d * (d - 1), 2)
}

/// The POVM element `M = C/(d²(d²−1)) (I + F⊗F − (F⊗I + I⊗F)/d)` on the
/// registers (input₁, input₂, Choi₁, Choi₂), `F` the swap of a pair.
pub fn m2_povm_element(d: usize) -> Result<DMatrix<f64>> {
    m2_success_probability(d)?;
    let dim = d.pow(4);
    let c = *m2_normalization(d).numer() as f64 / *m2_normalization(d).denom() as f64;
    let df = d as f64;
    let scale = c / (df * df * (df * df - 1.0));
    let digits = |x: usize| [x / (d * d * d), (x / (d * d)) % d, (x / d) % d, x % d];
    let join = |g: [usize; 4]| ((g[0] * d + g[1]) * d + g[2]) * d + g[3];
    let mut m = DMatrix::identity(dim, dim) * scale;
    for col in 0..dim {
        let g = digits(col);
        let both = join([g[1], g[0], g[3], g[2]]);
        let first = join([g[1], g[0], g[2], g[3]]);
        let second = join([g[0], g[1], g[3], g[2]]);
        m[(both, col)] += scale;
        m[(first, col)] -= scale / df;
        m[(second, col)] -= scale / df;
    }
    Ok(m)
}

/// Numerical checks of the `m = 2` construction.
#[derive(Clone, Debug, PartialEq)]
pub struct M2Report {
    /// The exact success probability.
    pub probability: Ratio<u64>,
    /// `‖M‖` from the eigendecomposition.
    pub operator_norm: f64,
    /// Smallest eigenvalue of `M` (a POVM element must be PSD).
    pub min_eigenvalue: f64,
    /// `Tr[M (ρ ⊗ I/d²)]` for the supplied two-qudit state.
    pub numeric_probability: f64,
}

/// Builds `M`, its spectrum, and the success probability against `rho`.
pub fn m2_report(d: usize, rho: &DMatrix<Complex64>) -> Result<M2Report> {
    let probability = m2_success_probability(d)?;
    check_state(rho, d * d)?;
    let m = m2_povm_element(d)?;
    let eig = m.clone().symmetric_eigen().eigenvalues;
    let operator_norm = eig.iter().fold(0.0f64, |acc, &l| acc.max(l.abs()));
    let min_eig = eig.iter().copied().fold(f64::INFINITY, f64::min);
    // Tr[M (ρ ⊗ I)] / d² = Σ_{r,r',a} M[(r,a),(r',a)] ρ[r',r] / d².
    let dd = d * d;
    let mut acc = ZERO;
    for r in 0..dd {
        for rp in 0..dd {
            let s: f64 = (0..dd).map(|a| m[(r * dd + a, rp * dd + a)]).sum();
            acc += rho[(rp, r)] * s;
        }
    }
    Ok(M2Report { probability, operator_norm, min_eigenvalue: min_eig, numeric_probability: acc.re / dd as f64 })
}

/// A random CPTP map: a Haar isometry `ℂ^{d^m} → ℂ^{d^n} ⊗ ℂ^k` followed by
/// tracing out the `k`-dimensional environment (default `k = d^(m+n)`).
pub fn random_cptp<R: Rng + ?Sized>(
    m_in: usize,
    n_out: usize,
    d: usize,
    kraus_rank: Option<usize>,
    rng: &mut R,
) -> Result<ChoiMatrix> {
    let din = d.pow(m_in as u32);
    let dout = d.pow(n_out as u32);
    let k = kraus_rank.unwrap_or(din * dout);
    if k == 0 || dout * k < din {
        return Err(Error::Precondition(format!("Kraus rank {k} cannot carry a {din}-dimensional input")));
    }
    let v = haar_isometry(dout * k, din, rng);
    // ψ[(a, x), e] = V[(x, e), a] / √(d^m); J = ψψ†.
    let scale = Complex64::new(1.0 / (din as f64).sqrt(), 0.0);
    let psi = DMatrix::from_fn(din * dout, k, |row, e| {
        let (a, x) = (row / dout, row % dout);
        v[(x * k + e, a)] * scale
    });
    ChoiMatrix::new(m_in, n_out, d, &psi * psi.adjoint())
}

/// A random equivariant CPTP map: the twirl of [`random_cptp`].
pub fn random_equivariant_cptp<R: Rng + ?Sized>(
    w: &SchurTransform,
    kraus_rank: Option<usize>,
    rng: &mut R,
) -> Result<ChoiMatrix> {
    let j = random_cptp(w.m(), w.n(), w.d(), kraus_rank, rng)?;
    twirl(&j, w)
}

fn paulis() -> [DMatrix<Complex64>; 3] {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    [
        DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]),
        DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)]),
        DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]),
    ]
}

fn kron2(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    a.kronecker(b)
}

/// The four-parameter family of 1-to-2 qubit equivariant maps, evaluated on `ρ`:
///
/// `N(ρ) = Tr ρ·(I⊗I/4 + t/2 (XX+YY+ZZ)) + Σ_P Tr(Pρ)(u/2 P⊗I + v/2 I⊗P)
///        + w ((YZ−ZY) Tr Xρ + (ZX−XZ) Tr Yρ + (XY−YX) Tr Zρ)`.
pub fn example_channel_map(t: f64, u: f64, v: f64, w: f64, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let [x, y, z] = paulis();
    let id = DMatrix::<Complex64>::identity(2, 2);
    let r = |s: f64| Complex64::new(s, 0.0);
    let tr = rho.trace();
    let mut out = (kron2(&id, &id) * r(0.25) + (kron2(&x, &x) + kron2(&y, &y) + kron2(&z, &z)) * r(t / 2.0)) * tr;
    for p in [&x, &y, &z] {
        let c = (p * rho).trace();
        out += (kron2(p, &id) * r(u / 2.0) + kron2(&id, p) * r(v / 2.0)) * c;
    }
    let cross = |a: &DMatrix<Complex64>, b: &DMatrix<Complex64>| kron2(a, b) - kron2(b, a);
    out +=
        (cross(&y, &z) * (&x * rho).trace() + cross(&z, &x) * (&y * rho).trace() + cross(&x, &y) * (&z * rho).trace())
            * r(w);
    out
}

/// The Choi matrix of [`example_channel_map`] (`d = 2`, `m = 1`, `n = 2`).
pub fn example_channel(t: f64, u: f64, v: f64, w: f64) -> ChoiMatrix {
    ChoiMatrix::from_map(1, 2, 2, |rho| example_channel_map(t, u, v, w, rho)).expect("example map has fixed shapes")
}

/// The closed-form Schur-basis entries `A, B, C, D, E` of the example family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExampleCoefficients {
    /// `1 + 6u`.
    pub a: f64,
    /// `−2√3 (t + v + 4iw)`.
    pub b: Complex64,
    /// `−2√3 (t + v − 4iw)`.
    pub c: Complex64,
    /// `1 − 4t − 2u + 4v`.
    pub d: f64,
    /// `1 + 2t − 2u − 2v`.
    pub e: f64,
}

/// Closed-form coefficients of the example family.
pub fn example_coefficients(t: f64, u: f64, v: f64, w: f64) -> ExampleCoefficients {
    let s = -2.0 * 3f64.sqrt();
    ExampleCoefficients {
        a: 1.0 + 6.0 * u,
        b: Complex64::new(s * (t + v), s * 4.0 * w),
        c: Complex64::new(s * (t + v), -s * 4.0 * w),
        d: 1.0 - 4.0 * t - 2.0 * u + 4.0 * v,
        e: 1.0 + 2.0 * t - 2.0 * u - 2.0 * v,
    }
}

/// The expected Schur-basis Choi matrix of the example family (transform
/// with factor order `−++`): `(1/8)` times the pattern
/// `[[A,0,B,0],[0,A,0,B],[C,0,D,0],[0,C,0,D]] ⊕ E·I₄`.
pub fn example_schur_form(t: f64, u: f64, v: f64, w: f64) -> DMatrix<Complex64> {
    let k = example_coefficients(t, u, v, w);
    let r = |x: f64| Complex64::new(x, 0.0);
    let mut m = DMatrix::zeros(8, 8);
    for q in 0..2 {
        m[(q, q)] = r(k.a);
        m[(q, q + 2)] = k.b;
        m[(q + 2, q)] = k.c;
        m[(q + 2, q + 2)] = r(k.d);
    }
    for q in 4..8 {
        m[(q, q)] = r(k.e);
    }
    m * r(0.125)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::complexify;
    use crate::random::{random_density_matrix, seeded_rng};
    use crate::Limits;
    use proptest::prelude::*;
    use rand::Rng;

    fn st(v: &[i64]) -> Staircase {
        Staircase::new(v.to_vec()).unwrap()
    }

    fn transform(n: usize, m: usize, d: usize) -> SchurTransform {
        SchurTransform::build(n, m, d, &FactorOrder::dual_first(n, m), &Limits::default()).unwrap()
    }

    /// Row signs making the computed transform equal the printed 8×8 matrix.
    #[rustfmt::skip]
    fn printed_signs(w: &SchurTransform) -> Vec<f64> {
        let (s2, s3, s6) = (2f64.sqrt(), 3f64.sqrt(), 6f64.sqrt());
        let printed = DMatrix::from_row_slice(
            8,
            8,
            &[
                1.0 / s2, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0 / s2, 0.0,
                0.0, 1.0 / s2, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0 / s2,
                -1.0 / s6, 0.0, 0.0, 0.0, 0.0, -(2.0f64 / 3.0).sqrt(), 1.0 / s6, 0.0,
                0.0, 1.0 / s6, -(2.0f64 / 3.0).sqrt(), 0.0, 0.0, 0.0, 0.0, -1.0 / s6,
                0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0,
                -1.0 / s3, 0.0, 0.0, 0.0, 0.0, 1.0 / s3, 1.0 / s3, 0.0,
                0.0, -1.0 / s3, -1.0 / s3, 0.0, 0.0, 0.0, 0.0, 1.0 / s3,
                0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0,
            ],
        );
        let dense = w.to_dense();
        (0..8)
            .map(|r| {
                let dot: f64 = (0..8).map(|c| dense[(r, c)] * printed[(r, c)]).sum();
                assert!((dot.abs() - 1.0).abs() < 1e-12);
                dot.signum()
            })
            .collect()
    }

    fn sign_fixed(x: &DMatrix<Complex64>, s: &[f64]) -> DMatrix<Complex64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| x[(r, c)] * s[r] * s[c])
    }

    fn literal_example_map(t: f64, u: f64, v: f64, w: f64, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        // The family exactly as printed: u/2 I⊗P, v/2 P⊗I, and w/2 on the cross terms.
        example_channel_map(t, v, u, w / 2.0, rho)
    }

    #[test]
    fn identity_and_depolarizing_chois() {
        let id = ChoiMatrix::identity(3);
        assert!(id.is_cptp(1e-14));
        assert!((id.matrix().trace() - ONE).norm() < 1e-14);
        let dep = ChoiMatrix::depolarizing(1, 2, 2);
        assert!(dep.is_cptp(1e-14));
        let rho = random_density_matrix(2, &mut seeded_rng(1));
        let out = apply_direct(&dep, &rho).unwrap();
        assert!(max_abs_diff(&out, &(DMatrix::identity(4, 4) * Complex64::new(0.25, 0.0))) < 1e-15);
        let out = apply_direct(&id, &random_density_matrix(3, &mut seeded_rng(2))).unwrap();
        assert!((out.trace() - ONE).norm() < 1e-14);
    }

    #[test]
    fn unnormalized_choi_gives_trace_preservation() {
        let mut rng = seeded_rng(3);
        for (m, n, d) in [(1, 1, 2), (2, 1, 2), (1, 2, 3), (2, 2, 2)] {
            let j = random_cptp(m, n, d, None, &mut rng).unwrap();
            assert!(j.is_cptp(1e-12));
            let rho = random_density_matrix(d.pow(m as u32), &mut rng);
            let out = apply_direct(&j, &rho).unwrap();
            assert!((out.trace() - ONE).norm() < 1e-12);
            assert!(min_eigenvalue(&out) > -1e-12);
            assert!((j.unnormalized().trace().re - (d.pow(m as u32)) as f64).abs() < 1e-10);
        }
    }

    #[test]
    fn equivariance_detection() {
        let mut rng = seeded_rng(4);
        let dep = ChoiMatrix::depolarizing(1, 1, 2);
        let r = is_equivariant(&dep, 5, 1e-12, &mut rng);
        assert!(r.equivariant);
        assert_eq!(r.max_residual, 0.0);
        let ex = example_channel(0.1, -0.05, 0.07, 0.02);
        assert!(is_equivariant(&ex, 10, 1e-12, &mut rng).equivariant);
        assert!(generator_residual(&ex) < 1e-14);
        let x = paulis()[0].clone();
        let flip = ChoiMatrix::unitary(&x).unwrap();
        let r = is_equivariant(&flip, 5, 1e-10, &mut rng);
        assert!(!r.equivariant);
        assert!(r.max_residual > 1e-3);
        assert!(generator_residual(&flip) > 1e-3);
    }

    #[test]
    fn example_schur_form_matches_closed_form() {
        let w = transform(2, 1, 2);
        let s = printed_signs(&w);
        let mut rng = seeded_rng(5);
        for _ in 0..5 {
            let [t, u, v, ww]: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-0.2..0.2));
            let rep = choi_to_schur(&example_channel(t, u, v, ww), &w).unwrap();
            assert!(rep.max_residual() < 1e-12);
            let got = sign_fixed(&rep.transformed, &s);
            assert!(max_abs_diff(&got, &example_schur_form(t, u, v, ww)) < 1e-12);
            let k = example_coefficients(t, u, v, ww);
            let e = rep.block(&st(&[2, -1])).unwrap();
            assert!((e[(0, 0)] - Complex64::new(k.e / 8.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn literal_printed_map_has_permuted_coefficients() {
        let w = transform(2, 1, 2);
        let s = printed_signs(&w);
        let (t, u, v, ww) = (0.03, -0.04, 0.05, 0.02);
        let j = ChoiMatrix::from_map(1, 2, 2, |rho| literal_example_map(t, u, v, ww, rho)).unwrap();
        let got = sign_fixed(&choi_to_schur(&j, &w).unwrap().transformed, &s) * Complex64::new(8.0, 0.0);
        let s3 = 3f64.sqrt();
        assert!((got[(0, 0)].re - (1.0 + 6.0 * v)).abs() < 1e-12);
        assert!((got[(0, 2)] - Complex64::new(-2.0 * s3 * (t + u), -2.0 * s3 * 2.0 * ww)).norm() < 1e-12);
        assert!((got[(2, 2)].re - (1.0 - 4.0 * t + 4.0 * u - 2.0 * v)).abs() < 1e-12);
        assert!((got[(4, 4)].re - (1.0 + 2.0 * t - 2.0 * u - 2.0 * v)).abs() < 1e-12);
    }

    #[test]
    fn example_channel_validity() {
        let zero = example_channel(0.0, 0.0, 0.0, 0.0);
        assert!(zero.is_cptp(1e-14));
        let rho = random_density_matrix(2, &mut seeded_rng(6));
        let out = apply_direct(&zero, &rho).unwrap();
        assert!(max_abs_diff(&out, &(DMatrix::identity(4, 4) * Complex64::new(0.25, 0.0))) < 1e-15);
        // E = 1 + 2t − 2u − 2v < 0 violates complete positivity.
        let bad = example_channel(0.0, 0.6, 0.0, 0.0);
        assert!(bad.trace_preservation_residual() < 1e-15);
        assert!(!bad.is_cp(1e-12));
        let rep = choi_to_schur(&bad, &transform(2, 1, 2)).unwrap();
        assert!(rep.blocks.iter().any(|(_, x)| min_eigenvalue(x) < 0.0));
    }

    #[test]
    fn example_apply_direct_matches_formula() {
        let (t, u, v, w) = (0.05, 0.02, -0.03, 0.01);
        let j = example_channel(t, u, v, w);
        let mut zero = DMatrix::zeros(2, 2);
        zero[(0, 0)] = ONE;
        let expected = example_channel_map(t, u, v, w, &zero);
        assert!(max_abs_diff(&apply_direct(&j, &zero).unwrap(), &expected) < 1e-15);
        let rho = random_density_matrix(2, &mut seeded_rng(7));
        assert!(max_abs_diff(&apply_direct(&j, &rho).unwrap(), &example_channel_map(t, u, v, w, &rho)) < 1e-14);
    }

    #[test]
    fn twirl_is_projection_onto_commutant() {
        let mut rng = seeded_rng(8);
        for (n, m, d) in [(1, 1, 2), (2, 1, 2), (1, 1, 3), (2, 2, 2)] {
            let w = transform(n, m, d);
            let j = random_cptp(m, n, d, None, &mut rng).unwrap();
            let tw = twirl(&j, &w).unwrap();
            assert!(is_equivariant(&tw, 5, 1e-10, &mut rng).equivariant);
            assert!(choi_to_schur(&tw, &w).unwrap().max_residual() < 1e-12);
            assert!(max_abs_diff(twirl(&tw, &w).unwrap().matrix(), tw.matrix()) < 1e-12);
            assert!(tw.min_eigenvalue() > -1e-12);
            assert!(tw.trace_preservation_residual() < 1e-12);
            assert!((tw.matrix().trace() - j.matrix().trace()).norm() < 1e-12);
        }
        let w = transform(2, 1, 2);
        let ex = example_channel(0.1, 0.0, 0.05, -0.02);
        assert!(max_abs_diff(twirl(&ex, &w).unwrap().matrix(), ex.matrix()) < 1e-12);
    }

    #[test]
    fn twirl_matches_haar_average() {
        // The Monte-Carlo group average converges to the exact twirl.
        let mut rng = seeded_rng(9);
        let w = transform(1, 1, 2);
        let j = random_cptp(1, 1, 2, None, &mut rng).unwrap();
        let exact = twirl(&j, &w).unwrap();
        let trials = 20000;
        let mut acc = DMatrix::zeros(4, 4);
        for _ in 0..trials {
            let r = symmetry_operator(&haar_unitary(2, &mut rng), 1, 1);
            acc += &r * j.matrix() * r.adjoint();
        }
        acc /= Complex64::new(trials as f64, 0.0);
        assert!(max_abs_diff(&acc, exact.matrix()) < 0.01);
    }

    #[test]
    fn depolarizing_schur_blocks_are_scalar() {
        let w = transform(2, 1, 2);
        let rep = choi_to_schur(&ChoiMatrix::depolarizing(1, 2, 2), &w).unwrap();
        for (_, x) in &rep.blocks {
            let k = x.nrows();
            assert!(max_abs_diff(x, &(DMatrix::identity(k, k) * Complex64::new(0.125, 0.0))) < 1e-15);
        }
    }

    #[test]
    fn shape_errors() {
        let w = transform(2, 1, 2);
        assert!(matches!(choi_to_schur(&ChoiMatrix::identity(2), &w), Err(Error::ShapeMismatch(_))));
        let std_order = SchurTransform::build(2, 1, 2, &FactorOrder::standard(2, 1), &Limits::default()).unwrap();
        assert!(choi_to_schur(&example_channel(0.0, 0.0, 0.0, 0.0), &std_order).is_err());
        assert!(apply_direct(&ChoiMatrix::identity(2), &DMatrix::identity(3, 3)).is_err());
        assert!(ChoiMatrix::new(1, 1, 2, DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn weyl_operators() {
        assert_eq!(weyl_operator(0, 0, 3), DMatrix::identity(3, 3));
        let [x, _, z] = paulis();
        assert!(max_abs_diff(&weyl_operator(1, 0, 2), &x) < 1e-15);
        assert!(max_abs_diff(&weyl_operator(0, 1, 2), &z) < 1e-15);
        assert!(max_abs_diff(&weyl_operator(1, 1, 2), &(&x * &z)) < 1e-15);
        let mut rng = seeded_rng(10);
        for d in 2..5 {
            let rho = random_density_matrix(d, &mut rng);
            let mut acc = DMatrix::zeros(d, d);
            for a in 0..d {
                for b in 0..d {
                    let w = weyl_operator(a, b, d);
                    assert!(crate::linalg::unitarity_residual(&w) < 1e-14);
                    acc += &w * &rho * w.adjoint();
                }
            }
            acc /= Complex64::new((d * d) as f64, 0.0);
            assert!(max_abs_diff(&acc, &(DMatrix::identity(d, d) * Complex64::new(1.0 / d as f64, 0.0))) < 1e-14);
        }
    }

    #[test]
    fn teleportation_reproduces_the_channel() {
        let mut rng = seeded_rng(11);
        let rho = random_density_matrix(2, &mut rng);
        let id = teleport_apply(&ChoiMatrix::identity(2), &rho).unwrap();
        assert!(max_abs_diff(&id.output, &rho) < 1e-14);
        let ex = example_channel(0.05, -0.02, 0.03, 0.01);
        let tp = teleport_apply(&ex, &rho).unwrap();
        assert!(max_abs_diff(&tp.output, &apply_direct(&ex, &rho).unwrap()) < 1e-14);
        for p in &tp.distribution {
            assert!((p - 0.25).abs() < 1e-14);
        }
        for b in &tp.branches {
            assert!(max_abs_diff(b, &tp.output) < 1e-13);
        }
        for (n, d) in [(1, 3), (2, 2)] {
            let w = transform(n, 1, d);
            let j = random_equivariant_cptp(&w, None, &mut rng).unwrap();
            let rho = random_density_matrix(d, &mut rng);
            let tp = teleport_apply(&j, &rho).unwrap();
            assert!(max_abs_diff(&tp.output, &apply_direct(&j, &rho).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn teleportation_preconditions() {
        let rho = DMatrix::identity(2, 2) * Complex64::new(0.5, 0.0);
        let flip = ChoiMatrix::unitary(&paulis()[0]).unwrap();
        assert!(matches!(teleport_apply(&flip, &rho), Err(Error::Precondition(_))));
        let two_in = ChoiMatrix::depolarizing(2, 1, 2);
        assert!(matches!(teleport_apply(&two_in, &DMatrix::identity(4, 4)), Err(Error::Precondition(_))));
    }

    #[test]
    fn sampled_teleportation_is_seeded() {
        let ex = example_channel(0.05, -0.02, 0.03, 0.01);
        let rho = random_density_matrix(2, &mut seeded_rng(12));
        let a = teleport_sample(&ex, &rho, 100, &mut seeded_rng(13)).unwrap();
        let b = teleport_sample(&ex, &rho, 100, &mut seeded_rng(13)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.counts.iter().sum::<usize>(), 100);
        assert!(max_abs_diff(&a.output, &apply_direct(&ex, &rho).unwrap()) < 1e-12);
    }

    #[test]
    fn m2_probability_and_povm() {
        assert_eq!(m2_success_probability(2).unwrap(), Ratio::new(1, 4));
        assert_eq!(m2_success_probability(3).unwrap(), Ratio::new(1, 3));
        assert!(m2_success_probability(1).is_err());
        // Approaches 1/2 from below.
        let p = m2_success_probability(1000).unwrap();
        assert!(p < Ratio::new(1, 2) && Ratio::new(1, 2) - p < Ratio::new(1, 1000));
        let mut rng = seeded_rng(14);
        for d in 2..=4 {
            let rep = m2_report(d, &random_density_matrix(d * d, &mut rng)).unwrap();
            assert!(rep.operator_norm <= 1.0 + 1e-12);
            assert!((rep.operator_norm - 1.0).abs() < 1e-12);
            assert!(rep.min_eigenvalue > -1e-12);
            let exact = *rep.probability.numer() as f64 / *rep.probability.denom() as f64;
            assert!((rep.numeric_probability - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn m2_povm_is_the_twirled_bell_pair() {
        // M = C ∫ (I ⊗ Ū^⊗2)|Φ⟩⟨Φ|^⊗2(I ⊗ Uᵀ^⊗2) dU, estimated by Monte Carlo at d = 2.
        let d = 2;
        let mut rng = seeded_rng(15);
        let mut phi = DMatrix::<Complex64>::zeros(d * d, 1);
        for i in 0..d {
            phi[(i * d + i, 0)] = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
        }
        // Two Bell pairs on (R1, A1) and (R2, A2), reordered to (R1, R2, A1, A2).
        let pair = kron2(&phi, &phi);
        let reorder = |x: usize| {
            let (r1, a1, r2, a2) = (x / 8, (x / 4) % 2, (x / 2) % 2, x % 2);
            ((r1 * 2 + r2) * 2 + a1) * 2 + a2
        };
        let mut bell = DMatrix::<Complex64>::zeros(16, 1);
        for x in 0..16 {
            bell[(reorder(x), 0)] = pair[(x, 0)];
        }
        let proj = &bell * bell.adjoint();
        let trials = 20000;
        let mut acc = DMatrix::<Complex64>::zeros(16, 16);
        for _ in 0..trials {
            let u = haar_unitary(d, &mut rng);
            let ubar = u.conjugate();
            let local = kron_all(&[DMatrix::identity(2, 2), DMatrix::identity(2, 2), ubar.clone(), ubar]);
            acc += &local * &proj * local.adjoint();
        }
        let c = 4.0; // C = d³(d−1)/2 at d = 2
        acc *= Complex64::new(c / trials as f64, 0.0);
        let m = complexify(&m2_povm_element(d).unwrap());
        assert!(max_abs_diff(&acc, &m) < 0.03);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn twirled_random_channels_stay_cptp(seed in any::<u64>()) {
            let mut rng = seeded_rng(seed);
            let w = transform(2, 1, 2);
            let j = random_equivariant_cptp(&w, Some(2), &mut rng).unwrap();
            prop_assert!(j.min_eigenvalue() > -1e-12);
            prop_assert!(j.trace_preservation_residual() < 1e-12);
            prop_assert!(generator_residual(&j) < 1e-12);
        }
    }
}
