//! The mixed Schur transform: construction by Clebsch–Gordan cascade and the
//! verification battery.
//!
//! Output basis vectors are labelled `(γ, q, p)`: an irrep `γ`, a GT pattern
//! index `q < dim γ`, and a path index `p < mult γ` into the canonical (colex)
//! order of Bratteli paths ending at `γ`. Rows are ordered by `γ` ascending,
//! then `p`, then `q`, so each `(γ, p)` pair owns a contiguous run of `dim γ`
//! rows.
//!
//! The transform conjugates `U^⊗n ⊗ Ū^⊗m` (factors placed by the factor
//! order) into `⊕_γ q_γ(U) ⊗ I_{mult γ}` and every walled Brauer operator
//! `ψ(σ)` into `⊕_γ I_{dim γ} ⊗ p_γ(σ)`.
//!
//! ```
//! use mskit::bratteli::FactorOrder;
//! use mskit::random::{haar_unitary, seeded_rng};
//! use mskit::schur::SchurTransform;
//! use mskit::Limits;
//!
//! let w = SchurTransform::build(2, 1, 2, &FactorOrder::standard(2, 1), &Limits::default()).unwrap();
//! let report = w.verify_blockdiag(&haar_unitary(2, &mut seeded_rng(1)));
//! assert!(report.off_block_residual < 1e-10 && report.structure_residual < 1e-10);
//! ```

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;

use crate::bratteli::{colex_cmp, BratteliDiagram, BratteliPath, Factor, FactorOrder};
use crate::brauer::WalledBrauerDiagram;
use crate::cg::{defining_cg, dual_cg};
use crate::error::{Error, Result};
use crate::gelfand::enumerate_patterns;
use crate::linalg::{apply_product_batch, norm2, Batch, ZERO};
use crate::staircase::Staircase;
use crate::Limits;

/// Largest dimension for which verification computes exact entrywise residuals.
pub const EXACT_RESIDUAL_MAX_DIM: usize = 256;

/// Entries below this magnitude produced by cancellation are dropped during construction.
const DROP_TOLERANCE: f64 = 1e-15;

/// Number of columns pushed through the operator at once by the certified check.
const BATCH_WIDTH: usize = 8;

/// The label `(γ, q, p)` of one output basis vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SchurLabel {
    /// The irrep.
    pub gamma: Staircase,
    /// GT pattern index within `γ`.
    pub q: usize,
    /// Path index within the multiplicity space of `γ`.
    pub p: usize,
}

impl fmt::Display for SchurLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "γ={} q={} p={}", self.gamma, self.q, self.p)
    }
}

impl FromStr for SchurLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut gamma = None;
        let mut q = None;
        let mut p = None;
        for field in s.split_whitespace() {
            let (key, value) =
                field.split_once('=').ok_or_else(|| Error::Parse(format!("label field {field:?} lacks '='")))?;
            let num = || value.parse::<usize>().map_err(|e| Error::Parse(format!("{field:?}: {e}")));
            match key {
                "γ" | "gamma" => gamma = Some(value.parse::<Staircase>()?),
                "q" => q = Some(num()?),
                "p" => p = Some(num()?),
                other => return Err(Error::Parse(format!("unknown label field {other:?}"))),
            }
        }
        match (gamma, q, p) {
            (Some(gamma), Some(q), Some(p)) => Ok(SchurLabel { gamma, q, p }),
            _ => Err(Error::Parse(format!("label {s:?} needs γ, q and p"))),
        }
    }
}

/// The rows belonging to one irrep.
#[derive(Clone, Debug, PartialEq)]
pub struct IrrepBlock {
    /// The irrep.
    pub gamma: Staircase,
    /// First row of the irrep.
    pub offset: usize,
    /// `dim γ`.
    pub dim: usize,
    /// `mult γ`, the number of Bratteli paths.
    pub mult: usize,
    /// The paths in canonical order; `paths[p]` labels multiplicity index `p`.
    pub paths: Vec<BratteliPath>,
}

impl IrrepBlock {
    /// Row of `(γ, q, p)`.
    pub fn row(&self, q: usize, p: usize) -> usize {
        self.offset + p * self.dim + q
    }
}

/// The canonical irrep blocks for a factor order, from the Bratteli diagram.
pub fn canonical_blocks(order: &FactorOrder, d: usize) -> Result<Vec<IrrepBlock>> {
    let diagram = BratteliDiagram::build_with_order(order, d);
    let mut offset = 0;
    let mut out = Vec::new();
    let mut tops = diagram.top().to_vec();
    tops.sort();
    for gamma in tops {
        let paths = diagram.paths_to(&gamma)?;
        let dim = gamma.dim();
        let mult = paths.len();
        out.push(IrrepBlock { gamma, offset, dim, mult, paths });
        offset += dim * mult;
    }
    Ok(out)
}

/// Residuals from conjugating an operator by the transform.
#[derive(Clone, Debug)]
pub struct StructureReport {
    /// Largest entry between rows and columns of different irreps.
    pub off_block_residual: f64,
    /// Largest deviation of the within-irrep blocks from `Q ⊗ I` (unitary
    /// side) or `I ⊗ P` (algebra side).
    pub structure_residual: f64,
    /// The extracted `q_γ(U)` or `p_γ(σ)` for every irrep, ascending.
    pub blocks: Vec<(Staircase, DMatrix<Complex64>)>,
    /// When true the residuals are certified upper bounds (column 2-norms)
    /// rather than exact entrywise maxima.
    pub certified_bound: bool,
}

impl StructureReport {
    /// The larger of the two residuals.
    pub fn max_residual(&self) -> f64 {
        self.off_block_residual.max(self.structure_residual)
    }

    /// The extracted block for `γ`.
    pub fn block(&self, gamma: &Staircase) -> Option<&DMatrix<Complex64>> {
        self.blocks.iter().find(|(g, _)| g == gamma).map(|(_, m)| m)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    /// Expect `Q ⊗ I`: equal blocks across `p`, extracted from `p = 0`.
    Unitary,
    /// Expect `I ⊗ P`: equal blocks across `q`, extracted from `q = 0`.
    Algebra,
}

/// A real orthogonal matrix stored by rows.
#[derive(Clone, Debug, PartialEq)]
struct SparseRows {
    ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SparseRows {
    fn from_rows(rows: impl IntoIterator<Item = Vec<(u32, f64)>>) -> Self {
        let mut ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for row in rows {
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            ptr.push(cols.len());
        }
        SparseRows { ptr, cols, vals }
    }

    fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.ptr[r], self.ptr[r + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    fn dot(&self, r: usize, y: &[Complex64]) -> Complex64 {
        let (c, v) = self.row(r);
        c.iter().zip(v).map(|(&c, &v)| y[c as usize] * v).sum()
    }

    /// `y -= coeff · row r`.
    fn axpy(&self, r: usize, coeff: Complex64, y: &mut [Complex64]) {
        let (c, v) = self.row(r);
        for (&c, &v) in c.iter().zip(v) {
            y[c as usize] -= coeff * v;
        }
    }
}

/// The mixed Schur transform for a given factor order.
#[derive(Clone, Debug, PartialEq)]
pub struct SchurTransform {
    n: usize,
    m: usize,
    d: usize,
    order: FactorOrder,
    blocks: Vec<IrrepBlock>,
    rows: SparseRows,
}

struct Partial {
    gamma: Staircase,
    steps: Vec<usize>,
    rows: Vec<Vec<(u32, f64)>>,
}

impl SchurTransform {
    /// Builds the transform by cascading one Clebsch–Gordan transform per factor.
    pub fn build(n: usize, m: usize, d: usize, order: &FactorOrder, limits: &Limits) -> Result<Self> {
        order.check_counts(n, m)?;
        if d == 0 {
            return Err(Error::Precondition("d must be positive".into()));
        }
        limits.check_tensor_dim(d, n + m)?;
        let mut parts = vec![Partial { gamma: Staircase::zero(d), steps: Vec::new(), rows: vec![vec![(0, 1.0)]] }];
        let mut dim = 1usize;
        for &factor in order.factors() {
            let new_dim = dim * d;
            let mut scratch = vec![0.0f64; new_dim];
            let mut touched = vec![false; new_dim];
            let mut list: Vec<u32> = Vec::new();
            let mut next = Vec::new();
            for part in &parts {
                let cg = match factor {
                    Factor::Defining => defining_cg(&part.gamma, limits)?,
                    Factor::Dual => dual_cg(&part.gamma, limits)?,
                };
                // Transpose the column-sparse CG matrix into row lists.
                let mut cg_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); cg.size()];
                for q in 0..part.gamma.dim() {
                    for i in 1..=d {
                        for &(r, v) in cg.column(q, i) {
                            cg_rows[r as usize].push((q * d + i - 1, v));
                        }
                    }
                }
                for block in cg.outputs() {
                    let j = part.gamma.changed_index(&block.target).expect("single box move");
                    let mut rows = Vec::with_capacity(block.size);
                    for cg_row in &cg_rows[block.offset..block.offset + block.size] {
                        for &(col, c) in cg_row {
                            let (q, i) = (col / d, col % d + 1);
                            let phys = d - i;
                            for &(x, v) in &part.rows[q] {
                                let idx = x as usize * d + phys;
                                if !touched[idx] {
                                    touched[idx] = true;
                                    list.push(idx as u32);
                                }
                                scratch[idx] += c * v;
                            }
                        }
                        list.sort_unstable();
                        let mut row = Vec::with_capacity(list.len());
                        for &idx in &list {
                            let v = std::mem::take(&mut scratch[idx as usize]);
                            touched[idx as usize] = false;
                            if v.abs() > DROP_TOLERANCE {
                                row.push((idx, v));
                            }
                        }
                        list.clear();
                        rows.push(row);
                    }
                    let mut steps = part.steps.clone();
                    steps.push(j);
                    next.push(Partial { gamma: block.target.clone(), steps, rows });
                }
            }
            parts = next;
            dim = new_dim;
        }
        parts.sort_by(|a, b| a.gamma.cmp(&b.gamma).then_with(|| colex_cmp(&a.steps, &b.steps)));
        let mut blocks: Vec<IrrepBlock> = Vec::new();
        let mut offset = 0;
        for part in &parts {
            let path = BratteliPath::from_steps(order, d, part.steps.clone())?;
            match blocks.last_mut() {
                Some(b) if b.gamma == part.gamma => {
                    b.mult += 1;
                    b.paths.push(path);
                }
                _ => blocks.push(IrrepBlock {
                    gamma: part.gamma.clone(),
                    offset,
                    dim: part.rows.len(),
                    mult: 1,
                    paths: vec![path],
                }),
            }
            offset += part.rows.len();
        }
        let rows = SparseRows::from_rows(parts.into_iter().flat_map(|p| p.rows));
        Ok(SchurTransform { n, m, d, order: order.clone(), blocks, rows })
    }

    /// Wraps an explicit real matrix whose rows follow the canonical labels.
    ///
    /// `labels` must equal the canonical label list for the order; the matrix is
    /// not required to be orthogonal (verification reports how far it is).
    pub fn from_dense(
        n: usize,
        m: usize,
        d: usize,
        order: &FactorOrder,
        labels: &[SchurLabel],
        matrix: &DMatrix<f64>,
        limits: &Limits,
    ) -> Result<Self> {
        order.check_counts(n, m)?;
        let dim = limits.check_tensor_dim(d, n + m)?;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::ShapeMismatch(format!(
                "matrix is {}×{}, expected {dim}×{dim}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let blocks = canonical_blocks(order, d)?;
        let expected: Vec<SchurLabel> = labels_of(&blocks);
        if labels != expected.as_slice() {
            return Err(Error::Parse("labels do not match the canonical label order".into()));
        }
        let rows = SparseRows::from_rows(
            (0..dim).map(|r| (0..dim).filter(|&c| matrix[(r, c)] != 0.0).map(|c| (c as u32, matrix[(r, c)])).collect()),
        );
        Ok(SchurTransform { n, m, d, order: order.clone(), blocks, rows })
    }

    /// Number of defining factors.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of dual factors.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Local dimension.
    pub fn d(&self) -> usize {
        self.d
    }

    /// The factor order.
    pub fn order(&self) -> &FactorOrder {
        &self.order
    }

    /// Matrix dimension `d^(n+m)`.
    pub fn dim(&self) -> usize {
        self.rows.ptr.len() - 1
    }

    /// The irrep blocks, ascending.
    pub fn blocks(&self) -> &[IrrepBlock] {
        &self.blocks
    }

    /// The block of `γ`.
    pub fn block(&self, gamma: &Staircase) -> Option<&IrrepBlock> {
        self.blocks.iter().find(|b| &b.gamma == gamma)
    }

    /// All labels in row order.
    pub fn labels(&self) -> Vec<SchurLabel> {
        labels_of(&self.blocks)
    }

    /// Label of row `r`.
    pub fn label(&self, r: usize) -> SchurLabel {
        let b = &self.blocks[self.blocks.partition_point(|b| b.offset <= r) - 1];
        let rem = r - b.offset;
        SchurLabel { gamma: b.gamma.clone(), q: rem % b.dim, p: rem / b.dim }
    }

    /// Row of a label, if it exists.
    pub fn label_index(&self, label: &SchurLabel) -> Option<usize> {
        let b = self.block(&label.gamma)?;
        (label.q < b.dim && label.p < b.mult).then(|| b.row(label.q, label.p))
    }

    /// Nonzero entries of row `r` as `(column, value)`, columns ascending.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (c, v) = self.rows.row(r);
        c.iter().zip(v).map(|(&c, &v)| (c as usize, v))
    }

    /// Number of stored nonzeros.
    pub fn nnz(&self) -> usize {
        self.rows.vals.len()
    }

    /// Dense copy.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let dim = self.dim();
        let mut out = DMatrix::zeros(dim, dim);
        for r in 0..dim {
            for (c, v) in self.row(r) {
                out[(r, c)] = v;
            }
        }
        out
    }

    /// `‖W Wᵀ − I‖_max`, computed from the sparse rows.
    pub fn unitarity_residual(&self) -> f64 {
        let dim = self.dim();
        // Column lists for the sparse Gram matrix.
        let mut col_rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); dim];
        for r in 0..dim {
            for (c, v) in self.row(r) {
                col_rows[c].push((r as u32, v));
            }
        }
        let mut acc = vec![0.0f64; dim];
        let mut worst = 0.0f64;
        for a in 0..dim {
            for (c, v) in self.row(a) {
                for &(b, w) in &col_rows[c] {
                    acc[b as usize] += v * w;
                }
            }
            for (b, x) in acc.iter_mut().enumerate() {
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((*x - target).abs());
                *x = 0.0;
            }
        }
        worst
    }

    /// `W x`.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.dim()).map(|r| self.rows.dot(r, x)).collect()
    }

    /// `Wᵀ y` (the inverse transform).
    pub fn apply_inverse(&self, y: &[Complex64]) -> Vec<Complex64> {
        let mut x = vec![ZERO; self.dim()];
        for (r, &coeff) in y.iter().enumerate() {
            self.rows.axpy(r, -coeff, &mut x);
        }
        x
    }

    /// `W A Wᵀ`.
    pub fn conjugate(&self, a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let w = crate::linalg::complexify(&self.to_dense());
        &w * a * w.transpose()
    }

    /// `Wᵀ B W`.
    pub fn unconjugate(&self, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let w = crate::linalg::complexify(&self.to_dense());
        w.transpose() * b * &w
    }

    /// Positions of the defining (first) and dual (last) walled Brauer columns.
    pub fn brauer_positions(&self) -> Vec<usize> {
        self.order.column_positions()
    }

    /// Conjugates `U^⊗n ⊗ Ū^⊗m` (placed per the factor order) and checks the
    /// `⊕_γ q_γ(U) ⊗ I` structure.
    pub fn verify_blockdiag(&self, u: &DMatrix<Complex64>) -> StructureReport {
        let ubar = u.conjugate();
        let ops: Vec<&DMatrix<Complex64>> =
            self.order.factors().iter().map(|f| if *f == Factor::Defining { u } else { &ubar }).collect();
        let d = self.d;
        self.structure_check(&|x: &mut Batch| apply_product_batch(x, d, &ops), Side::Unitary)
    }

    /// Conjugates `ψ(σ)` and checks the `⊕_γ I ⊗ p_γ(σ)` structure.
    pub fn verify_brauer(&self, sigma: &WalledBrauerDiagram, limits: &Limits) -> Result<StructureReport> {
        if sigma.n() != self.n || sigma.m() != self.m {
            return Err(Error::ShapeMismatch(format!(
                "diagram on ({}, {}) columns for a transform on ({}, {})",
                sigma.n(),
                sigma.m(),
                self.n,
                self.m
            )));
        }
        let psi = sigma.represent_at(self.d, &self.brauer_positions(), limits)?;
        Ok(self.structure_check(&|x: &mut Batch| x.map_columns(|c| psi.apply(c)), Side::Algebra))
    }

    fn structure_check(&self, apply: &dyn Fn(&mut Batch), side: Side) -> StructureReport {
        if self.dim() <= EXACT_RESIDUAL_MAX_DIM {
            self.structure_exact(apply, side)
        } else {
            self.structure_bound(apply, side)
        }
    }

    /// Loads the given rows of `W` as a batch of column vectors.
    fn scatter_batch(&self, rows: &[usize]) -> Batch {
        let mut batch = Batch::zeros(self.dim(), rows.len());
        for (k, &r) in rows.iter().enumerate() {
            let (c, v) = self.rows.row(r);
            for (&c, &v) in c.iter().zip(v) {
                batch.set(c as usize, k, Complex64::new(v, 0.0));
            }
        }
        batch
    }

    fn structure_exact(&self, apply: &dyn Fn(&mut Batch), side: Side) -> StructureReport {
        let dim = self.dim();
        let w = crate::linalg::complexify(&self.to_dense());
        let all: Vec<usize> = (0..dim).collect();
        let mut batch = self.scatter_batch(&all);
        apply(&mut batch);
        let y = DMatrix::<Complex64>::from_fn(dim, dim, |r, c| batch.get(r, c));
        let x = &w * y;
        let mut off = 0.0f64;
        let mut structure = 0.0f64;
        let mut extracted = Vec::new();
        for ba in &self.blocks {
            for bb in &self.blocks {
                if ba.gamma == bb.gamma {
                    continue;
                }
                for r in ba.offset..ba.offset + ba.dim * ba.mult {
                    for c in bb.offset..bb.offset + bb.dim * bb.mult {
                        off = off.max(x[(r, c)].norm());
                    }
                }
            }
            let blk = match side {
                Side::Unitary => DMatrix::from_fn(ba.dim, ba.dim, |a, b| x[(ba.row(a, 0), ba.row(b, 0))]),
                Side::Algebra => DMatrix::from_fn(ba.mult, ba.mult, |a, b| x[(ba.row(0, a), ba.row(0, b))]),
            };
            for pa in 0..ba.mult {
                for qa in 0..ba.dim {
                    for pb in 0..ba.mult {
                        for qb in 0..ba.dim {
                            let expect = match side {
                                Side::Unitary if pa == pb => blk[(qa, qb)],
                                Side::Algebra if qa == qb => blk[(pa, pb)],
                                _ => ZERO,
                            };
                            structure = structure.max((x[(ba.row(qa, pa), ba.row(qb, pb))] - expect).norm());
                        }
                    }
                }
            }
            extracted.push((ba.gamma.clone(), blk));
        }
        StructureReport {
            off_block_residual: off,
            structure_residual: structure,
            blocks: extracted,
            certified_bound: false,
        }
    }

    /// For every column `b`, `z_b = R w_b − Σ_a E[a,b] w_a` with `E` the expected
    /// block structure; since `W` has orthonormal rows, every entry of column `b`
    /// of `W R Wᵀ − E` is bounded by `‖z_b‖₂`.
    fn structure_bound(&self, apply: &dyn Fn(&mut Batch), side: Side) -> StructureReport {
        // Columns are visited block by block with the extraction slice (outer
        // index 0) first, so every coefficient is known before it is needed.
        let mut visits = Vec::with_capacity(self.dim());
        for (bi, blk) in self.blocks.iter().enumerate() {
            let (outer, inner) = match side {
                Side::Unitary => (blk.mult, blk.dim),
                Side::Algebra => (blk.dim, blk.mult),
            };
            for o in 0..outer {
                for i in 0..inner {
                    visits.push((bi, o, i));
                }
            }
        }
        let row_of = |bi: usize, o: usize, i: usize| {
            let blk = &self.blocks[bi];
            match side {
                Side::Unitary => blk.row(i, o),
                Side::Algebra => blk.row(o, i),
            }
        };
        let mut extracted: Vec<DMatrix<Complex64>> = self
            .blocks
            .iter()
            .map(|blk| {
                let inner = if side == Side::Unitary { blk.dim } else { blk.mult };
                DMatrix::zeros(inner, inner)
            })
            .collect();
        let mut worst = 0.0f64;
        for chunk in visits.chunks(BATCH_WIDTH) {
            let rows: Vec<usize> = chunk.iter().map(|&(bi, o, i)| row_of(bi, o, i)).collect();
            let mut batch = self.scatter_batch(&rows);
            apply(&mut batch);
            for (k, &(bi, o, i)) in chunk.iter().enumerate() {
                let mut y = batch.column(k);
                let m = &mut extracted[bi];
                let inner = m.nrows();
                if o == 0 {
                    for a in 0..inner {
                        m[(a, i)] = self.rows.dot(row_of(bi, 0, a), &y);
                    }
                }
                for a in 0..inner {
                    self.rows.axpy(row_of(bi, o, a), m[(a, i)], &mut y);
                }
                worst = worst.max(norm2(&y));
            }
        }
        let blocks = self.blocks.iter().map(|b| b.gamma.clone()).zip(extracted).collect();
        StructureReport { off_block_residual: worst, structure_residual: worst, blocks, certified_bound: true }
    }

    /// Expected phase of every row under `diag(e^{iθ_1}, …, e^{iθ_d})`:
    /// `exp(i Σ_k w_k θ_{d+1−k})` with `w` the GT weight of the row's pattern.
    pub fn weight_phases(&self, thetas: &[f64]) -> Vec<Complex64> {
        let d = self.d;
        let mut out = Vec::with_capacity(self.dim());
        for blk in &self.blocks {
            let phases: Vec<Complex64> = enumerate_patterns(&blk.gamma)
                .iter()
                .map(|pat| {
                    let w = pat.weight();
                    let angle: f64 = (0..d).map(|k| w[k] as f64 * thetas[d - 1 - k]).sum();
                    Complex64::from_polar(1.0, angle)
                })
                .collect();
            for _ in 0..blk.mult {
                out.extend_from_slice(&phases);
            }
        }
        out
    }

    /// Largest `‖(W R Wᵀ − Φ) e_b‖₂` for `R` the tensor power of
    /// `diag(e^{iθ_k})` and `Φ` the diagonal of GT weight phases. This bounds
    /// the entrywise deviation from the predicted diagonal.
    pub fn weight_check(&self, thetas: &[f64]) -> f64 {
        let d = self.d;
        let k = self.order.len();
        let dim = self.dim();
        // Phase of each computational basis state.
        let mut basis_phase = vec![0.0f64; dim];
        for (x, slot) in basis_phase.iter_mut().enumerate() {
            let mut rest = x;
            for t in (0..k).rev() {
                let p = rest % d;
                rest /= d;
                *slot += self.order.factors()[t].sign() as f64 * thetas[p];
            }
        }
        let expected = self.weight_phases(thetas);
        let mut worst = 0.0f64;
        for (b, &phi) in expected.iter().enumerate() {
            let mut acc = 0.0;
            for (c, v) in self.row(b) {
                acc += v * v * (Complex64::from_polar(1.0, basis_phase[c]) - phi).norm_sqr();
            }
            worst = worst.max(acc.sqrt());
        }
        worst
    }

    /// [`weight_check`](Self::weight_check) at `trials` uniformly random angle vectors.
    pub fn weight_check_random<R: Rng + ?Sized>(&self, trials: usize, rng: &mut R) -> f64 {
        (0..trials)
            .map(|_| {
                let thetas: Vec<f64> =
                    (0..self.d).map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)).collect();
                self.weight_check(&thetas)
            })
            .fold(0.0, f64::max)
    }

    /// The real matrix `Σ c ψ(σ)` on the transform's tensor positions, symmetrized.
    ///
    /// Errors when a coefficient is not finite, or when a diagram and its adjoint
    /// both appear with different total coefficients.
    pub fn hamiltonian(&self, terms: &[(f64, WalledBrauerDiagram)], limits: &Limits) -> Result<DMatrix<f64>> {
        let mut totals: Vec<(WalledBrauerDiagram, f64)> = Vec::new();
        for (c, sigma) in terms {
            if !c.is_finite() {
                return Err(Error::NotHermitian(format!("coefficient {c} of {sigma} is not finite")));
            }
            if sigma.n() != self.n || sigma.m() != self.m {
                return Err(Error::ShapeMismatch(format!("term {sigma} does not fit ({}, {})", self.n, self.m)));
            }
            match totals.iter_mut().find(|(s, _)| s == sigma) {
                Some((_, t)) => *t += c,
                None => totals.push((sigma.clone(), *c)),
            }
        }
        for (sigma, c) in &totals {
            let adj = sigma.adjoint();
            if &adj == sigma {
                continue;
            }
            if let Some((_, c2)) = totals.iter().find(|(s, _)| s == &adj) {
                if (c - c2).abs() > 1e-12 * (1.0 + c.abs().max(c2.abs())) {
                    return Err(Error::NotHermitian(format!(
                        "{sigma} has coefficient {c} but its adjoint {adj} has {c2}"
                    )));
                }
            }
        }
        let dim = self.dim();
        let positions = self.brauer_positions();
        let mut h = DMatrix::<f64>::zeros(dim, dim);
        for (sigma, c) in &totals {
            let psi = sigma.represent_at(self.d, &positions, limits)?;
            for (r, col) in psi.entries() {
                h[(r, col)] += c;
            }
        }
        Ok((&h + h.transpose()) * 0.5)
    }

    /// `|⟨to| W e^{−iHt} Wᵀ |from⟩|²` for `H` the symmetrized diagram Hamiltonian.
    pub fn ptpqp_amplitude(
        &self,
        terms: &[(f64, WalledBrauerDiagram)],
        t: f64,
        from: &SchurLabel,
        to: &SchurLabel,
        limits: &Limits,
    ) -> Result<f64> {
        let find = |l: &SchurLabel| {
            self.label_index(l).ok_or_else(|| Error::Precondition(format!("label {l} does not exist")))
        };
        let (a, b) = (find(from)?, find(to)?);
        let h = self.hamiltonian(terms, limits)?;
        let eig = SymmetricEigen::new(h);
        let dim = self.dim();
        let mut amp = ZERO;
        for k in 0..dim {
            let v = eig.eigenvectors.column(k);
            let to_dot: f64 = self.row(b).map(|(c, w)| w * v[c]).sum();
            let from_dot: f64 = self.row(a).map(|(c, w)| w * v[c]).sum();
            amp += Complex64::from_polar(to_dot * from_dot, -eig.eigenvalues[k] * t);
        }
        Ok(amp.norm_sqr())
    }
}

fn labels_of(blocks: &[IrrepBlock]) -> Vec<SchurLabel> {
    let mut out = Vec::new();
    for b in blocks {
        for p in 0..b.mult {
            for q in 0..b.dim {
                out.push(SchurLabel { gamma: b.gamma.clone(), q, p });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brauer::all_diagrams;
    use crate::linalg::{complexify, max_abs_diff};
    use crate::random::{haar_unitary, seeded_rng};

    fn st(v: &[i64]) -> Staircase {
        Staircase::new(v.to_vec()).unwrap()
    }

    fn lim() -> Limits {
        Limits::default()
    }

    fn order(s: &str) -> FactorOrder {
        s.parse().unwrap()
    }

    /// The printed transform on `Ū ⊗ U ⊗ U`, rows in canonical label order.
    fn printed() -> DMatrix<f64> {
        let (s2, s3, s6) = (2f64.sqrt(), 3f64.sqrt(), 6f64.sqrt());
        let t = (2.0f64 / 3.0).sqrt();
        #[rustfmt::skip]
        let v = [
            1.0 / s2, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0 / s2, 0.0,
            0.0, 1.0 / s2, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0 / s2,
            -1.0 / s6, 0.0, 0.0, 0.0, 0.0, -t, 1.0 / s6, 0.0,
            0.0, 1.0 / s6, -t, 0.0, 0.0, 0.0, 0.0, -1.0 / s6,
            0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0,
            -1.0 / s3, 0.0, 0.0, 0.0, 0.0, 1.0 / s3, 1.0 / s3, 0.0,
            0.0, -1.0 / s3, -1.0 / s3, 0.0, 0.0, 0.0, 0.0, 1.0 / s3,
            0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0,
        ];
        DMatrix::from_row_slice(8, 8, &v)
    }

    #[test]
    fn trivial_transforms() {
        for d in 1..=3 {
            let w = SchurTransform::build(1, 0, d, &FactorOrder::standard(1, 0), &lim()).unwrap();
            assert_eq!(w.blocks().len(), 1);
            assert_eq!(w.blocks()[0].gamma.entries()[0], 1);
            let w = SchurTransform::build(0, 1, d, &FactorOrder::standard(0, 1), &lim()).unwrap();
            assert_eq!(w.blocks()[0].gamma.entries()[d - 1], -1);
            // One qudit: the basis is the GT basis, a permutation of the computational basis.
            let dense = w.to_dense();
            assert!(dense.iter().all(|&x| x == 0.0 || (x.abs() - 1.0).abs() < 1e-14));
        }
        let w = SchurTransform::build(0, 0, 3, &FactorOrder::standard(0, 0), &lim()).unwrap();
        assert_eq!(w.to_dense(), DMatrix::identity(1, 1));
    }

    #[test]
    fn single_qudit_transforms_are_permutations() {
        // Pattern q of the defining irrep has weight e_{d−q}, i.e. physical state q;
        // pattern q of the dual irrep has weight −e_{q+1}, i.e. physical state d−1−q.
        for d in 1..=4 {
            let w = SchurTransform::build(1, 0, d, &FactorOrder::standard(1, 0), &lim()).unwrap();
            assert_eq!(w.to_dense(), DMatrix::identity(d, d));
            let w = SchurTransform::build(0, 1, d, &FactorOrder::standard(0, 1), &lim()).unwrap();
            let dense = w.to_dense();
            for q in 0..d {
                assert_eq!(dense[(q, d - 1 - q)].abs(), 1.0, "d={d}: {dense}");
            }
            assert_eq!(w.nnz(), d);
        }
    }

    #[test]
    fn printed_matrix_up_to_row_signs() {
        let w = SchurTransform::build(2, 1, 2, &order("-++"), &lim()).unwrap();
        let labels: Vec<String> = w.labels().iter().map(|l| l.to_string()).collect();
        assert_eq!(labels[0], "γ=[1,0] q=0 p=0");
        assert_eq!(labels[2], "γ=[1,0] q=0 p=1");
        assert_eq!(labels[4], "γ=[2,-1] q=0 p=0");
        let ours = w.to_dense();
        let theirs = printed();
        for r in 0..8 {
            let s = if ours.row(r).dot(&theirs.row(r)) >= 0.0 { 1.0 } else { -1.0 };
            let dev = (ours.row(r) * s - theirs.row(r)).amax();
            assert!(dev < 1e-12, "row {r}: {dev}");
        }
    }

    #[test]
    fn blocks_match_census_and_paths() {
        for (n, m, d) in [(2, 1, 2), (2, 2, 2), (2, 2, 3), (3, 1, 3), (1, 2, 4), (0, 3, 2)] {
            for ord in [FactorOrder::standard(n, m), FactorOrder::dual_first(n, m)] {
                let w = SchurTransform::build(n, m, d, &ord, &lim()).unwrap();
                let canon = canonical_blocks(&ord, d).unwrap();
                assert_eq!(w.blocks(), canon.as_slice(), "({n},{m},{d}) {ord}");
                assert!(w.unitarity_residual() < 1e-12);
                let total: usize = w.blocks().iter().map(|b| b.dim * b.mult).sum();
                assert_eq!(total, w.dim());
            }
        }
    }

    #[test]
    fn multiplicity_space_depends_on_d() {
        let g = st(&[1, -1]);
        let w2 = SchurTransform::build(2, 2, 2, &FactorOrder::standard(2, 2), &lim()).unwrap();
        let w3 = SchurTransform::build(2, 2, 3, &FactorOrder::standard(2, 2), &lim()).unwrap();
        assert_eq!(w2.block(&g).unwrap().mult, 3);
        assert_eq!(w3.block(&st(&[1, 0, -1])).unwrap().mult, 4);
        let sigma = WalledBrauerDiagram::identity(2, 2);
        let r2 = w2.verify_brauer(&sigma, &lim()).unwrap();
        assert_eq!(r2.block(&g).unwrap().nrows(), 3);
    }

    #[test]
    fn block_diagonalizes_random_unitaries() {
        let mut rng = seeded_rng(4);
        for (n, m, d, ord) in [(2, 1, 2, "++-"), (2, 1, 2, "-++"), (1, 1, 3, "+-"), (2, 2, 2, "+-+-"), (1, 2, 3, "-+-")]
        {
            let w = SchurTransform::build(n, m, d, &order(ord), &lim()).unwrap();
            for _ in 0..3 {
                let u = haar_unitary(d, &mut rng);
                let r = w.verify_blockdiag(&u);
                assert!(!r.certified_bound);
                assert!(r.max_residual() < 1e-10, "({n},{m},{d}) {ord}: {r:?}");
            }
        }
    }

    #[test]
    fn extracted_irreps_are_homomorphisms() {
        let mut rng = seeded_rng(5);
        let w = SchurTransform::build(2, 1, 3, &FactorOrder::standard(2, 1), &lim()).unwrap();
        let u = haar_unitary(3, &mut rng);
        let v = haar_unitary(3, &mut rng);
        let (ru, rv, ruv) = (w.verify_blockdiag(&u), w.verify_blockdiag(&v), w.verify_blockdiag(&(&u * &v)));
        for ((g, a), ((_, b), (_, c))) in ru.blocks.iter().zip(rv.blocks.iter().zip(&ruv.blocks)) {
            assert!(max_abs_diff(&(a * b), c) < 1e-9, "{g}");
        }
        let id = w.verify_blockdiag(&DMatrix::identity(3, 3));
        assert!(id.max_residual() < 1e-12);
        for (_, b) in &id.blocks {
            assert!(max_abs_diff(b, &DMatrix::identity(b.nrows(), b.nrows())) < 1e-12);
        }
    }

    #[test]
    fn certified_bound_dominates_exact_residual() {
        let mut rng = seeded_rng(6);
        let w = SchurTransform::build(4, 2, 3, &FactorOrder::standard(4, 2), &lim()).unwrap();
        let u = haar_unitary(3, &mut rng);
        let bound = w.verify_blockdiag(&u);
        assert!(bound.certified_bound);
        assert!(bound.max_residual() < 1e-10);
        let ubar = u.conjugate();
        let ops: Vec<&DMatrix<Complex64>> =
            w.order().factors().iter().map(|f| if *f == Factor::Defining { &u } else { &ubar }).collect();
        let exact = w.structure_exact(&|x: &mut Batch| apply_product_batch(x, 3, &ops), Side::Unitary);
        assert!(exact.max_residual() <= bound.max_residual() + 1e-15);
        for ((_, a), (_, b)) in exact.blocks.iter().zip(&bound.blocks) {
            assert!(max_abs_diff(a, b) < 1e-12);
        }
        // A perturbed operator is detected by the bound.
        let mut corrupted = u.clone();
        corrupted[(0, 0)] += Complex64::new(1e-6, 0.0);
        let r = w.structure_bound(
            &|x: &mut Batch| apply_product_batch(x, 3, &[&corrupted, &u, &u, &u, &ubar, &ubar]),
            Side::Unitary,
        );
        assert!(r.max_residual() > 1e-8);
    }

    #[test]
    fn brauer_side_structure_and_traces() {
        for (n, m, d) in [(2, 1, 2), (1, 1, 3), (2, 2, 2)] {
            for ord in [FactorOrder::standard(n, m), FactorOrder::dual_first(n, m)] {
                let w = SchurTransform::build(n, m, d, &ord, &lim()).unwrap();
                for sigma in all_diagrams(n, m) {
                    let r = w.verify_brauer(&sigma, &lim()).unwrap();
                    assert!(r.max_residual() < 1e-10, "{sigma}: {r:?}");
                    let psi = sigma.represent_at(d, &ord.column_positions(), &lim()).unwrap();
                    let tr_psi = (0..psi.dim()).filter(|&c| psi.column(c).contains(&c)).count() as f64;
                    let tr: f64 = w.blocks().iter().zip(&r.blocks).map(|(b, (_, p))| b.dim as f64 * p.trace().re).sum();
                    assert!((tr - tr_psi).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn extracted_algebra_irreps_respect_loops() {
        let (n, m, d) = (2, 1, 2);
        let w = SchurTransform::build(n, m, d, &FactorOrder::standard(n, m), &lim()).unwrap();
        let all = all_diagrams(n, m);
        for a in &all {
            for b in &all {
                let (ab, loops) = a.compose(b).unwrap();
                let (ra, rb, rab) = (
                    w.verify_brauer(a, &lim()).unwrap(),
                    w.verify_brauer(b, &lim()).unwrap(),
                    w.verify_brauer(&ab, &lim()).unwrap(),
                );
                let factor = Complex64::new((d as f64).powi(loops as i32), 0.0);
                for k in 0..ra.blocks.len() {
                    let lhs = &ra.blocks[k].1 * &rb.blocks[k].1;
                    assert!(max_abs_diff(&lhs, &(&rab.blocks[k].1 * factor)) < 1e-10);
                }
            }
        }
        let id = w.verify_brauer(&WalledBrauerDiagram::identity(n, m), &lim()).unwrap();
        for (_, b) in &id.blocks {
            assert!(max_abs_diff(b, &DMatrix::identity(b.nrows(), b.nrows())) < 1e-12);
        }
    }

    #[test]
    fn weight_phases() {
        let w = SchurTransform::build(2, 1, 2, &order("-++"), &lim()).unwrap();
        assert!(w.weight_check(&[0.0, 0.0]) < 1e-14);
        assert!(w.weight_check_random(5, &mut seeded_rng(1)) < 1e-10);
        // (2,−1) with middle row 2 has GT weight (2, −1): phase e^{i(2θ_2 − θ_1)}.
        let label = SchurLabel { gamma: st(&[2, -1]), q: 3, p: 0 };
        let row = w.label_index(&label).unwrap();
        let (t1, t2) = (0.3, -1.1);
        let phase = w.weight_phases(&[t1, t2])[row];
        assert!((phase - Complex64::from_polar(1.0, 2.0 * t2 - t1)).norm() < 1e-14);
        for (n, m, d) in [(3, 1, 3), (2, 2, 4), (4, 0, 2)] {
            let w = SchurTransform::build(n, m, d, &FactorOrder::standard(n, m), &lim()).unwrap();
            assert!(w.weight_check_random(5, &mut seeded_rng(2)) < 1e-10);
        }
    }

    #[test]
    fn labels_round_trip() {
        let w = SchurTransform::build(2, 2, 2, &FactorOrder::standard(2, 2), &lim()).unwrap();
        for (r, label) in w.labels().iter().enumerate() {
            assert_eq!(&w.label(r), label);
            assert_eq!(w.label_index(label), Some(r));
            assert_eq!(&label.to_string().parse::<SchurLabel>().unwrap(), label);
        }
        assert!("γ=[1,0] q=0".parse::<SchurLabel>().is_err());
        assert!("x=1".parse::<SchurLabel>().is_err());
    }

    #[test]
    fn from_dense_round_trip_and_inverse() {
        let w = SchurTransform::build(1, 2, 2, &FactorOrder::standard(1, 2), &lim()).unwrap();
        let again = SchurTransform::from_dense(1, 2, 2, w.order(), &w.labels(), &w.to_dense(), &lim()).unwrap();
        assert_eq!(again.to_dense(), w.to_dense());
        let mut bad = w.labels();
        bad.swap(0, 1);
        assert!(SchurTransform::from_dense(1, 2, 2, w.order(), &bad, &w.to_dense(), &lim()).is_err());
        let x: Vec<Complex64> = (0..8).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let back = w.apply_inverse(&w.apply(&x));
        assert!(x.iter().zip(&back).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn cap_and_order_errors() {
        let small = Limits { dim_cap: 8, ..Limits::default() };
        assert!(matches!(
            SchurTransform::build(2, 2, 2, &FactorOrder::standard(2, 2), &small),
            Err(Error::CapExceeded { .. })
        ));
        assert!(SchurTransform::build(2, 1, 2, &order("+--"), &lim()).is_err());
    }

    #[test]
    fn ptpqp_matches_matrix_exponential() {
        let w = SchurTransform::build(1, 1, 2, &FactorOrder::standard(1, 1), &lim()).unwrap();
        let cup_cap = WalledBrauerDiagram::parse("t1-t2,b1-b2", 1, 1).unwrap();
        let terms = vec![(1.0, cup_cap)];
        let t = std::f64::consts::FRAC_PI_4;
        let h = complexify(&w.hamiltonian(&terms, &lim()).unwrap());
        let u = (h * Complex64::new(0.0, -t)).exp();
        let wd = complexify(&w.to_dense());
        let conj = &wd * u * wd.transpose();
        let labels = w.labels();
        for (a, from) in labels.iter().enumerate() {
            for (b, to) in labels.iter().enumerate() {
                let amp = w.ptpqp_amplitude(&terms, t, from, to, &lim()).unwrap();
                assert!((amp - conj[(b, a)].norm_sqr()).abs() < 1e-10);
            }
        }
        let l0 = &labels[0];
        assert!((w.ptpqp_amplitude(&terms, 0.0, l0, l0, &lim()).unwrap() - 1.0).abs() < 1e-12);
        let id = vec![(2.5, WalledBrauerDiagram::identity(1, 1))];
        assert!((w.ptpqp_amplitude(&id, 1.3, l0, l0, &lim()).unwrap() - 1.0).abs() < 1e-12);
        assert!(w.ptpqp_amplitude(&id, 1.3, l0, &labels[1], &lim()).unwrap() < 1e-20);
    }

    #[test]
    fn hamiltonian_hermiticity_rules() {
        let w = SchurTransform::build(2, 1, 2, &FactorOrder::standard(2, 1), &lim()).unwrap();
        let s = WalledBrauerDiagram::parse("t1-b2,t2-t3,b1-b3", 2, 1).unwrap();
        let adj = s.adjoint();
        assert_ne!(s, adj);
        assert!(w.hamiltonian(&[(1.0, s.clone()), (1.0, adj.clone())], &lim()).is_ok());
        assert!(w.hamiltonian(&[(1.0, s.clone())], &lim()).is_ok());
        assert!(matches!(w.hamiltonian(&[(1.0, s.clone()), (2.0, adj)], &lim()), Err(Error::NotHermitian(_))));
        assert!(w.hamiltonian(&[(f64::NAN, s)], &lim()).is_err());
    }
}
