//! Clebsch-Gordan transforms for tensoring an irrep with `□` or `□̄`.
//!
//! A transform maps the input space `Q_γ ⊗ ℂ^d`, with columns indexed by
//! `(q, i)` (GT pattern index `q` major, GT coordinate `i ∈ 1..=d` minor), onto
//! the direct sum of its output irreps, listed in ascending staircase order.
//!
//! The dual transform is built recursively: the U(d−1) dual transform acts on
//! the lower pattern, and the reduced Wigner coefficients then lift the result
//! to U(d). The defining transform is obtained by bending the dual one:
//! `C_def[(ν, q_ν), (q_λ, i)] = √(dim ν / dim λ) · C_dual(ν)[(λ, q_λ), (q_ν, i)]`.
//!
//! Matrices are real and stored column-sparse.
//!
//! ```
//! use mskit::cg::dual_cg;
//! use mskit::staircase::Staircase;
//! use mskit::Limits;
//!
//! let cg = dual_cg(&Staircase::new(vec![1, 0]).unwrap(), &Limits::default()).unwrap();
//! assert_eq!(cg.size(), 4);
//! assert!(cg.unitarity_residual() < 1e-12);
//! ```

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::gelfand::{enumerate_patterns, sub_offset};
use crate::staircase::Staircase;
use crate::wigner::dual_reduced_wigner;
use crate::Limits;

/// Which elementary irrep is tensored on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CgKind {
    /// `Q_λ ⊗ □ → ⊕_{ν ∈ λ+□} Q_ν`.
    Defining,
    /// `Q_μ ⊗ □̄ → ⊕_{γ ∈ μ−□} Q_γ`.
    Dual,
}

/// One output irrep of a transform and its row range.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputBlock {
    /// The output staircase.
    pub target: Staircase,
    /// First row of the block.
    pub offset: usize,
    /// Number of rows, `dim(target)`.
    pub size: usize,
}

/// A real orthogonal Clebsch-Gordan matrix with labelled output blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct CgTransform {
    input: Staircase,
    kind: CgKind,
    outputs: Vec<OutputBlock>,
    columns: Vec<Vec<(u32, f64)>>,
}

impl CgTransform {
    /// The input irrep.
    pub fn input(&self) -> &Staircase {
        &self.input
    }

    /// The local dimension.
    pub fn d(&self) -> usize {
        self.input.d()
    }

    /// Defining or dual.
    pub fn kind(&self) -> CgKind {
        self.kind
    }

    /// Output blocks in ascending staircase order.
    pub fn outputs(&self) -> &[OutputBlock] {
        &self.outputs
    }

    /// Matrix size `dim(input) · d`.
    pub fn size(&self) -> usize {
        self.columns.len()
    }

    /// Nonzero entries `(row, value)` of column `(q, i)`, rows ascending.
    /// `i` is the 1-based GT coordinate.
    pub fn column(&self, q: usize, i: usize) -> &[(u32, f64)] {
        &self.columns[q * self.d() + i - 1]
    }

    /// Position of `target` among the outputs.
    pub fn block_index(&self, target: &Staircase) -> Option<usize> {
        self.outputs.binary_search_by(|b| b.target.cmp(target)).ok()
    }

    /// The output block containing `row`, and the row's index within it.
    pub fn locate_row(&self, row: usize) -> (usize, usize) {
        let b = self.outputs.partition_point(|b| b.offset <= row) - 1;
        (b, row - self.outputs[b].offset)
    }

    /// Dense copy of the matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.size();
        let mut m = DMatrix::zeros(n, n);
        for (c, col) in self.columns.iter().enumerate() {
            for &(r, v) in col {
                m[(r as usize, c)] = v;
            }
        }
        m
    }

    /// `‖CᵀC − I‖_max`.
    pub fn unitarity_residual(&self) -> f64 {
        let n = self.size();
        let m = self.to_dense();
        (m.transpose() * &m - DMatrix::identity(n, n)).amax()
    }

    /// Total number of stored nonzeros.
    pub fn nnz(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }
}

fn output_blocks(targets: Vec<Staircase>) -> Vec<OutputBlock> {
    let mut offset = 0;
    targets
        .into_iter()
        .map(|target| {
            let size = target.dim();
            let b = OutputBlock { target, offset, size };
            offset += size;
            b
        })
        .collect()
}

fn check_size(gamma: &Staircase, limits: &Limits) -> Result<usize> {
    let dim = gamma.dim_exact();
    let size = dim * num_bigint::BigUint::from(gamma.d());
    let small: Option<usize> = num_traits::ToPrimitive::to_usize(&size);
    match small {
        Some(s) => limits.check_cg(s),
        None => Err(Error::CapExceeded { dim: u128::MAX, cap: limits.cg_cap }),
    }
}

/// Memo table for constructed transforms; safe for concurrent readers.
#[derive(Debug, Default)]
pub struct CgCache {
    table: RwLock<HashMap<(CgKind, Staircase), Arc<CgTransform>>>,
}

impl CgCache {
    /// An empty cache.
    pub fn new() -> Self {
        Self::default()
    }

    fn get(&self, kind: CgKind, gamma: &Staircase) -> Option<Arc<CgTransform>> {
        self.table.read().expect("cache lock poisoned").get(&(kind, gamma.clone())).cloned()
    }

    fn insert(&self, t: CgTransform) -> Arc<CgTransform> {
        let key = (t.kind, t.input.clone());
        let mut table = self.table.write().expect("cache lock poisoned");
        table.entry(key).or_insert_with(|| Arc::new(t)).clone()
    }

    /// Number of cached transforms.
    pub fn len(&self) -> usize {
        self.table.read().expect("cache lock poisoned").len()
    }

    /// Whether the cache is empty.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The dual transform of `μ`, built on first use.
    pub fn dual(&self, mu: &Staircase, limits: &Limits) -> Result<Arc<CgTransform>> {
        check_size(mu, limits)?;
        if let Some(t) = self.get(CgKind::Dual, mu) {
            return Ok(t);
        }
        let t = build_dual(mu, limits, self)?;
        Ok(self.insert(t))
    }

    /// The defining transform of `λ`, built on first use.
    pub fn defining(&self, lambda: &Staircase, limits: &Limits) -> Result<Arc<CgTransform>> {
        check_size(lambda, limits)?;
        if let Some(t) = self.get(CgKind::Defining, lambda) {
            return Ok(t);
        }
        let t = build_defining(lambda, limits, self)?;
        Ok(self.insert(t))
    }
}

fn global() -> &'static CgCache {
    static CACHE: OnceLock<CgCache> = OnceLock::new();
    CACHE.get_or_init(CgCache::new)
}

/// The dual transform `Q_μ ⊗ □̄ → ⊕ Q_{μ−e_j}`, from the process-wide cache.
pub fn dual_cg(mu: &Staircase, limits: &Limits) -> Result<Arc<CgTransform>> {
    global().dual(mu, limits)
}

/// The defining transform `Q_λ ⊗ □ → ⊕ Q_{λ+e_j}`, from the process-wide cache.
pub fn defining_cg(lambda: &Staircase, limits: &Limits) -> Result<Arc<CgTransform>> {
    global().defining(lambda, limits)
}

/// Builds the dual transform without consulting any shared cache.
pub fn dual_cg_uncached(mu: &Staircase, limits: &Limits) -> Result<CgTransform> {
    check_size(mu, limits)?;
    build_dual(mu, limits, &CgCache::new())
}

/// Builds the defining transform without consulting any shared cache.
pub fn defining_cg_uncached(lambda: &Staircase, limits: &Limits) -> Result<CgTransform> {
    check_size(lambda, limits)?;
    build_defining(lambda, limits, &CgCache::new())
}

fn build_dual(mu: &Staircase, limits: &Limits, cache: &CgCache) -> Result<CgTransform> {
    let d = mu.d();
    let outputs = output_blocks(mu.remove_box_set());
    if d == 1 {
        return Ok(CgTransform { input: mu.clone(), kind: CgKind::Dual, outputs, columns: vec![vec![(0, 1.0)]] });
    }
    // Row of output pattern (μ − e_j; ν′-pattern k).
    let targets: Vec<Option<usize>> = (1..=d)
        .map(|j| mu.remove_box(j).map(|g| outputs.iter().position(|b| b.target == g).expect("target listed")))
        .collect();
    let patterns = enumerate_patterns(mu);
    let mut columns = Vec::with_capacity(patterns.len() * d);
    let mut q = 0;
    for mu_prime in mu.branch_down() {
        let sub = cache.dual(&mu_prime, limits)?;
        let count = mu_prime.dim();
        for q_low in 0..count {
            for i in 1..=d {
                let mut col = Vec::new();
                for j in 1..=d {
                    let Some(b) = targets[j - 1] else { continue };
                    let block = &outputs[b];
                    if i == d {
                        let t = dual_reduced_wigner(mu, j, mu_prime.entries(), 0)?;
                        if t != 0.0 {
                            let row = block.offset + sub_offset(&block.target, &mu_prime) + q_low;
                            col.push((row as u32, t));
                        }
                    } else {
                        for &(r, c) in sub.column(q_low, i) {
                            let (nb, k) = sub.locate_row(r as usize);
                            let nu_prime = &sub.outputs[nb].target;
                            let jp = mu_prime.changed_index(nu_prime).expect("one box removed");
                            let t = dual_reduced_wigner(mu, j, mu_prime.entries(), jp)?;
                            if t != 0.0 {
                                let row = block.offset + sub_offset(&block.target, nu_prime) + k;
                                col.push((row as u32, t * c));
                            }
                        }
                    }
                }
                col.sort_unstable_by_key(|e| e.0);
                normalize(&mut col);
                columns.push(col);
            }
        }
        q += count;
    }
    debug_assert_eq!(q, patterns.len());
    Ok(CgTransform { input: mu.clone(), kind: CgKind::Dual, outputs, columns })
}

/// Rescales a column to unit norm. Columns are unit vectors in exact
/// arithmetic; this removes the accumulated rounding of the square-root
/// products, and makes single-entry columns exactly `±1`.
fn normalize(col: &mut [(u32, f64)]) {
    let norm = col.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
    if norm > 0.0 {
        for e in col.iter_mut() {
            e.1 /= norm;
        }
    }
}

fn build_defining(lambda: &Staircase, limits: &Limits, cache: &CgCache) -> Result<CgTransform> {
    let d = lambda.d();
    let dim_lambda = lambda.dim();
    let outputs = output_blocks(lambda.add_box_set());
    let mut columns: Vec<Vec<(u32, f64)>> = vec![Vec::new(); dim_lambda * d];
    for block in &outputs {
        let dual = cache.dual(&block.target, limits)?;
        let lb = dual.block_index(lambda).expect("λ ∈ ν − □");
        let src = &dual.outputs[lb];
        let scale = (block.size as f64 / dim_lambda as f64).sqrt();
        for q_nu in 0..block.size {
            for i in 1..=d {
                for &(r, c) in dual.column(q_nu, i) {
                    let r = r as usize;
                    if r >= src.offset && r < src.offset + src.size {
                        let q_lambda = r - src.offset;
                        columns[q_lambda * d + i - 1].push(((block.offset + q_nu) as u32, scale * c));
                    }
                }
            }
        }
    }
    for col in &mut columns {
        col.sort_unstable_by_key(|e| e.0);
        normalize(col);
    }
    let t = CgTransform { input: lambda.clone(), kind: CgKind::Defining, outputs, columns };
    if dim_lambda * d <= 512 {
        let residual = t.unitarity_residual();
        if residual > 1e-8 {
            return Err(Error::NotUnitary { what: format!("defining CG of {lambda}"), residual });
        }
    }
    Ok(t)
}
