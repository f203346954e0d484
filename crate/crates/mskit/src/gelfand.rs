//! Gelfand–Tsetlin patterns: the subgroup-adapted basis of a rational irrep.
//!
//! A pattern for a staircase `γ` of length `d` is a triangular array whose top
//! row is `γ` and whose row of length `k − 1` interlaces the row of length `k`.
//! Entries may be negative. Patterns are ordered by comparing rows from the top
//! down, each row lexicographically ascending; with the top row fixed this
//! makes all patterns sharing a second row contiguous, which is what
//! [`subduce`] reports.
//!
//! ```
//! use mskit::gelfand::{enumerate_patterns, pattern_at};
//! use mskit::staircase::Staircase;
//!
//! let mu: Staircase = "[2,-1]".parse().unwrap();
//! let pats = enumerate_patterns(&mu);
//! assert_eq!(pats.len(), 4);
//! assert_eq!(pattern_at(&mu, 0).unwrap().rows(), vec![vec![2, -1], vec![-1]]);
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::staircase::{interlaces, Staircase};

/// One Gelfand–Tsetlin pattern, stored flat with the top row first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<i64>>", into = "Vec<Vec<i64>>")]
pub struct GtPattern {
    d: usize,
    data: Vec<i64>,
}

impl GtPattern {
    /// Builds a pattern from its rows, top row (length `d`) first.
    pub fn from_rows(rows: Vec<Vec<i64>>) -> Result<Self> {
        let d = rows.len();
        if d == 0 {
            return Err(Error::Parse("a pattern needs at least one row".into()));
        }
        for (k, row) in rows.iter().enumerate() {
            if row.len() != d - k {
                return Err(Error::LengthMismatch { expected: d - k, found: row.len() });
            }
        }
        Staircase::new(rows[0].clone())?;
        for k in 1..d {
            let upper = Staircase::new(rows[k - 1].clone())?;
            let lower = Staircase::new(rows[k].clone())?;
            if !interlaces(&lower, &upper)? {
                return Err(Error::Precondition(format!("row {:?} does not interlace {:?}", rows[k], rows[k - 1])));
            }
        }
        Ok(GtPattern { d, data: rows.concat() })
    }

    /// Length of the top row.
    pub fn d(&self) -> usize {
        self.d
    }

    /// The row of length `k` (`1 ≤ k ≤ d`).
    pub fn row(&self, k: usize) -> &[i64] {
        assert!(k >= 1 && k <= self.d, "row length {k} out of range");
        let start = (self.d * (self.d + 1) - k * (k + 1)) / 2;
        &self.data[start..start + k]
    }

    /// All rows, top row first.
    pub fn rows(&self) -> Vec<Vec<i64>> {
        (1..=self.d).rev().map(|k| self.row(k).to_vec()).collect()
    }

    /// The top row as a staircase.
    pub fn top(&self) -> Staircase {
        Staircase::new(self.row(self.d).to_vec()).expect("stored rows are valid")
    }

    /// The pattern of length `d − 1` obtained by deleting the top row.
    pub fn lower(&self) -> Option<GtPattern> {
        (self.d > 1).then(|| GtPattern { d: self.d - 1, data: self.data[self.d..].to_vec() })
    }

    /// Weight `w_k = Σ row_k − Σ row_{k−1}` for `k = 1 … d` (entry `k − 1`).
    pub fn weight(&self) -> Vec<i64> {
        let mut prev = 0;
        (1..=self.d)
            .map(|k| {
                let s: i64 = self.row(k).iter().sum();
                let w = s - prev;
                prev = s;
                w
            })
            .collect()
    }

    /// Position of this pattern in the canonical order of its top row.
    pub fn index(&self) -> usize {
        match self.lower() {
            None => 0,
            Some(low) => {
                let mu_prime = low.top();
                let offset: usize =
                    self.top().branch_down().iter().take_while(|m| **m < mu_prime).map(Staircase::dim).sum();
                offset + low.index()
            }
        }
    }
}

impl TryFrom<Vec<Vec<i64>>> for GtPattern {
    type Error = Error;

    fn try_from(rows: Vec<Vec<i64>>) -> Result<Self> {
        GtPattern::from_rows(rows)
    }
}

impl From<GtPattern> for Vec<Vec<i64>> {
    fn from(p: GtPattern) -> Self {
        p.rows()
    }
}

/// All patterns with top row `γ`, in canonical order.
pub fn enumerate_patterns(gamma: &Staircase) -> Vec<GtPattern> {
    let d = gamma.d();
    if d == 1 {
        return vec![GtPattern { d: 1, data: gamma.entries().to_vec() }];
    }
    let mut out = Vec::with_capacity(gamma.dim());
    for mu in gamma.branch_down() {
        for low in enumerate_patterns(&mu) {
            let mut data = gamma.entries().to_vec();
            data.extend_from_slice(&low.data);
            out.push(GtPattern { d, data });
        }
    }
    out
}

/// Canonical index of a pattern (inverse of [`pattern_at`]).
pub fn index_of(pattern: &GtPattern) -> usize {
    pattern.index()
}

/// The pattern at canonical position `idx` for top row `γ`.
pub fn pattern_at(gamma: &Staircase, idx: usize) -> Result<GtPattern> {
    let size = gamma.dim();
    if idx >= size {
        return Err(Error::IndexOutOfRange { index: idx, size });
    }
    let d = gamma.d();
    if d == 1 {
        return Ok(GtPattern { d: 1, data: gamma.entries().to_vec() });
    }
    let mut rest = idx;
    for mu in gamma.branch_down() {
        let count = mu.dim();
        if rest < count {
            let low = pattern_at(&mu, rest)?;
            let mut data = gamma.entries().to_vec();
            data.extend_from_slice(&low.data);
            return Ok(GtPattern { d, data });
        }
        rest -= count;
    }
    unreachable!("branching dimensions sum to dim(γ)")
}

/// One contiguous run of patterns sharing the second row `mu_prime`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubBlock {
    /// The shared second row, a staircase of length `d − 1`.
    pub mu_prime: Staircase,
    /// Index of the first pattern of the run.
    pub offset: usize,
    /// Number of patterns in the run, `dim(μ′)`.
    pub count: usize,
}

/// Restriction of `γ` to U(d − 1): the runs of the canonical pattern order
/// grouped by second row.
///
/// Errors for `d = 1`, where there is no smaller unitary group to restrict to.
pub fn subduce(gamma: &Staircase) -> Result<Vec<SubBlock>> {
    if gamma.d() < 2 {
        return Err(Error::Precondition("subduce needs d ≥ 2".into()));
    }
    let mut offset = 0;
    Ok(gamma
        .branch_down()
        .into_iter()
        .map(|mu_prime| {
            let count = mu_prime.dim();
            let block = SubBlock { mu_prime, offset, count };
            offset += count;
            block
        })
        .collect())
}

/// Offset of the run with second row `mu_prime` inside `γ`'s pattern order.
pub(crate) fn sub_offset(gamma: &Staircase, mu_prime: &Staircase) -> usize {
    gamma.branch_down().iter().take_while(|m| *m < mu_prime).map(Staircase::dim).sum()
}
