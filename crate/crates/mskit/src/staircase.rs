//! Staircases: the labels of rational irreps of U(d).
//!
//! A staircase is a weakly decreasing integer tuple `(γ_1, …, γ_d)`. Splitting it
//! into its positive part `α` and its negated, reversed negative part `β` gives
//! the equivalent pair-of-Young-diagrams view `[α, β]`.
//!
//! Staircases are totally ordered by ascending lexicographic comparison of their
//! entries; that order is used for every deterministic listing in the crate.
//!
//! ```
//! use mskit::staircase::Staircase;
//!
//! let gamma: Staircase = "[2,0,-2]".parse().unwrap();
//! assert_eq!(gamma.dim(), 27);
//! assert_eq!(gamma.to_string(), "[2,0,-2]");
//! ```

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A weakly decreasing integer tuple of length `d ≥ 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<i64>", into = "Vec<i64>")]
pub struct Staircase {
    entries: Vec<i64>,
}

impl Staircase {
    /// Validates and wraps a tuple of entries.
    pub fn new(entries: Vec<i64>) -> Result<Self> {
        if entries.is_empty() || entries.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidStaircase(entries));
        }
        Ok(Staircase { entries })
    }

    /// The all-zero staircase (trivial irrep) of length `d`.
    ///
    /// # Panics
    /// Panics if `d == 0`.
    pub fn zero(d: usize) -> Self {
        assert!(d >= 1, "staircase length must be positive");
        Staircase { entries: vec![0; d] }
    }

    /// The local dimension `d`, i.e. the tuple length.
    pub fn d(&self) -> usize {
        self.entries.len()
    }

    /// The entries `γ_1 … γ_d`.
    pub fn entries(&self) -> &[i64] {
        &self.entries
    }

    /// Sum of the entries (number of boxes of `α` minus boxes of `β`).
    pub fn total(&self) -> i64 {
        self.entries.iter().sum()
    }

    /// `γ + e_j` for 1-based `j`, if still weakly decreasing.
    pub fn add_box(&self, j: usize) -> Option<Staircase> {
        self.step(j, 1)
    }

    /// `γ − e_j` for 1-based `j`, if still weakly decreasing.
    pub fn remove_box(&self, j: usize) -> Option<Staircase> {
        self.step(j, -1)
    }

    /// `γ + delta·e_j` when valid; `delta` is ±1.
    pub(crate) fn step(&self, j: usize, delta: i64) -> Option<Staircase> {
        if j == 0 || j > self.d() {
            return None;
        }
        let mut entries = self.entries.clone();
        entries[j - 1] += delta;
        let ok = (j == 1 || entries[j - 2] >= entries[j - 1]) && (j == self.d() || entries[j - 1] >= entries[j]);
        ok.then_some(Staircase { entries })
    }

    /// All `γ + e_j` that remain valid, in canonical (ascending) order.
    pub fn add_box_set(&self) -> Vec<Staircase> {
        let mut out: Vec<_> = (1..=self.d()).filter_map(|j| self.add_box(j)).collect();
        out.sort();
        out
    }

    /// All `γ − e_j` that remain valid, in canonical (ascending) order.
    pub fn remove_box_set(&self) -> Vec<Staircase> {
        let mut out: Vec<_> = (1..=self.d()).filter_map(|j| self.remove_box(j)).collect();
        out.sort();
        out
    }

    /// The 1-based index `j` at which `other` differs from `self` by exactly ±1,
    /// provided they differ in that single position only.
    pub fn changed_index(&self, other: &Staircase) -> Option<usize> {
        if self.d() != other.d() {
            return None;
        }
        let mut found = None;
        for (k, (a, b)) in self.entries.iter().zip(&other.entries).enumerate() {
            if a != b {
                if found.is_some() || (a - b).abs() != 1 {
                    return None;
                }
                found = Some(k + 1);
            }
        }
        found
    }

    /// Every staircase of length `d − 1` interlacing `self`, ascending.
    ///
    /// Returns an empty list when `d = 1`.
    pub fn branch_down(&self) -> Vec<Staircase> {
        let d = self.d();
        if d == 1 {
            return Vec::new();
        }
        let lo: Vec<i64> = self.entries[1..].to_vec();
        let hi: Vec<i64> = self.entries[..d - 1].to_vec();
        let mut cur = lo.clone();
        let mut out = Vec::new();
        loop {
            out.push(Staircase { entries: cur.clone() });
            // Odometer increment, last position fastest, gives ascending lex order.
            let mut k = d - 1;
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                if cur[k] < hi[k] {
                    cur[k] += 1;
                    cur[k + 1..d - 1].copy_from_slice(&lo[k + 1..d - 1]);
                    break;
                }
            }
        }
    }

    /// Exact Weyl dimension `∏_{i<j}(γ_i − γ_j + j − i) / ∏_{i<j}(j − i)`.
    pub fn dim_exact(&self) -> BigUint {
        let d = self.d();
        let mut num = BigUint::from(1u32);
        let mut den = BigUint::from(1u32);
        for i in 0..d {
            for j in i + 1..d {
                let diff = self.entries[i] - self.entries[j] + (j - i) as i64;
                num *= diff as u64;
                den *= (j - i) as u64;
            }
        }
        num / den
    }

    /// Weyl dimension as a machine integer.
    ///
    /// # Panics
    /// Panics if the dimension does not fit in `usize`; use
    /// [`Staircase::dim_exact`] for astronomically large irreps.
    pub fn dim(&self) -> usize {
        self.dim_exact().to_usize().expect("irrep dimension does not fit in usize")
    }

    /// Adds `c` to every entry (tensoring with the `c`-th power of the determinant).
    pub fn shifted(&self, c: i64) -> Staircase {
        Staircase { entries: self.entries.iter().map(|x| x + c).collect() }
    }

    /// Every staircase of length `d` with all entries in `lo..=hi`, ascending.
    pub fn all_in_range(d: usize, lo: i64, hi: i64) -> Vec<Staircase> {
        fn rec(d: usize, hi: i64, lo: i64, prefix: &mut Vec<i64>, out: &mut Vec<Staircase>) {
            if prefix.len() == d {
                out.push(Staircase { entries: prefix.clone() });
                return;
            }
            for x in lo..=hi {
                prefix.push(x);
                rec(d, x, lo, prefix, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        if d >= 1 && lo <= hi {
            rec(d, hi, lo, &mut Vec::with_capacity(d), &mut out);
        }
        out.sort();
        out
    }

    /// Pair-of-Young-diagrams view `[α, β]`: `α` are the positive entries, `β` the
    /// negated negative entries read from the right.
    pub fn to_pair(&self) -> (Vec<u64>, Vec<u64>) {
        let alpha = self.entries.iter().filter(|&&x| x > 0).map(|&x| x as u64).collect();
        let beta = self.entries.iter().rev().filter(|&&x| x < 0).map(|&x| (-x) as u64).collect();
        (alpha, beta)
    }

    /// Inverse of [`Staircase::to_pair`], padding zeros between the two parts.
    pub fn from_pair(alpha: &[u64], beta: &[u64], d: usize) -> Result<Staircase> {
        let alpha: Vec<u64> = alpha.iter().copied().filter(|&x| x > 0).collect();
        let beta: Vec<u64> = beta.iter().copied().filter(|&x| x > 0).collect();
        if alpha.len() + beta.len() > d {
            return Err(Error::Precondition(format!(
                "diagrams with {} + {} rows do not fit in length {d}",
                alpha.len(),
                beta.len()
            )));
        }
        let mut entries: Vec<i64> = alpha.iter().map(|&x| x as i64).collect();
        entries.resize(d - beta.len(), 0);
        entries.extend(beta.iter().rev().map(|&x| -(x as i64)));
        Staircase::new(entries)
    }
}

/// Weyl branching: `γ_i ≥ μ_i ≥ γ_{i+1}` for every `i`.
pub fn interlaces(mu: &Staircase, gamma: &Staircase) -> Result<bool> {
    if mu.d() + 1 != gamma.d() {
        return Err(Error::LengthMismatch { expected: gamma.d() - 1, found: mu.d() });
    }
    let g = gamma.entries();
    Ok(mu.entries().iter().enumerate().all(|(i, &m)| g[i] >= m && m >= g[i + 1]))
}

/// Number of standard Young tableaux of a partition, by the hook-length formula.
///
/// Zero rows are ignored; the empty shape has exactly one tableau.
pub fn standard_tableaux_count(shape: &[u64]) -> BigUint {
    let rows: Vec<u64> = shape.iter().copied().filter(|&x| x > 0).collect();
    let n: u64 = rows.iter().sum();
    let mut num = BigUint::from(1u32);
    for k in 2..=n {
        num *= k;
    }
    let mut den = BigUint::from(1u32);
    for (i, &len) in rows.iter().enumerate() {
        for j in 0..len {
            let arm = len - j - 1;
            let leg = rows[i + 1..].iter().filter(|&&r| r > j).count() as u64;
            den *= arm + leg + 1;
        }
    }
    num / den
}

impl fmt::Display for Staircase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (k, x) in self.entries.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, "]")
    }
}

impl FromStr for Staircase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let inner = s
            .trim()
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(|| Error::Parse(format!("staircase must be bracketed: {s:?}")))?;
        let entries = inner
            .split(',')
            .map(|t| t.trim().parse::<i64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse(format!("staircase {s:?}: {e}")))?;
        Staircase::new(entries)
    }
}

impl TryFrom<Vec<i64>> for Staircase {
    type Error = Error;

    fn try_from(v: Vec<i64>) -> Result<Self> {
        Staircase::new(v)
    }
}

impl From<Staircase> for Vec<i64> {
    fn from(s: Staircase) -> Vec<i64> {
        s.entries
    }
}
