//! Walled Brauer diagrams and the partially transposed permutation representation.
//!
//! A diagram on `n + m` columns has a top row `t_1 … t_{n+m}` and a bottom row
//! `b_1 … b_{n+m}`, with a wall after column `n`. Every node is paired with
//! exactly one other node; a pair within one row must cross the wall, a pair
//! between rows must not. Slots are stored 0-based: top node `t_k` is slot
//! `k − 1`, bottom node `b_k` is slot `n + m + k − 1`.
//!
//! The representation `ψ(σ)` on `(C^d)^⊗(n+m)` has entry 1 at (row `i`, column
//! `j`) exactly when the labels agree across every pair, where the top nodes
//! carry the row digits `i_1 … i_{n+m}` and the bottom nodes the column digits
//! (first column most significant). Stacking `σ1` over `σ2` gives
//! `ψ(σ1)·ψ(σ2) = d^loops · ψ(σ1 ∘ σ2)`.
//!
//! ```
//! use mskit::brauer::WalledBrauerDiagram;
//!
//! let cup_cap = WalledBrauerDiagram::parse("t1-t2,b1-b2", 1, 1).unwrap();
//! let (prod, loops) = cup_cap.compose(&cup_cap).unwrap();
//! assert_eq!(loops, 1);
//! assert_eq!(prod, cup_cap);
//! ```

use std::fmt;

use crate::error::{Error, Result};
use crate::Limits;

/// A perfect matching of `2(n+m)` nodes respecting the wall after column `n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WalledBrauerDiagram {
    n: usize,
    m: usize,
    partner: Vec<usize>,
}

impl WalledBrauerDiagram {
    /// Validates a partner array over `2(n+m)` slots, including the wall rule.
    pub fn new(n: usize, m: usize, partner: Vec<usize>) -> Result<Self> {
        let d = Self::from_pairing(n, m, partner)?;
        if !d.is_walled() {
            return Err(Error::InvalidDiagram(format!("{d} violates the wall after column {n}")));
        }
        Ok(d)
    }

    /// Accepts any perfect matching of the `2(n+m)` slots, walled or not.
    ///
    /// Partial transposes of walled diagrams are permutation wirings, which
    /// generally cross the wall; this constructor admits them.
    pub fn from_pairing(n: usize, m: usize, partner: Vec<usize>) -> Result<Self> {
        let cols = n + m;
        if partner.len() != 2 * cols {
            return Err(Error::InvalidDiagram(format!("expected {} slots, found {}", 2 * cols, partner.len())));
        }
        for (a, &b) in partner.iter().enumerate() {
            if b >= 2 * cols || b == a || partner[b] != a {
                return Err(Error::InvalidDiagram(format!("slot {a} is not properly paired")));
            }
        }
        Ok(WalledBrauerDiagram { n, m, partner })
    }

    /// True if same-row pairs cross the wall and cross-row pairs do not.
    pub fn is_walled(&self) -> bool {
        let cols = self.n + self.m;
        self.partner.iter().enumerate().all(|(a, &b)| {
            let same_row = (a < cols) == (b < cols);
            let same_side = self.left(a) == self.left(b);
            same_row != same_side
        })
    }

    /// True if every pair joins the top row to the bottom row.
    pub fn is_permutation_wiring(&self) -> bool {
        let cols = self.n + self.m;
        self.partner.iter().enumerate().all(|(a, &b)| (a < cols) != (b < cols))
    }

    fn left(&self, slot: usize) -> bool {
        slot % (self.n + self.m) < self.n
    }

    fn slot_name(&self, slot: usize) -> String {
        let cols = self.n + self.m;
        debug_assert!(slot < 2 * cols);
        if slot < cols {
            format!("t{}", slot + 1)
        } else {
            format!("b{}", slot - cols + 1)
        }
    }

    /// Number of columns left of the wall.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of columns right of the wall.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Partner slot of every slot.
    pub fn partner(&self) -> &[usize] {
        &self.partner
    }

    /// The identity diagram `t_k – b_k`.
    pub fn identity(n: usize, m: usize) -> Self {
        let cols = n + m;
        let partner = (0..2 * cols).map(|s| (s + cols) % (2 * cols)).collect();
        WalledBrauerDiagram { n, m, partner }
    }

    /// Parses the text encoding `t1-b1,t2-t3,…` (1-based node indices) for a
    /// diagram with `n` columns left of the wall and `m` right of it.
    pub fn parse(s: &str, n: usize, m: usize) -> Result<Self> {
        let cols = n + m;
        let mut partner = vec![usize::MAX; 2 * cols];
        let node = |x: &str| -> Result<usize> {
            let x = x.trim();
            let (top, idx) = if let Some(rest) = x.strip_prefix('t') {
                (true, rest)
            } else if let Some(rest) = x.strip_prefix('b') {
                (false, rest)
            } else {
                return Err(Error::Parse(format!("node {x:?} must start with t or b")));
            };
            let k: usize = idx.parse().map_err(|_| Error::Parse(format!("bad node index in {x:?}")))?;
            if k == 0 || k > cols {
                return Err(Error::Parse(format!("node {x:?} outside columns 1..={cols}")));
            }
            Ok(if top { k - 1 } else { cols + k - 1 })
        };
        for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (a, b) =
                tok.split_once('-').ok_or_else(|| Error::Parse(format!("pair {tok:?} must look like t1-b2")))?;
            let (sa, sb) = (node(a)?, node(b)?);
            if sa == sb || partner[sa] != usize::MAX || partner[sb] != usize::MAX {
                return Err(Error::Parse(format!("node used twice in {s:?}")));
            }
            partner[sa] = sb;
            partner[sb] = sa;
        }
        if partner.contains(&usize::MAX) {
            return Err(Error::Parse(format!("some nodes are unpaired in {s:?}")));
        }
        WalledBrauerDiagram::new(n, m, partner)
    }

    /// The diagram whose partial transpose wires `t_i` to `b_{π(i)}`
    /// (`π` given 0-based); `ψ` of that partial transpose is the qudit
    /// permutation sending tensor position `π(i)` to position `i`.
    pub fn from_permutation(perm: &[usize], n: usize, m: usize) -> Result<Self> {
        let cols = n + m;
        if perm.len() != cols {
            return Err(Error::LengthMismatch { expected: cols, found: perm.len() });
        }
        let mut seen = vec![false; cols];
        for &p in perm {
            if p >= cols || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidDiagram(format!("{perm:?} is not a permutation")));
            }
        }
        let mut partner = vec![0; 2 * cols];
        for (i, &p) in perm.iter().enumerate() {
            partner[i] = cols + p;
            partner[cols + p] = i;
        }
        let wiring = WalledBrauerDiagram { n, m, partner };
        let out = wiring.swap_rows(|col| col >= n);
        debug_assert!(out.is_walled());
        Ok(out)
    }

    /// Exchanges the top and bottom nodes of every column selected by `pick`.
    fn swap_rows(&self, pick: impl Fn(usize) -> bool) -> Self {
        let cols = self.n + self.m;
        let f = |s: usize| -> usize {
            let col = s % cols;
            if pick(col) {
                (s + cols) % (2 * cols)
            } else {
                s
            }
        };
        let mut partner = vec![0; 2 * cols];
        for s in 0..2 * cols {
            partner[f(s)] = f(self.partner[s]);
        }
        WalledBrauerDiagram { n: self.n, m: self.m, partner }
    }

    /// Partial transpose `σ^Γ`: exchanges top and bottom of the last `m` columns.
    ///
    /// Maps walled diagrams to permutation wirings and back; an involution.
    pub fn partial_transpose(&self) -> Self {
        let out = self.swap_rows(|col| col >= self.n);
        debug_assert_eq!(self.is_walled(), out.is_permutation_wiring());
        out
    }

    /// Vertical reflection `σ^†`; `ψ(σ^†) = ψ(σ)^T`.
    pub fn adjoint(&self) -> Self {
        self.swap_rows(|_| true)
    }

    /// Stacks `self` on top of `other` and contracts the middle row.
    ///
    /// Returns the resulting diagram and the number of closed loops removed.
    pub fn compose(&self, other: &Self) -> Result<(Self, usize)> {
        if self.n != other.n || self.m != other.m {
            return Err(Error::ShapeMismatch(format!(
                "cannot compose B({},{}) with B({},{})",
                self.n, self.m, other.n, other.m
            )));
        }
        let cols = self.n + self.m;
        // External slots: top of self (0..cols) and bottom of other (cols..2cols).
        let mut partner = vec![usize::MAX; 2 * cols];
        let mut middle_seen = vec![false; cols];
        // Follows a strand entering the middle row at column `k` from above
        // (coming from `self`) or from below (coming from `other`).
        let trace = |mut col: usize, mut from_top: bool, seen: &mut Vec<bool>| -> usize {
            loop {
                seen[col] = true;
                if from_top {
                    // Now in `other` at its top node t_col.
                    let q = other.partner[col];
                    if q >= cols {
                        return q;
                    }
                    col = q;
                    from_top = false;
                } else {
                    // Now in `self` at its bottom node b_col.
                    let q = self.partner[cols + col];
                    if q < cols {
                        return q;
                    }
                    col = q - cols;
                    from_top = true;
                }
            }
        };
        for s in 0..2 * cols {
            if partner[s] != usize::MAX {
                continue;
            }
            let end = if s < cols {
                let q = self.partner[s];
                if q < cols {
                    q
                } else {
                    trace(q - cols, true, &mut middle_seen)
                }
            } else {
                let q = other.partner[s];
                if q >= cols {
                    q
                } else {
                    trace(q, false, &mut middle_seen)
                }
            };
            partner[s] = end;
            partner[end] = s;
        }
        // Remaining middle nodes form closed loops.
        let mut loops = 0;
        for k in 0..cols {
            if middle_seen[k] {
                continue;
            }
            loops += 1;
            let mut col = k;
            loop {
                middle_seen[col] = true;
                let q = other.partner[col];
                middle_seen[q] = true;
                let next = self.partner[cols + q];
                debug_assert!(q < cols && next >= cols, "loops stay in the middle row");
                col = next - cols;
                if middle_seen[col] {
                    break;
                }
            }
        }
        let out = WalledBrauerDiagram::from_pairing(self.n, self.m, partner)?;
        debug_assert!(!(self.is_walled() && other.is_walled()) || out.is_walled());
        Ok((out, loops))
    }

    /// The matrix `ψ(σ)` on `d^(n+m)` dimensions, tensor positions in column order.
    pub fn represent(&self, d: usize, limits: &Limits) -> Result<PtpMatrix> {
        let positions: Vec<usize> = (0..self.n + self.m).collect();
        self.represent_at(d, &positions, limits)
    }

    /// `ψ(σ)` with column `c` of the diagram acting on tensor position `positions[c]`.
    pub fn represent_at(&self, d: usize, positions: &[usize], limits: &Limits) -> Result<PtpMatrix> {
        let cols = self.n + self.m;
        if positions.len() != cols {
            return Err(Error::LengthMismatch { expected: cols, found: positions.len() });
        }
        let dim = limits.check_tensor_dim(d, cols)?;
        let weight: Vec<usize> = positions.iter().map(|&p| d.pow((cols - 1 - p) as u32)).collect();
        let pairs: Vec<(usize, usize)> =
            (0..2 * cols).filter(|&s| s < self.partner[s]).map(|s| (s, self.partner[s])).collect();
        let mut col_rows: Vec<Vec<usize>> = vec![Vec::new(); dim];
        let mut values = vec![0usize; pairs.len()];
        loop {
            let (mut row, mut col) = (0usize, 0usize);
            for (&(a, b), &v) in pairs.iter().zip(&values) {
                for s in [a, b] {
                    if s < cols {
                        row += v * weight[s];
                    } else {
                        col += v * weight[s - cols];
                    }
                }
            }
            col_rows[col].push(row);
            let mut k = 0;
            while k < values.len() {
                values[k] += 1;
                if values[k] < d {
                    break;
                }
                values[k] = 0;
                k += 1;
            }
            if k == values.len() {
                break;
            }
        }
        for rows in &mut col_rows {
            rows.sort_unstable();
        }
        Ok(PtpMatrix { dim, col_rows })
    }
}

/// Every diagram of `B_{n,m}`, obtained as partial transposes of all
/// permutations in lexicographic order; there are `(n+m)!` of them.
pub fn all_diagrams(n: usize, m: usize) -> Vec<WalledBrauerDiagram> {
    let cols = n + m;
    let mut perm: Vec<usize> = (0..cols).collect();
    let mut out = Vec::new();
    loop {
        out.push(WalledBrauerDiagram::from_permutation(&perm, n, m).expect("permutations give valid diagrams"));
        // Next lexicographic permutation.
        let Some(i) = (1..cols).rev().find(|&i| perm[i - 1] < perm[i]) else {
            return out;
        };
        let j = (i..cols).rev().find(|&j| perm[j] > perm[i - 1]).expect("successor exists");
        perm.swap(i - 1, j);
        perm[i..].reverse();
    }
}

impl fmt::Display for WalledBrauerDiagram {
    /// Pairs as `t1-b1,t2-t3,…`, each pair once, ordered by its first slot.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for s in 0..self.partner.len() {
            let q = self.partner[s];
            if s < q {
                if !first {
                    write!(f, ",")?;
                }
                first = false;
                write!(f, "{}-{}", self.slot_name(s), self.slot_name(q))?;
            }
        }
        Ok(())
    }
}

/// The 0/1 matrix `ψ(σ)`, stored column by column.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PtpMatrix {
    dim: usize,
    col_rows: Vec<Vec<usize>>,
}

impl PtpMatrix {
    /// Matrix dimension `d^(n+m)`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row indices of the unit entries in column `col`, ascending.
    pub fn column(&self, col: usize) -> &[usize] {
        &self.col_rows[col]
    }

    /// Coordinate list of the unit entries, sorted by (row, column).
    pub fn entries(&self) -> Vec<(usize, usize)> {
        let mut v: Vec<(usize, usize)> =
            self.col_rows.iter().enumerate().flat_map(|(c, rows)| rows.iter().map(move |&r| (r, c))).collect();
        v.sort_unstable();
        v
    }

    /// Number of unit entries.
    pub fn nnz(&self) -> usize {
        self.col_rows.iter().map(Vec::len).sum()
    }

    /// True if every row and column holds exactly one unit entry.
    pub fn is_permutation(&self) -> bool {
        let mut row_count = vec![0usize; self.dim];
        for rows in &self.col_rows {
            if rows.len() != 1 {
                return false;
            }
            row_count[rows[0]] += 1;
        }
        row_count.iter().all(|&c| c == 1)
    }

    /// `ψ·x` for a dense vector.
    pub fn apply<T>(&self, x: &[T]) -> Vec<T>
    where
        T: Copy + Default + std::ops::AddAssign,
    {
        let mut y = vec![T::default(); self.dim];
        for (c, rows) in self.col_rows.iter().enumerate() {
            for &r in rows {
                y[r] += x[c];
            }
        }
        y
    }

    /// Dense row-major integer matrix.
    pub fn to_dense(&self) -> Vec<i64> {
        let mut out = vec![0i64; self.dim * self.dim];
        for (c, rows) in self.col_rows.iter().enumerate() {
            for &r in rows {
                out[r * self.dim + c] += 1;
            }
        }
        out
    }
}

/// Checks `ψ(σ1)·ψ(σ2) = d^loops · ψ(σ1 ∘ σ2)` exactly, in integer arithmetic.
pub fn loop_homomorphism_holds(
    s1: &WalledBrauerDiagram,
    s2: &WalledBrauerDiagram,
    d: usize,
    limits: &Limits,
) -> Result<bool> {
    let (prod, loops) = s1.compose(s2)?;
    let (a, b) = (s1.represent(d, limits)?, s2.represent(d, limits)?);
    let dim = a.dim();
    let mut lhs = vec![0i64; dim * dim];
    for c in 0..dim {
        for &r in b.column(c) {
            for &r2 in a.column(r) {
                lhs[r2 * dim + c] += 1;
            }
        }
    }
    let factor = (d as i64).pow(loops as u32);
    let rhs: Vec<i64> = prod.represent(d, limits)?.to_dense().into_iter().map(|x| x * factor).collect();
    Ok(lhs == rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn digits(x: usize, d: usize, len: usize) -> Vec<usize> {
        (0..len).map(|k| x / d.pow((len - 1 - k) as u32) % d).collect()
    }

    #[test]
    fn figure_diagram_matches_delta_product() {
        let sigma = WalledBrauerDiagram::parse("t1-b1,t2-b3,t3-t4,t5-b4,b2-b5", 3, 2).unwrap();
        let d = 2;
        let dense = sigma.represent(d, &Limits::default()).unwrap().to_dense();
        for row in 0..32 {
            for col in 0..32 {
                let i = digits(row, d, 5);
                let j = digits(col, d, 5);
                let expect = i[0] == j[0] && i[1] == j[2] && i[2] == i[3] && i[4] == j[3] && j[1] == j[4];
                assert_eq!(dense[row * 32 + col], expect as i64, "({row},{col})");
            }
        }
        assert!(sigma.partial_transpose().is_permutation_wiring());
        assert!(sigma.partial_transpose().represent(d, &Limits::default()).unwrap().is_permutation());
    }

    #[test]
    fn small_representations() {
        let limits = Limits::default();
        let id = WalledBrauerDiagram::identity(1, 1).represent(3, &limits).unwrap().to_dense();
        for r in 0..9 {
            for c in 0..9 {
                assert_eq!(id[r * 9 + c], (r == c) as i64);
            }
        }
        let cup_cap = WalledBrauerDiagram::parse("t1-t2,b1-b2", 1, 1).unwrap();
        let m = cup_cap.represent(3, &limits).unwrap();
        let mut expect = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                expect.push((4 * i, 4 * j));
            }
        }
        expect.sort_unstable();
        assert_eq!(m.entries(), expect);
    }

    #[test]
    fn permutations_and_partial_transposes() {
        let cup_cap = WalledBrauerDiagram::parse("t1-t2,b1-b2", 1, 1).unwrap();
        assert_eq!(WalledBrauerDiagram::from_permutation(&[1, 0], 1, 1).unwrap(), cup_cap);
        assert_eq!(WalledBrauerDiagram::from_permutation(&[0, 1], 1, 1).unwrap(), WalledBrauerDiagram::identity(1, 1));
        assert_eq!(cup_cap.partial_transpose().to_string(), "t1-b2,t2-b1");
        assert_eq!(
            WalledBrauerDiagram::from_permutation(&[0, 1, 2], 3, 0).unwrap(),
            WalledBrauerDiagram::identity(3, 0)
        );
        let swap = WalledBrauerDiagram::from_permutation(&[1, 0], 2, 0).unwrap();
        assert_eq!(swap.to_string(), "t1-b2,t2-b1");
        let m = swap.represent(2, &Limits::default()).unwrap();
        assert_eq!(m.apply(&[0, 1, 2, 3]), vec![0, 2, 1, 3]);
        assert!(WalledBrauerDiagram::from_permutation(&[0, 0], 2, 0).is_err());
    }

    #[test]
    fn permutation_diagram_realises_qudit_permutation() {
        let d = 2;
        let perm = [2, 0, 1];
        let sigma = WalledBrauerDiagram::from_permutation(&perm, 2, 1).unwrap();
        let p = sigma.partial_transpose().represent(d, &Limits::default()).unwrap();
        for x in 0..8 {
            let xd = digits(x, d, 3);
            let yd: Vec<usize> = (0..3).map(|i| xd[perm[i]]).collect();
            let y = yd.iter().fold(0, |acc, &v| acc * d + v);
            assert_eq!(p.column(x), &[y]);
        }
    }

    #[test]
    fn composition_examples() {
        let cup_cap = WalledBrauerDiagram::parse("t1-t2,b1-b2", 1, 1).unwrap();
        assert_eq!(cup_cap.compose(&cup_cap).unwrap(), (cup_cap.clone(), 1));
        for total in 0..=4 {
            for n in 0..=total {
                let all = all_diagrams(n, total - n);
                let fact: usize = (1..=total).product();
                assert_eq!(all.len(), fact);
                let mut sorted = all.clone();
                sorted.sort();
                sorted.dedup();
                assert_eq!(sorted.len(), fact);
                let e = WalledBrauerDiagram::identity(n, total - n);
                for s in &all {
                    assert!(s.is_walled());
                    assert_eq!(e.compose(s).unwrap(), (s.clone(), 0));
                    assert_eq!(s.compose(&e).unwrap(), (s.clone(), 0));
                    assert_eq!(&s.partial_transpose().partial_transpose(), s);
                    assert_eq!(&s.adjoint().adjoint(), s);
                }
            }
        }
        let other = WalledBrauerDiagram::identity(2, 0);
        assert!(cup_cap.compose(&other).is_err());
    }

    #[test]
    fn loop_homomorphism_is_exact() {
        let limits = Limits::default();
        for total in 1..=4 {
            for n in 0..=total {
                let all = all_diagrams(n, total - n);
                for d in [2, 3] {
                    for a in &all {
                        for b in &all {
                            assert!(loop_homomorphism_holds(a, b, d, &limits).unwrap(), "{a} ∘ {b}, d={d}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn partial_transposes_are_permutations_and_adjoint_is_transpose() {
        let limits = Limits::default();
        for n in 0..=3 {
            for s in all_diagrams(n, 3 - n) {
                let p = s.partial_transpose().represent(2, &limits).unwrap();
                assert!(p.is_permutation());
                let a = s.represent(2, &limits).unwrap().to_dense();
                let b = s.adjoint().represent(2, &limits).unwrap().to_dense();
                for r in 0..8 {
                    for c in 0..8 {
                        assert_eq!(a[r * 8 + c], b[c * 8 + r]);
                    }
                }
            }
        }
    }

    #[test]
    fn text_encoding() {
        let s = WalledBrauerDiagram::parse("t1-b1, t2-t3, b2-b3", 2, 1).unwrap();
        assert_eq!(s.to_string(), "t1-b1,t2-t3,b2-b3");
        assert_eq!(WalledBrauerDiagram::parse(&s.to_string(), 2, 1).unwrap(), s);
        assert!(WalledBrauerDiagram::parse("t1-b1,t2-b2", 1, 1).is_ok());
        assert!(WalledBrauerDiagram::parse("t1-t2,b1-b2", 2, 0).is_err());
        assert!(WalledBrauerDiagram::parse("t1-b1", 2, 0).is_err());
        assert!(WalledBrauerDiagram::parse("t1-b1,t1-b2", 2, 0).is_err());
        assert!(WalledBrauerDiagram::parse("x1-b1", 1, 0).is_err());
        assert!(WalledBrauerDiagram::parse("t3-b1", 1, 0).is_err());
    }

    #[test]
    fn cap_is_enforced() {
        let limits = Limits { dim_cap: 16, ..Limits::default() };
        assert!(WalledBrauerDiagram::identity(3, 0).represent(3, &limits).is_err());
        assert!(WalledBrauerDiagram::identity(2, 0).represent(4, &limits).is_ok());
    }

    #[test]
    fn positions_relocate_columns() {
        let limits = Limits::default();
        let cup_cap = WalledBrauerDiagram::parse("t1-t2,b1-b2", 1, 1).unwrap();
        // Swapping the two tensor positions leaves the symmetric cup-cap unchanged.
        assert_eq!(cup_cap.represent_at(3, &[1, 0], &limits).unwrap(), cup_cap.represent(3, &limits).unwrap());
        let s = WalledBrauerDiagram::parse("t1-b1,t2-t3,b2-b3", 2, 1).unwrap();
        let moved = s.represent_at(2, &[1, 2, 0], &limits).unwrap();
        assert_eq!(moved.nnz(), s.represent(2, &limits).unwrap().nnz());
        assert!(s.represent_at(2, &[0, 1], &limits).is_err());
    }
}
