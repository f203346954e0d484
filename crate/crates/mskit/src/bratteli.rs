//! The Bratteli diagram of the walled Brauer tower, its paths, and the irrep census.
//!
//! Level `k` of the diagram holds the staircases reachable after the first `k`
//! tensor factors. A defining factor adds a box (`γ → γ + e_j`), a dual factor
//! removes one (`γ → γ − e_j`); staircases longer than `d` never arise because
//! staircases are stored with exactly `d` entries. A path from the root to `γ`
//! (an up-down staircase tableau) labels one basis vector of the multiplicity
//! space of `γ`, and is encoded by the sequence of changed indices `j`.
//!
//! Paths to a fixed `γ` are ordered colexicographically on their step indices:
//! the *last* step is the most significant key.
//!
//! ```
//! use mskit::bratteli::census;
//! use mskit::Limits;
//!
//! let entries = census(2, 2, 3, &Limits::default()).unwrap();
//! let total: u64 = entries.iter().map(|e| e.dim * e.mult).sum();
//! assert_eq!(total, 81);
//! ```

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::staircase::{standard_tableaux_count, Staircase};
use crate::Limits;

/// Kind of one tensor factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Factor {
    /// The defining representation `U` (adds a box).
    Defining,
    /// The dual representation `Ū` (removes a box).
    Dual,
}

impl Factor {
    /// `+1` for defining, `−1` for dual (the tableau type `ε_i`).
    pub fn sign(self) -> i64 {
        match self {
            Factor::Defining => 1,
            Factor::Dual => -1,
        }
    }

    /// `'+'` or `'-'`.
    pub fn symbol(self) -> char {
        match self {
            Factor::Defining => '+',
            Factor::Dual => '-',
        }
    }
}

/// The ordered sequence of tensor factors of a mixed tensor space.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FactorOrder(Vec<Factor>);

impl FactorOrder {
    /// Wraps an explicit sequence.
    pub fn new(factors: Vec<Factor>) -> Self {
        FactorOrder(factors)
    }

    /// `n` defining factors followed by `m` dual factors.
    pub fn standard(n: usize, m: usize) -> Self {
        let mut v = vec![Factor::Defining; n];
        v.extend(std::iter::repeat_n(Factor::Dual, m));
        FactorOrder(v)
    }

    /// `m` dual factors followed by `n` defining factors (the Choi register order).
    pub fn dual_first(n: usize, m: usize) -> Self {
        let mut v = vec![Factor::Dual; m];
        v.extend(std::iter::repeat_n(Factor::Defining, n));
        FactorOrder(v)
    }

    /// Builds an order from a type sequence of `±1` values.
    pub fn from_signs(signs: &[i64]) -> Result<Self> {
        signs
            .iter()
            .map(|&s| match s {
                1 => Ok(Factor::Defining),
                -1 => Ok(Factor::Dual),
                other => Err(Error::Parse(format!("type entries must be ±1, found {other}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(FactorOrder)
    }

    /// The factors in order.
    pub fn factors(&self) -> &[Factor] {
        &self.0
    }

    /// Total number of factors `n + m`.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// True when there are no factors.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of defining factors.
    pub fn n(&self) -> usize {
        self.0.iter().filter(|&&f| f == Factor::Defining).count()
    }

    /// Number of dual factors.
    pub fn m(&self) -> usize {
        self.0.len() - self.n()
    }

    /// Errors unless the order has exactly `n` defining and `m` dual factors.
    pub fn check_counts(&self, n: usize, m: usize) -> Result<()> {
        if self.n() != n || self.m() != m {
            return Err(Error::Precondition(format!(
                "factor order {self} does not have {n} defining and {m} dual factors"
            )));
        }
        Ok(())
    }

    /// Tensor positions of the defining factors followed by those of the dual
    /// factors: the map from walled-Brauer columns to tensor positions.
    pub fn column_positions(&self) -> Vec<usize> {
        let mut pos: Vec<usize> = (0..self.len()).filter(|&k| self.0[k] == Factor::Defining).collect();
        pos.extend((0..self.len()).filter(|&k| self.0[k] == Factor::Dual));
        pos
    }
}

impl fmt::Display for FactorOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for x in &self.0 {
            write!(f, "{}", x.symbol())?;
        }
        Ok(())
    }
}

impl FromStr for FactorOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.trim()
            .chars()
            .map(|c| match c {
                '+' => Ok(Factor::Defining),
                '-' | '\u{2212}' => Ok(Factor::Dual),
                other => Err(Error::Parse(format!("factor order character {other:?} is not + or -"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(FactorOrder)
    }
}

/// One edge of the diagram: target vertex index on the next level and the
/// changed entry `j` (1-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    /// Index of the target vertex within the next level.
    pub target: usize,
    /// The 1-based changed entry.
    pub j: usize,
}

/// The layered branching graph of the tower, for a given factor order.
#[derive(Clone, Debug)]
pub struct BratteliDiagram {
    d: usize,
    order: FactorOrder,
    levels: Vec<Vec<Staircase>>,
    edges: Vec<Vec<Vec<Edge>>>,
    counts: Vec<Vec<u128>>,
}

impl BratteliDiagram {
    /// The diagram for `n` defining factors followed by `m` dual factors.
    pub fn build(n: usize, m: usize, d: usize) -> Self {
        Self::build_with_order(&FactorOrder::standard(n, m), d)
    }

    /// The diagram for an arbitrary factor order.
    ///
    /// # Panics
    /// Panics if `d == 0`.
    pub fn build_with_order(order: &FactorOrder, d: usize) -> Self {
        let mut levels = vec![vec![Staircase::zero(d)]];
        let mut edges = Vec::new();
        let mut counts = vec![vec![1u128]];
        for &factor in order.factors() {
            let prev = levels.last().expect("root level exists");
            let prev_counts = counts.last().expect("root level exists");
            let mut next: Vec<Staircase> = Vec::new();
            let mut index: HashMap<Staircase, usize> = HashMap::new();
            let mut raw: Vec<Vec<(Staircase, usize)>> = Vec::with_capacity(prev.len());
            for g in prev {
                let mut out = Vec::new();
                for j in 1..=d {
                    if let Some(h) = g.step(j, factor.sign()) {
                        index.entry(h.clone()).or_insert_with(|| {
                            next.push(h.clone());
                            0
                        });
                        out.push((h, j));
                    }
                }
                raw.push(out);
            }
            next.sort();
            for (k, g) in next.iter().enumerate() {
                index.insert(g.clone(), k);
            }
            let mut level_edges = Vec::with_capacity(prev.len());
            let mut next_counts = vec![0u128; next.len()];
            for (src, out) in raw.into_iter().enumerate() {
                let es: Vec<Edge> = out.into_iter().map(|(h, j)| Edge { target: index[&h], j }).collect();
                for e in &es {
                    next_counts[e.target] += prev_counts[src];
                }
                level_edges.push(es);
            }
            levels.push(next);
            edges.push(level_edges);
            counts.push(next_counts);
        }
        BratteliDiagram { d, order: order.clone(), levels, edges, counts }
    }

    /// Local dimension.
    pub fn d(&self) -> usize {
        self.d
    }

    /// The factor order the diagram was built for.
    pub fn order(&self) -> &FactorOrder {
        &self.order
    }

    /// Vertex sets of levels `0 … n+m`, each in canonical order.
    pub fn levels(&self) -> &[Vec<Staircase>] {
        &self.levels
    }

    /// Outgoing edges of vertex `v` on level `k` (`k < n+m`).
    pub fn edges_from(&self, k: usize, v: usize) -> &[Edge] {
        &self.edges[k][v]
    }

    /// The top level: the irreps appearing in the full tensor space.
    pub fn top(&self) -> &[Staircase] {
        self.levels.last().expect("root level exists")
    }

    /// Number of root-to-vertex paths for every vertex, level by level.
    pub fn path_counts(&self) -> &[Vec<u128>] {
        &self.counts
    }

    /// Number of paths from the root to `γ` on the top level (0 if absent).
    pub fn multiplicity(&self, gamma: &Staircase) -> u128 {
        match self.top().binary_search(gamma) {
            Ok(k) => self.counts.last().expect("root level exists")[k],
            Err(_) => 0,
        }
    }

    /// All paths from the root to `γ`, colexicographic in the step indices.
    pub fn paths_to(&self, gamma: &Staircase) -> Result<Vec<BratteliPath>> {
        let top = self.levels.len() - 1;
        let target = self.levels[top]
            .binary_search(gamma)
            .map_err(|_| Error::Precondition(format!("{gamma} is not on the top level")))?;
        // Reverse adjacency: for each level k+1 vertex, its (source, j) parents.
        let mut parents: Vec<Vec<Vec<(usize, usize)>>> = Vec::with_capacity(top);
        for k in 0..top {
            let mut p = vec![Vec::new(); self.levels[k + 1].len()];
            for (src, es) in self.edges[k].iter().enumerate() {
                for e in es {
                    p[e.target].push((src, e.j));
                }
            }
            parents.push(p);
        }
        let mut out = Vec::new();
        let mut js = vec![0usize; top];
        fn walk(
            level: usize,
            v: usize,
            parents: &[Vec<Vec<(usize, usize)>>],
            js: &mut Vec<usize>,
            out: &mut Vec<Vec<usize>>,
        ) {
            if level == 0 {
                out.push(js.clone());
                return;
            }
            for &(src, j) in &parents[level - 1][v] {
                js[level - 1] = j;
                walk(level - 1, src, parents, js, out);
            }
        }
        walk(top, target, &parents, &mut js, &mut out);
        out.sort_by(|a, b| colex_cmp(a, b));
        out.into_iter().map(|steps| BratteliPath::from_steps(&self.order, self.d, steps)).collect()
    }

    /// Graphviz rendering with one rank per level, vertices labelled by staircase.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph bratteli {\n  rankdir=TB;\n  node [shape=box];\n");
        for (k, level) in self.levels.iter().enumerate() {
            s.push_str("  { rank=same;");
            for (v, g) in level.iter().enumerate() {
                s.push_str(&format!(" \"L{k}_{v}\" [label=\"{g}\"];"));
            }
            s.push_str(" }\n");
        }
        for (k, level_edges) in self.edges.iter().enumerate() {
            for (v, es) in level_edges.iter().enumerate() {
                for e in es {
                    s.push_str(&format!("  \"L{k}_{v}\" -> \"L{}_{}\" [label=\"{}\"];\n", k + 1, e.target, e.j));
                }
            }
        }
        s.push_str("}\n");
        s
    }
}

/// Colexicographic comparison: the last differing position decides.
pub(crate) fn colex_cmp(a: &[usize], b: &[usize]) -> Ordering {
    a.iter().rev().cmp(b.iter().rev())
}

/// A root-to-top path, i.e. an up-down staircase tableau of the given type.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BratteliPath {
    order: FactorOrder,
    steps: Vec<usize>,
    vertices: Vec<Staircase>,
}

impl BratteliPath {
    /// Builds a path from its changed indices, validating every step.
    pub fn from_steps(order: &FactorOrder, d: usize, steps: Vec<usize>) -> Result<Self> {
        if steps.len() != order.len() {
            return Err(Error::LengthMismatch { expected: order.len(), found: steps.len() });
        }
        if d == 0 {
            return Err(Error::Precondition("d must be positive".into()));
        }
        let mut vertices = vec![Staircase::zero(d)];
        for (k, (&j, &f)) in steps.iter().zip(order.factors()).enumerate() {
            let cur = vertices.last().expect("root exists");
            let next = cur
                .step(j, f.sign())
                .ok_or_else(|| Error::InvalidPath(format!("step {} (j = {j}) from {cur} is not allowed", k + 1)))?;
            vertices.push(next);
        }
        Ok(BratteliPath { order: order.clone(), steps, vertices })
    }

    /// Builds a path from its vertex sequence (starting at the zero staircase),
    /// inferring the type of every step.
    pub fn from_vertices(vertices: Vec<Staircase>) -> Result<Self> {
        let first = vertices.first().ok_or_else(|| Error::InvalidPath("empty sequence".into()))?;
        if first != &Staircase::zero(first.d()) {
            return Err(Error::InvalidPath(format!("path must start at the zero staircase, not {first}")));
        }
        let mut factors = Vec::new();
        let mut steps = Vec::new();
        for w in vertices.windows(2) {
            let j = w[0]
                .changed_index(&w[1])
                .ok_or_else(|| Error::InvalidPath(format!("{} → {} is not a single box move", w[0], w[1])))?;
            let up = w[1].entries()[j - 1] > w[0].entries()[j - 1];
            factors.push(if up { Factor::Defining } else { Factor::Dual });
            steps.push(j);
        }
        Ok(BratteliPath { order: FactorOrder::new(factors), steps, vertices })
    }

    /// The tableau type (factor order) of the path.
    pub fn order(&self) -> &FactorOrder {
        &self.order
    }

    /// Changed index `j` of every step.
    pub fn steps(&self) -> &[usize] {
        &self.steps
    }

    /// The staircases visited, root first.
    pub fn vertices(&self) -> &[Staircase] {
        &self.vertices
    }

    /// The final staircase.
    pub fn shape(&self) -> &Staircase {
        self.vertices.last().expect("root exists")
    }

    /// Fixed-width binary encoding: `⌈log2 d⌉` bits per step holding `j − 1`.
    pub fn encode(&self) -> String {
        let w = bits_per_step(self.shape().d());
        self.steps.iter().map(|&j| format!("{:0w$b}", j - 1, w = w)).collect::<Vec<_>>().concat()
    }

    /// Inverse of [`BratteliPath::encode`].
    pub fn decode(order: &FactorOrder, d: usize, bits: &str) -> Result<Self> {
        let w = bits_per_step(d);
        if bits.len() != w * order.len() || bits.chars().any(|c| c != '0' && c != '1') {
            return Err(Error::InvalidPath(format!("expected {} binary digits, found {bits:?}", w * order.len())));
        }
        let steps = (0..order.len())
            .map(|k| {
                let chunk = &bits[k * w..(k + 1) * w];
                let j = if w == 0 { 1 } else { usize::from_str_radix(chunk, 2).expect("binary digits") + 1 };
                if j > d {
                    return Err(Error::InvalidPath(format!("step {} encodes j = {j} > d = {d}", k + 1)));
                }
                Ok(j)
            })
            .collect::<Result<Vec<_>>>()?;
        BratteliPath::from_steps(order, d, steps)
    }
}

fn bits_per_step(d: usize) -> usize {
    (usize::BITS - (d.max(1) - 1).leading_zeros()) as usize
}

/// One row of the irrep census.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensusEntry {
    /// The irrep label.
    pub staircase: Staircase,
    /// Dimension of the U(d) irrep.
    pub dim: u64,
    /// Multiplicity (number of Bratteli paths).
    pub mult: u64,
}

/// Every irrep of `U^⊗n ⊗ Ū^⊗m` with its dimension and multiplicity, in
/// canonical staircase order.
pub fn census(n: usize, m: usize, d: usize, limits: &Limits) -> Result<Vec<CensusEntry>> {
    if d == 0 {
        return Err(Error::Precondition("d must be positive".into()));
    }
    limits.check_tensor_dim(d, n + m)?;
    let diagram = BratteliDiagram::build(n, m, d);
    let counts = diagram.path_counts().last().expect("root level exists");
    Ok(diagram
        .top()
        .iter()
        .zip(counts)
        .map(|(g, &mult)| CensusEntry { staircase: g.clone(), dim: g.dim() as u64, mult: mult as u64 })
        .collect())
}

/// Path counts per top-level staircase for an arbitrary type sequence `ε` with
/// `n` entries `+1` and `m` entries `−1`.
pub fn count_paths_reordered(n: usize, m: usize, d: usize, eps: &[i64]) -> Result<BTreeMap<Staircase, u128>> {
    let order = FactorOrder::from_signs(eps)?;
    order.check_counts(n, m)?;
    if d == 0 {
        return Err(Error::Precondition("d must be positive".into()));
    }
    let diagram = BratteliDiagram::build_with_order(&order, d);
    let counts = diagram.path_counts().last().expect("root level exists");
    Ok(diagram.top().iter().cloned().zip(counts.iter().copied()).collect())
}

/// Upper bound `C(n,k)·C(m,k)·k!·f^α·f^β` on the multiplicity of `γ = [α, β]`,
/// with `k = n − |α|` and `f` the standard-tableau count.
pub fn multiplicity_bound(gamma: &Staircase, n: usize, m: usize) -> BigUint {
    let (alpha, beta) = gamma.to_pair();
    let size_a: u64 = alpha.iter().sum();
    if size_a as usize > n {
        return BigUint::from(0u32);
    }
    let k = n - size_a as usize;
    if k > m {
        return BigUint::from(0u32);
    }
    let binom = |a: usize, b: usize| -> BigUint {
        let mut r = BigUint::from(1u32);
        for i in 0..b {
            r = r * BigUint::from(a - i) / BigUint::from(i + 1);
        }
        r
    };
    let mut fact = BigUint::from(1u32);
    for i in 2..=k {
        fact *= i;
    }
    binom(n, k) * binom(m, k) * fact * standard_tableaux_count(&alpha) * standard_tableaux_count(&beta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(v: &[i64]) -> Staircase {
        Staircase::new(v.to_vec()).unwrap()
    }

    fn pairs(n: usize, m: usize, d: usize) -> Vec<(Vec<i64>, u64, u64)> {
        census(n, m, d, &Limits::default())
            .unwrap()
            .into_iter()
            .map(|e| (e.staircase.entries().to_vec(), e.dim, e.mult))
            .collect()
    }

    #[test]
    fn census_examples() {
        let mut c = pairs(2, 2, 3);
        c.sort();
        assert_eq!(
            c,
            vec![
                (vec![0, 0, 0], 1, 2),
                (vec![1, 0, -1], 8, 4),
                (vec![1, 1, -2], 10, 1),
                (vec![2, -1, -1], 10, 1),
                (vec![2, 0, -2], 27, 1),
            ]
        );
        assert_eq!(pairs(2, 1, 2), vec![(vec![1, 0], 2, 2), (vec![2, -1], 4, 1)]);
        assert_eq!(
            pairs(4, 0, 3),
            vec![(vec![2, 1, 1], 3, 3), (vec![2, 2, 0], 6, 2), (vec![3, 1, 0], 15, 3), (vec![4, 0, 0], 15, 1)]
        );
        assert_eq!(pairs(0, 0, 5), vec![(vec![0; 5], 1, 1)]);
    }

    #[test]
    fn census_respects_cap() {
        let limits = Limits { dim_cap: 100, ..Limits::default() };
        assert!(matches!(census(2, 2, 4, &limits), Err(Error::CapExceeded { .. })));
        assert!(census(2, 1, 4, &limits).is_ok());
    }

    #[test]
    fn build_examples() {
        assert_eq!(BratteliDiagram::build(2, 2, 3).top().len(), 5);
        assert_eq!(BratteliDiagram::build(2, 1, 2).top(), &[st(&[1, 0]), st(&[2, -1])]);
        let trivial = BratteliDiagram::build(0, 0, 4);
        assert_eq!(trivial.levels().len(), 1);
        assert_eq!(trivial.top(), &[Staircase::zero(4)]);
    }

    #[test]
    fn multiplicity_depends_on_d() {
        let g2 = st(&[1, -1]);
        assert_eq!(BratteliDiagram::build(2, 2, 2).paths_to(&g2).unwrap().len(), 3);
        let g3 = st(&[1, 0, -1]);
        assert_eq!(BratteliDiagram::build(2, 2, 3).paths_to(&g3).unwrap().len(), 4);
    }

    #[test]
    fn paths_of_the_smallest_mixed_example() {
        let diagram = BratteliDiagram::build(2, 1, 2);
        let paths = diagram.paths_to(&st(&[1, 0])).unwrap();
        let steps: Vec<Vec<usize>> = paths.iter().map(|p| p.steps().to_vec()).collect();
        // (0,0) → (1,0) → (2,0) → (1,0) and (0,0) → (1,0) → (1,1) → (1,0).
        assert_eq!(steps, vec![vec![1, 1, 1], vec![1, 2, 2]]);
        let top = diagram.paths_to(&st(&[2, -1])).unwrap();
        assert_eq!(top.len(), 1);
        assert_eq!(top[0].steps(), &[1, 1, 2]);
        assert!(diagram.paths_to(&st(&[3, -2])).is_err());
    }

    #[test]
    fn path_encoding_round_trips() {
        let order = FactorOrder::standard(2, 1);
        let p = BratteliPath::from_steps(&order, 2, vec![1, 1, 2]).unwrap();
        assert_eq!(p.vertices(), &[st(&[0, 0]), st(&[1, 0]), st(&[2, 0]), st(&[2, -1])]);
        assert_eq!(p.encode(), "001");
        let diagram = BratteliDiagram::build(2, 2, 2);
        for g in diagram.top() {
            for path in diagram.paths_to(g).unwrap() {
                let back = BratteliPath::decode(diagram.order(), 2, &path.encode()).unwrap();
                assert_eq!(back, path);
            }
        }
        // d = 3 uses two bits per step; "11" would be j = 4.
        let order = FactorOrder::standard(1, 0);
        assert!(BratteliPath::decode(&order, 3, "11").is_err());
        assert!(BratteliPath::decode(&order, 3, "1").is_err());
        // j = 2 as the first step of a defining factor is not a valid box addition.
        assert!(BratteliPath::decode(&order, 3, "01").is_err());
        assert_eq!(BratteliPath::decode(&order, 1, "").unwrap().shape(), &st(&[1]));
    }

    #[test]
    fn up_down_tableau_example_is_a_valid_path() {
        let verts =
            vec![st(&[0, 0, 0]), st(&[0, 0, -1]), st(&[1, 0, -1]), st(&[1, 0, 0]), st(&[1, 1, 0]), st(&[1, 1, -1])];
        let p = BratteliPath::from_vertices(verts).unwrap();
        assert_eq!(p.order().to_string(), "-+++-");
        let diagram = BratteliDiagram::build_with_order(p.order(), 3);
        assert!(diagram.paths_to(p.shape()).unwrap().contains(&p));
        assert!(BratteliPath::from_vertices(vec![st(&[0, 0]), st(&[2, 0])]).is_err());
    }

    #[test]
    fn reordered_counts_match() {
        let a = count_paths_reordered(2, 2, 2, &[1, 1, -1, -1]).unwrap();
        let b = count_paths_reordered(2, 2, 2, &[1, -1, 1, -1]).unwrap();
        assert_eq!(a, b);
        assert!(count_paths_reordered(2, 2, 2, &[1, 1, 1, -1]).is_err());
        assert!(count_paths_reordered(2, 2, 2, &[1, 1, 0, -1]).is_err());
        // Only additions: standard Young tableau counts.
        let syt = count_paths_reordered(4, 0, 4, &[1, 1, 1, 1]).unwrap();
        for (g, c) in syt {
            let (alpha, _) = g.to_pair();
            assert_eq!(BigUint::from(c), standard_tableaux_count(&alpha));
        }
    }

    #[test]
    fn reordering_invariance_is_exhaustive_for_small_towers() {
        for d in 1..=3 {
            for total in 0..=5usize {
                for n in 0..=total {
                    let m = total - n;
                    let reference = count_paths_reordered(
                        n,
                        m,
                        d,
                        &FactorOrder::standard(n, m).factors().iter().map(|f| f.sign()).collect::<Vec<_>>(),
                    )
                    .unwrap();
                    for mask in 0u32..(1 << total) {
                        if mask.count_ones() as usize != n {
                            continue;
                        }
                        let eps: Vec<i64> = (0..total).map(|k| if mask >> k & 1 == 1 { 1 } else { -1 }).collect();
                        assert_eq!(count_paths_reordered(n, m, d, &eps).unwrap(), reference, "{eps:?} d={d}");
                    }
                }
            }
        }
    }

    #[test]
    fn census_identity_and_multiplicity_bound_on_grid() {
        let limits = Limits::default();
        for d in 1..=4usize {
            for total in 0..=12usize {
                if (d as u128).pow(total as u32) > 4096 || (d == 1 && total > 6) {
                    continue;
                }
                for n in 0..=total {
                    let m = total - n;
                    let c = census(n, m, d, &limits).unwrap();
                    let sum: u64 = c.iter().map(|e| e.dim * e.mult).sum();
                    assert_eq!(sum as u128, (d as u128).pow(total as u32));
                    for e in &c {
                        assert!(BigUint::from(e.mult) <= multiplicity_bound(&e.staircase, n, m), "{}", e.staircase);
                        let (a, b) = e.staircase.to_pair();
                        assert!(a.len() + b.len() <= d);
                    }
                }
            }
        }
    }

    #[test]
    fn dot_export_lists_levels() {
        let dot = BratteliDiagram::build(2, 2, 2).to_dot();
        assert!(dot.starts_with("digraph bratteli {"));
        assert!(dot.contains("[label=\"[1,-1]\"]"));
        assert_eq!(dot.matches("rank=same").count(), 5);
        let single = BratteliDiagram::build(0, 0, 2).to_dot();
        assert_eq!(single.matches("label=").count(), 1);
    }

    #[test]
    fn factor_order_parsing() {
        let o: FactorOrder = "++-".parse().unwrap();
        assert_eq!(o, FactorOrder::standard(2, 1));
        assert_eq!("−++".parse::<FactorOrder>().unwrap(), FactorOrder::dual_first(2, 1));
        assert!("+x".parse::<FactorOrder>().is_err());
        assert_eq!(FactorOrder::dual_first(2, 1).column_positions(), vec![1, 2, 0]);
    }
}
