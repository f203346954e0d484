//! The plain-text `mskit-matrix` file format.
//!
//! Every file starts with a header line `mskit-matrix 1 <n> <m> <d>` and a
//! factor-order line of `+`/`-` characters. What follows depends on the
//! payload:
//!
//! - a transform lists one label line `γ=[..] q=<i> p=<j>` per output basis
//!   vector, then the matrix;
//! - a Choi matrix has the extension line `choi <m> <n> <d>`, then the matrix;
//! - a state has the extension line `state <k> <d>`, then the matrix.
//!
//! Matrix rows are one per line with space-separated `re,im` entries. Numbers
//! use the shortest representation that round-trips, so writing is
//! byte-deterministic and reading recovers the exact values.
//!
//! ```
//! use mskit::bratteli::FactorOrder;
//! use mskit::io::{read_transform, write_transform};
//! use mskit::schur::SchurTransform;
//! use mskit::Limits;
//!
//! let w = SchurTransform::build(2, 1, 2, &FactorOrder::standard(2, 1), &Limits::default()).unwrap();
//! let text = write_transform(&w);
//! assert!(text.starts_with("mskit-matrix 1 2 1 2\n++-\n"));
//! assert_eq!(read_transform(&text, &Limits::default()).unwrap(), w);
//! ```

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::bratteli::FactorOrder;
use crate::channels::ChoiMatrix;
use crate::error::{Error, Result};
use crate::schur::{SchurLabel, SchurTransform};
use crate::Limits;

/// First token of every file.
pub const MAGIC: &str = "mskit-matrix";

/// Format version written and accepted.
pub const VERSION: u32 = 1;

/// What a matrix file carries besides the matrix.
#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    /// A transform with one label per output basis vector.
    Transform {
        /// Labels in row order.
        labels: Vec<SchurLabel>,
    },
    /// A Choi matrix of a channel from `m` to `n` qudits.
    Choi {
        /// Input qudits.
        m: usize,
        /// Output qudits.
        n: usize,
    },
    /// A density matrix of `k` qudits.
    State {
        /// Number of qudits.
        k: usize,
    },
}

/// A parsed matrix file.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixFile {
    /// Number of defining factors in the header.
    pub n: usize,
    /// Number of dual factors in the header.
    pub m: usize,
    /// Local dimension.
    pub d: usize,
    /// The factor order line.
    pub order: FactorOrder,
    /// The payload description.
    pub payload: Payload,
    /// The matrix.
    pub matrix: DMatrix<Complex64>,
}

impl MatrixFile {
    /// Serializes the file.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{MAGIC} {VERSION} {} {} {}", self.n, self.m, self.d).unwrap();
        writeln!(out, "{}", self.order).unwrap();
        match &self.payload {
            Payload::Transform { labels } => {
                for l in labels {
                    writeln!(out, "{l}").unwrap();
                }
            }
            Payload::Choi { m, n } => writeln!(out, "choi {m} {n} {}", self.d).unwrap(),
            Payload::State { k } => writeln!(out, "state {k} {}", self.d).unwrap(),
        }
        for r in 0..self.matrix.nrows() {
            for c in 0..self.matrix.ncols() {
                if c > 0 {
                    out.push(' ');
                }
                let z = self.matrix[(r, c)];
                write!(out, "{},{}", fmt_real(z.re), fmt_real(z.im)).unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Parses a file, checking the header, payload, and matrix shape.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let mut next =
            |what: &str| lines.next().ok_or_else(|| Error::Parse(format!("unexpected end of file: expected {what}")));

        let (_, header) = next("header")?;
        let tokens: Vec<&str> = header.split_whitespace().collect();
        if tokens.len() != 5 || tokens[0] != MAGIC {
            return Err(Error::Parse(format!("header must be `{MAGIC} {VERSION} <n> <m> <d>`, found {header:?}")));
        }
        let version: u32 = parse_num(tokens[1], "version")?;
        if version != VERSION {
            return Err(Error::Parse(format!("unsupported format version {version}")));
        }
        let n: usize = parse_num(tokens[2], "n")?;
        let m: usize = parse_num(tokens[3], "m")?;
        let d: usize = parse_num(tokens[4], "d")?;
        if d == 0 {
            return Err(Error::Parse("local dimension must be positive".into()));
        }
        let (_, order_line) = next("factor order")?;
        let order: FactorOrder = order_line.parse()?;
        order.check_counts(n, m).map_err(|e| Error::Parse(e.to_string()))?;
        let dim = d
            .checked_pow((n + m) as u32)
            .filter(|&x| x <= u32::MAX as usize)
            .ok_or_else(|| Error::Parse(format!("dimension {d}^{} is too large", n + m)))?;

        let (line_no, first) = next("payload")?;
        let payload = if let Some(rest) = first.strip_prefix("choi ") {
            let v = parse_triple(rest, "choi")?;
            if v != [m, n, d] {
                return Err(Error::Parse(format!("choi line {v:?} disagrees with the header (m={m}, n={n}, d={d})")));
            }
            if order != FactorOrder::dual_first(n, m) {
                return Err(Error::Parse(format!(
                    "a Choi matrix needs its {m} dual factors first, found order {order}"
                )));
            }
            Payload::Choi { m, n }
        } else if let Some(rest) = first.strip_prefix("state ") {
            let v: Vec<usize> = rest.split_whitespace().map(|t| parse_num(t, "state")).collect::<Result<_>>()?;
            if v != [n + m, d] || m != 0 {
                return Err(Error::Parse(format!("state line {v:?} disagrees with the header (n={n}, m={m}, d={d})")));
            }
            Payload::State { k: n }
        } else if first.trim_start().starts_with("γ=") || first.trim_start().starts_with("gamma=") {
            let mut labels = Vec::with_capacity(dim);
            labels.push(first.parse::<SchurLabel>().map_err(|e| at_line(line_no, e))?);
            while labels.len() < dim {
                let (no, l) = next("label")?;
                labels.push(l.parse::<SchurLabel>().map_err(|e| at_line(no, e))?);
            }
            Payload::Transform { labels }
        } else {
            return Err(Error::Parse(format!(
                "line {}: expected labels, `choi`, or `state`, found {first:?}",
                line_no + 1
            )));
        };

        let mut matrix = DMatrix::zeros(dim, dim);
        for r in 0..dim {
            let (no, row) = next("matrix row")?;
            let entries: Vec<&str> = row.split_whitespace().collect();
            if entries.len() != dim {
                return Err(Error::Parse(format!(
                    "line {}: row has {} entries, expected {dim}",
                    no + 1,
                    entries.len()
                )));
            }
            for (c, e) in entries.iter().enumerate() {
                matrix[(r, c)] = parse_entry(e).map_err(|err| at_line(no, err))?;
            }
        }
        while let Ok((no, l)) = next("") {
            if !l.trim().is_empty() {
                return Err(Error::Parse(format!("line {}: trailing content {:?}", no + 1, l)));
            }
        }
        Ok(MatrixFile { n, m, d, order, payload, matrix })
    }
}

fn at_line(line_no: usize, e: Error) -> Error {
    Error::Parse(format!("line {}: {e}", line_no + 1))
}

fn parse_num<T: std::str::FromStr>(token: &str, what: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    token.parse().map_err(|e| Error::Parse(format!("{what} {token:?}: {e}")))
}

fn parse_triple(rest: &str, what: &str) -> Result<[usize; 3]> {
    let v: Vec<usize> = rest.split_whitespace().map(|t| parse_num(t, what)).collect::<Result<_>>()?;
    v.try_into().map_err(|v: Vec<usize>| Error::Parse(format!("{what} line needs three numbers, found {}", v.len())))
}

fn parse_entry(token: &str) -> Result<Complex64> {
    let (re, im) = token.split_once(',').ok_or_else(|| Error::Parse(format!("entry {token:?} is not `re,im`")))?;
    let re: f64 = parse_num(re, "real part")?;
    let im: f64 = parse_num(im, "imaginary part")?;
    if !re.is_finite() || !im.is_finite() {
        return Err(Error::Parse(format!("entry {token:?} is not finite")));
    }
    Ok(Complex64::new(re, im))
}

/// Shortest round-trip decimal, with negative zero printed as `0`.
fn fmt_real(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x:?}")
    }
}

/// Serializes a transform with its labels.
pub fn write_transform(w: &SchurTransform) -> String {
    MatrixFile {
        n: w.n(),
        m: w.m(),
        d: w.d(),
        order: w.order().clone(),
        payload: Payload::Transform { labels: w.labels() },
        matrix: crate::linalg::complexify(&w.to_dense()),
    }
    .to_text()
}

/// Reads a transform; labels must be in canonical order and entries real.
pub fn read_transform(text: &str, limits: &Limits) -> Result<SchurTransform> {
    let file = MatrixFile::parse(text)?;
    let Payload::Transform { labels } = &file.payload else {
        return Err(Error::Parse("file does not contain a transform".into()));
    };
    if let Some(z) = file.matrix.iter().find(|z| z.im != 0.0) {
        return Err(Error::Parse(format!("transform entries must be real, found {z}")));
    }
    let real = file.matrix.map(|z| z.re);
    SchurTransform::from_dense(file.n, file.m, file.d, &file.order, labels, &real, limits)
}

/// Serializes a Choi matrix.
pub fn write_choi(j: &ChoiMatrix) -> String {
    MatrixFile {
        n: j.n_out(),
        m: j.m_in(),
        d: j.d(),
        order: j.factor_order(),
        payload: Payload::Choi { m: j.m_in(), n: j.n_out() },
        matrix: j.matrix().clone(),
    }
    .to_text()
}

/// Reads a Choi matrix.
pub fn read_choi(text: &str) -> Result<ChoiMatrix> {
    let file = MatrixFile::parse(text)?;
    match file.payload {
        Payload::Choi { m, n } => ChoiMatrix::new(m, n, file.d, file.matrix),
        _ => Err(Error::Parse("file does not contain a Choi matrix".into())),
    }
}

/// Serializes a density matrix of `k` qudits of dimension `d`.
pub fn write_state(rho: &DMatrix<Complex64>, d: usize) -> Result<String> {
    let k = qudit_count(rho.nrows(), d)?;
    if !rho.is_square() {
        return Err(Error::ShapeMismatch("a state must be square".into()));
    }
    Ok(MatrixFile {
        n: k,
        m: 0,
        d,
        order: FactorOrder::standard(k, 0),
        payload: Payload::State { k },
        matrix: rho.clone(),
    }
    .to_text())
}

/// Reads a density matrix, returning `(d, ρ)`.
pub fn read_state(text: &str) -> Result<(usize, DMatrix<Complex64>)> {
    let file = MatrixFile::parse(text)?;
    match file.payload {
        Payload::State { .. } => Ok((file.d, file.matrix)),
        _ => Err(Error::Parse("file does not contain a state".into())),
    }
}

/// `k` with `d^k = dim`.
fn qudit_count(dim: usize, d: usize) -> Result<usize> {
    if d < 2 {
        return if dim == 1 {
            Ok(0)
        } else {
            Err(Error::ShapeMismatch(format!("dimension {dim} is not a power of {d}")))
        };
    }
    let mut k = 0;
    let mut acc = 1usize;
    while acc < dim {
        acc *= d;
        k += 1;
    }
    if acc != dim {
        return Err(Error::ShapeMismatch(format!("dimension {dim} is not a power of {d}")));
    }
    Ok(k)
}
