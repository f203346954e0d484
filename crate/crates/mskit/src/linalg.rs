//! Small dense linear-algebra helpers on qudit registers.
//!
//! Computational basis states of `k` qudits are indexed with the first qudit
//! most significant: `|p_1 … p_k⟩ ↦ Σ p_t d^(k−t)`.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// `Complex64` zero.
pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
/// `Complex64` one.
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    a.kronecker(b)
}

/// Kronecker product of a list of matrices, left to right.
pub fn kron_all(ops: &[DMatrix<Complex64>]) -> DMatrix<Complex64> {
    ops.iter().fold(DMatrix::identity(1, 1), |acc, op| kron(&acc, op))
}

/// Applies `op` to qudit `site` of a `k`-qudit vector in place.
pub fn apply_local(x: &mut [Complex64], d: usize, k: usize, site: usize, op: &DMatrix<Complex64>) {
    debug_assert_eq!(x.len(), d.pow(k as u32));
    let stride = d.pow((k - 1 - site) as u32);
    let block = stride * d;
    // Row-major copy of the operator.
    let ops: Vec<Complex64> = (0..d * d).map(|t| op[(t / d, t % d)]).collect();
    let mut tmp = vec![ZERO; block];
    for chunk in x.chunks_exact_mut(block) {
        tmp.copy_from_slice(chunk);
        for r in 0..d {
            let out = &mut chunk[r * stride..(r + 1) * stride];
            let o0 = ops[r * d];
            for (o, &t) in out.iter_mut().zip(&tmp[..stride]) {
                *o = o0 * t;
            }
            for c in 1..d {
                let oc = ops[r * d + c];
                for (o, &t) in out.iter_mut().zip(&tmp[c * stride..(c + 1) * stride]) {
                    *o += oc * t;
                }
            }
        }
    }
}

/// Applies `ops[0] ⊗ ops[1] ⊗ … ⊗ ops[k−1]` to a `k`-qudit vector in place.
pub fn apply_product(x: &mut [Complex64], d: usize, ops: &[&DMatrix<Complex64>]) {
    let k = ops.len();
    for (site, op) in ops.iter().enumerate() {
        apply_local(x, d, k, site, op);
    }
}

/// A batch of complex vectors stored as split real and imaginary parts with
/// the batch index fastest: entry `(idx, k)` lives at `idx · width + k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    /// Real parts.
    pub re: Vec<f64>,
    /// Imaginary parts.
    pub im: Vec<f64>,
    /// Number of vectors.
    pub width: usize,
}

impl Batch {
    /// `width` zero vectors of length `len`.
    pub fn zeros(len: usize, width: usize) -> Self {
        Batch { re: vec![0.0; len * width], im: vec![0.0; len * width], width }
    }

    /// Vector length.
    pub fn len(&self) -> usize {
        self.re.len() / self.width.max(1)
    }

    /// True for zero-length vectors.
    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    /// Entry `idx` of vector `k`.
    pub fn get(&self, idx: usize, k: usize) -> Complex64 {
        let t = idx * self.width + k;
        Complex64::new(self.re[t], self.im[t])
    }

    /// Sets entry `idx` of vector `k`.
    pub fn set(&mut self, idx: usize, k: usize, v: Complex64) {
        let t = idx * self.width + k;
        self.re[t] = v.re;
        self.im[t] = v.im;
    }

    /// Copies vector `k` out.
    pub fn column(&self, k: usize) -> Vec<Complex64> {
        (0..self.len()).map(|idx| self.get(idx, k)).collect()
    }

    /// Overwrites vector `k`.
    pub fn set_column(&mut self, k: usize, x: &[Complex64]) {
        for (idx, &v) in x.iter().enumerate() {
            self.set(idx, k, v);
        }
    }

    /// Applies a per-vector map to every vector of the batch.
    pub fn map_columns(&mut self, f: impl Fn(&[Complex64]) -> Vec<Complex64>) {
        for k in 0..self.width {
            let y = f(&self.column(k));
            self.set_column(k, &y);
        }
    }
}

/// Applies `ops[0] ⊗ … ⊗ ops[k−1]` to every vector of a batch in place.
pub fn apply_product_batch(batch: &mut Batch, d: usize, ops: &[&DMatrix<Complex64>]) {
    let k = ops.len();
    let width = batch.width;
    debug_assert_eq!(batch.len(), d.pow(k as u32));
    let mut tmp = (Vec::new(), Vec::new());
    for (site, op) in ops.iter().enumerate() {
        let stride = d.pow((k - 1 - site) as u32) * width;
        let (a, b): (Vec<f64>, Vec<f64>) = op.transpose().iter().map(|z| (z.re, z.im)).unzip();
        let args = SiteArgs { d, stride, a: &a, b: &b };
        #[cfg(target_arch = "x86_64")]
        {
            if std::is_x86_feature_detected!("avx2") && std::is_x86_feature_detected!("fma") {
                // SAFETY: the required CPU features were detected at runtime.
                unsafe { site_avx2(&mut batch.re, &mut batch.im, &mut tmp, &args) };
                continue;
            }
        }
        site_generic(&mut batch.re, &mut batch.im, &mut tmp, &args);
    }
}

/// One site of a product application: row-major operator parts `a + ib`.
struct SiteArgs<'a> {
    d: usize,
    stride: usize,
    a: &'a [f64],
    b: &'a [f64],
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn site_avx2(re: &mut [f64], im: &mut [f64], tmp: &mut (Vec<f64>, Vec<f64>), args: &SiteArgs<'_>) {
    site_body(re, im, tmp, args)
}

fn site_generic(re: &mut [f64], im: &mut [f64], tmp: &mut (Vec<f64>, Vec<f64>), args: &SiteArgs<'_>) {
    site_body(re, im, tmp, args)
}

#[inline(always)]
fn site_body(re: &mut [f64], im: &mut [f64], tmp: &mut (Vec<f64>, Vec<f64>), args: &SiteArgs<'_>) {
    match args.d {
        2 => site_fused::<2>(re, im, args),
        3 => site_fused::<3>(re, im, args),
        4 => site_fused::<4>(re, im, args),
        _ => site_buffered(re, im, tmp, args),
    }
}

/// Reads the `D` inputs at each offset once and writes the `D` outputs in place.
#[inline(always)]
fn site_fused<const D: usize>(re: &mut [f64], im: &mut [f64], args: &SiteArgs<'_>) {
    const LANES: usize = 4;
    let stride = args.stride;
    let a: [[f64; D]; D] = std::array::from_fn(|r| std::array::from_fn(|c| args.a[r * D + c]));
    let b: [[f64; D]; D] = std::array::from_fn(|r| std::array::from_fn(|c| args.b[r * D + c]));
    let lanes_end = stride - stride % LANES;
    for (cre, cim) in re.chunks_exact_mut(stride * D).zip(im.chunks_exact_mut(stride * D)) {
        let mut l = 0;
        while l < lanes_end {
            let mut xr = [[0.0; LANES]; D];
            let mut xi = [[0.0; LANES]; D];
            for c in 0..D {
                xr[c].copy_from_slice(&cre[c * stride + l..c * stride + l + LANES]);
                xi[c].copy_from_slice(&cim[c * stride + l..c * stride + l + LANES]);
            }
            for r in 0..D {
                let mut sr = [0.0; LANES];
                let mut si = [0.0; LANES];
                for c in 0..D {
                    for t in 0..LANES {
                        sr[t] += a[r][c] * xr[c][t] - b[r][c] * xi[c][t];
                        si[t] += a[r][c] * xi[c][t] + b[r][c] * xr[c][t];
                    }
                }
                cre[r * stride + l..r * stride + l + LANES].copy_from_slice(&sr);
                cim[r * stride + l..r * stride + l + LANES].copy_from_slice(&si);
            }
            l += LANES;
        }
        for l in lanes_end..stride {
            let xr: [f64; D] = std::array::from_fn(|c| cre[c * stride + l]);
            let xi: [f64; D] = std::array::from_fn(|c| cim[c * stride + l]);
            for r in 0..D {
                let (mut sr, mut si) = (0.0, 0.0);
                for c in 0..D {
                    sr += a[r][c] * xr[c] - b[r][c] * xi[c];
                    si += a[r][c] * xi[c] + b[r][c] * xr[c];
                }
                cre[r * stride + l] = sr;
                cim[r * stride + l] = si;
            }
        }
    }
}

fn site_buffered(re: &mut [f64], im: &mut [f64], tmp: &mut (Vec<f64>, Vec<f64>), args: &SiteArgs<'_>) {
    let SiteArgs { d, stride, a, b } = *args;
    let block = stride * d;
    let (tmp_re, tmp_im) = tmp;
    tmp_re.resize(block, 0.0);
    tmp_im.resize(block, 0.0);
    for (cre, cim) in re.chunks_exact_mut(block).zip(im.chunks_exact_mut(block)) {
        tmp_re.copy_from_slice(cre);
        tmp_im.copy_from_slice(cim);
        for r in 0..d {
            let ore = &mut cre[r * stride..(r + 1) * stride];
            let oim = &mut cim[r * stride..(r + 1) * stride];
            ore.fill(0.0);
            oim.fill(0.0);
            for c in 0..d {
                let (ar, ai) = (a[r * d + c], b[r * d + c]);
                let tr = &tmp_re[c * stride..(c + 1) * stride];
                let ti = &tmp_im[c * stride..(c + 1) * stride];
                for (((or, oi), &xr), &xi) in ore.iter_mut().zip(oim.iter_mut()).zip(tr).zip(ti) {
                    *or += ar * xr - ai * xi;
                    *oi += ar * xi + ai * xr;
                }
            }
        }
    }
}

/// Largest entry modulus of `a − b`.
pub fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entry modulus.
pub fn max_abs(a: &DMatrix<Complex64>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `‖A†A − I‖_max`.
pub fn unitarity_residual(a: &DMatrix<Complex64>) -> f64 {
    let n = a.ncols();
    max_abs_diff(&(a.adjoint() * a), &DMatrix::identity(n, n))
}

/// Promotes a real matrix to complex.
pub fn complexify(a: &DMatrix<f64>) -> DMatrix<Complex64> {
    a.map(|x| Complex64::new(x, 0.0))
}

/// Euclidean norm of a complex vector.
pub fn norm2(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Smallest eigenvalue of a Hermitian matrix (the Hermitian part is used).
pub fn min_eigenvalue(a: &DMatrix<Complex64>) -> f64 {
    let h = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    h.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Partial trace of a matrix on `dims = [d_1, …, d_r]` registers, keeping those flagged in `keep`.
pub fn partial_trace(a: &DMatrix<Complex64>, dims: &[usize], keep: &[bool]) -> DMatrix<Complex64> {
    let total: usize = dims.iter().product();
    assert_eq!(a.nrows(), total);
    let kept: usize = dims.iter().zip(keep).filter(|(_, &k)| k).map(|(d, _)| d).product();
    let split = |mut x: usize| -> Vec<usize> {
        let mut digits = vec![0; dims.len()];
        for t in (0..dims.len()).rev() {
            digits[t] = x % dims[t];
            x /= dims[t];
        }
        digits
    };
    let join = |digits: &[usize], sel: bool| -> usize {
        digits.iter().zip(dims).zip(keep).filter(|(_, &k)| k == sel).fold(0, |acc, ((&v, &d), _)| acc * d + v)
    };
    let mut out = DMatrix::zeros(kept, kept);
    for r in 0..total {
        let rd = split(r);
        let (rk, rt) = (join(&rd, true), join(&rd, false));
        for c in 0..total {
            let cd = split(c);
            if join(&cd, false) == rt {
                out[(rk, join(&cd, true))] += a[(r, c)];
            }
        }
    }
    out
}
