//! Dense and sparse kernels shared by the physics modules.

use alloc::vec::Vec;

use faer::linalg::matmul::matmul;
use faer::linalg::solvers::Solve;
use faer::{Accum, Mat, Par, Side};

use crate::{math, Error, Result, C64};

pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub(crate) const I: C64 = C64 { re: 0.0, im: 1.0 };

pub(crate) fn zeros(rows: usize, cols: usize) -> Mat<C64> {
    Mat::zeros(rows, cols)
}

pub(crate) fn identity(n: usize) -> Mat<C64> {
    Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}

pub(crate) fn adjoint(a: &Mat<C64>) -> Mat<C64> {
    a.adjoint().to_owned()
}

pub(crate) fn mul(a: &Mat<C64>, b: &Mat<C64>) -> Mat<C64> {
    let mut out = zeros(a.nrows(), b.ncols());
    matmul(&mut out, Accum::Replace, a, b, ONE, Par::Seq);
    out
}

/// `acc += s * b`.
pub(crate) fn axpy(acc: &mut Mat<C64>, s: C64, b: &Mat<C64>) {
    debug_assert_eq!(acc.nrows(), b.nrows());
    debug_assert_eq!(acc.ncols(), b.ncols());
    for j in 0..b.ncols() {
        let src = b.col_as_slice(j);
        let dst = acc.col_as_slice_mut(j);
        for (d, x) in dst.iter_mut().zip(src) {
            *d += s * x;
        }
    }
}

pub(crate) fn scaled(a: &Mat<C64>, s: C64) -> Mat<C64> {
    let mut out = zeros(a.nrows(), a.ncols());
    axpy(&mut out, s, a);
    out
}

/// Real linear combination `Σ c_k A_k`, all operands square of equal size.
pub(crate) fn lin_comb(terms: &[(f64, &Mat<C64>)]) -> Mat<C64> {
    let (n, m) = (terms[0].1.nrows(), terms[0].1.ncols());
    let mut out = zeros(n, m);
    for &(c, a) in terms {
        axpy(&mut out, C64::new(c, 0.0), a);
    }
    out
}

pub(crate) fn add_identity(a: &mut Mat<C64>, c: f64) {
    for i in 0..a.nrows().min(a.ncols()) {
        a[(i, i)] += c;
    }
}

/// Kronecker product `a ⊗ b`: the first factor is the slow index.
pub fn kron(a: &Mat<C64>, b: &Mat<C64>) -> Mat<C64> {
    let (ar, ac) = (a.nrows(), a.ncols());
    let (br, bc) = (b.nrows(), b.ncols());
    let mut out = zeros(ar * br, ac * bc);
    for ja in 0..ac {
        for ia in 0..ar {
            let s = a[(ia, ja)];
            if s == ZERO {
                continue;
            }
            for jb in 0..bc {
                let src = b.col_as_slice(jb);
                let dst = &mut out.col_as_slice_mut(ja * bc + jb)[ia * br..(ia + 1) * br];
                for (d, x) in dst.iter_mut().zip(src) {
                    *d = s * x;
                }
            }
        }
    }
    out
}

pub(crate) fn frobenius(a: &Mat<C64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for z in a.col_as_slice(j) {
            acc += z.norm_sqr();
        }
    }
    math::sqrt(acc)
}

pub(crate) fn max_abs(a: &Mat<C64>) -> f64 {
    let mut acc: f64 = 0.0;
    for j in 0..a.ncols() {
        for z in a.col_as_slice(j) {
            acc = acc.max(math::cabs(*z));
        }
    }
    acc
}

/// Induced 1-norm (maximum absolute column sum).
pub(crate) fn norm1(a: &Mat<C64>) -> f64 {
    let mut best: f64 = 0.0;
    for j in 0..a.ncols() {
        let s: f64 = a.col_as_slice(j).iter().map(|z| math::cabs(*z)).sum();
        best = best.max(s);
    }
    best
}

pub(crate) fn trace(a: &Mat<C64>) -> C64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

/// `Tr(a b)` without forming the product.
pub(crate) fn trace_product(a: &Mat<C64>, b: &Mat<C64>) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for j in 0..n {
        let bj = b.col_as_slice(j);
        for (k, bkj) in bj.iter().enumerate() {
            acc += a[(j, k)] * bkj;
        }
    }
    acc
}

pub(crate) fn hermiticity_deviation(a: &Mat<C64>) -> f64 {
    let n = a.nrows();
    let mut dev: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            dev = dev.max(math::cabs(a[(i, j)] - a[(j, i)].conj()));
        }
    }
    dev
}

/// In-place `a ← (a + a†)/2`.
pub(crate) fn hermitize(a: &mut Mat<C64>) {
    let n = a.nrows();
    for j in 0..n {
        for i in 0..j {
            let m = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = m;
            a[(j, i)] = m.conj();
        }
        a[(j, j)] = C64::new(a[(j, j)].re, 0.0);
    }
}

/// Eigen-decomposition of a Hermitian matrix; eigenvalues ascending.
pub fn hermitian_eigen(a: &Mat<C64>) -> Result<(Vec<f64>, Mat<C64>)> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Spectral(alloc::format!("{e:?}")))?;
    let values = evd.S().column_vector().iter().map(|z| z.re).collect();
    Ok((values, evd.U().to_owned()))
}

pub(crate) fn hermitian_eigenvalues(a: &Mat<C64>) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Spectral(alloc::format!("{e:?}")))
}

/// `exp(factor · h)` for Hermitian `h`, through its spectral decomposition.
pub(crate) fn exp_hermitian(h: &Mat<C64>, factor: C64) -> Result<Mat<C64>> {
    let (values, vecs) = hermitian_eigen(h)?;
    let n = h.nrows();
    let mut scaled_vecs = vecs.clone();
    for (j, lam) in values.iter().enumerate() {
        let w = factor * *lam;
        let e = math::cis(w.im) * math::exp(w.re);
        for z in scaled_vecs.col_as_slice_mut(j) {
            *z *= e;
        }
    }
    let mut out = zeros(n, n);
    matmul(&mut out, Accum::Replace, &scaled_vecs, vecs.adjoint(), ONE, Par::Seq);
    Ok(out)
}

/// Trace distance `½‖a − b‖₁` between Hermitian matrices.
pub fn trace_distance(a: &Mat<C64>, b: &Mat<C64>) -> Result<f64> {
    let mut diff = a.clone();
    axpy(&mut diff, -ONE, b);
    hermitize(&mut diff);
    let eig = hermitian_eigenvalues(&diff)?;
    Ok(0.5 * eig.iter().map(|x| x.abs()).sum::<f64>())
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by degree-13 Padé approximation with scaling and
/// squaring.
pub fn expm(a: &Mat<C64>) -> Mat<C64> {
    let norm = norm1(a);
    let squarings = if norm > THETA13 {
        math::ceil(math::log2(norm / THETA13)).max(0.0) as u32
    } else {
        0
    };
    let x = scaled(a, C64::new(math::powi(2.0, -(squarings as i32)), 0.0));
    let b = &PADE13;
    let x2 = mul(&x, &x);
    let x4 = mul(&x2, &x2);
    let x6 = mul(&x4, &x2);

    let inner = lin_comb(&[(b[13], &x6), (b[11], &x4), (b[9], &x2)]);
    let mut u = mul(&x6, &inner);
    axpy(&mut u, C64::new(b[7], 0.0), &x6);
    axpy(&mut u, C64::new(b[5], 0.0), &x4);
    axpy(&mut u, C64::new(b[3], 0.0), &x2);
    add_identity(&mut u, b[1]);
    let u = mul(&x, &u);

    let inner = lin_comb(&[(b[12], &x6), (b[10], &x4), (b[8], &x2)]);
    let mut v = mul(&x6, &inner);
    drop(inner);
    axpy(&mut v, C64::new(b[6], 0.0), &x6);
    axpy(&mut v, C64::new(b[4], 0.0), &x4);
    axpy(&mut v, C64::new(b[2], 0.0), &x2);
    add_identity(&mut v, b[0]);
    drop((x2, x4, x6, x));

    // (V − U) R = V + U
    let mut numer = v.clone();
    axpy(&mut numer, ONE, &u);
    axpy(&mut v, -ONE, &u);
    drop(u);
    let mut r = v.partial_piv_lu().solve(&numer);
    drop((v, numer));
    for _ in 0..squarings {
        r = mul(&r, &r);
    }
    r
}

/// Compressed-row sparse matrix used by the operator-form Lindblad kernel.
#[derive(Clone, Debug)]
pub(crate) struct SparseMat {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseMat {
    pub(crate) fn from_dense(a: &Mat<C64>) -> Self {
        let (rows, cols) = (a.nrows(), a.ncols());
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..rows {
            for j in 0..cols {
                let z = a[(i, j)];
                if z != ZERO {
                    col_idx.push(j);
                    vals.push(z);
                }
            }
            row_ptr.push(col_idx.len());
        }
        SparseMat {
            rows,
            cols,
            row_ptr,
            col_idx,
            vals,
        }
    }

    #[cfg(test)]
    pub(crate) fn nnz(&self) -> usize {
        self.vals.len()
    }

    #[inline]
    fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    /// `out = S x` (or `out += S x` when `accumulate`).
    pub(crate) fn mul_dense(&self, x: &Mat<C64>, out: &mut Mat<C64>, accumulate: bool) {
        debug_assert_eq!(self.cols, x.nrows());
        for c in 0..x.ncols() {
            let xs = x.col_as_slice(c);
            let os = out.col_as_slice_mut(c);
            for (i, o) in os.iter_mut().enumerate().take(self.rows) {
                let mut acc = ZERO;
                for (k, v) in self.row(i) {
                    acc += v * xs[k];
                }
                if accumulate {
                    *o += acc;
                } else {
                    *o = acc;
                }
            }
        }
    }

    /// `out += scale · x S†`.
    pub(crate) fn dense_mul_adjoint(&self, x: &Mat<C64>, out: &mut Mat<C64>, scale: f64) {
        debug_assert_eq!(self.cols, x.ncols());
        for j in 0..self.rows {
            for (k, v) in self.row(j) {
                let w = v.conj() * scale;
                let xs = x.col_as_slice(k);
                let os = out.col_as_slice_mut(j);
                for (o, z) in os.iter_mut().zip(xs) {
                    *o += w * z;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, seed: f64) -> Mat<C64> {
        Mat::from_fn(n, n, |i, j| {
            C64::new(
                math::sin(seed + 1.3 * i as f64 + 0.7 * j as f64),
                math::cos(seed * 0.5 + 0.4 * i as f64 - 0.9 * j as f64),
            )
        })
    }

    #[test]
    fn expm_of_diagonal_matches_scalar_exponentials() {
        let d = Mat::from_fn(3, 3, |i, j| {
            if i == j {
                C64::new(-(i as f64) * 7.0, i as f64)
            } else {
                ZERO
            }
        });
        let e = expm(&d);
        for i in 0..3 {
            let want = math::cis(i as f64) * math::exp(-(i as f64) * 7.0);
            assert!((e[(i, i)] - want).norm() < 1e-13);
        }
    }

    #[test]
    fn expm_agrees_with_hermitian_spectral_route() {
        let a = sample(6, 0.3);
        let h = lin_comb(&[(0.5, &a), (0.5, &adjoint(&a))]);
        let direct = expm(&scaled(&h, C64::new(0.0, -3.0)));
        let spectral = exp_hermitian(&h, C64::new(0.0, -3.0)).unwrap();
        let mut diff = direct;
        axpy(&mut diff, -ONE, &spectral);
        assert!(max_abs(&diff) < 1e-11, "{}", max_abs(&diff));
    }

    #[test]
    fn expm_semigroup_under_squaring() {
        let a = scaled(&sample(5, 1.1), C64::new(4.0, 0.0));
        let full = expm(&a);
        let half = expm(&scaled(&a, C64::new(0.5, 0.0)));
        let mut diff = mul(&half, &half);
        axpy(&mut diff, -ONE, &full);
        assert!(max_abs(&diff) <= 1e-10 * max_abs(&full));
    }

    #[test]
    fn kron_places_blocks() {
        let a = sample(2, 0.1);
        let b = sample(3, 0.9);
        let k = kron(&a, &b);
        for (ia, ja, ib, jb) in [(0, 1, 2, 0), (1, 0, 1, 2), (1, 1, 0, 0)] {
            assert_eq!(k[(ia * 3 + ib, ja * 3 + jb)], a[(ia, ja)] * b[(ib, jb)]);
        }
    }

    #[test]
    fn sparse_kernels_match_dense_products() {
        let mut s = sample(4, 2.0);
        s[(0, 1)] = ZERO;
        s[(3, 2)] = ZERO;
        let x = sample(4, 0.4);
        let sp = SparseMat::from_dense(&s);
        assert_eq!(sp.nnz(), 14);
        let mut out = zeros(4, 4);
        sp.mul_dense(&x, &mut out, false);
        let mut diff = out.clone();
        axpy(&mut diff, -ONE, &mul(&s, &x));
        assert!(max_abs(&diff) < 1e-13);

        let mut acc = zeros(4, 4);
        sp.dense_mul_adjoint(&x, &mut acc, 2.0);
        let mut want = mul(&x, &adjoint(&s));
        want = scaled(&want, C64::new(2.0, 0.0));
        axpy(&mut acc, -ONE, &want);
        assert!(max_abs(&acc) < 1e-13);
    }

    #[test]
    fn trace_distance_of_orthogonal_pure_states_is_one() {
        let mut a = zeros(2, 2);
        a[(0, 0)] = ONE;
        let mut b = zeros(2, 2);
        b[(1, 1)] = ONE;
        assert!((trace_distance(&a, &b).unwrap() - 1.0).abs() < 1e-14);
    }
}
