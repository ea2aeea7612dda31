//! Dense complex matrices stored as separate real and imaginary planes, plus
//! the small amount of dense linear algebra the solver needs (Jacobi
//! eigendecomposition of real symmetric matrices).

use std::fmt;

use crate::scalar::{Complex, Real};

/// Row-major dense complex matrix with split real/imaginary storage.
#[derive(Clone, PartialEq)]
pub struct CMatrix<T> {
    rows: usize,
    cols: usize,
    re: Vec<T>,
    im: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for CMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let k = i * self.cols + j;
                write!(f, "({:?}, {:?}) ", self.re[k], self.im[k])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            re: vec![T::zero(); rows * cols],
            im: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.re[i * n + i] = T::one();
        }
        m
    }

    /// Builds a matrix from row-major real and imaginary planes.
    pub fn from_parts(rows: usize, cols: usize, re: Vec<T>, im: Vec<T>) -> Self {
        assert_eq!(re.len(), rows * cols, "real plane has wrong length");
        assert_eq!(im.len(), rows * cols, "imaginary plane has wrong length");
        Self { rows, cols, re, im }
    }

    pub fn from_real(rows: usize, cols: usize, re: Vec<T>) -> Self {
        let im = vec![T::zero(); re.len()];
        Self::from_parts(rows, cols, re, im)
    }

    pub fn from_complex(rows: usize, cols: usize, data: &[Complex<T>]) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self {
            rows,
            cols,
            re: data.iter().map(|z| z.re).collect(),
            im: data.iter().map(|z| z.im).collect(),
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn column(data: &[Complex<T>]) -> Self {
        Self::from_complex(data.len(), 1, data)
    }

    pub fn scalar(z: Complex<T>) -> Self {
        Self::from_parts(1, 1, vec![z.re], vec![z.im])
    }

    pub fn real_scalar(v: T) -> Self {
        Self::from_real(1, 1, vec![v])
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.re.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    #[inline]
    pub fn re(&self) -> &[T] {
        &self.re
    }

    #[inline]
    pub fn im(&self) -> &[T] {
        &self.im
    }

    #[inline]
    pub fn re_mut(&mut self) -> &mut [T] {
        &mut self.re
    }

    #[inline]
    pub fn im_mut(&mut self) -> &mut [T] {
        &mut self.im
    }

    pub fn into_parts(self) -> (Vec<T>, Vec<T>) {
        (self.re, self.im)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        let k = i * self.cols + j;
        Complex::new(self.re[k], self.im[k])
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, z: Complex<T>) {
        let k = i * self.cols + j;
        self.re[k] = z.re;
        self.im[k] = z.im;
    }

    /// Entry by flat row-major index.
    #[inline]
    pub fn at(&self, k: usize) -> Complex<T> {
        Complex::new(self.re[k], self.im[k])
    }

    pub fn entries(&self) -> impl Iterator<Item = Complex<T>> + '_ {
        self.re.iter().zip(&self.im).map(|(&r, &i)| Complex::new(r, i))
    }

    /// True when every imaginary component is exactly zero.
    pub fn is_real(&self) -> bool {
        self.im.iter().all(|v| v.is_zero())
    }

    pub fn is_finite(&self) -> bool {
        self.re.iter().chain(&self.im).all(|v| v.is_finite())
    }

    pub fn map(&self, mut f: impl FnMut(Complex<T>) -> Complex<T>) -> Self {
        let mut out = Self::zeros(self.rows, self.cols);
        for k in 0..self.len() {
            let z = f(self.at(k));
            out.re[k] = z.re;
            out.im[k] = z.im;
        }
        out
    }

    pub fn zip_map(&self, other: &Self, mut f: impl FnMut(Complex<T>, Complex<T>) -> Complex<T>) -> Self {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in element-wise op");
        let mut out = Self::zeros(self.rows, self.cols);
        for k in 0..self.len() {
            let z = f(self.at(k), other.at(k));
            out.re[k] = z.re;
            out.im[k] = z.im;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        self.map(|z| z * s)
    }

    pub fn scale_real(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            re: self.re.iter().map(|&v| v * s).collect(),
            im: self.im.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in accumulate");
        for (a, &b) in self.re.iter_mut().zip(&other.re) {
            *a = *a + b;
        }
        for (a, &b) in self.im.iter_mut().zip(&other.im) {
            *a = *a + b;
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            re: self.re.clone(),
            im: self.im.iter().map(|&v| -v).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let src = i * self.cols + j;
                let dst = j * self.rows + i;
                out.re[dst] = self.re[src];
                out.im[dst] = self.im[src];
            }
        }
        out
    }

    /// Conjugate (Hermitian) transpose.
    pub fn adjoint(&self) -> Self {
        let mut out = self.transpose();
        for v in out.im.iter_mut() {
            *v = -*v;
        }
        out
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul inner dimension mismatch: {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let (m, k, n) = (self.rows, self.cols, rhs.cols);
        let mut out = Self::zeros(m, n);
        let a_real = self.is_real();
        let b_real = rhs.is_real();
        gemm_acc(&self.re, &rhs.re, m, k, n, T::one(), &mut out.re);
        if !a_real && !b_real {
            gemm_acc(&self.im, &rhs.im, m, k, n, -T::one(), &mut out.re);
        }
        if !b_real {
            gemm_acc(&self.re, &rhs.im, m, k, n, T::one(), &mut out.im);
        }
        if !a_real {
            gemm_acc(&self.im, &rhs.re, m, k, n, T::one(), &mut out.im);
        }
        out
    }

    pub fn norm_sqr(&self) -> T {
        self.re.iter().chain(&self.im).map(|&v| v * v).sum()
    }

    pub fn frobenius_norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.entries().map(|z| z.norm()).fold(T::zero(), T::max)
    }

    /// Copies out a `rows x cols` sub-block starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        assert!(r0 + rows <= self.rows && c0 + cols <= self.cols, "block out of range");
        Self::from_fn(rows, cols, |i, j| self.get(r0 + i, c0 + j))
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, src: &Self) {
        assert!(r0 + src.rows <= self.rows && c0 + src.cols <= self.cols, "block out of range");
        for i in 0..src.rows {
            for j in 0..src.cols {
                self.set(r0 + i, c0 + j, src.get(i, j));
            }
        }
    }

    pub fn col(&self, j: usize) -> Self {
        self.block(0, j, self.rows, 1)
    }

    /// Block-diagonal assembly of square or rectangular blocks.
    pub fn block_diag(blocks: &[Self]) -> Self {
        let rows = blocks.iter().map(|b| b.rows).sum();
        let cols = blocks.iter().map(|b| b.cols).sum();
        let mut out = Self::zeros(rows, cols);
        let (mut r, mut c) = (0, 0);
        for b in blocks {
            out.set_block(r, c, b);
            r += b.rows;
            c += b.cols;
        }
        out
    }

    pub fn reshape(&self, rows: usize, cols: usize) -> Self {
        assert_eq!(rows * cols, self.len(), "reshape changes element count");
        Self {
            rows,
            cols,
            re: self.re.clone(),
            im: self.im.clone(),
        }
    }
}

/// `out += alpha * a(m x k) * b(k x n)`, row-major.
fn gemm_acc<T: Real>(a: &[T], b: &[T], m: usize, k: usize, n: usize, alpha: T, out: &mut [T]) {
    for i in 0..m {
        let out_row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip.is_zero() {
                continue;
            }
            let s = alpha * aip;
            let b_row = &b[p * n..(p + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o = *o + s * bv;
            }
        }
    }
}

/// Eigendecomposition of a real symmetric `n x n` matrix (row-major) by cyclic
/// Jacobi rotations. Returns eigenvalues and a row-major matrix whose columns
/// are the matching orthonormal eigenvectors.
pub fn symmetric_eigen<T: Real>(a: &[T], n: usize) -> (Vec<T>, Vec<T>) {
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    let scale: T = a.iter().map(|x| x.abs()).fold(T::zero(), T::max);
    if scale.is_zero() {
        return (vec![T::zero(); n], v);
    }
    let tol = T::epsilon() * T::epsilon() * scale * scale;
    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum();
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.is_zero() {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let vals = (0..n).map(|i| m[i * n + i]).collect();
    (vals, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn matmul_matches_hand_computation() {
        let a = CMatrix::from_complex(2, 2, &[c(1.0, 1.0), c(0.0, 2.0), c(3.0, 0.0), c(-1.0, 0.5)]);
        let b = CMatrix::from_complex(2, 1, &[c(2.0, -1.0), c(0.0, 1.0)]);
        let p = a.matmul(&b);
        // (1+j)(2-j) + 2j*j = 3+j - 2 = 1+j
        assert!((p.get(0, 0) - c(1.0, 1.0)).norm() < 1e-15);
        // 3(2-j) + (-1+0.5j)(j) = 6-3j - j - 0.5 = 5.5-4j
        assert!((p.get(1, 0) - c(5.5, -4.0)).norm() < 1e-15);
    }

    #[test]
    fn adjoint_conjugates_and_transposes() {
        let a = CMatrix::from_complex(1, 2, &[c(1.0, 2.0), c(3.0, -4.0)]);
        let h = a.adjoint();
        assert_eq!(h.shape(), (2, 1));
        assert_eq!(h.get(0, 0), c(1.0, -2.0));
        assert_eq!(h.get(1, 0), c(3.0, 4.0));
    }

    #[test]
    fn block_diag_places_blocks_and_zeroes_rest() {
        let a = CMatrix::from_complex(1, 1, &[c(2.0, 0.0)]);
        let b = CMatrix::<f64>::identity(2);
        let d = CMatrix::block_diag(&[a, b]);
        assert_eq!(d.shape(), (3, 3));
        assert_eq!(d.get(0, 0), c(2.0, 0.0));
        assert_eq!(d.get(0, 1), c(0.0, 0.0));
        assert_eq!(d.get(2, 2), c(1.0, 0.0));
    }

    #[test]
    fn jacobi_reconstructs_symmetric_matrix() {
        let a = [4.0, 1.0, -2.0, 1.0, 2.0, 0.5, -2.0, 0.5, 3.0];
        let (vals, v) = symmetric_eigen(&a, 3);
        for i in 0..3 {
            for j in 0..3 {
                let r: f64 = (0..3).map(|k| v[i * 3 + k] * vals[k] * v[j * 3 + k]).sum();
                assert!((r - a[i * 3 + j]).abs() < 1e-12);
                let o: f64 = (0..3).map(|k| v[k * 3 + i] * v[k * 3 + j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((o - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn generic_over_f32() {
        let a = CMatrix::<f32>::identity(3).scale_real(2.0);
        assert_eq!(a.matmul(&a).get(1, 1).re, 4.0);
    }
}
