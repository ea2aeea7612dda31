//! Sampling and projection onto complex symmetric unitary matrices.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, CMatrix};
use crate::scalar::{Complex, Real};

/// `exp(j·S)` for a real symmetric generator `S` (row-major `m x m`).
///
/// With `S = Q D Qᵀ` this is `Q diag(e^{j d}) Qᵀ`, which is both symmetric
/// and unitary.
pub fn symmetric_unitary_from_generator<T: Real>(generator: &[T], m: usize) -> CMatrix<T> {
    let (vals, q) = symmetric_eigen(generator, m);
    CMatrix::from_fn(m, m, |i, j| {
        (0..m).fold(Complex::new(T::zero(), T::zero()), |acc, k| {
            acc + Complex::from_polar(q[i * m + k] * q[j * m + k], vals[k])
        })
    })
}

/// Symmetric unitary matrix `exp(jS)` with `S` a symmetrized Gaussian matrix.
pub fn random_symmetric_unitary<T: Real, R: Rng + ?Sized>(m: usize, rng: &mut R) -> CMatrix<T> {
    assert!(m >= 1, "matrix order must be at least 1");
    let raw: Vec<f64> = (0..m * m).map(|_| rng.sample(StandardNormal)).collect();
    let mut s = vec![T::zero(); m * m];
    for i in 0..m {
        for j in 0..m {
            s[i * m + j] = T::lit(0.5 * (raw[i * m + j] + raw[j * m + i]));
        }
    }
    symmetric_unitary_from_generator(&s, m)
}

/// Takagi factorization `A = U diag(s) Uᵀ` of a complex symmetric matrix.
///
/// Uses the real symmetric embedding `[[X, Y], [Y, −X]]` of `A = X + jY`:
/// its eigenpairs with positive eigenvalue `s` are `[a; b]` with
/// `A·conj(a + jb) = s·(a + jb)`. Singular values are returned in
/// descending order.
pub fn takagi<T: Real>(a: &CMatrix<T>) -> Result<(CMatrix<T>, Vec<T>)> {
    let m = a.rows();
    if a.cols() != m {
        return Err(Error::ShapeMismatch(format!("takagi needs a square matrix, got {:?}", a.shape())));
    }
    let n2 = 2 * m;
    let mut emb = vec![T::zero(); n2 * n2];
    for i in 0..m {
        for j in 0..m {
            let z = a.get(i, j);
            emb[i * n2 + j] = z.re;
            emb[i * n2 + (j + m)] = z.im;
            emb[(i + m) * n2 + j] = z.im;
            emb[(i + m) * n2 + (j + m)] = -z.re;
        }
    }
    let (vals, vecs) = symmetric_eigen(&emb, n2);
    let mut order: Vec<usize> = (0..n2).collect();
    order.sort_by(|&x, &y| vals[y].partial_cmp(&vals[x]).unwrap_or(std::cmp::Ordering::Equal));
    let mut u = CMatrix::zeros(m, m);
    let mut s = Vec::with_capacity(m);
    for (col, &k) in order.iter().take(m).enumerate() {
        s.push(vals[k]);
        for i in 0..m {
            u.set(i, col, Complex::new(vecs[i * n2 + k], vecs[(i + m) * n2 + k]));
        }
    }
    Ok((u, s))
}

/// Nearest symmetric unitary matrix: Takagi-factor and replace the singular
/// values with ones, returning `U Uᵀ`.
pub fn takagi_project<T: Real>(a: &CMatrix<T>) -> Result<CMatrix<T>> {
    let asym = a.sub(&a.transpose()).frobenius_norm();
    let sym = if asym > T::lit(1e-8) {
        a.add(&a.transpose()).scale_real(T::lit(0.5))
    } else {
        a.clone()
    };
    let (u, s) = takagi(&sym)?;
    let smallest = s.iter().copied().fold(T::infinity(), T::min);
    if !(smallest >= T::lit(1e-12)) {
        return Err(Error::DegenerateProjection(smallest.as_f64()));
    }
    let out = u.matmul(&u.transpose());
    // remove rounding asymmetry
    Ok(out.add(&out.transpose()).scale_real(T::lit(0.5)))
}
