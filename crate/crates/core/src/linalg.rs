//! Small dense complex helpers: Hermitian factorizations, log-determinants and norms.

use nalgebra::{Cholesky, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::{creal, CMat, Real};

pub fn identity<T: Real>(n: usize) -> CMat<T> {
    CMat::identity(n, n)
}

/// `(m + m^H) / 2`.
pub fn hermitize<T: Real>(m: &CMat<T>) -> CMat<T> {
    let half = creal(T::lit(0.5));
    (m + m.adjoint()) * half
}

pub fn cholesky<T: Real>(m: &CMat<T>) -> Result<Cholesky<num_complex::Complex<T>, Dyn>> {
    Cholesky::new(hermitize(m))
        .ok_or_else(|| Error::Conditioning(format!("{}x{} matrix is not positive definite", m.nrows(), m.ncols())))
}

/// Lower-triangular `L` with `m = L L^H`.
pub fn cholesky_factor<T: Real>(m: &CMat<T>) -> Result<CMat<T>> {
    Ok(cholesky(m)?.l())
}

/// As [`cholesky_factor`], but an exactly zero matrix factors as zero.
pub fn psd_factor<T: Real>(m: &CMat<T>) -> Result<CMat<T>> {
    if is_zero(m) {
        Ok(m.clone())
    } else {
        cholesky_factor(m)
    }
}

pub fn is_zero<T: Real>(m: &CMat<T>) -> bool {
    m.iter().all(|z| z.re == T::zero() && z.im == T::zero())
}

/// `log det(m)` for Hermitian positive definite `m`.
pub fn hermitian_logdet<T: Real>(m: &CMat<T>) -> Result<T> {
    let chol = cholesky(m)?;
    let l = chol.l_dirty();
    let mut acc = T::zero();
    for i in 0..m.nrows() {
        acc += l[(i, i)].re.ln();
    }
    Ok(acc + acc)
}

pub fn hermitian_inverse<T: Real>(m: &CMat<T>) -> Result<CMat<T>> {
    Ok(cholesky(m)?.inverse())
}

/// Inverse with a relative diagonal jitter fallback. Returns whether jitter was needed.
pub fn guarded_inverse<T: Real>(m: &CMat<T>, jitter: T) -> Result<(CMat<T>, bool)> {
    match hermitian_inverse(m) {
        Ok(inv) => Ok((inv, false)),
        Err(_) => {
            let n = m.nrows();
            let shifted = m + identity::<T>(n) * creal(jitter);
            Ok((hermitian_inverse(&shifted)?, true))
        }
    }
}

pub fn eigenvalues<T: Real>(m: &CMat<T>) -> Vec<T> {
    let eig = SymmetricEigen::new(hermitize(m));
    eig.eigenvalues.iter().copied().collect()
}

pub fn min_eigenvalue<T: Real>(m: &CMat<T>) -> T {
    eigenvalues(m)
        .into_iter()
        .fold(T::max_value().expect("bounded"), |a, b| if b < a { b } else { a })
}

/// Squared Frobenius norm.
pub fn frob2<T: Real>(m: &CMat<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr())
}

pub fn trace_re<T: Real>(m: &CMat<T>) -> T {
    (0..m.nrows().min(m.ncols())).fold(T::zero(), |acc, i| acc + m[(i, i)].re)
}

/// Hermitian part clamped to eigenvalues `>= floor`.
pub fn clamp_psd<T: Real>(m: &CMat<T>, floor: T) -> CMat<T> {
    let eig = SymmetricEigen::new(hermitize(m));
    let vals = eig.eigenvalues.map(|v| creal(if v < floor { floor } else { v }));
    let v = &eig.eigenvectors;
    hermitize(&(v * CMat::from_diagonal(&vals) * v.adjoint()))
}

/// Real symmetric embedding `[[Re, -Im], [Im, Re]]` of a complex matrix.
pub fn real_embedding<T: Real>(m: &CMat<T>) -> nalgebra::DMatrix<T> {
    let (r, c) = m.shape();
    let mut out = nalgebra::DMatrix::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let z = m[(i, j)];
            out[(i, j)] = z.re;
            out[(i + r, j + c)] = z.re;
            out[(i, j + c)] = -z.im;
            out[(i + r, j)] = z.im;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cplx;
    use approx::assert_relative_eq;

    fn sample() -> CMat<f64> {
        CMat::from_row_slice(
            2,
            2,
            &[cplx(3.0, 0.0), cplx(1.0, -1.0), cplx(1.0, 1.0), cplx(2.0, 0.0)],
        )
    }

    #[test]
    fn logdet_matches_determinant() {
        let m = sample();
        // det = 3*2 - |1+j|^2 = 4
        assert_relative_eq!(hermitian_logdet(&m).unwrap(), 4f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn embedding_doubles_logdet() {
        let m = sample();
        let e = real_embedding(&m);
        let det = e.determinant();
        assert_relative_eq!(det.ln(), 2.0 * 4f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn singular_matrix_is_conditioning_error() {
        let m = CMat::<f64>::zeros(2, 2);
        assert!(matches!(hermitian_logdet(&m), Err(Error::Conditioning(_))));
        let (inv, jittered) = guarded_inverse(&m, 1e-10).unwrap();
        assert!(jittered);
        assert_relative_eq!(inv[(0, 0)].re, 1e10, max_relative = 1e-9);
    }

    #[test]
    fn clamp_lifts_negative_eigenvalues() {
        let m = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![cplx(-1.0, 0.0), cplx(2.0, 0.0)]));
        let c = clamp_psd(&m, 1e-3);
        assert_relative_eq!(min_eigenvalue(&c), 1e-3, epsilon = 1e-12);
    }
}
