//! Small dense complex linear-algebra helpers on top of nalgebra.
//!
//! Everything here works on `DMatrix<Complex64>`. Hermitian inputs are
//! symmetrized before factorization so that round-off in the strictly upper
//! triangle cannot leak into the results.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Condition-number threshold above which a ridge is added before inversion.
pub const RIDGE_CONDITION: f64 = 1e12;
/// Relative ridge, scaled by the mean diagonal magnitude.
pub const RIDGE_SCALE: f64 = 1e-12;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn cis(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

pub fn frobenius_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn frobenius(m: &CMat) -> f64 {
    frobenius_sq(m).sqrt()
}

pub fn trace_re(m: &CMat) -> f64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)].re).sum()
}

/// Hermitian eigendecomposition with eigenvalues sorted in descending order.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub vectors: CMat,
    pub values: Vec<f64>,
}

pub fn hermitian_eigen(m: &CMat) -> Result<HermitianEigen> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "eigendecomposition of a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(HermitianEigen {
            vectors: CMat::zeros(0, 0),
            values: Vec::new(),
        });
    }
    let eig = SymmetricEigen::new(hermitize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut vectors = CMat::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
        values.push(eig.eigenvalues[src]);
    }
    Ok(HermitianEigen { vectors, values })
}

fn mean_diag(m: &CMat) -> f64 {
    let n = m.nrows().max(1);
    (0..m.nrows()).map(|i| m[(i, i)].norm()).sum::<f64>() / n as f64
}

/// Cholesky of a Hermitian positive-definite matrix. A relative ridge is added
/// when the factorization fails or the matrix is worse conditioned than
/// [`RIDGE_CONDITION`].
fn regularized_cholesky(m: &CMat) -> Result<nalgebra::Cholesky<Complex64, nalgebra::Dyn>> {
    let h = hermitize(m);
    if let Some(chol) = h.clone().cholesky() {
        let l = chol.l_dirty();
        let diag: Vec<f64> = (0..l.nrows()).map(|i| l[(i, i)].re).collect();
        let max = diag.iter().cloned().fold(0.0, f64::max);
        let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        if min > 0.0 && (max / min).powi(2) <= RIDGE_CONDITION {
            return Ok(chol);
        }
    }
    let scale = mean_diag(&h).max(f64::MIN_POSITIVE);
    let ridge = RIDGE_SCALE * scale;
    let n = h.nrows();
    (h + CMat::identity(n, n).scale(ridge))
        .cholesky()
        .ok_or_else(|| Error::Singular("Hermitian system not positive definite".into()))
}

/// Solves `m x = rhs` for Hermitian positive-definite `m`.
pub fn hermitian_solve(m: &CMat, rhs: &CMat) -> Result<CMat> {
    if m.nrows() != m.ncols() || m.nrows() != rhs.nrows() {
        return Err(Error::Dimension(format!(
            "solve with {}x{} system and {}x{} right-hand side",
            m.nrows(),
            m.ncols(),
            rhs.nrows(),
            rhs.ncols()
        )));
    }
    Ok(regularized_cholesky(m)?.solve(rhs))
}

/// Natural-log determinant of a Hermitian positive-definite matrix.
pub fn ln_det_hpd(m: &CMat) -> Result<f64> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension("log-determinant of non-square matrix".into()));
    }
    let h = hermitize(m);
    let chol = h
        .cholesky()
        .ok_or_else(|| Error::Singular("log-determinant of non positive-definite matrix".into()))?;
    let l = chol.l_dirty();
    Ok((0..l.nrows()).map(|i| 2.0 * l[(i, i)].re.ln()).sum())
}

/// Moore-Penrose pseudo-inverse via SVD with a relative singular-value cutoff.
pub fn pseudo_inverse(m: &CMat) -> CMat {
    if m.nrows() == 0 || m.ncols() == 0 {
        return CMat::zeros(m.ncols(), m.nrows());
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = smax * 1e-12 * m.nrows().max(m.ncols()) as f64;
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let mut out = CMat::zeros(m.ncols(), m.nrows());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            let vi = vt.row(i).adjoint();
            let ui = u.column(i).adjoint();
            out += (vi * ui).scale(1.0 / s);
        }
    }
    out
}

/// Thin Householder QR of a tall (or square) matrix: `m = q r` with `q`
/// having orthonormal columns (`m.ncols()` of them) and `r` upper triangular.
pub fn thin_qr(m: &CMat) -> (CMat, CMat) {
    let qr = m.clone().qr();
    (qr.q(), qr.r())
}

/// Squared singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().cloned().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMat {
        CMat::from_fn(rows, cols, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    #[test]
    fn eigen_is_sorted_and_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(6, 4, &mut rng);
        let m = &a * a.adjoint();
        let e = hermitian_eigen(&m).unwrap();
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        let j = CMat::from_diagonal(&CVec::from_iterator(6, e.values.iter().map(|&v| c(v, 0.0))));
        let rec = &e.vectors * j * e.vectors.adjoint();
        assert!(frobenius(&(rec - &m)) <= 1e-12 * frobenius(&m));
        let gram = e.vectors.adjoint() * &e.vectors;
        assert!(frobenius(&(gram - identity(6))) < 1e-12);
    }

    #[test]
    fn solve_and_logdet_agree_with_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random(4, 4, &mut rng);
        let m = &a * a.adjoint() + identity(4);
        let x = hermitian_solve(&m, &identity(4)).unwrap();
        assert!(frobenius(&(&m * &x - identity(4))) < 1e-12);
        let det = m.clone().determinant();
        assert!((ln_det_hpd(&m).unwrap() - det.re.ln()).abs() < 1e-10);
    }

    #[test]
    fn pseudo_inverse_of_tall_matrix_is_left_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random(8, 3, &mut rng);
        let p = pseudo_inverse(&a);
        assert!(frobenius(&(p * &a - identity(3))) < 1e-12);
    }

    #[test]
    fn thin_qr_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random(7, 3, &mut rng);
        let (q, r) = thin_qr(&a);
        assert_eq!(q.shape(), (7, 3));
        assert_eq!(r.shape(), (3, 3));
        assert!(frobenius(&(&q * &r - &a)) < 1e-13);
        let _ = rng.random::<f64>();
    }
}
