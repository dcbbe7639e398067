//! Dense symmetric and SPD matrix primitives.
//!
//! Every matrix function used by the rest of the crate (exponential,
//! logarithm, square roots) goes through the symmetric eigendecomposition,
//! and every analytically symmetric product is re-symmetrized before it is
//! wrapped, so iterates never drift out of the symmetric subspace.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative eigenvalue floor used by [`validate_spd`] and [`SpdMat::new`].
pub const DEFAULT_SPD_TOL: f64 = 1e-12;

/// Eigenvalues below this are treated as numerically zero by the logarithm.
const LOG_FLOOR: f64 = 1e-300;

/// A real symmetric `p x p` matrix.
#[derive(Clone, PartialEq)]
pub struct SymMat {
    m: DMatrix<f64>,
}

impl fmt::Debug for SymMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymMat{}", self.m)
    }
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

impl SymMat {
    /// Wraps a square matrix, replacing it with its symmetric part.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::Parameter("matrix dimension must be at least 1".into()));
        }
        Ok(Self { m: symmetrize(&m) })
    }

    pub fn from_row_slice(p: usize, data: &[f64]) -> Result<Self> {
        if data.len() != p * p {
            return Err(Error::Dimension {
                expected: p * p,
                got: data.len(),
            });
        }
        Self::from_matrix(DMatrix::from_row_slice(p, p, data))
    }

    /// # Panics
    /// If `diag` is empty.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        assert!(!diag.is_empty(), "empty diagonal");
        Self {
            m: DMatrix::from_diagonal(&DVector::from_row_slice(diag)),
        }
    }

    pub fn identity(p: usize) -> Self {
        assert!(p > 0, "dimension must be at least 1");
        Self {
            m: DMatrix::identity(p, p),
        }
    }

    pub fn zeros(p: usize) -> Self {
        assert!(p > 0, "dimension must be at least 1");
        Self {
            m: DMatrix::zeros(p, p),
        }
    }

    /// Already-symmetric matrix produced inside the crate.
    pub(crate) fn from_symmetric_unchecked(m: DMatrix<f64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        Self { m }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm()
    }

    /// `tr(self * other)`, the Euclidean inner product of symmetric matrices.
    pub fn dot(&self, other: &SymMat) -> f64 {
        self.m.dot(&other.m)
    }

    pub fn scale(&self, c: f64) -> SymMat {
        Self { m: &self.m * c }
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().all(|x| x.is_finite())
    }

    /// `A * self * A^T`.
    pub fn congruence(&self, a: &DMatrix<f64>) -> SymMat {
        Self {
            m: symmetrize(&(a * &self.m * a.transpose())),
        }
    }
}

impl Add for &SymMat {
    type Output = SymMat;
    fn add(self, rhs: &SymMat) -> SymMat {
        SymMat { m: &self.m + &rhs.m }
    }
}

impl Sub for &SymMat {
    type Output = SymMat;
    fn sub(self, rhs: &SymMat) -> SymMat {
        SymMat { m: &self.m - &rhs.m }
    }
}

impl Mul<f64> for &SymMat {
    type Output = SymMat;
    fn mul(self, rhs: f64) -> SymMat {
        self.scale(rhs)
    }
}

impl Neg for &SymMat {
    type Output = SymMat;
    fn neg(self) -> SymMat {
        self.scale(-1.0)
    }
}

/// Symmetric eigendecomposition `V diag(values) V^T` with ascending values.
#[derive(Clone, Debug)]
pub struct SymEig {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymEig {
    /// `V diag(f(values)) V^T`, symmetrized.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.vectors.clone();
        for (j, &lambda) in self.values.iter().enumerate() {
            let fl = f(lambda);
            scaled.column_mut(j).scale_mut(fl);
        }
        symmetrize(&(scaled * self.vectors.transpose()))
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

/// Eigendecomposition of a symmetric matrix, eigenvalues ascending.
pub fn sym_eig(m: &SymMat) -> Result<SymEig> {
    if !m.is_finite() {
        return Err(Error::NumericInput("matrix has non-finite entries".into()));
    }
    let p = m.dim();
    let eig = m
        .m
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 100 * p.max(10))
        .ok_or_else(|| Error::NumericInput("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(p, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SymEig { values, vectors })
}

/// True iff the smallest eigenvalue exceeds `tol` times the largest one
/// (and is positive).
pub fn validate_spd(m: &SymMat, tol: f64) -> bool {
    match sym_eig(m) {
        Ok(eig) => eig_is_spd(&eig, tol),
        Err(_) => false,
    }
}

fn eig_is_spd(eig: &SymEig, tol: f64) -> bool {
    let (lo, hi) = (eig.min(), eig.max());
    lo > 0.0 && hi.is_finite() && lo > tol * hi
}

/// A symmetric positive-definite matrix with its eigendecomposition attached.
#[derive(Clone)]
pub struct SpdMat {
    sym: SymMat,
    eig: SymEig,
    inverse: OnceLock<DMatrix<f64>>,
    roots: OnceLock<(DMatrix<f64>, DMatrix<f64>)>,
}

impl fmt::Debug for SpdMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SpdMat{}", self.sym.m)
    }
}

impl PartialEq for SpdMat {
    fn eq(&self, other: &Self) -> bool {
        self.sym == other.sym
    }
}

impl SpdMat {
    /// Validates positive definiteness with [`DEFAULT_SPD_TOL`].
    pub fn new(sym: SymMat) -> Result<Self> {
        let eig = sym_eig(&sym)?;
        if !eig_is_spd(&eig, DEFAULT_SPD_TOL) {
            return Err(Error::Singular(format!(
                "eigenvalue range [{:e}, {:e}] is not positive definite",
                eig.min(),
                eig.max()
            )));
        }
        Ok(Self {
            sym,
            eig,
            inverse: OnceLock::new(),
            roots: OnceLock::new(),
        })
    }

    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        Self::new(SymMat::from_matrix(m)?)
    }

    pub fn from_row_slice(p: usize, data: &[f64]) -> Result<Self> {
        Self::new(SymMat::from_row_slice(p, data)?)
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(SymMat::from_diagonal(diag))
    }

    pub fn identity(p: usize) -> Self {
        Self::new(SymMat::identity(p)).expect("identity is SPD")
    }

    /// Builds `V diag(values) V^T` from a known spectral decomposition.
    fn from_eig(eig: SymEig) -> Result<Self> {
        if !eig_is_spd(&eig, 0.0) {
            return Err(Error::Singular("non-positive eigenvalue".into()));
        }
        let m = eig.map_values(|x| x);
        Ok(Self {
            sym: SymMat::from_symmetric_unchecked(m),
            eig,
            inverse: OnceLock::new(),
            roots: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.sym.dim()
    }

    pub fn as_sym(&self) -> &SymMat {
        &self.sym
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.sym.m
    }

    pub fn eig(&self) -> &SymEig {
        &self.eig
    }

    pub fn logdet(&self) -> f64 {
        self.eig.values.iter().map(|x| x.ln()).sum()
    }

    pub fn trace(&self) -> f64 {
        self.sym.trace()
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        self.inverse.get_or_init(|| self.eig.map_values(|x| 1.0 / x))
    }

    pub fn sqrt_matrix(&self) -> &DMatrix<f64> {
        &self.roots().0
    }

    pub fn inv_sqrt_matrix(&self) -> &DMatrix<f64> {
        &self.roots().1
    }

    fn roots(&self) -> &(DMatrix<f64>, DMatrix<f64>) {
        self.roots.get_or_init(|| {
            (
                self.eig.map_values(f64::sqrt),
                self.eig.map_values(|x| 1.0 / x.sqrt()),
            )
        })
    }

    /// `tr(self^{-1} x)`.
    pub fn trace_inv_product(&self, x: &SymMat) -> f64 {
        self.inverse().dot(x.as_matrix())
    }

    /// `self^{-1/2} x self^{-1/2}`.
    pub fn whiten(&self, x: &SymMat) -> SymMat {
        x.congruence(self.inv_sqrt_matrix())
    }

    /// `self^{1/2} x self^{1/2}`.
    pub fn color(&self, x: &SymMat) -> SymMat {
        x.congruence(self.sqrt_matrix())
    }

    pub fn scale(&self, c: f64) -> Result<SpdMat> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Parameter(format!("scale factor {c} must be positive")));
        }
        Ok(Self {
            sym: self.sym.scale(c),
            eig: SymEig {
                values: &self.eig.values * c,
                vectors: self.eig.vectors.clone(),
            },
            inverse: OnceLock::new(),
            roots: OnceLock::new(),
        })
    }

    /// `A * self * A^T`; fails if the result is not numerically SPD.
    pub fn congruence(&self, a: &DMatrix<f64>) -> Result<SpdMat> {
        SpdMat::new(self.sym.congruence(a))
    }
}

/// Matrix exponential of a symmetric matrix.
pub fn matrix_exp_sym(x: &SymMat) -> Result<SpdMat> {
    let eig = sym_eig(x)?;
    let max_exp = f64::MAX.ln();
    if eig.max() > max_exp {
        return Err(Error::Range(format!(
            "largest eigenvalue {} exceeds exp range",
            eig.max()
        )));
    }
    let values = eig.values.map(f64::exp);
    SpdMat::from_eig(SymEig {
        values,
        vectors: eig.vectors,
    })
}

/// Matrix logarithm of an SPD matrix.
pub fn matrix_log_spd(s: &SpdMat) -> Result<SymMat> {
    check_log_floor(s)?;
    Ok(SymMat::from_symmetric_unchecked(s.eig.map_values(f64::ln)))
}

fn check_log_floor(s: &SpdMat) -> Result<()> {
    if s.eig.min() <= LOG_FLOOR {
        return Err(Error::Singular(format!(
            "smallest eigenvalue {:e} is numerically zero",
            s.eig.min()
        )));
    }
    Ok(())
}

pub fn spd_sqrt(s: &SpdMat) -> Result<SpdMat> {
    check_log_floor(s)?;
    SpdMat::from_eig(SymEig {
        values: s.eig.values.map(f64::sqrt),
        vectors: s.eig.vectors.clone(),
    })
}

pub fn spd_inv_sqrt(s: &SpdMat) -> Result<SpdMat> {
    check_log_floor(s)?;
    // Reverse the order so values stay ascending.
    let p = s.dim();
    let values = DVector::from_iterator(p, (0..p).rev().map(|i| 1.0 / s.eig.values[i].sqrt()));
    let mut vectors = DMatrix::zeros(p, p);
    for (dst, src) in (0..p).rev().enumerate() {
        vectors.set_column(dst, &s.eig.vectors.column(src));
    }
    SpdMat::from_eig(SymEig { values, vectors })
}

/// Solves `s * x = b` through a Cholesky factorization of `s`.
pub fn spd_solve(s: &SpdMat, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if b.nrows() != s.dim() {
        return Err(Error::Dimension {
            expected: s.dim(),
            got: b.nrows(),
        });
    }
    let chol = s
        .as_matrix()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("Cholesky factorization broke down".into()))?;
    Ok(chol.solve(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn eig_identity_and_diagonal() {
        let e = sym_eig(&SymMat::identity(3)).unwrap();
        assert!(e.values.iter().all(|&v| (v - 1.0).abs() < 1e-15));

        let e = sym_eig(&SymMat::from_diagonal(&[5.0, 2.0])).unwrap();
        assert!((e.values[0] - 2.0).abs() < 1e-15);
        assert!((e.values[1] - 5.0).abs() < 1e-15);
        // Eigenvector of 2 is +-e2.
        assert!((e.vectors[(1, 0)].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eig_rejects_nan() {
        let m = SymMat::from_row_slice(2, &[1.0, f64::NAN, f64::NAN, 1.0]).unwrap();
        assert!(matches!(sym_eig(&m), Err(Error::NumericInput(_))));
    }

    #[test]
    fn exp_and_log_simple_cases() {
        let e = matrix_exp_sym(&SymMat::zeros(3)).unwrap();
        assert!(close(e.as_matrix(), &DMatrix::identity(3, 3), 1e-15));

        let e = matrix_exp_sym(&SymMat::from_diagonal(&[2f64.ln(), 3f64.ln()])).unwrap();
        assert!(close(
            e.as_matrix(),
            &DMatrix::from_diagonal(&DVector::from_row_slice(&[2.0, 3.0])),
            1e-14
        ));

        let l = matrix_log_spd(&SpdMat::identity(4)).unwrap();
        assert!(l.frobenius_norm() < 1e-15);

        let e1 = std::f64::consts::E;
        let l = matrix_log_spd(&SpdMat::from_diagonal(&[e1, e1 * e1]).unwrap()).unwrap();
        assert!((l.get(0, 0) - 1.0).abs() < 1e-14);
        assert!((l.get(1, 1) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn exp_overflow_is_range_error() {
        let x = SymMat::from_diagonal(&[800.0, 0.0]);
        assert!(matches!(matrix_exp_sym(&x), Err(Error::Range(_))));
    }

    #[test]
    fn log_of_tiny_eigenvalue_is_singular() {
        // Passes the relative SPD gate (all equal) but sits below the log floor.
        let s = SpdMat::from_diagonal(&[1e-305, 1e-305]).unwrap();
        assert!(matches!(matrix_log_spd(&s), Err(Error::Singular(_))));
    }

    #[test]
    fn square_roots() {
        let s = SpdMat::from_diagonal(&[4.0, 9.0]).unwrap();
        let r = spd_sqrt(&s).unwrap();
        assert!((r.as_matrix()[(0, 0)] - 2.0).abs() < 1e-15);
        assert!((r.as_matrix()[(1, 1)] - 3.0).abs() < 1e-15);
        let ir = spd_inv_sqrt(&s).unwrap();
        assert!(close(&(ir.as_matrix() * r.as_matrix()), &DMatrix::identity(2, 2), 1e-15));
        assert!(ir.eig().values[0] <= ir.eig().values[1]);
        let id = spd_sqrt(&SpdMat::identity(3)).unwrap();
        assert!(close(id.as_matrix(), &DMatrix::identity(3, 3), 1e-15));
    }

    #[test]
    fn solve_simple() {
        let b = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let x = spd_solve(&SpdMat::identity(2), &b).unwrap();
        assert!(close(&x, &b, 0.0));
        let s = SpdMat::from_diagonal(&[2.0, 4.0]).unwrap();
        let x = spd_solve(&s, &DMatrix::from_row_slice(2, 1, &[2.0, 4.0])).unwrap();
        assert!(close(&x, &DMatrix::from_element(2, 1, 1.0), 1e-15));
        assert!(spd_solve(&s, &DMatrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn validate_cases() {
        assert!(validate_spd(&SymMat::identity(3), DEFAULT_SPD_TOL));
        assert!(!validate_spd(&SymMat::from_diagonal(&[1.0, 0.0]), DEFAULT_SPD_TOL));
        assert!(!validate_spd(&SymMat::from_diagonal(&[1.0, -1.0]), DEFAULT_SPD_TOL));
        assert!(SpdMat::from_diagonal(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn constructor_symmetrizes() {
        let m = SymMat::from_row_slice(2, &[1.0, 2.0, 4.0, 1.0]).unwrap();
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 0), 3.0);
        assert!(SymMat::from_matrix(DMatrix::zeros(2, 3)).is_err());
    }
}
