//! The two-parameter affine-invariant geometry on SPD matrices.
//!
//! The inner product at `G` is
//! `<xi, eta>_G = alpha tr(G^-1 xi G^-1 eta) + beta tr(G^-1 xi) tr(G^-1 eta)`.
//! Every formula that involves `G^-1` is evaluated through the congruence
//! `G^{-1/2} . G^{-1/2}` so intermediate matrices stay symmetric.
//!
//! The coefficients always come from a statistical model (see
//! [`crate::model::EWModel::coefficients`]); this module never assumes a
//! particular distribution.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{matrix_exp_sym, matrix_log_spd, sym_eig, SpdMat, SymMat};

/// Coefficients `(alpha, beta)` of the metric for `p x p` matrices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricCoefficients {
    pub alpha: f64,
    pub beta: f64,
    pub dim: usize,
}

impl MetricCoefficients {
    /// Rejects coefficients that do not give a positive-definite metric,
    /// i.e. unless `alpha > 0` and `alpha + p beta > 0`.
    pub fn new(alpha: f64, beta: f64, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Parameter("dimension must be at least 1".into()));
        }
        if !(alpha.is_finite() && beta.is_finite()) {
            return Err(Error::Model(format!("non-finite coefficients ({alpha}, {beta})")));
        }
        if alpha <= 0.0 || alpha + dim as f64 * beta <= 0.0 {
            return Err(Error::Model(format!(
                "coefficients alpha={alpha}, beta={beta} do not define a metric for p={dim}"
            )));
        }
        Ok(Self { alpha, beta, dim })
    }

    /// The classical affine-invariant metric (`alpha = 1`, `beta = 0`).
    pub fn affine_invariant(dim: usize) -> Self {
        Self {
            alpha: 1.0,
            beta: 0.0,
            dim,
        }
    }
}

/// A symmetric matrix attached to a base point.
#[derive(Clone, Debug)]
pub struct TangentVec {
    base: SpdMat,
    value: SymMat,
}

impl TangentVec {
    pub fn new(base: SpdMat, value: SymMat) -> Result<Self> {
        check_dim(base.dim(), value.dim())?;
        Ok(Self { base, value })
    }

    pub fn base(&self) -> &SpdMat {
        &self.base
    }

    pub fn value(&self) -> &SymMat {
        &self.value
    }

    pub fn norm(&self, coeff: &MetricCoefficients) -> Result<f64> {
        Ok(metric_inner(coeff, &self.base, &self.value, &self.value)?.max(0.0).sqrt())
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { expected, got });
    }
    Ok(())
}

/// Fisher inner product of two tangent vectors at `g`.
pub fn metric_inner(
    coeff: &MetricCoefficients,
    g: &SpdMat,
    xi: &SymMat,
    eta: &SymMat,
) -> Result<f64> {
    check_dim(g.dim(), xi.dim())?;
    check_dim(g.dim(), eta.dim())?;
    let a = g.whiten(xi);
    let b = g.whiten(eta);
    Ok(coeff.alpha * a.dot(&b) + coeff.beta * a.trace() * b.trace())
}

pub fn norm(coeff: &MetricCoefficients, g: &SpdMat, xi: &SymMat) -> Result<f64> {
    Ok(metric_inner(coeff, g, xi, xi)?.max(0.0).sqrt())
}

/// Riemannian exponential `G expm(G^-1 xi)`.
pub fn exp_map(g: &SpdMat, xi: &SymMat) -> Result<SpdMat> {
    check_dim(g.dim(), xi.dim())?;
    let inner = matrix_exp_sym(&g.whiten(xi))?;
    SpdMat::new(g.color(inner.as_sym()))
}

/// Riemannian logarithm `G logm(G^-1 S)`, the inverse of [`exp_map`].
pub fn log_map(g: &SpdMat, s: &SpdMat) -> Result<SymMat> {
    check_dim(g.dim(), s.dim())?;
    let w = SpdMat::new(g.whiten(s.as_sym()))?;
    Ok(g.color(&matrix_log_spd(&w)?))
}

/// Second-order retraction `G + xi + xi G^-1 xi / 2`, falling back to the
/// exponential map when the result is not numerically SPD.
pub fn retract(g: &SpdMat, xi: &SymMat) -> Result<SpdMat> {
    check_dim(g.dim(), xi.dim())?;
    let x = xi.as_matrix();
    let quad = x * g.inverse() * x;
    let candidate = SymMat::from_matrix(g.as_matrix() + x + quad * 0.5)?;
    match SpdMat::new(candidate) {
        Ok(r) => Ok(r),
        Err(_) => exp_map(g, xi),
    }
}

/// Point at time `t` on the geodesic leaving `g` with velocity `xi`.
pub fn geodesic(g: &SpdMat, xi: &SymMat, t: f64) -> Result<SpdMat> {
    exp_map(g, &xi.scale(t))
}

/// Squared Fisher–Rao distance
/// `alpha ||logm(G^-1/2 S G^-1/2)||^2 + beta (log det(G^-1 S))^2`.
pub fn fisher_distance_sq(coeff: &MetricCoefficients, g: &SpdMat, s: &SpdMat) -> Result<f64> {
    check_dim(g.dim(), s.dim())?;
    let w = sym_eig(&g.whiten(s.as_sym()))?;
    if w.min() <= 0.0 {
        return Err(Error::Singular("relative spectrum is not positive".into()));
    }
    let (mut sq, mut sum) = (0.0, 0.0);
    for &mu in w.values.iter() {
        let l = mu.ln();
        sq += l * l;
        sum += l;
    }
    Ok((coeff.alpha * sq + coeff.beta * sum * sum).max(0.0))
}

pub fn fisher_distance(coeff: &MetricCoefficients, g: &SpdMat, s: &SpdMat) -> Result<f64> {
    Ok(fisher_distance_sq(coeff, g, s)?.sqrt())
}

/// Transport `(S G^-1)^{1/2} eta (G^-1 S)^{1/2}` from the tangent space at
/// `g` to the one at `s`.
pub fn vector_transport(g: &SpdMat, s: &SpdMat, eta: &SymMat) -> Result<SymMat> {
    check_dim(g.dim(), s.dim())?;
    check_dim(g.dim(), eta.dim())?;
    let e = transport_factor(g, s)?;
    Ok(eta.congruence(&e))
}

/// `E = G^{1/2} (G^{-1/2} S G^{-1/2})^{1/2} G^{-1/2}`, so that `E^2 = S G^-1`.
fn transport_factor(g: &SpdMat, s: &SpdMat) -> Result<DMatrix<f64>> {
    let w = SpdMat::new(g.whiten(s.as_sym()))?;
    Ok(g.sqrt_matrix() * w.sqrt_matrix() * g.inv_sqrt_matrix())
}

/// Converts a Euclidean gradient into the Riemannian gradient for the
/// metric with coefficients `coeff`.
pub fn egrad_to_rgrad(coeff: &MetricCoefficients, g: &SpdMat, egrad: &SymMat) -> Result<SymMat> {
    check_dim(g.dim(), egrad.dim())?;
    let (alpha, beta) = (coeff.alpha, coeff.beta);
    let p = g.dim() as f64;
    let gm = g.as_matrix();
    let ge = gm * egrad.as_matrix();
    let tr = ge.trace();
    let main = SymMat::from_matrix(&ge * gm / alpha)?;
    let shift = beta / (alpha * (alpha + p * beta)) * tr;
    Ok(&main - &g.as_sym().scale(shift))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inner_product_plug_in() {
        let c = MetricCoefficients::new(1.0, 0.0, 2).unwrap();
        let i2 = SymMat::identity(2);
        let v = metric_inner(&c, &SpdMat::identity(2), &i2, &i2).unwrap();
        assert!((v - 2.0).abs() < 1e-15);

        let c = MetricCoefficients::new(2.0, 1.0, 3).unwrap();
        let i3 = SymMat::identity(3);
        let v = metric_inner(&c, &SpdMat::identity(3), &i3, &i3).unwrap();
        assert!((v - 15.0).abs() < 1e-14);
    }

    #[test]
    fn coefficient_validation() {
        assert!(MetricCoefficients::new(0.0, 0.0, 2).is_err());
        assert!(MetricCoefficients::new(1.0, -0.5, 2).is_err());
        assert!(MetricCoefficients::new(1.0, -0.49, 2).is_ok());
    }

    #[test]
    fn exp_log_trivial_cases() {
        let g = SpdMat::from_row_slice(2, &[2.0, 0.5, 0.5, 1.0]).unwrap();
        let e = exp_map(&g, &SymMat::zeros(2)).unwrap();
        assert!((e.as_matrix() - g.as_matrix()).norm() < 1e-14);

        let xi = SymMat::from_row_slice(2, &[0.3, 0.1, 0.1, -0.2]).unwrap();
        let e = exp_map(&SpdMat::identity(2), &xi).unwrap();
        let expected = matrix_exp_sym(&xi).unwrap();
        assert!((e.as_matrix() - expected.as_matrix()).norm() < 1e-14);

        assert!(log_map(&g, &g).unwrap().frobenius_norm() < 1e-14);

        let e1 = std::f64::consts::E;
        let l = log_map(&SpdMat::identity(2), &SpdMat::from_diagonal(&[e1, e1]).unwrap()).unwrap();
        assert!((l.as_matrix() - DMatrix::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn retraction_trivial_cases() {
        let g = SpdMat::from_row_slice(2, &[2.0, 0.5, 0.5, 1.0]).unwrap();
        let r = retract(&g, &SymMat::zeros(2)).unwrap();
        assert!((r.as_matrix() - g.as_matrix()).norm() < 1e-15);

        let a = 0.7;
        let r = retract(&SpdMat::identity(2), &SymMat::from_diagonal(&[a, 0.0])).unwrap();
        assert!((r.as_matrix()[(0, 0)] - (1.0 + a + a * a / 2.0)).abs() < 1e-15);
        assert!((r.as_matrix()[(1, 1)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn geodesic_endpoints_and_scalar_case() {
        let g = SpdMat::from_row_slice(2, &[2.0, 0.5, 0.5, 1.0]).unwrap();
        let xi = SymMat::from_row_slice(2, &[0.3, 0.1, 0.1, -0.2]).unwrap();
        let g0 = geodesic(&g, &xi, 0.0).unwrap();
        assert!((g0.as_matrix() - g.as_matrix()).norm() < 1e-14);
        let g1 = geodesic(&g, &xi, 1.0).unwrap();
        assert!((g1.as_matrix() - exp_map(&g, &xi).unwrap().as_matrix()).norm() < 1e-14);

        let lambda = 0.4;
        let t = 2.5;
        let gt = geodesic(&SpdMat::identity(3), &SymMat::identity(3).scale(lambda), t).unwrap();
        let expected = DMatrix::<f64>::identity(3, 3) * (t * lambda).exp();
        assert!((gt.as_matrix() - expected).norm() < 1e-13);
    }

    #[test]
    fn distance_scalar_case() {
        let (alpha, beta, p, lambda) = (3.0, -0.5, 3usize, 0.7f64);
        let c = MetricCoefficients::new(alpha, beta, p).unwrap();
        let s = SpdMat::new(SymMat::identity(p).scale(lambda.exp())).unwrap();
        let d = fisher_distance_sq(&c, &SpdMat::identity(p), &s).unwrap();
        let pf = p as f64;
        let expected = alpha * pf * lambda * lambda + beta * pf * pf * lambda * lambda;
        assert!((d - expected).abs() < 1e-13);
        assert_eq!(fisher_distance_sq(&c, &s, &s).unwrap(), 0.0);
    }

    #[test]
    fn transport_trivial_cases() {
        let g = SpdMat::from_row_slice(2, &[2.0, 0.5, 0.5, 1.0]).unwrap();
        let eta = SymMat::from_row_slice(2, &[0.3, 0.1, 0.1, -0.2]).unwrap();
        let t = vector_transport(&g, &g, &eta).unwrap();
        assert!((t.as_matrix() - eta.as_matrix()).norm() < 1e-14);

        let c = 3.5;
        let s = SpdMat::new(SymMat::identity(2).scale(c)).unwrap();
        let t = vector_transport(&SpdMat::identity(2), &s, &eta).unwrap();
        assert!((t.as_matrix() - eta.as_matrix() * c).norm() < 1e-14);
    }

    #[test]
    fn rgrad_trivial_cases() {
        let g = SpdMat::from_row_slice(2, &[2.0, 0.5, 0.5, 1.0]).unwrap();
        let egrad = SymMat::from_row_slice(2, &[0.3, 0.1, 0.1, -0.2]).unwrap();
        let c = MetricCoefficients::affine_invariant(2);
        let r = egrad_to_rgrad(&c, &g, &egrad).unwrap();
        let expected = g.as_matrix() * egrad.as_matrix() * g.as_matrix();
        assert!((r.as_matrix() - expected).norm() < 1e-14);

        let c = MetricCoefficients::new(5.0, -1.0, 2).unwrap();
        let r = egrad_to_rgrad(&c, &g, &SymMat::zeros(2)).unwrap();
        assert_eq!(r.frobenius_norm(), 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        let c = MetricCoefficients::affine_invariant(2);
        let g = SpdMat::identity(2);
        let x = SymMat::identity(3);
        assert!(matches!(
            metric_inner(&c, &g, &x, &x),
            Err(Error::Dimension { .. })
        ));
        assert!(exp_map(&g, &x).is_err());
        assert!(TangentVec::new(g, x).is_err());
    }
}
