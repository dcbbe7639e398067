//! Density generators: the scalar function `h` that selects one member of
//! the elliptical Wishart family, together with the derived weight
//! `u(t) = -2 h'(t) / h(t)`, `psi(t) = t u(t)` and a sampler for the radius
//! `Q`, whose density is proportional to `h(t) t^{np/2 - 1}`.
//!
//! All quantities depend on the dimensions only through the product `np`,
//! which is passed explicitly.

use std::fmt::Debug;

use rand::RngCore;
use rand_distr::{ChiSquared, Distribution, FisherF};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// One member of the elliptical Wishart family.
pub trait DensityGenerator: Send + Sync + Debug {
    fn name(&self) -> String;

    /// `log h(t)` without its normalizing constant.
    fn log_h(&self, t: f64, np: f64) -> f64;

    /// `u(t) = -2 h'(t) / h(t)`.
    fn u(&self, t: f64, np: f64) -> f64;

    fn psi(&self, t: f64, np: f64) -> f64 {
        t * self.u(t, np)
    }

    /// Analytic supremum of `psi` over `t >= 0`, `Some(f64::INFINITY)` when
    /// unbounded, `None` when unknown.
    fn psi_sup(&self, np: f64) -> Option<f64>;

    /// Draws the radius `Q`.
    fn sample_radius(&self, np: f64, rng: &mut dyn RngCore) -> f64;

    /// Closed-form metric coefficient `alpha`, when one is known.
    fn alpha_closed_form(&self, _n: f64, _p: usize) -> Option<f64> {
        None
    }

    /// `log` of `int_0^inf h(t) t^{np/2 - 1} dt` for the unnormalized `h`.
    fn log_radius_normalizer(&self, np: f64) -> f64 {
        let a = np / 2.0;
        log_integral_on_log_scale(|x| self.log_h(x.exp(), np) + a * x)
    }

    /// `u'(t)` by a central difference with relative step `1e-5`.
    fn u_derivative(&self, t: f64, np: f64) -> f64 {
        let h = 1e-5 * t.abs().max(1e-3);
        let lo = (t - h).max(0.0);
        let hi = t + h;
        (self.u(hi, np) - self.u(lo, np)) / (hi - lo)
    }
}

/// `log int exp(f(x)) dx` over the real line by the trapezoidal rule on a
/// window that holds all but a negligible part of the mass.
pub(crate) fn log_integral_on_log_scale(f: impl Fn(f64) -> f64) -> f64 {
    // Coarse scan for the mode.
    let (mut best_x, mut best) = (0.0, f64::NEG_INFINITY);
    let mut x = -200.0;
    while x <= 200.0 {
        let v = f(x);
        if v > best {
            best = v;
            best_x = x;
        }
        x += 0.25;
    }
    let cutoff = best - 45.0;
    let step = 1e-3;
    let mut lo = best_x;
    while f(lo) > cutoff && lo > -400.0 {
        lo -= 0.5;
    }
    let mut hi = best_x;
    while f(hi) > cutoff && hi < 400.0 {
        hi += 0.5;
    }
    let steps = ((hi - lo) / step).ceil() as usize;
    let h = (hi - lo) / steps as f64;
    let mut acc = 0.0;
    for i in 0..=steps {
        let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
        acc += w * (f(lo + i as f64 * h) - best).exp();
    }
    best + (acc * h).ln()
}

/// Wishart: `h(t) = exp(-t/2)`, `u = 1`, `Q ~ chi2(np)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Wishart;

impl DensityGenerator for Wishart {
    fn name(&self) -> String {
        "wishart".into()
    }

    fn log_h(&self, t: f64, _np: f64) -> f64 {
        -0.5 * t
    }

    fn u(&self, _t: f64, _np: f64) -> f64 {
        1.0
    }

    fn psi(&self, t: f64, _np: f64) -> f64 {
        t
    }

    fn psi_sup(&self, _np: f64) -> Option<f64> {
        Some(f64::INFINITY)
    }

    fn sample_radius(&self, np: f64, rng: &mut dyn RngCore) -> f64 {
        ChiSquared::new(np).expect("np > 0").sample(rng)
    }

    fn alpha_closed_form(&self, n: f64, _p: usize) -> Option<f64> {
        Some(n / 2.0)
    }

    fn log_radius_normalizer(&self, np: f64) -> f64 {
        let a = np / 2.0;
        ln_gamma(a) + a * std::f64::consts::LN_2
    }

    fn u_derivative(&self, _t: f64, _np: f64) -> f64 {
        0.0
    }
}

/// Matrix t-Wishart with `nu` degrees of freedom:
/// `h(t) = (1 + t/nu)^{-(nu + np)/2}`, `u(t) = (nu + np)/(nu + t)`.
#[derive(Clone, Copy, Debug)]
pub struct TWishart {
    nu: f64,
}

impl TWishart {
    pub fn new(nu: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::Parameter(format!("degrees of freedom nu={nu} must be > 0")));
        }
        Ok(Self { nu })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }
}

impl DensityGenerator for TWishart {
    fn name(&self) -> String {
        format!("t-wishart(nu={})", self.nu)
    }

    fn log_h(&self, t: f64, np: f64) -> f64 {
        -0.5 * (self.nu + np) * (t / self.nu).ln_1p()
    }

    fn u(&self, t: f64, np: f64) -> f64 {
        (self.nu + np) / (self.nu + t)
    }

    fn psi_sup(&self, np: f64) -> Option<f64> {
        Some(np + self.nu)
    }

    /// `Q = np F` with `F ~ F(np, nu)`.
    fn sample_radius(&self, np: f64, rng: &mut dyn RngCore) -> f64 {
        np * FisherF::new(np, self.nu).expect("positive dof").sample(rng)
    }

    fn alpha_closed_form(&self, n: f64, p: usize) -> Option<f64> {
        let np = n * p as f64;
        Some(0.5 * n * (self.nu + np) / (self.nu + np + 2.0))
    }

    /// `nu^a B(a, nu/2)` with `a = np/2`.
    fn log_radius_normalizer(&self, np: f64) -> f64 {
        let a = np / 2.0;
        let b = self.nu / 2.0;
        a * self.nu.ln() + ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
    }

    fn u_derivative(&self, t: f64, np: f64) -> f64 {
        -(self.nu + np) / ((self.nu + t) * (self.nu + t))
    }
}

/// Standard Wishart generator.
pub fn wishart_generator() -> Wishart {
    Wishart
}

/// t-Wishart generator; fails unless `nu > 0`.
pub fn t_wishart_generator(nu: f64) -> Result<TWishart> {
    TWishart::new(nu)
}
