//! Elliptical Wishart statistical models.
//!
//! A model binds a [`DensityGenerator`] to the degrees of freedom `n` and the
//! matrix dimension `p`. It evaluates densities, the negative log-likelihood
//! of a sample set and its Euclidean gradient, draws samples through the
//! stochastic representation `S = Q G^{1/2} U U^T G^{1/2}`, and carries the
//! Fisher metric coefficients used by the estimators.
//!
//! The density is normalized by requiring
//! `pi^{np/2} / Gamma(np/2) * int_0^inf c h(t) t^{np/2-1} dt = 1` for the
//! constant `c` in front of `h`; the radius density is normalized directly
//! rather than with the multivariate gamma function.

mod assumptions;
mod generator;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

pub use assumptions::{check_assumptions, default_grid, AssumptionReport, Verdict};
pub use generator::{t_wishart_generator, wishart_generator, DensityGenerator, TWishart, Wishart};

use crate::error::{Error, Result};
use crate::geometry::MetricCoefficients;
use crate::linalg::{SpdMat, SymMat};

/// Draw count for the Monte-Carlo coefficient path.
pub const MONTE_CARLO_DRAWS: usize = 1_000_000;
const MONTE_CARLO_SEED: u64 = 0x5eed_a1fa;

/// An ordered, non-empty collection of SPD matrices of equal dimension.
#[derive(Clone, Debug)]
pub struct SampleSet {
    samples: Vec<SpdMat>,
}

impl SampleSet {
    pub fn new(samples: Vec<SpdMat>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::Parameter("sample set must not be empty".into()))?;
        let p = first.dim();
        if let Some(bad) = samples.iter().find(|s| s.dim() != p) {
            return Err(Error::Dimension {
                expected: p,
                got: bad.dim(),
            });
        }
        Ok(Self { samples })
    }

    pub fn dim(&self) -> usize {
        self.samples[0].dim()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[SpdMat] {
        &self.samples
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SpdMat> {
        self.samples.iter()
    }

    pub fn into_samples(self) -> Vec<SpdMat> {
        self.samples
    }

    /// Sub-collection at the given indices; fails if `indices` is empty.
    pub fn select(&self, indices: &[usize]) -> Result<SampleSet> {
        SampleSet::new(indices.iter().map(|&i| self.samples[i].clone()).collect())
    }

    /// Every sample multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<SampleSet> {
        Ok(Self {
            samples: self.samples.iter().map(|s| s.scale(c)).collect::<Result<_>>()?,
        })
    }

    /// `sum_k w_k S_k`.
    pub fn weighted_sum(&self, weights: &[f64]) -> DMatrix<f64> {
        let p = self.dim();
        let mut acc = DMatrix::<f64>::zeros(p, p);
        for (s, &w) in self.samples.iter().zip(weights) {
            acc += s.as_matrix() * w;
        }
        acc
    }
}

/// A density generator bound to degrees of freedom `n` and dimension `p`.
#[derive(Clone)]
pub struct EWModel {
    generator: Arc<dyn DensityGenerator>,
    n: usize,
    p: usize,
    coeff: MetricCoefficients,
    log_constant: f64,
}

impl fmt::Debug for EWModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EWModel")
            .field("generator", &self.generator.name())
            .field("n", &self.n)
            .field("p", &self.p)
            .field("coeff", &self.coeff)
            .finish()
    }
}

impl EWModel {
    /// Requires `n > p >= 1`; computes the metric coefficients (closed form
    /// when the generator provides one, Monte-Carlo otherwise).
    pub fn new(generator: Arc<dyn DensityGenerator>, n: usize, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::Parameter("dimension p must be at least 1".into()));
        }
        if n <= p {
            return Err(Error::Parameter(format!(
                "degrees of freedom n={n} must exceed p={p}"
            )));
        }
        let coeff = metric_coefficients(generator.as_ref(), n, p)?;
        let np = (n * p) as f64;
        let log_constant = ln_gamma(np / 2.0)
            - generator.log_radius_normalizer(np)
            - ln_multivariate_gamma(p, n as f64 / 2.0);
        Ok(Self {
            generator,
            n,
            p,
            coeff,
            log_constant,
        })
    }

    pub fn wishart(n: usize, p: usize) -> Result<Self> {
        Self::new(Arc::new(Wishart), n, p)
    }

    pub fn t_wishart(n: usize, p: usize, nu: f64) -> Result<Self> {
        Self::new(Arc::new(TWishart::new(nu)?), n, p)
    }

    pub fn generator(&self) -> &dyn DensityGenerator {
        self.generator.as_ref()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn np(&self) -> f64 {
        (self.n * self.p) as f64
    }

    pub fn coefficients(&self) -> MetricCoefficients {
        self.coeff
    }

    pub fn log_h(&self, t: f64) -> f64 {
        self.generator.log_h(t, self.np())
    }

    pub fn u(&self, t: f64) -> f64 {
        self.generator.u(t, self.np())
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.p {
            return Err(Error::Dimension {
                expected: self.p,
                got,
            });
        }
        Ok(())
    }
}

/// `log Gamma_p(a) = p(p-1)/4 log(pi) + sum_j log Gamma(a - (j-1)/2)`.
pub fn ln_multivariate_gamma(p: usize, a: f64) -> f64 {
    let pf = p as f64;
    pf * (pf - 1.0) / 4.0 * PI.ln() + (0..p).map(|j| ln_gamma(a - j as f64 / 2.0)).sum::<f64>()
}

/// Fisher metric coefficients of the model `(generator, n, p)`.
pub fn metric_coefficients(
    generator: &dyn DensityGenerator,
    n: usize,
    p: usize,
) -> Result<MetricCoefficients> {
    let nf = n as f64;
    let alpha = match generator.alpha_closed_form(nf, p) {
        Some(a) => a,
        None => {
            let mut rng = ChaCha20Rng::seed_from_u64(MONTE_CARLO_SEED);
            monte_carlo_alpha(generator, n, p, MONTE_CARLO_DRAWS, &mut rng)
        }
    };
    let beta = 0.5 * nf * (alpha - 0.5 * nf);
    MetricCoefficients::new(alpha, beta, p)
}

/// `alpha = (n/2) (1 + E[Q^2 u'(Q)] / (np (np/2 + 1)))` estimated from
/// `draws` radius samples, with `u'` taken from the generator (finite
/// differences unless it overrides [`DensityGenerator::u_derivative`]).
pub fn monte_carlo_alpha(
    generator: &dyn DensityGenerator,
    n: usize,
    p: usize,
    draws: usize,
    rng: &mut dyn RngCore,
) -> f64 {
    let np = (n * p) as f64;
    let mut acc = 0.0;
    for _ in 0..draws {
        let q = generator.sample_radius(np, rng);
        acc += q * q * generator.u_derivative(q, np);
    }
    let mean = acc / draws as f64;
    0.5 * n as f64 * (1.0 + mean / (np * (np / 2.0 + 1.0)))
}

/// Log-density of `s` under the model centered at `g`.
pub fn log_pdf(model: &EWModel, g: &SpdMat, s: &SpdMat) -> Result<f64> {
    model.check_dim(g.dim())?;
    model.check_dim(s.dim())?;
    let (n, p) = (model.n as f64, model.p as f64);
    let t = g.trace_inv_product(s.as_sym());
    Ok(model.log_constant - 0.5 * n * g.logdet()
        + 0.5 * (n - p - 1.0) * s.logdet()
        + model.log_h(t))
}

/// `tr(G^-1 S_k)` for every sample.
pub fn quadratic_traces(g: &SpdMat, data: &SampleSet) -> Vec<f64> {
    let ginv = g.inverse();
    data.iter().map(|s| ginv.dot(s.as_matrix())).collect()
}

/// `L(G) = (nK/2) log det G - sum_k log h(tr(G^-1 S_k))`, without the
/// constant.
pub fn neg_log_likelihood(model: &EWModel, g: &SpdMat, data: &SampleSet) -> Result<f64> {
    model.check_dim(g.dim())?;
    model.check_dim(data.dim())?;
    let k = data.len() as f64;
    let np = model.np();
    let gen = model.generator();
    let tail: f64 = quadratic_traces(g, data).into_iter().map(|t| gen.log_h(t, np)).sum();
    Ok(0.5 * model.n as f64 * k * g.logdet() - tail)
}

/// `(1/2) G^-1 (nK G - sum_k u(tr(G^-1 S_k)) S_k) G^-1`.
pub fn euclidean_gradient(model: &EWModel, g: &SpdMat, data: &SampleSet) -> Result<SymMat> {
    model.check_dim(g.dim())?;
    model.check_dim(data.dim())?;
    let weights: Vec<f64> = quadratic_traces(g, data).into_iter().map(|t| model.u(t)).collect();
    let weighted = data.weighted_sum(&weights);
    let ginv = g.inverse();
    let nk = model.n as f64 * data.len() as f64;
    let grad = (ginv * nk - ginv * weighted * ginv) * 0.5;
    SymMat::from_matrix(grad)
}

/// Draws `count` samples centered at `g`.
pub fn sample<R: RngCore>(model: &EWModel, g: &SpdMat, count: usize, rng: &mut R) -> Result<SampleSet> {
    model.check_dim(g.dim())?;
    if count == 0 {
        return Err(Error::Parameter("sample count must be at least 1".into()));
    }
    let (n, p) = (model.n, model.p);
    let np = model.np();
    let root = g.sqrt_matrix();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut attempts = 0;
        let s = loop {
            let z = DMatrix::<f64>::from_fn(p, n, |_, _| StandardNormal.sample(&mut *rng));
            let u = &z / z.norm();
            let q = model.generator.sample_radius(np, rng);
            let x = root * u;
            match SpdMat::from_matrix(&x * x.transpose() * q) {
                Ok(s) => break s,
                Err(e) if attempts >= 100 => return Err(e),
                Err(_) => attempts += 1,
            }
        };
        out.push(s);
    }
    SampleSet::new(out)
}
