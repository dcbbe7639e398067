//! Maximum-likelihood estimation of the center `G`.
//!
//! Two families of estimators are provided: the fixed-point iteration
//! `G <- (1/nK) sum_k u(tr(G^-1 S_k)) S_k`, and Riemannian descent under the
//! model's Fisher metric (steepest descent or conjugate gradient, with a
//! backtracking line search along a retraction). The Wishart model has the
//! closed form `(1/nK) sum_k S_k`.

use std::time::Instant;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    egrad_to_rgrad, exp_map, fisher_distance, metric_inner, retract, vector_transport,
    MetricCoefficients,
};
use crate::linalg::{SpdMat, SymMat};
use crate::model::{
    check_assumptions, default_grid, euclidean_gradient, neg_log_likelihood, quadratic_traces,
    EWModel, SampleSet,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    FixedPoint,
    RiemannSd,
    RiemannCg,
}

impl Algorithm {
    pub fn short_name(self) -> &'static str {
        match self {
            Algorithm::FixedPoint => "fp",
            Algorithm::RiemannSd => "rsd",
            Algorithm::RiemannCg => "rcg",
        }
    }

    pub fn from_short_name(s: &str) -> Option<Self> {
        match s {
            "fp" | "fixed_point" => Some(Algorithm::FixedPoint),
            "rsd" | "riemann_sd" => Some(Algorithm::RiemannSd),
            "rcg" | "riemann_cg" => Some(Algorithm::RiemannCg),
            _ => None,
        }
    }

    pub fn default_max_iterations(self) -> usize {
        match self {
            Algorithm::FixedPoint => 10_000,
            Algorithm::RiemannSd | Algorithm::RiemannCg => 500,
        }
    }
}

/// Starting point of an iterative estimator.
#[derive(Clone, Debug)]
pub enum Init {
    Identity,
    WishartMle,
    User(SpdMat),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineSearch {
    pub initial_step: f64,
    pub contraction: f64,
    /// Armijo constant.
    pub sufficient_decrease: f64,
    pub max_contractions: usize,
}

impl Default for LineSearch {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            contraction: 0.5,
            sufficient_decrease: 1e-4,
            max_contractions: 60,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CgRule {
    FletcherReeves,
    PolakRibierePlus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Retraction {
    /// `G + xi + xi G^-1 xi / 2`.
    SecondOrder,
    Exponential,
}

#[derive(Clone, Debug)]
pub struct FitOptions {
    pub algorithm: Algorithm,
    pub max_iterations: usize,
    /// Threshold on the Fisher distance between successive iterates.
    pub tolerance: f64,
    pub init: Init,
    pub line_search: LineSearch,
    pub cg_rule: CgRule,
    pub retraction: Retraction,
    /// Keep every iterate in the trace.
    pub record_iterates: bool,
}

impl FitOptions {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            max_iterations: algorithm.default_max_iterations(),
            tolerance: 1e-8,
            init: Init::WishartMle,
            line_search: LineSearch::default(),
            cg_rule: CgRule::PolakRibierePlus,
            retraction: Retraction::SecondOrder,
            record_iterates: false,
        }
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ls = &self.line_search;
        if !(self.tolerance > 0.0) {
            return Err(Error::Parameter("tolerance must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Parameter("max_iterations must be at least 1".into()));
        }
        if !(ls.contraction > 0.0 && ls.contraction < 1.0) {
            return Err(Error::Parameter("line-search contraction must lie in (0, 1)".into()));
        }
        if !(ls.sufficient_decrease > 0.0 && ls.sufficient_decrease <= 0.5) {
            return Err(Error::Parameter(
                "sufficient-decrease constant must lie in (0, 0.5]".into(),
            ));
        }
        if !(ls.initial_step > 0.0) {
            return Err(Error::Parameter("initial step must be positive".into()));
        }
        Ok(())
    }
}

impl Default for FitOptions {
    fn default() -> Self {
        Self::new(Algorithm::RiemannCg)
    }
}

#[derive(Clone, Debug)]
pub struct IterationRecord {
    pub cost: f64,
    /// Riemannian gradient norm under the model's metric.
    pub grad_norm: f64,
    /// Fisher distance to the previous iterate.
    pub step_distance: f64,
    /// Seconds since the fit started.
    pub elapsed: f64,
    pub iterate: Option<SpdMat>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Tolerance,
    MaxIterations,
    Stagnation,
}

#[derive(Clone, Debug)]
pub struct FitReport {
    pub estimate: SpdMat,
    pub converged: bool,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
    pub termination: Termination,
}

/// `(1/nK) sum_k S_k`.
pub fn wishart_closed_form(data: &SampleSet, n: usize) -> Result<SpdMat> {
    if n == 0 {
        return Err(Error::Parameter("degrees of freedom must be positive".into()));
    }
    let ones = vec![1.0; data.len()];
    let scale = 1.0 / (n as f64 * data.len() as f64);
    SpdMat::from_matrix(data.weighted_sum(&ones) * scale)
}

/// One step of `G <- (1/nK) sum_k u(tr(G^-1 S_k)) S_k`.
pub fn fixed_point_step(model: &EWModel, g: &SpdMat, data: &SampleSet) -> Result<SpdMat> {
    check_dims(model, g, data)?;
    let weights: Vec<f64> = quadratic_traces(g, data).into_iter().map(|t| model.u(t)).collect();
    let scale = 1.0 / (model.n() as f64 * data.len() as f64);
    SpdMat::from_matrix(data.weighted_sum(&weights) * scale)
}

/// Steepest-descent step with the Euclidean retraction,
/// `G - step * grad L(G)`, where the Riemannian gradient is taken for the
/// metric `coeff` (not necessarily the model's).
pub fn euclidean_retraction_step(
    model: &EWModel,
    g: &SpdMat,
    data: &SampleSet,
    coeff: &MetricCoefficients,
    step: f64,
) -> Result<SpdMat> {
    let egrad = euclidean_gradient(model, g, data)?;
    let rgrad = egrad_to_rgrad(coeff, g, &egrad)?;
    SpdMat::new(g.as_sym() - &rgrad.scale(step))
}

/// Riemannian gradient of the negative log-likelihood under the model's metric.
pub fn riemannian_gradient(model: &EWModel, g: &SpdMat, data: &SampleSet) -> Result<SymMat> {
    let egrad = euclidean_gradient(model, g, data)?;
    egrad_to_rgrad(&model.coefficients(), g, &egrad)
}

/// Norm of the Riemannian gradient under the model's metric.
pub fn gradient_norm(model: &EWModel, g: &SpdMat, data: &SampleSet) -> Result<f64> {
    let rgrad = riemannian_gradient(model, g, data)?;
    Ok(metric_inner(&model.coefficients(), g, &rgrad, &rgrad)?.max(0.0).sqrt())
}

fn check_dims(model: &EWModel, g: &SpdMat, data: &SampleSet) -> Result<()> {
    for got in [g.dim(), data.dim()] {
        if got != model.p() {
            return Err(Error::Dimension {
                expected: model.p(),
                got,
            });
        }
    }
    Ok(())
}

fn precheck(model: &EWModel, data: &SampleSet, opts: &FitOptions) -> Result<SpdMat> {
    opts.validate()?;
    let report = check_assumptions(model.generator(), model.n(), model.p(), &default_grid(model.np()))?;
    let failed = report.failures();
    if !failed.is_empty() {
        return Err(Error::Model(format!(
            "density generator {} violates: {}",
            report.generator,
            failed.join(", ")
        )));
    }
    let open = report.inconclusive();
    if !open.is_empty() {
        warn!("could not verify {} for {}", open.join(", "), report.generator);
    }
    let g0 = match &opts.init {
        Init::Identity => SpdMat::identity(model.p()),
        Init::WishartMle => wishart_closed_form(data, model.n())?,
        Init::User(g) => g.clone(),
    };
    check_dims(model, &g0, data)?;
    Ok(g0)
}

/// Runs the estimator selected by `opts.algorithm`.
pub fn fit(model: &EWModel, data: &SampleSet, opts: &FitOptions) -> Result<FitReport> {
    fit_with_observer(model, data, opts, &mut |_| {})
}

/// As [`fit`], calling `observer` with every new iterate.
pub fn fit_with_observer(
    model: &EWModel,
    data: &SampleSet,
    opts: &FitOptions,
    observer: &mut dyn FnMut(&SpdMat),
) -> Result<FitReport> {
    match opts.algorithm {
        Algorithm::FixedPoint => fixed_point_loop(model, data, opts, observer),
        Algorithm::RiemannSd | Algorithm::RiemannCg => riemannian_loop(model, data, opts, observer),
    }
}

/// Fixed-point iteration; `opts.algorithm` is ignored.
pub fn fit_fixed_point(model: &EWModel, data: &SampleSet, opts: &FitOptions) -> Result<FitReport> {
    fixed_point_loop(model, data, opts, &mut |_| {})
}

fn fixed_point_loop(
    model: &EWModel,
    data: &SampleSet,
    opts: &FitOptions,
    observer: &mut dyn FnMut(&SpdMat),
) -> Result<FitReport> {
    let start = Instant::now();
    let coeff = model.coefficients();
    let mut g = precheck(model, data, opts)?;
    let mut trace = Vec::new();
    let mut termination = Termination::MaxIterations;
    for _ in 0..opts.max_iterations {
        let next = fixed_point_step(model, &g, data)?;
        let step_distance = fisher_distance(&coeff, &g, &next)?;
        g = next;
        observer(&g);
        let cost = neg_log_likelihood(model, &g, data)?;
        if !cost.is_finite() {
            return Err(Error::Divergence(format!("cost became {cost}")));
        }
        trace.push(IterationRecord {
            cost,
            grad_norm: gradient_norm(model, &g, data)?,
            step_distance,
            elapsed: start.elapsed().as_secs_f64(),
            iterate: opts.record_iterates.then(|| g.clone()),
        });
        if step_distance < opts.tolerance {
            termination = Termination::Tolerance;
            break;
        }
    }
    Ok(FitReport {
        estimate: g,
        converged: termination == Termination::Tolerance,
        iterations: trace.len(),
        trace,
        termination,
    })
}

struct Objective<'a> {
    model: &'a EWModel,
    data: &'a SampleSet,
    retraction: Retraction,
}

impl Objective<'_> {
    fn cost(&self, g: &SpdMat) -> Result<f64> {
        neg_log_likelihood(self.model, g, self.data)
    }

    fn retract(&self, g: &SpdMat, xi: &SymMat) -> Result<SpdMat> {
        match self.retraction {
            Retraction::SecondOrder => retract(g, xi),
            Retraction::Exponential => exp_map(g, xi),
        }
    }

    /// Derivative of `lambda -> L(R_G(lambda xi))` at `lambda`, where
    /// `moved = R_G(lambda xi)`.
    fn curve_slope(&self, g: &SpdMat, xi: &SymMat, lambda: f64, moved: &SpdMat) -> Result<f64> {
        let egrad = euclidean_gradient(self.model, moved, self.data)?;
        let x = xi.as_matrix();
        let velocity = match self.retraction {
            Retraction::SecondOrder => x + x * g.inverse() * x * lambda,
            Retraction::Exponential => moved.as_matrix() * g.inverse() * x,
        };
        Ok(egrad.as_matrix().dot(&velocity))
    }
}

struct Accepted {
    step: f64,
    point: SpdMat,
    cost: f64,
}

/// Backtracking along the retraction. A trial is accepted by the Armijo
/// rule while cost differences exceed rounding level; below that level the
/// slope of the cost along the curve decides (at most half the initial
/// descent rate, reversed).
fn line_search(
    obj: &Objective<'_>,
    ls: &LineSearch,
    g: &SpdMat,
    cost0: f64,
    xi: &SymMat,
    slope0: f64,
) -> Result<Option<Accepted>> {
    let noise = 1e-12 * (1.0 + cost0.abs());
    let mut step = ls.initial_step;
    for _ in 0..=ls.max_contractions {
        let point = obj.retract(g, &xi.scale(step))?;
        let cost = obj.cost(&point)?;
        if cost.is_finite() {
            if cost0 - cost > noise {
                if cost <= cost0 + ls.sufficient_decrease * step * slope0 {
                    return Ok(Some(Accepted { step, point, cost }));
                }
            } else if cost <= cost0 + noise {
                let slope = obj.curve_slope(g, xi, step, &point)?;
                if slope <= -0.5 * slope0 {
                    return Ok(Some(Accepted { step, point, cost }));
                }
            }
        }
        step *= ls.contraction;
    }
    Ok(None)
}

/// Riemannian steepest descent or conjugate gradient, per `opts.algorithm`
/// (conjugate gradient unless it is `RiemannSd`).
pub fn fit_riemannian(model: &EWModel, data: &SampleSet, opts: &FitOptions) -> Result<FitReport> {
    riemannian_loop(model, data, opts, &mut |_| {})
}

fn riemannian_loop(
    model: &EWModel,
    data: &SampleSet,
    opts: &FitOptions,
    observer: &mut dyn FnMut(&SpdMat),
) -> Result<FitReport> {
    let start = Instant::now();
    let coeff = model.coefficients();
    let obj = Objective {
        model,
        data,
        retraction: opts.retraction,
    };
    let use_cg = opts.algorithm != Algorithm::RiemannSd;

    let mut g = precheck(model, data, opts)?;
    let mut cost = obj.cost(&g)?;
    let mut rgrad = riemannian_gradient(model, &g, data)?;
    let mut grad_sq = metric_inner(&coeff, &g, &rgrad, &rgrad)?;
    // (previous point, previous step * direction)
    let mut memory: Option<(SpdMat, SymMat)> = None;
    let mut prev_grad: Option<(SymMat, f64)> = None;

    let mut trace = Vec::new();
    let mut termination = Termination::MaxIterations;
    for _ in 0..opts.max_iterations {
        let steepest = -&rgrad;
        let mut xi = steepest.clone();
        if use_cg {
            if let (Some((prev_g, prev_step_dir)), Some((prev_rgrad, prev_sq))) =
                (&memory, &prev_grad)
            {
                let carried = vector_transport(prev_g, &g, prev_step_dir)?;
                let kappa = match opts.cg_rule {
                    CgRule::FletcherReeves => grad_sq / prev_sq,
                    CgRule::PolakRibierePlus => {
                        let old = vector_transport(prev_g, &g, prev_rgrad)?;
                        let diff = &rgrad - &old;
                        (metric_inner(&coeff, &g, &rgrad, &diff)? / prev_sq).max(0.0)
                    }
                };
                xi = &steepest + &carried.scale(kappa);
            }
        }
        let mut slope = metric_inner(&coeff, &g, &rgrad, &xi)?;
        if slope >= 0.0 {
            xi = steepest;
            slope = -grad_sq;
        }
        if slope == 0.0 {
            // Exact critical point.
            trace.push(IterationRecord {
                cost,
                grad_norm: 0.0,
                step_distance: 0.0,
                elapsed: start.elapsed().as_secs_f64(),
                iterate: opts.record_iterates.then(|| g.clone()),
            });
            termination = Termination::Tolerance;
            break;
        }

        let Some(accepted) = line_search(&obj, &opts.line_search, &g, cost, &xi, slope)? else {
            termination = Termination::Stagnation;
            break;
        };
        if !accepted.cost.is_finite() {
            return Err(Error::Divergence(format!("cost became {}", accepted.cost)));
        }
        let step_distance = fisher_distance(&coeff, &g, &accepted.point)?;
        let next_rgrad = riemannian_gradient(model, &accepted.point, data)?;
        let next_sq = metric_inner(&coeff, &accepted.point, &next_rgrad, &next_rgrad)?;

        memory = Some((g, xi.scale(accepted.step)));
        prev_grad = Some((rgrad, grad_sq));
        g = accepted.point;
        observer(&g);
        cost = accepted.cost;
        rgrad = next_rgrad;
        grad_sq = next_sq;

        trace.push(IterationRecord {
            cost,
            grad_norm: grad_sq.max(0.0).sqrt(),
            step_distance,
            elapsed: start.elapsed().as_secs_f64(),
            iterate: opts.record_iterates.then(|| g.clone()),
        });
        if step_distance < opts.tolerance {
            termination = Termination::Tolerance;
            break;
        }
    }
    Ok(FitReport {
        estimate: g,
        converged: termination == Termination::Tolerance,
        iterations: trace.len(),
        trace,
        termination,
    })
}
