//! Synthetic-data protocol and Monte-Carlo studies: random centers with a
//! prescribed condition number, the convergence comparison of the fixed
//! point and Riemannian conjugate gradient estimators, and the
//! estimation-error study against the number of samples.
//!
//! Each repetition draws from its own ChaCha stream derived from the seed
//! and the repetition index, so a repetition's output does not depend on
//! how many repetitions run or in which order.

mod config;
pub mod io;

pub use config::{ClusteringConfig, ExperimentConfig, FitConfig, GeneratorKind, InitKind, ProblemConfig, RunConfig};

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimation::{fit_with_observer, wishart_closed_form, Algorithm, FitOptions};
use crate::geometry::fisher_distance_sq;
use crate::linalg::{SpdMat, SymMat};
use crate::model::{sample, EWModel};

/// Random stream `stream` of the generator seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of `R`'s diagonal moved into `Q`.
pub fn haar_orthogonal<R: Rng + ?Sized>(p: usize, rng: &mut R) -> DMatrix<f64> {
    let z = DMatrix::<f64>::from_fn(p, p, |_, _| rng.sample(StandardNormal));
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `V diag(lambda) V^T` with `V` Haar, `lambda_1 = 1/sqrt(c)`,
/// `lambda_p = sqrt(c)` and the rest uniform in between.
pub fn random_center<R: Rng + ?Sized>(p: usize, condition_number: f64, rng: &mut R) -> Result<SpdMat> {
    if p < 2 {
        return Err(Error::Parameter(format!("random centers need p >= 2, got {p}")));
    }
    if !(condition_number >= 1.0 && condition_number.is_finite()) {
        return Err(Error::Parameter(format!(
            "condition number must be >= 1, got {condition_number}"
        )));
    }
    let v = haar_orthogonal(p, rng);
    let (lo, hi) = (condition_number.sqrt().recip(), condition_number.sqrt());
    let mut lambda = DVector::zeros(p);
    lambda[0] = lo;
    lambda[p - 1] = hi;
    for i in 1..p - 1 {
        lambda[i] = if hi > lo { rng.random_range(lo..hi) } else { lo };
    }
    let g = &v * DMatrix::from_diagonal(&lambda) * v.transpose();
    SpdMat::new(SymMat::from_matrix(g)?)
}

/// First-order intrinsic Cramér-Rao reference `p(p+1)/(2K)`: the manifold
/// dimension over the sample count.
pub fn crb_reference(p: usize, k: usize) -> f64 {
    (p * (p + 1)) as f64 / (2.0 * k as f64)
}

#[derive(Clone, Debug, Serialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub cost: f64,
    /// Squared Fisher distance to the true center.
    pub error: f64,
    /// Seconds since the fit started.
    pub time: f64,
}

/// One estimator on one repetition.
#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub repetition: usize,
    pub estimator: String,
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    /// Squared Fisher distance to the true center; NaN on failure.
    pub error: f64,
    pub iterations: usize,
    pub seconds: f64,
    pub converged: bool,
    pub failure: Option<String>,
    #[serde(skip)]
    pub trace: Vec<TracePoint>,
}

impl RunRecord {
    fn failed(repetition: usize, estimator: &str, n: usize, k: usize, err: &Error) -> Self {
        Self {
            repetition,
            estimator: estimator.into(),
            n,
            k,
            error: f64::NAN,
            iterations: 0,
            seconds: 0.0,
            converged: false,
            failure: Some(err.to_string()),
            trace: Vec::new(),
        }
    }
}

fn traced_fit(
    model: &EWModel,
    truth: &SpdMat,
    data: &crate::model::SampleSet,
    opts: &FitOptions,
    repetition: usize,
    estimator: &str,
    with_trace: bool,
) -> RunRecord {
    let coeff = model.coefficients();
    let mut errors = Vec::new();
    let mut observe = |g: &SpdMat| {
        if with_trace {
            errors.push(fisher_distance_sq(&coeff, g, truth).unwrap_or(f64::NAN));
        }
    };
    let started = Instant::now();
    let outcome = fit_with_observer(model, data, opts, &mut observe).and_then(|report| {
        let seconds = started.elapsed().as_secs_f64();
        let trace = if with_trace {
            report
                .trace
                .iter()
                .zip(&errors)
                .enumerate()
                .map(|(i, (rec, &error))| TracePoint {
                    iteration: i + 1,
                    cost: rec.cost,
                    error,
                    time: rec.elapsed,
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok(RunRecord {
            repetition,
            estimator: estimator.into(),
            n: model.n(),
            k: data.len(),
            error: fisher_distance_sq(&coeff, &report.estimate, truth)?,
            iterations: report.iterations,
            seconds,
            converged: report.converged,
            failure: None,
            trace,
        })
    });
    outcome.unwrap_or_else(|e| RunRecord::failed(repetition, estimator, model.n(), data.len(), &e))
}

/// Fixed point against Riemannian conjugate gradient on fresh centers and
/// data for every repetition, with per-iteration error traces. Fit failures
/// are recorded and do not stop the study.
pub fn run_convergence_study(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let model = config.model()?;
    let pr = &config.problem;
    let mut plans = Vec::new();
    for alg in [Algorithm::FixedPoint, Algorithm::RiemannCg] {
        plans.push((alg.short_name(), config.fit_options_for(alg)?));
    }
    let per_rep = (0..config.experiment.repetitions)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream_rng(config.experiment.seed, rep as u64);
            let truth = random_center(pr.p, pr.condition_number, &mut rng)?;
            let data = sample(&model, &truth, pr.k, &mut rng)?;
            Ok(plans
                .iter()
                .map(|(name, opts)| traced_fit(&model, &truth, &data, opts, rep, name, true))
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_rep.into_iter().flatten().collect())
}

/// Wishart closed form against the configured model's MLE for every `K` in
/// `k_grid`. Data are drawn from the configured model; errors use its
/// Fisher metric.
pub fn run_error_study(config: &ExperimentConfig, k_grid: &[usize]) -> Result<Vec<RunRecord>> {
    config.validate()?;
    if k_grid.is_empty() || k_grid[0] == 0 || k_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter("K grid must be non-empty, positive and increasing".into()));
    }
    let model = config.model()?;
    let coeff = model.coefficients();
    let opts = config.fit_options()?;
    let pr = &config.problem;
    let mle_name = match pr.generator {
        GeneratorKind::Wishart => "wishart_mle_iterative",
        GeneratorKind::TWishart => "t_wishart_mle",
    };
    let jobs: Vec<(usize, usize, usize)> = k_grid
        .iter()
        .enumerate()
        .flat_map(|(ki, &k)| (0..config.experiment.repetitions).map(move |rep| (ki, k, rep)))
        .collect();
    let per_job = jobs
        .into_par_iter()
        .map(|(ki, k, rep)| {
            let stream = ((ki as u64) << 32) | rep as u64;
            let mut rng = stream_rng(config.experiment.seed, stream);
            let truth = random_center(pr.p, pr.condition_number, &mut rng)?;
            let data = sample(&model, &truth, k, &mut rng)?;

            let started = Instant::now();
            let closed = wishart_closed_form(&data, pr.n)
                .and_then(|g| fisher_distance_sq(&coeff, &g, &truth))
                .map(|error| RunRecord {
                    repetition: rep,
                    estimator: "wishart_mle".into(),
                    n: pr.n,
                    k,
                    error,
                    iterations: 0,
                    seconds: started.elapsed().as_secs_f64(),
                    converged: true,
                    failure: None,
                    trace: Vec::new(),
                })
                .unwrap_or_else(|e| RunRecord::failed(rep, "wishart_mle", pr.n, k, &e));
            let iterative = traced_fit(&model, &truth, &data, &opts, rep, mle_name, false);
            Ok([closed, iterative])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_job.into_iter().flatten().collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimatorSummary {
    pub name: String,
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub mean_err: f64,
    /// Sample standard deviation of the error over repetitions.
    pub std_err: f64,
    pub mean_iters: f64,
    pub mean_seconds: f64,
    pub runs: usize,
    pub failures: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct CrbValue {
    #[serde(rename = "K")]
    pub k: usize,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CrbReference {
    pub formula: &'static str,
    pub first_order_reference: bool,
    pub values: Vec<CrbValue>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub estimators: Vec<EstimatorSummary>,
    pub crb_reference: CrbReference,
}

pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    (mean, var.sqrt())
}

/// Aggregates records per (estimator, n, K) in order of first appearance;
/// failed runs are counted but excluded from the statistics.
pub fn summarize(config: &ExperimentConfig, records: &[RunRecord]) -> Summary {
    let mut keys: Vec<(String, usize, usize)> = Vec::new();
    for r in records {
        let key = (r.estimator.clone(), r.n, r.k);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let estimators = keys
        .into_iter()
        .map(|(name, n, k)| {
            let group: Vec<&RunRecord> = records
                .iter()
                .filter(|r| r.estimator == name && r.n == n && r.k == k)
                .collect();
            let ok: Vec<&RunRecord> = group.iter().copied().filter(|r| r.failure.is_none()).collect();
            let errors: Vec<f64> = ok.iter().map(|r| r.error).collect();
            let (mean_err, std_err) = mean_and_std(&errors);
            let denom = ok.len().max(1) as f64;
            EstimatorSummary {
                mean_iters: ok.iter().map(|r| r.iterations as f64).sum::<f64>() / denom,
                mean_seconds: ok.iter().map(|r| r.seconds).sum::<f64>() / denom,
                runs: group.len(),
                failures: group.len() - ok.len(),
                name,
                n,
                k,
                mean_err,
                std_err,
            }
        })
        .collect::<Vec<_>>();
    let mut ks: Vec<usize> = estimators.iter().map(|e| e.k).collect();
    ks.sort_unstable();
    ks.dedup();
    Summary {
        config: config.clone(),
        estimators,
        crb_reference: CrbReference {
            formula: "p(p+1)/(2K)",
            first_order_reference: true,
            values: ks
                .into_iter()
                .map(|k| CrbValue {
                    k,
                    value: crb_reference(config.problem.p, k),
                })
                .collect(),
        },
    }
}
