//! K-means-style clustering with elliptical Wishart discriminants.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;

use super::{argmax, discriminant_value};
use crate::error::{Error, Result};
use crate::estimation::{fit, Algorithm, FitOptions, Init};
use crate::linalg::SpdMat;
use crate::model::{EWModel, SampleSet};

#[derive(Clone, Debug)]
pub struct KMeansOptions {
    /// Number of random initializations `M`.
    pub inits: usize,
    /// Stop when the fraction of samples changing label falls below this.
    pub tolerance: f64,
    pub max_sweeps: usize,
    /// Options for the per-cluster MLEs; the initial point is overridden by
    /// the previous center.
    pub fit: FitOptions,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            inits: 5,
            tolerance: 1e-3,
            max_sweeps: 100,
            fit: FitOptions::new(Algorithm::RiemannCg),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ClusteringResult {
    /// Labels in `1..=Z`.
    pub labels: Vec<usize>,
    pub centers: Vec<SpdMat>,
    /// Inertia of the returned clustering (uniform priors).
    pub inertia: f64,
    /// 1-based index of the winning initialization.
    pub chosen_init: usize,
    /// Sweeps performed by each initialization.
    pub iterations_per_init: Vec<usize>,
}

struct Run {
    labels: Vec<usize>,
    centers: Vec<SpdMat>,
    inertia: f64,
    sweeps: usize,
}

fn own_scores(model: &EWModel, data: &SampleSet, centers: &[SpdMat], labels: &[usize], log_prior: f64) -> Vec<f64> {
    data.iter()
        .zip(labels)
        .map(|(s, &y)| discriminant_value(model, log_prior, &centers[y - 1], s))
        .collect()
}

fn assign(model: &EWModel, data: &SampleSet, centers: &[SpdMat], log_prior: f64) -> Vec<usize> {
    data.iter()
        .map(|s| {
            let scores: Vec<f64> = centers
                .iter()
                .map(|c| discriminant_value(model, log_prior, c, s))
                .collect();
            argmax(&scores)
        })
        .collect()
}

/// Moves into each empty cluster the worst-fitting sample among clusters
/// that can spare one.
fn reseed_empty(model: &EWModel, data: &SampleSet, centers: &mut [SpdMat], labels: &mut [usize], log_prior: f64) {
    let z = centers.len();
    let mut counts = vec![0usize; z];
    for &y in labels.iter() {
        counts[y - 1] += 1;
    }
    for empty in 0..z {
        if counts[empty] > 0 {
            continue;
        }
        let scores = own_scores(model, data, centers, labels, log_prior);
        let donor = (0..labels.len())
            .filter(|&k| counts[labels[k] - 1] > 1)
            .min_by(|&a, &b| scores[a].total_cmp(&scores[b]));
        if let Some(k) = donor {
            counts[labels[k] - 1] -= 1;
            counts[empty] += 1;
            labels[k] = empty + 1;
            centers[empty] = data.samples()[k].clone();
        }
    }
}

fn run_once(model: &EWModel, data: &SampleSet, seeds: &[usize], opts: &KMeansOptions) -> Result<Run> {
    let z = seeds.len();
    let log_prior = -(z as f64).ln();
    let mut centers: Vec<SpdMat> = seeds.iter().map(|&k| data.samples()[k].clone()).collect();
    let mut labels = assign(model, data, &centers, log_prior);
    let mut sweeps = 0;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        reseed_empty(model, data, &mut centers, &mut labels, log_prior);
        centers = (1..=z)
            .into_par_iter()
            .map(|c| {
                let members: Vec<usize> = (0..labels.len()).filter(|&k| labels[k] == c).collect();
                if members.is_empty() {
                    return Ok(centers[c - 1].clone());
                }
                let subset = data.select(&members)?;
                let mut fit_opts = opts.fit.clone();
                fit_opts.init = Init::User(centers[c - 1].clone());
                Ok(fit(model, &subset, &fit_opts)?.estimate)
            })
            .collect::<Result<Vec<_>>>()?;
        let next = assign(model, data, &centers, log_prior);
        let changed = next.iter().zip(&labels).filter(|(a, b)| a != b).count();
        labels = next;
        let fraction = changed as f64 / labels.len() as f64;
        if changed == 0 || fraction < opts.tolerance {
            break;
        }
    }
    let inertia = own_scores(model, data, &centers, &labels, log_prior).iter().sum();
    Ok(Run {
        labels,
        centers,
        inertia,
        sweeps,
    })
}

/// Clusters `data` into `z` groups, keeping the initialization with the
/// largest inertia. Initial centers for all `M` runs are drawn from `rng`
/// before any run starts, so the result depends only on the rng state.
pub fn ew_kmeans<R: Rng + ?Sized>(
    model: &EWModel,
    data: &SampleSet,
    z: usize,
    opts: &KMeansOptions,
    rng: &mut R,
) -> Result<ClusteringResult> {
    if z == 0 || z > data.len() {
        return Err(Error::Parameter(format!(
            "cannot form {z} clusters from {} samples",
            data.len()
        )));
    }
    if opts.inits == 0 || opts.max_sweeps == 0 {
        return Err(Error::Parameter("inits and max_sweeps must be at least 1".into()));
    }
    if !(opts.tolerance >= 0.0) {
        return Err(Error::Parameter("label-change tolerance must be non-negative".into()));
    }
    if data.dim() != model.p() {
        return Err(Error::Dimension {
            expected: model.p(),
            got: data.dim(),
        });
    }
    let seeds: Vec<Vec<usize>> = (0..opts.inits)
        .map(|_| index::sample(rng, data.len(), z).into_vec())
        .collect();
    let runs = seeds
        .par_iter()
        .map(|s| run_once(model, data, s, opts))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (m, run) in runs.iter().enumerate().skip(1) {
        if run.inertia > runs[best].inertia {
            best = m;
        }
    }
    let iterations_per_init = runs.iter().map(|r| r.sweeps).collect();
    let run = runs.into_iter().nth(best).expect("at least one init");
    Ok(ClusteringResult {
        labels: run.labels,
        centers: run.centers,
        inertia: run.inertia,
        chosen_init: best + 1,
        iterations_per_init,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{fit, FitOptions};
    use crate::geometry::fisher_distance;
    use crate::model::sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_cluster_is_global_mle() {
        let m = EWModel::t_wishart(8, 3, 5.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data = sample(&m, &SpdMat::identity(3), 25, &mut rng).unwrap();
        let r = ew_kmeans(&m, &data, 1, &KMeansOptions::default(), &mut rng).unwrap();
        assert!(r.labels.iter().all(|&y| y == 1));
        let mle = fit(&m, &data, &FitOptions::default()).unwrap().estimate;
        assert!(fisher_distance(&m.coefficients(), &mle, &r.centers[0]).unwrap() < 1e-6);
    }

    #[test]
    fn too_many_clusters() {
        let m = EWModel::wishart(4, 2).unwrap();
        let data = SampleSet::new(vec![SpdMat::identity(2)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(ew_kmeans(&m, &data, 2, &KMeansOptions::default(), &mut rng).is_err());
    }

    #[test]
    fn reseeding_fills_empty_cluster() {
        let m = EWModel::wishart(4, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data = sample(&m, &SpdMat::identity(2), 6, &mut rng).unwrap();
        let mut centers = vec![SpdMat::identity(2), SpdMat::identity(2)];
        let mut labels = vec![1; 6];
        reseed_empty(&m, &data, &mut centers, &mut labels, 0.0);
        assert_eq!(labels.iter().filter(|&&y| y == 2).count(), 1);
        let k = labels.iter().position(|&y| y == 2).unwrap();
        assert_eq!(centers[1], data.samples()[k]);
    }
}
