//! Discriminant analysis and K-means clustering with elliptical Wishart
//! class models.
//!
//! Class labels are 1-based throughout (`1..=Z`).

mod align;
mod kmeans;

pub use align::{align_labels, Alignment};
pub use kmeans::{ew_kmeans, ClusteringResult, KMeansOptions};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimation::{fit, FitOptions};
use crate::linalg::SpdMat;
use crate::model::{EWModel, SampleSet};

/// Samples with class labels in `1..=classes`.
#[derive(Clone, Debug)]
pub struct LabeledSampleSet {
    samples: SampleSet,
    labels: Vec<usize>,
    classes: usize,
}

impl LabeledSampleSet {
    pub fn new(samples: SampleSet, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if labels.len() != samples.len() {
            return Err(Error::Parameter(format!(
                "{} labels for {} samples",
                labels.len(),
                samples.len()
            )));
        }
        if classes == 0 {
            return Err(Error::Parameter("number of classes must be positive".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y == 0 || y > classes) {
            return Err(Error::Parameter(format!("label {bad} outside 1..={classes}")));
        }
        Ok(Self {
            samples,
            labels,
            classes,
        })
    }

    pub fn samples(&self) -> &SampleSet {
        &self.samples
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Indices of the samples carrying label `z`.
    pub fn members(&self, z: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&k| self.labels[k] == z).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &y in &self.labels {
            counts[y - 1] += 1;
        }
        counts
    }
}

/// Trained classifier: per-class centers and priors sharing one model.
#[derive(Clone, Debug)]
pub struct EwdaModel {
    model: EWModel,
    centers: Vec<SpdMat>,
    priors: Vec<f64>,
}

impl EwdaModel {
    pub fn new(model: EWModel, centers: Vec<SpdMat>, priors: Vec<f64>) -> Result<Self> {
        if centers.is_empty() || centers.len() != priors.len() {
            return Err(Error::Parameter(format!(
                "{} centers and {} priors",
                centers.len(),
                priors.len()
            )));
        }
        if let Some(c) = centers.iter().find(|c| c.dim() != model.p()) {
            return Err(Error::Dimension {
                expected: model.p(),
                got: c.dim(),
            });
        }
        if priors.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::Parameter("priors must be non-negative".into()));
        }
        let total: f64 = priors.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Parameter(format!("priors sum to {total}, not 1")));
        }
        Ok(Self {
            model,
            centers,
            priors,
        })
    }

    pub fn model(&self) -> &EWModel {
        &self.model
    }

    pub fn centers(&self) -> &[SpdMat] {
        &self.centers
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn classes(&self) -> usize {
        self.centers.len()
    }

    /// Same centers, different priors.
    pub fn with_priors(&self, priors: Vec<f64>) -> Result<Self> {
        Self::new(self.model.clone(), self.centers.clone(), priors)
    }
}

fn check_class(z: usize, classes: usize) -> Result<()> {
    if z == 0 || z > classes {
        return Err(Error::Parameter(format!("class {z} outside 1..={classes}")));
    }
    Ok(())
}

fn check_sample(model: &EWModel, s: &SpdMat) -> Result<()> {
    if s.dim() != model.p() {
        return Err(Error::Dimension {
            expected: model.p(),
            got: s.dim(),
        });
    }
    Ok(())
}

/// `log pi - (n/2) log det G + log h(tr(G^-1 S))`.
pub(crate) fn discriminant_value(model: &EWModel, log_prior: f64, center: &SpdMat, s: &SpdMat) -> f64 {
    let t = center.trace_inv_product(s.as_sym());
    log_prior - 0.5 * model.n() as f64 * center.logdet() + model.log_h(t)
}

/// Discriminant of class `z` (1-based) at `s`.
pub fn discriminant(ewda: &EwdaModel, z: usize, s: &SpdMat) -> Result<f64> {
    check_class(z, ewda.classes())?;
    check_sample(&ewda.model, s)?;
    Ok(discriminant_value(
        &ewda.model,
        ewda.priors[z - 1].ln(),
        &ewda.centers[z - 1],
        s,
    ))
}

/// Wishart discriminant `log pi - (n/2) log det G - tr(G^-1 S)/2`.
pub fn wda_discriminant(prior: f64, center: &SpdMat, n: usize, s: &SpdMat) -> f64 {
    let t = center.trace_inv_product(s.as_sym());
    prior.ln() - 0.5 * n as f64 * center.logdet() - 0.5 * t
}

/// t-Wishart discriminant
/// `log pi - (n/2) log det G - ((nu + np)/2) log(1 + tr(G^-1 S)/nu)`.
pub fn t_wda_discriminant(prior: f64, center: &SpdMat, n: usize, nu: f64, s: &SpdMat) -> f64 {
    let t = center.trace_inv_product(s.as_sym());
    let np = (n * center.dim()) as f64;
    prior.ln() - 0.5 * n as f64 * center.logdet() - 0.5 * (nu + np) * (t / nu).ln_1p()
}

/// Per-class MLEs and empirical class frequencies.
pub fn ewda_train(model: &EWModel, data: &LabeledSampleSet, opts: &FitOptions) -> Result<EwdaModel> {
    let counts = data.class_counts();
    if let Some(z) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Training(format!("class {} has no samples", z + 1)));
    }
    let centers = (1..=data.classes())
        .into_par_iter()
        .map(|z| {
            let subset = data.samples().select(&data.members(z))?;
            Ok(fit(model, &subset, opts)?.estimate)
        })
        .collect::<Result<Vec<_>>>()?;
    let total = data.len() as f64;
    let priors = counts.iter().map(|&c| c as f64 / total).collect();
    EwdaModel::new(model.clone(), centers, priors)
}

/// Arg-max class, lowest index on ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best + 1
}

pub fn ewda_predict(ewda: &EwdaModel, s: &SpdMat) -> Result<usize> {
    let scores = (1..=ewda.classes())
        .map(|z| discriminant(ewda, z, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(argmax(&scores))
}

pub fn ewda_predict_all(ewda: &EwdaModel, data: &SampleSet) -> Result<Vec<usize>> {
    data.samples().par_iter().map(|s| ewda_predict(ewda, s)).collect()
}

/// Sum of each sample's own-class discriminant.
pub fn inertia(
    model: &EWModel,
    labeled: &LabeledSampleSet,
    centers: &[SpdMat],
    priors: &[f64],
) -> Result<f64> {
    if centers.len() != labeled.classes() || priors.len() != labeled.classes() {
        return Err(Error::Parameter(format!(
            "{} classes but {} centers and {} priors",
            labeled.classes(),
            centers.len(),
            priors.len()
        )));
    }
    check_sample(model, &labeled.samples().samples()[0])?;
    for c in centers {
        check_sample(model, c)?;
    }
    Ok(labeled
        .samples()
        .iter()
        .zip(labeled.labels())
        .map(|(s, &y)| discriminant_value(model, priors[y - 1].ln(), &centers[y - 1], s))
        .sum())
}
