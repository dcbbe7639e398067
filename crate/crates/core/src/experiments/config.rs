//! Experiment configuration: a TOML file with `[problem]`, `[experiment]`,
//! `[fit]` and `[clustering]` tables, every key optional.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{Algorithm, CgRule, FitOptions, Init, Retraction};
use crate::learning::KMeansOptions;
use crate::model::EWModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GeneratorKind {
    #[serde(rename = "wishart")]
    Wishart,
    #[serde(rename = "t-wishart")]
    TWishart,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub p: usize,
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub nu: f64,
    pub generator: GeneratorKind,
    pub condition_number: f64,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            p: 10,
            n: 100,
            k: 300,
            nu: 10.0,
            generator: GeneratorKind::TWishart,
            condition_number: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub repetitions: usize,
    pub seed: u64,
    /// Sample counts for the error study.
    #[serde(rename = "K_grid")]
    pub k_grid: Vec<usize>,
    /// Degrees of freedom for the convergence study; empty means `problem.n`.
    pub n_grid: Vec<usize>,
    pub output: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            repetitions: 200,
            seed: 0,
            k_grid: vec![10, 30, 100, 300, 1000],
            n_grid: Vec::new(),
            output: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Identity,
    WishartMle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// `fp`, `rsd` or `rcg`.
    pub algorithm: String,
    pub tolerance: f64,
    /// Defaults to the algorithm's own cap when absent.
    pub max_iterations: Option<usize>,
    pub init: InitKind,
    /// `pr+` or `fr`.
    pub cg_rule: String,
    /// `second_order` or `exponential`.
    pub retraction: String,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            algorithm: "rcg".into(),
            tolerance: 1e-8,
            max_iterations: None,
            init: InitKind::WishartMle,
            cg_rule: "pr+".into(),
            retraction: "second_order".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    pub clusters: usize,
    pub inits: usize,
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self {
            clusters: 2,
            inits: 5,
            tolerance: 1e-3,
            max_sweeps: 100,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub experiment: RunConfig,
    pub fit: FitConfig,
    pub clustering: ClusteringConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io_at(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn validate(&self) -> Result<()> {
        let pr = &self.problem;
        let bad = |m: String| Err(Error::Parameter(m));
        if pr.p == 0 || pr.n <= pr.p {
            return bad(format!("need n > p >= 1, got n={}, p={}", pr.n, pr.p));
        }
        if pr.k == 0 {
            return bad("K must be at least 1".into());
        }
        if !(pr.nu > 0.0 && pr.nu.is_finite()) {
            return bad(format!("nu must be positive, got {}", pr.nu));
        }
        if !(pr.condition_number >= 1.0 && pr.condition_number.is_finite()) {
            return bad(format!("condition_number must be >= 1, got {}", pr.condition_number));
        }
        if self.experiment.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        let grid = &self.experiment.k_grid;
        if grid.is_empty() || grid[0] == 0 || grid.windows(2).any(|w| w[1] <= w[0]) {
            return bad("K_grid must be non-empty, positive and strictly increasing".into());
        }
        if let Some(&n) = self.experiment.n_grid.iter().find(|&&n| n <= pr.p) {
            return bad(format!("n_grid entry {n} must exceed p={}", pr.p));
        }
        let c = &self.clustering;
        if c.clusters == 0 || c.inits == 0 || c.max_sweeps == 0 || !(c.tolerance >= 0.0) {
            return bad("invalid clustering settings".into());
        }
        self.fit_options()?.validate()
    }

    pub fn algorithm(&self) -> Result<Algorithm> {
        Algorithm::from_short_name(&self.fit.algorithm)
            .ok_or_else(|| Error::Parameter(format!("unknown algorithm '{}'", self.fit.algorithm)))
    }

    /// Fit options for the configured algorithm.
    pub fn fit_options(&self) -> Result<FitOptions> {
        self.fit_options_for(self.algorithm()?)
    }

    /// Fit options with the algorithm overridden.
    pub fn fit_options_for(&self, algorithm: Algorithm) -> Result<FitOptions> {
        let f = &self.fit;
        let mut opts = FitOptions::new(algorithm).with_tolerance(f.tolerance);
        if let Some(m) = f.max_iterations {
            opts.max_iterations = m;
        }
        opts.init = match f.init {
            InitKind::Identity => Init::Identity,
            InitKind::WishartMle => Init::WishartMle,
        };
        opts.cg_rule = match f.cg_rule.as_str() {
            "pr+" | "polak_ribiere_plus" => CgRule::PolakRibierePlus,
            "fr" | "fletcher_reeves" => CgRule::FletcherReeves,
            other => return Err(Error::Parameter(format!("unknown cg_rule '{other}'"))),
        };
        opts.retraction = match f.retraction.as_str() {
            "second_order" => Retraction::SecondOrder,
            "exponential" => Retraction::Exponential,
            other => return Err(Error::Parameter(format!("unknown retraction '{other}'"))),
        };
        Ok(opts)
    }

    pub fn kmeans_options(&self) -> Result<KMeansOptions> {
        let c = &self.clustering;
        Ok(KMeansOptions {
            inits: c.inits,
            tolerance: c.tolerance,
            max_sweeps: c.max_sweeps,
            fit: self.fit_options()?,
        })
    }

    /// The configured model with degrees of freedom `n`.
    pub fn model_with_n(&self, n: usize) -> Result<EWModel> {
        match self.problem.generator {
            GeneratorKind::Wishart => EWModel::wishart(n, self.problem.p),
            GeneratorKind::TWishart => EWModel::t_wishart(n, self.problem.p, self.problem.nu),
        }
    }

    pub fn model(&self) -> Result<EWModel> {
        self.model_with_n(self.problem.n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let cfg = ExperimentConfig::from_toml_str(
            "[problem]\np = 3\nn = 7\nK = 20\n\n[experiment]\nseed = 9\nK_grid = [5, 10]\n\n[fit]\nalgorithm = \"fp\"\n",
        )
        .unwrap();
        assert_eq!(cfg.problem.p, 3);
        assert_eq!(cfg.problem.k, 20);
        assert_eq!(cfg.problem.nu, 10.0);
        assert_eq!(cfg.experiment.k_grid, vec![5, 10]);
        assert_eq!(cfg.algorithm().unwrap(), Algorithm::FixedPoint);
        assert_eq!(cfg.fit_options().unwrap().max_iterations, 10_000);
    }

    #[test]
    fn round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.problem.nu = 3.25;
        cfg.experiment.output = Some("out".into());
        cfg.fit.max_iterations = Some(77);
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_invalid() {
        for text in [
            "[problem]\np = 10\nn = 10\n",
            "[problem]\nnu = 0.0\n",
            "[problem]\ncondition_number = 0.5\n",
            "[experiment]\nrepetitions = 0\n",
            "[experiment]\nK_grid = [10, 5]\n",
            "[fit]\nalgorithm = \"bfgs\"\n",
            "[fit]\ntolerance = -1.0\n",
            "[problem]\nunknown = 1\n",
            "not toml at all [",
        ] {
            assert!(ExperimentConfig::from_toml_str(text).is_err(), "{text}");
        }
    }
}
