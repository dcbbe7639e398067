//! Grid-based diagnostics for the conditions on `u`, `psi` and `h` under
//! which the MLE exists, is unique, and the negative log-likelihood is
//! geodesically convex.

use serde::Serialize;

use super::generator::DensityGenerator;
use crate::error::{Error, Result};

/// Outcome of one diagnostic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Not decidable from the available information.
    Inconclusive,
}

impl Verdict {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AssumptionReport {
    pub generator: String,
    pub np: f64,
    /// `u >= 0` on the grid and `u > 0` for `t > 0`.
    pub u_nonnegative: Verdict,
    pub u_nonincreasing: Verdict,
    pub psi_nondecreasing: Verdict,
    /// `sup psi > np`; inconclusive without an analytic supremum.
    pub psi_sup_exceeds_np: Verdict,
    pub psi_sup: Option<f64>,
    /// `psi` strictly increasing wherever it is below its supremum.
    pub psi_strictly_increasing: Verdict,
    /// `t -> -log h(t)` non-decreasing.
    pub neg_log_h_nondecreasing: Verdict,
    /// `s -> -log h(e^s)` convex, from slopes between grid points.
    pub neg_log_h_exp_convex: Verdict,
}

impl AssumptionReport {
    fn verdicts(&self) -> [(&'static str, Verdict); 7] {
        [
            ("u_nonnegative", self.u_nonnegative),
            ("u_nonincreasing", self.u_nonincreasing),
            ("psi_nondecreasing", self.psi_nondecreasing),
            ("psi_sup_exceeds_np", self.psi_sup_exceeds_np),
            ("psi_strictly_increasing", self.psi_strictly_increasing),
            ("neg_log_h_nondecreasing", self.neg_log_h_nondecreasing),
            ("neg_log_h_exp_convex", self.neg_log_h_exp_convex),
        ]
    }

    /// Names of the checks that failed outright.
    pub fn failures(&self) -> Vec<&'static str> {
        self.verdicts()
            .into_iter()
            .filter(|(_, v)| *v == Verdict::Fail)
            .map(|(n, _)| n)
            .collect()
    }

    /// Names of the checks that could not be decided.
    pub fn inconclusive(&self) -> Vec<&'static str> {
        self.verdicts()
            .into_iter()
            .filter(|(_, v)| *v == Verdict::Inconclusive)
            .map(|(n, _)| n)
            .collect()
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts().iter().all(|(_, v)| *v == Verdict::Pass)
    }
}

// Slack for comparisons between neighbouring grid values.
fn slack(a: f64, b: f64) -> f64 {
    1e-12 * (a.abs() + b.abs()) + 1e-300
}

/// Evaluates the generator on `grid` (strictly increasing, non-negative).
pub fn check_assumptions(
    generator: &dyn DensityGenerator,
    n: usize,
    p: usize,
    grid: &[f64],
) -> Result<AssumptionReport> {
    if grid.is_empty() {
        return Err(Error::Parameter("diagnostic grid is empty".into()));
    }
    if grid.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
        return Err(Error::Parameter("grid values must be finite and non-negative".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter("grid must be strictly increasing".into()));
    }
    let np = (n * p) as f64;
    let u: Vec<f64> = grid.iter().map(|&t| generator.u(t, np)).collect();
    let psi: Vec<f64> = grid.iter().map(|&t| generator.psi(t, np)).collect();
    let nlh: Vec<f64> = grid.iter().map(|&t| -generator.log_h(t, np)).collect();

    let u_nonnegative = grid
        .iter()
        .zip(&u)
        .all(|(&t, &v)| v >= 0.0 && (t == 0.0 || v > 0.0));
    let u_nonincreasing = u.windows(2).all(|w| w[1] <= w[0] + slack(w[0], w[1]));
    let psi_nondecreasing = psi.windows(2).all(|w| w[1] >= w[0] - slack(w[0], w[1]));

    let psi_sup = generator.psi_sup(np);
    let psi_sup_exceeds_np = match psi_sup {
        Some(s) => Verdict::from_bool(s > np),
        None => Verdict::Inconclusive,
    };
    let bound = psi_sup.unwrap_or(f64::INFINITY);
    let psi_strictly_increasing = psi
        .windows(2)
        .all(|w| w[0] >= bound - slack(w[0], bound) || w[1] > w[0]);

    let neg_log_h_nondecreasing = nlh.windows(2).all(|w| w[1] >= w[0] - slack(w[0], w[1]));

    // Convexity in s = log t: slopes between consecutive points must not decrease.
    let pts: Vec<(f64, f64)> = grid
        .iter()
        .zip(&nlh)
        .filter(|(&t, _)| t > 0.0)
        .map(|(&t, &v)| (t.ln(), v))
        .collect();
    let slopes: Vec<f64> = pts
        .windows(2)
        .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
        .collect();
    let convex = slopes
        .windows(2)
        .all(|w| w[1] >= w[0] - 1e-9 * (w[0].abs() + w[1].abs()) - 1e-12);
    let neg_log_h_exp_convex = if pts.len() < 3 {
        Verdict::Inconclusive
    } else {
        Verdict::from_bool(convex)
    };

    Ok(AssumptionReport {
        generator: generator.name(),
        np,
        u_nonnegative: Verdict::from_bool(u_nonnegative),
        u_nonincreasing: Verdict::from_bool(u_nonincreasing),
        psi_nondecreasing: Verdict::from_bool(psi_nondecreasing),
        psi_sup_exceeds_np,
        psi_sup,
        psi_strictly_increasing: Verdict::from_bool(psi_strictly_increasing),
        neg_log_h_nondecreasing: Verdict::from_bool(neg_log_h_nondecreasing),
        neg_log_h_exp_convex,
    })
}

/// Log-spaced grid on `[lo, hi]` with a leading zero, suitable for
/// [`check_assumptions`].
pub fn default_grid(np: f64) -> Vec<f64> {
    let (lo, hi) = (1e-6_f64, 1e4 * np.max(1.0));
    let count = 400;
    let mut grid = vec![0.0];
    let ratio = (hi / lo).ln() / (count - 1) as f64;
    grid.extend((0..count).map(|i| lo * (ratio * i as f64).exp()));
    grid
}
