//! Offline 2AFC analysis of trial archives.
//!
//! Per-distance proportion correct over the real (non-training) trials and a
//! maximum-likelihood psychometric fit
//! `p(d) = 0.5 + 0.5 / (1 + exp(-slope * (d - threshold)))`
//! with the guess rate fixed at 0.5 and no lapse, so `threshold` is the
//! separation at 75 % correct. The logistic form is a modelling choice and
//! can be swapped for another sigmoid without touching the data layer.

use std::collections::BTreeMap;
use std::path::Path;

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::persistence::{read_archive, read_manifest, PersistError, MANIFEST};
use crate::scheduler::TrialLabel;
use crate::session::TrialRecord;

pub const GUESS_RATE: f64 = 0.5;
/// Criterion performance the threshold is reported at.
pub const CRITERION: f64 = 0.75;
/// Minimum number of distances with data before a fit is attempted.
pub const MIN_DISTANCES: usize = 3;
/// Deviance the logistic must gain over the best flat model (chi-square,
/// one degree of freedom, 0.999 quantile).
pub const DEGENERATE_DEVIANCE: f64 = 10.828;
/// Nelder-Mead stops once the simplex costs agree to this.
pub const NLL_TOLERANCE: f64 = 1e-9;
/// Upper bound on the slope in units of 1 / max distance. Keeps step-like
/// data from running off to infinity.
const MAX_NORMALIZED_SLOPE: f64 = 1e4;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("need at least {MIN_DISTANCES} distances with data, have {0}")]
    InsufficientData(usize),
    #[error("fit degenerate: {0}")]
    Degenerate(String),
    #[error("optimizer failed: {0}")]
    Optimizer(String),
    #[error(transparent)]
    Persist(#[from] PersistError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceSummary {
    /// Meters.
    pub distance: f64,
    pub n: u32,
    pub correct: u32,
    pub proportion: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsychometricFit {
    /// Meters, at 75 % correct.
    pub threshold: f64,
    /// Per meter.
    pub slope: f64,
    pub neg_log_likelihood: f64,
    /// Deviance gained over the best constant-probability model.
    pub deviance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsychometricSummary {
    pub per_distance: Vec<DistanceSummary>,
    pub guess_rate: f64,
    pub fit: Option<PsychometricFit>,
    /// Why `fit` is absent.
    pub fit_error: Option<String>,
    pub warnings: Vec<String>,
}

/// Proportion correct per distance over real trials, sorted by distance.
/// Configured distances without any trial are left out with a warning;
/// records at an unconfigured distance are still counted.
pub fn proportion_correct(records: &[TrialRecord], distances: &[f64]) -> (Vec<DistanceSummary>, Vec<String>) {
    let mut counts: BTreeMap<u64, (u32, u32)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.label == TrialLabel::Trial) {
        let c = counts.entry(r.distance.to_bits()).or_default();
        c.0 += 1;
        c.1 += r.correct as u32;
    }
    let mut warnings = Vec::new();
    for d in distances {
        if !counts.contains_key(&d.to_bits()) {
            warnings.push(format!("no trials at {:.1} mm", d * 1000.0));
        }
    }
    let mut summary: Vec<DistanceSummary> = counts
        .into_iter()
        .map(|(bits, (n, correct))| DistanceSummary {
            distance: f64::from_bits(bits),
            n,
            correct,
            proportion: correct as f64 / n as f64,
        })
        .collect();
    summary.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    (summary, warnings)
}

pub fn logistic_p(distance: f64, threshold: f64, slope: f64) -> f64 {
    GUESS_RATE + (1.0 - GUESS_RATE) / (1.0 + (-slope * (distance - threshold)).exp())
}

fn binomial_nll(k: f64, n: f64, p: f64) -> f64 {
    let p = p.clamp(1e-15, 1.0 - 1e-15);
    -(k * p.ln() + (n - k) * (1.0 - p).ln())
}

struct Nll<'a> {
    // (normalized distance, n, correct)
    data: &'a [(f64, f64, f64)],
}

impl Nll<'_> {
    // params: [threshold', ln slope']
    fn eval(&self, params: &[f64]) -> f64 {
        let (t, s) = (params[0], params[1].exp().min(MAX_NORMALIZED_SLOPE));
        self.data
            .iter()
            .map(|&(x, n, k)| binomial_nll(k, n, logistic_p(x, t, s)))
            .sum()
    }
}

impl CostFunction for Nll<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> Result<f64, argmin::core::Error> {
        Ok(self.eval(p))
    }
}

/// Maximum-likelihood logistic fit. Distances are rescaled by the largest
/// one before fitting so the result scales with the input.
pub fn fit_psychometric(summary: &[DistanceSummary]) -> Result<PsychometricFit, AnalysisError> {
    let used: Vec<&DistanceSummary> = summary.iter().filter(|s| s.n > 0).collect();
    if used.len() < MIN_DISTANCES {
        return Err(AnalysisError::InsufficientData(used.len()));
    }
    let scale = used.iter().map(|s| s.distance.abs()).fold(0.0, f64::max);
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(AnalysisError::Degenerate("distances are all zero".into()));
    }
    let data: Vec<(f64, f64, f64)> = used
        .iter()
        .map(|s| (s.distance / scale, s.n as f64, s.correct as f64))
        .collect();
    let nll = Nll { data: &data };

    let mut best = (f64::INFINITY, vec![0.5, 0.0]);
    for i in 0..=60 {
        let t = -0.5 + 2.5 * i as f64 / 60.0;
        for j in 0..=40 {
            let ln_s = MAX_NORMALIZED_SLOPE.ln() * j as f64 / 40.0;
            let v = nll.eval(&[t, ln_s]);
            if v < best.0 {
                best = (v, vec![t, ln_s]);
            }
        }
    }
    let start = best.1;
    let simplex = vec![
        start.clone(),
        vec![start[0] + 0.05, start[1]],
        vec![start[0], start[1] + 0.5],
    ];
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(NLL_TOLERANCE)
        .map_err(|e| AnalysisError::Optimizer(e.to_string()))?;
    let res = Executor::new(nll, solver)
        .configure(|state| state.max_iters(5000))
        .run()
        .map_err(|e| AnalysisError::Optimizer(e.to_string()))?;
    let state = res.state();
    let param = state.best_param.clone().unwrap_or(start);
    let nll = Nll { data: &data };
    let value = nll.eval(&param);

    let (n_total, k_total) = data.iter().fold((0.0, 0.0), |a, &(_, n, k)| (a.0 + n, a.1 + k));
    let flat_p = (k_total / n_total).max(GUESS_RATE);
    let flat: f64 = data.iter().map(|&(_, n, k)| binomial_nll(k, n, flat_p)).sum();
    let deviance = 2.0 * (flat - value);
    if deviance < DEGENERATE_DEVIANCE {
        return Err(AnalysisError::Degenerate(format!(
            "logistic gains deviance {deviance:.2} over a flat {flat_p:.3}, need {DEGENERATE_DEVIANCE}"
        )));
    }
    let threshold = param[0] * scale;
    let slope = param[1].exp().min(MAX_NORMALIZED_SLOPE) / scale;
    if !threshold.is_finite() || threshold <= 0.0 || threshold > 2.0 * scale {
        return Err(AnalysisError::Degenerate(format!(
            "threshold {threshold} m lies outside the tested range"
        )));
    }
    Ok(PsychometricFit {
        threshold,
        slope,
        neg_log_likelihood: value,
        deviance,
    })
}

/// Per-distance proportions plus a fit, where one is possible.
pub fn summarize(records: &[TrialRecord], distances: &[f64]) -> PsychometricSummary {
    let (per_distance, warnings) = proportion_correct(records, distances);
    let (fit, fit_error) = match fit_psychometric(&per_distance) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    PsychometricSummary {
        per_distance,
        guess_rate: GUESS_RATE,
        fit,
        fit_error,
        warnings,
    }
}

/// Analyzes a written session directory.
pub fn analyze_archive(dir: &Path) -> Result<PsychometricSummary, AnalysisError> {
    let archive = read_archive(dir)?;
    let manifest = read_manifest(&dir.join(MANIFEST))?;
    Ok(summarize(&archive.trials, &manifest.config.distances()))
}

/// Plain-text table: distance (mm), n, proportion, then the fit.
pub fn render_table(summary: &PsychometricSummary) -> String {
    let mut out = String::from("distance_mm      n  correct  proportion\n");
    for s in &summary.per_distance {
        out.push_str(&format!(
            "{:>11.3} {:>6} {:>8} {:>11.3}\n",
            s.distance * 1000.0,
            s.n,
            s.correct,
            s.proportion
        ));
    }
    out.push_str(&format!("guess_rate {}\n", summary.guess_rate));
    match (&summary.fit, &summary.fit_error) {
        (Some(f), _) => out.push_str(&format!(
            "threshold_mm {:.4}\nslope_per_mm {:.4}\ndeviance {:.2}\n",
            f.threshold * 1000.0,
            f.slope / 1000.0,
            f.deviance
        )),
        (None, Some(e)) => out.push_str(&format!("fit: {e}\n")),
        (None, None) => {}
    }
    for w in &summary.warnings {
        out.push_str(&format!("warning: {w}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(points: &[(f64, u32, u32)]) -> Vec<DistanceSummary> {
        points
            .iter()
            .map(|&(distance, n, correct)| DistanceSummary {
                distance,
                n,
                correct,
                proportion: correct as f64 / n as f64,
            })
            .collect()
    }

    #[test]
    fn logistic_is_at_criterion_on_threshold() {
        assert_eq!(logistic_p(0.001, 0.001, 50.0), CRITERION);
    }

    #[test]
    fn too_few_distances() {
        let s = summary(&[(0.001, 10, 5), (0.002, 10, 10)]);
        assert!(matches!(fit_psychometric(&s), Err(AnalysisError::InsufficientData(2))));
    }

    #[test]
    fn flat_half_is_degenerate() {
        let s = summary(&[(0.001, 10, 5), (0.002, 10, 5), (0.003, 10, 5), (0.004, 10, 5)]);
        assert!(matches!(fit_psychometric(&s), Err(AnalysisError::Degenerate(_))));
    }

    #[test]
    fn flat_perfect_is_degenerate() {
        let s = summary(&[(0.001, 10, 10), (0.002, 10, 10), (0.003, 10, 10)]);
        assert!(matches!(fit_psychometric(&s), Err(AnalysisError::Degenerate(_))));
    }

    #[test]
    fn exact_expected_counts_recover_threshold() {
        // Expected counts under a known curve; the MLE is that curve.
        let (t, s) = (0.0011, 4000.0);
        let pts: Vec<_> = [0.0001, 0.0003, 0.0006, 0.001, 0.0013, 0.0016, 0.002]
            .iter()
            .map(|&d| {
                let n = 1_000_000u32;
                (d, n, (logistic_p(d, t, s) * n as f64).round() as u32)
            })
            .collect();
        let fit = fit_psychometric(&summary(&pts)).unwrap();
        assert!((fit.threshold - t).abs() / t < 1e-3, "{fit:?}");
        assert!((fit.slope - s).abs() / s < 1e-2, "{fit:?}");
    }
}
