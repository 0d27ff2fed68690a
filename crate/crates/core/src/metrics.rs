//! Reductions of per-trial results into cell-level summaries.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::domain::{Arm, EnvSpec};
use crate::engine::ArmCounts;
use crate::error::{Error, Result};
use crate::inference::{wald_statistic, Estimate, EstimatorKind, TestOutcome};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectSummary {
    pub n_sims: usize,
    pub rate: f64,
    pub se: f64,
    pub undefined_count: usize,
}

pub fn proportion_se(rate: f64, n: usize) -> f64 {
    (rate * (1.0 - rate) / n as f64).sqrt()
}

pub fn reject_rate_summary(outcomes: &[TestOutcome]) -> Result<RejectSummary> {
    let first = outcomes
        .first()
        .ok_or_else(|| Error::Domain("cannot summarize an empty outcome list".into()))?;
    if let Some(other) = outcomes.iter().find(|o| o.test_name != first.test_name) {
        return Err(Error::Domain(format!(
            "outcomes mix tests `{}` and `{}`",
            first.test_name, other.test_name
        )));
    }
    let rejections = outcomes.iter().filter(|o| o.reject).count();
    let undefined_count = outcomes.iter().filter(|o| o.undefined).count();
    let rate = rejections as f64 / outcomes.len() as f64;
    Ok(RejectSummary {
        n_sims: outcomes.len(),
        rate,
        se: proportion_se(rate, outcomes.len()),
        undefined_count,
    })
}

/// Lower edges of the histogram bins; the last bin is closed at 1.
pub const HISTOGRAM_EDGES: [f64; 5] = [0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentHistogram {
    pub proportions: [f64; 5],
    pub n: usize,
}

impl AssignmentHistogram {
    pub fn bin_label(i: usize) -> String {
        let lo = HISTOGRAM_EDGES[i];
        if i + 1 == HISTOGRAM_EDGES.len() {
            format!("[{lo:.1},1.0]")
        } else {
            format!("[{lo:.1},{:.1})", HISTOGRAM_EDGES[i + 1])
        }
    }
}

/// Histogram of the larger final assignment probability, `max(pi1, 1 - pi1)`.
pub fn assignment_prob_histogram(final_pi1: &[f64]) -> Result<AssignmentHistogram> {
    if final_pi1.is_empty() {
        return Err(Error::Domain("no assignment probabilities to bin".into()));
    }
    let mut counts = [0usize; 5];
    for &pi1 in final_pi1 {
        let top = pi1.max(1.0 - pi1);
        // 0.5 + 0.1*k is not exact in binary, so compare against the edge constants
        let bin = HISTOGRAM_EDGES
            .iter()
            .rposition(|&edge| top >= edge)
            .unwrap_or(0);
        counts[bin] += 1;
    }
    let n = final_pi1.len();
    Ok(AssignmentHistogram {
        proportions: counts.map(|c| c as f64 / n as f64),
        n,
    })
}

/// Mean, standard error of the mean and count of the finite values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub count: usize,
}

pub fn mean_se(values: &[f64]) -> MeanSe {
    let count = values.len();
    if count == 0 {
        return MeanSe {
            mean: f64::NAN,
            se: f64::NAN,
            count,
        };
    }
    let mean = values.iter().sum::<f64>() / count as f64;
    let se = if count > 1 {
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (count as f64 - 1.0) / count as f64).sqrt()
    } else {
        0.0
    };
    MeanSe { mean, se, count }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len().is_multiple_of(2) {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmDiagnostics {
    pub mean_estimate: f64,
    pub bias: f64,
    pub se_estimate: f64,
    pub undefined_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorDiagnostics {
    pub method: EstimatorKind,
    pub arms: [ArmDiagnostics; 2],
    pub mean_difference: f64,
    pub mean_abs_difference: f64,
    pub mean_wald: f64,
    pub median_wald: f64,
    /// Standard error of the mean Wald statistic across trials.
    pub se_wald: f64,
    pub wald_undefined_count: usize,
}

/// Bias and spread of one estimator across the trials of a cell.
/// `estimates[i]` and `counts[i]` must come from the same trial.
pub fn bias_table(
    estimates: &[Estimate],
    counts: &[ArmCounts],
    env: &EnvSpec,
) -> Result<EstimatorDiagnostics> {
    let first = estimates
        .first()
        .ok_or_else(|| Error::Domain("cannot tabulate an empty estimate list".into()))?;
    if estimates.len() != counts.len() {
        return Err(Error::Domain(
            "estimates and counts differ in length".into(),
        ));
    }
    let arm = |a: Arm| {
        let values: Vec<f64> = estimates.iter().filter_map(|e| e.get(a)).collect();
        let m = mean_se(&values);
        ArmDiagnostics {
            mean_estimate: m.mean,
            bias: m.mean - env.mean(a),
            se_estimate: m.se,
            undefined_count: estimates.len() - values.len(),
        }
    };
    let diffs: Vec<f64> = estimates.iter().filter_map(Estimate::difference).collect();
    let abs_diffs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let walds: Vec<f64> = estimates
        .iter()
        .zip(counts)
        .filter_map(|(e, c)| wald_statistic(e, c))
        .collect();
    let wald = mean_se(&walds);
    Ok(EstimatorDiagnostics {
        method: first.method,
        arms: [arm(Arm::One), arm(Arm::Two)],
        mean_difference: mean_se(&diffs).mean,
        mean_abs_difference: mean_se(&abs_diffs).mean,
        mean_wald: wald.mean,
        median_wald: median(&walds),
        se_wald: wald.se,
        wald_undefined_count: estimates.len() - walds.len(),
    })
}

/// Mean and standard error, across trials, of each trial's mean reward.
pub fn mean_reward_summary(per_trial_mean_reward: &[f64]) -> Result<MeanSe> {
    if per_trial_mean_reward.is_empty() {
        return Err(Error::Domain("no trials to average".into()));
    }
    Ok(mean_se(per_trial_mean_reward))
}

/// Total sample size (two equal arms, rounded up to even) for a two-sided
/// two-proportion z test: `m = ceil((z_{1-alpha/2} + z_power)^2 (p1 q1 + p2 q2) / (p1 - p2)^2)`.
pub fn required_sample_size(p1: f64, p2: f64, alpha: f64, power: f64) -> Result<u64> {
    crate::error::check_probability("p1", p1)?;
    crate::error::check_probability("p2", p2)?;
    if p1 == p2 {
        return Err(Error::Domain(
            "sample size is unbounded when p1 = p2".into(),
        ));
    }
    if !(alpha > 0.0 && alpha < 1.0) || !(power > 0.0 && power < 1.0) {
        return Err(Error::Domain(
            "alpha and power must lie strictly between 0 and 1".into(),
        ));
    }
    let normal = Normal::standard();
    let z = normal.inverse_cdf(1.0 - alpha / 2.0) + normal.inverse_cdf(power);
    let per_arm = (z * z * (p1 * (1.0 - p1) + p2 * (1.0 - p2)) / (p1 - p2).powi(2)).ceil() as u64;
    Ok(2 * per_arm)
}
