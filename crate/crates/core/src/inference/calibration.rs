//! Simulation-calibrated critical values for the Wald test.
//!
//! The Wald statistic's null distribution under adaptive allocation is
//! simulated directly, and the rejection bounds are read off its empirical
//! `alpha/2` and `1 - alpha/2` quantiles.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::estimate::mle_estimate;
use super::hypothesis::{wald_statistic, Bounds};
use crate::domain::EnvSpec;
use crate::engine::run_trial_with;
use crate::error::{Error, Result};
use crate::policy::PolicySpec;
use crate::rng::derive_stream;

/// Stream cell id reserved for calibration runs, so calibration never reuses
/// the streams of an evaluation cell with the same base seed.
pub const CALIBRATION_CELL: u64 = 0xCA1B_0000;

/// Calibration record. Serializes to the calibration JSON schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalValues {
    pub null_p: f64,
    pub n: usize,
    pub policy: PolicySpec,
    pub n_sims: usize,
    pub alpha: f64,
    pub lower: f64,
    pub upper: f64,
    pub undefined_excluded: usize,
    pub base_seed: u64,
}

impl CriticalValues {
    pub fn bounds(&self) -> Bounds {
        Bounds {
            lower: self.lower,
            upper: self.upper,
        }
    }
}

/// Value at rank `ceil(q * N)` (1-based, clamped to `[1, N]`) of sorted data.
pub fn nearest_rank_quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

pub fn calibrate_critical_values(
    null_env: &EnvSpec,
    spec: &PolicySpec,
    n_sims: usize,
    alpha: f64,
    base_seed: u64,
) -> Result<CriticalValues> {
    null_env.validate()?;
    spec.validate()?;
    if !null_env.is_null() {
        return Err(Error::Domain(format!(
            "calibration needs equal arm means, got p1 = {} and p2 = {}",
            null_env.p1, null_env.p2
        )));
    }
    if n_sims < 1000 {
        return Err(Error::Domain(format!(
            "calibration needs at least 1000 simulations, got {n_sims}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!(
            "alpha must lie strictly between 0 and 1, got {alpha}"
        )));
    }

    let statistics: Vec<Option<f64>> = (0..n_sims as u64)
        .into_par_iter()
        .map(|sim| {
            let mut stream = derive_stream(base_seed, CALIBRATION_CELL, sim);
            let outcome = run_trial_with(null_env, spec, &mut stream, |_| {})?;
            Ok(wald_statistic(
                &mle_estimate(&outcome.counts),
                &outcome.counts,
            ))
        })
        .collect::<Result<_>>()?;

    let mut defined: Vec<f64> = statistics.into_iter().flatten().collect();
    if defined.len() * 2 < n_sims {
        return Err(Error::Calibration {
            defined: defined.len(),
            n_sims,
        });
    }
    defined.sort_by(f64::total_cmp);
    let lower = nearest_rank_quantile(&defined, alpha / 2.0);
    let upper = nearest_rank_quantile(&defined, 1.0 - alpha / 2.0);
    if lower.partial_cmp(&upper) != Some(std::cmp::Ordering::Less) {
        return Err(Error::Domain(format!(
            "degenerate critical values [{lower}, {upper}] at alpha = {alpha}"
        )));
    }
    Ok(CriticalValues {
        null_p: null_env.p1,
        n: null_env.horizon,
        policy: spec.clone(),
        n_sims,
        alpha,
        lower,
        upper,
        undefined_excluded: n_sims - defined.len(),
        base_seed,
    })
}
