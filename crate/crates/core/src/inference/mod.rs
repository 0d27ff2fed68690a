//! Point estimators and hypothesis tests for two-arm binary-reward data.

mod calibration;
mod estimate;
mod hypothesis;

pub use calibration::{calibrate_critical_values, nearest_rank_quantile, CriticalValues};
pub use estimate::{ipw_estimate, ipw_estimate_steps, mle_estimate, Estimate, EstimatorKind};
pub use hypothesis::{
    bayes_factor, bayes_factor_with, bf_test, normal_two_sided_p, wald_statistic, wald_test,
    welch_statistic, welch_test, BayesFactorForm, Bounds, TestOutcome, WelchStatistic,
};
