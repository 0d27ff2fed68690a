//! Seeded, parallel sweeps over (environment, policy) cells.
//!
//! Each simulation derives its stream from `(base_seed, cell_id, sim_index)`
//! and results are collected in simulation order, so outputs do not depend
//! on the number of worker threads.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{EnvSpec, StepRecord};
use crate::engine::{count_steps, run_trial_with, ArmCounts};
use crate::error::{Error, Result};
use crate::inference::{
    bayes_factor_with, bf_test, calibrate_critical_values, ipw_estimate_steps, mle_estimate,
    wald_statistic, wald_test, welch_test, BayesFactorForm, Bounds, CriticalValues, Estimate,
    TestOutcome,
};
use crate::metrics::{
    assignment_prob_histogram, bias_table, mean_reward_summary, reject_rate_summary,
    AssignmentHistogram, EstimatorDiagnostics, MeanSe, RejectSummary,
};
use crate::policy::PolicySpec;

fn default_alpha() -> f64 {
    0.05
}

fn default_critical() -> f64 {
    1.96
}

fn default_prior() -> f64 {
    1.0
}

/// Inline calibration request for an induced-critical-value Wald test.
/// The policy and horizon default to those of the cell being tested.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationRequest {
    pub null_p: f64,
    pub n_sims: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub policy: Option<PolicySpec>,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// A test named in a run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestSpec {
    Wald {
        #[serde(default = "default_critical")]
        critical: f64,
    },
    Welch {
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
    BayesFactor {
        cutoff: f64,
        #[serde(default = "default_prior")]
        prior_alpha: f64,
        #[serde(default = "default_prior")]
        prior_beta: f64,
        #[serde(default)]
        form: BayesFactorForm,
    },
    IpwWald {
        #[serde(default = "default_critical")]
        critical: f64,
    },
    InducedWald {
        #[serde(default)]
        calibration: Option<PathBuf>,
        #[serde(default)]
        calibrate: Option<CalibrationRequest>,
    },
}

/// A test with its critical values resolved.
#[derive(Clone, Debug, PartialEq)]
pub enum ResolvedTest {
    Wald {
        bounds: Bounds,
    },
    Welch {
        alpha: f64,
    },
    BayesFactor {
        cutoff: f64,
        prior_alpha: f64,
        prior_beta: f64,
        form: BayesFactorForm,
    },
    IpwWald {
        bounds: Bounds,
    },
    InducedWald {
        calibration: CriticalValues,
    },
}

impl ResolvedTest {
    pub fn name(&self) -> &'static str {
        match self {
            ResolvedTest::Wald { .. } => "wald",
            ResolvedTest::Welch { .. } => "welch",
            ResolvedTest::BayesFactor { .. } => "bayes_factor",
            ResolvedTest::IpwWald { .. } => "ipw_wald",
            ResolvedTest::InducedWald { .. } => "induced_wald",
        }
    }

    /// Parameter string used in the summary `params` column.
    pub fn params(&self) -> String {
        match self {
            ResolvedTest::Wald { bounds } | ResolvedTest::IpwWald { bounds } => {
                format!("lower={};upper={}", bounds.lower, bounds.upper)
            }
            ResolvedTest::Welch { alpha } => format!("alpha={alpha}"),
            ResolvedTest::BayesFactor {
                cutoff,
                prior_alpha,
                prior_beta,
                form,
            } => {
                let form = match form {
                    BayesFactorForm::Literal => "literal",
                    BayesFactorForm::Normalized => "normalized",
                };
                format!("cutoff={cutoff};prior={prior_alpha}/{prior_beta};form={form}")
            }
            ResolvedTest::InducedWald { calibration: c } => format!(
                "lower={};upper={};null_p={};cal_sims={}",
                c.lower, c.upper, c.null_p, c.n_sims
            ),
        }
    }

    pub fn apply(&self, counts: &ArmCounts, mle: &Estimate, ipw: &Estimate) -> TestOutcome {
        match self {
            ResolvedTest::Wald { bounds } => {
                wald_test(self.name(), wald_statistic(mle, counts), *bounds)
            }
            ResolvedTest::IpwWald { bounds } => {
                wald_test(self.name(), wald_statistic(ipw, counts), *bounds)
            }
            ResolvedTest::InducedWald { calibration } => wald_test(
                self.name(),
                wald_statistic(mle, counts),
                calibration.bounds(),
            ),
            ResolvedTest::Welch { alpha } => welch_test(counts, *alpha),
            ResolvedTest::BayesFactor {
                cutoff,
                prior_alpha,
                prior_beta,
                form,
            } => bf_test(
                bayes_factor_with(counts, *prior_alpha, *prior_beta, *form),
                *cutoff,
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    pub p1: f64,
    pub p2: f64,
    pub n: usize,
    pub policy: PolicySpec,
    #[serde(default)]
    pub n_sims: Option<usize>,
}

impl CellConfig {
    pub fn env(&self) -> Result<EnvSpec> {
        EnvSpec::new(self.p1, self.p2, self.n)
    }

    pub fn label(&self) -> String {
        format!("{} p1={} p2={} n={}", self.policy, self.p1, self.p2, self.n)
    }
}

/// A whole sweep as read from a JSON configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub cells: Vec<CellConfig>,
    pub n_sims: usize,
    pub tests: Vec<TestSpec>,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub write_logs: bool,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(Error::Config("no cells configured".into()));
        }
        if self.n_sims == 0 || self.cells.iter().any(|c| c.n_sims == Some(0)) {
            return Err(Error::Config("n_sims must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        for (i, cell) in self.cells.iter().enumerate() {
            cell.env()
                .and_then(|_| cell.policy.validate())
                .map_err(|e| Error::Config(format!("cell {i}: {e}")))?;
        }
        for test in &self.tests {
            match test {
                TestSpec::Wald { critical } | TestSpec::IpwWald { critical } if critical.is_nan() || *critical <= 0.0 => {
                    return Err(Error::Config(format!("critical value must be positive, got {critical}")))
                }
                TestSpec::Welch { alpha } if !(*alpha > 0.0 && *alpha < 1.0) => {
                    return Err(Error::Config(format!("welch alpha must lie in (0, 1), got {alpha}")))
                }
                TestSpec::BayesFactor { cutoff, prior_alpha, prior_beta, .. }
                    if !(*cutoff > 0.0 && *prior_alpha > 0.0 && *prior_beta > 0.0) =>
                {
                    return Err(Error::Config("bayes factor cutoff and prior must be positive".into()))
                }
                TestSpec::InducedWald { calibration, calibrate } => match (calibration, calibrate) {
                    (Some(_), None) | (None, Some(_)) => {}
                    _ => {
                        return Err(Error::Config(
                            "induced_wald needs exactly one of `calibration` (file) or `calibrate` (inline)".into(),
                        ))
                    }
                },
                _ => {}
            }
        }
        Ok(())
    }
}

/// Everything kept from one simulated trial.
#[derive(Clone, Debug)]
pub struct SimResult {
    pub counts: ArmCounts,
    pub mle: Estimate,
    pub ipw: Estimate,
    pub mean_reward: f64,
    pub final_pi1: f64,
    pub outcomes: Vec<TestOutcome>,
    pub steps: Option<Vec<StepRecord>>,
}

pub fn simulate_one(
    env: &EnvSpec,
    policy: &PolicySpec,
    tests: &[ResolvedTest],
    stream: &mut crate::rng::RngStream,
    keep_steps: bool,
) -> Result<SimResult> {
    let mut steps = Vec::with_capacity(env.horizon);
    let outcome = run_trial_with(env, policy, stream, |s| steps.push(*s))?;
    let counts = outcome.counts;
    debug_assert_eq!(counts, count_steps(&steps));
    let mle = mle_estimate(&counts);
    let ipw = ipw_estimate_steps(&steps)?;
    let rewards = counts.s1 + counts.s2;
    Ok(SimResult {
        counts,
        mle,
        ipw,
        mean_reward: rewards as f64 / env.horizon as f64,
        final_pi1: outcome.final_pi1,
        outcomes: tests.iter().map(|t| t.apply(&counts, &mle, &ipw)).collect(),
        steps: keep_steps.then_some(steps),
    })
}

#[derive(Clone, Debug)]
pub struct CellResult {
    pub cell_id: usize,
    pub env: EnvSpec,
    pub policy: PolicySpec,
    pub tests: Vec<ResolvedTest>,
    pub sims: Vec<SimResult>,
}

/// Runs `n_sims` trials of one cell on the current rayon pool.
pub fn run_cell(
    cell_id: usize,
    env: &EnvSpec,
    policy: &PolicySpec,
    tests: &[ResolvedTest],
    n_sims: usize,
    base_seed: u64,
    keep_steps: bool,
) -> Result<CellResult> {
    env.validate()?;
    policy.validate()?;
    let sims = (0..n_sims as u64)
        .into_par_iter()
        .map(|sim| {
            let mut stream = crate::rng::derive_stream(base_seed, cell_id as u64, sim);
            simulate_one(env, policy, tests, &mut stream, keep_steps)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CellResult {
        cell_id,
        env: *env,
        policy: policy.clone(),
        tests: tests.to_vec(),
        sims,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestSummary {
    pub test: String,
    pub params: String,
    #[serde(flatten)]
    pub summary: RejectSummary,
}

/// Cell-level aggregates over all simulations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell_id: usize,
    pub policy: PolicySpec,
    pub env: EnvSpec,
    pub n_sims: usize,
    pub tests: Vec<TestSummary>,
    pub mean_reward: MeanSe,
    pub diagnostics: Vec<EstimatorDiagnostics>,
    pub histogram: AssignmentHistogram,
}

impl CellResult {
    pub fn outcomes(&self, test_index: usize) -> Vec<TestOutcome> {
        self.sims
            .iter()
            .map(|s| s.outcomes[test_index].clone())
            .collect()
    }

    pub fn test_summary(&self, test_index: usize) -> Result<RejectSummary> {
        reject_rate_summary(&self.outcomes(test_index))
    }

    pub fn diagnostics(
        &self,
        method: crate::inference::EstimatorKind,
    ) -> Result<EstimatorDiagnostics> {
        let estimates: Vec<Estimate> = self
            .sims
            .iter()
            .map(|s| match method {
                crate::inference::EstimatorKind::Mle => s.mle,
                crate::inference::EstimatorKind::Ipw => s.ipw,
            })
            .collect();
        let counts: Vec<ArmCounts> = self.sims.iter().map(|s| s.counts).collect();
        bias_table(&estimates, &counts, &self.env)
    }

    pub fn final_pi1(&self) -> Vec<f64> {
        self.sims.iter().map(|s| s.final_pi1).collect()
    }

    pub fn summary(&self) -> Result<CellSummary> {
        let tests = self
            .tests
            .iter()
            .enumerate()
            .map(|(i, t)| {
                Ok(TestSummary {
                    test: t.name().to_string(),
                    params: t.params(),
                    summary: self.test_summary(i)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let rewards: Vec<f64> = self.sims.iter().map(|s| s.mean_reward).collect();
        Ok(CellSummary {
            cell_id: self.cell_id,
            policy: self.policy.clone(),
            env: self.env,
            n_sims: self.sims.len(),
            tests,
            mean_reward: mean_reward_summary(&rewards)?,
            diagnostics: vec![
                self.diagnostics(crate::inference::EstimatorKind::Mle)?,
                self.diagnostics(crate::inference::EstimatorKind::Ipw)?,
            ],
            histogram: assignment_prob_histogram(&self.final_pi1())?,
        })
    }
}

/// Resolves every test of `config` for one cell. Inline calibrations are
/// memoized in `cache` so cells sharing a policy calibrate once.
pub fn resolve_tests(
    config: &RunConfig,
    cell: &CellConfig,
    config_dir: &Path,
    cache: &mut HashMap<String, CriticalValues>,
) -> Result<Vec<ResolvedTest>> {
    config
        .tests
        .iter()
        .map(|test| {
            Ok(match test {
                TestSpec::Wald { critical } => ResolvedTest::Wald {
                    bounds: Bounds::symmetric(*critical),
                },
                TestSpec::IpwWald { critical } => ResolvedTest::IpwWald {
                    bounds: Bounds::symmetric(*critical),
                },
                TestSpec::Welch { alpha } => ResolvedTest::Welch { alpha: *alpha },
                TestSpec::BayesFactor {
                    cutoff,
                    prior_alpha,
                    prior_beta,
                    form,
                } => ResolvedTest::BayesFactor {
                    cutoff: *cutoff,
                    prior_alpha: *prior_alpha,
                    prior_beta: *prior_beta,
                    form: *form,
                },
                TestSpec::InducedWald {
                    calibration: Some(path),
                    ..
                } => {
                    let path = if path.is_absolute() {
                        path.clone()
                    } else {
                        config_dir.join(path)
                    };
                    let calibration = crate::io::read_calibration(&path).map_err(|e| {
                        Error::Config(format!("calibration file {}: {e}", path.display()))
                    })?;
                    ResolvedTest::InducedWald { calibration }
                }
                TestSpec::InducedWald {
                    calibrate: Some(req),
                    ..
                } => {
                    let policy = req.policy.clone().unwrap_or_else(|| cell.policy.clone());
                    let seed = req.seed.unwrap_or(config.base_seed);
                    let key = format!(
                        "{policy}|{}|{}|{}|{}|{seed}",
                        cell.n, req.null_p, req.n_sims, req.alpha
                    );
                    let calibration = match cache.get(&key) {
                        Some(c) => c.clone(),
                        None => {
                            let env = EnvSpec::new(req.null_p, req.null_p, cell.n)?;
                            let c = calibrate_critical_values(
                                &env, &policy, req.n_sims, req.alpha, seed,
                            )?;
                            cache.insert(key, c.clone());
                            c
                        }
                    };
                    ResolvedTest::InducedWald { calibration }
                }
                TestSpec::InducedWald { .. } => {
                    return Err(Error::Config(
                        "induced_wald without a calibration source".into(),
                    ))
                }
            })
        })
        .collect()
}

#[derive(Debug)]
pub struct RunReport {
    pub summaries: Vec<CellSummary>,
    pub failures: Vec<Error>,
}

/// Runs every cell of `config` with `workers` threads and writes the output
/// tables into `out_dir`. Failed cells are reported but do not stop the run.
pub fn run_config(
    config: &RunConfig,
    config_dir: &Path,
    out_dir: &Path,
    workers: usize,
) -> Result<RunReport> {
    config.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;

    let mut cache = HashMap::new();
    let mut summaries = Vec::new();
    let mut failures = Vec::new();
    for (cell_id, cell) in config.cells.iter().enumerate() {
        let result = pool.install(|| -> Result<CellResult> {
            let env = cell.env()?;
            let tests = resolve_tests(config, cell, config_dir, &mut cache)?;
            let n_sims = cell.n_sims.unwrap_or(config.n_sims);
            run_cell(
                cell_id,
                &env,
                &cell.policy,
                &tests,
                n_sims,
                config.base_seed,
                config.write_logs,
            )
        });
        match result.and_then(|r| {
            if config.write_logs {
                let dir = out_dir.join("logs");
                std::fs::create_dir_all(&dir)?;
                let file = std::fs::File::create(dir.join(format!("cell_{cell_id}.csv")))?;
                let logs: Vec<(usize, &[StepRecord])> = r
                    .sims
                    .iter()
                    .enumerate()
                    .map(|(i, s)| (i, s.steps.as_deref().unwrap_or_default()))
                    .collect();
                crate::io::write_trial_logs(file, &logs)?;
            }
            r.summary()
        }) {
            Ok(summary) => summaries.push(summary),
            Err(source) => failures.push(Error::Cell {
                cell: cell_id,
                label: cell.label(),
                source: Box::new(source),
            }),
        }
    }
    crate::io::write_run_outputs(out_dir, &summaries)?;
    Ok(RunReport {
        summaries,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parses_with_defaults() {
        let config = RunConfig::from_json(
            r#"{
                "cells": [{"p1": 0.5, "p2": 0.5, "n": 785, "policy": "ts"}],
                "n_sims": 10,
                "tests": [
                    {"kind": "wald"},
                    {"kind": "welch"},
                    {"kind": "bayes_factor", "cutoff": 3.0},
                    {"kind": "ipw_wald"},
                    {"kind": "induced_wald", "calibrate": {"null_p": 0.5, "n_sims": 1000}}
                ]
            }"#,
        )
        .unwrap();
        assert_eq!(config.cells[0].policy, PolicySpec::thompson(1.0, 1.0));
        assert_eq!(config.tests[0], TestSpec::Wald { critical: 1.96 });
        assert_eq!(config.base_seed, 0);
    }

    #[test]
    fn config_rejects_bad_input() {
        let bad = [
            r#"{"cells": [], "n_sims": 10, "tests": []}"#,
            r#"{"cells": [{"p1": 1.5, "p2": 0.5, "n": 10, "policy": "ur"}], "n_sims": 10, "tests": []}"#,
            r#"{"cells": [{"p1": 0.5, "p2": 0.5, "n": 10, "policy": "ur"}], "n_sims": 0, "tests": []}"#,
            r#"{"cells": [{"p1": 0.5, "p2": 0.5, "n": 10, "policy": "ucb"}], "n_sims": 1, "tests": []}"#,
            r#"{"cells": [{"p1": 0.5, "p2": 0.5, "n": 10, "policy": "ur"}], "n_sims": 1, "tests": [{"kind": "induced_wald"}]}"#,
            r#"{"cells": [{"p1": 0.5, "p2": 0.5, "n": 10, "policy": "ur"}], "n_sims": 1, "tests": [{"kind": "anova"}]}"#,
        ];
        for text in bad {
            assert!(RunConfig::from_json(text).is_err(), "{text}");
        }
    }

    #[test]
    fn cell_results_do_not_depend_on_pool_size() {
        let env = EnvSpec::new(0.5, 0.5, 120).unwrap();
        let policy = PolicySpec::thompson(1.0, 1.0);
        let tests = [ResolvedTest::Wald {
            bounds: Bounds::NORMAL_5PCT,
        }];
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_cell(3, &env, &policy, &tests, 64, 99, false).unwrap())
        };
        let (a, b) = (run(1), run(4));
        let pis = |r: &CellResult| {
            r.sims
                .iter()
                .map(|s| s.final_pi1.to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(pis(&a), pis(&b));
        assert_eq!(a.summary().unwrap(), b.summary().unwrap());
    }
}
