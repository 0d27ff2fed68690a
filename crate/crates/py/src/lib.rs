//! Python bindings for `bandit_inference`.

use bandit_inference::inference::{
    self, BayesFactorForm, Bounds, CriticalValues as CoreCriticalValues,
};
use bandit_inference::policy::{self, BetaParams};
use bandit_inference::sweep::{self, ResolvedTest};
use bandit_inference::{
    derive_stream, Arm, ArmCounts, EnvSpec as CoreEnv, Error, PolicySpec as CorePolicy, StepRecord,
};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn counts(n1: u64, s1: u64, n2: u64, s2: u64) -> PyResult<ArmCounts> {
    if s1 > n1 || s2 > n2 {
        return Err(PyValueError::new_err("successes cannot exceed pulls"));
    }
    Ok(ArmCounts::new(n1, s1, n2, s2))
}

#[pyclass(frozen, skip_from_py_object, module = "bandit_inference")]
#[derive(Clone)]
struct EnvSpec {
    inner: CoreEnv,
}

#[pymethods]
impl EnvSpec {
    #[new]
    fn new(p1: f64, p2: f64, horizon: usize) -> PyResult<Self> {
        Ok(EnvSpec {
            inner: CoreEnv::new(p1, p2, horizon).map_err(to_py)?,
        })
    }

    #[getter]
    fn p1(&self) -> f64 {
        self.inner.p1
    }

    #[getter]
    fn p2(&self) -> f64 {
        self.inner.p2
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.inner.horizon
    }

    fn __repr__(&self) -> String {
        format!(
            "EnvSpec(p1={}, p2={}, horizon={})",
            self.inner.p1, self.inner.p2, self.inner.horizon
        )
    }
}

#[pyclass(frozen, skip_from_py_object, module = "bandit_inference")]
#[derive(Clone)]
struct PolicySpec {
    inner: CorePolicy,
}

#[pymethods]
impl PolicySpec {
    /// Parses `ur`, `ts:alpha=1,beta=1[,w=10]` or `eg:eps=0.1`.
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        Ok(PolicySpec {
            inner: spec.parse().map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn uniform() -> Self {
        PolicySpec {
            inner: CorePolicy::uniform(),
        }
    }

    #[staticmethod]
    #[pyo3(signature = (alpha=1.0, beta=1.0, weight=1.0))]
    fn thompson(alpha: f64, beta: f64, weight: f64) -> PyResult<Self> {
        let inner = CorePolicy::thompson_weighted(alpha, beta, weight);
        inner.validate().map_err(to_py)?;
        Ok(PolicySpec { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (epsilon=0.1))]
    fn epsilon_greedy(epsilon: f64) -> PyResult<Self> {
        let inner = CorePolicy::epsilon_greedy(epsilon);
        inner.validate().map_err(to_py)?;
        Ok(PolicySpec { inner })
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("PolicySpec('{}')", self.inner)
    }
}

#[pyclass(frozen, module = "bandit_inference")]
struct TrialLog {
    steps: Vec<StepRecord>,
    #[pyo3(get)]
    final_pi1: f64,
}

#[pymethods]
impl TrialLog {
    /// Arms as 1 or 2, one entry per participant.
    #[getter]
    fn arms(&self) -> Vec<u8> {
        self.steps.iter().map(|s| s.arm.index() as u8 + 1).collect()
    }

    #[getter]
    fn rewards(&self) -> Vec<u8> {
        self.steps.iter().map(|s| s.reward).collect()
    }

    #[getter]
    fn pi1(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.pi1).collect()
    }

    /// `(n1, s1, n2, s2)`.
    fn counts(&self) -> (u64, u64, u64, u64) {
        let c = bandit_inference::engine::count_steps(&self.steps);
        (c.n1, c.s1, c.n2, c.s2)
    }

    /// IPW estimate `(p1, p2)` from the recorded assignment probabilities.
    fn ipw_estimate(&self) -> PyResult<(Option<f64>, Option<f64>)> {
        let est = inference::ipw_estimate_steps(&self.steps).map_err(to_py)?;
        Ok((est.p1_hat, est.p2_hat))
    }

    fn __len__(&self) -> usize {
        self.steps.len()
    }
}

#[pyclass(frozen, skip_from_py_object, module = "bandit_inference")]
#[derive(Clone)]
struct CriticalValues {
    inner: CoreCriticalValues,
}

#[pymethods]
impl CriticalValues {
    #[getter]
    fn lower(&self) -> f64 {
        self.inner.lower
    }

    #[getter]
    fn upper(&self) -> f64 {
        self.inner.upper
    }

    #[getter]
    fn undefined_excluded(&self) -> usize {
        self.inner.undefined_excluded
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("calibration serializes")
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(CriticalValues { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "CriticalValues(lower={}, upper={})",
            self.inner.lower, self.inner.upper
        )
    }
}

/// Runs one trial on stream `(seed, cell, sim)`.
#[pyfunction]
#[pyo3(signature = (env, policy, seed, cell=0, sim=0))]
fn run_trial(
    env: &EnvSpec,
    policy: &PolicySpec,
    seed: u64,
    cell: u64,
    sim: u64,
) -> PyResult<TrialLog> {
    let mut stream = derive_stream(seed, cell, sim);
    let log = bandit_inference::run_trial(&env.inner, &policy.inner, &mut stream).map_err(to_py)?;
    Ok(TrialLog {
        steps: log.steps,
        final_pi1: log.final_pi1,
    })
}

#[pyfunction]
fn mle_estimate(n1: u64, s1: u64, n2: u64, s2: u64) -> PyResult<(Option<f64>, Option<f64>)> {
    let est = inference::mle_estimate(&counts(n1, s1, n2, s2)?);
    Ok((est.p1_hat, est.p2_hat))
}

/// Self-normalized IPW estimate from per-participant arms (1 or 2), rewards
/// and arm-1 assignment probabilities.
#[pyfunction]
fn ipw_estimate(
    arms: Vec<u8>,
    rewards: Vec<u8>,
    pi1: Vec<f64>,
) -> PyResult<(Option<f64>, Option<f64>)> {
    if arms.len() != rewards.len() || arms.len() != pi1.len() {
        return Err(PyValueError::new_err(
            "arms, rewards and pi1 must have equal length",
        ));
    }
    let steps = arms
        .iter()
        .zip(&rewards)
        .zip(&pi1)
        .enumerate()
        .map(|(i, ((&arm, &reward), &p))| {
            let arm = match arm {
                1 => Arm::One,
                2 => Arm::Two,
                _ => {
                    return Err(PyValueError::new_err(format!(
                        "arm at index {i} must be 1 or 2"
                    )))
                }
            };
            if reward > 1 {
                return Err(PyValueError::new_err(format!(
                    "reward at index {i} must be 0 or 1"
                )));
            }
            Ok(StepRecord {
                t: i + 1,
                arm,
                reward,
                pi1: p,
            })
        })
        .collect::<PyResult<Vec<_>>>()?;
    let est = inference::ipw_estimate_steps(&steps).map_err(to_py)?;
    Ok((est.p1_hat, est.p2_hat))
}

/// MLE Wald statistic `(p1 - p2) / se`, or None when undefined.
#[pyfunction]
fn wald_statistic(n1: u64, s1: u64, n2: u64, s2: u64) -> PyResult<Option<f64>> {
    let c = counts(n1, s1, n2, s2)?;
    Ok(inference::wald_statistic(&inference::mle_estimate(&c), &c))
}

/// Welch `(t, df)`, or None when undefined.
#[pyfunction]
fn welch_statistic(n1: u64, s1: u64, n2: u64, s2: u64) -> PyResult<Option<(f64, f64)>> {
    Ok(inference::welch_statistic(&counts(n1, s1, n2, s2)?).map(|w| (w.t, w.df)))
}

#[pyfunction]
#[pyo3(signature = (n1, s1, n2, s2, prior_alpha=1.0, prior_beta=1.0, normalized=true))]
fn bayes_factor(
    n1: u64,
    s1: u64,
    n2: u64,
    s2: u64,
    prior_alpha: f64,
    prior_beta: f64,
    normalized: bool,
) -> PyResult<f64> {
    if !(prior_alpha > 0.0 && prior_beta > 0.0) {
        return Err(PyValueError::new_err("prior parameters must be positive"));
    }
    let form = if normalized {
        BayesFactorForm::Normalized
    } else {
        BayesFactorForm::Literal
    };
    Ok(inference::bayes_factor_with(
        &counts(n1, s1, n2, s2)?,
        prior_alpha,
        prior_beta,
        form,
    ))
}

/// P(theta1 > theta2) for independent Beta(a1, b1) and Beta(a2, b2).
#[pyfunction]
fn posterior_prob_optimal(a1: f64, b1: f64, a2: f64, b2: f64) -> PyResult<f64> {
    let p = BetaParams::new(a1, b1).map_err(to_py)?;
    let q = BetaParams::new(a2, b2).map_err(to_py)?;
    policy::posterior_prob_optimal(p, q).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (p0, n, policy, n_sims, alpha=0.05, seed=0))]
fn calibrate(
    py: Python<'_>,
    p0: f64,
    n: usize,
    policy: &PolicySpec,
    n_sims: usize,
    alpha: f64,
    seed: u64,
) -> PyResult<CriticalValues> {
    let env = CoreEnv::new(p0, p0, n).map_err(to_py)?;
    let spec = policy.inner.clone();
    let inner = py
        .detach(|| inference::calibrate_critical_values(&env, &spec, n_sims, alpha, seed))
        .map_err(to_py)?;
    Ok(CriticalValues { inner })
}

/// Simulates one cell and returns its summary as a dict. Tests are Wald
/// (+/-1.96), Welch, Bayes factor at 3, IPW-Wald and, when `calibration` is
/// given, the calibrated Wald test.
#[pyfunction]
#[pyo3(signature = (env, policy, n_sims, seed, cell=0, calibration=None))]
fn run_cell<'py>(
    py: Python<'py>,
    env: &EnvSpec,
    policy: &PolicySpec,
    n_sims: usize,
    seed: u64,
    cell: usize,
    calibration: Option<&CriticalValues>,
) -> PyResult<Bound<'py, PyAny>> {
    let mut tests = vec![
        ResolvedTest::Wald {
            bounds: Bounds::NORMAL_5PCT,
        },
        ResolvedTest::Welch { alpha: 0.05 },
        ResolvedTest::BayesFactor {
            cutoff: 3.0,
            prior_alpha: 1.0,
            prior_beta: 1.0,
            form: BayesFactorForm::default(),
        },
        ResolvedTest::IpwWald {
            bounds: Bounds::NORMAL_5PCT,
        },
    ];
    if let Some(c) = calibration {
        tests.push(ResolvedTest::InducedWald {
            calibration: c.inner.clone(),
        });
    }
    let (e, p) = (env.inner, policy.inner.clone());
    let summary = py
        .detach(|| {
            sweep::run_cell(cell, &e, &p, &tests, n_sims, seed, false).and_then(|r| r.summary())
        })
        .map_err(to_py)?;
    let text = serde_json::to_string(&summary).expect("summary serializes");
    py.import("json")?.call_method1("loads", (text,))
}

#[pymodule]
#[pyo3(name = "bandit_inference")]
fn bandit_inference_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<EnvSpec>()?;
    m.add_class::<PolicySpec>()?;
    m.add_class::<TrialLog>()?;
    m.add_class::<CriticalValues>()?;
    m.add_function(wrap_pyfunction!(run_trial, m)?)?;
    m.add_function(wrap_pyfunction!(mle_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(ipw_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(wald_statistic, m)?)?;
    m.add_function(wrap_pyfunction!(welch_statistic, m)?)?;
    m.add_function(wrap_pyfunction!(bayes_factor, m)?)?;
    m.add_function(wrap_pyfunction!(posterior_prob_optimal, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(run_cell, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
