use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use statrs::function::gamma::ln_gamma;

use super::estimate::Estimate;
use crate::engine::ArmCounts;

/// Two-sided rejection region: reject when the statistic falls outside
/// `[lower, upper]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    /// The conventional +/-1.96 for a 5% two-sided z test.
    pub const NORMAL_5PCT: Bounds = Bounds {
        lower: -1.96,
        upper: 1.96,
    };

    pub fn symmetric(c: f64) -> Self {
        Bounds {
            lower: -c,
            upper: c,
        }
    }

    pub fn rejects(&self, statistic: f64) -> bool {
        statistic < self.lower || statistic > self.upper
    }
}

/// One test applied to one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub test_name: String,
    pub statistic: Option<f64>,
    pub critical_lower: Option<f64>,
    pub critical_upper: Option<f64>,
    pub cutoff: Option<f64>,
    pub p_value: Option<f64>,
    pub df: Option<f64>,
    pub reject: bool,
    pub undefined: bool,
}

impl TestOutcome {
    fn blank(name: &str) -> Self {
        TestOutcome {
            test_name: name.to_string(),
            statistic: None,
            critical_lower: None,
            critical_upper: None,
            cutoff: None,
            p_value: None,
            df: None,
            reject: false,
            undefined: true,
        }
    }
}

/// `(p1 - p2) / sqrt(p1(1-p1)/n1 + p2(1-p2)/n2)`, `None` when either estimate
/// is missing or the variance vanishes.
pub fn wald_statistic(est: &Estimate, counts: &ArmCounts) -> Option<f64> {
    let (p1, p2) = (est.p1_hat?, est.p2_hat?);
    if counts.n1 == 0 || counts.n2 == 0 {
        return None;
    }
    let var = p1 * (1.0 - p1) / counts.n1 as f64 + p2 * (1.0 - p2) / counts.n2 as f64;
    (var > 0.0).then(|| (p1 - p2) / var.sqrt())
}

pub fn normal_two_sided_p(z: f64) -> f64 {
    let normal = Normal::standard();
    2.0 * normal.cdf(-z.abs())
}

pub fn wald_test(name: &str, statistic: Option<f64>, bounds: Bounds) -> TestOutcome {
    let mut out = TestOutcome {
        critical_lower: Some(bounds.lower),
        critical_upper: Some(bounds.upper),
        ..TestOutcome::blank(name)
    };
    if let Some(z) = statistic.filter(|z| z.is_finite()) {
        out.statistic = Some(z);
        out.p_value = Some(normal_two_sided_p(z));
        out.reject = bounds.rejects(z);
        out.undefined = false;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WelchStatistic {
    pub t: f64,
    pub df: f64,
}

/// `(p2 - p1) / sqrt(s1^2/n1 + s2^2/n2)` with unbiased Bernoulli sample
/// variances and Welch-Satterthwaite degrees of freedom.
pub fn welch_statistic(counts: &ArmCounts) -> Option<WelchStatistic> {
    if counts.n1 < 2 || counts.n2 < 2 {
        return None;
    }
    let sample_var = |s: u64, n: u64| {
        let (n, p) = (n as f64, s as f64 / n as f64);
        n / (n - 1.0) * p * (1.0 - p)
    };
    let (n1, n2) = (counts.n1 as f64, counts.n2 as f64);
    let v1 = sample_var(counts.s1, counts.n1) / n1;
    let v2 = sample_var(counts.s2, counts.n2) / n2;
    let se2 = v1 + v2;
    if se2 <= 0.0 {
        return None;
    }
    let p1 = counts.s1 as f64 / n1;
    let p2 = counts.s2 as f64 / n2;
    let df = se2 * se2 / (v1 * v1 / (n1 - 1.0) + v2 * v2 / (n2 - 1.0));
    Some(WelchStatistic {
        t: (p2 - p1) / se2.sqrt(),
        df,
    })
}

/// Welch's unequal-variance t test at two-sided level `alpha`.
pub fn welch_test(counts: &ArmCounts, alpha: f64) -> TestOutcome {
    let mut out = TestOutcome::blank("welch");
    let Some(WelchStatistic { t, df }) = welch_statistic(counts) else {
        return out;
    };
    let dist = StudentsT::new(0.0, 1.0, df).expect("degrees of freedom are positive");
    let critical = dist.inverse_cdf(1.0 - alpha / 2.0);
    out.statistic = Some(t);
    out.df = Some(df);
    out.critical_lower = Some(-critical);
    out.critical_upper = Some(critical);
    out.p_value = Some(2.0 * dist.cdf(-t.abs()));
    out.reject = t.abs() > critical;
    out.undefined = false;
    out
}

/// How the marginal likelihoods are normalized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BayesFactorForm {
    /// `B(a1+S1, b1+n1-S1) B(a2+S2, b2+n2-S2) / B(a1+a2+S, b1+b2+n-S)`,
    /// without prior normalizing constants.
    Literal,
    /// Each marginal divided by its prior's Beta normalizer. This is the
    /// default for the sweep and `analyze`.
    #[default]
    Normalized,
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

pub fn bayes_factor(counts: &ArmCounts, prior_alpha: f64, prior_beta: f64) -> f64 {
    bayes_factor_with(counts, prior_alpha, prior_beta, BayesFactorForm::Literal)
}

/// BF10 for "arm means differ" against "arm means are equal", evaluated in
/// log space. Both arms share the prior `Beta(prior_alpha, prior_beta)`.
pub fn bayes_factor_with(
    counts: &ArmCounts,
    prior_alpha: f64,
    prior_beta: f64,
    form: BayesFactorForm,
) -> f64 {
    let (a, b) = (prior_alpha, prior_beta);
    // integer sums first, so relabelling the arms gives the same bits
    let (s1, s2) = (counts.s1, counts.s2);
    let (f1, f2) = (counts.n1 - s1, counts.n2 - s2);
    let mut ln_h1 = ln_beta(a + s1 as f64, b + f1 as f64) + ln_beta(a + s2 as f64, b + f2 as f64);
    let mut ln_h0 = ln_beta(2.0 * a + (s1 + s2) as f64, 2.0 * b + (f1 + f2) as f64);
    if form == BayesFactorForm::Normalized {
        ln_h1 -= 2.0 * ln_beta(a, b);
        ln_h0 -= ln_beta(2.0 * a, 2.0 * b);
    }
    (ln_h1 - ln_h0).exp()
}

pub fn bf_test(bf: f64, cutoff: f64) -> TestOutcome {
    TestOutcome {
        statistic: Some(bf),
        cutoff: Some(cutoff),
        reject: bf > cutoff,
        undefined: false,
        ..TestOutcome::blank("bayes_factor")
    }
}
