//! Allocation policies: Uniform Random, Beta-Bernoulli Thompson Sampling and
//! Epsilon-Greedy.

mod prob_optimal;

use std::fmt;
use std::str::FromStr;

use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

pub use prob_optimal::{
    posterior_prob_optimal, posterior_prob_optimal_closed_form, ProbOptimalTracker,
};

use crate::domain::Arm;
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    UniformRandom,
    ThompsonSampling,
    EpsilonGreedy,
}

/// Policy configuration. The TS fields are ignored by the other kinds and
/// vice versa, but are always kept valid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PolicySpec {
    pub kind: PolicyKind,
    pub ts_prior_alpha: f64,
    pub ts_prior_beta: f64,
    /// Pseudo-observations added per reward (1 = standard conjugate update).
    pub ts_update_weight: f64,
    pub eg_epsilon: f64,
}

impl Default for PolicySpec {
    fn default() -> Self {
        PolicySpec {
            kind: PolicyKind::UniformRandom,
            ts_prior_alpha: 1.0,
            ts_prior_beta: 1.0,
            ts_update_weight: 1.0,
            eg_epsilon: 0.1,
        }
    }
}

impl PolicySpec {
    pub fn uniform() -> Self {
        PolicySpec::default()
    }

    pub fn thompson(prior_alpha: f64, prior_beta: f64) -> Self {
        PolicySpec {
            kind: PolicyKind::ThompsonSampling,
            ts_prior_alpha: prior_alpha,
            ts_prior_beta: prior_beta,
            ..PolicySpec::default()
        }
    }

    pub fn thompson_weighted(prior_alpha: f64, prior_beta: f64, weight: f64) -> Self {
        PolicySpec {
            ts_update_weight: weight,
            ..PolicySpec::thompson(prior_alpha, prior_beta)
        }
    }

    pub fn epsilon_greedy(epsilon: f64) -> Self {
        PolicySpec {
            kind: PolicyKind::EpsilonGreedy,
            eg_epsilon: epsilon,
            ..PolicySpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        positive("ts_prior_alpha", self.ts_prior_alpha)?;
        positive("ts_prior_beta", self.ts_prior_beta)?;
        positive("ts_update_weight", self.ts_update_weight)?;
        if !(0.0..=1.0).contains(&self.eg_epsilon) {
            return Err(Error::Domain(format!(
                "eg_epsilon must lie in [0, 1], got {}",
                self.eg_epsilon
            )));
        }
        Ok(())
    }

    pub fn prior(&self) -> BetaParams {
        BetaParams {
            alpha: self.ts_prior_alpha,
            beta: self.ts_prior_beta,
        }
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            PolicyKind::UniformRandom => write!(f, "ur"),
            PolicyKind::ThompsonSampling => {
                write!(
                    f,
                    "ts:alpha={},beta={}",
                    self.ts_prior_alpha, self.ts_prior_beta
                )?;
                if self.ts_update_weight != 1.0 {
                    write!(f, ",w={}", self.ts_update_weight)?;
                }
                Ok(())
            }
            PolicyKind::EpsilonGreedy => write!(f, "eg:eps={}", self.eg_epsilon),
        }
    }
}

impl FromStr for PolicySpec {
    type Err = Error;

    /// Accepts `ur`, `ts`, `ts:alpha=<f>,beta=<f>[,w=<f>]`, `eg` and
    /// `eg:eps=<f>`. Omitted parameters take their defaults.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, params) = s.split_once(':').unwrap_or((s, ""));
        let mut spec = match name.to_ascii_lowercase().as_str() {
            "ur" | "uniform" => PolicySpec::uniform(),
            "ts" | "thompson" => PolicySpec::thompson(1.0, 1.0),
            "eg" | "epsilon_greedy" => PolicySpec::epsilon_greedy(0.1),
            other => return Err(Error::Config(format!("unknown policy `{other}`"))),
        };
        for pair in params.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = pair.split_once('=').ok_or_else(|| {
                Error::Config(format!("policy parameter `{pair}` is not key=value"))
            })?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("policy parameter `{pair}` is not a number")))?;
            match (spec.kind, key.trim()) {
                (PolicyKind::ThompsonSampling, "alpha" | "a") => spec.ts_prior_alpha = value,
                (PolicyKind::ThompsonSampling, "beta" | "b") => spec.ts_prior_beta = value,
                (PolicyKind::ThompsonSampling, "w" | "weight") => spec.ts_update_weight = value,
                (PolicyKind::EpsilonGreedy, "eps" | "epsilon") => spec.eg_epsilon = value,
                (_, key) => {
                    return Err(Error::Config(format!(
                        "policy `{name}` has no parameter `{key}`"
                    )))
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

impl TryFrom<String> for PolicySpec {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        value.parse()
    }
}

impl From<PolicySpec> for String {
    fn from(value: PolicySpec) -> Self {
        value.to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let params = BetaParams { alpha, beta };
        params.validate()?;
        Ok(params)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.alpha > 0.0 && self.beta > 0.0 && self.alpha.is_finite() && self.beta.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "Beta parameters must be positive and finite, got ({}, {})",
                self.alpha, self.beta
            )))
        }
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn variance(&self) -> f64 {
        let s = self.alpha + self.beta;
        self.alpha * self.beta / (s * s * (s + 1.0))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ArmTally {
    pub pulls: u64,
    pub successes: u64,
}

/// Evolving policy state for one simulated experiment.
#[derive(Clone, Debug)]
pub struct PosteriorState {
    posteriors: [BetaParams; 2],
    tallies: [ArmTally; 2],
    tracker: Option<ProbOptimalTracker>,
}

impl PosteriorState {
    pub fn new(spec: &PolicySpec) -> Result<Self> {
        spec.validate()?;
        let prior = spec.prior();
        let tracker = match spec.kind {
            PolicyKind::ThompsonSampling => Some(ProbOptimalTracker::new(prior, prior)?),
            _ => None,
        };
        Ok(PosteriorState {
            posteriors: [prior, prior],
            tallies: [ArmTally::default(); 2],
            tracker,
        })
    }

    /// Starts from arbitrary per-arm posteriors (used for fixed-posterior checks).
    pub fn with_posteriors(post1: BetaParams, post2: BetaParams) -> Result<Self> {
        Ok(PosteriorState {
            posteriors: [post1, post2],
            tallies: [ArmTally::default(); 2],
            tracker: Some(ProbOptimalTracker::new(post1, post2)?),
        })
    }

    pub fn posterior(&self, arm: Arm) -> BetaParams {
        self.posteriors[arm.index()]
    }

    pub fn tally(&self, arm: Arm) -> ArmTally {
        self.tallies[arm.index()]
    }

    /// P(theta_1 > theta_2) under the current posteriors.
    pub fn ts_prob_arm1(&self) -> f64 {
        match &self.tracker {
            Some(t) => t.value(),
            None => posterior_prob_optimal(self.posteriors[0], self.posteriors[1])
                .expect("posteriors stay valid"),
        }
    }

    /// Probability the greedy step picks arm 1: 1, 1/2 or 0. Arms without
    /// observations count as tied at the maximum.
    pub fn greedy_prob_arm1(&self) -> f64 {
        let [a, b] = self.tallies;
        match (a.pulls, b.pulls) {
            (0, 0) => 0.5,
            (0, _) => 1.0,
            (_, 0) => 0.0,
            _ => {
                // compare S1/n1 with S2/n2 exactly
                let lhs = u128::from(a.successes) * u128::from(b.pulls);
                let rhs = u128::from(b.successes) * u128::from(a.pulls);
                match lhs.cmp(&rhs) {
                    std::cmp::Ordering::Greater => 1.0,
                    std::cmp::Ordering::Less => 0.0,
                    std::cmp::Ordering::Equal => 0.5,
                }
            }
        }
    }

    /// Probability the policy assigns arm 1 to the next participant.
    pub fn assignment_prob_arm1(&self, spec: &PolicySpec) -> f64 {
        match spec.kind {
            PolicyKind::UniformRandom => 0.5,
            PolicyKind::ThompsonSampling => self.ts_prob_arm1(),
            PolicyKind::EpsilonGreedy => {
                let eps = spec.eg_epsilon;
                let g = self.greedy_prob_arm1();
                // exact for g in {0, 1/2, 1}
                if g == 1.0 {
                    1.0 - eps / 2.0
                } else if g == 0.0 {
                    eps / 2.0
                } else {
                    (1.0 - eps) * g + eps / 2.0
                }
            }
        }
    }

    /// Records one observation: counts always, posterior with weight `w`.
    pub fn observe(&mut self, arm: Arm, reward: u8, w: f64) {
        let tally = &mut self.tallies[arm.index()];
        tally.pulls += 1;
        tally.successes += u64::from(reward);
        self.apply_ts_update(arm, reward, w);
    }

    fn apply_ts_update(&mut self, arm: Arm, reward: u8, w: f64) {
        let r = f64::from(reward);
        let post = &mut self.posteriors[arm.index()];
        match self.tracker.as_mut() {
            Some(tracker) if is_whole(w) => {
                let steps = w as u64;
                for _ in 0..steps {
                    if reward == 1 {
                        tracker.increment_alpha(arm);
                    } else {
                        tracker.increment_beta(arm);
                    }
                }
            }
            _ => self.tracker = None,
        }
        post.alpha += w * r;
        post.beta += w * (1.0 - r);
    }
}

fn is_whole(w: f64) -> bool {
    w >= 1.0 && w.fract() == 0.0 && w <= 1.0e6
}

/// Conjugate update of the chosen arm: alpha += w*r, beta += w*(1-r).
pub fn ts_update(state: &PosteriorState, arm: Arm, reward: u8, w: f64) -> PosteriorState {
    let mut next = state.clone();
    next.apply_ts_update(arm, reward, w);
    next
}

/// Chooses the next arm and reports the pre-draw probability of arm 1.
pub fn select_arm(state: &PosteriorState, spec: &PolicySpec, stream: &mut RngStream) -> (Arm, f64) {
    let pi1 = state.assignment_prob_arm1(spec);
    let arm = match spec.kind {
        PolicyKind::ThompsonSampling => {
            let [p1, p2] = state.posteriors;
            let draw = |p: BetaParams, s: &mut RngStream| {
                Beta::new(p.alpha, p.beta)
                    .expect("posterior parameters are positive")
                    .sample(s.rng())
            };
            let theta1 = draw(p1, stream);
            let theta2 = draw(p2, stream);
            if theta1 >= theta2 {
                Arm::One
            } else {
                Arm::Two
            }
        }
        PolicyKind::UniformRandom | PolicyKind::EpsilonGreedy => {
            if stream.uniform() < pi1 {
                Arm::One
            } else {
                Arm::Two
            }
        }
    };
    (arm, pi1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;

    fn b(alpha: f64, beta: f64) -> BetaParams {
        BetaParams::new(alpha, beta).unwrap()
    }

    #[test]
    fn flat_ts_is_even() {
        let spec = PolicySpec::thompson(1.0, 1.0);
        let state = PosteriorState::new(&spec).unwrap();
        let mut s = derive_stream(0, 0, 0);
        let (_, pi1) = select_arm(&state, &spec, &mut s);
        assert_eq!(pi1, 0.5);
    }

    #[test]
    fn eg_unique_leader() {
        let spec = PolicySpec::epsilon_greedy(0.1);
        let mut state = PosteriorState::new(&spec).unwrap();
        state.observe(Arm::One, 1, 1.0);
        state.observe(Arm::Two, 0, 1.0);
        assert!((state.assignment_prob_arm1(&spec) - 0.95).abs() < 1e-15);
    }

    #[test]
    fn eg_unpulled_arms_are_optimistic() {
        let spec = PolicySpec::epsilon_greedy(0.1);
        let mut state = PosteriorState::new(&spec).unwrap();
        assert_eq!(state.assignment_prob_arm1(&spec), 0.5);
        state.observe(Arm::One, 1, 1.0);
        // arm 2 has never been pulled, so it is tied at the max and wins
        assert!((state.assignment_prob_arm1(&spec) - 0.05).abs() < 1e-15);
        state.observe(Arm::Two, 1, 1.0);
        assert_eq!(state.assignment_prob_arm1(&spec), 0.5);
    }

    #[test]
    fn ts_select_two_thirds() {
        let state = PosteriorState::with_posteriors(b(2.0, 1.0), b(1.0, 1.0)).unwrap();
        let (_, pi1) = select_arm(
            &state,
            &PolicySpec::thompson(1.0, 1.0),
            &mut derive_stream(0, 0, 0),
        );
        assert!((pi1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn conjugate_and_weighted_updates() {
        let spec = PolicySpec::thompson(1.0, 1.0);
        let state = PosteriorState::new(&spec).unwrap();
        let next = ts_update(&state, Arm::One, 1, 1.0);
        assert_eq!(next.posterior(Arm::One), b(2.0, 1.0));
        assert_eq!(next.posterior(Arm::Two), b(1.0, 1.0));

        let spec = PolicySpec::thompson_weighted(19.0, 1.0, 10.0);
        let state = PosteriorState::new(&spec).unwrap();
        let next = ts_update(&state, Arm::Two, 0, 10.0);
        assert_eq!(next.posterior(Arm::Two), b(19.0, 11.0));
        // tracker and direct evaluation agree after a weighted step
        let direct = posterior_prob_optimal(b(19.0, 1.0), b(19.0, 11.0)).unwrap();
        assert!((next.ts_prob_arm1() - direct).abs() < 1e-9);
    }

    #[test]
    fn updates_commute() {
        let spec = PolicySpec::thompson(3.5, 2.0);
        let state = PosteriorState::new(&spec).unwrap();
        let ab = ts_update(&ts_update(&state, Arm::One, 1, 1.0), Arm::One, 0, 1.0);
        let ba = ts_update(&ts_update(&state, Arm::One, 0, 1.0), Arm::One, 1, 1.0);
        assert_eq!(ab.posterior(Arm::One), b(4.5, 3.0));
        assert_eq!(ab.posterior(Arm::One), ba.posterior(Arm::One));
    }

    #[test]
    fn fractional_weight_falls_back_to_quadrature() {
        let spec = PolicySpec::thompson_weighted(1.0, 1.0, 2.5);
        let mut state = PosteriorState::new(&spec).unwrap();
        state.observe(Arm::One, 1, 2.5);
        let expect = posterior_prob_optimal(b(3.5, 1.0), b(1.0, 1.0)).unwrap();
        assert!((state.ts_prob_arm1() - expect).abs() < 1e-12);
    }

    #[test]
    fn policy_strings_round_trip() {
        for text in [
            "ur",
            "ts:alpha=1,beta=1",
            "ts:alpha=0.5,beta=0.5",
            "ts:alpha=19,beta=1,w=10",
            "eg:eps=0.1",
        ] {
            let spec: PolicySpec = text.parse().unwrap();
            assert_eq!(spec.to_string(), text);
        }
        assert_eq!(
            "ts".parse::<PolicySpec>().unwrap(),
            PolicySpec::thompson(1.0, 1.0)
        );
        assert!("ts:alpha=-1".parse::<PolicySpec>().is_err());
        assert!("eg:eps=1.5".parse::<PolicySpec>().is_err());
        assert!("ucb".parse::<PolicySpec>().is_err());
        assert!("ur:eps=0.1".parse::<PolicySpec>().is_err());
    }
}
