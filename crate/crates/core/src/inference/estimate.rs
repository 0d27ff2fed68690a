use serde::{Deserialize, Serialize};

use crate::domain::{Arm, StepRecord, TrialLog};
use crate::engine::ArmCounts;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Mle,
    Ipw,
}

impl EstimatorKind {
    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::Mle => "mle",
            EstimatorKind::Ipw => "ipw",
        }
    }
}

/// Per-arm mean estimates; `None` where an arm was never pulled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub p1_hat: Option<f64>,
    pub p2_hat: Option<f64>,
    pub method: EstimatorKind,
}

impl Estimate {
    pub fn get(&self, arm: Arm) -> Option<f64> {
        match arm {
            Arm::One => self.p1_hat,
            Arm::Two => self.p2_hat,
        }
    }

    pub fn difference(&self) -> Option<f64> {
        Some(self.p1_hat? - self.p2_hat?)
    }

    pub fn swapped(&self) -> Self {
        Estimate {
            p1_hat: self.p2_hat,
            p2_hat: self.p1_hat,
            method: self.method,
        }
    }
}

/// Sample success fraction per arm, ignoring how the data were collected.
pub fn mle_estimate(counts: &ArmCounts) -> Estimate {
    let ratio = |s: u64, n: u64| (n > 0).then(|| s as f64 / n as f64);
    Estimate {
        p1_hat: ratio(counts.s1, counts.n1),
        p2_hat: ratio(counts.s2, counts.n2),
        method: EstimatorKind::Mle,
    }
}

/// Self-normalized inverse probability weighted means.
pub fn ipw_estimate(log: &TrialLog) -> Result<Estimate> {
    ipw_estimate_steps(&log.steps)
}

pub fn ipw_estimate_steps(steps: &[StepRecord]) -> Result<Estimate> {
    let mut weighted_rewards = [0.0f64; 2];
    let mut weights = [0.0f64; 2];
    for step in steps {
        let pi = step.pi_pulled();
        if pi.is_nan() || pi <= 0.0 {
            return Err(Error::DataIntegrity(format!(
                "step {} pulled arm {} with recorded assignment probability {pi}",
                step.t,
                step.arm.label()
            )));
        }
        let k = step.arm.index();
        let w = 1.0 / pi;
        weights[k] += w;
        weighted_rewards[k] += w * f64::from(step.reward);
    }
    let ratio = |k: usize| (weights[k] > 0.0).then(|| weighted_rewards[k] / weights[k]);
    Ok(Estimate {
        p1_hat: ratio(0),
        p2_hat: ratio(1),
        method: EstimatorKind::Ipw,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::count_steps;

    fn step(t: usize, arm: Arm, reward: u8, pi1: f64) -> StepRecord {
        StepRecord {
            t,
            arm,
            reward,
            pi1,
        }
    }

    #[test]
    fn mle_ratio_and_empty_arm() {
        let e = mle_estimate(&ArmCounts::new(4, 3, 0, 0));
        assert_eq!(e.p1_hat, Some(0.75));
        assert_eq!(e.p2_hat, None);
    }

    #[test]
    fn ipw_two_step_example() {
        // weights 1/0.5 = 2 and 1/0.8 = 1.25
        let steps = [step(1, Arm::One, 1, 0.5), step(2, Arm::One, 0, 0.8)];
        let e = ipw_estimate_steps(&steps).unwrap();
        assert!((e.p1_hat.unwrap() - 2.0 / 3.25).abs() < 1e-15);
        assert!((e.p1_hat.unwrap() - 0.6154).abs() < 5e-5);
        assert_eq!(e.p2_hat, None);
    }

    #[test]
    fn ipw_equals_mle_under_constant_weights() {
        let rewards = [1, 0, 0, 1, 1, 1, 0, 1, 0, 0, 1];
        let steps: Vec<_> = rewards
            .iter()
            .enumerate()
            .map(|(i, &r)| step(i + 1, if i % 3 == 0 { Arm::Two } else { Arm::One }, r, 0.5))
            .collect();
        let ipw = ipw_estimate_steps(&steps).unwrap();
        let mle = mle_estimate(&count_steps(&steps));
        assert_eq!(ipw.p1_hat, mle.p1_hat);
        assert_eq!(ipw.p2_hat, mle.p2_hat);
    }

    #[test]
    fn zero_probability_pull_is_rejected() {
        let steps = [step(1, Arm::Two, 1, 1.0)];
        assert!(matches!(
            ipw_estimate_steps(&steps),
            Err(Error::DataIntegrity(_))
        ));
    }
}
