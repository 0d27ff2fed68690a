//! Shared domain types: the Bernoulli environment and per-step trial records.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::policy::PolicySpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arm {
    One,
    Two,
}

impl Arm {
    pub fn index(self) -> usize {
        match self {
            Arm::One => 0,
            Arm::Two => 1,
        }
    }

    pub fn label(self) -> u8 {
        match self {
            Arm::One => 1,
            Arm::Two => 2,
        }
    }

    pub fn from_label(label: u8) -> Option<Arm> {
        match label {
            1 => Some(Arm::One),
            2 => Some(Arm::Two),
            _ => None,
        }
    }

    pub fn other(self) -> Arm {
        match self {
            Arm::One => Arm::Two,
            Arm::Two => Arm::One,
        }
    }
}

/// True arm success probabilities and the number of participants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub p1: f64,
    pub p2: f64,
    pub horizon: usize,
}

impl EnvSpec {
    pub fn new(p1: f64, p2: f64, horizon: usize) -> Result<Self> {
        let env = EnvSpec { p1, p2, horizon };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("p1", self.p1)?;
        check_probability("p2", self.p2)?;
        if self.horizon == 0 {
            return Err(Error::Domain("horizon must be at least 1".into()));
        }
        Ok(())
    }

    pub fn mean(&self, arm: Arm) -> f64 {
        match arm {
            Arm::One => self.p1,
            Arm::Two => self.p2,
        }
    }

    pub fn is_null(&self) -> bool {
        self.p1 == self.p2
    }

    pub fn swapped(&self) -> Self {
        EnvSpec {
            p1: self.p2,
            p2: self.p1,
            horizon: self.horizon,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    /// 1-based participant index.
    pub t: usize,
    pub arm: Arm,
    pub reward: u8,
    /// Probability of assigning arm 1 at this step, before the draw.
    pub pi1: f64,
}

impl StepRecord {
    /// Assignment probability of the arm that was actually pulled.
    pub fn pi_pulled(&self) -> f64 {
        match self.arm {
            Arm::One => self.pi1,
            Arm::Two => 1.0 - self.pi1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialLog {
    pub env: EnvSpec,
    pub policy: PolicySpec,
    pub steps: Vec<StepRecord>,
    /// Assignment probability of arm 1 for a hypothetical next participant.
    pub final_pi1: f64,
}

impl TrialLog {
    pub fn mean_reward(&self) -> f64 {
        if self.steps.is_empty() {
            return f64::NAN;
        }
        let total: u64 = self.steps.iter().map(|s| u64::from(s.reward)).sum();
        total as f64 / self.steps.len() as f64
    }

    /// The same trial with arm labels exchanged.
    pub fn swapped(&self) -> Self {
        TrialLog {
            env: self.env.swapped(),
            policy: self.policy.clone(),
            steps: self
                .steps
                .iter()
                .map(|s| StepRecord {
                    arm: s.arm.other(),
                    pi1: 1.0 - s.pi1,
                    ..*s
                })
                .collect(),
            final_pi1: 1.0 - self.final_pi1,
        }
    }
}
