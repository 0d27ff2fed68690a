//! The assign, observe, update loop for one experiment.

use crate::domain::{Arm, EnvSpec, StepRecord, TrialLog};
use crate::error::Result;
use crate::policy::{select_arm, PolicySpec, PosteriorState};
use crate::rng::{bernoulli_draw, RngStream};

/// Per-arm pull and success counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ArmCounts {
    pub n1: u64,
    pub n2: u64,
    pub s1: u64,
    pub s2: u64,
}

impl ArmCounts {
    pub fn new(n1: u64, s1: u64, n2: u64, s2: u64) -> Self {
        ArmCounts { n1, n2, s1, s2 }
    }

    pub fn pulls(&self, arm: Arm) -> u64 {
        match arm {
            Arm::One => self.n1,
            Arm::Two => self.n2,
        }
    }

    pub fn successes(&self, arm: Arm) -> u64 {
        match arm {
            Arm::One => self.s1,
            Arm::Two => self.s2,
        }
    }

    pub fn total(&self) -> u64 {
        self.n1 + self.n2
    }

    pub fn record(&mut self, arm: Arm, reward: u8) {
        let r = u64::from(reward);
        match arm {
            Arm::One => {
                self.n1 += 1;
                self.s1 += r;
            }
            Arm::Two => {
                self.n2 += 1;
                self.s2 += r;
            }
        }
    }

    pub fn swapped(&self) -> Self {
        ArmCounts {
            n1: self.n2,
            n2: self.n1,
            s1: self.s2,
            s2: self.s1,
        }
    }
}

/// Outcome of a streamed run: everything but the step list.
#[derive(Clone, Debug)]
pub struct TrialOutcome {
    pub counts: ArmCounts,
    pub final_pi1: f64,
    pub state: PosteriorState,
}

/// Runs one experiment, handing every step to `on_step` as it happens.
pub fn run_trial_with<F>(
    env: &EnvSpec,
    spec: &PolicySpec,
    stream: &mut RngStream,
    mut on_step: F,
) -> Result<TrialOutcome>
where
    F: FnMut(&StepRecord),
{
    env.validate()?;
    let mut state = PosteriorState::new(spec)?;
    let mut counts = ArmCounts::default();
    for t in 1..=env.horizon {
        let (arm, pi1) = select_arm(&state, spec, stream);
        let reward = bernoulli_draw(env.mean(arm), stream)?;
        state.observe(arm, reward, spec.ts_update_weight);
        counts.record(arm, reward);
        on_step(&StepRecord {
            t,
            arm,
            reward,
            pi1,
        });
    }
    Ok(TrialOutcome {
        counts,
        final_pi1: state.assignment_prob_arm1(spec),
        state,
    })
}

pub fn run_trial(env: &EnvSpec, spec: &PolicySpec, stream: &mut RngStream) -> Result<TrialLog> {
    let mut steps = Vec::with_capacity(env.horizon);
    let outcome = run_trial_with(env, spec, stream, |s| steps.push(*s))?;
    Ok(TrialLog {
        env: *env,
        policy: spec.clone(),
        steps,
        final_pi1: outcome.final_pi1,
    })
}

pub fn summarize(log: &TrialLog) -> ArmCounts {
    count_steps(&log.steps)
}

pub fn count_steps(steps: &[StepRecord]) -> ArmCounts {
    let mut counts = ArmCounts::default();
    for step in steps {
        counts.record(step.arm, step.reward);
    }
    counts
}
