use bandit_inference::engine::count_steps;
use bandit_inference::inference::{
    bayes_factor, ipw_estimate, mle_estimate, wald_statistic, welch_statistic,
};
use bandit_inference::io::{read_trial_logs, write_trial_logs};
use bandit_inference::policy::{
    posterior_prob_optimal, posterior_prob_optimal_closed_form, BetaParams,
};
use bandit_inference::{derive_stream, run_trial, Arm, ArmCounts, EnvSpec, PolicySpec, StepRecord};
use proptest::prelude::*;

fn beta(a: f64, b: f64) -> BetaParams {
    BetaParams::new(a, b).unwrap()
}

fn counts() -> impl Strategy<Value = ArmCounts> {
    (1u64..400, 1u64..400)
        .prop_flat_map(|(n1, n2)| (Just(n1), 0..=n1, Just(n2), 0..=n2))
        .prop_map(|(n1, s1, n2, s2)| ArmCounts::new(n1, s1, n2, s2))
}

proptest! {
    #[test]
    fn prob_optimal_complements(a in 0.3f64..400.0, b in 0.3f64..400.0, c in 0.3f64..400.0, d in 0.3f64..400.0) {
        let p = posterior_prob_optimal(beta(a, b), beta(c, d)).unwrap();
        let q = posterior_prob_optimal(beta(c, d), beta(a, b)).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!((p + q - 1.0).abs() < 1e-9, "{} + {}", p, q);
    }

    #[test]
    fn closed_form_agrees_with_quadrature(a in 1u32..120, b in 1u32..120, c in 1u32..120, d in 1u32..120) {
        let (p1, p2) = (beta(a as f64, b as f64), beta(c as f64, d as f64));
        let exact = posterior_prob_optimal_closed_form(p1, p2).unwrap().unwrap();
        let quad = posterior_prob_optimal(p1, p2).unwrap();
        prop_assert!((exact - quad).abs() < 1e-9, "{} vs {}", exact, quad);
    }

    #[test]
    fn wald_and_welch_flip_sign_under_arm_swap(c in counts()) {
        let sw = c.swapped();
        let z = wald_statistic(&mle_estimate(&c), &c);
        let z_sw = wald_statistic(&mle_estimate(&sw), &sw);
        prop_assert_eq!(z.map(|v| -v), z_sw);
        let t = welch_statistic(&c);
        let t_sw = welch_statistic(&sw);
        prop_assert_eq!(t.map(|w| (-w.t, w.df)), t_sw.map(|w| (w.t, w.df)));
    }

    #[test]
    fn bayes_factor_is_label_free(c in counts(), a in 0.5f64..3.0, b in 0.5f64..3.0) {
        let x = bayes_factor(&c, a, b);
        let y = bayes_factor(&c.swapped(), a, b);
        prop_assert!(x > 0.0 && x.is_finite());
        prop_assert!(((x - y) / x).abs() < 1e-12);
    }

    #[test]
    fn trial_log_round_trips(seed in any::<u64>(), horizon in 1usize..60, pick in 0usize..3) {
        let policy = [PolicySpec::uniform(), PolicySpec::thompson(1.0, 1.0), PolicySpec::epsilon_greedy(0.2)][pick].clone();
        let env = EnvSpec::new(0.3, 0.6, horizon).unwrap();
        let logs: Vec<Vec<StepRecord>> = (0..3)
            .map(|sim| run_trial(&env, &policy, &mut derive_stream(seed, 1, sim)).unwrap().steps)
            .collect();
        let refs: Vec<(usize, &[StepRecord])> = logs.iter().enumerate().map(|(i, s)| (i, s.as_slice())).collect();
        let mut buf = Vec::new();
        write_trial_logs(&mut buf, &refs).unwrap();
        let back = read_trial_logs(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), 3);
        for ((id, steps), original) in back.iter().zip(&logs) {
            prop_assert_eq!(steps, original, "sim {}", id);
        }
    }
}

#[test]
fn uniform_allocation_balances_arms() {
    let env = EnvSpec::new(0.5, 0.5, 785).unwrap();
    let sims = 2000;
    let total: u64 = (0..sims)
        .map(|sim| {
            count_steps(
                &run_trial(&env, &PolicySpec::uniform(), &mut derive_stream(3, 0, sim))
                    .unwrap()
                    .steps,
            )
            .n1
        })
        .sum();
    let mean = total as f64 / sims as f64;
    // sd of the mean is sqrt(785 / 4 / 2000) ~ 0.31
    assert!((mean - 392.5).abs() < 1.3, "{mean}");
}

#[test]
fn ipw_equals_mle_under_uniform_allocation() {
    let env = EnvSpec::new(0.3, 0.7, 301).unwrap();
    for sim in 0..200 {
        let log = run_trial(&env, &PolicySpec::uniform(), &mut derive_stream(8, 2, sim)).unwrap();
        let mle = mle_estimate(&count_steps(&log.steps));
        let ipw = ipw_estimate(&log).unwrap();
        assert_eq!((mle.p1_hat, mle.p2_hat), (ipw.p1_hat, ipw.p2_hat));
    }
}

#[test]
fn epsilon_greedy_probabilities_take_three_values() {
    let eps = 0.1;
    let env = EnvSpec::new(0.55, 0.45, 400).unwrap();
    for sim in 0..50 {
        let log = run_trial(
            &env,
            &PolicySpec::epsilon_greedy(eps),
            &mut derive_stream(4, 5, sim),
        )
        .unwrap();
        for step in &log.steps {
            assert!(
                [eps / 2.0, 0.5, 1.0 - eps / 2.0].contains(&step.pi1),
                "sim {sim} t {}: {}",
                step.t,
                step.pi1
            );
        }
        assert_eq!(log.steps[0].pi1, 0.5);
    }
}

#[test]
fn thompson_first_step_is_even_and_probabilities_match_posterior() {
    let env = EnvSpec::new(0.7, 0.3, 120).unwrap();
    let log = run_trial(
        &env,
        &PolicySpec::thompson(1.0, 1.0),
        &mut derive_stream(6, 0, 0),
    )
    .unwrap();
    assert_eq!(log.steps[0].pi1, 0.5);
    // recompute each step's pi1 from the counts seen before it
    let (mut a, mut b) = ([1.0f64; 2], [1.0f64; 2]);
    for step in &log.steps {
        let expect = posterior_prob_optimal(beta(a[0], b[0]), beta(a[1], b[1])).unwrap();
        assert!(
            (step.pi1 - expect).abs() < 1e-9,
            "t {}: {} vs {expect}",
            step.t,
            step.pi1
        );
        let k = step.arm.index();
        a[k] += f64::from(step.reward);
        b[k] += f64::from(1 - step.reward);
    }
    let last = posterior_prob_optimal(beta(a[0], b[0]), beta(a[1], b[1])).unwrap();
    assert!((log.final_pi1 - last).abs() < 1e-9);
}

#[test]
fn thompson_favours_better_arm() {
    let env = EnvSpec::new(0.8, 0.2, 300).unwrap();
    let log = run_trial(
        &env,
        &PolicySpec::thompson(1.0, 1.0),
        &mut derive_stream(1, 0, 0),
    )
    .unwrap();
    let c = count_steps(&log.steps);
    assert!(c.n1 > c.n2 * 3, "{c:?}");
    assert!(log.final_pi1 > 0.99);
    assert_eq!(
        log.steps.iter().filter(|s| s.arm == Arm::One).count() as u64,
        c.n1
    );
}
