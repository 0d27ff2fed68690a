//! Probability that one Beta-distributed arm mean exceeds another.
//!
//! Three routes to the same quantity:
//! - [`posterior_prob_optimal`]: adaptive Gauss-Kronrod quadrature, any
//!   positive parameters;
//! - [`posterior_prob_optimal_closed_form`]: finite sum when an alpha is a
//!   whole number;
//! - [`ProbOptimalTracker`]: exact unit-step recurrences, O(1) per update,
//!   used inside simulations.

use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

use super::BetaParams;
use crate::domain::Arm;
use crate::error::Result;

const ABS_TOL: f64 = 1e-10;
const MAX_INTERVALS: usize = 4000;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

fn gauss_kronrod_15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> (f64, f64) {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Globally adaptive integration: repeatedly bisects the panel with the
/// largest error estimate until the summed estimate drops below `tol`.
fn integrate_adaptive<F: Fn(f64) -> f64>(f: &F, breakpoints: &[f64], tol: f64) -> f64 {
    let mut panels: Vec<(f64, f64, f64, f64)> = breakpoints
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let (value, err) = gauss_kronrod_15(f, w[0], w[1]);
            (w[0], w[1], value, err)
        })
        .collect();
    while panels.len() < MAX_INTERVALS {
        let total_err: f64 = panels.iter().map(|p| p.3).sum();
        if total_err <= tol {
            break;
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .3.total_cmp(&b.1 .3))
            .expect("at least one panel");
        let (lo, hi, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gauss_kronrod_15(f, lo, mid);
        let (v2, e2) = gauss_kronrod_15(f, mid, hi);
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
    panels.iter().map(|p| p.2).sum()
}

/// P(theta_1 > theta_2) for independent theta_k ~ Beta(alpha_k, beta_k).
///
/// Integrates `pdf_2(x) * (1 - I_x(alpha_1, beta_1))` over `[0, 1]` after the
/// substitution `x = sin^2(phi)`, which removes the endpoint singularities of
/// Beta densities with parameters of one half. Panels are seeded at both
/// posteriors' means plus a ladder of standard deviations so that sharply
/// concentrated posteriors are resolved. Absolute tolerance is 1e-10.
pub fn posterior_prob_optimal(post1: BetaParams, post2: BetaParams) -> Result<f64> {
    post1.validate()?;
    post2.validate()?;
    if post1 == post2 {
        return Ok(0.5);
    }
    let BetaParams { alpha: a, beta: b } = post1;
    let BetaParams { alpha: c, beta: d } = post2;
    let ln_norm = std::f64::consts::LN_2 - ln_beta(c, d);
    let integrand = |phi: f64| {
        let (s, co) = phi.sin_cos();
        let density = (ln_norm + (2.0 * c - 1.0) * s.ln() + (2.0 * d - 1.0) * co.ln()).exp();
        if density == 0.0 {
            return 0.0;
        }
        // 1 - I_x(a, b) = I_{1-x}(b, a), with 1 - x = cos^2(phi)
        density * beta_reg(b, a, co * co)
    };

    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut breaks = vec![0.0, half_pi];
    for post in [post1, post2] {
        let (m, sd) = (post.mean(), post.variance().sqrt());
        for k in [-16.0, -8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0, 16.0] {
            let x: f64 = m + k * sd;
            if x > 0.0 && x < 1.0 {
                breaks.push(x.sqrt().asin());
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|x, y| (*x - *y).abs() < 1e-12);

    Ok(integrate_adaptive(&integrand, &breaks, ABS_TOL).clamp(0.0, 1.0))
}

fn whole(v: f64) -> Option<u64> {
    (v.fract() == 0.0 && (1.0..=1e7).contains(&v)).then_some(v as u64)
}

/// Finite-sum evaluation, available when either alpha is a whole number.
/// Sums over the smaller whole alpha. Returns `Ok(None)` when neither is.
pub fn posterior_prob_optimal_closed_form(
    post1: BetaParams,
    post2: BetaParams,
) -> Result<Option<f64>> {
    post1.validate()?;
    post2.validate()?;
    // P(X > Y) = sum_{i<a} B(c+i, b+d) / ((b+i) B(1+i, b) B(c, d)) for X~Beta(a,b), Y~Beta(c,d)
    let upper_tail = |x: BetaParams, y: BetaParams, terms: u64| -> f64 {
        let base = ln_beta(y.alpha, y.beta);
        (0..terms)
            .map(|i| {
                let i = i as f64;
                (ln_beta(y.alpha + i, x.beta + y.beta)
                    - (x.beta + i).ln()
                    - ln_beta(1.0 + i, x.beta)
                    - base)
                    .exp()
            })
            .sum()
    };
    let value = match (whole(post1.alpha), whole(post2.alpha)) {
        (Some(a), Some(c)) if c < a => 1.0 - upper_tail(post2, post1, c),
        (Some(a), _) => upper_tail(post1, post2, a),
        (None, Some(c)) => 1.0 - upper_tail(post2, post1, c),
        (None, None) => return Ok(None),
    };
    Ok(Some(value.clamp(0.0, 1.0)))
}

/// Maintains P(theta_1 > theta_2) while the posteriors receive unit
/// increments, using
///
/// ```text
/// g(a+1,b,c,d) = g + h/a     g(a,b+1,c,d) = g - h/b
/// g(a,b,c+1,d) = g - h/c     g(a,b,c,d+1) = g + h/d
/// h = B(a+c, b+d) / (B(a,b) B(c,d))
/// ```
#[derive(Clone, Debug)]
pub struct ProbOptimalTracker {
    post: [BetaParams; 2],
    value: f64,
}

impl ProbOptimalTracker {
    pub fn new(post1: BetaParams, post2: BetaParams) -> Result<Self> {
        let value = posterior_prob_optimal(post1, post2)?;
        Ok(ProbOptimalTracker {
            post: [post1, post2],
            value,
        })
    }

    pub fn value(&self) -> f64 {
        self.value.clamp(0.0, 1.0)
    }

    pub fn posteriors(&self) -> [BetaParams; 2] {
        self.post
    }

    fn h(&self) -> f64 {
        let [p, q] = self.post;
        (ln_beta(p.alpha + q.alpha, p.beta + q.beta)
            - ln_beta(p.alpha, p.beta)
            - ln_beta(q.alpha, q.beta))
        .exp()
    }

    pub fn increment_alpha(&mut self, arm: Arm) {
        let h = self.h();
        let post = &mut self.post[arm.index()];
        match arm {
            Arm::One => self.value += h / post.alpha,
            Arm::Two => self.value -= h / post.alpha,
        }
        post.alpha += 1.0;
    }

    pub fn increment_beta(&mut self, arm: Arm) {
        let h = self.h();
        let post = &mut self.post[arm.index()];
        match arm {
            Arm::One => self.value -= h / post.beta,
            Arm::Two => self.value += h / post.beta,
        }
        post.beta += 1.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;
    use rand_distr::{Beta, Distribution};

    fn b(alpha: f64, beta: f64) -> BetaParams {
        BetaParams::new(alpha, beta).unwrap()
    }

    /// Independent Monte Carlo oracle: fraction of joint draws with theta_1 > theta_2.
    fn monte_carlo(p: BetaParams, q: BetaParams, draws: usize, seed: u64) -> (f64, f64) {
        let mut s = derive_stream(seed, 99, 0);
        let d1 = Beta::new(p.alpha, p.beta).unwrap();
        let d2 = Beta::new(q.alpha, q.beta).unwrap();
        let wins = (0..draws)
            .filter(|_| d1.sample(s.rng()) > d2.sample(s.rng()))
            .count();
        let rate = wins as f64 / draws as f64;
        (rate, (rate * (1.0 - rate) / draws as f64).sqrt())
    }

    #[test]
    fn exchangeable_pairs_are_even() {
        assert_eq!(
            posterior_prob_optimal(b(1.0, 1.0), b(1.0, 1.0)).unwrap(),
            0.5
        );
        assert_eq!(
            posterior_prob_optimal(b(5.0, 5.0), b(5.0, 5.0)).unwrap(),
            0.5
        );
    }

    #[test]
    fn small_closed_forms() {
        // integral_0^1 2x * x dx = 2/3
        let p = posterior_prob_optimal(b(2.0, 1.0), b(1.0, 1.0)).unwrap();
        assert!((p - 2.0 / 3.0).abs() < 1e-10, "{p}");
        let p = posterior_prob_optimal(b(1.0, 2.0), b(1.0, 1.0)).unwrap();
        assert!((p - 1.0 / 3.0).abs() < 1e-10, "{p}");
    }

    #[test]
    fn matches_monte_carlo_on_concentrated_posteriors() {
        let (p, q) = (b(40.0, 60.0), b(30.0, 70.0));
        let exact = posterior_prob_optimal(p, q).unwrap();
        let (mc, se) = monte_carlo(p, q, 1_000_000, 5);
        assert!(
            (exact - mc).abs() < 3.0 * se,
            "exact {exact} mc {mc} se {se}"
        );
    }

    #[test]
    fn jeffreys_like_parameters_match_monte_carlo() {
        let (p, q) = (b(0.5, 0.5), b(3.5, 1.5));
        let exact = posterior_prob_optimal(p, q).unwrap();
        let (mc, se) = monte_carlo(p, q, 1_000_000, 6);
        assert!(
            (exact - mc).abs() < 3.0 * se,
            "exact {exact} mc {mc} se {se}"
        );
    }

    #[test]
    fn closed_form_agrees_with_quadrature() {
        let cases = [
            (b(2.0, 1.0), b(1.0, 1.0)),
            (b(40.0, 60.0), b(30.0, 70.0)),
            (b(400.0, 388.0), b(3.0, 4.0)),
            (b(7.0, 0.5), b(2.5, 3.0)),
            (b(0.5, 7.0), b(12.0, 3.5)),
            (b(220.0, 180.0), b(201.0, 186.0)),
        ];
        for (p, q) in cases {
            let quad = posterior_prob_optimal(p, q).unwrap();
            let closed = posterior_prob_optimal_closed_form(p, q).unwrap().unwrap();
            assert!(
                (quad - closed).abs() < 1e-9,
                "{p:?} {q:?}: {quad} vs {closed}"
            );
        }
        assert!(posterior_prob_optimal_closed_form(b(0.5, 1.0), b(1.5, 2.0))
            .unwrap()
            .is_none());
    }

    #[test]
    fn tracker_follows_quadrature_over_a_long_walk() {
        let mut tracker = ProbOptimalTracker::new(b(0.5, 0.5), b(0.5, 0.5)).unwrap();
        let mut s = derive_stream(11, 0, 0);
        for step in 0..800 {
            let arm = if s.uniform() < 0.7 {
                Arm::One
            } else {
                Arm::Two
            };
            if s.uniform() < 0.5 {
                tracker.increment_alpha(arm);
            } else {
                tracker.increment_beta(arm);
            }
            if step % 97 == 0 {
                let [p, q] = tracker.posteriors();
                let direct = posterior_prob_optimal(p, q).unwrap();
                assert!((tracker.value() - direct).abs() < 1e-9, "step {step}");
            }
        }
    }

    #[test]
    fn rejects_non_positive_parameters() {
        let bad = BetaParams {
            alpha: 0.0,
            beta: 1.0,
        };
        assert!(posterior_prob_optimal(bad, b(1.0, 1.0)).is_err());
        assert!(BetaParams::new(1.0, -2.0).is_err());
    }
}
