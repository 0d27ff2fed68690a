"""Smoke test for the bandit_inference extension module.

Build and install first, e.g. ``maturin develop --release -m crates/py/Cargo.toml``
or ``pip install`` a wheel from ``maturin build``, then run
``python python/smoke_test.py`` (or ``pytest python/``).
"""

import json
import math

import bandit_inference as bi


def test_policy_round_trip():
    assert str(bi.PolicySpec("ts")) == "ts:alpha=1,beta=1"
    assert str(bi.PolicySpec.epsilon_greedy(0.1)) == "eg:eps=0.1"
    assert str(bi.PolicySpec.uniform()) == "ur"
    try:
        bi.PolicySpec("bogus")
    except ValueError:
        pass
    else:
        raise AssertionError("bad policy accepted")


def test_trial_is_deterministic():
    env = bi.EnvSpec(0.55, 0.45, 200)
    a = bi.run_trial(env, bi.PolicySpec("ts"), seed=3, sim=1)
    b = bi.run_trial(env, bi.PolicySpec("ts"), seed=3, sim=1)
    assert a.arms == b.arms and a.pi1 == b.pi1
    assert len(a) == 200 and set(a.arms) <= {1, 2}
    n1, s1, n2, s2 = a.counts()
    assert n1 + n2 == 200 and s1 + s2 == sum(a.rewards)
    assert a.pi1[0] == 0.5


def test_estimators_and_tests():
    # (3/4 - 1/3) / sqrt(3/64 + 2/27)
    z = bi.wald_statistic(4, 3, 3, 1)
    assert abs(z - (0.75 - 1 / 3) / math.sqrt(0.75 * 0.25 / 4 + (2 / 9) / 3)) < 1e-12
    assert bi.wald_statistic(3, 2, 0, 0) is None
    assert bi.mle_estimate(3, 2, 0, 0) == (2 / 3, None)
    # literal form of the worked example: B(2,1) B(1,2) / B(3,3) = 7.5
    assert abs(bi.bayes_factor(1, 1, 1, 0, normalized=False) - 7.5) < 1e-12
    assert abs(bi.bayes_factor(1, 1, 1, 0) - 7.5 / 6) < 1e-12
    t, df = bi.welch_statistic(100, 60, 100, 50)
    assert t < 0 < df
    # IPW with constant pi equals the sample means
    assert bi.ipw_estimate([1, 2, 1, 2], [1, 0, 0, 0], [0.5] * 4) == (0.5, 0.0)


def test_prob_optimal_against_monte_carlo():
    import random

    rng = random.Random(7)
    draws = 200_000
    hits = sum(rng.betavariate(40, 60) > rng.betavariate(30, 70) for _ in range(draws))
    p = bi.posterior_prob_optimal(40, 60, 30, 70)
    assert abs(p - hits / draws) < 4 * math.sqrt(p * (1 - p) / draws)
    assert abs(p + bi.posterior_prob_optimal(30, 70, 40, 60) - 1) < 1e-9


def test_calibration_and_cell():
    cal = bi.calibrate(0.5, 200, bi.PolicySpec.uniform(), 1000, alpha=0.05, seed=1)
    assert -2.3 < cal.lower < -1.6 and 1.6 < cal.upper < 2.3
    record = json.loads(cal.to_json())
    assert set(record) == {
        "null_p", "n", "policy", "n_sims", "alpha", "lower", "upper", "undefined_excluded", "base_seed",
    }
    again = bi.CriticalValues.from_json(cal.to_json())
    assert (again.lower, again.upper) == (cal.lower, cal.upper)

    summary = bi.run_cell(bi.EnvSpec(0.5, 0.5, 200), bi.PolicySpec.uniform(), 400, seed=2, calibration=cal)
    names = [t["test"] for t in summary["tests"]]
    assert names == ["wald", "welch", "bayes_factor", "ipw_wald", "induced_wald"]
    wald = summary["tests"][0]
    assert 0.0 <= wald["rate"] <= 0.15 and wald["n_sims"] == 400


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"ok  {name}")
