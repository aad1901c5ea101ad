import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groundmix.grpo import (
    GrpoConfig,
    RolloutGroup,
    clipped_term,
    group_advantages,
    group_objective,
    kl_estimate,
    prob_ratio,
)


def test_advantage_examples():
    assert group_advantages([1.0, 1.0, 1.0, 1.0]) is None
    assert np.allclose(group_advantages([0, 1]), [-1, 1], atol=1e-12)
    assert np.allclose(group_advantages([0, 1, 1, 2]), [-math.sqrt(2), 0, 0, math.sqrt(2)], atol=1e-9)


def test_advantage_errors():
    with pytest.raises(ValueError):
        group_advantages([1.0])
    with pytest.raises(ValueError):
        group_advantages([0.0, float("nan")])


def test_ratio_examples():
    assert prob_ratio(-1.3, -1.3) == 1.0
    assert prob_ratio(math.log(2), 0.0) == pytest.approx(2.0, abs=1e-15)
    assert prob_ratio(-math.log(4), 0.0) == pytest.approx(0.25, abs=1e-15)
    assert prob_ratio(1e6, 0.0) == math.exp(50)
    with pytest.raises(ValueError):
        prob_ratio(float("inf"), 0.0)


def test_clipped_examples():
    assert clipped_term(1.0, -0.7) == -0.7
    assert clipped_term(1.5, 1.0, 0.2) == pytest.approx(1.2)
    assert clipped_term(0.5, -1.0, 0.2) == pytest.approx(-0.8)
    with pytest.raises(ValueError):
        clipped_term(1.0, 1.0, 0.0)


def test_kl_examples():
    assert kl_estimate(-2.0, -2.0) == 0.0
    assert kl_estimate(math.log(2), 0.0) == pytest.approx(2 - math.log(2) - 1, abs=1e-12)
    assert abs(kl_estimate(math.log(2), 0.0) - 0.30685) < 1e-5
    assert abs(kl_estimate(math.log(0.5), 0.0) - 0.19315) < 1e-5


def test_kl_tiny_positive():
    assert kl_estimate(1e-9, 0.0) > 0.0
    assert kl_estimate(-1e-12, 0.0) > 0.0
    assert kl_estimate(2.3e-16, 0.0) > 0.0  # smallest d with exp(d) != 1


def test_objective_examples():
    g = RolloutGroup([0, 1], [0.0, 0.0], [0.0, 0.0], [math.log(2)] * 2, "g")
    res = group_objective(g, GrpoConfig(beta=0.01))
    assert res.objective == pytest.approx(-0.01 * (1 - math.log(2)), abs=1e-12)
    assert abs(res.objective - (-0.0030685)) < 1e-7
    assert group_objective(RolloutGroup([1, 1, 1], [0] * 3, [0] * 3, [0] * 3)).skipped
    plain = group_objective(RolloutGroup([0, 2, 1, 5], [0.0] * 4, [0.0] * 4, [0.0] * 4))
    assert abs(plain.objective) < 1e-12


def test_group_validation_and_dict():
    with pytest.raises(ValueError):
        RolloutGroup([0.0], [0.0], [0.0], [0.0])
    with pytest.raises(ValueError):
        RolloutGroup([0.0, 1.0], [0.0], [0.0, 0.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        GrpoConfig(epsilon=0)
    with pytest.raises(ValueError):
        GrpoConfig(beta=-1)
    g = RolloutGroup.from_dict({"schema": "groundmix.group/v1", "group_id": "a", "rewards": [0, 1], "logp_current": [0, 0], "logp_ref": [0, 0]})
    d = group_objective(g).to_dict()
    assert d["group_id"] == "a" and d["ratios"] == [1.0, 1.0] and not d["skipped"]


@given(st.lists(st.floats(0, 2, allow_nan=False), min_size=2, max_size=16))
@settings(max_examples=300)
def test_advantage_normalization(rewards):
    a = group_advantages(rewards)
    if len(set(rewards)) == 1:
        assert a is None
    else:
        assert abs(a.mean()) < 1e-9
        assert abs(a.std() - 1) < 1e-9


@given(st.floats(-60, 60), st.floats(-60, 60))
def test_kl_non_negative(a, b):
    v = kl_estimate(a, b)
    assert v >= 0
    d = a - b
    if d == 0:
        assert v == 0
    elif d * d / 2 > 0:  # true value representable
        assert v > 0
    if v == 0:
        assert math.exp(d) == 1.0


@given(st.floats(0.01, 10), st.floats(-3, 3), st.floats(0.05, 0.5))
def test_clipped_is_pessimistic(r, adv, eps):
    v = clipped_term(r, adv, eps)
    assert v <= r * adv + 1e-12
    assert v <= min(max(r, 1 - eps), 1 + eps) * adv + 1e-12
