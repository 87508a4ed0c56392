import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from collective_pu.elicitation import (
    argmax_reward,
    certify_support,
    check_support,
    entropy_J,
    grid_argmax,
    in_certified_region,
    link_pu,
    max_reward_J,
    reward_I,
    savage_rewards,
)
from collective_pu.model import EPS_CLAMP

STEP = 1e-4


def test_link_pu_examples():
    assert link_pu(0.7, 1, 0.3) == 0.7
    assert link_pu(0.25, 0, 0.25) == 1.0
    assert link_pu(0.6, 0, 0.1) == pytest.approx(0.5)


@given(st.floats(0, 1))
def test_link_pu_reduces_to_standard_link(v):
    assert link_pu(v, 0, 0.0) == pytest.approx(1 - v, abs=1e-15)


def test_reward_examples():
    assert reward_I(0.6, 0.5, 0.2) == pytest.approx(np.log(0.6), abs=1e-12)
    assert reward_I(0.6, 0.5, 0.2) == pytest.approx(-0.510826, abs=1e-6)
    assert reward_I(0.2, 0.0, 0.2) == 0.0
    assert reward_I(0.5, 1.0, 0.0) == pytest.approx(-0.693147, abs=1e-6)


@pytest.mark.parametrize("mu", [0.0, 0.05, 0.1, 0.2, 0.4, 0.9])
def test_zero_reward_calibration(mu):
    assert reward_I(mu, 0.0, mu) == 0.0
    assert reward_I(1 - EPS_CLAMP, 1.0, mu) == pytest.approx(0.0, abs=1e-6)


def test_max_reward_examples():
    assert max_reward_J(0.5, 0.2) == pytest.approx(np.log(0.6), abs=1e-12)
    assert max_reward_J(0.5, 0.2) == pytest.approx(reward_I(0.6, 0.5, 0.2), abs=1e-12)
    assert max_reward_J(0.1, 0.2) == pytest.approx(0.1 * np.log(0.2), abs=1e-12)
    assert max_reward_J(0.1, 0.2) == pytest.approx(-0.160944, abs=1e-6)
    assert max_reward_J(0.0, 0.0) == 0.0


def test_max_reward_beyond_range_reported_by_grid():
    # eta = 1: the unconstrained maximiser 1.2 is outside [0, 1]
    assert max_reward_J(1.0, 0.2) == pytest.approx(np.log(1.2), abs=1e-12)
    arg, best = grid_argmax(1.0, 0.2, STEP)
    assert arg == 1.0 and best == 0.0
    row = check_support(1.0, 0.2)
    assert not row.certified and row.grid_max_I < row.J


def test_savage_symmetric_point():
    i1, i0 = savage_rewards(entropy_J, 0.5)
    assert i1 == pytest.approx(-np.log(2), abs=1e-9)
    assert i0 == pytest.approx(-np.log(2), abs=1e-9)


def test_savage_three_quarters():
    J = float(entropy_J(0.75))
    dJ = np.log(3.0)  # closed-form derivative ln(eta / (1 - eta))
    assert J + 0.25 * dJ == pytest.approx(np.log(0.75), abs=1e-12)
    i1, i0 = savage_rewards(entropy_J, 0.75)
    assert i1 == pytest.approx(-0.287682, abs=1e-6)
    assert i1 == pytest.approx(np.log(0.75), abs=1e-8)
    assert i0 == pytest.approx(np.log(0.25), abs=1e-8)


@pytest.mark.parametrize("eta", [0.0, 0.3, 1.0])
def test_savage_affine_j(eta):
    a, b = -0.7, 0.4
    i1, i0 = savage_rewards(lambda e: a + b * e, eta)
    assert i1 == pytest.approx(a + b, abs=1e-9)
    assert i0 == pytest.approx(a, abs=1e-9)


def test_savage_pn_consistency_on_range():
    for eta in np.linspace(0.01, 0.99, 99):
        i1, i0 = savage_rewards(entropy_J, float(eta))
        assert abs(i1 - np.log(eta)) < 1e-6
        assert abs(i0 - np.log(1 - eta)) < 1e-6


@pytest.mark.parametrize(
    "eta, mu, expected",
    [(0.5, 0.2, 0.6), (0.1, 0.2, 0.2), (0.95, 0.2, 1.0)],
)
def test_argmax_reward_against_grid(eta, mu, expected):
    assert argmax_reward(eta, mu) == pytest.approx(expected, abs=1e-12)
    g, _ = grid_argmax(eta, mu, STEP)
    assert abs(g - expected) <= STEP + 1e-12


@pytest.mark.parametrize("mu", [0.05, 0.1, 0.2, 0.4])
def test_support_inequality(mu):
    rows = [r for r in certify_support([mu]) if r.certified]
    assert len(rows) >= 40
    for r in rows:
        assert r.grid_max_I <= r.J + 1e-9
        assert abs(r.grid_argmax - r.eta * (1 + mu)) <= STEP * (1 + 1e-9)
        assert r.passed


def test_threshold_branch_underestimates_between_thresholds():
    # mu/(1+mu) < eta <= mu: stationary point exists but the eta*ln(mu) branch is used
    mu, eta = 0.4, 0.3
    assert in_certified_region(eta, mu)
    _, best = grid_argmax(eta, mu, STEP)
    assert best > max_reward_J(eta, mu, branch="threshold") + 1e-4
    assert best <= max_reward_J(eta, mu, branch="stationary") + 1e-9


@given(st.floats(1e-3, 1.0), st.floats(0.0, 0.95))
def test_grid_never_beats_true_supremum(eta, mu):
    # eta is kept well above EPS_CLAMP: clamping ln(0) would otherwise lift the reward at 0.
    # wherever the interior maximiser lies in [0, 1], the stationary envelope is the supremum
    if eta * (1 + mu) <= 1:
        _, best = grid_argmax(eta, mu, 1e-3)
        assert best <= max_reward_J(eta, mu, branch="stationary") + 1e-9
