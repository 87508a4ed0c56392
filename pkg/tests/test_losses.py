import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from collective_pu.losses import (
    BatchView,
    cpu_collective_loss,
    naive_negative_loss,
    nnpu_risk,
    pn_log_loss,
    upu_risk,
    zero_one_loss,
)
from collective_pu.model import EPS_CLAMP

from conftest import central_diff, gradient_suite

LN2 = np.log(2.0)
probs = st.floats(0.01, 0.99)


def test_pn_log_loss_examples():
    r = pn_log_loss(0.5, 1)
    assert r.value == pytest.approx(LN2) and r.grad[0] == pytest.approx(-2.0)
    assert pn_log_loss(1 - EPS_CLAMP, 1).value == pytest.approx(0.0, abs=1e-6)
    r = pn_log_loss(0.9, 0)
    assert r.value == pytest.approx(2.302585, abs=1e-6) and r.grad[0] == pytest.approx(10.0)


def test_zero_one_examples():
    assert zero_one_loss(0.6, 1) == 0
    assert zero_one_loss(0.6, 0) == 1
    assert zero_one_loss(0.5, 1) == 0
    assert zero_one_loss(0.5, 0) == 1
    assert list(zero_one_loss(np.array([0.2, 0.7]), np.array([0, 0]))) == [0, 1]


def test_upu_examples():
    assert upu_risk(BatchView([0.5], [0.5]), 0.5).value == pytest.approx(LN2)
    v = upu_risk(BatchView([0.9], [0.1]), 1.0).value
    assert v == pytest.approx(2 * -np.log(0.9) - -np.log(0.1), abs=1e-12)
    assert v == pytest.approx(-2.091864, abs=1e-6)
    # pi_u = 0: plain all-negative loss on U
    u = np.array([0.2, 0.4])
    assert upu_risk(BatchView([], u), 0.0).value == pytest.approx(np.mean(-np.log(1 - u)))
    with pytest.raises(ValueError, match="unlabeled part required"):
        upu_risk(BatchView([0.5], []), 0.3)


def test_nnpu_examples():
    r = nnpu_risk(BatchView([0.5], [0.5]), 0.5)
    assert r.aux["inner"] == pytest.approx(0.5 * LN2) and r.value == pytest.approx(LN2)
    r = nnpu_risk(BatchView([0.9], [0.1]), 1.0)
    assert r.aux["inner"] == pytest.approx(-2.197225, abs=1e-6)
    assert r.value == pytest.approx(-np.log(0.9), abs=1e-12)
    assert r.value == pytest.approx(0.105361, abs=1e-6)
    # corrective gradient: -gamma * d(inner)
    g = nnpu_risk(BatchView([0.9], [0.1]), 1.0, gamma=2.0).grad
    np.testing.assert_allclose(g, -2.0 * np.array([-1 / 0.1, 1 / 0.9]))


def test_nnpu_inner_exactly_zero():
    # inner = mean_U[-ln(1-u)] - pi * (-ln(1-p)) = 0 with u = p and pi = 1
    b = BatchView([0.3], [0.3])
    r = nnpu_risk(b, 1.0)
    assert r.aux["inner"] == 0.0
    assert r.value == pytest.approx(-np.log(0.3))
    np.testing.assert_allclose(r.grad, [-1 / 0.3, 0.0])


def test_cpu_examples():
    hi = 1 - EPS_CLAMP
    assert cpu_collective_loss(BatchView([hi, hi], [0.1, 0.3]), 0.2).value == pytest.approx(0.0, abs=1e-6)
    r = cpu_collective_loss(BatchView([], [0.6, 0.6]), 0.1)
    assert r.value == pytest.approx(LN2)
    assert r.aux["mean_u"] == pytest.approx(0.6)
    np.testing.assert_allclose(r.grad, [1.0, 1.0])
    fd = central_diff(lambda x: cpu_collective_loss(BatchView([], x), 0.1).value, np.array([0.6, 0.6]))
    np.testing.assert_allclose(fd, [1.0, 1.0], rtol=1e-6)


def test_cpu_kink_subgradient_zero():
    r = cpu_collective_loss(BatchView([0.5], [0.25, 0.75]), 0.5)
    np.testing.assert_array_equal(r.grad[1:], 0.0)


def test_cpu_errors():
    with pytest.raises(ValueError):
        BatchView([], [])
    with pytest.raises(ValueError):
        cpu_collective_loss(BatchView([0.5], [0.5]), 1.0)


def test_naive_examples():
    assert naive_negative_loss(BatchView([0.5], [0.5])).value == pytest.approx(2 * LN2)
    assert naive_negative_loss(BatchView([1 - EPS_CLAMP], [EPS_CLAMP])).value == pytest.approx(0.0, abs=1e-6)
    assert naive_negative_loss(BatchView([], [1 - EPS_CLAMP])).value == pytest.approx(-np.log(EPS_CLAMP), rel=1e-6)
    assert -np.log(EPS_CLAMP) == pytest.approx(16.118, abs=1e-3)


@pytest.mark.parametrize("kind", ["pn", "naive", "upu", "nnpu", "cpu"])
def test_gradients_match_finite_differences(kind):
    assert gradient_suite(kind, n_batches=30, seed=1) < 1e-5


@settings(max_examples=200)
@given(st.lists(probs, min_size=1, max_size=6), st.lists(probs, min_size=1, max_size=6), st.floats(0, 1))
def test_nnpu_non_negative_and_agrees_with_upu(p, u, pi):
    b = BatchView(p, u)
    nn, up = nnpu_risk(b, pi), upu_risk(b, pi)
    assert nn.value >= 0
    if nn.aux["inner"] >= 0:
        assert nn.value == pytest.approx(up.value, abs=1e-12)


@settings(max_examples=200)
@given(st.lists(probs, max_size=6), st.lists(probs, min_size=1, max_size=6), st.floats(0, 0.99))
def test_cpu_non_negative(p, u, mu):
    assert cpu_collective_loss(BatchView(p, u), mu).value >= 0


@settings(max_examples=100)
@given(st.lists(probs, min_size=2, max_size=8), st.floats(0, 0.99), st.randoms(use_true_random=False))
def test_cpu_permutation_and_redistribution(u, mu, rnd):
    u = np.array(u)
    base = cpu_collective_loss(BatchView([], u), mu).value
    perm = u.copy()
    rnd.shuffle(perm)
    assert cpu_collective_loss(BatchView([], perm), mu).value == pytest.approx(base, abs=1e-12)
    # mean-preserving transfer between two members
    i, j = 0, 1
    t = min(u[i] - 0.005, 0.995 - u[j]) * rnd.random()
    moved = u.copy()
    moved[i] -= t
    moved[j] += t
    assert cpu_collective_loss(BatchView([], moved), mu).value == pytest.approx(base, abs=1e-12)


@settings(max_examples=100)
@given(st.lists(probs, min_size=1, max_size=5), st.integers(2, 5), st.floats(0, 0.99))
def test_cpu_batch_size_scaling(u, k, mu):
    u = np.array(u)
    assume(abs(u.mean() - mu) > 1e-9)
    small = cpu_collective_loss(BatchView([], u), mu)
    big = cpu_collective_loss(BatchView([], np.tile(u, k)), mu)
    assert big.value == pytest.approx(small.value, abs=1e-12)
    np.testing.assert_allclose(big.grad[: len(u)], small.grad / k, rtol=1e-12)
