import numpy as np
import pytest

ACCEPTANCE_RESULTS = []


def central_diff(fn, x, h=1e-6):
    """Central finite-difference gradient of a scalar function of a flat vector."""
    x = np.asarray(x, dtype=np.float64)
    g = np.empty_like(x)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (fn(xp) - fn(xm)) / (2 * h)
    return g


def rel_err(a, b):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(line)


def random_loss_case(kind, rng):
    """Random batch for one loss; returns (analytic_grad, fd_grad) or None when near a kink.

    For nnPU with a negative inner term the returned gradient is the corrective
    -gamma * d(inner), so the oracle differentiates that expression instead.
    """
    from collective_pu import losses

    n_p, n_u = rng.integers(1, 9), rng.integers(1, 17)
    eta_p = rng.uniform(0.02, 0.98, n_p)
    eta_u = rng.uniform(0.02, 0.98, n_u)
    x0 = np.r_[eta_p, eta_u]
    pi = float(rng.uniform(0.05, 0.9))
    gamma = float(rng.uniform(0.5, 2.0))
    split = lambda x: losses.BatchView(x[:n_p], x[n_p:])

    if kind == "pn":
        y = rng.integers(0, 2, n_p + n_u)
        fn = lambda x: losses.pn_log_loss(x, y).value
        res = losses.pn_log_loss(x0, y)
    elif kind == "naive":
        fn = lambda x: losses.naive_negative_loss(split(x)).value
        res = losses.naive_negative_loss(split(x0))
    elif kind == "upu":
        fn = lambda x: losses.upu_risk(split(x), pi).value
        res = losses.upu_risk(split(x0), pi)
    elif kind == "nnpu":
        res = losses.nnpu_risk(split(x0), pi, gamma)
        inner = res.aux["inner"]
        if abs(inner) < 1e-4:
            return None
        if inner > 0:
            fn = lambda x: losses.nnpu_risk(split(x), pi, gamma).value
        else:
            fn = lambda x: -gamma * losses.upu_risk(split(x), pi).aux["inner"]
    elif kind == "cpu":
        mu = float(rng.uniform(0.0, 0.95))
        res = losses.cpu_collective_loss(split(x0), mu)
        if abs(res.aux["mean_u"] - mu) < 1e-4:
            return None
        fn = lambda x: losses.cpu_collective_loss(split(x), mu).value
    else:
        raise ValueError(kind)
    return res.grad, central_diff(fn, x0, h=1e-6)


def gradient_suite(kind, n_batches=100, seed=0):
    """Max relative error over ``n_batches`` random batches that avoid the kinks."""
    rng = np.random.default_rng(seed)
    worst, done = 0.0, 0
    while done < n_batches:
        case = random_loss_case(kind, rng)
        if case is None:
            continue
        worst = max(worst, rel_err(*case))
        done += 1
    return worst
