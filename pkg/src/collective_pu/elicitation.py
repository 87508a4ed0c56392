"""Reward functions for eliciting a PU posterior, and their numerical checks.

The PU reward for a prediction ``eta_hat`` when the true posterior is ``eta`` is

    I(eta_hat, eta) = eta * ln(eta_hat) + (1 - eta) * ln(1 - |eta_hat - mu_p|)

Its pointwise maximum over ``eta_hat`` is the envelope ``J``. Everything here
is vectorised over ``eta_hat``; ``eta`` and ``mu_p`` are scalars.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Callable

import numpy as np

from .model import EPS_CLAMP

GRID_STEP = 1e-4


def _xlogy(x, y):
    """x * ln(y) with 0 * ln(0) = 0."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = x * np.log(y)
    return np.where(x == 0, 0.0, out)


def link_pu(eta_hat, y: int, mu_p: float):
    """Closeness of a prediction to an observation; unlabeled is close to mu_p."""
    eta_hat = np.asarray(eta_hat, dtype=np.float64)
    out = eta_hat if y == 1 else 1.0 - np.abs(eta_hat - mu_p)
    return float(out) if out.ndim == 0 else out


def reward_I(eta_hat, eta: float, mu_p: float):
    eta_hat = np.asarray(eta_hat, dtype=np.float64)
    pos = np.maximum(eta_hat, EPS_CLAMP)
    neg = np.maximum(1.0 - np.abs(eta_hat - mu_p), EPS_CLAMP)
    out = _xlogy(eta, pos) + _xlogy(1.0 - eta, neg)
    return float(out) if out.ndim == 0 else out


def _interior_J(eta, mu_p):
    return float(_xlogy(eta, eta * (1 + mu_p)) + _xlogy(1 - eta, (1 - eta) * (1 + mu_p)))


def max_reward_J(eta: float, mu_p: float, branch: str = "threshold") -> float:
    """Closed-form maximum reward.

    ``branch="threshold"`` switches to ``eta * ln(mu_p)`` whenever ``eta <= mu_p``.
    ``branch="stationary"`` switches only when the stationary point
    ``eta * (1 + mu_p)`` no longer exceeds ``mu_p``; this is the true
    supremum wherever ``eta * (1 + mu_p) <= 1``.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    if branch == "threshold":
        interior = eta > mu_p
    elif branch == "stationary":
        interior = eta * (1 + mu_p) > mu_p
    else:
        raise ValueError(f"unknown branch {branch!r}")
    if interior:
        return _interior_J(eta, mu_p)
    if eta == 0:
        return 0.0
    return float(eta * np.log(mu_p))


def entropy_J(eta):
    """Negative Shannon entropy, the envelope of the plain log-loss reward."""
    return _xlogy(eta, eta) + _xlogy(1 - eta, 1 - eta)


def savage_rewards(J: Callable[[float], float], eta: float, h: float = 1e-6) -> tuple[float, float]:
    """Conditional rewards ``(I1, I0)`` that make ``J`` the maximum reward.

    ``I1 = J + (1 - eta) J'`` and ``I0 = J - eta J'``, with ``J'`` from a
    central difference (one-sided within ``h`` of 0 or 1).
    """
    if eta - h < 0:
        dJ = (J(eta + h) - J(eta)) / h
    elif eta + h > 1:
        dJ = (J(eta) - J(eta - h)) / h
    else:
        dJ = (J(eta + h) - J(eta - h)) / (2 * h)
    j = float(J(eta))
    return j + (1 - eta) * dJ, j - eta * dJ


def argmax_reward(eta: float, mu_p: float) -> float:
    """Closed-form maximiser of ``reward_I(., eta, mu_p)``, clipped to 1."""
    cand = eta * (1 + mu_p)
    return min(cand, 1.0) if cand > mu_p else mu_p


def grid_argmax(eta: float, mu_p: float, step: float = GRID_STEP) -> tuple[float, float]:
    """Brute-force ``(argmax, max)`` of the reward over an ``eta_hat`` grid on [0, 1]."""
    grid = np.linspace(0.0, 1.0, int(round(1.0 / step)) + 1)
    vals = reward_I(grid, eta, mu_p)
    k = int(np.argmax(vals))
    return float(grid[k]), float(vals[k])


def in_certified_region(eta: float, mu_p: float) -> bool:
    """Interior stationary point exists and lies inside [0, 1]."""
    return mu_p / (1 + mu_p) < eta <= 1 / (1 + mu_p)


@dataclass(frozen=True)
class SupportRow:
    mu_p: float
    eta: float
    certified: bool
    closed_form_argmax: float
    grid_argmax: float
    J: float
    grid_max_I: float
    gap: float  # J - grid_max_I; negative means the grid beat the envelope
    J_threshold: float
    passed: bool

    def as_dict(self):
        return asdict(self)


def check_support(eta: float, mu_p: float, step: float = GRID_STEP, tol: float = 1e-9, J=None) -> SupportRow:
    """Compare the closed-form maximiser and envelope with the grid oracle.

    Inside the certified region the envelope is the stationary-point value and
    must bound the grid maximum, which must sit within one grid step of
    ``eta * (1 + mu_p)``. Outside it the row is only reported.
    """
    J = J or (lambda e, m: max_reward_J(e, m, branch="stationary"))
    certified = in_certified_region(eta, mu_p)
    closed = argmax_reward(eta, mu_p)
    g_arg, g_max = grid_argmax(eta, mu_p, step)
    j = float(J(eta, mu_p))
    passed = True
    if certified:
        passed = g_max <= j + tol and abs(g_arg - eta * (1 + mu_p)) <= step * (1 + 1e-9)
    return SupportRow(
        mu_p=mu_p,
        eta=eta,
        certified=certified,
        closed_form_argmax=closed,
        grid_argmax=g_arg,
        J=j,
        grid_max_I=g_max,
        gap=j - g_max,
        J_threshold=max_reward_J(eta, mu_p, branch="threshold"),
        passed=bool(passed),
    )


def eta_grid(step: float = 0.01) -> np.ndarray:
    n = int(round(1.0 / step))
    return np.round(np.arange(n + 1) * step, 12)


def certify_support(mu_list, eta_step: float = 0.01, grid_step: float = GRID_STEP, J=None) -> list[SupportRow]:
    """Run :func:`check_support` for every ``mu_p`` and every ``eta`` on a grid over [0, 1]."""
    return [check_support(float(e), float(mu), grid_step, J=J) for mu in mu_list for e in eta_grid(eta_step)]
