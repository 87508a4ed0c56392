"""Training objectives as functions of predicted posteriors.

Every loss returns a :class:`LossResult` whose gradient is taken with respect
to the predictions themselves; :mod:`collective_pu.model` chains it back to
the parameters. Batch losses take a :class:`BatchView` and return the gradient
over ``concat(eta_p, eta_u)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import EPS_CLAMP


@dataclass(frozen=True)
class LossResult:
    value: float
    grad: np.ndarray
    aux: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))

    def split(self, n_p: int) -> tuple[np.ndarray, np.ndarray]:
        return self.grad[:n_p], self.grad[n_p:]


@dataclass(frozen=True)
class BatchView:
    """Predictions for the labeled-positive (P_b) and unlabeled (U_b) parts of a batch."""

    eta_p: np.ndarray
    eta_u: np.ndarray

    def __post_init__(self):
        p = np.clip(np.atleast_1d(np.asarray(self.eta_p, dtype=np.float64)), EPS_CLAMP, 1 - EPS_CLAMP)
        u = np.clip(np.atleast_1d(np.asarray(self.eta_u, dtype=np.float64)), EPS_CLAMP, 1 - EPS_CLAMP)
        if p.size == 0 and u.size == 0:
            raise ValueError("batch has neither positive nor unlabeled predictions")
        object.__setattr__(self, "eta_p", p)
        object.__setattr__(self, "eta_u", u)


def _clamp(x):
    return np.clip(np.asarray(x, dtype=np.float64), EPS_CLAMP, 1 - EPS_CLAMP)


def pn_log_loss(eta_hat, y) -> LossResult:
    """Mean cross-entropy against true labels; scalars give the per-sample loss."""
    eta = np.atleast_1d(_clamp(eta_hat))
    y = np.atleast_1d(np.asarray(y))
    if eta.shape != y.shape:
        raise ValueError(f"predictions {eta.shape} and labels {y.shape} differ in shape")
    n = eta.size
    pos = y == 1
    losses = np.where(pos, -np.log(eta), -np.log1p(-eta))
    grad = np.where(pos, -1.0 / eta, 1.0 / (1.0 - eta)) / n
    return LossResult(float(losses.mean()), grad)


def zero_one_loss(eta_hat, y):
    """0 if the rounded prediction equals the label; eta_hat = 0.5 rounds to 1."""
    pred = (np.asarray(eta_hat) >= 0.5).astype(int)
    out = (pred != np.asarray(y)).astype(int)
    return int(out) if out.ndim == 0 else out


def _require_u(batch: BatchView):
    if batch.eta_u.size == 0:
        raise ValueError("unlabeled part required")


def _pu_terms(batch: BatchView, pi_u: float):
    """Pieces shared by uPU and nnPU, each with gradients over (eta_p, eta_u)."""
    _require_u(batch)
    p, u = batch.eta_p, batch.eta_u
    if p.size == 0:
        if pi_u > 0:
            raise ValueError("labeled positives required when pi_u > 0")
        n_p = 1
    else:
        n_p = p.size
    n_u = u.size
    pos_risk = pi_u * float(np.sum(-np.log(p))) / n_p
    pos_grad_p = pi_u * (-1.0 / p) / n_p
    inner = float(np.mean(-np.log1p(-u))) - pi_u * float(np.sum(-np.log1p(-p))) / n_p
    inner_grad_p = -pi_u * (1.0 / (1.0 - p)) / n_p
    inner_grad_u = (1.0 / (1.0 - u)) / n_u
    return pos_risk, pos_grad_p, inner, inner_grad_p, inner_grad_u


def upu_risk(batch: BatchView, pi_u: float) -> LossResult:
    """Unbiased PU risk with log loss; can become negative."""
    pos, gp, inner, igp, igu = _pu_terms(batch, pi_u)
    return LossResult(pos + inner, np.r_[gp + igp, igu], {"inner": inner})


def nnpu_risk(batch: BatchView, pi_u: float, gamma: float = 1.0) -> LossResult:
    """Non-negative PU risk (beta = 0).

    When the estimated negative risk ``inner`` drops below zero the reported
    value is the positive part only, and the gradient is the corrective
    ``-gamma * d(inner)`` that pushes ``inner`` back up.
    """
    pos, gp, inner, igp, igu = _pu_terms(batch, pi_u)
    if inner > 0:
        grad = np.r_[gp + igp, igu]
    elif inner == 0:
        grad = np.r_[gp, np.zeros_like(igu)]
    else:
        grad = -gamma * np.r_[igp, igu]
    return LossResult(pos + max(0.0, inner), grad, {"inner": inner})


def cpu_collective_loss(batch: BatchView, mu_target: float) -> LossResult:
    """Per-sample log loss on P_b plus one collective term on U_b.

    The collective term is ``-ln(1 - |mean(eta_u) - mu_target|)``; its
    subgradient at the kink is taken as zero.
    """
    if not 0.0 <= mu_target < 1.0:
        raise ValueError(f"mu_target must lie in [0, 1), got {mu_target}")
    p, u = batch.eta_p, batch.eta_u
    value = 0.0
    gp = np.zeros_like(p)
    gu = np.zeros_like(u)
    aux = {}
    if p.size:
        value += float(np.mean(-np.log(p)))
        gp = -1.0 / (p * p.size)
    if u.size:
        mean_u = float(np.mean(u))
        dev = mean_u - mu_target
        arg = 1.0 - abs(dev)
        if arg < EPS_CLAMP:
            value += -np.log(EPS_CLAMP)
        else:
            value += -np.log(arg)
            gu = np.full_like(u, np.sign(dev) / (arg * u.size))
        aux["mean_u"] = mean_u
    return LossResult(value, np.r_[gp, gu], aux)


def naive_negative_loss(batch: BatchView) -> LossResult:
    """Read every unlabeled example as negative: mean_P[-ln eta] + mean_U[-ln(1 - eta)]."""
    _require_u(batch)
    p, u = batch.eta_p, batch.eta_u
    value = float(np.mean(-np.log1p(-u)))
    gu = (1.0 / (1.0 - u)) / u.size
    gp = np.zeros_like(p)
    if p.size:
        value += float(np.mean(-np.log(p)))
        gp = -1.0 / (p * p.size)
    return LossResult(value, np.r_[gp, gu])
