"""Mini-batch training: batch composition, Nadam, objective dispatch."""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field, fields, replace
from typing import NamedTuple

import numpy as np

from . import losses
from .data import LabeledDataset, PUSplit
from .model import PredictorParams, backward, forward, init_params, predict

log = logging.getLogger(__name__)

OBJECTIVES = ("pn-oracle", "naive", "upu", "nnpu", "cpu")
MU_MODES = ("eq10-omega", "within-u")


class DivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class RunConfig:
    objective: str = "cpu"
    mu_target_mode: str = "eq10-omega"
    mu_override: float | None = None
    lr: float = 0.0005
    batch_p: int = 64
    batch_u: int = 256
    epochs: int = 30
    seed: int = 0
    arch: tuple[int, ...] | None = None  # full shape [d, ..., 1]; None means logistic regression
    activation: str = "softsign"
    gamma: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps_opt: float = 1e-8

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.objective!r}; choose from {OBJECTIVES}")
        if self.mu_target_mode not in MU_MODES:
            raise ValueError(f"unknown mu_target_mode {self.mu_target_mode!r}")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.batch_p < 1 or self.batch_u < 1:
            raise ValueError("batch sizes must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.arch is not None:
            object.__setattr__(self, "arch", tuple(int(a) for a in self.arch))

    @classmethod
    def from_mapping(cls, mapping: dict) -> RunConfig:
        """Build from string-valued key/value pairs (config files, CLI)."""
        kinds = {f.name: f.type for f in fields(cls)}
        kw = {}
        for key, raw in mapping.items():
            key = key.replace("-", "_")
            if key not in kinds:
                raise ValueError(f"unknown RunConfig key {key!r}")
            if not isinstance(raw, str):
                kw[key] = raw
            elif key == "arch":
                kw[key] = None if raw.lower() in ("", "none") else tuple(int(v) for v in raw.replace(",", " ").split())
            elif key == "mu_override":
                kw[key] = None if raw.lower() in ("", "none") else float(raw)
            elif kinds[key] == "int":
                kw[key] = int(raw)
            elif kinds[key] == "float":
                kw[key] = float(raw)
            else:
                kw[key] = raw
        return cls(**kw)

    def shape_for(self, d: int) -> list[int]:
        if self.arch is None:
            return [d, 1]
        if self.arch[0] != d or self.arch[-1] != 1:
            raise ValueError(f"arch {list(self.arch)} does not map {d} inputs to one score")
        return list(self.arch)


@dataclass
class OptimizerState:
    m: list[tuple[np.ndarray, np.ndarray]]
    v: list[tuple[np.ndarray, np.ndarray]]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: PredictorParams) -> OptimizerState:
        z = lambda: [(np.zeros_like(W), np.zeros_like(b)) for W, b in params.layers]
        return cls(z(), z(), 0)


def nadam_step(params: PredictorParams, grads, state: OptimizerState, lr: float,
               beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One Nadam update; returns ``(new_params, new_state)``.

    m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
    theta <- theta - lr (b1 m_hat + (1-b1) g / (1-b1^t)) / (sqrt(v_hat) + eps)
    """
    t = state.t + 1
    c1, c2 = 1.0 - beta1**t, 1.0 - beta2**t
    new_layers, new_m, new_v = [], [], []
    for (W, b), g_pair, m_pair, v_pair in zip(params.layers, grads, state.m, state.v):
        layer, ms, vs = [], [], []
        for theta, g, m, v in zip((W, b), g_pair, m_pair, v_pair):
            if not np.all(np.isfinite(g)):
                raise DivergedError("diverged: non-finite gradient")
            m = beta1 * m + (1 - beta1) * g
            v = beta2 * v + (1 - beta2) * g * g
            m_hat, v_hat = m / c1, v / c2
            layer.append(theta - lr * (beta1 * m_hat + (1 - beta1) * g / c1) / (np.sqrt(v_hat) + eps))
            ms.append(m)
            vs.append(v)
        new_layers.append(tuple(layer))
        new_m.append(tuple(ms))
        new_v.append(tuple(vs))
    return PredictorParams(tuple(new_layers), params.activation), OptimizerState(new_m, new_v, t)


class BatchIndices(NamedTuple):
    p: np.ndarray
    u: np.ndarray


def _chunks(perm: np.ndarray, size: int, n_batches: int) -> list[np.ndarray]:
    natural = -(-len(perm) // size)
    if natural == n_batches:
        return [perm[i * size:(i + 1) * size] for i in range(n_batches)]
    # shorter stream: wrap around so every batch gets a full chunk
    return [np.take(perm, np.arange(i * size, (i + 1) * size), mode="wrap") for i in range(n_batches)]


def make_batches(split: PUSplit, batch_p: int, batch_u: int, seed: int, epoch: int) -> list[BatchIndices]:
    """Shuffle P and U independently for this epoch and zip them into batches.

    The stream needing more chunks sets the batch count and keeps its short
    final chunk; the other stream cycles.
    """
    P, U = split.positive_idx, split.unlabeled_idx
    if len(P) == 0 or len(U) == 0:
        raise ValueError("both P and U pools must be non-empty")
    if batch_p > len(P) or batch_u > len(U):
        raise ValueError(f"batch sizes ({batch_p}, {batch_u}) exceed pool sizes ({len(P)}, {len(U)})")
    rng = np.random.default_rng([seed, epoch])
    perm_p = rng.permutation(P)
    perm_u = rng.permutation(U)
    n = max(-(-len(P) // batch_p), -(-len(U) // batch_u))
    return [BatchIndices(p, u) for p, u in zip(_chunks(perm_p, batch_p, n), _chunks(perm_u, batch_u, n))]


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    test_acc: float
    mean_eta_u: float


@dataclass
class RunReport:
    config: RunConfig
    mu_target: float
    records: list[EpochRecord] = field(default_factory=list)
    status: str = "ok"
    params: PredictorParams | None = None
    wall_clock: float = 0.0
    short_batches: int = 0
    batch_losses: list[float] = field(default_factory=list)

    @property
    def final_accuracy(self) -> float:
        return self.records[-1].test_acc if self.records else float("nan")

    @property
    def final_mean_eta_u(self) -> float:
        return self.records[-1].mean_eta_u if self.records else float("nan")

    def to_csv(self) -> str:
        """Per-epoch rows followed by a ``# summary`` comment line (no timing)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "test_acc", "mean_eta_u"])
        for r in self.records:
            w.writerow([r.epoch, repr(float(r.train_loss)), repr(float(r.test_acc)), repr(float(r.mean_eta_u))])
        c = self.config
        buf.write(
            f"# summary status={self.status} objective={c.objective} mu_target={float(self.mu_target)!r} "
            f"lr={float(c.lr)!r} batch_p={c.batch_p} batch_u={c.batch_u} epochs={c.epochs} seed={c.seed}\n"
        )
        return buf.getvalue()

    @staticmethod
    def records_from_csv(text: str) -> list[EpochRecord]:
        rows = [line for line in text.splitlines() if line and not line.startswith("#")]
        reader = csv.DictReader(rows)
        return [EpochRecord(int(r["epoch"]), float(r["train_loss"]), float(r["test_acc"]), float(r["mean_eta_u"]))
                for r in reader]


def resolve_mu_target(config: RunConfig, split: PUSplit) -> float:
    """mu_override wins; otherwise the split prior selected by mu_target_mode.

    For uPU/nnPU the mixing weight is the within-U prior unless overridden.
    """
    if config.mu_override is not None:
        return float(config.mu_override)
    if config.objective in ("upu", "nnpu"):
        return split.pi_u
    return split.mu_target(config.mu_target_mode)


def batch_loss(config: RunConfig, mu: float, eta_p, eta_u, y_p=None, y_u=None) -> losses.LossResult:
    obj = config.objective
    if obj == "pn-oracle":
        return losses.pn_log_loss(np.r_[eta_p, eta_u], np.r_[y_p, y_u])
    view = losses.BatchView(eta_p, eta_u)
    if obj == "naive":
        return losses.naive_negative_loss(view)
    if obj == "upu":
        return losses.upu_risk(view, mu)
    if obj == "nnpu":
        return losses.nnpu_risk(view, mu, config.gamma)
    return losses.cpu_collective_loss(view, mu)


def accuracy_of(params: PredictorParams, data: LabeledDataset) -> float:
    if len(data) == 0:
        raise ValueError("accuracy of an empty dataset")
    pred = (predict(params, data.features) >= 0.5).astype(np.int8)
    return float(np.mean(pred == data.labels))


def train_model(config: RunConfig, split: PUSplit, test: LabeledDataset):
    """Train from scratch; returns ``(params, report)``.

    A non-finite loss or gradient stops the run and marks the report
    ``diverged``; the epochs completed so far are kept.
    """
    started = time.perf_counter()
    X, y = split.source.features, split.source.labels
    mu = resolve_mu_target(config, split)
    params = init_params(config.shape_for(split.source.dim), config.seed, config.activation)
    state = OptimizerState.zeros_like(params)
    report = RunReport(config, mu)
    X_u = split.X_u
    try:
        for epoch in range(config.epochs):
            total, n_batches = 0.0, 0
            for b in make_batches(split, config.batch_p, config.batch_u, config.seed, epoch):
                if len(b.u) < config.batch_u:
                    report.short_batches += 1
                eta, cache = forward(params, X[np.r_[b.p, b.u]])
                res = batch_loss(config, mu, eta[:len(b.p)], eta[len(b.p):], y[b.p], y[b.u])
                if not np.isfinite(res.value):
                    raise DivergedError("diverged: non-finite loss")
                grads = backward(params, cache, res.grad)
                params, state = nadam_step(params, grads, state, config.lr, config.beta1, config.beta2,
                                           config.eps_opt)
                report.batch_losses.append(float(res.value))
                total += float(res.value)
                n_batches += 1
            rec = EpochRecord(epoch, total / n_batches, accuracy_of(params, test), float(predict(params, X_u).mean()))
            report.records.append(rec)
            log.debug("epoch %d loss %.6f acc %.4f mean_eta_u %.4f", *[getattr(rec, f.name) for f in fields(rec)])
    except DivergedError as exc:
        log.warning("%s: %s", config.objective, exc)
        report.status = "diverged"
    if report.short_batches:
        log.info("%d short unlabeled chunks", report.short_batches)
    report.params = params
    report.wall_clock = time.perf_counter() - started
    return params, report


def with_override(config: RunConfig, mu: float | None) -> RunConfig:
    return replace(config, mu_override=mu)
