"""Accuracy, posterior-drift diagnostics and prior-misspecification sweeps."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace

import numpy as np

from .data import LabeledDataset, PUSplit, perturb_mu_p
from .losses import zero_one_loss
from .model import PredictorParams, predict
from .train import RunConfig, resolve_mu_target, train_model


def accuracy_from_predictions(eta_hat, labels) -> float:
    eta_hat = np.asarray(eta_hat)
    if eta_hat.size == 0:
        raise ValueError("accuracy of an empty dataset")
    return 1.0 - float(np.mean(zero_one_loss(eta_hat, labels)))


def accuracy(params: PredictorParams, data: LabeledDataset) -> float:
    if len(data) == 0:
        raise ValueError("accuracy of an empty dataset")
    return accuracy_from_predictions(predict(params, data.features), data.labels)


@dataclass(frozen=True)
class EvalReport:
    accuracy: float  # against the hidden true labels of the training rows
    mean_eta_overall: float
    mean_eta_p: float
    mean_eta_u: float
    target_observed: float  # |P| / Omega
    target_true: float  # (|P| + |U_p|) / Omega
    drift: float  # mean_eta_overall - target_observed
    false_negative_rate: float
    false_positive_rate: float

    @property
    def closer_to(self) -> str:
        d_obs = abs(self.mean_eta_overall - self.target_observed)
        d_true = abs(self.mean_eta_overall - self.target_true)
        return "true" if d_true < d_obs else "observed"


def drift_report_from_predictions(eta_p, eta_u, split: PUSplit) -> EvalReport:
    """Same as :func:`drift_report` but for precomputed predictions on P and U."""
    eta_p = np.asarray(eta_p, dtype=np.float64)
    eta_u = np.asarray(eta_u, dtype=np.float64)
    n_p, n_u = len(eta_p), len(eta_u)
    mean_p = float(eta_p.mean()) if n_p else 0.0
    mean_u = float(eta_u.mean()) if n_u else 0.0
    overall = (float(eta_p.sum()) + float(eta_u.sum())) / (n_p + n_u)
    labels = split.source.labels
    pred = np.r_[eta_p, eta_u] >= 0.5
    truth = np.r_[labels[split.positive_idx], labels[split.unlabeled_idx]] == 1
    fnr = float(np.mean(~pred[truth])) if truth.any() else 0.0
    fpr = float(np.mean(pred[~truth])) if (~truth).any() else 0.0
    return EvalReport(
        accuracy=float(np.mean(pred == truth)),
        mean_eta_overall=overall,
        mean_eta_p=mean_p,
        mean_eta_u=mean_u,
        target_observed=split.labeled_fraction,
        target_true=split.true_positive_fraction,
        drift=overall - split.labeled_fraction,
        false_negative_rate=fnr,
        false_positive_rate=fpr,
    )


def drift_report(params: PredictorParams, split: PUSplit) -> EvalReport:
    """Where the mean training posterior sits between |P|/Omega and (|P|+|U_p|)/Omega."""
    return drift_report_from_predictions(predict(params, split.X_p), predict(params, split.X_u), split)


@dataclass(frozen=True)
class SweepRow:
    delta: float
    mu: float | None
    accuracy: float | None
    status: str


def robustness_sweep(base_config: RunConfig, split: PUSplit, test: LabeledDataset, deltas) -> list[SweepRow]:
    """Retrain with the prior misspecified by each relative ``delta``.

    Every row uses the base seed. A ``delta = 0`` row is added if missing.
    Rows whose perturbed prior is invalid are flagged instead of raising.
    """
    if base_config.objective != "cpu":
        raise ValueError("robustness sweeps apply to the cpu objective")
    deltas = [float(d) for d in deltas]
    if not deltas:
        raise ValueError("no deltas")
    if 0.0 not in deltas:
        deltas = sorted(deltas + [0.0])
    mu = resolve_mu_target(replace(base_config, mu_override=None), split)
    rows = []
    for delta in deltas:
        try:
            mu_d = perturb_mu_p(mu, delta)
        except ValueError:
            rows.append(SweepRow(delta, None, None, "invalid prior"))
            continue
        cfg = base_config if delta == 0.0 else replace(base_config, mu_override=mu_d)
        _, report = train_model(cfg, split, test)
        rows.append(SweepRow(delta, mu_d, report.final_accuracy, report.status))
    return rows


# --- report tables -------------------------------------------------------------


def format_delta(delta: float) -> str:
    pct = round(delta * 100, 6)
    return f"{pct:+g}%" if pct else "0%"


def sweep_table_csv(rows_by_key: dict[tuple[str, float], list[SweepRow]], deltas=None) -> str:
    """Wide table: one row per (dataset, r), one column per requested delta."""
    if deltas is None:
        deltas = sorted({row.delta for rows in rows_by_key.values() for row in rows})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dataset", "r"] + [format_delta(d) for d in deltas])
    for (name, r), rows in rows_by_key.items():
        acc = {row.delta: row.accuracy for row in rows}
        w.writerow([name, repr(float(r))] + ["" if acc.get(d) is None else repr(float(acc[d])) for d in deltas])
    return buf.getvalue()


def summarize(accs) -> tuple[float, float]:
    """Mean and sample standard deviation (0 for a single run)."""
    a = np.asarray(accs, dtype=np.float64)
    return float(a.mean()), float(a.std(ddof=1)) if a.size > 1 else 0.0
