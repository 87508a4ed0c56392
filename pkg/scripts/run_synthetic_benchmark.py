"""Two-Gaussian benchmark over every objective, both collective targets, and a prior sweep.

Prints mean ± std test accuracy per arm over repetitions, the collective
deviation |mean eta_U - target|, and the misspecification sweep for cpu.
"""

import argparse
import time
from dataclasses import replace

import numpy as np

from collective_pu.data import gen_two_gaussians, make_pu_split
from collective_pu.evaluation import drift_report, format_delta, robustness_sweep, summarize
from collective_pu.train import RunConfig, train_model

ARMS = [
    ("pn-oracle", {}),
    ("naive", {}),
    ("upu", {}),
    ("nnpu", {}),
    ("cpu within-u", {"mu_target_mode": "within-u"}),
    ("cpu eq10-omega", {"mu_target_mode": "eq10-omega"}),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-per-class", type=int, default=5000)
    ap.add_argument("--r", type=float, default=0.4)
    ap.add_argument("--repetitions", type=int, default=5)
    ap.add_argument("--epochs", type=int, default=300)
    ap.add_argument("--lr", type=float, default=0.0005)
    ap.add_argument("--deltas", type=float, nargs="*", default=[-0.1, -0.05, 0.05, 0.1])
    args = ap.parse_args()

    train = gen_two_gaussians(args.n_per_class, 2, 4.0, seed=1)
    test = gen_two_gaussians(args.n_per_class, 2, 4.0, seed=2)
    base = RunConfig(lr=args.lr, batch_p=64, batch_u=256, epochs=args.epochs)

    print(f"{'arm':16s} {'accuracy':>17s} {'mean eta_U':>11s} {'target':>8s} {'mean eta_all':>13s}")
    for label, extra in ARMS:
        accs, eta_u, eta_all, targets = [], [], [], []
        t0 = time.perf_counter()
        for rep in range(args.repetitions):
            split = make_pu_split(train, args.r, rep)
            cfg = replace(base, objective=label.split()[0], seed=rep, **extra)
            params, report = train_model(cfg, split, test)
            accs.append(report.final_accuracy)
            eta_u.append(report.final_mean_eta_u)
            targets.append(report.mu_target)
            eta_all.append(drift_report(params, split).mean_eta_overall)
        mean, std = summarize(accs)
        print(f"{label:16s} {mean:.4f} ± {std:.4f} {np.mean(eta_u):11.4f} {np.mean(targets):8.4f} "
              f"{np.mean(eta_all):13.4f}  ({time.perf_counter() - t0:.0f}s)")

    split = make_pu_split(train, args.r, 0)
    print(f"\nprior sweep (cpu within-u, seed 0); |P|/Omega={split.labeled_fraction:.4f}, "
          f"(|P|+|U_p|)/Omega={split.true_positive_fraction:.4f}")
    for row in robustness_sweep(replace(base, mu_target_mode="within-u"), split, test, args.deltas):
        acc = "-" if row.accuracy is None else f"{row.accuracy:.4f}"
        print(f"  {format_delta(row.delta):>6s} mu={row.mu if row.mu is None else round(row.mu, 4)} acc={acc}")


if __name__ == "__main__":
    main()
