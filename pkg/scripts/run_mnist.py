"""MNIST even-vs-odd: cpu vs nnPU with a 784-300-1 MLP at r = 0.2.

Reads the four standard IDX files from --mnist-dir (or $PU_MNIST_DIR).
With --csv-subset it instead uses a small label-last CSV sample of MNIST
(e.g. a 5k subset), split 80/20, as a rough stand-in when the full set is
not available; those numbers are not comparable to the full benchmark.
"""

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from collective_pu.data import LabeledDataset, load_dataset, make_pu_split
from collective_pu.train import RunConfig, train_model

EVENS = [0, 2, 4, 6, 8]


def from_idx(root: Path):
    def one(pattern):
        hits = sorted(root.glob(pattern))
        if not hits:
            sys.exit(f"no file matching {pattern} in {root}")
        return hits[0]
    train = load_dataset(one("train-images*idx3*"), "idx", EVENS, labels_path=one("train-labels*idx1*"))
    test = load_dataset(one("t10k-images*idx3*"), "idx", EVENS, labels_path=one("t10k-labels*idx1*"))
    return train, test


def from_csv_subset(path: Path, seed: int):
    data = load_dataset(path, "delimited", EVENS)
    X, y = data.features / 255.0, data.labels
    order = np.random.default_rng(seed).permutation(len(y))
    cut = int(0.8 * len(y))
    tr, te = order[:cut], order[cut:]
    return LabeledDataset(X[tr], y[tr]), LabeledDataset(X[te], y[te])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--mnist-dir", default=os.environ.get("PU_MNIST_DIR"))
    ap.add_argument("--csv-subset", type=Path)
    ap.add_argument("--r", type=float, default=0.2)
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--mu-target-mode", default="within-u", choices=["within-u", "eq10-omega"])
    args = ap.parse_args()

    if args.csv_subset:
        train, test = from_csv_subset(args.csv_subset, args.seed)
    elif args.mnist_dir:
        train, test = from_idx(Path(args.mnist_dir))
    else:
        sys.exit("pass --mnist-dir (or set PU_MNIST_DIR) or --csv-subset")

    split = make_pu_split(train, args.r, args.seed)
    print(f"train {len(train)} (|P|={len(split.positive_idx)}, |U|={len(split.unlabeled_idx)}, "
          f"pi_u={split.pi_u:.4f}), test {len(test)}")
    base = dict(arch=(784, 300, 1), batch_p=64, batch_u=256, epochs=args.epochs, seed=args.seed,
                mu_target_mode=args.mu_target_mode)
    for objective in ("cpu", "nnpu"):
        t0 = time.perf_counter()
        _, rep = train_model(RunConfig(objective=objective, **base), split, test)
        print(f"{objective:5s} acc={rep.final_accuracy:.4f} mean_eta_u={rep.final_mean_eta_u:.4f} "
              f"target={rep.mu_target:.4f} status={rep.status} {time.perf_counter() - t0:.0f}s")


if __name__ == "__main__":
    main()
