"""Datasets, PU splitting and prior bookkeeping."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


class ParseError(ValueError):
    """Raised when a dataset file does not match its declared format."""


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix with ground-truth binary labels (1 = positive class)."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels)
        if X.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {X.shape}")
        if y.ndim != 1 or len(y) != X.shape[0]:
            raise ValueError(f"labels length {y.shape} does not match {X.shape[0]} rows")
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain non-finite values")
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("labels must be binary {0, 1}")
        X.setflags(write=False)
        y = y.astype(np.int8)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def n_positive(self) -> int:
        return int(self.labels.sum())

    @property
    def n_negative(self) -> int:
        return len(self) - self.n_positive


@dataclass(frozen=True)
class PUSplit:
    """Training view of a labeled dataset: labeled positives P and unlabeled U.

    ``r`` is the sampling fraction of the positive class that was hidden in U.
    ``ratio_up_p`` is |U_p| / |P|, the ratio linking the expected posterior
    under the observed labels to the one under the true labels.
    """

    source: LabeledDataset
    positive_idx: np.ndarray
    unlabeled_idx: np.ndarray
    hidden_positive_idx: np.ndarray
    r: float
    mu_p: float = field(init=False)
    pi_u: float = field(init=False)
    ratio_up_p: float = field(init=False)

    def __post_init__(self):
        for name in ("positive_idx", "unlabeled_idx", "hidden_positive_idx"):
            idx = np.asarray(getattr(self, name), dtype=np.int64)
            idx.setflags(write=False)
            object.__setattr__(self, name, idx)
        n_p, n_u, n_up = len(self.positive_idx), len(self.unlabeled_idx), len(self.hidden_positive_idx)
        omega = n_p + n_u
        object.__setattr__(self, "mu_p", n_up / omega)
        object.__setattr__(self, "pi_u", n_up / n_u if n_u else 0.0)
        object.__setattr__(self, "ratio_up_p", n_up / n_p if n_p else float("inf"))

    @property
    def omega(self) -> int:
        return len(self.positive_idx) + len(self.unlabeled_idx)

    @property
    def X_p(self) -> np.ndarray:
        return self.source.features[self.positive_idx]

    @property
    def X_u(self) -> np.ndarray:
        return self.source.features[self.unlabeled_idx]

    @property
    def labeled_fraction(self) -> float:
        """|P| / Omega: expected posterior when U is read as negative."""
        return len(self.positive_idx) / self.omega

    @property
    def true_positive_fraction(self) -> float:
        """(|P| + |U_p|) / Omega: expected posterior under the true labels."""
        return (len(self.positive_idx) + len(self.hidden_positive_idx)) / self.omega

    def mu_target(self, mode: str = "eq10-omega") -> float:
        if mode == "eq10-omega":
            return self.mu_p
        if mode == "within-u":
            return self.pi_u
        raise ValueError(f"unknown mu_target_mode {mode!r}")


def make_pu_split(data: LabeledDataset, r: float, seed: int) -> PUSplit:
    """Hide ``round(r * #positives)`` positives in U together with every negative."""
    if not 0.0 <= r < 1.0:
        raise ValueError(f"r must lie in [0, 1), got {r}")
    pos = np.flatnonzero(data.labels == 1)
    neg = np.flatnonzero(data.labels == 0)
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("degenerate dataset: need at least one row of each class")
    n_hidden = round(r * len(pos))  # round-half-to-even
    if n_hidden >= len(pos):
        raise ValueError("no labeled positives left after hiding r of the positive class")
    rng = np.random.default_rng(seed)
    hidden = np.sort(rng.choice(pos, size=n_hidden, replace=False))
    labeled = np.setdiff1d(pos, hidden)
    unlabeled = np.sort(np.concatenate([hidden, neg]))
    return PUSplit(data, labeled, unlabeled, hidden, float(r))


def gen_two_gaussians(n_per_class: int, d: int, separation: float, seed: int) -> LabeledDataset:
    """Two unit-variance isotropic Gaussians centred at +/- separation/2 on axis 0.

    Rows are ordered positives first, then negatives.
    """
    if n_per_class < 1 or d < 1:
        raise ValueError("n_per_class and d must be >= 1")
    if separation < 0:
        raise ValueError(f"separation must be non-negative, got {separation}")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((2 * n_per_class, d))
    X[:n_per_class, 0] += separation / 2
    X[n_per_class:, 0] -= separation / 2
    y = np.r_[np.ones(n_per_class, dtype=np.int8), np.zeros(n_per_class, dtype=np.int8)]
    return LabeledDataset(X, y)


def perturb_mu_p(mu_p: float, delta: float) -> float:
    """Relative misspecification of a prior: ``mu_p * (1 + delta)``."""
    out = mu_p * (1.0 + delta)
    if not 0.0 <= mu_p < 1.0 or not 0.0 <= out < 1.0:
        raise ValueError(f"invalid prior: {mu_p} * (1 + {delta}) = {out}")
    return out


# --- loaders -----------------------------------------------------------------


def _binarize(raw_labels: np.ndarray, positive_classes: Iterable[int]) -> np.ndarray:
    positive_classes = set(int(c) for c in positive_classes)
    present = set(np.unique(raw_labels).tolist())
    unknown = positive_classes - present
    if unknown:
        raise ValueError(f"positive classes {sorted(unknown)} do not occur in the labels")
    return np.isin(raw_labels, sorted(positive_classes)).astype(np.int8)


def _open_bytes(path: Path) -> bytes:
    with open(path, "rb") as fh:
        head = fh.read(2)
        fh.seek(0)
        if head == b"\x1f\x8b":
            return gzip.decompress(fh.read())
        return fh.read()


def read_idx(path: str | Path, magic: int) -> np.ndarray:
    """Parse one big-endian IDX file (unsigned-byte payload)."""
    buf = _open_bytes(Path(path))
    if len(buf) < 8:
        raise ParseError(f"{path}: truncated header at byte offset {len(buf)}")
    (found,) = struct.unpack_from(">I", buf, 0)
    if found != magic:
        raise ParseError(f"{path}: bad magic number 0x{found:08x} at byte offset 0 (expected 0x{magic:08x})")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(buf) < header:
        raise ParseError(f"{path}: truncated dimension header at byte offset {len(buf)}")
    dims = struct.unpack_from(f">{ndim}I", buf, 4)
    size = int(np.prod(dims))
    if len(buf) - header != size:
        raise ParseError(
            f"{path}: payload of {len(buf) - header} bytes at byte offset {header} does not match dims {dims}"
        )
    return np.frombuffer(buf, dtype=np.uint8, offset=header).reshape(dims)


def _default_label_path(images: Path) -> Path:
    name = images.name
    for a, b in (("images-idx3", "labels-idx1"), ("images.idx3", "labels.idx1")):
        if a in name:
            return images.with_name(name.replace(a, b))
    raise ValueError(f"cannot infer label file for {images}; pass labels_path")


def load_dataset(
    path: str | Path,
    format: str,
    positive_classes: Iterable[int],
    labels_path: str | Path | None = None,
) -> LabeledDataset:
    """Load a multiclass file and collapse it to positive-vs-rest.

    ``format`` is ``"delimited"`` (comma-separated, label in the last column)
    or ``"idx"`` (image file at ``path``; the label file is inferred from the
    standard MNIST names unless ``labels_path`` is given).
    """
    path = Path(path)
    if format == "delimited":
        X, raw = _parse_delimited(path)
    elif format == "idx":
        images = read_idx(path, IDX_IMAGE_MAGIC)
        raw = read_idx(labels_path or _default_label_path(path), IDX_LABEL_MAGIC)
        if len(raw) != len(images):
            raise ParseError(f"{len(images)} images but {len(raw)} labels")
        X = images.reshape(len(images), -1).astype(np.float64) / 255.0
    else:
        raise ValueError(f"unknown dataset format {format!r}")
    return LabeledDataset(X, _binarize(raw, positive_classes))


def _parse_delimited(path: Path) -> tuple[np.ndarray, np.ndarray]:
    text = _open_bytes(path).decode("utf-8")  # byte offsets refer to the decompressed text
    rows = []
    offset = 0
    for lineno, line in enumerate(text.splitlines(keepends=True)):
        start, offset = offset, offset + len(line.encode("utf-8"))
        fields = line.strip().split(",")
        if fields == [""]:
            continue
        try:
            values = [float(f) for f in fields]
        except ValueError:
            if lineno == 0:
                continue  # header
            raise ParseError(f"{path}: non-numeric field on line {lineno + 1} (byte offset {start})") from None
        if len(values) < 2:
            raise ParseError(f"{path}: need features and a label on line {lineno + 1} (byte offset {start})")
        if rows and len(values) != len(rows[0]):
            raise ParseError(f"{path}: ragged row on line {lineno + 1} (byte offset {start})")
        if values[-1] != int(values[-1]):
            raise ParseError(f"{path}: non-integer label on line {lineno + 1} (byte offset {start})")
        rows.append(values)
    if not rows:
        raise ParseError(f"{path}: no data rows (byte offset {offset})")
    arr = np.asarray(rows, dtype=np.float64)
    return arr[:, :-1], arr[:, -1].astype(np.int64)


def save_delimited(data: LabeledDataset, path: str | Path) -> None:
    """Write a dataset in the comma-separated format read by ``load_dataset``."""
    with open(path, "w", encoding="utf-8") as fh:
        for x, y in zip(data.features, data.labels):
            fh.write(",".join(repr(float(v)) for v in x) + f",{int(y)}\n")
