"""Small fully connected scorer f with posterior output sigmoid(f(x)).

Weights are stored as ``(out, in)`` matrices; a batch ``X`` of shape ``(b, d)``
flows through ``a @ W.T + b``. Hidden layers use a smooth squashing
activation, the output layer is affine and followed by the logistic sigmoid.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

EPS_CLAMP = 1e-7

_ACTIVATIONS = ("softsign", "tanh")


def sigmoid(t):
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _act(z, kind):
    if kind == "softsign":
        return z / (1.0 + np.abs(z))
    return np.tanh(z)


def _act_grad(z, kind):
    if kind == "softsign":
        return 1.0 / (1.0 + np.abs(z)) ** 2
    return 1.0 - np.tanh(z) ** 2


@dataclass(frozen=True)
class PredictorParams:
    layers: tuple[tuple[np.ndarray, np.ndarray], ...]
    activation: str = "softsign"

    def __post_init__(self):
        if not self.layers:
            raise ValueError("a predictor needs at least one layer")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}; choose from {_ACTIVATIONS}")
        layers = []
        for i, (W, b) in enumerate(self.layers):
            W = np.asarray(W, dtype=np.float64)
            b = np.asarray(b, dtype=np.float64)
            if W.ndim != 2 or b.shape != (W.shape[0],):
                raise ValueError(f"layer {i}: weight {W.shape} and bias {b.shape} do not fit")
            if layers and layers[-1][0].shape[0] != W.shape[1]:
                raise ValueError(f"layer {i}: input dim {W.shape[1]} != previous output {layers[-1][0].shape[0]}")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {i}: non-finite parameters")
            layers.append((W, b))
        if layers[-1][0].shape[0] != 1:
            raise ValueError("final layer must output a single score")
        object.__setattr__(self, "layers", tuple(layers))

    @property
    def shape(self) -> list[int]:
        return [self.layers[0][0].shape[1]] + [W.shape[0] for W, _ in self.layers]

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].shape[1]

    def flat(self) -> np.ndarray:
        return np.concatenate([np.r_[W.ravel(), b] for W, b in self.layers])

    def with_flat(self, theta: np.ndarray) -> PredictorParams:
        """Rebuild from a flat vector in the order produced by ``flat``."""
        layers, k = [], 0
        for W, b in self.layers:
            nw = W.size
            layers.append((theta[k : k + nw].reshape(W.shape), theta[k + nw : k + nw + b.size].copy()))
            k += nw + b.size
        return PredictorParams(tuple(layers), self.activation)


@dataclass(frozen=True)
class ForwardCache:
    params: PredictorParams
    inputs: tuple[np.ndarray, ...]  # activation entering each layer
    preacts: tuple[np.ndarray, ...]  # a @ W.T + b for each layer
    eta_hat: np.ndarray


def init_params(shape, seed: int, activation: str = "softsign") -> PredictorParams:
    """Gaussian weights scaled by 1/sqrt(fan_in), zero biases."""
    shape = list(shape)
    if len(shape) < 2:
        raise ValueError(f"shape needs an input and an output dim, got {shape}")
    if shape[-1] != 1:
        raise ValueError(f"shape must end with 1, got {shape}")
    rng = np.random.default_rng(seed)
    layers = tuple(
        (rng.standard_normal((fan_out, fan_in)) / np.sqrt(fan_in), np.zeros(fan_out))
        for fan_in, fan_out in zip(shape[:-1], shape[1:])
    )
    return PredictorParams(layers, activation)


def scores(params: PredictorParams, X: np.ndarray) -> np.ndarray:
    """Raw scores f(x), no sigmoid."""
    return forward(params, X, keep_cache=False)[1]


def forward(params: PredictorParams, X: np.ndarray, keep_cache: bool = True):
    """Return ``(eta_hat, cache)``; eta_hat is clamped to [EPS_CLAMP, 1 - EPS_CLAMP].

    With ``keep_cache=False`` the second element is the raw score vector.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.input_dim:
        raise ValueError(f"input of shape {X.shape} does not match input dim {params.input_dim}")
    a = X
    inputs, preacts = [], []
    last = len(params.layers) - 1
    for i, (W, b) in enumerate(params.layers):
        z = a @ W.T + b
        inputs.append(a)
        preacts.append(z)
        a = z if i == last else _act(z, params.activation)
    f = a[:, 0]
    eta = np.clip(sigmoid(f), EPS_CLAMP, 1.0 - EPS_CLAMP)
    if not keep_cache:
        return eta, f
    return eta, ForwardCache(params, tuple(inputs), tuple(preacts), eta)


def predict(params: PredictorParams, X: np.ndarray) -> np.ndarray:
    return forward(params, X, keep_cache=False)[0]


def backward(params: PredictorParams, cache: ForwardCache, dL_deta) -> list[tuple[np.ndarray, np.ndarray]]:
    """Chain-rule gradients ``[(dW, db), ...]`` aligned with ``params.layers``."""
    if cache.params is not params:
        raise ValueError("stale cache: produced by a different parameter set")
    g = np.asarray(dL_deta, dtype=np.float64)
    if g.shape != cache.eta_hat.shape:
        raise ValueError(f"upstream gradient {g.shape} does not match batch {cache.eta_hat.shape}")
    eta = cache.eta_hat
    delta = (g * eta * (1.0 - eta))[:, None]  # dL/dz at the output layer
    grads = [None] * len(params.layers)
    for i in range(len(params.layers) - 1, -1, -1):
        W, _ = params.layers[i]
        grads[i] = (delta.T @ cache.inputs[i], delta.sum(axis=0))
        if i:
            delta = (delta @ W) * _act_grad(cache.preacts[i - 1], params.activation)
    return grads


# --- checkpoints ---------------------------------------------------------------
#
# Little-endian binary layout:
#   b"PUPR" | u32 version (=1) | u32 activation code | u32 n_dims | n_dims * u32 dims
#   then for each layer: float64 weights (row-major, out x in), float64 bias.

_MAGIC = b"PUPR"
_VERSION = 1


def save_params(params: PredictorParams, path: str | Path) -> None:
    dims = params.shape
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack(f"<III{len(dims)}I", _VERSION, _ACTIVATIONS.index(params.activation), len(dims), *dims))
        for W, b in params.layers:
            fh.write(np.ascontiguousarray(W, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_params(path: str | Path) -> PredictorParams:
    buf = Path(path).read_bytes()
    if buf[:4] != _MAGIC:
        raise ValueError(f"{path}: not a parameter checkpoint")
    version, act, n = struct.unpack_from("<III", buf, 4)
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    dims = struct.unpack_from(f"<{n}I", buf, 16)
    k = 16 + 4 * n
    layers = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        W = np.frombuffer(buf, "<f8", fan_out * fan_in, k).reshape(fan_out, fan_in)
        k += 8 * W.size
        b = np.frombuffer(buf, "<f8", fan_out, k)
        k += 8 * fan_out
        layers.append((W.copy(), b.copy()))
    if k != len(buf):
        raise ValueError(f"{path}: trailing bytes after byte offset {k}")
    return PredictorParams(tuple(layers), _ACTIVATIONS[act])
