"""Two-layer fully connected Q network with hand-written backprop.

Layout is FC -> ReLU -> FC -> Sigmoid. Everything is float64 numpy; no
autodiff framework is involved, so gradients are checked against finite
differences in the test suite.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import expit


class ShapeError(ValueError):
    """Raised when arrays do not fit the network they are used with."""


@dataclass
class QNetworkModel:
    W1: np.ndarray  # (L, D)
    b1: np.ndarray  # (L,)
    W2: np.ndarray  # (M+1, L)
    b2: np.ndarray  # (M+1,)

    def __post_init__(self) -> None:
        self.W1 = np.asarray(self.W1, dtype=np.float64)
        self.b1 = np.asarray(self.b1, dtype=np.float64)
        self.W2 = np.asarray(self.W2, dtype=np.float64)
        self.b2 = np.asarray(self.b2, dtype=np.float64)
        L, D = self.W1.shape
        if self.b1.shape != (L,) or self.W2.ndim != 2 or self.W2.shape[1] != L:
            raise ShapeError("hidden layer shapes are inconsistent")
        if self.b2.shape != (self.W2.shape[0],):
            raise ShapeError("output layer shapes are inconsistent")

    @property
    def input_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def hidden_size(self) -> int:
        return self.W1.shape[0]

    @property
    def n_actions(self) -> int:
        return self.W2.shape[0]

    @property
    def n_rbgs(self) -> int:
        return self.W2.shape[0] - 1

    @property
    def n_params(self) -> int:
        return self.W1.size + self.b1.size + self.W2.size + self.b2.size

    def params(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return self.W1, self.b1, self.W2, self.b2

    def is_finite(self) -> bool:
        return all(np.isfinite(p).all() for p in self.params())

    def same_shape(self, other: "QNetworkModel") -> bool:
        return all(a.shape == b.shape for a, b in zip(self.params(), other.params()))

    def equals(self, other: "QNetworkModel") -> bool:
        return self.same_shape(other) and all(
            np.array_equal(a, b) for a, b in zip(self.params(), other.params())
        )


@dataclass
class GradientSet:
    dW1: np.ndarray
    db1: np.ndarray
    dW2: np.ndarray
    db2: np.ndarray

    def params(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return self.dW1, self.db1, self.dW2, self.db2


@dataclass
class TrainBatch:
    """Replay tuples stacked column-wise: s (B, D), a (B,), r (B,), s_next (B, D)."""

    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray

    def __post_init__(self) -> None:
        self.s = np.atleast_2d(np.asarray(self.s, dtype=np.float64))
        self.s_next = np.atleast_2d(np.asarray(self.s_next, dtype=np.float64))
        self.a = np.asarray(self.a, dtype=np.int64).reshape(-1)
        self.r = np.asarray(self.r, dtype=np.float64).reshape(-1)
        n = len(self.a)
        if n == 0:
            raise ValueError("training batch is empty")
        if self.s.shape[0] != n or self.s_next.shape[0] != n or self.r.shape[0] != n:
            raise ShapeError("batch columns have different lengths")

    @classmethod
    def from_tuples(cls, tuples: Sequence[tuple]) -> "TrainBatch":
        if not tuples:
            raise ValueError("training batch is empty")
        s, a, r, s2 = zip(*tuples)
        return cls(np.array(s), np.array(a), np.array(r), np.array(s2))

    def __len__(self) -> int:
        return len(self.a)


def init_model(
    input_dim: int, hidden: int, n_rbgs: int, rng: np.random.Generator
) -> QNetworkModel:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation."""
    k1 = 1.0 / np.sqrt(input_dim)
    k2 = 1.0 / np.sqrt(hidden)
    return QNetworkModel(
        W1=rng.uniform(-k1, k1, size=(hidden, input_dim)),
        b1=rng.uniform(-k1, k1, size=hidden),
        W2=rng.uniform(-k2, k2, size=(n_rbgs + 1, hidden)),
        b2=rng.uniform(-k2, k2, size=n_rbgs + 1),
    )


def zeros_model(input_dim: int, hidden: int, n_rbgs: int) -> QNetworkModel:
    return QNetworkModel(
        np.zeros((hidden, input_dim)),
        np.zeros(hidden),
        np.zeros((n_rbgs + 1, hidden)),
        np.zeros(n_rbgs + 1),
    )


def param_count(input_dim: int, hidden: int, n_rbgs: int) -> int:
    # The two-layer count quoted as (3L+1)(M+1) only matches this when
    # input_dim == 2M+1; observations here carry 2M+3 features.
    return input_dim * hidden + hidden + hidden * (n_rbgs + 1) + (n_rbgs + 1)


_OPEN_LO = np.nextafter(0.0, 1.0)
_OPEN_HI = np.nextafter(1.0, 0.0)


def sigmoid(z: np.ndarray) -> np.ndarray:
    # expit rounds to exactly 0 or 1 once |z| > ~37; keep the open interval
    return np.clip(expit(z), _OPEN_LO, _OPEN_HI)


def _check_input(model: QNetworkModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.input_dim:
        raise ShapeError(f"input has {x.shape[-1]} features, model expects {model.input_dim}")
    if not np.isfinite(x).all():
        raise ValueError("input contains non-finite values")
    return x


def forward(model: QNetworkModel, x: np.ndarray) -> np.ndarray:
    """Action values for one observation (D,) or a stack of them (B, D)."""
    x = _check_input(model, x)
    h = np.maximum(x @ model.W1.T + model.b1, 0.0)
    return sigmoid(h @ model.W2.T + model.b2)


def hidden_activation(model: QNetworkModel, x: np.ndarray) -> np.ndarray:
    x = _check_input(model, x)
    return np.maximum(model.W1 @ x + model.b1, 0.0)


def _targets(target: QNetworkModel, batch: TrainBatch, gamma: float) -> np.ndarray:
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    if gamma == 0.0:
        return batch.r.copy()
    return batch.r + gamma * forward(target, batch.s_next).max(axis=1)


def td_loss(model: QNetworkModel, target: QNetworkModel, batch: TrainBatch, gamma: float) -> float:
    y = _targets(target, batch, gamma)
    q = forward(model, batch.s)[np.arange(len(batch)), batch.a]
    return float(np.mean((y - q) ** 2))


def td_loss_and_gradient(
    model: QNetworkModel, target: QNetworkModel, batch: TrainBatch, gamma: float
) -> tuple[float, GradientSet]:
    if batch.a.min() < 0 or batch.a.max() >= model.n_actions:
        raise ValueError("action index out of range")
    y = _targets(target, batch, gamma)
    x = _check_input(model, batch.s)
    B = len(batch)
    rows = np.arange(B)

    z1 = x @ model.W1.T + model.b1          # (B, L)
    h = np.maximum(z1, 0.0)
    q_all = sigmoid(h @ model.W2.T + model.b2)  # (B, M+1)
    q = q_all[rows, batch.a]
    resid = y - q

    # only the chosen action's output receives gradient
    dz2 = np.zeros_like(q_all)
    dz2[rows, batch.a] = -2.0 * resid * q * (1.0 - q) / B

    dW2 = dz2.T @ h
    db2 = dz2.sum(axis=0)
    dz1 = (dz2 @ model.W2) * (z1 > 0.0)
    dW1 = dz1.T @ x
    db1 = dz1.sum(axis=0)
    return float(np.mean(resid**2)), GradientSet(dW1, db1, dW2, db2)


def td_gradient(
    model: QNetworkModel, target: QNetworkModel, batch: TrainBatch, gamma: float
) -> GradientSet:
    """Batch-mean gradient of td_loss; the target network is held constant.

    ReLU'(0) is taken as 0.
    """
    return td_loss_and_gradient(model, target, batch, gamma)[1]


def sgd_step(model: QNetworkModel, grads: GradientSet, lr: float) -> QNetworkModel:
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    for p, g in zip(model.params(), grads.params()):
        if p.shape != g.shape:
            raise ShapeError("gradient shape does not match model")
        if not np.isfinite(g).all():
            raise FloatingPointError("non-finite gradient")
    new = QNetworkModel(*(p - lr * g for p, g in zip(model.params(), grads.params())))
    if not new.is_finite():
        raise FloatingPointError("update produced non-finite parameters")
    return new


def copy_to_target(model: QNetworkModel) -> QNetworkModel:
    return QNetworkModel(*(p.copy() for p in model.params()))


# -- serialisation -----------------------------------------------------------
#
# Flat record: D, L, M, W1 (row-major), b1, W2 (row-major), b2, every value a
# little-endian float64. The three leading dims form a 24-byte header.

HEADER_BYTES = 24


def to_flat(model: QNetworkModel) -> np.ndarray:
    head = np.array([model.input_dim, model.hidden_size, model.n_rbgs], dtype=np.float64)
    return np.concatenate([head] + [p.ravel(order="C") for p in model.params()])


def from_flat(values: Sequence[float]) -> QNetworkModel:
    flat = np.asarray(values, dtype=np.float64)
    if flat.size < 3:
        raise ShapeError("record too short")
    D, L, M = (int(v) for v in flat[:3])
    if (D, L, M) != tuple(flat[:3]) or min(D, L) < 1 or M < 0:
        raise ShapeError("bad header in model record")
    expected = 3 + param_count(D, L, M)
    if flat.size != expected:
        raise ShapeError(f"record holds {flat.size} values, expected {expected}")
    i = 3
    parts = []
    for shape in ((L, D), (L,), (M + 1, L), (M + 1,)):
        n = int(np.prod(shape))
        parts.append(flat[i:i + n].reshape(shape).copy())
        i += n
    return QNetworkModel(*parts)


def to_bytes(model: QNetworkModel) -> bytes:
    return to_flat(model).astype("<f8").tobytes()


def from_bytes(data: bytes) -> QNetworkModel:
    if len(data) % 8:
        raise ShapeError("byte length is not a multiple of 8")
    return from_flat(np.frombuffer(data, dtype="<f8"))


def to_json(model: QNetworkModel) -> str:
    # repr() of a float is the shortest string that round-trips exactly
    D, L, M = model.input_dim, model.hidden_size, model.n_rbgs
    params = [float(v) for v in to_flat(model)[3:]]
    return json.dumps({"D": D, "L": L, "M": M, "params": params})


def from_json(text: str) -> QNetworkModel:
    doc = json.loads(text)
    return from_flat([doc["D"], doc["L"], doc["M"], *doc["params"]])


def serialized_size(model: QNetworkModel) -> int:
    return HEADER_BYTES + 8 * model.n_params

