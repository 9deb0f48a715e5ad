"""Shared helpers for the test suite (random models, batches, brute-force oracles)."""

from __future__ import annotations

import itertools

import numpy as np

from hermes_dsa import nnet


def random_model(rng: np.random.Generator, D: int, L: int, M: int, scale: float = 1.0) -> nnet.QNetworkModel:
    return nnet.QNetworkModel(
        rng.normal(0, scale, (L, D)),
        rng.normal(0, scale, L),
        rng.normal(0, scale, (M + 1, L)),
        rng.normal(0, scale, M + 1),
    )


def random_batch(rng: np.random.Generator, D: int, M: int, B: int) -> nnet.TrainBatch:
    return nnet.TrainBatch(
        rng.uniform(0, 1, (B, D)),
        rng.integers(0, M + 1, B),
        rng.uniform(0, 1, B),
        rng.uniform(0, 1, (B, D)),
    )


_PERMS: dict[int, np.ndarray] = {}


def all_permutations(n: int) -> np.ndarray:
    if n not in _PERMS:
        _PERMS[n] = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    return _PERMS[n]


def matched_values(E: np.ndarray) -> np.ndarray:
    """(n!, n) array: E[i, p[i]] for every permutation p."""
    n = len(E)
    perms = all_permutations(n)
    return np.asarray(E)[np.arange(n), perms]


def brute_force_max_sum(E: np.ndarray) -> float:
    return float(matched_values(E).sum(axis=1).max())


def brute_force_max_min(E: np.ndarray) -> float:
    return float(matched_values(E).min(axis=1).max())


def brute_force_matching_size(adj: np.ndarray) -> int:
    return int(matched_values(np.asarray(adj, dtype=np.int64)).sum(axis=1).max())


def random_matrix(rng: np.random.Generator, n: int) -> np.ndarray:
    """Mix of tie-heavy integer matrices and continuous ones."""
    if rng.random() < 0.5:
        return rng.integers(-3, 4, (n, n)).astype(np.float64)
    return rng.normal(size=(n, n))


# -- gradient checking -----------------------------------------------------------


def finite_difference(model, target, batch, gamma, h=1e-5):
    grads = []
    for p in model.params():
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            up = nnet.td_loss(model, target, batch, gamma)
            p[idx] = old - h
            down = nnet.td_loss(model, target, batch, gamma)
            p[idx] = old
            g[idx] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def near_kink(model, batch, margin=1e-3):
    z = batch.s @ model.W1.T + model.b1
    return bool(np.any(np.abs(z) < margin))


def max_relative_error(analytic, numeric, floor=1e-7):
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def gradient_check_instances(count, seed=7):
    """Random (model, target, batch, gamma) away from ReLU kinks."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        M = int(rng.integers(0, 4))
        D, L, B = 2 * M + 3, int(rng.integers(1, 7)), int(rng.integers(1, 6))
        m, t = random_model(rng, D, L, M), random_model(rng, D, L, M)
        b = random_batch(rng, D, M, B)
        if near_kink(m, b):
            continue
        out.append((m, t, b, float(rng.choice([0.0, 0.5, 0.95]))))
    return out
