"""Reference schedulers: centralised proportional fairness and DQSA rewards."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .agent import SUCCESS


@dataclass
class PfState:
    n_ues: int
    beta: float = 0.01
    max_rbg_per_ue: int = 1
    warm_start: float = 1.0  # bits/slot, keeps the first ratio finite
    avg_rate: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.avg_rate = np.full(self.n_ues, float(self.warm_start))


def pf_schedule(
    rates: np.ndarray,
    buffers: Sequence[int],
    state: PfState,
    eligible_ues: Sequence[int] | None = None,
    active_rbgs: Sequence[int] | None = None,
) -> dict[int, int]:
    """Map RBG -> UE (0-based), visiting RBGs in index order.

    Each RBG goes to the UE with the largest rate / average-rate among UEs
    with data and below the per-UE cap; ties go to the lowest UE index.
    """
    rates = np.asarray(rates, dtype=np.float64)
    n_ues, n_rbgs = rates.shape
    ues = range(n_ues) if eligible_ues is None else eligible_ues
    rbgs = range(n_rbgs) if active_rbgs is None else active_rbgs
    given = dict.fromkeys(ues, 0)
    alloc: dict[int, int] = {}
    for k in rbgs:
        best, best_ratio = None, -np.inf
        for u in sorted(given):
            if buffers[u] <= 0 or given[u] >= state.max_rbg_per_ue:
                continue
            ratio = rates[u, k] / max(state.avg_rate[u], 1e-300)
            if ratio > best_ratio:
                best, best_ratio = u, ratio
        if best is not None:
            alloc[k] = best
            given[best] += 1
    return alloc


def pf_update(state: PfState, served_bits: Sequence[float]) -> None:
    """Exponential average of the bits each UE was served this slot."""
    served = np.asarray(served_bits, dtype=np.float64)
    state.avg_rate = (1.0 - state.beta) * state.avg_rate + state.beta * served


def dqsa_reward(outcome: str, x: float, alpha: float = 0.0) -> float:
    """Non-punishing reward: data rate on success, zero otherwise.

    ``alpha`` is accepted so this can stand in for the agent's reward hook.
    """
    return float(x) if outcome == SUCCESS else 0.0
