"""Channel utilisation, throughput, fairness, and the two-player toy game."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .env5g import SLOT_SECONDS, RbgStatus, SlotOutcome

STATUS_CODE = {RbgStatus.IDLE: 0, RbgStatus.UTILIZED: 1, RbgStatus.COLLIDED: 2, RbgStatus.INACTIVE: 3}
CODE_STATUS = {v: k for k, v in STATUS_CODE.items()}


@dataclass
class MetricsWindow:
    statuses: np.ndarray  # (slots, M) status codes
    ue_bits: dict[int, int] = field(default_factory=dict)

    @classmethod
    def from_outcomes(cls, outcomes: Sequence[SlotOutcome]) -> "MetricsWindow":
        statuses = np.array([[STATUS_CODE[s] for s in o.rbg_status] for o in outcomes], dtype=np.int8)
        bits: dict[int, int] = {}
        for o in outcomes:
            for ue, rec in o.records.items():
                bits[ue] = bits.get(ue, 0) + rec.transmitted_bits
        return cls(statuses.reshape(len(outcomes), -1), bits)

    @property
    def n_slots(self) -> int:
        return self.statuses.shape[0]

    def counts(self) -> dict[str, int]:
        return {
            "utilized": int((self.statuses == 1).sum()),
            "collided": int((self.statuses == 2).sum()),
            "idle": int((self.statuses == 0).sum()),
        }


def cue(window: MetricsWindow) -> dict[str, Fraction]:
    """Proportions of utilised, collided and idle RBG-slots (exact fractions)."""
    c = window.counts()
    n = sum(c.values())
    if n == 0:
        raise ValueError("empty metrics window")
    return {k: Fraction(v, n) for k, v in c.items()}


def avg_throughput(window: MetricsWindow, duration_s: float | None = None) -> float:
    """Mean over UEs of transmitted bits per second."""
    if duration_s is None:
        duration_s = window.n_slots * SLOT_SECONDS
    if duration_s <= 0:
        raise ValueError("duration must be positive")
    if not window.ue_bits:
        return 0.0
    return sum(window.ue_bits.values()) / len(window.ue_bits) / duration_s


def jfi(throughputs: Iterable[float]) -> float:
    x = np.asarray(list(throughputs), dtype=np.float64)
    if x.size == 0 or not np.any(x > 0):
        raise ValueError("Jain's index needs at least one positive throughput")
    if np.any(x < 0):
        raise ValueError("throughputs must be non-negative")
    return float(x.sum() ** 2 / (x.size * np.sum(x**2)))


def convergence_slot(
    collided_fraction: Sequence[float], window: int = 100, threshold: float = 0.1
) -> int | None:
    """First slot from which the trailing ``window``-slot collision rate stays
    below ``threshold`` until the end of the run; None if it never settles."""
    c = np.asarray(collided_fraction, dtype=np.float64)
    if c.size < window:
        return None
    rolling = np.convolve(c, np.ones(window) / window, mode="valid")  # rolling[i] ends at slot i+window-1
    bad = np.flatnonzero(rolling >= threshold)
    first_ok = 0 if bad.size == 0 else int(bad[-1]) + 1
    if first_ok >= rolling.size:
        return None
    return first_ok + window - 1


# -- two-player toy game -----------------------------------------------------

REQUEST, SILENT = "request", "silent"
ACTIONS = (REQUEST, SILENT)

Profile = tuple[str, str]
Table = dict[Profile, tuple[float, float]]


def toy_reward_table(success: float, collision: float, silent: float = 0.0) -> Table:
    """Two UEs, one channel: rewards for every actual action profile."""
    table: Table = {}
    for a, b in itertools.product(ACTIONS, ACTIONS):
        def r(me: str, other: str) -> float:
            if me == SILENT:
                return silent
            return collision if other == REQUEST else success

        table[(a, b)] = (r(a, b), r(b, a))
    return table


EXISTING_MARL_REWARDS = toy_reward_table(success=1.0, collision=0.0)
IMARL_REWARDS = toy_reward_table(success=1.0, collision=-1.0)


def reward_expectation_table(reward_table: Mapping[Profile, tuple[float, float]], epsilon: float) -> Table:
    """Expected rewards when each player follows its intended action with
    probability 1 - eps + eps/2 and the other one with eps/2."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    k = len(ACTIONS)
    keep = 1.0 - epsilon + epsilon / k
    flip = epsilon / k

    def p(intended: str, actual: str) -> float:
        return keep if intended == actual else flip

    out: Table = {}
    for intended in itertools.product(ACTIONS, ACTIONS):
        ea = eb = 0.0
        for actual in itertools.product(ACTIONS, ACTIONS):
            w = p(intended[0], actual[0]) * p(intended[1], actual[1])
            ra, rb = reward_table[actual]
            ea += w * ra
            eb += w * rb
        out[intended] = (ea, eb)
    return out


def nash_equilibria(table: Mapping[Profile, tuple[float, float]]) -> set[Profile]:
    """Pure profiles where neither player gains strictly by deviating alone."""
    eq = set()
    for a, b in itertools.product(ACTIONS, ACTIONS):
        ra, rb = table[(a, b)]
        if any(table[(x, b)][0] > ra for x in ACTIONS):
            continue
        if any(table[(a, y)][1] > rb for y in ACTIONS):
            continue
        eq.add((a, b))
    return eq
