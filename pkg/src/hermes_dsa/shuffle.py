"""Model shuffler: score UE/model preferences and redistribute models.

Only uploaded Q networks enter here. Preferences combine how long ago a UE
last received a given uploader's model (MLA) with a distance between the
normalised output layers (MD):

    E[i, j] = MLA[i, j] - lambda * MD[i, j]

Distribution maximises the smallest matched preference (bottleneck
assignment); maximum-sum assignment is kept for comparison runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .nnet import QNetworkModel, ShapeError

Strategy = Literal["maximin", "km"]


def normalize_model(model: QNetworkModel) -> QNetworkModel:
    """Zero-mean every column of the output weights and the output bias.

    Subtracting the same value from every action value leaves the argmax
    unchanged, so this only removes information the policy ignores.
    """
    W2 = model.W2 - model.W2.mean(axis=0, keepdims=True)
    b2 = model.b2 - model.b2.mean()
    return QNetworkModel(model.W1.copy(), model.b1.copy(), W2, b2)


def model_distance(mi: QNetworkModel, mj: QNetworkModel) -> float:
    """Mean squared difference of the normalised output layers."""
    if mi.W2.shape != mj.W2.shape or mi.b2.shape != mj.b2.shape:
        raise ShapeError("models have different output layers")
    a, b = normalize_model(mi), normalize_model(mj)
    n = a.W2.size + a.b2.size
    return float((np.sum((a.W2 - b.W2) ** 2) + np.sum((a.b2 - b.b2) ** 2)) / n)


def distance_matrix(models: Sequence[QNetworkModel]) -> np.ndarray:
    # flatten once; pairwise squared distances filled in (i, j) order
    flat = []
    for m in models:
        nm = normalize_model(m)
        flat.append(np.concatenate([nm.W2.ravel(), nm.b2]))
    X = np.array(flat)
    n = len(models)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d = float(np.mean((X[i] - X[j]) ** 2))
            out[i, j] = out[j, i] = d
    return out


@dataclass
class MlaTable:
    """Round in which each UE last received each model (-1: never).

    Columns are model identities. With ``track="uploader"`` a model is
    named after the UE that uploaded it this round. With ``track="lineage"``
    the shuffler follows each model as it moves between UEs: the model it
    hands to UE i comes back from UE i next round under the same name, and
    a UE joining with a fresh model starts a new lineage.
    """

    n_ues: int
    track: Literal["uploader", "lineage"] = "uploader"
    current_round: int = 0
    last_assigned: np.ndarray = field(init=False)
    holding: dict[int, int] = field(init=False)  # UE -> lineage it holds
    _next_lineage: int = field(init=False)

    def __post_init__(self) -> None:
        self.last_assigned = np.full((self.n_ues, self.n_ues), -1, dtype=np.int64)
        self.holding = {ue: ue for ue in range(self.n_ues)}
        self._next_lineage = self.n_ues

    def model_ids(self, uploaders: Sequence[int]) -> list[int]:
        if self.track == "uploader":
            return list(uploaders)
        return [self.holding[u] for u in uploaders]

    def fresh_model(self, ue: int) -> None:
        """UE ``ue`` now holds a model the shuffler has never seen."""
        if self.track == "uploader":
            return
        lineage = self._next_lineage
        self._next_lineage += 1
        if lineage >= self.last_assigned.shape[1]:
            grow = np.full((self.n_ues, self.last_assigned.shape[1]), -1, dtype=np.int64)
            self.last_assigned = np.hstack([self.last_assigned, grow])
        self.holding[ue] = lineage

    def record(self, assignment: Mapping[int, int]) -> None:
        """``assignment`` maps receiving UE -> uploading UE."""
        ids = dict(zip(assignment.values(), self.model_ids(list(assignment.values()))))
        for ue, src in assignment.items():
            self.last_assigned[ue, ids[src]] = self.current_round
        if self.track == "lineage":
            for ue, src in assignment.items():
                self.holding[ue] = ids[src]

    def advance(self) -> None:
        self.current_round += 1


def mla_scores(table: MlaTable, participants: Sequence[int]) -> np.ndarray:
    """Rounds since UE i last held model j; never-held scores current_round + 1."""
    rows = np.asarray(participants, dtype=np.int64)
    cols = np.asarray(table.model_ids(participants), dtype=np.int64)
    last = table.last_assigned[np.ix_(rows, cols)]
    # last == -1 gives current_round + 1 by the same formula
    return (table.current_round - last).astype(np.float64)


def preference_matrix(
    models: Sequence[QNetworkModel], table: MlaTable, participants: Sequence[int], lam: float
) -> np.ndarray:
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    E = mla_scores(table, participants)
    if lam:
        E = E - lam * distance_matrix(models)
    return E


# -- matchings ---------------------------------------------------------------


def max_bipartite_matching(adjacency: np.ndarray) -> tuple[np.ndarray, bool]:
    """Maximum-cardinality matching by augmenting paths, rows tried in order.

    Returns (match, perfect) where match[i] is the column for row i or -1.
    """
    adj = np.asarray(adjacency, dtype=bool)
    n_rows, n_cols = adj.shape
    neighbours = [np.flatnonzero(adj[i]).tolist() for i in range(n_rows)]
    col_owner = [-1] * n_cols

    def augment(i: int, seen: list[bool]) -> bool:
        for j in neighbours[i]:
            if not seen[j]:
                seen[j] = True
                if col_owner[j] < 0 or augment(col_owner[j], seen):
                    col_owner[j] = i
                    return True
        return False

    for i in range(n_rows):
        augment(i, [False] * n_cols)

    match = np.full(n_rows, -1, dtype=np.int64)
    for j, i in enumerate(col_owner):
        if i >= 0:
            match[i] = j
    size = int((match >= 0).sum())
    return match, size == n_rows == n_cols


def _check_square(E: np.ndarray) -> np.ndarray:
    E = np.asarray(E, dtype=np.float64)
    if E.ndim != 2 or E.shape[0] != E.shape[1]:
        raise ValueError("preference matrix must be square")
    if not np.isfinite(E).all():
        raise ValueError("preference matrix has non-finite entries")
    return E


def km_matching(E: np.ndarray) -> np.ndarray:
    """Perfect matching with maximum total preference."""
    E = _check_square(E)
    rows, cols = linear_sum_assignment(E, maximize=True)
    match = np.empty(len(rows), dtype=np.int64)
    match[rows] = cols
    return match


def maximin_matching(E: np.ndarray) -> np.ndarray:
    """Perfect matching whose smallest matched preference is as large as possible.

    Binary search over the sorted distinct entries: a threshold is feasible
    when the graph of entries >= threshold has a perfect matching. The
    lowest entry is always feasible (complete graph).
    """
    E = _check_square(E)
    values = np.unique(E)
    lo, hi = 0, len(values) - 1
    best, _ = max_bipartite_matching(E >= values[0])
    while lo < hi:
        mid = (lo + hi + 1) // 2
        match, perfect = max_bipartite_matching(E >= values[mid])
        if perfect:
            lo, best = mid, match
        else:
            hi = mid - 1
    return best


def bottleneck(E: np.ndarray, match: np.ndarray) -> float:
    return float(np.min(np.asarray(E)[np.arange(len(match)), match]))


def total(E: np.ndarray, match: np.ndarray) -> float:
    return float(np.sum(np.asarray(E)[np.arange(len(match)), match]))


# -- rounds --------------------------------------------------------------------


@dataclass
class RoundResult:
    models: dict[int, QNetworkModel]  # receiving UE -> model
    source: dict[int, int]  # receiving UE -> uploading UE
    bottleneck: float
    total: float
    preferences: np.ndarray | None = None


def shuffle_round(
    uploads: Mapping[int, QNetworkModel],
    table: MlaTable,
    lam: float = 1.0,
    strategy: Strategy = "maximin",
    advance: bool = True,
    keep_matrix: bool = False,
) -> RoundResult:
    """Redistribute one shuffler's uploads.

    UEs that did not upload are simply absent from ``uploads``; they keep
    their own model. With ``advance=False`` the caller bumps the round once
    all shufflers of an epoch are done.
    """
    for ue, m in uploads.items():
        if not isinstance(m, QNetworkModel):
            raise TypeError(f"upload from UE {ue} is not a Q network")
    participants = sorted(uploads)
    models = [uploads[u] for u in participants]
    if not participants:
        if advance:
            table.advance()
        return RoundResult({}, {}, float("nan"), 0.0)
    E = preference_matrix(models, table, participants, lam)
    if strategy == "maximin":
        match = maximin_matching(E)
    elif strategy == "km":
        match = km_matching(E)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    source = {participants[i]: participants[int(j)] for i, j in enumerate(match)}
    table.record(source)
    if advance:
        table.advance()
    return RoundResult(
        models={ue: uploads[src] for ue, src in source.items()},
        source=source,
        bottleneck=bottleneck(E, match),
        total=total(E, match),
        preferences=E if keep_matrix else None,
    )


def partition_ues(ues: Sequence[int], num_shufflers: int, rng: np.random.Generator) -> list[list[int]]:
    """Random split into near-equal disjoint groups (sizes differ by at most 1)."""
    if num_shufflers < 1:
        raise ValueError("need at least one shuffler")
    order = rng.permutation(np.asarray(ues, dtype=np.int64))
    return [sorted(int(u) for u in part) for part in np.array_split(order, num_shufflers)]
