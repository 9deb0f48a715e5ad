"""Summary metrics from the per-slot time series (shared by run and analyze)."""

from __future__ import annotations

import numpy as np

from ..env5g import SLOT_SECONDS, SLOTS_PER_FRAME
from ..metrics import MetricsWindow, avg_throughput, convergence_slot, cue, jfi


def window_metrics(records: np.ndarray, statuses: np.ndarray, start: int, stop: int) -> dict:
    sel = records[(records["slot"] >= start) & (records["slot"] < stop)]
    ues = np.unique(sel["ue_id"])
    bits = {int(u): int(sel["bits"][sel["ue_id"] == u].sum()) for u in ues}
    window = MetricsWindow(statuses[start:stop], bits)
    duration = (stop - start) * SLOT_SECONDS
    per_ue = {str(u): b / duration for u, b in bits.items()}
    try:
        fairness = jfi(per_ue.values())
    except ValueError:
        fairness = None
    counts = window.counts()
    try:
        c = {k: float(v) for k, v in cue(window).items()}
    except ValueError:
        c = None
    return {
        "start_slot": start,
        "stop_slot": stop,
        "cue": c,
        "counts": counts,
        "avg_throughput_bps": avg_throughput(window, duration),
        "jfi": fairness,
        "per_ue_throughput_bps": per_ue,
    }


def collided_fraction(statuses: np.ndarray) -> np.ndarray:
    active = (statuses != 3).sum(axis=1)
    collided = (statuses == 2).sum(axis=1)
    return np.divide(collided, active, out=np.zeros(len(statuses)), where=active > 0)


def full_use_fraction(statuses: np.ndarray, start: int, stop: int) -> float:
    """Share of slots in [start, stop) where every active RBG carried a transmission.

    With one request per UE this is the share of slots with exactly as many
    distinct, non-colliding requesters as there are active RBGs.
    """
    win = statuses[start:stop]
    active = win != 3
    full = ((win == 1) | ~active).all(axis=1) & active.any(axis=1)
    return float(full.mean()) if len(win) else 0.0


def rbg_bits(records: np.ndarray, n_slots: int, n_rbgs: int) -> np.ndarray:
    """(slots, M) bits carried per RBG per slot."""
    out = np.zeros((n_slots, n_rbgs), dtype=np.int64)
    ok = (records["success"] == 1) & (records["action"] <= n_rbgs)
    np.add.at(out, (records["slot"][ok], records["action"][ok] - 1), records["bits"][ok])
    return out


def summarize(records: np.ndarray, statuses: np.ndarray, cfg) -> dict:
    T = statuses.shape[0]
    w = min(T, cfg.metrics_window_frames * SLOTS_PER_FRAME)
    conv = convergence_slot(collided_fraction(statuses), window=min(100, T), threshold=cfg.convergence_threshold)
    return {
        "method": cfg.method,
        "seed": cfg.seed,
        "slots": T,
        "window": window_metrics(records, statuses, T - w, T),
        "overall": window_metrics(records, statuses, 0, T),
        "convergence_slot": conv,
        "convergence_definition": (
            f"first slot from which the trailing 100-slot collided share stays below {cfg.convergence_threshold}"
        ),
    }


def frame_series(per_slot: np.ndarray) -> np.ndarray:
    """Sum a per-slot series into whole frames (a trailing partial frame is dropped)."""
    n = len(per_slot) // SLOTS_PER_FRAME
    return per_slot[: n * SLOTS_PER_FRAME].reshape(n, SLOTS_PER_FRAME).sum(axis=1)


def rbg_adaptation(
    bits_per_frame: np.ndarray,
    start_frame: int,
    steady: tuple[int, int],
    fraction: float = 0.6,
    smooth: int = 5,
) -> tuple[int | None, float]:
    """Frames after ``start_frame`` until a channel reaches ``fraction`` of its steady level.

    The steady level is the mean over frames ``steady[0]:steady[1]``. The
    series is smoothed with a trailing ``smooth``-frame mean (frames before
    ``start_frame`` excluded). Returns (frames or None, steady mean).
    """
    series = np.asarray(bits_per_frame, dtype=np.float64)
    level = float(series[steady[0] : steady[1]].mean())
    after = series[start_frame:]
    for k in range(len(after)):
        lo = max(0, k - smooth + 1)
        if after[lo : k + 1].mean() >= fraction * level and level > 0:
            return k, level
    return None, level
