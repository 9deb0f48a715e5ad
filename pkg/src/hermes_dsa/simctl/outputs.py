"""Run output files: timeseries.csv, summary.json, config.resolved.json."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from ..metrics import CODE_STATUS, STATUS_CODE
from ..env5g import RbgStatus
from .config import ScenarioConfig, load_scenario
from .runner import RECORD_DTYPE, RunArtifacts
from .summary import summarize

TIMESERIES = "timeseries.csv"
SUMMARY = "summary.json"
RESOLVED = "config.resolved.json"
SHUFFLES = "shuffles.json"


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_outputs(artifacts: RunArtifacts, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    M = artifacts.statuses.shape[1]
    names = [CODE_STATUS[c].value for c in range(len(CODE_STATUS))]
    status_text = [[names[c] for c in row] for row in artifacts.statuses.tolist()]
    with open(out / TIMESERIES, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["slot", "ue_id", "action", "success", "bits"] + [f"rbg{k + 1}" for k in range(M)])
        for slot, ue, action, success, bits in artifacts.records.tolist():
            writer.writerow([slot, ue, action, success, bits, *status_text[slot]])
    _dump_json(artifacts.summary, out / SUMMARY)
    _dump_json(artifacts.config.to_document(), out / RESOLVED)
    _dump_json(artifacts.shuffles, out / SHUFFLES)
    return out


def read_timeseries(path: str | Path, n_slots: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Parse timeseries.csv back into (records, statuses)."""
    rows = []
    status_by_slot: dict[int, list[int]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n_rbg = len(header) - 5
        for row in reader:
            slot = int(row[0])
            rows.append((slot, int(row[1]), int(row[2]), int(row[3]), int(row[4])))
            if slot not in status_by_slot:
                status_by_slot[slot] = [STATUS_CODE[RbgStatus(v)] for v in row[5:]]
    records = np.array(rows, dtype=RECORD_DTYPE)
    T = n_slots if n_slots is not None else (max(status_by_slot) + 1 if status_by_slot else 0)
    statuses = np.full((T, n_rbg), STATUS_CODE[RbgStatus.INACTIVE], dtype=np.int8)
    for slot, codes in status_by_slot.items():
        statuses[slot] = codes
    return records, statuses


def analyze(in_dir: str | Path) -> dict:
    """Recompute the summary of a finished run from its time series."""
    src = Path(in_dir)
    cfg: ScenarioConfig = load_scenario(json.loads((src / RESOLVED).read_text(encoding="utf-8")))
    records, statuses = read_timeseries(src / TIMESERIES, cfg.total_slots)
    return summarize(records, statuses, cfg)
