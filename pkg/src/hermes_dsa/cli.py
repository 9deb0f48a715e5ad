"""Command line entry point: ``hermes-dsa run | analyze | match | scenarios``.

Failures print one JSON object ``{"error": ..., "message": ...}`` to stderr
and exit nonzero (2 for invalid input, 1 for anything else).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import shuffle
from .simctl import (
    ScenarioError,
    analyze,
    bundled_scenarios,
    expand_sweep,
    is_sweep,
    load_scenario,
    read_document,
    run,
    write_outputs,
)


def _headline(summary: dict) -> dict:
    w = summary["window"]
    return {
        "method": summary["method"],
        "seed": summary["seed"],
        "cue_utilized": w["cue"]["utilized"] if w["cue"] else None,
        "jfi": w["jfi"],
        "avg_throughput_bps": w["avg_throughput_bps"],
        "convergence_slot": summary["convergence_slot"],
    }


def _apply_overrides(doc: dict, args: argparse.Namespace) -> dict:
    doc = dict(doc)
    for key in ("seed", "frames", "method"):
        value = getattr(args, key)
        if value is not None:
            doc[key] = value
    return doc


def cmd_run(args: argparse.Namespace) -> int:
    document = read_document(args.config)
    out = Path(args.out)
    if is_sweep(document):
        document = {**document, "base": _apply_overrides(document.get("base", {}), args)}
        results = {}
        for label, cfg in expand_sweep(document):
            art = run(cfg)
            write_outputs(art, out / label)
            results[label] = _headline(art.summary)
        (out / "sweep.json").write_text(json.dumps(results, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        print(json.dumps(results, indent=2, sort_keys=True))
        return 0
    cfg = load_scenario(_apply_overrides(document, args))
    art = run(cfg)
    write_outputs(art, out)
    print(json.dumps(_headline(art.summary), indent=2, sort_keys=True))
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    print(json.dumps(analyze(args.input), indent=2, sort_keys=True))
    return 0


def _read_matrix(path: str) -> np.ndarray:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        data = np.loadtxt(path, delimiter=",", ndmin=2)
    return np.asarray(data, dtype=np.float64)


def cmd_match(args: argparse.Namespace) -> int:
    E = _read_matrix(args.matrix)
    try:
        match = shuffle.km_matching(E) if args.strategy == "km" else shuffle.maximin_matching(E)
    except ValueError as exc:
        raise ScenarioError(f"matrix: {exc}") from exc
    print(
        json.dumps(
            {
                "strategy": args.strategy,
                "assignment": match.tolist(),
                "bottleneck": shuffle.bottleneck(E, match),
                "total": shuffle.total(E, match),
            }
        )
    )
    return 0


def cmd_scenarios(args: argparse.Namespace) -> int:
    print("\n".join(bundled_scenarios()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hermes-dsa", description="Decentralized spectrum access simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario (or a sweep) and write outputs")
    p.add_argument("--config", required=True, help="scenario JSON path or bundled scenario name")
    p.add_argument("--seed", type=int)
    p.add_argument("--frames", type=int)
    p.add_argument("--method", choices=["hermes", "pf", "dqsa"])
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("analyze", help="recompute the summary of a finished run")
    p.add_argument("--in", dest="input", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("match", help="solve one assignment problem")
    p.add_argument("--matrix", required=True, help="square matrix as JSON or CSV")
    p.add_argument("--strategy", choices=["maximin", "km"], default="maximin")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("scenarios", help="list bundled scenarios")
    p.set_defaults(func=cmd_scenarios)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, FileNotFoundError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - last-resort error record
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
