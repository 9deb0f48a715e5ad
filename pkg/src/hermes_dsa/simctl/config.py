"""Scenario documents: validation, defaults, geometry shorthand."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Literal

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeFloat,
    NonNegativeInt,
    PositiveFloat,
    PositiveInt,
    ValidationError,
    field_validator,
    model_validator,
)

from ..env5g import DEFAULT_COVERAGE_M, DEFAULT_EFFICIENCY, SLOTS_PER_FRAME, EventKind


class ScenarioError(ValueError):
    """A scenario document failed validation."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class AppSpec(_Strict):
    packet_interval: PositiveInt = 1
    packet_size: PositiveInt = 1000


class DeploymentSpec(_Strict):
    """Either explicit distances, a line layout, or one shared distance.

    Line layout: UEs spaced ``interval_d`` apart, the middle UE (index
    (n-1)//2) at ``anchor_m``.
    """

    distances: list[NonNegativeFloat] | None = None
    interval_d: PositiveFloat | None = None
    anchor_m: NonNegativeFloat = 500.0
    distance_m: NonNegativeFloat = 300.0

    def resolve(self, n_ues: int) -> list[float]:
        if self.distances is not None:
            if len(self.distances) != n_ues:
                raise ScenarioError(f"deployment.distances has {len(self.distances)} entries for {n_ues} UEs")
            return list(self.distances)
        if self.interval_d is not None:
            mid = (n_ues - 1) // 2
            return [self.anchor_m + (i - mid) * self.interval_d for i in range(n_ues)]
        return [self.distance_m] * n_ues


class EventSpec(_Strict):
    kind: EventKind
    target: NonNegativeInt
    slot: NonNegativeInt | None = None
    frame: NonNegativeInt | None = None

    @model_validator(mode="after")
    def _one_time(self) -> "EventSpec":
        if (self.slot is None) == (self.frame is None):
            raise ValueError("event needs exactly one of 'slot' or 'frame'")
        return self

    @property
    def at_slot(self) -> int:
        return self.slot if self.slot is not None else self.frame * SLOTS_PER_FRAME


class ScenarioConfig(_Strict):
    n_ues: PositiveInt
    m_rbgs: PositiveInt
    frames: PositiveInt
    method: Literal["hermes", "pf", "dqsa"] = "hermes"
    seed: int = 0
    name: str | None = None

    deployment: DeploymentSpec = Field(default_factory=DeploymentSpec)
    applications: list[AppSpec] = Field(default_factory=lambda: [AppSpec()])
    coverage_m: PositiveFloat = DEFAULT_COVERAGE_M
    efficiency: list[PositiveFloat] = Field(default_factory=lambda: list(DEFAULT_EFFICIENCY))

    # agents
    epsilon: float = Field(0.05, ge=0.0, le=1.0)
    gamma: float = Field(0.95, ge=0.0, lt=1.0)
    alpha: NonNegativeFloat = 1.0
    hidden: PositiveInt = 64
    lr: PositiveFloat = 0.01
    batch_size: PositiveInt = 32
    train_steps: PositiveInt = 4
    buffer_capacity: PositiveInt = 500
    age_cap: PositiveInt = 50
    train_every: PositiveInt = 10
    shuffle_every: PositiveInt = 50
    shuffle_latency: NonNegativeInt = 0

    # shuffler
    lam: NonNegativeFloat = Field(1.0, alias="lambda")
    num_shufflers: PositiveInt = 1
    matching: Literal["maximin", "km"] = "maximin"
    mla_track: Literal["uploader", "lineage"] = "lineage"

    # proportional fairness
    pf_beta: float = Field(0.01, gt=0.0, le=1.0)
    pf_max_rbg: PositiveInt = 1
    pf_period: PositiveInt = 1

    # metrics
    metrics_window_frames: PositiveInt = 100
    convergence_threshold: float = Field(0.1, gt=0.0, le=1.0)

    # dynamic membership: ids >= initial_* start inactive
    initial_ues: NonNegativeInt | None = None
    initial_rbgs: NonNegativeInt | None = None
    events: list[EventSpec] = Field(default_factory=list)

    @field_validator("efficiency")
    @classmethod
    def _fifteen(cls, v: list[float]) -> list[float]:
        if len(v) != 15:
            raise ValueError("efficiency table needs 15 entries (CQI 1..15)")
        return v

    @model_validator(mode="after")
    def _consistent(self) -> "ScenarioConfig":
        if self.initial_ues is not None and self.initial_ues > self.n_ues:
            raise ValueError("initial_ues exceeds n_ues")
        if self.initial_rbgs is not None and self.initial_rbgs > self.m_rbgs:
            raise ValueError("initial_rbgs exceeds m_rbgs")
        horizon = self.total_slots
        for ev in self.events:
            if ev.at_slot >= horizon:
                raise ValueError(f"event at slot {ev.at_slot} is beyond the {horizon}-slot horizon")
            limit = self.n_ues if ev.kind in (EventKind.ADD_UE, EventKind.REMOVE_UE) else self.m_rbgs
            if ev.target >= limit:
                raise ValueError(f"event target {ev.target} out of range for {ev.kind.value}")
        for d in self.distances():
            if d > self.coverage_m:
                raise ValueError(f"UE at {d} m lies outside the {self.coverage_m} m coverage")
        return self

    @property
    def total_slots(self) -> int:
        return self.frames * SLOTS_PER_FRAME

    def distances(self) -> list[float]:
        return self.deployment.resolve(self.n_ues)

    def to_document(self) -> dict[str, Any]:
        return self.model_dump(mode="json", by_alias=True)


def load_scenario(document: dict[str, Any] | str | Path) -> ScenarioConfig:
    """Validate a scenario document (mapping, JSON text, or a path to JSON)."""
    if isinstance(document, Path) or (isinstance(document, str) and not document.lstrip().startswith("{")):
        document = json.loads(Path(document).read_text(encoding="utf-8"))
    elif isinstance(document, str):
        document = json.loads(document)
    try:
        return ScenarioConfig.model_validate(document)
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in exc.errors()
        )
        raise ScenarioError(problems) from exc


def _set_dotted(doc: dict[str, Any], dotted: str, value: Any) -> None:
    *parents, leaf = dotted.split(".")
    node = doc
    for key in parents:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ScenarioError(f"sweep.field: '{dotted}' does not name a nested field")
    node[leaf] = value


def is_sweep(document: dict[str, Any]) -> bool:
    return "sweep" in document


def expand_sweep(document: dict[str, Any]) -> list[tuple[str, ScenarioConfig]]:
    """Expand ``{"base": {...}, "sweep": {"field": f, "values": [...]}}`` into configs.

    Each entry is labelled ``"<leaf>=<value>"``. ``field`` may be dotted
    (``deployment.interval_d``).
    """
    extra = set(document) - {"base", "sweep"}
    if extra:
        raise ScenarioError(f"{sorted(extra)[0]}: unexpected key in sweep document")
    sweep = document.get("sweep")
    if not isinstance(sweep, dict) or "field" not in sweep or "values" not in sweep:
        raise ScenarioError("sweep: needs 'field' and 'values'")
    if not isinstance(sweep["values"], list) or not sweep["values"]:
        raise ScenarioError("sweep.values: must be a non-empty list")
    out = []
    for value in sweep["values"]:
        doc = json.loads(json.dumps(document.get("base", {})))
        _set_dotted(doc, sweep["field"], value)
        label = f"{sweep['field'].rsplit('.', 1)[-1]}={value}"
        try:
            out.append((label, load_scenario(doc)))
        except ScenarioError as exc:
            raise ScenarioError(f"{label}: {exc}") from exc
    return out


def read_document(source: str | Path) -> dict[str, Any]:
    """Load a JSON document from a path, or a bundled scenario by name."""
    path = Path(source)
    if not path.exists():
        bundled = Path(__file__).resolve().parent.parent / "scenarios" / f"{Path(str(source)).stem}.json"
        if path.suffix in ("", ".json") and bundled.exists():
            path = bundled
        else:
            raise FileNotFoundError(f"no scenario file or bundled scenario named {source!r}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"<root>: invalid JSON ({exc.msg} at line {exc.lineno})") from exc


def bundled_scenarios() -> list[str]:
    folder = Path(__file__).resolve().parent.parent / "scenarios"
    return sorted(p.stem for p in folder.glob("*.json"))
