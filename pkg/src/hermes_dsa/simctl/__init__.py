from .config import (
    AppSpec,
    DeploymentSpec,
    EventSpec,
    ScenarioConfig,
    ScenarioError,
    bundled_scenarios,
    expand_sweep,
    is_sweep,
    load_scenario,
    read_document,
)
from .outputs import analyze, read_timeseries, write_outputs
from .runner import RunArtifacts, run
from .seeds import SeedStreams, seed_streams

__all__ = [
    "AppSpec",
    "DeploymentSpec",
    "EventSpec",
    "RunArtifacts",
    "ScenarioConfig",
    "ScenarioError",
    "SeedStreams",
    "analyze",
    "bundled_scenarios",
    "expand_sweep",
    "is_sweep",
    "load_scenario",
    "read_document",
    "read_timeseries",
    "run",
    "seed_streams",
    "write_outputs",
]
