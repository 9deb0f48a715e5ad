"""Named random streams derived from one master seed.

Each stream is seeded from sha256("<master>:<key>"), so adding a new stream
never shifts an existing one, and the derivation does not depend on the
order in which streams are first requested.
"""

from __future__ import annotations

import hashlib
from typing import Mapping

import numpy as np

ENV_CQI = "env-cqi"
ENV_TRAFFIC = "env-traffic"
SHUFFLER_PARTITION = "shuffler-partition"


def agent_init(ue: int) -> str:
    return f"agent-init/{ue}"


def agent_epsilon(ue: int) -> str:
    return f"agent-epsilon/{ue}"


def agent_replay(ue: int) -> str:
    return f"agent-replay/{ue}"


def derive_seed(master_seed: int, key: str) -> int:
    digest = hashlib.sha256(f"{master_seed}:{key}".encode("utf-8")).digest()
    return int.from_bytes(digest[:16], "big")


class SeedStreams:
    """Lazily created ``np.random.Generator`` per stream name.

    ``keys`` remaps a stream name to a different derivation key; tests use
    it to perturb one stream while leaving every other stream untouched.
    """

    def __init__(self, master_seed: int, keys: Mapping[str, str] | None = None):
        self.master_seed = int(master_seed)
        self.keys = dict(keys or {})
        self._streams: dict[str, np.random.Generator] = {}

    def seed_for(self, name: str) -> int:
        if not name:
            raise ValueError("stream name must be non-empty")
        return derive_seed(self.master_seed, self.keys.get(name, name))

    def get(self, name: str) -> np.random.Generator:
        if name not in self._streams:
            self._streams[name] = np.random.default_rng(self.seed_for(name))
        return self._streams[name]


def seed_streams(master_seed: int, keys: Mapping[str, str] | None = None) -> SeedStreams:
    return SeedStreams(master_seed, keys)
