"""Slotted uplink environment: CQI processes, buffers, collisions.

Frequency layout follows the usual 5G numbers: an RBG is 16 RBs of 12
subcarriers, a slot carries 14 OFDM symbols of which the first 2 are DMRS.
One slot is 1 ms and a frame is 10 slots.

Per-slot call order used by the simulation loop:

    traffic_tick -> cqi_tick (every 200 slots) -> observations/actions
    -> resolve_slot -> feedback
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

SLOTS_PER_FRAME = 10
SLOT_SECONDS = 1e-3
RBS_PER_RBG = 16
SUBCARRIERS_PER_RB = 12
SYMBOLS_PER_SLOT = 14
DMRS_SYMBOLS = 2
DATA_SYMBOLS = SYMBOLS_PER_SLOT - DMRS_SYMBOLS
CQI_MIN, CQI_MAX = 1, 15
CQI_PERIOD_SLOTS = 200
CQI_JITTER = 2
DEFAULT_COVERAGE_M = 1000.0

# bits per symbol for CQI 1..15; linear 0.15*q + 0.4 puts CQI 15 at ~6.1 Mbps
DEFAULT_EFFICIENCY = tuple(round(0.15 * q + 0.4, 2) for q in range(1, 16))


class RbgStatus(str, Enum):
    IDLE = "idle"
    UTILIZED = "utilized"
    COLLIDED = "collided"
    INACTIVE = "inactive"


class EventKind(str, Enum):
    ADD_UE = "add_ue"
    REMOVE_UE = "remove_ue"
    ADD_RBG = "add_rbg"
    REMOVE_RBG = "remove_rbg"


class MembershipError(ValueError):
    pass


class CoverageError(ValueError):
    pass


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def clamp_cqi(q: int) -> int:
    return max(CQI_MIN, min(CQI_MAX, q))


def base_cqi_from_distance(d: float, coverage_m: float = DEFAULT_COVERAGE_M) -> int:
    if d < 0 or d > coverage_m:
        raise CoverageError(f"distance {d} m outside coverage radius {coverage_m} m")
    return clamp_cqi(round_half_up(15.0 * (1.0 - d / coverage_m)))


def bits_per_slot(efficiency: float, n_rb: int = RBS_PER_RBG) -> int:
    """Data bits one RBG carries in a slot at the given bits/symbol."""
    # round before floor so 2304 * 1.0000000000000002 stays 2304
    return int(math.floor(round(efficiency * DATA_SYMBOLS * SUBCARRIERS_PER_RB * n_rb, 9)))


@dataclass(frozen=True)
class Application:
    packet_interval: int  # slots
    packet_size: int  # bytes


@dataclass
class UeDevice:
    ue_id: int
    distance_m: float
    applications: list[Application] = field(default_factory=list)
    active: bool = True
    buffer_bits: int = 0


@dataclass(frozen=True)
class Event:
    slot: int
    kind: EventKind
    target: int


@dataclass(frozen=True)
class UeRecord:
    action: int  # 1..M = RBG, M+1 = silent
    success: bool
    transmitted_bits: int
    achievable_bits: int  # rate of the requested RBG, 0 when silent
    silent: bool = False


@dataclass(frozen=True)
class SlotOutcome:
    slot: int
    rbg_status: tuple[RbgStatus, ...]
    records: Mapping[int, UeRecord]

    def count(self, status: RbgStatus) -> int:
        return sum(1 for s in self.rbg_status if s is status)


@dataclass(frozen=True)
class UeView:
    """What a UE can sense by itself: its own rates and buffer."""

    rates_bits: tuple[int, ...]
    buffer_bits: int


class Environment:
    def __init__(
        self,
        distances: Sequence[float],
        n_rbgs: int,
        rng: np.random.Generator,
        applications: Sequence[Sequence[Application]] | None = None,
        efficiency: Sequence[float] = DEFAULT_EFFICIENCY,
        coverage_m: float = DEFAULT_COVERAGE_M,
        initial_ues: int | None = None,
        initial_rbgs: int | None = None,
    ):
        if len(efficiency) != CQI_MAX:
            raise ValueError("efficiency table needs one entry per CQI 1..15")
        n = len(distances)
        if n < 1 or n_rbgs < 1:
            raise ValueError("need at least one UE and one RBG")
        apps = applications if applications is not None else [[] for _ in range(n)]
        if len(apps) != n:
            raise ValueError("one application list per UE")
        self.rng = rng
        self.n_rbgs = n_rbgs
        self.coverage_m = coverage_m
        self.efficiency = tuple(float(e) for e in efficiency)
        self._bits_table = [0] + [bits_per_slot(e) for e in self.efficiency]
        n_init_ue = n if initial_ues is None else initial_ues
        n_init_rbg = n_rbgs if initial_rbgs is None else initial_rbgs
        self.ues = [
            UeDevice(i, float(d), list(a), active=i < n_init_ue)
            for i, (d, a) in enumerate(zip(distances, apps))
        ]
        self.base_cqi = np.array([base_cqi_from_distance(d, coverage_m) for d in distances])
        self.rbg_active = np.array([k < n_init_rbg for k in range(n_rbgs)])
        self.cqi = np.repeat(self.base_cqi[:, None, None], n_rbgs, axis=1).repeat(RBS_PER_RBG, axis=2)
        self.slot = 0
        self.offered_bits = np.zeros(n, dtype=np.int64)
        self.sent_bits = np.zeros(n, dtype=np.int64)
        self._rates = np.zeros((n, n_rbgs), dtype=np.int64)
        self._refresh_rates()

    @property
    def n_ues(self) -> int:
        return len(self.ues)

    @property
    def max_rate_bits(self) -> int:
        return max(self._bits_table)

    def active_ues(self) -> list[int]:
        return [u.ue_id for u in self.ues if u.active]

    def active_rbgs(self) -> list[int]:
        return [k for k in range(self.n_rbgs) if self.rbg_active[k]]

    # -- rates ---------------------------------------------------------------

    def _refresh_rates(self) -> None:
        mean = self.cqi.mean(axis=2)
        q = np.floor(mean + 0.5).astype(np.int64)
        table = np.asarray(self._bits_table, dtype=np.int64)
        self._rates = table[q] * self.rbg_active[None, :]

    def data_rate(self, ue: int, rbg: int) -> int:
        """Bits the UE would send on the RBG this slot (0-based RBG index)."""
        return int(self._rates[ue, rbg])

    def rate_matrix(self) -> np.ndarray:
        return self._rates.copy()

    def ue_view(self, ue: int) -> UeView:
        return UeView(tuple(int(v) for v in self._rates[ue]), self.ues[ue].buffer_bits)

    # -- ticks ---------------------------------------------------------------

    def cqi_tick(self) -> None:
        # fresh +-2 perturbation of the distance-based CQI for every (UE, RB)
        delta = self.rng.integers(-CQI_JITTER, CQI_JITTER + 1, size=self.cqi.shape)
        self.cqi = np.clip(self.base_cqi[:, None, None] + delta, CQI_MIN, CQI_MAX)
        self._refresh_rates()

    def traffic_tick(self) -> None:
        for ue in self.ues:
            if not ue.active:
                continue
            for app in ue.applications:
                if self.slot % app.packet_interval == 0:
                    bits = app.packet_size * 8
                    ue.buffer_bits += bits
                    self.offered_bits[ue.ue_id] += bits

    def resolve_slot(self, actions: Mapping[int, int]) -> SlotOutcome:
        """Apply one action per active UE; 1..M request an RBG, M+1 stays silent."""
        silent = self.n_rbgs + 1
        requests: dict[int, list[int]] = {}
        for ue, a in actions.items():
            if not self.ues[ue].active:
                continue  # dropped: UE left
            if not 1 <= a <= silent:
                raise ValueError(f"action {a} out of range for UE {ue}")
            if a != silent:
                requests.setdefault(a - 1, []).append(ue)

        status = []
        for k in range(self.n_rbgs):
            if not self.rbg_active[k]:
                status.append(RbgStatus.INACTIVE)
            else:
                n_req = len(requests.get(k, ()))
                status.append(
                    RbgStatus.IDLE if n_req == 0 else RbgStatus.UTILIZED if n_req == 1 else RbgStatus.COLLIDED
                )

        records: dict[int, UeRecord] = {}
        for ue, a in sorted(actions.items()):
            dev = self.ues[ue]
            if not dev.active:
                continue
            if a == silent:
                records[ue] = UeRecord(a, False, 0, 0, silent=True)
                continue
            k = a - 1
            rate = int(self._rates[ue, k])
            if status[k] is RbgStatus.UTILIZED:
                sent = min(dev.buffer_bits, rate)
                dev.buffer_bits -= sent
                self.sent_bits[ue] += sent
                records[ue] = UeRecord(a, True, sent, rate)
            else:
                records[ue] = UeRecord(a, False, 0, rate)
        out = SlotOutcome(self.slot, tuple(status), records)
        self.slot += 1
        return out

    # -- membership ----------------------------------------------------------

    def apply_event(self, event: Event) -> None:
        if event.slot < self.slot:
            raise MembershipError(f"event for slot {event.slot} arrived at slot {self.slot}")
        kind, t = EventKind(event.kind), event.target
        if kind in (EventKind.ADD_UE, EventKind.REMOVE_UE):
            if not 0 <= t < self.n_ues:
                raise MembershipError(f"unknown UE {t}")
            want = kind is EventKind.ADD_UE
            if self.ues[t].active == want:
                raise MembershipError(f"UE {t} is already {'active' if want else 'inactive'}")
            self.ues[t].active = want
        else:
            if not 0 <= t < self.n_rbgs:
                raise MembershipError(f"unknown RBG {t}")
            want = kind is EventKind.ADD_RBG
            if bool(self.rbg_active[t]) == want:
                raise MembershipError(f"RBG {t} is already {'active' if want else 'inactive'}")
            self.rbg_active[t] = want
            self._refresh_rates()
