"""Per-UE deep-Q agent: observations, epsilon-greedy, replay, upload/receive.

Observation layout (D = 2M + 3 floats, all in [0, 1]):

    [0, M)        achievable rate per RBG / x_max
    M             buffer non-empty bit
    M + 1         stayed silent last slot
    [M+2, 2M+2)   slots since last request of each RBG, capped and / cap
    2M + 2        transmitted successfully last slot

Actions are 1-based: 1..M request that RBG, M+1 stays silent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import nnet
from .nnet import QNetworkModel, TrainBatch

SUCCESS = "success"
COLLISION = "collision"
SILENT = "silent"


@dataclass(frozen=True)
class AgentConfig:
    epsilon: float = 0.05
    gamma: float = 0.95
    alpha: float = 1.0
    lr: float = 0.01
    hidden: int = 64
    batch_size: int = 32
    train_steps: int = 4
    buffer_capacity: int = 500
    age_cap: int = 50


def obs_dim(n_rbgs: int) -> int:
    return 2 * n_rbgs + 3


@dataclass
class Observation:
    rates: np.ndarray
    buffer_nonempty: int
    silent_last_slot: int
    slots_since_request: np.ndarray
    success_last_slot: int

    @property
    def n_rbgs(self) -> int:
        return len(self.rates)

    def to_vector(self) -> np.ndarray:
        return np.concatenate(
            [
                self.rates,
                [self.buffer_nonempty, self.silent_last_slot],
                self.slots_since_request,
                [self.success_last_slot],
            ]
        ).astype(np.float64)


@dataclass
class UeHistory:
    """The UE's memory of its own recent actions; never leaves the device."""

    n_rbgs: int
    age_cap: int = 50
    ages: np.ndarray = field(init=False)
    last_action: int | None = None
    last_success: bool = False

    def __post_init__(self) -> None:
        self.ages = np.full(self.n_rbgs, self.age_cap, dtype=np.int64)

    def record(self, action: int, success: bool) -> None:
        self.ages = np.minimum(self.ages + 1, self.age_cap)
        if action <= self.n_rbgs:
            self.ages[action - 1] = 0
        self.last_action = action
        self.last_success = bool(success)


@dataclass(frozen=True)
class UeEnvView:
    rates_bits: Sequence[int]
    buffer_bits: int
    history: UeHistory


def build_observation(view: UeEnvView, x_max: float, n_rbgs: int | None = None) -> Observation:
    hist = view.history
    M = len(view.rates_bits)
    if n_rbgs is not None and M != n_rbgs:
        raise ValueError(f"view has {M} RBGs, model expects {n_rbgs}")
    if hist.n_rbgs != M:
        raise ValueError("history and rate vector disagree on RBG count")
    silent = hist.last_action is None or hist.last_action == M + 1
    return Observation(
        rates=np.asarray(view.rates_bits, dtype=np.float64) / x_max,
        buffer_nonempty=int(view.buffer_bits > 0),
        silent_last_slot=int(silent),
        slots_since_request=hist.ages / hist.age_cap,
        success_last_slot=int(hist.last_success),
    )


def select_action(
    model: QNetworkModel, obs: Observation | np.ndarray, epsilon: float, rng: np.random.Generator
) -> int:
    """Epsilon-greedy over M+1 actions.

    Always draws exactly two numbers from ``rng`` (explore coin, random
    action) so streams stay aligned whatever the outcome.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    x = obs.to_vector() if isinstance(obs, Observation) else obs
    coin = rng.random()
    random_action = int(rng.integers(model.n_actions))
    if coin < epsilon:
        return random_action + 1
    return int(np.argmax(nnet.forward(model, x))) + 1  # argmax picks the lowest index on ties


def compute_reward(outcome: str, x: float, alpha: float) -> float:
    """Collision-punishing reward: +x, -alpha*x, or 0 when silent."""
    if outcome == SUCCESS:
        return float(x)
    if outcome == COLLISION:
        return -alpha * float(x)
    return 0.0


def normalize_reward(r: float, gamma: float, alpha: float, x_max: float) -> float:
    """Affine map so every discounted return fits the sigmoid range [0, 1]."""
    return (1.0 - gamma) * (r + alpha * x_max) / ((1.0 + alpha) * x_max)


def discounted_return(rewards: Sequence[float], gamma: float) -> float:
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    total, w = 0.0, 1.0
    for r in rewards:
        total += w * r
        w *= gamma
    return total


@dataclass(frozen=True)
class Feedback:
    """Result of the UE's previous action, as the UE itself observes it."""

    outcome: str
    rate_bits: float

    @classmethod
    def from_record(cls, rec) -> "Feedback":
        if rec.silent:
            return cls(SILENT, 0.0)
        return cls(SUCCESS if rec.success else COLLISION, float(rec.achievable_bits))


class ReplayBuffer:
    """Fixed-capacity FIFO of (s, a, r, s') kept in preallocated arrays."""

    def __init__(self, capacity: int, dim: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.s = np.zeros((capacity, dim))
        self.a = np.zeros(capacity, dtype=np.int64)
        self.r = np.zeros(capacity)
        self.s_next = np.zeros((capacity, dim))
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, s: np.ndarray, a: int, r: float, s_next: np.ndarray) -> None:
        i = self._next
        self.s[i], self.a[i], self.r[i], self.s_next[i] = s, a, r, s_next
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def clear(self) -> None:
        self._next = 0
        self._size = 0

    def sample(self, batch_size: int, rng: np.random.Generator) -> TrainBatch:
        idx = rng.choice(self._size, size=batch_size, replace=False)
        return TrainBatch(self.s[idx], self.a[idx], self.r[idx], self.s_next[idx])


RewardFn = Callable[[str, float, float], float]


class Agent:
    """One UE's learner. ``reward_fn`` is the only difference between the
    collision-punishing agent and the DQSA baseline."""

    def __init__(
        self,
        ue_id: int,
        n_rbgs: int,
        cfg: AgentConfig,
        x_max: float,
        init_rng: np.random.Generator,
        explore_rng: np.random.Generator,
        replay_rng: np.random.Generator,
        reward_fn: RewardFn = compute_reward,
    ):
        self.ue_id = ue_id
        self.n_rbgs = n_rbgs
        self.cfg = cfg
        self.x_max = float(x_max)
        self.explore_rng = explore_rng
        self.replay_rng = replay_rng
        self.reward_fn = reward_fn
        dim = obs_dim(n_rbgs)
        self.model = nnet.init_model(dim, cfg.hidden, n_rbgs, init_rng)
        self.target_model = nnet.copy_to_target(self.model)
        self.buffer = ReplayBuffer(cfg.buffer_capacity, dim)
        self.history = UeHistory(n_rbgs, cfg.age_cap)
        self.training_enabled = True
        self._prev: tuple[np.ndarray, int] | None = None
        # diagnostics
        self.gradient_steps = 0
        self.skipped_epochs = 0
        self.epochs = 0
        self.last_loss: float | None = None
        self.last_reward: float | None = None

    def step(self, obs: Observation, feedback: Feedback | None) -> int:
        x = obs.to_vector()
        if self._prev is not None and feedback is not None:
            s, a = self._prev
            raw = self.reward_fn(feedback.outcome, feedback.rate_bits, self.cfg.alpha)
            self.last_reward = raw
            if self.training_enabled:
                r = normalize_reward(raw, self.cfg.gamma, self.cfg.alpha, self.x_max)
                self.buffer.push(s, a - 1, r, x)
        action = select_action(self.model, x, self.cfg.epsilon, self.explore_rng)
        self._prev = (x, action)
        return action

    def train_epoch(self, batch_size: int | None = None, steps: int | None = None, lr: float | None = None) -> bool:
        """Run one epoch; returns False when skipped for lack of data."""
        if not self.training_enabled:
            return False
        batch_size = batch_size or self.cfg.batch_size
        steps = steps or self.cfg.train_steps
        lr = lr or self.cfg.lr
        if len(self.buffer) < batch_size:
            self.skipped_epochs += 1
            return False
        for _ in range(steps):
            batch = self.buffer.sample(batch_size, self.replay_rng)
            self.last_loss, grads = nnet.td_loss_and_gradient(self.model, self.target_model, batch, self.cfg.gamma)
            self.model = nnet.sgd_step(self.model, grads, lr)
            self.gradient_steps += 1
        self.target_model = nnet.copy_to_target(self.model)
        self.epochs += 1
        return True

    def upload_model(self) -> QNetworkModel:
        self.training_enabled = False
        return nnet.copy_to_target(self.model)

    def receive_model(self, model: QNetworkModel) -> None:
        if not model.same_shape(self.model):
            raise nnet.ShapeError("received model does not fit this UE")
        self.model = nnet.copy_to_target(model)
        self.target_model = nnet.copy_to_target(model)
        self.buffer.clear()
        self._prev = None
        self.training_enabled = True

    def diagnostics(self, action: int) -> dict:
        return {
            "ue_id": self.ue_id,
            "action": action,
            "reward": self.last_reward,
            "buffer": len(self.buffer),
            "loss": self.last_loss,
        }
