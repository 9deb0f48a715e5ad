"""The master slot loop.

Per slot: membership events -> model deliveries -> traffic -> CQI (every
200 slots) -> observations and actions -> collision resolution -> feedback.
At the end of every ``train_every`` slots each agent runs a training
epoch; at the end of every ``shuffle_every`` slots agents upload, the
shufflers match, and models come back after ``shuffle_latency`` slots.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .. import nnet
from ..agent import Agent, AgentConfig, Feedback, UeEnvView, build_observation, compute_reward
from ..baselines import PfState, dqsa_reward, pf_schedule, pf_update
from ..env5g import CQI_PERIOD_SLOTS, Application, Environment, Event, EventKind
from ..metrics import STATUS_CODE
from ..shuffle import MlaTable, partition_ues, shuffle_round
from . import seeds
from .config import ScenarioConfig
from .summary import summarize

RECORD_DTYPE = np.dtype(
    [("slot", "<i8"), ("ue_id", "<i8"), ("action", "<i8"), ("success", "<i1"), ("bits", "<i8")]
)


@dataclass
class RunArtifacts:
    config: ScenarioConfig
    records: np.ndarray  # RECORD_DTYPE, one row per active UE per slot
    statuses: np.ndarray  # (slots, M) status codes
    summary: dict
    shuffles: list[dict] = field(default_factory=list)
    initial_model_digests: dict[int, str] = field(default_factory=dict)
    agents: dict[int, Agent] = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)


def agent_config(cfg: ScenarioConfig) -> AgentConfig:
    return AgentConfig(
        epsilon=cfg.epsilon,
        gamma=cfg.gamma,
        alpha=cfg.alpha,
        lr=cfg.lr,
        hidden=cfg.hidden,
        batch_size=cfg.batch_size,
        train_steps=cfg.train_steps,
        buffer_capacity=cfg.buffer_capacity,
        age_cap=cfg.age_cap,
    )


def build_environment(cfg: ScenarioConfig, streams: seeds.SeedStreams) -> Environment:
    apps = [Application(a.packet_interval, a.packet_size) for a in cfg.applications]
    return Environment(
        cfg.distances(),
        cfg.m_rbgs,
        streams.get(seeds.ENV_CQI),
        applications=[list(apps) for _ in range(cfg.n_ues)],
        efficiency=cfg.efficiency,
        coverage_m=cfg.coverage_m,
        initial_ues=cfg.initial_ues,
        initial_rbgs=cfg.initial_rbgs,
    )


def _digest(model: nnet.QNetworkModel) -> str:
    return hashlib.sha256(nnet.to_bytes(model)).hexdigest()


def run(
    cfg: ScenarioConfig,
    streams: seeds.SeedStreams | None = None,
    on_slot: Callable[[int, dict[int, Agent]], None] | None = None,
) -> RunArtifacts:
    streams = streams or seeds.SeedStreams(cfg.seed)
    env = build_environment(cfg, streams)
    M = cfg.m_rbgs
    x_max = env.max_rate_bits
    learning = cfg.method in ("hermes", "dqsa")
    shuffling = cfg.method == "hermes"
    acfg = agent_config(cfg)
    reward_fn = compute_reward if cfg.method == "hermes" else dqsa_reward

    agents: dict[int, Agent] = {}
    table = MlaTable(cfg.n_ues, track=cfg.mla_track)
    digests: dict[int, str] = {}

    def spawn(ue: int) -> None:
        agents[ue] = Agent(
            ue,
            M,
            acfg,
            x_max,
            init_rng=streams.get(seeds.agent_init(ue)),
            explore_rng=streams.get(seeds.agent_epsilon(ue)),
            replay_rng=streams.get(seeds.agent_replay(ue)),
            reward_fn=reward_fn,
        )
        digests.setdefault(ue, _digest(agents[ue].model))

    if learning:
        for ue in env.active_ues():
            spawn(ue)

    pf = PfState(cfg.n_ues, beta=cfg.pf_beta, max_rbg_per_ue=cfg.pf_max_rbg) if cfg.method == "pf" else None
    pf_alloc: dict[int, int] = {}

    events: dict[int, list[Event]] = {}
    for ev in cfg.events:
        events.setdefault(ev.at_slot, []).append(Event(ev.at_slot, ev.kind, ev.target))

    partition_rng = streams.get(seeds.SHUFFLER_PARTITION)
    deliveries: dict[int, dict[int, nnet.QNetworkModel]] = {}
    feedback: dict[int, Feedback] = {}
    shuffles: list[dict] = []
    steps_while_uploaded = 0

    T = cfg.total_slots
    status_rows = np.empty((T, M), dtype=np.int8)
    rec_slot: list[int] = []
    rec_ue: list[int] = []
    rec_action: list[int] = []
    rec_success: list[int] = []
    rec_bits: list[int] = []

    for t in range(T):
        for ev in events.get(t, ()):
            env.apply_event(ev)
            if ev.kind is EventKind.ADD_UE and learning:
                spawn(ev.target)
                table.fresh_model(ev.target)
            elif ev.kind is EventKind.REMOVE_UE:
                agents.pop(ev.target, None)
                feedback.pop(ev.target, None)

        for ue, model in deliveries.pop(t, {}).items():
            if ue in agents:
                agents[ue].receive_model(model)

        env.traffic_tick()
        if t % CQI_PERIOD_SLOTS == 0:
            env.cqi_tick()

        active = env.active_ues()
        actions: dict[int, int] = {}
        if learning:
            rates = env.rate_matrix()
            for ue in active:
                ag = agents[ue]
                view = UeEnvView(rates[ue], env.ues[ue].buffer_bits, ag.history)
                obs = build_observation(view, x_max)
                actions[ue] = ag.step(obs, feedback.get(ue))
        else:
            if t % cfg.pf_period == 0:
                buffers = [u.buffer_bits for u in env.ues]
                pf_alloc = pf_schedule(env.rate_matrix(), buffers, pf, active, env.active_rbgs())
            actions = dict.fromkeys(active, M + 1)
            for k, ue in pf_alloc.items():
                if ue in actions and env.rbg_active[k]:
                    actions[ue] = k + 1

        outcome = env.resolve_slot(actions)
        status_rows[t] = [STATUS_CODE[s] for s in outcome.rbg_status]
        served = np.zeros(cfg.n_ues)
        for ue, rec in outcome.records.items():
            rec_slot.append(t)
            rec_ue.append(ue)
            rec_action.append(rec.action)
            rec_success.append(int(rec.success))
            rec_bits.append(rec.transmitted_bits)
            served[ue] = rec.transmitted_bits
            if learning:
                agents[ue].history.record(rec.action, rec.success)
                feedback[ue] = Feedback.from_record(rec)
        if pf is not None:
            pf_update(pf, served)

        if on_slot is not None:
            on_slot(t, agents)

        if learning and (t + 1) % cfg.train_every == 0:
            for ue in sorted(agents):
                before = agents[ue].gradient_steps
                uploaded = not agents[ue].training_enabled
                agents[ue].train_epoch()
                if uploaded:
                    steps_while_uploaded += agents[ue].gradient_steps - before

        if shuffling and (t + 1) % cfg.shuffle_every == 0:
            uploads = {ue: agents[ue].upload_model() for ue in sorted(agents) if agents[ue].training_enabled}
            groups = partition_ues(sorted(uploads), cfg.num_shufflers, partition_rng)
            arrive = t + 1 + cfg.shuffle_latency
            for g, group in enumerate(groups):
                res = shuffle_round(
                    {u: uploads[u] for u in group}, table, cfg.lam, cfg.matching, advance=False
                )
                if cfg.shuffle_latency == 0:
                    for ue, model in res.models.items():
                        agents[ue].receive_model(model)
                else:
                    deliveries.setdefault(arrive, {}).update(res.models)
                shuffles.append(
                    {
                        "slot": t + 1,
                        "round": table.current_round,
                        "shuffler": g,
                        "assignment": {str(k): v for k, v in res.source.items()},
                        "bottleneck": res.bottleneck,
                        "total": res.total,
                    }
                )
            table.advance()

    records = np.empty(len(rec_slot), dtype=RECORD_DTYPE)
    records["slot"] = rec_slot
    records["ue_id"] = rec_ue
    records["action"] = rec_action
    records["success"] = rec_success
    records["bits"] = rec_bits

    summary = summarize(records, status_rows, cfg)
    summary["shuffle_rounds"] = table.current_round
    return RunArtifacts(
        config=cfg,
        records=records,
        statuses=status_rows,
        summary=summary,
        shuffles=shuffles,
        initial_model_digests=digests,
        agents=agents,
        diagnostics={
            "steps_while_uploaded": steps_while_uploaded,
            "skipped_epochs": {ue: a.skipped_epochs for ue, a in agents.items()},
            "offered_bits": env.offered_bits.tolist(),
            "sent_bits": env.sent_bits.tolist(),
        },
    )
