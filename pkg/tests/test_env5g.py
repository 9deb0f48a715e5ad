import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from hermes_dsa.env5g import (
    DATA_SYMBOLS,
    DEFAULT_EFFICIENCY,
    Application,
    CoverageError,
    Environment,
    Event,
    EventKind,
    MembershipError,
    RbgStatus,
    base_cqi_from_distance,
    bits_per_slot,
    round_half_up,
)


def env_with(distances=(300.0, 300.0), n_rbgs=2, seed=0, apps=None, **kw):
    apps = apps if apps is not None else [[Application(1, 1000)] for _ in distances]
    return Environment(list(distances), n_rbgs, np.random.default_rng(seed), applications=apps, **kw)


# -- geometry and rates ---------------------------------------------------------


@pytest.mark.parametrize("d,q", [(0, 15), (1000, 1), (500, 8), (300, 11), (966.7, 1), (933.4, 1), (933.3, 1)])
def test_base_cqi(d, q):
    # 15 * (1 - 933.3/1000) = 1.0005 -> 1; 500 m sits on the half and rounds up
    assert base_cqi_from_distance(d) == q


def test_round_half_up_convention():
    assert [round_half_up(v) for v in (7.5, 8.5, 0.5, 2.4999)] == [8, 9, 1, 2]


def test_out_of_coverage():
    with pytest.raises(CoverageError):
        base_cqi_from_distance(1000.1)
    with pytest.raises(CoverageError):
        base_cqi_from_distance(-1)


def test_rate_arithmetic():
    assert DATA_SYMBOLS == 12
    assert bits_per_slot(4.0) == 4 * 12 * 12 * 16 == 9216
    assert DEFAULT_EFFICIENCY[14] == 2.65
    assert bits_per_slot(DEFAULT_EFFICIENCY[14]) == 6105
    assert round(6105 / 1e-3 / 1e6, 1) == 6.1


def test_rate_uses_rounded_mean_cqi():
    env = env_with(n_rbgs=1)
    env.cqi[0, 0, :] = [8] * 8 + [9] * 8  # mean 8.5 rounds up to 9
    env._refresh_rates()
    assert env.data_rate(0, 0) == bits_per_slot(DEFAULT_EFFICIENCY[8])


def test_clamped_perturbations():
    env = env_with(distances=(0.0, 1000.0), n_rbgs=3)
    for _ in range(50):
        env.cqi_tick()
        assert env.cqi[0].max() == 15 and env.cqi[0].min() >= 13
        assert env.cqi[1].min() == 1 and env.cqi[1].max() <= 3


def test_perturbation_is_uniform_around_base():
    env = env_with(distances=(500.0,), n_rbgs=1, seed=3)
    assert env.base_cqi[0] == 8
    samples = []
    for _ in range(10_000):
        env.cqi_tick()
        samples.append(int(env.cqi[0, 0, 0]))
    counts = np.bincount(samples, minlength=16)
    assert counts[:6].sum() == 0 and counts[11:].sum() == 0
    assert chisquare(counts[6:11]).pvalue > 1e-3


# -- traffic -------------------------------------------------------------------


def test_traffic_growth():
    env = env_with(distances=(300.0,), apps=[[Application(1, 125)]])
    for _ in range(10):
        env.traffic_tick()
        env.resolve_slot({0: 3})  # silent
    assert env.ues[0].buffer_bits == 10 * 125 * 8  # 1 Mbps over 10 ms


def test_no_apps_constant_buffer():
    env = env_with(distances=(300.0,), apps=[[]])
    for _ in range(5):
        env.traffic_tick()
        env.resolve_slot({0: 3})
    assert env.ues[0].buffer_bits == 0


def test_apps_add_and_intervals():
    env = env_with(distances=(300.0,), apps=[[Application(2, 10), Application(2, 5), Application(3, 1)]])
    for _ in range(6):
        env.traffic_tick()
        env.resolve_slot({0: 3})
    # slots 0,2,4 for the first two apps, 0,3 for the third
    assert env.ues[0].buffer_bits == 8 * (3 * 15 + 2 * 1)


# -- collisions ----------------------------------------------------------------


def test_collision_rule():
    env = env_with(distances=(300.0, 300.0))
    env.traffic_tick()
    out = env.resolve_slot({0: 1, 1: 1})
    assert out.rbg_status == (RbgStatus.COLLIDED, RbgStatus.IDLE)
    assert not out.records[0].success and not out.records[1].success
    assert env.ues[0].buffer_bits == env.ues[1].buffer_bits == 8000


def test_partial_buffer_transmission():
    env = Environment([0.0], 1, np.random.default_rng(0), efficiency=[4.0] * 15)
    env.ues[0].buffer_bits = 100
    out = env.resolve_slot({0: 1})
    assert env.data_rate(0, 0) == 9216
    assert out.records[0].transmitted_bits == 100 and out.records[0].achievable_bits == 9216
    assert env.ues[0].buffer_bits == 0 and out.rbg_status == (RbgStatus.UTILIZED,)


def test_all_silent_all_idle():
    env = env_with(distances=(300.0,) * 4, n_rbgs=3)
    out = env.resolve_slot(dict.fromkeys(range(4), 4))
    assert out.rbg_status == (RbgStatus.IDLE,) * 3
    assert all(r.silent and not r.success for r in out.records.values())


def test_invalid_action():
    env = env_with()
    with pytest.raises(ValueError):
        env.resolve_slot({0: 4})


# -- membership ----------------------------------------------------------------


def test_removed_rbg_yields_nothing():
    env = env_with(distances=(300.0,), n_rbgs=2)
    env.traffic_tick()
    env.apply_event(Event(0, EventKind.REMOVE_RBG, 1))
    assert env.data_rate(0, 1) == 0
    out = env.resolve_slot({0: 2})
    assert out.rbg_status[1] is RbgStatus.INACTIVE
    assert not out.records[0].success and out.records[0].transmitted_bits == 0


def test_duplicate_membership_change():
    env = env_with()
    with pytest.raises(MembershipError):
        env.apply_event(Event(0, EventKind.ADD_UE, 0))
    env.apply_event(Event(0, EventKind.REMOVE_UE, 0))
    with pytest.raises(MembershipError):
        env.apply_event(Event(0, EventKind.REMOVE_UE, 0))
    with pytest.raises(MembershipError):
        env.apply_event(Event(0, EventKind.ADD_RBG, 0))


def test_removed_ue_action_dropped():
    env = env_with()
    env.apply_event(Event(0, EventKind.REMOVE_UE, 1))
    out = env.resolve_slot({0: 1, 1: 1})
    assert 1 not in out.records
    assert out.rbg_status[0] is RbgStatus.UTILIZED


def test_past_event_rejected():
    env = env_with()
    env.resolve_slot({0: 3, 1: 3})
    with pytest.raises(MembershipError):
        env.apply_event(Event(0, EventKind.REMOVE_UE, 0))


def test_initially_inactive_members():
    env = env_with(distances=(300.0,) * 3, n_rbgs=3, initial_ues=2, initial_rbgs=1)
    assert env.active_ues() == [0, 1] and env.active_rbgs() == [0]
    env.traffic_tick()
    assert env.ues[2].buffer_bits == 0


# -- properties ---------------------------------------------------------------


actions_strategy = st.lists(st.lists(st.integers(1, 5), min_size=6, max_size=6), min_size=1, max_size=40)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), slots=actions_strategy, removed=st.sets(st.integers(0, 3), max_size=3))
def test_partition_and_conservation(seed, slots, removed):
    rng = np.random.default_rng(seed)
    dist = rng.uniform(0, 1000, 6)
    apps = [[Application(int(rng.integers(1, 4)), int(rng.integers(1, 1500)))] for _ in range(6)]
    env = Environment(list(dist), 4, np.random.default_rng(seed), applications=apps)
    for k in removed:
        env.apply_event(Event(0, EventKind.REMOVE_RBG, k))
    for t, acts in enumerate(slots):
        env.traffic_tick()
        if t % 200 == 0:
            env.cqi_tick()
        before = [u.buffer_bits for u in env.ues]
        out = env.resolve_slot(dict(enumerate(acts)))
        n_active = len(env.active_rbgs())
        assert out.count(RbgStatus.IDLE) + out.count(RbgStatus.UTILIZED) + out.count(RbgStatus.COLLIDED) == n_active
        for ue, rec in out.records.items():
            assert rec.transmitted_bits <= before[ue]
            assert env.ues[ue].buffer_bits >= 0
            if rec.success:
                assert out.rbg_status[rec.action - 1] is RbgStatus.UTILIZED
                assert [a for a in acts if a == rec.action] == [rec.action]
        assert np.all(env.sent_bits <= env.offered_bits)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), others_a=st.lists(st.integers(2, 4), min_size=3, max_size=3),
       others_b=st.lists(st.integers(2, 4), min_size=3, max_size=3))
def test_feedback_isolation(seed, others_a, others_b):
    # UE 0 alone on RBG 1; the others move around RBGs 2-3 or stay silent
    envs = [env_with(distances=(100.0, 400.0, 700.0, 900.0), n_rbgs=3, seed=seed) for _ in range(2)]
    outs = []
    for env, others in zip(envs, (others_a, others_b)):
        env.traffic_tick()
        env.cqi_tick()
        outs.append(env.resolve_slot({0: 1, **{i + 1: a for i, a in enumerate(others)}}))
    assert outs[0].records[0] == outs[1].records[0]
    assert envs[0].ue_view(0) == envs[1].ue_view(0)


def test_same_seed_same_outcomes():
    def trace(seed):
        env = env_with(distances=(100.0, 500.0, 900.0), n_rbgs=2, seed=seed)
        rng = np.random.default_rng(1)
        out = []
        for t in range(600):
            env.traffic_tick()
            if t % 200 == 0:
                env.cqi_tick()
            out.append(env.resolve_slot({u: int(rng.integers(1, 4)) for u in range(3)}))
        return out

    assert trace(5) == trace(5)
