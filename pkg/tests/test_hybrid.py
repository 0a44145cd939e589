import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybrid_aos.benchmarks import make_function
from hybrid_aos.core import ConfigError, Engine, Module, SearchSnapshot, rng_stream
from hybrid_aos.de_engine import DeConfig, DeEngine
from hybrid_aos.hybrid import (DecisionPolicy, HybridController, PolicyMode, adjust_p, choose_module,
                               make_controller, parse_mode)
from hybrid_aos.statebased import DdqnAgent, DdqnConfig, QNetwork, load_model, save_model


class ScriptedEngine(Engine):
    """Engine whose objective after each application is read from a list."""

    k_ops = 4

    def __init__(self, values, start=100.0):
        self.values = list(values)
        self.budget = len(self.values)
        self.evaluations = 0
        self.current = start
        self.best = start

    def apply(self, op):
        prev = self.current
        self.current = self.values[self.evaluations]
        self.evaluations += 1
        self.best = min(self.best, self.current)
        return prev, self.current

    def snapshot(self):
        return SearchSnapshot(self.current, self.best, 0.5, 0)

    @property
    def best_objective(self):
        return self.best

    @property
    def best_solution(self):
        return None


def _agent(seed=0, **cfg):
    net = QNetwork.create([16, 32, 32, 4], rng_stream(seed, "net-init"))
    return DdqnAgent(net, DdqnConfig(**cfg), rng_stream(seed, "replay"))


def _sphere_engine(seed, budget=2000, dim=2):
    return DeEngine(make_function("sphere", dim), DeConfig(budget=budget), rng_stream(seed, "init"),
                    rng_stream(seed, "ops"))


# --- decision policy -------------------------------------------------------

def test_choose_module_threshold():
    pol = DecisionPolicy()
    assert pol.p == 0.5
    assert choose_module(pol, 0.3) is Module.STATELESS
    assert choose_module(pol, 0.5) is Module.STATE_BASED
    sb = DecisionPolicy(PolicyMode.STATE_BASED_ONLY)
    assert all(choose_module(sb, u) is Module.STATE_BASED for u in (0.0, 0.2, 0.99))
    sl = DecisionPolicy(PolicyMode.STATELESS_ONLY)
    assert all(choose_module(sl, u) is Module.STATELESS for u in (0.0, 0.2, 0.99))
    assert choose_module(DecisionPolicy(PolicyMode.FIXED, p=0.2), 0.25) is Module.STATE_BASED


def test_choice_frequency():
    pol = DecisionPolicy(PolicyMode.FIXED, p=0.3)
    u = rng_stream(11, "choice").random(100_000)
    frac = np.mean([choose_module(pol, x) is Module.STATELESS for x in u])
    assert abs(frac - 0.3) < 0.01


@pytest.mark.parametrize("p,improved,expected", [(0.5, True, 0.5), (0.5, False, 0.3), (0.3, True, 0.4)])
def test_adjust_p_examples(p, improved, expected):
    pol = DecisionPolicy(p=p)
    assert adjust_p(pol, improved).p == pytest.approx(expected)


def test_adjust_p_noop_outside_adaptive():
    pol = DecisionPolicy(PolicyMode.FIXED, p=0.3)
    assert adjust_p(pol, False).p == 0.3


@given(st.floats(0.1, 0.5), st.integers(0, 30))
def test_consecutive_improvements_closed_form(p, k):
    pol = DecisionPolicy(p=p)
    for _ in range(k):
        adjust_p(pol, True)
    assert pol.p == pytest.approx(0.5 - (0.5 - p) * 2.0**-k, abs=1e-15)


@settings(max_examples=200)
@given(st.lists(st.booleans(), max_size=300))
def test_p_stays_in_bounds(pattern):
    pol = DecisionPolicy()
    for b in pattern:
        adjust_p(pol, b)
        assert 0.1 <= pol.p <= 0.5


def test_policy_validation():
    with pytest.raises(ConfigError):
        DecisionPolicy(p_u=0.1, p_l=0.5)
    with pytest.raises(ConfigError):
        DecisionPolicy(PolicyMode.FIXED)
    with pytest.raises(ConfigError):
        DecisionPolicy(PolicyMode.FIXED, p=1.5)


def test_parse_mode():
    assert parse_mode("hf") == (PolicyMode.ADAPTIVE, None, True)
    assert parse_mode("hf-nu") == (PolicyMode.ADAPTIVE, None, False)
    assert parse_mode("hf-na:0.25") == (PolicyMode.FIXED, 0.25, True)
    assert parse_mode("sb-u")[0] is PolicyMode.STATE_BASED_ONLY
    for bad in ("hf-na:x", "bandit", ""):
        with pytest.raises(ConfigError):
            parse_mode(bad)


# --- controller step -------------------------------------------------------

def test_forced_stateless_improving_step():
    ctrl = HybridController(4, DecisionPolicy(PolicyMode.FIXED, p=1.0), seed=0, agent=_agent())
    eng = ScriptedEngine([80.0])
    ctrl.start(eng)
    q_before = ctrl.stateless.Q.copy()
    log = ctrl.step(eng)
    assert log.module_used is Module.STATELESS
    assert log.credit == pytest.approx(0.2)
    assert ctrl.stateless.Q[log.op] > q_before[log.op]
    assert len(ctrl.agent.buffer) == 1


def test_adaptive_step_moves_p_toward_bounds():
    ctrl = HybridController(4, DecisionPolicy(p=0.3), seed=0, agent=_agent())
    eng = ScriptedEngine([80.0, 90.0])
    ctrl.start(eng)
    assert ctrl.step(eng).p_after == pytest.approx(0.4)
    assert ctrl.step(eng).p_after == pytest.approx(0.25)


def test_both_modules_learn_from_state_based_choice():
    ctrl = HybridController(4, DecisionPolicy(PolicyMode.FIXED, p=0.0), seed=0, agent=_agent())
    eng = ScriptedEngine([50.0, 40.0, 45.0])
    ctrl.start(eng)
    for _ in range(3):
        log = ctrl.step(eng)
        assert log.module_used is Module.STATE_BASED
    assert np.count_nonzero(ctrl.stateless.Q) >= 1
    assert len(ctrl.agent.buffer) == 3


def test_no_update_mode_keeps_buffer_and_weights():
    agent = _agent()
    w0 = [p.copy() for p in agent.online.parameters()]
    ctrl = HybridController(4, DecisionPolicy(), seed=1, agent=agent, online_update=False)
    ctrl.run(_sphere_engine(1, budget=600))
    assert len(agent.buffer) == 0 and agent.updates == 0
    for a, b in zip(w0, agent.online.parameters()):
        np.testing.assert_array_equal(a, b)


def test_adaptive_and_fixed_agree_when_always_improving():
    values = list(np.linspace(99, 1, 200))
    seqs = []
    for pol in (DecisionPolicy(), DecisionPolicy(PolicyMode.FIXED, p=0.5)):
        ctrl = HybridController(4, pol, seed=5, agent=_agent())
        out = ctrl.run(ScriptedEngine(values))
        seqs.append([(lg.module_used, lg.op) for lg in out.logs])
        assert all(lg.p_after == 0.5 for lg in out.logs)
    assert seqs[0] == seqs[1]


def test_mode_wiring():
    net = QNetwork.create([16, 32, 32, 4], rng_stream(0))
    ctrl = make_controller("sl", 4, 0)
    assert ctrl.agent is None
    out = ctrl.run(_sphere_engine(0, budget=300))
    assert {lg.module_used for lg in out.logs} == {Module.STATELESS}
    out = make_controller("random", 4, 0).run(_sphere_engine(0, budget=300))
    assert {lg.module_used for lg in out.logs} == {Module.RANDOM}
    out = make_controller("sb", 4, 0, net).run(_sphere_engine(0, budget=300))
    assert {lg.module_used for lg in out.logs} == {Module.STATE_BASED}
    with pytest.raises(ConfigError):
        make_controller("hf", 4, 0)
    # the controller works on a copy of the loaded model
    x = rng_stream(2).random(16)
    before = net.forward(x)
    make_controller("sb-u", 4, 0, net, DdqnConfig(warmup=10, batch_size=8)).run(_sphere_engine(0, budget=300))
    np.testing.assert_array_equal(net.forward(x), before)


def test_fixed_mode_matches_hf_na():
    net = QNetwork.create([16, 32, 32, 4], rng_stream(0))
    a = make_controller("hf-na:0.3", 4, 3, net).run(_sphere_engine(3, budget=500))
    ctrl = HybridController(4, DecisionPolicy(PolicyMode.FIXED, p=0.3), 3,
                            DdqnAgent(net.copy(), DdqnConfig(), rng_stream(3, "replay")))
    b = ctrl.run(_sphere_engine(3, budget=500))
    assert a.best_objective == b.best_objective
    assert [(x.module_used, x.op) for x in a.logs] == [(x.module_used, x.op) for x in b.logs]


def test_zero_budget_rejected():
    with pytest.raises(ConfigError):
        make_controller("sl", 4, 0).run(ScriptedEngine([]))


def test_model_action_count_must_match():
    net = QNetwork.create([16, 8, 3], rng_stream(0))
    with pytest.raises(ConfigError):
        make_controller("hf", 4, 0, net)


# --- whole runs ------------------------------------------------------------

GOLDEN = {"hf": 1.6466990490883217e-09, "sl": 5.841370684469967e-11, "random": 1.73858038393631e-08}


@pytest.mark.parametrize("mode", sorted(GOLDEN))
def test_sphere_golden(mode):
    net = QNetwork.create([16, 32, 32, 4], rng_stream(7, "net-init"))
    out = make_controller(mode, 4, 7, net).run(_sphere_engine(7))
    assert out.evaluations == 2000
    assert out.best_objective == GOLDEN[mode]


def test_saved_model_reproduces_greedy_choices(tmp_path):
    # greedy, no updates: a reloaded model must pick exactly what the original picked
    net = QNetwork.create([16, 32, 32, 4], rng_stream(9, "net-init"))
    path = tmp_path / "m.json"
    save_model(net, path)
    runs = []
    for model in (net, load_model(path)):
        ctrl = HybridController(4, DecisionPolicy(PolicyMode.STATE_BASED_ONLY), 9,
                                DdqnAgent(model, DdqnConfig(), rng_stream(9, "replay")),
                                online_update=False, epsilon=0.0)
        runs.append([lg.op for lg in ctrl.run(_sphere_engine(9, budget=800, dim=5)).logs])
    assert runs[0] == runs[1]
