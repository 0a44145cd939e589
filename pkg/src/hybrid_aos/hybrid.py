"""Hybrid operator selection: a bandit and a Q-network blended by probability p.

Each application the controller asks the stateless module with probability
``p`` and the state-based module otherwise, applies the chosen operator,
feeds the outcome to both modules, and then moves ``p`` halfway to ``p_u``
after an improvement or halfway to ``p_l`` after a failure.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .core import ConfigError, Engine, IterationLog, Module, rng_stream
from .stateless import StatelessAos, assign_credit
from .statebased import DdqnAgent, DdqnConfig, FeatureExtractor, QNetwork, reward


class PolicyMode(enum.Enum):
    ADAPTIVE = "adaptive"
    FIXED = "fixed"
    STATELESS_ONLY = "stateless_only"
    STATE_BASED_ONLY = "state_based_only"
    RANDOM = "random"


@dataclass
class DecisionPolicy:
    mode: PolicyMode = PolicyMode.ADAPTIVE
    p_u: float = 0.5
    p_l: float = 0.1
    p: float | None = None

    def __post_init__(self):
        if not 0.0 < self.p_l < self.p_u < 1.0:
            raise ConfigError(f"need 0 < p_l < p_u < 1, got p_l={self.p_l}, p_u={self.p_u}")
        if self.p is None:
            if self.mode is PolicyMode.FIXED:
                raise ConfigError("fixed mode needs an explicit p")
            self.p = self.p_u
        elif self.mode is PolicyMode.FIXED and not 0.0 <= self.p <= 1.0:
            raise ConfigError(f"fixed p must be in [0, 1], got {self.p}")

    @property
    def stateless_probability(self) -> float:
        if self.mode is PolicyMode.STATELESS_ONLY:
            return 1.0
        if self.mode in (PolicyMode.STATE_BASED_ONLY, PolicyMode.RANDOM):
            return 0.0
        return self.p


def choose_module(policy: DecisionPolicy, u: float) -> Module:
    """Stateless iff ``u < p`` for the uniform draw ``u``."""
    if policy.mode is PolicyMode.RANDOM:
        return Module.RANDOM
    return Module.STATELESS if u < policy.stateless_probability else Module.STATE_BASED


def adjust_p(policy: DecisionPolicy, improved: bool) -> DecisionPolicy:
    """Move p halfway toward p_u on improvement, halfway toward p_l otherwise."""
    if policy.mode is PolicyMode.ADAPTIVE:
        policy.p = (policy.p + (policy.p_u if improved else policy.p_l)) / 2.0
    return policy


# --aos spellings -> (policy mode, fixed p, online update)
def parse_mode(mode: str) -> tuple[PolicyMode, float | None, bool]:
    if mode == "hf":
        return PolicyMode.ADAPTIVE, None, True
    if mode == "hf-nu":
        return PolicyMode.ADAPTIVE, None, False
    if mode.startswith("hf-na:"):
        try:
            q = float(mode.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad fixed probability in {mode!r}") from None
        return PolicyMode.FIXED, q, True
    if mode == "sl":
        return PolicyMode.STATELESS_ONLY, None, False
    if mode == "sb":
        return PolicyMode.STATE_BASED_ONLY, None, False
    if mode == "sb-u":
        return PolicyMode.STATE_BASED_ONLY, None, True
    if mode == "random":
        return PolicyMode.RANDOM, None, False
    raise ConfigError(f"unknown AOS mode {mode!r}; expected hf, hf-nu, hf-na:<p>, sl, sb, sb-u or random")


def needs_model(mode: str) -> bool:
    m, _, _ = parse_mode(mode)
    return m not in (PolicyMode.STATELESS_ONLY, PolicyMode.RANDOM)


@dataclass
class TrialOutcome:
    best_solution: object
    best_objective: float
    evaluations: int
    logs: list[IterationLog] = field(repr=False)


class HybridController:
    """Operator-selection controller for one run.

    ``agent`` may be None for modes that never consult the state-based module
    (``sl`` and ``random``). Randomness is split into named substreams of
    ``seed`` so the module-choice draw (exactly one uniform per step) is
    shared between modes under common random numbers.
    """

    def __init__(self, k: int, policy: DecisionPolicy, seed: int, agent: DdqnAgent | None = None,
                 online_update: bool = True, epsilon: float | None = None, window: int = 50,
                 alpha: float = 0.01, beta: float = 0.01, p_max: float = 0.85):
        uses_net = policy.mode in (PolicyMode.ADAPTIVE, PolicyMode.FIXED, PolicyMode.STATE_BASED_ONLY)
        if uses_net and agent is None:
            raise ConfigError(f"mode {policy.mode.value} needs a state-based model")
        if agent is not None and agent.online.n_actions != k:
            raise ConfigError(f"model has {agent.online.n_actions} actions, engine has {k} operators")
        self.k = k
        self.policy = policy
        self.stateless = StatelessAos(k, alpha, beta, p_max)
        self.agent = agent if uses_net else None
        self.online_update = online_update and self.agent is not None
        self.epsilon = agent.cfg.eps_online if epsilon is None and agent is not None else (epsilon or 0.0)
        self.features = FeatureExtractor(k, window)
        self.history: deque[IterationLog] = deque(maxlen=window)
        self.logs: list[IterationLog] = []
        self.state: np.ndarray | None = None
        self.t = 0
        self._choice_rng = rng_stream(seed, "choice")
        self._sl_rng = rng_stream(seed, "stateless")
        self._sb_rng = rng_stream(seed, "statebased")
        self._rand_rng = rng_stream(seed, "random-op")

    def start(self, engine: Engine) -> None:
        if self.agent is not None:
            self.state = self.features.extract(engine.snapshot(), self.history, engine.budget_used)

    def select(self, module: Module) -> int:
        if module is Module.STATELESS:
            return self.stateless.sample(self._sl_rng)
        if module is Module.STATE_BASED:
            return self.agent.act(self.state, self.epsilon, self._sb_rng)
        return int(self._rand_rng.integers(self.k))

    def step(self, engine: Engine) -> IterationLog:
        if self.state is None and self.agent is not None:
            self.start(engine)
        module = choose_module(self.policy, float(self._choice_rng.random()))
        op = self.select(module)
        best_before = engine.best_objective
        y_prev, y_new = engine.apply(op)

        credit = assign_credit(y_prev, y_new)
        self.stateless.update(op, credit)
        self.t += 1
        log = IterationLog(self.t, module, op, y_prev, y_new, credit, 0.0, engine.best_objective)
        self.history.append(log)
        self.logs.append(log)

        if self.agent is not None:
            s_new = self.features.extract(engine.snapshot(), self.history, engine.budget_used)
            if self.online_update:
                r = reward(y_prev, y_new, y_new < best_before)
                self.agent.observe(self.state, op, r, s_new)
            self.state = s_new

        adjust_p(self.policy, y_new < y_prev)
        log.p_after = self.policy.stateless_probability
        return log

    def run(self, engine: Engine) -> TrialOutcome:
        if engine.budget < 1:
            raise ConfigError("budget must be >= 1")
        self.start(engine)
        while not engine.done:
            self.step(engine)
        return TrialOutcome(engine.best_solution, engine.best_objective, engine.evaluations, self.logs)


def make_controller(mode: str, k: int, seed: int, model: QNetwork | None = None,
                    ddqn: DdqnConfig | None = None, p_u: float = 0.5, p_l: float = 0.1) -> HybridController:
    """Controller for a ``--aos`` mode string, starting from a copy of ``model``."""
    pmode, q, online = parse_mode(mode)
    policy = DecisionPolicy(pmode, p_u, p_l, q)
    agent = None
    if needs_model(mode):
        if model is None:
            raise ConfigError(f"mode {mode!r} needs a trained model")
        agent = DdqnAgent(model.copy(), ddqn or DdqnConfig(), rng_stream(seed, "replay"))
    return HybridController(k, policy, seed, agent, online_update=online)
