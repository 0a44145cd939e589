"""Experiment orchestration: offline training, multi-trial evaluation and reports."""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

from . import cvrptw
from .benchmarks import make_function
from .core import ConfigError, Engine, HfAosError, rng_stream
from .de_engine import DeConfig, DeEngine
from .hybrid import HybridController, DecisionPolicy, PolicyMode, make_controller, needs_model, parse_mode
from .statebased import DdqnAgent, DdqnConfig, QNetwork, feature_dim, load_model_with_domain, save_model
from .stats import comparison_table, render_table

log = logging.getLogger(__name__)

TRIAL_COLUMNS = ["problem", "mode", "trial", "best", "evals", "seconds"]
COMPARISON_COLUMNS = ["row_mode", "col_mode", "better", "comparable", "worse"]


class IoError(HfAosError, OSError):
    pass


@dataclass
class ExperimentConfig:
    domain: str = "real"
    problems: list = field(default_factory=list)
    aos_modes: list = field(default_factory=lambda: ["hf", "random"])
    trials: int = 30
    budget: int = 10_000
    seed: int = 0
    output_dir: str = "results"
    model_path: str | None = None
    episodes: int = 20
    de: dict = field(default_factory=dict)
    ddqn: dict = field(default_factory=dict)
    record_time: bool = False
    w_v: float = cvrptw.W_VEHICLE
    w_p: float = cvrptw.W_PENALTY

    def __post_init__(self):
        if self.domain not in ("real", "cvrptw"):
            raise ConfigError(f"domain must be 'real' or 'cvrptw', got {self.domain!r}")
        if not self.problems:
            raise ConfigError("problems must be non-empty")
        if self.trials < 2:
            raise ConfigError("trials must be >= 2 for paired statistics")
        if self.budget < 1:
            raise ConfigError("budget must be >= 1")
        for m in self.aos_modes:
            parse_mode(m)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc

    def de_config(self) -> DeConfig:
        return DeConfig(budget=self.budget, **self.de)

    def ddqn_config(self) -> DdqnConfig:
        return DdqnConfig.from_dict(self.ddqn)


@dataclass(frozen=True)
class TrialResult:
    problem: str
    mode: str
    trial: int
    best: float
    evals: int
    seconds: float = 0.0


# ---------------------------------------------------------------------------
# problems and engines


def problem_id(domain: str, spec) -> str:
    if domain == "real":
        name, dim, shift = _real_spec(spec)
        return f"{name}_d{dim}" + ("" if shift is None else f"_s{shift}")
    return Path(_instance_path(spec)).stem


def _real_spec(spec):
    if isinstance(spec, str):
        name, _, dim = spec.partition(":")
        return name, int(dim or 10), None
    if isinstance(spec, dict):
        return spec["name"], int(spec.get("dim", 10)), spec.get("shift_seed")
    raise ConfigError(f"bad real problem spec {spec!r}")


def _instance_path(spec) -> str:
    p = Path(spec)
    if p.exists():
        return str(p)
    try:
        return str(cvrptw.bundled_instance_path(str(spec)))
    except FileNotFoundError:
        raise ConfigError(f"instance {spec!r} not found (neither a path nor a bundled fixture)") from None


_INSTANCES: dict[str, cvrptw.Instance] = {}


def make_engine(cfg: ExperimentConfig, spec, seed: int) -> Engine:
    """Engine for one trial. The initial population/plan depends only on
    ``(problem, seed)``, never on the AOS mode."""
    init_rng = rng_stream(seed, "init")
    op_rng = rng_stream(seed, "ops")
    if cfg.domain == "real":
        name, dim, shift = _real_spec(spec)
        return DeEngine(make_function(name, dim, shift), cfg.de_config(), init_rng, op_rng)
    path = _instance_path(spec)
    if path not in _INSTANCES:
        _INSTANCES[path] = cvrptw.load_instance(path)
    return cvrptw.LocalSearchEngine(_INSTANCES[path], cfg.budget, init_rng, op_rng, w_v=cfg.w_v, w_p=cfg.w_p)


# ---------------------------------------------------------------------------
# offline training


def offline_train(cfg: ExperimentConfig, out_path, loss_csv=None, loss_every: int = 100) -> QNetwork:
    """Pre-train the Q-network on ``cfg.problems`` and write it to ``out_path``.

    Episodes cycle through the problems round-robin; each is one full run in
    which the network alone picks operators, epsilon-greedily, and learns
    after every application. Replay memory is shared across episodes.
    """
    dd = cfg.ddqn_config()
    probe = make_engine(cfg, cfg.problems[0], cfg.seed)
    k = probe.k_ops
    net = QNetwork.create([feature_dim(k), dd.hidden, dd.hidden, k], rng_stream(cfg.seed, "net-init"))
    agent = DdqnAgent(net, dd, rng_stream(cfg.seed, "replay"))
    steps_per_episode = probe.budget - probe.evaluations
    total = max(1, cfg.episodes * steps_per_episode)

    rows = []
    step = 0
    for ep in range(cfg.episodes):
        spec = cfg.problems[ep % len(cfg.problems)]
        seed = cfg.seed + ep
        engine = make_engine(cfg, spec, seed)
        ctrl = HybridController(k, DecisionPolicy(PolicyMode.STATE_BASED_ONLY), seed, agent, online_update=True)
        ctrl.start(engine)
        first = len(agent.losses)
        while not engine.done:
            ctrl.epsilon = dd.epsilon(step, total)
            ctrl.step(engine)
            step += 1
        losses = agent.losses[first:]
        for i in range(0, len(losses), loss_every):
            chunk = losses[i:i + loss_every]
            rows.append((ep, problem_id(cfg.domain, spec), first + i, sum(chunk) / len(chunk)))
        log.info("episode %d on %s: best %.6g, %d updates", ep, problem_id(cfg.domain, spec),
                 engine.best_objective, agent.updates)

    try:
        save_model(agent.online, out_path, cfg.domain)
        if loss_csv is not None:
            with open(loss_csv, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["episode", "problem", "update", "mean_loss"])
                w.writerows(rows)
    except OSError as exc:
        raise IoError(f"cannot write training output: {exc}") from exc
    return agent.online


# ---------------------------------------------------------------------------
# evaluation

_WORKER_MODEL: dict = {}


def _load_model(path: str) -> QNetwork:
    st = os.stat(path)
    key = (path, st.st_mtime_ns, st.st_size)
    if key not in _WORKER_MODEL:
        _WORKER_MODEL[key] = load_model_with_domain(path)
    return _WORKER_MODEL[key][0]


def run_trial(cfg: ExperimentConfig, spec, mode: str, trial: int, model: QNetwork | None = None) -> TrialResult:
    seed = cfg.seed + trial
    engine = make_engine(cfg, spec, seed)
    if model is None and needs_model(mode):
        model = _load_model(cfg.model_path)
    ctrl = make_controller(mode, engine.k_ops, seed, model, cfg.ddqn_config())
    start = time.perf_counter()
    out = ctrl.run(engine)
    seconds = time.perf_counter() - start if cfg.record_time else 0.0
    return TrialResult(problem_id(cfg.domain, spec), mode, trial, float(out.best_objective), out.evaluations, seconds)


def _run_task(args) -> TrialResult:
    cfg, spec, mode, trial = args
    return run_trial(cfg, spec, mode, trial)


def worker_count() -> int:
    env = os.environ.get("HF_AOS_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"HF_AOS_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def evaluate(cfg: ExperimentConfig, workers: int | None = None) -> list[TrialResult]:
    """Run every (problem, mode, trial) combination; results in config order."""
    if any(needs_model(m) for m in cfg.aos_modes):
        if not cfg.model_path or not Path(cfg.model_path).exists():
            raise ConfigError(f"modes {cfg.aos_modes} need a trained model; model_path={cfg.model_path!r}")
        _, domain = load_model_with_domain(cfg.model_path)
        if domain != cfg.domain:
            raise ConfigError(f"model was trained for domain {domain!r}, config is {cfg.domain!r}")
    tasks = [(cfg, spec, mode, t) for spec in cfg.problems for mode in cfg.aos_modes for t in range(cfg.trials)]
    workers = workers or worker_count()
    if workers <= 1:
        results = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_task, tasks, chunksize=1))
    return results


# ---------------------------------------------------------------------------
# reports


def write_trials(results, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRIAL_COLUMNS)
        for r in results:
            w.writerow([r.problem, r.mode, r.trial, repr(r.best), r.evals, repr(r.seconds)])


def read_trials(path) -> list[TrialResult]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != TRIAL_COLUMNS:
            raise ConfigError(f"{path}: expected columns {TRIAL_COLUMNS}, got {reader.fieldnames}")
        return [TrialResult(row["problem"], row["mode"], int(row["trial"]), float(row["best"]),
                            int(row["evals"]), float(row["seconds"])) for row in reader]


def modes_in_order(results) -> list[str]:
    seen: dict[str, None] = {}
    for r in results:
        seen.setdefault(r.mode, None)
    return list(seen)


def write_report(results, out_dir, modes: list[str] | None = None, alpha: float = 0.05) -> dict:
    """Write trials.csv, comparison.csv and comparison.txt into ``out_dir``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_trials(results, out / "trials.csv")
        table = write_comparison(results, out, modes, alpha)
    except OSError as exc:
        raise IoError(f"cannot write report to {out}: {exc}") from exc
    return table


def write_comparison(results, out_dir, modes: list[str] | None = None, alpha: float = 0.05) -> dict:
    out = Path(out_dir)
    modes = modes or modes_in_order(results)
    table = comparison_table(results, modes, alpha) if results else {}
    with open(out / "comparison.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COMPARISON_COLUMNS)
        for (r, c), cell in table.items():
            w.writerow([r, c, cell.better, cell.comparable, cell.worse])
    (out / "comparison.txt").write_text(render_table(table, modes) if len(modes) > 1 else "")
    return table


def run_experiment(cfg: ExperimentConfig, out_dir=None, workers: int | None = None) -> list[TrialResult]:
    results = evaluate(cfg, workers)
    write_report(results, out_dir or cfg.output_dir, cfg.aos_modes)
    return results
