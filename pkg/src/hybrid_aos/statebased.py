"""State-based operator selection: search-state features and a Double-DQN policy.

The Q-network is a plain numpy MLP (affine, ReLU, affine, ReLU, affine) with
hand-written backpropagation and SGD, so training is bit-reproducible for a
given seed.
"""

from __future__ import annotations

import json
import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .core import DimensionError, FormatError, IterationLog, SearchSnapshot

FORMAT_VERSION = 1
GAP_EPS = 1e-12


def feature_dim(k: int) -> int:
    return 8 + 2 * k


@dataclass(frozen=True)
class DdqnConfig:
    gamma: float = 0.99
    learning_rate: float = 1e-3
    batch_size: int = 64
    target_sync_every: int = 500
    warmup: int = 500
    capacity: int = 20_000
    hidden: int = 32
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_fraction: float = 0.2
    eps_online: float = 0.05

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        if self.batch_size > self.capacity:
            raise ValueError("batch_size must not exceed replay capacity")

    def epsilon(self, step: int, total_steps: int) -> float:
        """Offline exploration rate: linear decay over the first part of training."""
        horizon = max(1, int(self.eps_decay_fraction * total_steps))
        if step >= horizon:
            return self.eps_end
        return self.eps_start + (self.eps_end - self.eps_start) * step / horizon

    @classmethod
    def from_dict(cls, d: dict | None) -> "DdqnConfig":
        return cls(**(d or {}))

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# state features


class FeatureExtractor:
    """Maps a search snapshot plus the recent application history to [0, 1]^(8+2K).

    Features, in order:

    0. fraction of budget used
    1. stagnation: steps since the best-so-far improved, over the window W
    2. gap of the current objective to the best, squashed by x / (1 + x)
    3. dispersion divided by its running maximum
    4. log-compressed rank of the current objective among the last W objectives
    5. whether the last application improved on its parent
    6. fraction of improving applications in the window
    7. last credit
    8..8+K-1    selection share of each operator in the window
    8+K..8+2K-1 mean credit of each operator in the window
    """

    def __init__(self, k: int, window: int = 50):
        self.k = k
        self.window = window
        self.dim = feature_dim(k)
        self.max_dispersion = 0.0

    def extract(self, snap: SearchSnapshot, history: Sequence[IterationLog], budget_used: float) -> np.ndarray:
        k, W = self.k, self.window
        s = np.zeros(self.dim)
        s[0] = budget_used
        s[1] = min(1.0, snap.stagnation / W)
        gap = max(0.0, (snap.current - snap.best) / (abs(snap.best) + GAP_EPS))
        s[2] = gap / (1.0 + gap) if math.isfinite(gap) else 1.0
        self.max_dispersion = max(self.max_dispersion, snap.dispersion)
        if self.max_dispersion > 0.0:
            s[3] = snap.dispersion / self.max_dispersion

        recent = list(history)[-W:]
        if not recent:
            s[8:8 + k] = 1.0 / k
        else:
            n = len(recent)
            rank = sum(1 for h in recent if h.y_after < snap.current)
            s[4] = math.log1p(rank) / math.log1p(W)
            s[5] = float(recent[-1].improved)
            s[6] = sum(1 for h in recent if h.improved) / n
            s[7] = recent[-1].credit
            counts = np.zeros(k)
            credit_sum = np.zeros(k)
            for h in recent:
                counts[h.op] += 1
                credit_sum[h.op] += h.credit
            s[8:8 + k] = counts / n
            s[8 + k:] = np.divide(credit_sum, counts, out=np.zeros(k), where=counts > 0)
        np.clip(s, 0.0, 1.0, out=s)
        return s


def extract_state(snap: SearchSnapshot, history: Sequence[IterationLog], budget_used: float,
                  k: int, window: int = 50, max_dispersion: float | None = None) -> np.ndarray:
    """Stateless convenience wrapper around :class:`FeatureExtractor`."""
    fx = FeatureExtractor(k, window)
    if max_dispersion is not None:
        fx.max_dispersion = max_dispersion
    return fx.extract(snap, history, budget_used)


def reward(y_prev: float, y_new: float, new_global_best: bool) -> float:
    r = min(1.0, max(0.0, (y_prev - y_new) / max(abs(y_prev), 1e-12)))
    return r + (0.5 if new_global_best else 0.0)


# ---------------------------------------------------------------------------
# network


class QNetwork:
    """Fully connected ReLU network; ``weights[i]`` has shape (out, in)."""

    def __init__(self, weights: list[np.ndarray], biases: list[np.ndarray]):
        if len(weights) != len(biases) or not weights:
            raise DimensionError("need one bias per weight matrix")
        for i, (W, b) in enumerate(zip(weights, biases)):
            if W.ndim != 2 or b.shape != (W.shape[0],):
                raise DimensionError(f"layer {i}: weight {W.shape} incompatible with bias {b.shape}")
            if i and W.shape[1] != weights[i - 1].shape[0]:
                raise DimensionError(f"layer {i} expects {W.shape[1]} inputs, previous layer gives {weights[i - 1].shape[0]}")
        self.weights = [np.array(W, dtype=float) for W in weights]
        self.biases = [np.array(b, dtype=float) for b in biases]

    @classmethod
    def create(cls, layer_dims: Sequence[int], rng: np.random.Generator) -> "QNetwork":
        """He-uniform weights, zero biases."""
        weights, biases = [], []
        for n_in, n_out in zip(layer_dims[:-1], layer_dims[1:]):
            bound = math.sqrt(6.0 / n_in)
            weights.append(rng.uniform(-bound, bound, size=(n_out, n_in)))
            biases.append(np.zeros(n_out))
        return cls(weights, biases)

    @property
    def layer_dims(self) -> list[int]:
        return [self.weights[0].shape[1]] + [W.shape[0] for W in self.weights]

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def n_actions(self) -> int:
        return self.weights[-1].shape[0]

    def copy(self) -> "QNetwork":
        return QNetwork([W.copy() for W in self.weights], [b.copy() for b in self.biases])

    def parameters(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Q-values for one state (shape (D,)) or a batch (shape (B, D))."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.input_dim or x.ndim > 2:
            raise DimensionError(f"network expects {self.input_dim} features, got shape {x.shape}")
        h = x
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ W.T + b
            if i < last:
                h = np.maximum(h, 0.0)
        return h

    def loss_and_grads(self, S: np.ndarray, A: np.ndarray, Y: np.ndarray) -> tuple[float, list[np.ndarray]]:
        """Mean squared TD error on the taken actions and its parameter gradients.

        Gradients come back in :meth:`parameters` order.
        """
        S = np.asarray(S, dtype=float)
        if S.ndim != 2 or S.shape[1] != self.input_dim:
            raise DimensionError(f"batch must have shape (B, {self.input_dim}), got {S.shape}")
        B = S.shape[0]
        acts = [S]
        pre = []
        h = S
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ W.T + b
            pre.append(z)
            h = np.maximum(z, 0.0) if i < last else z
            acts.append(h)
        rows = np.arange(B)
        err = h[rows, A] - Y
        loss = float(np.mean(err * err))

        delta = np.zeros_like(h)
        delta[rows, A] = 2.0 * err / B
        grads: list[np.ndarray] = []
        for i in range(last, -1, -1):
            gW = delta.T @ acts[i]
            gb = delta.sum(axis=0)
            grads.append(gb)
            grads.append(gW)
            if i:
                delta = (delta @ self.weights[i]) * (pre[i - 1] > 0.0)
        grads.reverse()
        return loss, grads

    def sgd_step(self, grads: list[np.ndarray], lr: float) -> None:
        for p, g in zip(self.parameters(), grads):
            p -= lr * g


def sync_target(online: QNetwork) -> QNetwork:
    return online.copy()


def select_epsilon_greedy(net: QNetwork, s: np.ndarray, eps: float, rng: np.random.Generator) -> int:
    """Uniform operator with probability ``eps``, else argmax Q (first index on ties)."""
    if rng.random() < eps:
        return int(rng.integers(net.n_actions))
    return int(np.argmax(net.forward(s)))


def ddqn_targets(online: QNetwork, target: QNetwork, R: np.ndarray, S2: np.ndarray, gamma: float) -> np.ndarray:
    """``r + gamma * Q_target(s', argmax_a Q_online(s', a))``."""
    if gamma == 0.0:
        return np.asarray(R, dtype=float).copy()
    best = np.argmax(online.forward(S2), axis=1)
    q_next = target.forward(S2)[np.arange(len(best)), best]
    return R + gamma * q_next


def ddqn_update(online: QNetwork, target: QNetwork, batch, cfg: DdqnConfig) -> float:
    """One SGD step of the online network on a batch ``(S, A, R, S2)``; returns the loss."""
    S, A, R, S2 = batch
    if len(A) == 0:
        raise ValueError("empty batch")
    if online.layer_dims != target.layer_dims:
        raise DimensionError(f"online {online.layer_dims} and target {target.layer_dims} differ")
    Y = ddqn_targets(online, target, R, S2, cfg.gamma)
    loss, grads = online.loss_and_grads(S, A, Y)
    online.sgd_step(grads, cfg.learning_rate)
    return loss


# ---------------------------------------------------------------------------
# replay


class ReplayBuffer:
    """Fixed-capacity FIFO ring of transitions stored in flat arrays."""

    def __init__(self, capacity: int, state_dim: int):
        self.capacity = capacity
        self.S = np.zeros((capacity, state_dim))
        self.S2 = np.zeros((capacity, state_dim))
        self.A = np.zeros(capacity, dtype=np.int64)
        self.R = np.zeros(capacity)
        self.cursor = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def add(self, s, a: int, r: float, s2) -> None:
        if r < 0:
            raise ValueError(f"rewards are non-negative, got {r}")
        i = self.cursor
        self.S[i] = s
        self.A[i] = a
        self.R[i] = r
        self.S2[i] = s2
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, rng: np.random.Generator, batch_size: int):
        idx = rng.integers(self.size, size=batch_size)
        return self.S[idx], self.A[idx], self.R[idx], self.S2[idx]

    def ordered(self):
        """All stored transitions, oldest first."""
        start = self.cursor if self.size == self.capacity else 0
        idx = (start + np.arange(self.size)) % self.capacity
        return self.S[idx], self.A[idx], self.R[idx], self.S2[idx]


class DdqnAgent:
    """Online network, target network and replay memory trained together.

    ``observe`` stores a transition and, once ``warmup`` transitions are
    stored, runs one Double-DQN step; the target network is re-synced every
    ``target_sync_every`` gradient steps.
    """

    def __init__(self, net: QNetwork, cfg: DdqnConfig, rng: np.random.Generator):
        self.online = net
        self.target = sync_target(net)
        self.cfg = cfg
        self.rng = rng
        self.buffer = ReplayBuffer(cfg.capacity, net.input_dim)
        self.updates = 0
        self.losses: list[float] = []

    def reset_buffer(self) -> None:
        self.buffer = ReplayBuffer(self.cfg.capacity, self.online.input_dim)

    def act(self, s: np.ndarray, eps: float, rng: np.random.Generator) -> int:
        return select_epsilon_greedy(self.online, s, eps, rng)

    def observe(self, s, a: int, r: float, s2, learn: bool = True) -> float | None:
        self.buffer.add(s, a, r, s2)
        if not learn or len(self.buffer) < max(self.cfg.warmup, 1):
            return None
        batch = self.buffer.sample(self.rng, self.cfg.batch_size)
        loss = ddqn_update(self.online, self.target, batch, self.cfg)
        self.losses.append(loss)
        self.updates += 1
        if self.updates % self.cfg.target_sync_every == 0:
            self.target = sync_target(self.online)
        return loss


# ---------------------------------------------------------------------------
# model files


def model_to_dict(net: QNetwork, domain: str) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "feature_dim": net.input_dim,
        "k_ops": net.n_actions,
        "domain": domain,
        "layers": [
            {"rows": W.shape[0], "cols": W.shape[1], "weights": W.ravel().tolist(), "bias": b.tolist()}
            for W, b in zip(net.weights, net.biases)
        ],
    }


def model_from_dict(doc: dict) -> tuple[QNetwork, str]:
    if not isinstance(doc, dict):
        raise FormatError("model document must be a JSON object")
    if doc.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported model format_version {doc.get('format_version')!r}")
    try:
        weights, biases = [], []
        for layer in doc["layers"]:
            rows, cols = int(layer["rows"]), int(layer["cols"])
            flat = np.asarray(layer["weights"], dtype=float)
            bias = np.asarray(layer["bias"], dtype=float)
            if flat.size != rows * cols or bias.shape != (rows,):
                raise FormatError(f"layer sizes do not match rows={rows}, cols={cols}")
            weights.append(flat.reshape(rows, cols))
            biases.append(bias)
        net = QNetwork(weights, biases)
        domain = doc["domain"]
        feat, k = int(doc["feature_dim"]), int(doc["k_ops"])
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"corrupt model file: {exc}") from exc
    if net.input_dim != feat or net.n_actions != k:
        raise FormatError(f"header dims ({feat}, {k}) disagree with layers {net.layer_dims}")
    if not all(np.all(np.isfinite(p)) for p in net.parameters()):
        raise FormatError("model contains non-finite parameters")
    if domain not in ("real", "cvrptw"):
        raise FormatError(f"unknown domain {domain!r}")
    return net, domain


def save_model(net: QNetwork, path, domain: str = "real") -> None:
    Path(path).write_text(json.dumps(model_to_dict(net, domain)))


def load_model(path) -> QNetwork:
    return load_model_with_domain(path)[0]


def load_model_with_domain(path) -> tuple[QNetwork, str]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    return model_from_dict(doc)
