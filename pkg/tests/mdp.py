"""Two-state deterministic MDP used to check that Double-DQN learns.

States A and B alternate whatever the action. Action 0 pays 1 in A, action 1
pays 1 in B, everything else pays 0. With discount g the optimal values are
V* = 1 / (1 - g), Q*(optimal) = V*, Q*(other) = g V*.
"""

import numpy as np

from hybrid_aos.core import rng_stream
from hybrid_aos.statebased import DdqnAgent, DdqnConfig, QNetwork

STATES = np.eye(2)
OPTIMAL = (0, 1)


def analytic_q(gamma):
    v = 1.0 / (1.0 - gamma)
    q = np.full((2, 2), gamma * v)
    q[0, 0] = q[1, 1] = v
    return q


def train_mdp(seed, steps=5000, cfg=None, eps=0.2):
    cfg = cfg or mdp_config()
    agent = DdqnAgent(QNetwork.create([2, cfg.hidden, cfg.hidden, 2], rng_stream(seed, "net")), cfg,
                      rng_stream(seed, "replay"))
    act_rng = rng_stream(seed, "act")
    s = 0
    for _ in range(steps):
        a = agent.act(STATES[s], eps, act_rng)
        r = 1.0 if a == OPTIMAL[s] else 0.0
        s2 = 1 - s
        agent.observe(STATES[s], a, r, STATES[s2])
        s = s2
    return agent


def mdp_config():
    # default learning settings; a short horizon keeps the analytic values small
    return DdqnConfig(gamma=0.5)
