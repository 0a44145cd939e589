"""CVRPTW: Solomon instance I/O, plan evaluation, neighbourhood moves and a
first-improvement local search that hosts the operator-selection controller.

Move pool (operator index -> move):

    0  relocate    one customer to its best position in another route
    1  swap        exchange two customers between routes
    2  two-opt*    exchange the tails of two routes
    3  or-opt      move a segment of 2-3 customers to its best position in a
                   route (possibly its own)

A plan is a tuple of routes, each a tuple of customer ids; the depot (node 0)
is implicit at both ends. Distances are unrounded Euclidean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Engine, FormatError, PlanError, SearchSnapshot

K_OPS = 4
MOVE_NAMES = ("relocate", "swap", "two-opt*", "or-opt")
W_VEHICLE = 1000.0
W_PENALTY = 10000.0

RoutePlan = tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class Node:
    id: int
    x: float
    y: float
    demand: float
    ready: float
    due: float
    service: float


@dataclass(frozen=True, eq=False)
class Instance:
    name: str
    vehicle_limit: int
    capacity: float
    nodes: tuple[Node, ...]

    def __post_init__(self):
        if self.capacity <= 0:
            raise FormatError(f"capacity must be positive, got {self.capacity}")
        for i, n in enumerate(self.nodes):
            if n.id != i:
                raise FormatError(f"node ids must be contiguous from 0, found {n.id} at position {i}")
            if n.ready > n.due:
                raise FormatError(f"node {n.id}: ready time {n.ready} after due date {n.due}")
        if not self.nodes or self.nodes[0].demand != 0:
            raise FormatError("depot (node 0) must exist and have zero demand")
        xy = np.array([(n.x, n.y) for n in self.nodes])
        d = np.sqrt(((xy[:, None, :] - xy[None, :, :]) ** 2).sum(axis=2))
        # plain nested lists: indexing them is much faster than numpy scalars in the hot loops
        object.__setattr__(self, "dist", d.tolist())

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return (self.name, self.vehicle_limit, self.capacity, self.nodes) == \
            (other.name, other.vehicle_limit, other.capacity, other.nodes)

    @property
    def n_customers(self) -> int:
        return len(self.nodes) - 1


# ---------------------------------------------------------------------------
# Solomon format


def _numbers(line: str, lineno: int) -> list[float]:
    try:
        return [float(tok) for tok in line.split()]
    except ValueError:
        raise FormatError(f"line {lineno}: non-numeric field in {line.strip()!r}") from None


def parse_solomon(text: str) -> Instance:
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]
    lines = [(i, ln) for i, ln in lines if ln]
    if not lines:
        raise FormatError("empty instance text")
    name = lines[0][1]
    upper = [ln.upper() for _, ln in lines]
    try:
        v_at = upper.index("VEHICLE")
    except ValueError:
        raise FormatError("missing section: VEHICLE") from None
    try:
        c_at = upper.index("CUSTOMER")
    except ValueError:
        raise FormatError("missing section: CUSTOMER") from None

    vehicle_rows = [(i, ln) for i, ln in lines[v_at + 1:c_at] if not ln.upper().startswith("NUMBER")]
    if not vehicle_rows:
        raise FormatError("missing section: VEHICLE values (NUMBER CAPACITY)")
    lineno, row = vehicle_rows[0]
    vals = _numbers(row, lineno)
    if len(vals) != 2:
        raise FormatError(f"line {lineno}: expected NUMBER and CAPACITY, got {row!r}")
    vehicle_limit, capacity = int(vals[0]), vals[1]

    nodes: dict[int, Node] = {}
    for lineno, row in lines[c_at + 1:]:
        if row.upper().startswith("CUST"):
            continue
        vals = _numbers(row, lineno)
        if len(vals) != 7:
            raise FormatError(f"line {lineno}: expected 7 customer columns, got {len(vals)}")
        cid = int(vals[0])
        if cid in nodes:
            raise FormatError(f"duplicate customer id {cid}")
        nodes[cid] = Node(cid, *vals[1:])
    if not nodes:
        raise FormatError("missing section: CUSTOMER rows")
    if sorted(nodes) != list(range(len(nodes))):
        raise FormatError(f"customer ids must be 0..{len(nodes) - 1}")
    return Instance(name, vehicle_limit, capacity, tuple(nodes[i] for i in range(len(nodes))))


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def serialize_solomon(inst: Instance) -> str:
    out = [inst.name, "", "VEHICLE", "NUMBER     CAPACITY",
           f"  {inst.vehicle_limit:<10d} {_fmt(inst.capacity)}", "", "CUSTOMER",
           "CUST NO.  XCOORD.   YCOORD.    DEMAND   READY TIME  DUE DATE   SERVICE   TIME", ""]
    for n in inst.nodes:
        out.append("  ".join(f"{_fmt(v):>8}" for v in (n.id, n.x, n.y, n.demand, n.ready, n.due, n.service)))
    return "\n".join(out) + "\n"


def load_instance(path) -> Instance:
    return parse_solomon(Path(path).read_text())


def bundled_instance_path(name: str) -> Path:
    """Path of a fixture shipped in ``hybrid_aos/data`` (e.g. "c1_25")."""
    path = Path(__file__).parent / "data" / f"{name}.txt"
    if not path.exists():
        raise FileNotFoundError(path)
    return path


# ---------------------------------------------------------------------------
# evaluation


@dataclass(frozen=True)
class EvaluatedPlan:
    plan: RoutePlan
    distance: float
    vehicles: int
    tw_violation: float
    cap_violation: float
    objective: float

    @property
    def feasible(self) -> bool:
        return self.tw_violation == 0.0 and self.cap_violation == 0.0


def route_stats(inst: Instance, route) -> tuple[float, float, float]:
    """(distance, lateness, load) of one route, depot legs included.

    Service starts at ``max(ready, arrival)``. Lateness sums
    ``max(0, arrival - due)`` over the customers and the return to the depot.
    """
    dist = inst.dist
    nodes = inst.nodes
    t = 0.0
    d = 0.0
    late = 0.0
    load = 0.0
    prev = 0
    for c in route:
        leg = dist[prev][c]
        d += leg
        arrive = t + leg
        n = nodes[c]
        if arrive > n.due:
            late += arrive - n.due
        t = (arrive if arrive > n.ready else n.ready) + n.service
        load += n.demand
        prev = c
    leg = dist[prev][0]
    d += leg
    arrive = t + leg
    if arrive > nodes[0].due:
        late += arrive - nodes[0].due
    return d, late, load


def route_cost(inst: Instance, route, w_p: float = W_PENALTY) -> float:
    """Penalised cost of a single route, used to rank insertion positions."""
    if not route:
        return 0.0
    d, late, load = route_stats(inst, route)
    return d + w_p * (late + max(0.0, load - inst.capacity))


def check_plan(inst: Instance, plan) -> None:
    seen = sorted(c for r in plan for c in r)
    if seen != list(range(1, inst.n_customers + 1)):
        missing = set(range(1, inst.n_customers + 1)) - set(seen)
        raise PlanError(f"plan must visit customers 1..{inst.n_customers} exactly once "
                        f"(missing {sorted(missing)}, {len(seen)} visits)")
    if any(len(r) == 0 for r in plan):
        raise PlanError("plan contains an empty route")


def evaluate_plan(inst: Instance, plan, w_v: float = W_VEHICLE, w_p: float = W_PENALTY) -> EvaluatedPlan:
    check_plan(inst, plan)
    distance = late = over = 0.0
    for r in plan:
        d, lt, load = route_stats(inst, r)
        distance += d
        late += lt
        over += max(0.0, load - inst.capacity)
    plan = tuple(tuple(r) for r in plan)
    objective = w_v * len(plan) + distance + w_p * (late + over)
    return EvaluatedPlan(plan, distance, len(plan), late, over, objective)


# ---------------------------------------------------------------------------
# construction


def initial_plan(inst: Instance, rng: np.random.Generator) -> RoutePlan:
    """Greedy route construction.

    Routes are built one at a time by appending the unrouted customer whose
    service can start soonest (travel plus waiting) among those that keep
    the route within capacity and within every due date, including the
    return to the depot. A new route opens when no customer fits. Once the
    vehicle limit is reached the remaining customers are appended to the
    last route in the same order, carrying their violations. Ties are broken
    by a random customer order drawn from ``rng``.
    """
    n = inst.n_customers
    order = {int(c): i for i, c in enumerate(rng.permutation(np.arange(1, n + 1)))}
    nodes, dist = inst.nodes, inst.dist
    depot_due = nodes[0].due
    unrouted = set(range(1, n + 1))
    routes: list[list[int]] = []
    while unrouted:
        last_route = len(routes) + 1 >= inst.vehicle_limit
        route: list[int] = []
        t, load, prev = 0.0, 0.0, 0
        while unrouted:
            feasible, forced = [], []
            for c in unrouted:
                nd = nodes[c]
                arrive = t + dist[prev][c]
                start = max(arrive, nd.ready)
                key = (start - t, order[c], c)
                if (load + nd.demand <= inst.capacity and arrive <= nd.due
                        and start + nd.service + dist[c][0] <= depot_due):
                    feasible.append(key)
                else:
                    forced.append(key)
            if feasible:
                c = min(feasible)[2]
            elif not route or last_route:
                c = min(forced)[2]
            else:
                break
            nd = nodes[c]
            t = max(t + dist[prev][c], nd.ready) + nd.service
            load += nd.demand
            prev = c
            route.append(c)
            unrouted.discard(c)
        routes.append(route)
    return tuple(tuple(r) for r in routes)


# ---------------------------------------------------------------------------
# moves


def _prune(routes) -> RoutePlan:
    return tuple(tuple(r) for r in routes if r)


def _best_insertion(inst: Instance, route: list[int], seg: list[int], w_p: float,
                    skip: int | None = None) -> tuple[int, float]:
    """Position in ``route`` where inserting ``seg`` adds the least penalised cost."""
    base = route_cost(inst, route, w_p)
    best_pos, best_delta = -1, math.inf
    for pos in range(len(route) + 1):
        if pos == skip:
            continue
        delta = route_cost(inst, route[:pos] + seg + route[pos:], w_p) - base
        if delta < best_delta:
            best_pos, best_delta = pos, delta
    return best_pos, best_delta


def relocate(plan: RoutePlan, inst: Instance, rng: np.random.Generator, w_p: float = W_PENALTY):
    if len(plan) < 2:
        return plan, False
    customers = [(ri, pi) for ri, r in enumerate(plan) for pi in range(len(r))]
    ri, pi = customers[int(rng.integers(len(customers)))]
    rj = int(rng.integers(len(plan) - 1))
    rj += rj >= ri
    routes = [list(r) for r in plan]
    c = routes[ri].pop(pi)
    pos, _ = _best_insertion(inst, routes[rj], [c], w_p)
    routes[rj].insert(pos, c)
    return _prune(routes), True


def swap_customers(plan: RoutePlan, a: int, b: int) -> RoutePlan:
    """Exchange the positions of customers ``a`` and ``b``."""
    return tuple(tuple(b if c == a else a if c == b else c for c in r) for r in plan)


def swap(plan: RoutePlan, inst: Instance, rng: np.random.Generator, w_p: float = W_PENALTY):
    if len(plan) < 2:
        return plan, False
    ri = int(rng.integers(len(plan)))
    rj = int(rng.integers(len(plan) - 1))
    rj += rj >= ri
    a = plan[ri][int(rng.integers(len(plan[ri])))]
    b = plan[rj][int(rng.integers(len(plan[rj])))]
    return swap_customers(plan, a, b), True


def two_opt_star_at(plan: RoutePlan, ri: int, rj: int, i: int, j: int) -> RoutePlan:
    """Cut route ``ri`` after ``i`` customers and ``rj`` after ``j``; swap the tails."""
    r1, r2 = plan[ri], plan[rj]
    routes = [list(r) for r in plan]
    routes[ri] = list(r1[:i] + r2[j:])
    routes[rj] = list(r2[:j] + r1[i:])
    return _prune(routes)


def two_opt_star(plan: RoutePlan, inst: Instance, rng: np.random.Generator, w_p: float = W_PENALTY):
    if len(plan) < 2:
        return plan, False
    ri = int(rng.integers(len(plan)))
    rj = int(rng.integers(len(plan) - 1))
    rj += rj >= ri
    i = int(rng.integers(len(plan[ri]) + 1))
    j = int(rng.integers(len(plan[rj]) + 1))
    new = two_opt_star_at(plan, ri, rj, i, j)
    return new, sorted(new) != sorted(plan)


def or_opt(plan: RoutePlan, inst: Instance, rng: np.random.Generator, w_p: float = W_PENALTY):
    candidates = [ri for ri, r in enumerate(plan) if len(r) >= 2]
    if not candidates:
        return plan, False
    ri = candidates[int(rng.integers(len(candidates)))]
    src = plan[ri]
    seg_len = min(len(src), 2 + int(rng.integers(2)))
    start = int(rng.integers(len(src) - seg_len + 1))
    rj = int(rng.integers(len(plan)))
    if rj == ri and seg_len == len(src):
        return plan, False
    routes = [list(r) for r in plan]
    seg = routes[ri][start:start + seg_len]
    del routes[ri][start:start + seg_len]
    pos, _ = _best_insertion(inst, routes[rj], seg, w_p, skip=start if rj == ri else None)
    routes[rj][pos:pos] = seg
    return _prune(routes), True


MOVES = (relocate, swap, two_opt_star, or_opt)


def apply_move(op: int, plan: RoutePlan, inst: Instance, rng: np.random.Generator,
               w_p: float = W_PENALTY) -> tuple[RoutePlan, bool]:
    """Apply move ``op``; returns ``(new_plan, changed)``. Impossible moves return the input."""
    if not 0 <= op < K_OPS:
        raise ValueError(f"move index {op} outside [0, {K_OPS})")
    return MOVES[op](plan, inst, rng, w_p)


# ---------------------------------------------------------------------------
# local search host


class LocalSearchEngine(Engine):
    """Single-trajectory descent: a candidate replaces the incumbent only if
    its objective is strictly lower. The budget counts move applications."""

    k_ops = K_OPS

    def __init__(self, inst: Instance, budget: int, init_rng: np.random.Generator,
                 op_rng: np.random.Generator, plan: RoutePlan | None = None,
                 w_v: float = W_VEHICLE, w_p: float = W_PENALTY):
        self.inst = inst
        self.budget = budget
        self.rng = op_rng
        self.w_v, self.w_p = w_v, w_p
        self.current = evaluate_plan(inst, plan if plan is not None else initial_plan(inst, init_rng), w_v, w_p)
        self.best = self.current
        self.evaluations = 0
        self.stagnation = 0
        self._candidate = self.current.objective

    def apply(self, op: int) -> tuple[float, float]:
        y_prev = self.current.objective
        new_plan, changed = apply_move(op, self.current.plan, self.inst, self.rng, self.w_p)
        self.evaluations += 1
        if changed:
            cand = evaluate_plan(self.inst, new_plan, self.w_v, self.w_p)
            y_new = cand.objective
            if y_new < y_prev:
                self.current = cand
        else:
            y_new = y_prev
        if y_new < self.best.objective:
            self.best = self.current
            self.stagnation = 0
        else:
            self.stagnation += 1
        self._candidate = y_new
        return y_prev, y_new

    def dispersion(self) -> float:
        """Coefficient of variation of route loads of the incumbent."""
        loads = [sum(self.inst.nodes[c].demand for c in r) for r in self.current.plan]
        mean = sum(loads) / len(loads)
        if mean <= 0.0:
            return 0.0
        return math.sqrt(sum((v - mean) ** 2 for v in loads) / len(loads)) / mean

    def snapshot(self) -> SearchSnapshot:
        return SearchSnapshot(self._candidate, self.best.objective, self.dispersion(), self.stagnation)

    @property
    def best_objective(self) -> float:
        return self.best.objective

    @property
    def best_solution(self) -> EvaluatedPlan:
        return self.best
