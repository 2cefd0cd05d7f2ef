"""Capacity sandwiches for entanglement and key distribution over networks.

Every task (bipartite, multi-pair, multipartite) gets a lower and an upper
bound, both computed as flow maximizations on the undirected weighted graph
of the network: the lower bound weights each edge with achievable capacities,
the upper bound with entanglement measures.  Three usage accountings are
supported: the network's own per-edge usage weights (FIXED_Q), one use of
every channel per network use (PER_NETWORK_USE), and a joint optimization of
the usage frequencies under a unit budget (PER_CHANNEL_USE), which adds one
nonnegative variable per directed edge and a single equality constraint to
the flow program, never a nested max-min loop.

Multicommodity upper bounds carry an unavoidable O(log k) gap to the
corresponding cut quantity; the gap factor is reported symbolically in the
``slack_note`` and a numeric slack factor (default 1) may be applied.
"""

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import lpcore
from .netmodel import (Measure, NetworkValidationError, WeightedUGraph,
                       _channel_weight)

__all__ = [
    "UsageUnit",
    "BoundReport",
    "TreePackingConstants",
    "bipartite_bounds",
    "multipair_bounds",
    "multipartite_bounds",
]

_REPORT_TOL = 1e-9


class UsageUnit(str, enum.Enum):
    PER_CHANNEL_USE = "channel-use"
    PER_NETWORK_USE = "network-use"
    FIXED_Q = "fixed-q"


@dataclass(frozen=True)
class TreePackingConstants:
    """Constants (g3, g4) of the tree-packing lower bound used for
    multipartite rates.  The default is the conjectured (1/2, 0); the
    proven alternatives are Lau's (1/26, 0) and, for terminal sets leaving
    r non-terminals, (r/2, 1).  Only g3 enters the asymptotic rate; g4 is
    recorded in the annotation."""

    g3: float = 0.5
    g4: float = 0.0


@dataclass(frozen=True)
class BoundReport:
    """A lower/upper sandwich on a network capacity, in ebits per unit.

    ``q_opt`` is the optimized usage-frequency vector (one entry per
    directed edge of the network, summing to one) when the unit is
    PER_CHANNEL_USE; it is the optimizer of the lower-bound program, so
    feeding it back as FIXED_Q reproduces the lower value.  ``slack_note``
    carries the symbolic gap factors that the upper bound is subject to.
    """

    lower: float
    upper: float
    unit: UsageUnit
    q_opt: tuple | None = None
    slack_note: str = ""

    def __post_init__(self):
        if not (self.lower <= self.upper + _REPORT_TOL
                or (math.isinf(self.lower) and math.isinf(self.upper))):
            raise ValueError(
                f"lower bound {self.lower!r} exceeds upper bound "
                f"{self.upper!r}")
        if self.q_opt is not None:
            object.__setattr__(self, "q_opt", tuple(self.q_opt))
            total = sum(self.q_opt)
            if abs(total - 1.0) > 1e-9 or min(self.q_opt) < -1e-9:
                raise ValueError("q_opt is not a probability vector")


def _undirected_key(e):
    return (e.tail, e.head) if e.tail < e.head else (e.head, e.tail)


def _edge_values(net, measure, esq_lossy):
    """Per directed edge index: channel value under the measure."""
    return [_channel_weight(e.channel, measure, esq_lossy=esq_lossy)
            for e in net.edges]


def _weighted_graph(net, measure, unit, esq_lossy):
    """Undirected graph with weights fixed by the usage accounting
    (FIXED_Q or PER_NETWORK_USE)."""
    values = _edge_values(net, measure, esq_lossy)
    weights = {}
    for e, val in zip(net.edges, values):
        q = 1.0 if unit is UsageUnit.PER_NETWORK_USE else e.q
        contrib = val * q
        if math.isinf(val):
            contrib = math.inf if q > 0 else 0.0
        key = _undirected_key(e)
        weights[key] = weights.get(key, 0.0) + contrib
    uedges = tuple((u, v, w) for (u, v), w in sorted(weights.items()))
    return WeightedUGraph(vertices=net.nodes, uedges=uedges)


def _solve_capacity_lp(net, measure, unit, pairs, mode, esq_lossy):
    """One flow LP for a capacity bound.

    ``mode``:
      "total"       maximize the summed flow, shared edge capacity
      "worst"       maximize the least flow, shared edge capacity
      "independent" maximize the least flow, each pair with its own
                    private copy of the capacity constraints

    Returns (value, q_opt or None).
    """
    unit = UsageUnit(unit)
    if not net.edges:
        return 0.0, None  # no channels, nothing to weight or optimize
    uedge_keys = sorted({_undirected_key(e) for e in net.edges})
    edge_index = {key: j for j, key in enumerate(uedge_keys)}
    n_e = len(uedge_keys)
    k = len(pairs)
    optimize_q = unit is UsageUnit.PER_CHANNEL_USE
    n_q = len(net.edges) if optimize_q else 0

    # Fixed weights (or None when q is optimized).
    values = _edge_values(net, measure, esq_lossy)
    if not optimize_q:
        graph = _weighted_graph(net, measure, unit, esq_lossy)
        fixed_w = {(u, v): w for u, v, w in graph.uedges}
    # Per undirected edge: the directed edges contributing to its weight.
    q_terms = [[] for _ in range(n_e)]
    for q_idx, (e, val) in enumerate(zip(net.edges, values)):
        q_terms[edge_index[_undirected_key(e)]].append((q_idx, val))

    worst_like = mode in ("worst", "independent")
    n_flow = 2 * n_e * k
    n = n_flow + (1 if worst_like else 0) + n_q
    q_offset = n_flow + (1 if worst_like else 0)

    def fvar(i, j, direction):
        return i * 2 * n_e + 2 * j + direction

    incident = {v: [] for v in net.nodes}
    for j, (u, v) in enumerate(uedge_keys):
        incident[u].append((j, 0))
        incident[v].append((j, 1))

    def net_flow_row(i, vertex):
        row = np.zeros(n)
        for j, direction in incident[vertex]:
            row[fvar(i, j, direction)] += 1.0
            row[fvar(i, j, 1 - direction)] -= 1.0
        return row

    rows_ineq, rhs_ineq = [], []
    capacity_groups = ([range(k)] if mode in ("total", "worst")
                       else [[i] for i in range(k)])
    for group in capacity_groups:
        for j in range(n_e):
            if optimize_q:
                if any(math.isinf(val) for _, val in q_terms[j]):
                    continue  # lossless edge: capacity never binds
                row = np.zeros(n)
                for i in group:
                    row[fvar(i, j, 0)] = 1.0
                    row[fvar(i, j, 1)] = 1.0
                for q_idx, val in q_terms[j]:
                    row[q_offset + q_idx] = -val
                rows_ineq.append(row)
                rhs_ineq.append(0.0)
            else:
                w = fixed_w[uedge_keys[j]]
                if math.isinf(w):
                    continue
                row = np.zeros(n)
                for i in group:
                    row[fvar(i, j, 0)] = 1.0
                    row[fvar(i, j, 1)] = 1.0
                rows_ineq.append(row)
                rhs_ineq.append(w)

    rows_eq, rhs_eq = [], []
    for i, (s, t) in enumerate(pairs):
        for v in net.nodes:
            if v in (s, t) or not incident[v]:
                continue
            rows_eq.append(net_flow_row(i, v))
            rhs_eq.append(0.0)

    c = np.zeros(n)
    if worst_like:
        c[n_flow] = 1.0
        for i, (s, t) in enumerate(pairs):
            row = np.zeros(n)
            row[n_flow] = 1.0
            row -= net_flow_row(i, s)
            rows_ineq.append(row)
            rhs_ineq.append(0.0)
    else:
        for i, (s, t) in enumerate(pairs):
            c += net_flow_row(i, s)

    if optimize_q:
        row = np.zeros(n)
        row[q_offset:q_offset + n_q] = 1.0
        rows_eq.append(row)
        rhs_eq.append(1.0)

    lp = lpcore.from_inequalities(
        c,
        np.array(rows_ineq).reshape(-1, n), np.array(rhs_ineq),
        np.array(rows_eq).reshape(-1, n), np.array(rhs_eq))
    result = lpcore.solve(lp)
    if result.status is lpcore.LPStatus.UNBOUNDED:
        return math.inf, None
    if result.status is not lpcore.LPStatus.OPTIMAL:
        raise lpcore.LPNumericError(
            f"capacity LP unexpectedly {result.status.value}")
    q_opt = None
    if optimize_q:
        q_opt = tuple(float(x) for x in
                      result.solution[q_offset:q_offset + n_q])
    return float(result.value), q_opt


def bipartite_bounds(net, a, b, unit=UsageUnit.PER_NETWORK_USE,
                     esq_lossy_upper=False):
    """Two-party capacity sandwich between nodes ``a`` and ``b``.

    The lower bound is the maximum flow under achievable-capacity weights,
    the upper bound the maximum flow under entanglement-measure weights
    (equivalently, by max-flow min-cut, the tightest cut bound).  On
    networks of pure-loss channels the two coincide.

    Parameters
    ----------
    net : NetworkSpec
    a, b : str
        Distinct nodes of ``net``.
    unit : UsageUnit
    esq_lossy_upper : bool
        Weight lossy channels with the looser squashed-entanglement bound
        on the upper side.
    """
    if a == b:
        raise NetworkValidationError("the two parties must be distinct nodes")
    for node in (a, b):
        if node not in net.nodes:
            raise NetworkValidationError(
                f"node {node!r} is not in the network")
    unit = UsageUnit(unit)
    lower, q_opt = _solve_capacity_lp(
        net, Measure.LOWER_CAPACITY, unit, [(a, b)], "total", False)
    upper, _ = _solve_capacity_lp(
        net, Measure.UPPER_ENTANGLEMENT, unit, [(a, b)], "total",
        esq_lossy_upper)
    return BoundReport(lower=lower, upper=upper, unit=unit, q_opt=q_opt,
                       slack_note="upper = tightest cut bound; "
                                  "lower = achievable routing flow")


def multipair_bounds(net, pairs, objective="total",
                     unit=UsageUnit.PER_NETWORK_USE, slack_factor=1.0,
                     esq_lossy_upper=False):
    """Concurrent multi-pair capacity sandwich.

    ``objective`` is ``"total"`` (sum of the pair rates) or ``"worst"``
    (least pair rate).  The upper bound is the respective multicommodity
    flow under entanglement weights; it certifies the capacity only up to
    the O(log k) gap factor (g1 for total, g2 for worst) between flows and
    multicuts / cut ratios, which is recorded in the slack note.  A numeric
    ``slack_factor`` >= 1 may be applied to widen the upper bound; the
    default 1 reports the raw flow value.  Pairs sharing an endpoint are
    accepted.
    """
    pairs = [tuple(p) for p in pairs]
    if not pairs:
        raise ValueError("at least one pair required")
    for s, t in pairs:
        if s == t:
            raise NetworkValidationError(f"pair endpoints coincide: {s!r}")
        for node in (s, t):
            if node not in net.nodes:
                raise NetworkValidationError(
                    f"node {node!r} is not in the network")
    if slack_factor < 1.0:
        raise ValueError("slack_factor must be >= 1")
    objective = str(objective)
    if objective not in ("total", "worst"):
        raise ValueError(f"unknown objective {objective!r}")
    unit = UsageUnit(unit)
    k = len(pairs)
    lower, q_opt = _solve_capacity_lp(
        net, Measure.LOWER_CAPACITY, unit, pairs, objective, False)
    upper, _ = _solve_capacity_lp(
        net, Measure.UPPER_ENTANGLEMENT, unit, pairs, objective,
        esq_lossy_upper)
    gap = "g1(k)" if objective == "total" else "g2(k)"
    note = (f"upper holds up to the multicommodity gap {gap} = O(log k), "
            f"k={k}; numeric slack factor {slack_factor:g} applied")
    return BoundReport(lower=lower, upper=upper * slack_factor, unit=unit,
                       q_opt=q_opt, slack_note=note)


def multipartite_bounds(net, users=None, unit=UsageUnit.PER_NETWORK_USE,
                        tree_constants=TreePackingConstants(),
                        esq_lossy_upper=False):
    """Capacity sandwich for distributing multipartite entanglement among
    a user set.

    Both bounds maximize the least pairwise flow among the users, each
    pair solving its own private copy of the capacity constraints (the
    pairs do not compete: the quantity is a connectivity, not a concurrent
    flow).  The lower bound is scaled by the tree-packing constant g3
    (default 1/2) reflecting that spanning trees consume edges faster than
    pairwise paths do.

    ``users`` defaults to ``net.users``.
    """
    if users is None:
        users = net.users
    if users is None:
        raise ValueError("no user set given and the network declares none")
    users = list(users)
    if len(users) < 2:
        raise ValueError("user set must contain at least two nodes")
    for u in users:
        if u not in net.nodes:
            raise NetworkValidationError(
                f"node {u!r} is not in the network")
    unit = UsageUnit(unit)
    pairs = list(itertools.combinations(users, 2))
    lower_raw, q_opt = _solve_capacity_lp(
        net, Measure.LOWER_CAPACITY, unit, pairs, "independent", False)
    upper, _ = _solve_capacity_lp(
        net, Measure.UPPER_ENTANGLEMENT, unit, pairs, "independent",
        esq_lossy_upper)
    g3 = tree_constants.g3
    lower = g3 * lower_raw
    note = (f"lower = g3 * least pairwise flow with g3={g3:g} "
            f"(g4={tree_constants.g4:g} dropped in the asymptotic rate); "
            f"upper = least pairwise cut bound")
    return BoundReport(lower=lower, upper=upper, unit=unit, q_opt=q_opt,
                       slack_note=note)
