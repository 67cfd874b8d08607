"""Brute-force ground truth for small instances.

Exact vertex cover and b-matching optima by pruned enumeration, the exact
augmentation distance of a single constraint, exhaustive enumeration of a
protocol's random choices, and a locality check for protocols.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from fractions import Fraction
from typing import NamedTuple

from .instances import CoveringInstance, PackingInstance
from .simulator import Network, enumerate_choices, run

__all__ = [
    "ExactOptimum",
    "OracleLimitError",
    "coverage_marginals",
    "distance_oracle",
    "exact_bmatching",
    "exact_vertex_cover",
    "exhaustive_protocol_outcomes",
    "locality_check",
]

MAX_VC_NODES = 24
MAX_BMATCHING_EDGES = 20
MAX_DISTANCE_ARITY = 3


class OracleLimitError(ValueError):
    """The instance is larger than the oracle is willing to enumerate."""


class ExactOptimum(NamedTuple):
    value: float
    witness: tuple
    searched: int


# --------------------------------------------------------------------------
# vertex cover


def _vc_graph(graph, costs):
    if isinstance(graph, CoveringInstance):
        inst = graph
        edges = []
        for view in inst.constraints():
            if view.arity != 2 or view.coefs != (1.0, 1.0) or view.demand != 1.0:
                raise ValueError(f"constraint {view.index} is not a vertex-cover edge")
            edges.append(view.vars)
        return inst.n_vars, edges, list(inst.costs)
    n, edges = graph
    if costs is None:
        costs = [1.0] * n
    return n, [tuple(e) for e in edges], list(costs)


def exact_vertex_cover(graph, costs=None, max_nodes=MAX_VC_NODES):
    """Minimum-cost vertex cover.

    ``graph`` is a vertex-cover :class:`CoveringInstance` or a pair
    ``(n, edges)`` with ``costs`` given separately.  Branches on an
    uncovered edge: either its first endpoint is in the cover, or all of
    that endpoint's neighbors are.
    """
    n, edges, costs = _vc_graph(graph, costs)
    if n > max_nodes:
        raise OracleLimitError(f"{n} vertices exceeds the limit of {max_nodes}")
    adj = [0] * n
    for a, b in edges:
        if a == b:
            raise ValueError("self-loops are not vertex-cover edges")
        adj[a] |= 1 << b
        adj[b] |= 1 << a
    best = [math.fsum(costs), (1 << n) - 1]
    searched = 0

    def mask_cost(mask):
        return math.fsum(costs[v] for v in range(n) if mask >> v & 1)

    def solve(cover, cost):
        nonlocal searched
        searched += 1
        if cost >= best[0]:
            return
        # pick an uncovered edge at the highest-degree remaining vertex
        pick, deg = -1, 0
        for v in range(n):
            if cover >> v & 1:
                continue
            d = bin(adj[v] & ~cover).count("1")
            if d > deg:
                pick, deg = v, d
        if pick < 0:
            best[0], best[1] = cost, cover
            return
        solve(cover | 1 << pick, cost + costs[pick])
        others = adj[pick] & ~cover
        solve(cover | others, cost + mask_cost(others))

    solve(0, 0.0)
    mask = best[1]
    witness = tuple(v for v in range(n) if mask >> v & 1)
    return ExactOptimum(mask_cost(mask), witness, searched)


# --------------------------------------------------------------------------
# b-matching


def exact_bmatching(packing, max_edges=MAX_BMATCHING_EDGES):
    """Maximum-weight integral ``y`` with ``A^T y <= c`` on a 0/1 instance.

    Depth-first over hyperedges in decreasing weight, trying every feasible
    multiplicity, with a fractional upper bound for pruning.
    """
    cov = packing.covering if isinstance(packing, PackingInstance) else packing
    m = cov.n_cons
    if m > max_edges:
        raise OracleLimitError(f"{m} hyperedges exceeds the limit of {max_edges}")
    if not cov.is_zero_one:
        raise ValueError("exact_bmatching needs 0/1 coefficients")
    caps = [int(math.floor(c + 1e-9)) for c in cov.costs]
    edges = [tuple(j for j, _ in row) for row in cov.cons_vars]
    weights = list(cov.demands)
    order = sorted(range(m), key=lambda i: (-weights[i], i))
    # optimistic bound: each remaining edge at its own capacity limit
    solo = [min((caps[j] for j in edges[i]), default=0) * weights[i] for i in range(m)]
    tail = [0.0] * (m + 1)
    for pos in range(m - 1, -1, -1):
        tail[pos] = tail[pos + 1] + solo[order[pos]]
    best = [-1.0, None]
    y = [0] * m
    searched = 0

    def solve(pos, value):
        nonlocal searched
        searched += 1
        if value + tail[pos] <= best[0]:
            return
        if pos == m:
            best[0], best[1] = value, tuple(y)
            return
        i = order[pos]
        top = min((caps[j] for j in edges[i]), default=0)
        for mult in range(top, -1, -1):
            for j in edges[i]:
                caps[j] -= mult
            y[i] = mult
            solve(pos + 1, value + mult * weights[i])
            for j in edges[i]:
                caps[j] += mult
        y[i] = 0

    solve(0, 0.0)
    witness = best[1]
    return ExactOptimum(math.fsum(w * k for w, k in zip(weights, witness)), witness, searched)


# --------------------------------------------------------------------------
# augmentation distance


def _term(v, a, integer, bound):
    if bound is not None:
        v = min(v, bound)
    if integer:
        v = Fraction(math.floor(v))
    return a * v


def _completion(start, a, need, integer, bound):
    """Least ``v >= start`` whose term reaches ``need`` (``None`` if impossible)."""
    if _term(start, a, integer, bound) >= need:
        return start
    v = need / a
    if integer:
        v = Fraction(math.ceil(v))
    if bound is not None and v > bound:
        return None
    return max(v, start)


def distance_oracle(x, view, costs=None):
    """Exact cheapest ``c(x_hat) - c(x)`` over ``x_hat >= x`` satisfying the constraint.

    Exact rational arithmetic; no satisfaction tolerance.  One variable is
    completed fractionally while the others range over their start value,
    integer breakpoints and upper bound.  Linear costs only.
    """
    if view.arity > MAX_DISTANCE_ARITY:
        raise OracleLimitError(f"constraint {view.index} has arity {view.arity} > {MAX_DISTANCE_ARITY}")
    if costs is None:
        costs = view.costs
    fr = Fraction
    start = [fr(x[j]) for j in view.vars]
    coefs = [fr(a) for a in view.coefs]
    cs = [fr(c) for c in costs]
    bounds = [None if u is None else fr(u) for u in view.bounds]
    w = fr(view.demand)
    n = view.arity

    cands = []
    for k in range(n):
        vals = {start[k]}
        if bounds[k] is not None and bounds[k] > start[k]:
            vals.add(bounds[k])
        if view.integer[k]:
            top = math.ceil(w / coefs[k])
            if bounds[k] is not None:
                top = min(top, math.floor(bounds[k]))
            vals.update(fr(v) for v in range(math.ceil(start[k]), top + 1) if v > start[k])
        cands.append(sorted(vals))

    best = None
    for free in range(-1, n):
        fixed = [k for k in range(n) if k != free]
        for combo in itertools.product(*(cands[k] for k in fixed)):
            xs = list(start)
            for k, v in zip(fixed, combo):
                xs[k] = v
            have = sum((_term(xs[k], coefs[k], view.integer[k], bounds[k]) for k in fixed), fr(0))
            if free >= 0:
                v = _completion(start[free], coefs[free], w - have, view.integer[free], bounds[free])
                if v is None:
                    continue
                xs[free] = v
            elif have < w:
                continue
            cost = sum((c * (v - s) for c, v, s in zip(cs, xs, start)), fr(0))
            if best is None or cost < best:
                best = cost
    if best is None:
        return math.inf
    return float(best)


# --------------------------------------------------------------------------
# protocol enumeration and locality


def exhaustive_protocol_outcomes(make_protocol, network, rounds, observe, max_bits=24):
    """Exact distribution of ``observe(protocol)`` after ``rounds`` communication rounds.

    Every coin and choice is enumerated with a scripted generator shared by
    all nodes; ``make_protocol()`` must return a fresh protocol.  Returns a
    dict mapping each outcome to its :class:`~fractions.Fraction` probability.
    """
    dist = defaultdict(Fraction)

    def run_once(rng):
        proto = make_protocol()
        run(proto, network, 0, rounds, rng_factory=lambda *_: rng, stop_on_done=False)
        return observe(proto)

    for outcome, p in enumerate_choices(run_once, max_bits=max_bits):
        dist[outcome] += p
    return dict(dist)


def coverage_marginals(dist, n_cons):
    """Per-constraint probability of appearing in an outcome set."""
    out = [Fraction(0)] * n_cons
    for outcome, p in dist.items():
        for i in outcome:
            out[i] += p
    return out


def locality_check(make_protocol, instance, network_of, node, rounds, seed):
    """Rerun on the radius-``rounds`` ball around ``node`` and compare its state.

    ``make_protocol(inst)`` builds a protocol, ``network_of(inst)`` its
    network.  Constraints outside the ball are dropped; on a constraint
    network their indices stay reserved so node ids and random streams line
    up.  Returns ``(full_state, ball_state)``.
    """
    net = network_of(instance)
    ball = net.ball(node, rounds)
    if network_of == Network.of_constraints:
        sub = instance.restrict(sorted(ball))
    else:
        # variable network: keep rows inside the ball, renumbered in order
        keep = [i for i, row in enumerate(instance.cons_vars) if all(j in ball for j, _ in row)]
        new_index = {i: k for k, i in enumerate(keep)}
        sub = CoveringInstance(
            instance.n_vars,
            len(keep),
            [(new_index[i], j, a) for i, j, a in instance.entries if i in new_index],
            [instance.demands[i] for i in keep],
            instance.costs,
            instance.upper_bounds,
            instance.integer_vars,
        )

    states = []
    for inst in (instance, sub):
        proto = make_protocol(inst)
        run(proto, network_of(inst), seed, rounds, stop_on_done=False)
        states.append(proto.node_state(node))
    return tuple(states)
