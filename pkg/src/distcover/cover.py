"""Sequential covering: relaxation potential, stepsize, step and the solve loop.

A constraint ``sum_j A_ij x_j >= w_i`` over integer variables ``I`` and upper
bounds ``u`` is evaluated as

    sum_{j in I} A_ij floor(min(x_j, u_j)) + sum_{j not in I} A_ij min(x_j, u_j) >= w_i.

Dropping the floor and/or the cap of each variable independently gives the
family of relaxed constraints; the potential ``phi`` counts how many of them
``x`` still violates.  A step raises every variable of the constraint by
``beta / c_j`` where ``beta`` is the cheapest single-variable raise that
decreases the potential.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .costs import as_cost

__all__ = [
    "CoverResult",
    "InfeasibleInstanceError",
    "ReplayError",
    "StepLog",
    "StepRecord",
    "check_feasible",
    "constraint_lhs",
    "hit_detector",
    "is_satisfied",
    "min_targets",
    "phi",
    "round_assignment",
    "sequential_cover",
    "step",
    "stepsize",
    "stepsize_cmip",
    "stepsize_fractional",
    "stepsize_wvc",
]

FLOOR = 1
CAP = 2
REL_TOL = 1e-9
MAX_ENUM_ARITY = 8


class InfeasibleInstanceError(ValueError):
    """A constraint cannot be met even with every variable at its maximum."""

    def __init__(self, cons_index, message=None):
        self.cons_index = cons_index
        super().__init__(message or f"constraint {cons_index} is infeasible at the capped maximum")


class ReplayError(RuntimeError):
    """An externally supplied step order is inconsistent with the instance."""


def tolerance(w):
    return REL_TOL * max(1.0, abs(w))


def tol_floor(v):
    return math.floor(v + REL_TOL * max(1.0, abs(v)))


def _modes(integer, bound):
    if integer and bound is not None:
        return (FLOOR | CAP, CAP, FLOOR, 0)
    if integer:
        return (FLOOR, 0)
    if bound is not None:
        return (CAP, 0)
    return (0,)


def _term(v, mode, bound):
    if mode & CAP:
        v = min(v, bound)
    if mode & FLOOR:
        v = tol_floor(v)
    return v


def _relaxations(view):
    if view.arity > MAX_ENUM_ARITY and not _plain(view):
        raise ValueError(
            f"constraint {view.index} has {view.arity} variables; relaxation enumeration "
            f"is limited to {MAX_ENUM_ARITY}"
        )
    return itertools.product(*(_modes(i, u) for i, u in zip(view.integer, view.bounds)))


def _plain(view):
    return not any(view.integer) and all(u is None for u in view.bounds)


def _vals(x, view):
    return [x[j] for j in view.vars]


def constraint_lhs(x, view):
    """Left-hand side under the floor/min interpretation."""
    modes = [(FLOOR if i else 0) | (CAP if u is not None else 0) for i, u in zip(view.integer, view.bounds)]
    return sum(a * _term(x[j], m, u) for a, j, m, u in zip(view.coefs, view.vars, modes, view.bounds))


def is_satisfied(x, view):
    return constraint_lhs(x, view) >= view.demand - tolerance(view.demand)


def phi(x, view):
    """Number of relaxed constraints of ``view`` that ``x`` violates."""
    vals = _vals(x, view)
    lim = view.demand - tolerance(view.demand)
    count = 0
    for modes in _relaxations(view):
        lhs = sum(a * _term(v, m, u) for a, v, m, u in zip(view.coefs, vals, modes, view.bounds))
        if lhs < lim:
            count += 1
    return count


def _target(v, a, need, mode, bound, tol):
    """Smallest value >= v for one variable that makes its term reach ``need``."""
    if mode & FLOOR:
        k = math.ceil((need - tol) / a)
        if mode & CAP and k > tol_floor(bound):
            return math.inf
        return float(max(k, 0))
    if mode & CAP:
        if v >= bound or a * bound < need - tol:
            return math.inf
        return min(need / a, bound)
    return need / a


def min_targets(vals, view):
    """Per variable position: the least value reducing ``phi`` by a lone raise.

    ``vals`` holds the current values of ``view.vars``.  Entries are ``inf``
    when raising that variable alone cannot satisfy any violated relaxation.
    """
    w = view.demand
    tol = tolerance(w)
    lim = w - tol
    best = [math.inf] * view.arity
    for modes in _relaxations(view):
        terms = [a * _term(v, m, u) for a, v, m, u in zip(view.coefs, vals, modes, view.bounds)]
        total = sum(terms)
        if total >= lim:
            continue
        for p, (a, v, m, u) in enumerate(zip(view.coefs, vals, modes, view.bounds)):
            need = w - (total - terms[p])
            t = _target(v, a, need, m, u, tol)
            if t < best[p]:
                best[p] = t
    return best


def stepsize_cmip(x, view, cost=None):
    """Cheapest single-variable raise that decreases ``phi`` (lowest index on ties).

    Returns 0.0 for a satisfied constraint.  ``cost`` defaults to linear
    costs taken from the view.
    """
    vals = _vals(x, view)
    targets = min_targets(vals, view)
    best = math.inf
    for p, (j, t) in enumerate(zip(view.vars, targets)):
        if t == math.inf:
            continue
        if cost is None:
            price = view.costs[p] * (t - vals[p])
        else:
            price = cost.increase(j, vals[p], t)
        if price < best:
            best = price
    if best == math.inf:
        if is_satisfied(x, view):
            return 0.0
        raise InfeasibleInstanceError(view.index)
    return best


def stepsize_wvc(x, view, cost=None):
    """Vertex-cover step: ``min_j (1 - x_j) c_j`` over the edge's endpoints."""
    return min((1.0 - x[j]) * c for j, c in zip(view.vars, view.costs))


def stepsize_fractional(x, view, cost=None):
    """Residual demand times ``min_j c_j / A_ij`` for plain fractional rows."""
    residual = view.demand - math.fsum(a * x[j] for a, j in zip(view.coefs, view.vars))
    return max(residual, 0.0) * min(c / a for c, a in zip(view.costs, view.coefs))


_RULES = {"phi": stepsize_cmip, "wvc": stepsize_wvc, "fractional": stepsize_fractional}


def stepsize(x, view, rule="phi", cost=None):
    try:
        fn = _RULES[rule]
    except KeyError:
        raise ValueError(f"unknown stepsize rule {rule!r}; expected one of {sorted(_RULES)}") from None
    return fn(x, view, cost)


def step(x, view, beta, cost=None):
    """Raise every variable of ``view`` by ``beta / c_j`` (in place); returns ``x``.

    With a non-linear ``cost`` each variable is raised maximally subject to
    its own cost increase being at most ``beta``.
    """
    if not beta > 0:
        raise ValueError(f"step size must be positive, got {beta}")
    if cost is None:
        for j, c in zip(view.vars, view.costs):
            x[j] = x[j] + beta / c
    else:
        for j in view.vars:
            x[j] = cost.raise_by(j, x[j], beta)
    return x


def hit_detector(x_before, x_after, view):
    """True when moving from ``x_before`` to ``x_after`` lowers the potential."""
    return phi(x_after, view) < phi(x_before, view)


def round_assignment(x, instance):
    """``floor(min(x_j, u_j))`` for integer variables, ``min(x_j, u_j)`` otherwise."""
    out = []
    for j, v in enumerate(x):
        u = instance.upper_bounds[j]
        if u is not None:
            v = min(v, u)
        if j in instance.integer_vars:
            v = float(tol_floor(v))
        out.append(float(v))
    return out


def check_feasible(instance):
    """Raise :class:`InfeasibleInstanceError` if some row fails at the capped maximum."""
    for view in instance.constraints():
        if view.demand <= 0:
            continue
        total = 0.0
        for a, integer, u in zip(view.coefs, view.integer, view.bounds):
            if u is None:
                total = math.inf
                break
            total += a * (tol_floor(u) if integer else u)
        if total < view.demand - tolerance(view.demand):
            raise InfeasibleInstanceError(view.index)


# --------------------------------------------------------------------------
# step log


@dataclass(frozen=True)
class StepRecord:
    """One covering step.  ``t`` is a scalar sequence number or a ``(t_R, t_S)`` pair."""

    cons: int
    beta: float
    t: object

    def to_dict(self):
        t = list(self.t) if isinstance(self.t, tuple) else self.t
        return {"t": t, "cons": self.cons, "beta": self.beta}

    @classmethod
    def from_dict(cls, d):
        t = tuple(d["t"]) if isinstance(d["t"], list) else d["t"]
        return cls(int(d["cons"]), float(d["beta"]), t)


class StepLog(list):
    """Ordered list of :class:`StepRecord`; serializes to JSON lines."""

    def to_jsonl(self):
        return "".join(json.dumps(r.to_dict()) + "\n" for r in self)

    @classmethod
    def from_jsonl(cls, text):
        return cls(StepRecord.from_dict(json.loads(line)) for line in text.splitlines() if line.strip())

    def order(self):
        return [r.cons for r in self]


class CoverResult(NamedTuple):
    x: list
    x_raw: list
    log: StepLog


def _policy_order(instance, order, seed):
    m = instance.n_cons
    if order is None or order == "input":
        return list(range(m)), False
    if order == "random":
        return [int(i) for i in np.random.default_rng(seed).permutation(m)], False
    if isinstance(order, str):
        raise ValueError(f"unknown order policy {order!r}")
    if isinstance(order, StepLog) or any(isinstance(i, StepRecord) for i in order):
        return [int(r.cons) for r in order], True
    seq = [int(i) for i in order]
    if sorted(seq) != list(range(m)):
        raise ValueError("an explicit order must be a permutation of the constraint indices")
    return seq, False


def sequential_cover(instance, order="input", seed=None, rule="phi", cost=None):
    """Step unsatisfied constraints until every constraint holds.

    ``order`` is ``"input"`` (lowest index first), ``"random"`` (a seeded
    permutation) or an explicit permutation; rows already satisfied when
    their turn comes are skipped.  A :class:`StepLog` is replayed verbatim
    instead: each record must name a currently unsatisfied constraint and
    receives exactly one step.  Returns the rounded assignment, the raw one
    and the step log.
    """
    check_feasible(instance)
    cost_fn = None if cost is None else as_cost(cost, instance)
    x = [0.0] * instance.n_vars
    log = StepLog()
    seq, replay = _policy_order(instance, order, seed)
    views = instance.constraints()
    if replay:
        for t, i in enumerate(seq, start=1):
            view = views[i]
            if is_satisfied(x, view):
                raise ReplayError(f"step {t}: constraint {i} is already satisfied")
            beta = stepsize(x, view, rule, cost_fn)
            step(x, view, beta, cost_fn)
            log.append(StepRecord(i, beta, t))
        return CoverResult(round_assignment(x, instance), x, log)

    t = 0
    for i in seq:
        view = views[i]
        limit = 4 ** view.arity
        n_steps = 0
        while not is_satisfied(x, view):
            n_steps += 1
            if n_steps > limit:
                raise RuntimeError(f"constraint {i} not satisfied after {limit} steps")
            beta = stepsize(x, view, rule, cost_fn)
            t += 1
            step(x, view, beta, cost_fn)
            log.append(StepRecord(i, beta, t))
    return CoverResult(round_assignment(x, instance), x, log)
