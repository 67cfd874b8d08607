"""Step-time partial order over covering constraints and the reverse-order packing pass.

Constraint ``i`` precedes ``i'`` when they share a variable and ``i`` was
stepped earlier.  Raising packing variables maximally in the reverse of any
linear extension of this order yields the same dual vector; slack is always
recomputed with an exactly rounded sum so the arithmetic cannot depend on
which extension was used.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from typing import NamedTuple

__all__ = [
    "DuplicateTimestampError",
    "FeasibilityError",
    "NotALinearExtensionError",
    "PackingSolution",
    "Poset",
    "RatioReport",
    "RatioViolationError",
    "build_poset",
    "is_linear_extension",
    "packing_slack",
    "random_linear_extension",
    "raise_maximally",
    "sequential_pack",
    "verify_ratio",
]


class DuplicateTimestampError(ValueError):
    """Two steps on constraints sharing a variable carry the same time."""


class NotALinearExtensionError(ValueError):
    pass


class FeasibilityError(AssertionError):
    """A covering or packing solution violates a constraint."""

    def __init__(self, kind, index, detail=""):
        self.kind = kind
        self.index = index
        super().__init__(f"{kind} constraint {index} violated{': ' + detail if detail else ''}")


class RatioViolationError(AssertionError):
    pass


@dataclass
class Poset:
    """Ground set with its step times and the covering relation (immediate edges).

    ``succ[i]`` lists the constraints that directly follow ``i`` on some shared
    variable; the transitive closure of these edges is the full order.
    """

    times: dict
    succ: dict = field(default_factory=dict)
    pred: dict = field(default_factory=dict)

    @property
    def nodes(self):
        return sorted(self.times)

    def __len__(self):
        return len(self.times)

    def __contains__(self, i):
        return i in self.times

    def precedes(self, a, b):
        """True when ``a`` strictly precedes ``b`` in the transitive closure."""
        if a not in self.times or b not in self.times or self.times[a] >= self.times[b]:
            return False
        stack, seen = [a], {a}
        while stack:
            for nxt in self.succ[stack.pop()]:
                if nxt == b:
                    return True
                if nxt not in seen and self.times[nxt] < self.times[b]:
                    seen.add(nxt)
                    stack.append(nxt)
        return False

    def time_order(self):
        return sorted(self.times, key=self.times.__getitem__)


def build_poset(log, instance):
    """Order the stepped constraints of ``log`` by shared variables and time.

    Each constraint may appear at most once (fractional covering steps
    satisfy their constraint immediately).  Constraints that never stepped
    are not part of the ground set.
    """
    times = {}
    for rec in log:
        if rec.cons in times:
            raise ValueError(f"constraint {rec.cons} was stepped more than once")
        times[rec.cons] = rec.t
    succ = {i: set() for i in times}
    pred = {i: set() for i in times}
    for j in range(instance.n_vars):
        chain = sorted((times[i], i) for i, _ in instance.var_cons[j] if i in times)
        for (t0, a), (t1, b) in zip(chain, chain[1:]):
            if t0 == t1:
                raise DuplicateTimestampError(
                    f"constraints {a} and {b} share variable {j} and both have time {t0}"
                )
            succ[a].add(b)
            pred[b].add(a)
    return Poset(times, {i: sorted(s) for i, s in succ.items()}, {i: sorted(p) for i, p in pred.items()})


def random_linear_extension(poset, rng):
    """A uniformly tie-broken topological order (Kahn's algorithm).

    ``rng`` is a seed or a :class:`random.Random`.
    """
    if not isinstance(rng, random.Random):
        rng = random.Random(rng)
    indeg = {i: len(p) for i, p in poset.pred.items()}
    ready = sorted(i for i, d in indeg.items() if d == 0)
    out = []
    while ready:
        k = rng.randrange(len(ready))
        ready[k], ready[-1] = ready[-1], ready[k]
        i = ready.pop()
        out.append(i)
        for nxt in poset.succ[i]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                ready.append(nxt)
    return out


def is_linear_extension(poset, order):
    if sorted(order) != poset.nodes:
        return False
    pos = {i: k for k, i in enumerate(order)}
    return all(pos[a] < pos[b] for a, nxt in poset.succ.items() for b in nxt)


@dataclass
class PackingSolution:
    y: list
    done: list

    def value(self, instance):
        return instance.value(self.y)

    def to_json(self, instance=None):
        doc = {"y": self.y, "done": self.done}
        if instance is not None:
            doc["value"] = self.value(instance)
        return json.dumps(doc)


def packing_slack(y, j, instance):
    """``c_j - sum_i A_ij y_i``, exactly rounded."""
    return math.fsum([instance.costs[j]] + [-a * y[i] for i, a in instance.var_cons[j]])


def raise_maximally(y, s, instance):
    """Largest value for ``y_s`` keeping every packing constraint on it feasible.

    ``y[s]`` is treated as zero.  Raises ``ValueError`` when the packing
    variable appears in no packing constraint.
    """
    row = instance.cons_vars[s]
    if not row:
        raise ValueError(f"packing variable {s} appears in no packing constraint")
    prev, y[s] = y[s], 0.0
    try:
        value = min(packing_slack(y, j, instance) / a for j, a in row)
    finally:
        y[s] = prev
    return max(value, 0.0)


def sequential_pack(instance, poset, order=None, check=True):
    """Raise packing variables maximally in reverse of the linear extension ``order``.

    ``order`` defaults to increasing step time.  Constraints outside the
    poset (never stepped) get ``y = 0``.
    """
    if order is None:
        order = poset.time_order()
    elif not is_linear_extension(poset, order):
        raise NotALinearExtensionError("order is not a linear extension of the step poset")
    y = [0.0] * instance.n_cons
    done = [i not in poset for i in range(instance.n_cons)]
    for s in reversed(order):
        y[s] = raise_maximally(y, s, instance)
        done[s] = True
        if check:
            for j, _ in instance.cons_vars[s]:
                slack = packing_slack(y, j, instance)
                if slack < -1e-9 * max(1.0, instance.costs[j]):
                    raise FeasibilityError("packing", j, f"slack {slack}")
    return PackingSolution(y, done)


class RatioReport(NamedTuple):
    cx: float
    wy: float
    ratio: float
    rho: int
    covering_feasible: bool
    packing_feasible: bool
    violated_cover: int
    violated_pack: int
    ok: bool


def _first_violated_cover(instance, x):
    from .cover import is_satisfied

    for view in instance.constraints():
        if not is_satisfied(x, view):
            return view.index
    return None


def _first_violated_pack(instance, y):
    for i, v in enumerate(y):
        if v < 0:
            return ("negative", i)
    for j in range(instance.n_vars):
        load = math.fsum(a * y[i] for i, a in instance.var_cons[j])
        if load > instance.costs[j] + 1e-9 * max(1.0, instance.costs[j]):
            return ("capacity", j)
    return None


def verify_ratio(instance, x, y=None, rho=None, tol=1e-6, strict=True):
    """Check feasibility of ``x`` (and ``y``) and ``c.x <= rho * w.y + tol``.

    With ``strict`` a violation raises :class:`FeasibilityError` or
    :class:`RatioViolationError`; otherwise it is only reported.  ``ratio``
    is ``None`` when ``y`` is absent or ``w.y == 0``.
    """
    rho = instance.rho if rho is None else rho
    cx = instance.cost(x)
    bad_cover = _first_violated_cover(instance, x)
    bad_pack = None
    wy = None
    ratio = None
    if y is not None:
        wy = instance.value(y)
        bad_pack = _first_violated_pack(instance, y)
        if wy > 0:
            ratio = cx / wy
    ratio_ok = y is None or cx <= rho * wy + tol
    ok = bad_cover is None and bad_pack is None and ratio_ok
    if strict and not ok:
        if bad_cover is not None:
            raise FeasibilityError("covering", bad_cover)
        if bad_pack is not None:
            raise FeasibilityError("packing", bad_pack[1], bad_pack[0])
        raise RatioViolationError(f"c.x = {cx} exceeds rho * w.y = {rho} * {wy}")
    return RatioReport(
        cx,
        wy,
        ratio,
        rho,
        bad_cover is None,
        bad_pack is None,
        bad_cover,
        None if bad_pack is None else bad_pack[1],
        ok,
    )
