"""Shared bookkeeping for covering protocols: global observer and packing tables."""

from __future__ import annotations

import math

from ..cover import StepLog, phi
from ..simulator import Protocol


class CoverageCounter:
    """Incrementally tracks satisfied constraints and the total potential.

    Only constraints that are still violated and touch a changed variable are
    re-evaluated, so a round costs time proportional to what changed.
    """

    def __init__(self, instance, x):
        self.instance = instance
        self.x = x
        self.views = instance.constraints()
        self.phi = [phi(x, v) for v in self.views]
        self.unsat = {i for i, p in enumerate(self.phi) if p > 0}
        self.phi_total = sum(self.phi)
        self.dirty = set()

    def touch(self, j):
        self.dirty.add(j)

    def refresh(self):
        var_cons = self.instance.var_cons
        for j in self.dirty:
            for i, _ in var_cons[j]:
                if i in self.unsat:
                    p = phi(self.x, self.views[i])
                    self.phi_total += p - self.phi[i]
                    self.phi[i] = p
                    if p == 0:
                        self.unsat.discard(i)
        self.dirty.clear()

    @property
    def satisfied(self):
        return self.instance.n_cons - len(self.unsat)

    def row(self, round_):
        self.refresh()
        return {"round": round_, "satisfied": self.satisfied, "phi_total": self.phi_total}


class CoveringProtocol(Protocol):
    """Common state for protocols that build a covering ``x`` and a step log.

    ``x`` is the observer's copy of every node's value; node logic never
    reads another node's entry from it.
    """

    def __init__(self, instance):
        self.instance = instance

    def setup(self, network, seed):
        self.network = network
        self.seed = seed
        self.x = [0.0] * self.instance.n_vars
        self.log = StepLog()
        self.counter = CoverageCounter(self.instance, self.x)

    def publish(self, j, value):
        self.x[j] = value
        self.counter.touch(j)

    def record(self, rec):
        self.log.append(rec)


def pack_value(instance, i, y_by_var):
    """Raise ``y_i`` maximally given, per variable of ``i``, the other ``y`` on its column.

    ``y_by_var[j]`` maps constraint index to its current ``y`` for every
    constraint on variable ``j`` known to be set.  Uses an exactly rounded
    sum so the result matches the sequential pass bit for bit.
    """
    best = math.inf
    for j, a in instance.cons_vars[i]:
        col = y_by_var[j]
        slack = math.fsum([instance.costs[j]] + [-aa * col.get(ii, 0.0) for ii, aa in instance.var_cons[j] if ii != i])
        best = min(best, slack / a)
    return max(best, 0.0)
