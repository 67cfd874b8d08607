"""One phase of the Linial-Saks low-diameter decomposition, as message passing.

Every participating node draws a radius ``r`` with ``Pr[r >= i] = p**i``
(truncated at ``k``) and floods an offer ``k`` hops.  A node joins the
highest-id leader whose ball reaches it and is *interior* (in ``R``) when
its distance to that leader is strictly below the leader's radius.  Interior
nodes of different leaders are never adjacent.
"""

from __future__ import annotations

import bisect
import math
from typing import NamedTuple

from ..simulator import Protocol, run

# Empirical constant c in Pr[node in R] >= 1 / (c * n**(1/k)); see
# tests/test_linial_saks.py for the Monte-Carlo check that backs it.
C_LS = 4.0

__all__ = [
    "C_LS",
    "Decomposition",
    "LSState",
    "LinialSaksPhase",
    "draw_radius",
    "linial_saks_phase",
    "ls_membership",
    "phase_count",
    "PhaseSchedule",
]


def draw_radius(rng, k, p):
    r = 0
    while r < k and rng.random() < p:
        r += 1
    return r


def geometric_parameter(n, k):
    return max(n, 1) ** (-1.0 / k)


class LSState:
    """Offers a node has heard in the current phase and how to route back."""

    __slots__ = ("offers", "parent", "fresh", "leader", "in_r", "radius")

    def __init__(self, node, radius):
        self.radius = radius
        self.offers = {node: radius}
        self.parent = {}
        self.fresh = {node: radius} if radius >= 1 else {}
        self.leader = None
        self.in_r = False

    def outgoing(self):
        """Offers to forward this round (remaining radius after one more hop)."""
        out = {ldr: rem - 1 for ldr, rem in self.fresh.items() if rem >= 1}
        self.fresh = {}
        return out

    def absorb(self, sender, offers):
        for ldr, rem in offers.items():
            ldr = int(ldr)
            if rem > self.offers.get(ldr, -1):
                self.offers[ldr] = rem
                self.parent[ldr] = sender
                self.fresh[ldr] = rem

    def decide(self):
        self.leader = max(self.offers)
        self.in_r = self.offers[self.leader] >= 1
        return self.leader, self.in_r


class Decomposition(NamedTuple):
    k: int
    in_r: dict
    leader: dict
    radius: dict

    def clusters(self):
        out = {}
        for v, inside in self.in_r.items():
            if inside:
                out.setdefault(self.leader[v], []).append(v)
        return out


class LinialSaksPhase(Protocol):
    """Standalone decomposition phase over every node of the network."""

    def __init__(self, k, n=None):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = k
        self.n = n

    def setup(self, network, seed):
        self.network = network
        n = network.n_nodes if self.n is None else self.n
        self.p = geometric_parameter(n, self.k)
        self.state = [None] * network.n_nodes

    def on_round(self, ctx, inbox):
        q = ctx.round - 1
        v = ctx.node
        if q == 0:
            self.state[v] = LSState(v, draw_radius(ctx.rng, self.k, self.p))
        st = self.state[v]
        for sender, parts in inbox:
            for part in parts:
                st.absorb(sender, part[1])
        if q == self.k:
            st.decide()
            ctx.halt()
            return
        out = st.outgoing()
        if out:
            ctx.broadcast(("o", out))

    def is_done(self, round_):
        return round_ == self.k + 1

    def node_state(self, v):
        st = self.state[v]
        return (st.radius, tuple(sorted(st.offers.items())), st.leader, st.in_r)

    def result(self):
        return Decomposition(
            self.k,
            {v: s.in_r for v, s in enumerate(self.state)},
            {v: s.leader for v, s in enumerate(self.state)},
            {v: s.radius for v, s in enumerate(self.state)},
        )


def linial_saks_phase(network, k, seed, n=None):
    """Run one phase on ``network`` and return the :class:`Decomposition`."""
    proto = LinialSaksPhase(k, n)
    run(proto, network, seed, k + 1)
    return proto.result()


def ls_membership(network, k, seeds):
    """Per-node empirical frequency of landing in ``R`` over ``seeds``."""
    counts = [0] * network.n_nodes
    seeds = list(seeds)
    for s in seeds:
        dec = linial_saks_phase(network, k, s)
        for v, inside in dec.in_r.items():
            counts[v] += inside
    return [c / len(seeds) for c in counts]


def phase_count(k, c=C_LS, d=1):
    """Phases to run with radius ``k`` in the doubling schedule: ``ceil((d+1) c e k)``."""
    return math.ceil((d + 1) * c * math.e * k)


class PhaseSchedule:
    """Phase boundaries: fixed ``k``, or ``k = 1, 2, 4, ...`` with :func:`phase_count` phases each.

    A phase with radius ``k`` lasts ``3k + 1`` communication rounds.
    """

    def __init__(self, k=None, c=C_LS, d=1):
        if k is not None and k < 1:
            raise ValueError("k must be >= 1")
        self.fixed = k
        self.c = c
        self.d = d
        self.starts = []
        self.ks = []
        self._next = 1
        self._cur = 1 if k is None else k
        self._left = math.inf if k is not None else phase_count(1, c, d)

    def _extend(self):
        self.starts.append(self._next)
        self.ks.append(self._cur)
        self._next += 3 * self._cur + 1
        self._left -= 1
        if self._left == 0:
            self._cur *= 2
            self._left = phase_count(self._cur, self.c, self.d)

    def locate(self, round_):
        """``(phase_index, offset, k)`` for a communication round (1-based)."""
        while self._next <= round_:
            self._extend()
        idx = bisect.bisect_right(self.starts, round_) - 1
        return idx, round_ - self.starts[idx], self.ks[idx]

    def is_phase_end(self, round_):
        idx, q, k = self.locate(round_)
        return q == 3 * k

