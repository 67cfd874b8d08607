"""Deterministic round-synchronous message-passing engine.

Each communication round every live node reads the inbox delivered by the
previous round, computes, and posts messages that arrive one round later.
Nodes run in id order and all sends are buffered until the round barrier,
so the result equals any parallel schedule.  Randomness is a counter-based
stream keyed on ``(seed, node, round)``.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections import defaultdict
from fractions import Fraction
from typing import NamedTuple

__all__ = [
    "BudgetExceededError",
    "MessageError",
    "Network",
    "NodeContext",
    "Outcome",
    "Protocol",
    "RngStream",
    "RunResult",
    "ScriptedRng",
    "Trace",
    "enumerate_choices",
    "run",
]

_TWO53 = 2.0**-53


class RngStream:
    """Independent pseudorandom stream for one node in one round.

    Draws are ``blake2b(seed, node, round, counter)`` truncated to 64 bits,
    so the stream does not depend on how many draws other nodes make.
    """

    __slots__ = ("_key", "_n")

    def __init__(self, seed, node, round_):
        self._key = f"{seed}/{node}/{round_}/".encode()
        self._n = 0

    def _bits(self):
        h = hashlib.blake2b(self._key + str(self._n).encode(), digest_size=8).digest()
        self._n += 1
        return int.from_bytes(h, "little")

    def random(self):
        return (self._bits() >> 11) * _TWO53

    def randrange(self, n):
        if n <= 0:
            raise ValueError("randrange requires n >= 1")
        return self._bits() % n if n & (n - 1) == 0 else min(int(self.random() * n), n - 1)

    def coin(self):
        return self.randrange(2) == 1

    def choice(self, seq):
        return seq[self.randrange(len(seq))]


class BudgetExceededError(RuntimeError):
    pass


class ScriptedRng:
    """Replays a fixed prefix of discrete choices, then always picks 0.

    Every draw is recorded as ``(value, n_options)`` so that an enumerator can
    branch on it.  Continuous draws are not enumerable and raise.
    """

    def __init__(self, prefix=()):
        self.prefix = list(prefix)
        self.record = []

    def randrange(self, n):
        k = len(self.record)
        v = self.prefix[k] if k < len(self.prefix) else 0
        if v >= n:
            raise ValueError("scripted choice out of range")
        self.record.append((v, n))
        return v

    def coin(self):
        return self.randrange(2) == 1

    def choice(self, seq):
        return seq[self.randrange(len(seq))]

    def random(self):
        raise TypeError("continuous draws cannot be enumerated")

    def probability(self):
        p = Fraction(1)
        for _, n in self.record:
            p /= n
        return p

    def bits(self):
        return sum(math.log2(n) for _, n in self.record)


def enumerate_choices(run_once, max_bits=24):
    """Run ``run_once(rng)`` over every sequence of discrete choices.

    ``run_once`` receives a :class:`ScriptedRng` shared by all nodes and
    rounds and returns an outcome.  Yields ``(outcome, probability)`` pairs
    whose probabilities sum to one.
    """
    stack = [()]
    while stack:
        prefix = stack.pop()
        rng = ScriptedRng(prefix)
        outcome = run_once(rng)
        if rng.bits() > max_bits + 1e-9:
            raise BudgetExceededError(f"run consumed {rng.bits():.1f} random bits (limit {max_bits})")
        rec = rng.record
        for k in range(len(rec) - 1, len(prefix) - 1, -1):
            for alt in range(rec[k][1] - 1, 0, -1):
                stack.append(tuple(v for v, _ in rec[:k]) + (alt,))
        yield outcome, rng.probability()


class MessageError(RuntimeError):
    """A node addressed a message to a non-neighbor."""


class Network:
    """Undirected graph on nodes ``0..n-1`` with sorted adjacency tuples."""

    def __init__(self, n_nodes, edges=()):
        adj = [set() for _ in range(n_nodes)]
        for a, b in edges:
            if a == b:
                continue
            adj[a].add(b)
            adj[b].add(a)
        self.n_nodes = n_nodes
        self.adj = tuple(tuple(sorted(s)) for s in adj)
        self._adjset = tuple(frozenset(s) for s in adj)

    @classmethod
    def of_variables(cls, instance):
        """Nodes are covering variables; two are adjacent when they share a constraint."""
        edges = []
        for row in instance.cons_vars:
            js = [j for j, _ in row]
            edges.extend((a, b) for k, a in enumerate(js) for b in js[k + 1 :])
        return cls(instance.n_vars, edges)

    @classmethod
    def of_constraints(cls, instance):
        """Nodes are covering constraints; two are adjacent when they share a variable."""
        edges = []
        for col in instance.var_cons:
            ids = [i for i, _ in col]
            edges.extend((a, b) for k, a in enumerate(ids) for b in ids[k + 1 :])
        return cls(instance.n_cons, edges)

    def is_edge(self, a, b):
        return b in self._adjset[a]

    def ball(self, node, radius):
        """Nodes within ``radius`` hops of ``node``."""
        seen = {node}
        frontier = [node]
        for _ in range(radius):
            nxt = []
            for v in frontier:
                for w in self.adj[v]:
                    if w not in seen:
                        seen.add(w)
                        nxt.append(w)
            frontier = nxt
        return seen

    def distances(self, source, limit=None):
        dist = {source: 0}
        frontier = [source]
        d = 0
        while frontier and (limit is None or d < limit):
            d += 1
            nxt = []
            for v in frontier:
                for w in self.adj[v]:
                    if w not in dist:
                        dist[w] = d
                        nxt.append(w)
            frontier = nxt
        return dist


def _default(o):
    if isinstance(o, (set, frozenset)):
        return sorted(o)
    if o == math.inf:
        return "inf"
    raise TypeError(f"cannot size message of type {type(o).__name__}")


def message_bytes(payload):
    return len(json.dumps(payload, separators=(",", ":"), default=_default))


class NodeContext:
    """Per-node, per-round handle passed to the protocol handler.

    Everything a node posts during one round is bundled into a single
    message per neighbor: broadcast parts first, then parts addressed to
    that neighbor, each in posting order.
    """

    __slots__ = ("node", "round", "neighbors", "_sim", "_rng", "_bcast", "_direct")

    def __init__(self, sim, node, round_):
        self._sim = sim
        self.node = node
        self.round = round_
        self.neighbors = sim.network.adj[node]
        self._rng = None
        self._bcast = []
        self._direct = {}

    @property
    def rng(self):
        if self._rng is None:
            self._rng = self._sim.rng_factory(self._sim.seed, self.node, self.round)
        return self._rng

    def send(self, to, payload):
        if not self._sim.network.is_edge(self.node, to):
            raise MessageError(f"node {self.node} sent to non-neighbor {to}")
        self._direct.setdefault(to, []).append(payload)

    def broadcast(self, payload):
        self._bcast.append(payload)

    def halt(self):
        """Stop being scheduled until a message arrives."""
        self._sim.awake.discard(self.node)

    def wake(self):
        self._sim.awake.add(self.node)

    def sleep_until(self, round_):
        """Halt, and be scheduled again at ``round_`` even without mail."""
        self._sim.awake.discard(self.node)
        self._sim.alarms[round_].add(self.node)


class Protocol:
    """Base class for protocols run by :func:`run`.

    Subclasses implement :meth:`setup`, :meth:`on_round` and usually
    :meth:`end_of_round` (returns a trace row dict or ``None``) and
    :meth:`is_done` (global termination observer).
    """

    def setup(self, network, seed):
        raise NotImplementedError

    def on_round(self, ctx, inbox):
        raise NotImplementedError

    def end_of_round(self, round_):
        return None

    def is_done(self, round_):
        return False

    def node_state(self, node):
        raise NotImplementedError

    def reported_rounds(self, comm_rounds):
        return comm_rounds


class Outcome(NamedTuple):
    status: str
    rounds: int

    @property
    def terminated(self):
        return self.status == "terminated"


class Trace(list):
    def to_jsonl(self):
        return "".join(json.dumps(row, separators=(",", ":")) + "\n" for row in self)


class RunResult(NamedTuple):
    outcome: Outcome
    trace: Trace
    comm_rounds: int


class _Engine:
    def __init__(self, network, seed, rng_factory):
        self.network = network
        self.seed = seed
        self.rng_factory = rng_factory
        self.awake = set(range(network.n_nodes))
        self.alarms = defaultdict(set)
        self.next_inbox = defaultdict(list)
        self.msgs = 0
        self.max_bytes = 0

    def flush(self, ctx):
        if not ctx._bcast and not ctx._direct:
            return
        sender = ctx.node
        bcast = tuple(ctx._bcast)
        base = message_bytes(bcast) if bcast else 0
        targets = ctx.neighbors if bcast else sorted(ctx._direct)
        for t in targets:
            extra = ctx._direct.get(t)
            if extra:
                parts = bcast + tuple(extra)
                size = base + message_bytes(extra)
            else:
                parts = bcast
                size = base
            if size > self.max_bytes:
                self.max_bytes = size
            self.msgs += 1
            self.next_inbox[t].append((sender, parts))


def run(protocol, network, seed, max_rounds, rng_factory=RngStream, stop_on_done=True):
    """Execute ``protocol`` until its observer reports completion, quiescence, or timeout.

    Returns a :class:`RunResult`; the outcome's ``rounds`` are in the
    protocol's reporting unit (see :meth:`Protocol.reported_rounds`).
    """
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    eng = _Engine(network, seed, rng_factory)
    protocol.setup(network, seed)
    trace = Trace()
    inbox = {}
    for r in range(1, max_rounds + 1):
        due = eng.alarms.pop(r, ())
        active = sorted(eng.awake.union(inbox, due))
        for v in active:
            ctx = NodeContext(eng, v, r)
            protocol.on_round(ctx, inbox.get(v, ()))
            eng.flush(ctx)
        inbox = eng.next_inbox
        eng.next_inbox = defaultdict(list)
        row = protocol.end_of_round(r)
        if row is not None:
            row["msgs"] = eng.msgs
            row["max_msg_bytes"] = eng.max_bytes
            row["comm_round"] = r
            eng.msgs = 0
            eng.max_bytes = 0
            trace.append(row)
        quiet = not eng.awake and not inbox and not eng.alarms
        if (stop_on_done and protocol.is_done(r)) or quiet:
            return RunResult(Outcome("terminated", protocol.reported_rounds(r)), trace, r)
    return RunResult(Outcome("timeout", protocol.reported_rounds(max_rounds)), trace, max_rounds)
