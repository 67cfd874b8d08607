from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from distcover.instances import gen_cmip, gen_wvc
from distcover.oracles import locality_check
from distcover.protocols import SubmodularCoverProtocol, WVCProtocol
from distcover.simulator import (
    BudgetExceededError,
    MessageError,
    Network,
    Protocol,
    RngStream,
    ScriptedRng,
    enumerate_choices,
    message_bytes,
    run,
)


class Idle(Protocol):
    def setup(self, network, seed):
        self.seen = {}

    def on_round(self, ctx, inbox):
        self.seen[(ctx.node, ctx.round)] = list(inbox)

    def is_done(self, round_):
        return True


class Relay(Protocol):
    """Node 0 sends a token down a path; each node forwards it once."""

    def setup(self, network, seed):
        self.arrived = {}

    def on_round(self, ctx, inbox):
        if ctx.round == 1 and ctx.node == 0:
            ctx.send(1, ("tok",))
        for sender, parts in inbox:
            self.arrived[ctx.node] = ctx.round
            if ctx.node + 1 < len(self.arrived) + 10 and ctx.node + 1 in ctx.neighbors:
                ctx.send(ctx.node + 1, parts[0])
        ctx.halt()


class Chatter(Protocol):
    def setup(self, network, seed):
        self.log = []

    def on_round(self, ctx, inbox):
        self.log.append((ctx.round, ctx.node, ctx.rng.random(), tuple(s for s, _ in inbox)))
        ctx.broadcast(("hi", ctx.node))
        if ctx.round >= 3:
            ctx.halt()

    def end_of_round(self, round_):
        return {"round": round_}

    def node_state(self, v):
        return [e for e in self.log if e[1] == v]


class Rogue(Protocol):
    def setup(self, network, seed):
        pass

    def on_round(self, ctx, inbox):
        ctx.send(2, "x")


def path(n):
    return Network(n, [(i, i + 1) for i in range(n - 1)])


def test_immediate_termination():
    res = run(Idle(), path(3), 0, 10)
    assert res.outcome.status == "terminated" and res.outcome.rounds == 1


def test_isolated_node_has_empty_inbox():
    proto = Chatter()
    run(proto, Network(1), 0, 3)
    assert all(e[3] == () for e in proto.log)


def test_broadcast_reaches_every_neighbor_next_round():
    proto = Chatter()
    run(proto, Network(4, [(0, 1), (0, 2), (0, 3)]), 0, 2)
    round2 = {e[1]: e[3] for e in proto.log if e[0] == 2}
    assert round2[0] == (1, 2, 3)
    assert all(round2[v] == (0,) for v in (1, 2, 3))


def test_relay_takes_one_round_per_hop():
    proto = Relay()
    run(proto, path(6), 0, 20)
    assert proto.arrived == {k: k + 1 for k in range(1, 6)}


def test_message_to_non_neighbor_aborts():
    with pytest.raises(MessageError):
        run(Rogue(), path(3), 0, 2)


def test_timeout_is_an_outcome():
    class Forever(Protocol):
        def setup(self, network, seed):
            pass

        def on_round(self, ctx, inbox):
            ctx.wake()

    res = run(Forever(), path(2), 0, 5)
    assert res.outcome.status == "timeout" and res.outcome.rounds == 5


def test_quiescence_terminates():
    class Sleepy(Protocol):
        def setup(self, network, seed):
            pass

        def on_round(self, ctx, inbox):
            ctx.halt()

    assert run(Sleepy(), path(4), 0, 50).outcome == ("terminated", 1)


def test_alarm_wakes_sleeping_node():
    class Alarm(Protocol):
        def setup(self, network, seed):
            self.rounds = []

        def on_round(self, ctx, inbox):
            self.rounds.append(ctx.round)
            if ctx.round == 1:
                ctx.sleep_until(4)
            else:
                ctx.halt()

    proto = Alarm()
    run(proto, Network(1), 0, 10)
    assert proto.rounds == [1, 4]


def test_max_rounds_validated():
    with pytest.raises(ValueError):
        run(Idle(), path(2), 0, 0)


@given(st.integers(0, 10**9))
def test_same_seed_same_trace(seed):
    a, b = Chatter(), Chatter()
    ra = run(a, path(5), seed, 4)
    rb = run(b, path(5), seed, 4)
    assert a.log == b.log
    assert ra.trace.to_jsonl() == rb.trace.to_jsonl()


def test_trace_counts_messages():
    res = run(Chatter(), path(3), 1, 3)
    assert [r["msgs"] for r in res.trace] == [4, 4, 4]
    assert all(r["max_msg_bytes"] == message_bytes([["hi", 0]]) for r in res.trace)


def test_rng_stream_is_keyed():
    a = RngStream(7, 3, 2)
    b = RngStream(7, 3, 2)
    assert [a.random() for _ in range(5)] == [b.random() for _ in range(5)]
    assert RngStream(7, 3, 2).random() != RngStream(7, 4, 2).random()
    assert RngStream(7, 3, 2).random() != RngStream(7, 3, 3).random()
    r = RngStream(1, 1, 1)
    assert all(0 <= r.randrange(5) < 5 for _ in range(50))
    with pytest.raises(ValueError):
        r.randrange(0)


def test_enumerate_choices_sums_to_one():
    def once(rng):
        a = rng.coin()
        b = rng.randrange(3) if a else 0
        return (a, b)

    dist = {}
    for out, p in enumerate_choices(once):
        dist[out] = dist.get(out, 0) + p
    assert sum(dist.values()) == 1
    assert dist[(False, 0)] == Fraction(1, 2)
    assert dist[(True, 2)] == Fraction(1, 6)


def test_enumeration_budget():
    def once(rng):
        for _ in range(30):
            rng.coin()

    with pytest.raises(BudgetExceededError):
        list(enumerate_choices(once, max_bits=24))


def test_scripted_rng_refuses_continuous_draws():
    with pytest.raises(TypeError):
        ScriptedRng().random()


@pytest.mark.parametrize("rounds", [1, 2, 3, 5])
def test_wvc_locality(rounds):
    inst = gen_wvc(40, 0.1, seed=rounds)
    for node in (0, 7, 19):
        full, ball = locality_check(WVCProtocol, inst, Network.of_variables, node, rounds, seed=11)
        assert full == ball


@pytest.mark.parametrize("rounds", [2, 4, 6])
def test_submodular_locality(rounds):
    inst = gen_cmip(30, 30, 3, seed=rounds)
    make = lambda i: SubmodularCoverProtocol(i, k=2)  # noqa: E731
    for node in (0, 13):
        full, ball = locality_check(make, inst, Network.of_constraints, node, rounds, seed=5)
        assert full == ball
