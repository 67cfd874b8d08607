"""Randomized star protocol for weighted vertex cover (2-approximation).

Nodes are graph vertices.  Each algorithm round takes three communication
rounds:

0. absorb the root's update, broadcast ``(x_v, role)`` (a covered node
   broadcasts its final value and finishes);
1. learn the neighbors' values; finish if every incident edge is covered,
   otherwise a leaf picks one random active edge as its star edge;
2. a root flips a coin and steps its star edges (heads) or only the last
   edge heads would step (tails), then tells each stepped leaf its new value.
"""

from __future__ import annotations

from ..cover import StepRecord, step, stepsize_wvc, tol_floor
from .base import CoveringProtocol

SUBROUNDS = 3


def _covered(v):
    return tol_floor(v) >= 1


class _Node:
    __slots__ = ("x", "nbr_x", "edges", "finished", "role")

    def __init__(self):
        self.x = 0.0
        self.nbr_x = {}
        self.edges = []
        self.finished = False
        self.role = None


class WVCProtocol(CoveringProtocol):
    """Weighted vertex cover on an instance whose rows are ``x_u + x_w >= 1``."""

    comm_per_round = SUBROUNDS

    def __init__(self, instance):
        for view in instance.constraints():
            if view.arity != 2 or view.coefs != (1.0, 1.0) or view.demand != 1.0:
                raise ValueError(f"constraint {view.index} is not a vertex-cover edge")
        super().__init__(instance)

    def setup(self, network, seed):
        super().setup(network, seed)
        self.nodes = [_Node() for _ in range(self.instance.n_vars)]
        for view in self.instance.constraints():
            a, b = view.vars
            self.nodes[a].edges.append((view.index, b))
            self.nodes[b].edges.append((view.index, a))
        self.n_finished = 0
        self.y = [0.0] * self.instance.n_cons
        self.finish_round = [None] * self.instance.n_vars

    def reported_rounds(self, comm_rounds):
        return -(-comm_rounds // SUBROUNDS)

    def _finish(self, ctx, node):
        node.finished = True
        self.n_finished += 1
        self.finish_round[ctx.node] = self.reported_rounds(ctx.round)
        ctx.halt()

    def on_round(self, ctx, inbox):
        node = self.nodes[ctx.node]
        if node.finished:
            ctx.halt()
            return
        q = (ctx.round - 1) % SUBROUNDS
        if q == 0:
            self._announce(ctx, node, inbox)
        elif q == 1:
            self._choose_star(ctx, node, inbox)
        else:
            self._root(ctx, node, inbox)

    def _announce(self, ctx, node, inbox):
        for _, parts in inbox:
            for part in parts:
                if part[0] == "u":
                    node.x = part[1]
        if _covered(node.x):
            ctx.broadcast(("x", node.x, None))
            self._finish(ctx, node)
            return
        node.role = "leaf" if ctx.rng.coin() else "root"
        ctx.broadcast(("x", node.x, node.role))

    def _choose_star(self, ctx, node, inbox):
        roles = {}
        for sender, parts in inbox:
            for part in parts:
                if part[0] == "x":
                    node.nbr_x[sender] = part[1]
                    roles[sender] = part[2]
        open_edges = [(i, w) for i, w in node.edges if not _covered(node.nbr_x.get(w, 0.0))]
        if not open_edges:
            self._finish(ctx, node)
            return
        if node.role != "leaf":
            return
        v = ctx.node
        active = []
        for i, w in open_edges:
            if roles.get(w) != "root":
                continue
            xs = {v: node.x, w: node.nbr_x.get(w, 0.0)}
            view = self.instance.constraint(i)
            step(xs, view, stepsize_wvc(xs, view))
            if _covered(xs[v]):
                active.append((i, w))
        if active:
            i, w = ctx.rng.choice(active)
            ctx.send(w, ("s", i))

    def _root(self, ctx, node, inbox):
        if node.role != "root":
            return
        stars = sorted((sender, part[1]) for sender, parts in inbox for part in parts if part[0] == "s")
        if not stars:
            return
        w = ctx.node
        heads = ctx.rng.coin()
        # simulate heads on a scratch copy
        xw = node.x
        plan = []
        for v, i in stars:
            if _covered(xw):
                break
            xs = {v: node.nbr_x[v], w: xw}
            step(xs, self.instance.constraint(i), stepsize_wvc(xs, self.instance.constraint(i)))
            xw = xs[w]
            plan.append((v, i))
        if not heads:
            plan = plan[-1:]
        rnd = self.reported_rounds(ctx.round)
        for ts, (v, i) in enumerate(plan, start=1):
            view = self.instance.constraint(i)
            xs = {v: node.nbr_x[v], w: node.x}
            beta = stepsize_wvc(xs, view)
            step(xs, view, beta)
            if xs[v] > 1 + 1e-9 or xs[w] > 1 + 1e-9:
                raise AssertionError(f"step on edge {i} raised a variable above 1")
            node.x = xs[w]
            node.nbr_x[v] = xs[v]
            self.y[i] += beta
            self.record(StepRecord(i, beta, (rnd, ts)))
            self.publish(v, xs[v])
            self.publish(w, xs[w])
            ctx.send(v, ("u", xs[v]))

    def end_of_round(self, round_):
        if round_ % SUBROUNDS == 0:
            return self.counter.row(round_ // SUBROUNDS)
        return None

    def is_done(self, round_):
        return self.n_finished == self.instance.n_vars

    def node_state(self, v):
        node = self.nodes[v]
        return (node.x, node.finished)
