"""Covering with arbitrary rows and a locally computable cost, via clustering phases.

Nodes are covering constraints; two are adjacent when they share a variable.
Each phase with radius ``k`` takes ``3k + 1`` communication rounds:

* ``q = 0``: unsatisfied nodes draw a radius and start flooding offers;
* ``q = k``: nodes pick a leader; interior nodes send their row and current
  variable values to it along the offer's reverse path;
* ``q = 2k``: each leader steps its gathered rows until all hold and sends
  the new values back down the same paths;
* nodes whose values changed tell their neighbors, in time for the next
  phase.

With ``pack=True`` (fractional instances) a stepped node that has no final
``y`` yet sends its neighborhood status to the leader that stepped it every
phase; leaders replay their past components in decreasing step order and
raise ``y`` for every row whose later neighbors are already final.  Rows
that were never stepped set ``y = 0`` themselves once their neighborhood is
satisfied.
"""

from __future__ import annotations

import math

from ..costs import LinearCost
from ..cover import StepRecord, is_satisfied, step, stepsize_cmip, stepsize_fractional
from .base import CoveringProtocol, pack_value
from .linial_saks import C_LS, LSState, PhaseSchedule, draw_radius, geometric_parameter


class LocalityError(AssertionError):
    """A cost function's total disagrees with the per-variable increases leaders used."""


class _Node:
    __slots__ = (
        "vals",
        "sat",
        "t",
        "done",
        "y",
        "nbr",
        "ls",
        "routes",
        "home",
        "gathered",
        "reports",
        "kids",
        "history",
        "packed",
        "changed",
        "phase",
    )

    def __init__(self, vals, sat):
        self.vals = vals
        self.sat = sat
        self.t = None
        self.done = False
        self.y = 0.0
        self.nbr = {}  # neighbor -> (sat, t, done, y)
        self.ls = None
        self.routes = {}  # phase -> {leader: parent}
        self.home = None  # (phase, leader) of the component this row was stepped in
        self.gathered = {}
        self.reports = {}
        self.kids = {}
        self.history = []  # leader side: (key, rows in decreasing step order)
        self.packed = set()
        self.changed = True
        self.phase = -1


class SubmodularCoverProtocol(CoveringProtocol):
    """Clustered covering for any row width; optional dual packing.

    ``k=None`` uses the doubling schedule; an integer fixes the radius.
    ``cost`` is a separable cost (defaults to the instance's linear costs).
    """

    def __init__(self, instance, cost=None, k=None, pack=False, c_ls=C_LS, d=1):
        if pack and not instance.is_fractional:
            raise ValueError("packing requires a fractional instance (no integers, no bounds)")
        if pack and cost is not None and not isinstance(cost, LinearCost):
            raise ValueError("packing is defined for linear costs only")
        super().__init__(instance)
        self.cost = cost
        self.k = k
        self.pack = pack
        self.c_ls = c_ls
        self.d = d

    def setup(self, network, seed):
        super().setup(network, seed)
        inst = self.instance
        self.schedule = PhaseSchedule(self.k, self.c_ls, self.d)
        self.nodes = []
        for view in inst.constraints():
            vals = {j: 0.0 for j in view.vars}
            self.nodes.append(_Node(vals, is_satisfied(vals, view)))
        self.y = [0.0] * inst.n_cons
        self.done = [False] * inst.n_cons
        self.n_done = 0
        self.set_phase = [None] * inst.n_cons
        self.phases = 0
        self.cover_phase = None
        self.finish_round = None
        self.spent = 0.0
        self.total_before = self._total()

    def _total(self):
        return (self.cost or LinearCost(self.instance.costs)).total(self.x)

    def reported_rounds(self, comm_rounds):
        return comm_rounds

    # ----------------------------------------------------------------- rounds
    def on_round(self, ctx, inbox):
        v = ctx.node
        node = self.nodes[v]
        phase, q, k = self.schedule.locate(ctx.round)
        if node.phase != phase:
            node.phase = phase
            node.kids = {}
            node.gathered = {}
            node.reports = {}
            node.ls = None
        for sender, parts in inbox:
            for part in parts:
                self._absorb(ctx, node, v, sender, part, phase)
        if q == 0 and not node.sat:
            node.ls = LSState(v, draw_radius(ctx.rng, k, geometric_parameter(self.instance.n_cons, k)))
        if node.ls is not None and q < k:
            out = node.ls.outgoing()
            if out:
                ctx.broadcast(("o", out))
        if q == k:
            self._contact_leaders(ctx, node, v, phase)
        if q == 2 * k:
            self._lead(ctx, node, v, phase)
        if self.pack:
            self._pack_idle(node, v, phase)
        if node.changed:
            node.changed = False
            ctx.broadcast(("v", node.vals, node.sat, node.t, node.done, node.y))
        self._schedule_wakeup(ctx, node, phase, q, k)

    def _schedule_wakeup(self, ctx, node, phase, q, k):
        if not node.sat:
            ctx.wake()
            return
        ctx.halt()
        if self.pack and node.t is not None and not node.done:
            # report to the former leader in the next gather window
            start = ctx.round - q
            nxt = start + 3 * k + 1
            _, _, k_next = self.schedule.locate(nxt)
            ctx.sleep_until(nxt + k_next if q >= k else start + k)
        if (node.gathered or node.reports) and q < 2 * k:
            ctx.sleep_until(ctx.round - q + 2 * k)

    def _absorb(self, ctx, node, v, sender, part, phase):
        kind = part[0]
        if kind == "v":
            _, vals, sat, t, done, y = part
            for j, xj in vals.items():
                if j in node.vals and xj > node.vals[j]:
                    node.vals[j] = xj
                    node.changed = True
            node.nbr[sender] = (sat, None if t is None else tuple(t), done, y)
            self._refresh_sat(node, v)
        elif kind == "o":
            if node.ls is not None:
                node.ls.absorb(sender, part[1])
        elif kind == "g":
            _, ldr, i, vals = part
            node.kids.setdefault(("c", ldr), set()).add(sender)
            if ldr == v:
                node.gathered[i] = vals
            else:
                ctx.send(node.ls.parent[ldr], part)
        elif kind == "r":
            _, key, i, table = part
            key = tuple(key)
            node.kids.setdefault(("r",) + key, set()).add(sender)
            if key[1] == v:
                node.reports.setdefault(key, {})[i] = table
            else:
                ctx.send(node.routes[key[0]][key[1]], part)
        elif kind == "b":
            _, ldr, vals, times = part
            self._apply_values(node, v, vals, times, phase, ldr)
            for kid in sorted(node.kids.get(("c", ldr), ())):
                ctx.send(kid, part)
        elif kind == "d":
            _, key, ys = part
            key = tuple(key)
            if v in ys:
                self._mark_done(node, v, ys[v])
            for kid in sorted(node.kids.get(("r",) + key, ())):
                ctx.send(kid, part)

    def _refresh_sat(self, node, v):
        if not node.sat and is_satisfied(node.vals, self.instance.constraint(v)):
            node.sat = True
            node.changed = True

    def _apply_values(self, node, v, vals, times, phase, ldr):
        for j, xj in vals.items():
            if j in node.vals and xj > node.vals[j]:
                node.vals[j] = xj
                node.changed = True
        if v in times and node.t is None:
            node.t = tuple(times[v])
            node.home = (phase, ldr)
            node.changed = True
        self._refresh_sat(node, v)

    def _mark_done(self, node, v, y):
        if not node.done:
            node.done = True
            node.y = y
            node.changed = True

    def _contact_leaders(self, ctx, node, v, phase):
        if node.ls is not None:
            ldr, inside = node.ls.decide()
            node.routes[phase] = dict(node.ls.parent)
            if inside:
                if ldr == v:
                    node.gathered[v] = dict(node.vals)
                else:
                    ctx.send(node.ls.parent[ldr], ("g", ldr, v, dict(node.vals)))
        if self.pack and node.t is not None and not node.done:
            table = (node.sat, {i: list(e) for i, e in node.nbr.items()})
            key = node.home
            if key[1] == v:
                node.reports.setdefault(key, {})[v] = table
            else:
                ctx.send(node.routes[key[0]][key[1]], ("r", key, v, table))

    # ---------------------------------------------------------------- leader
    def _lead(self, ctx, node, v, phase):
        if node.gathered:
            self._cover_cluster(ctx, node, v, phase)
        if self.pack and node.history:
            self._pack_components(ctx, node, v)

    def _cover_cluster(self, ctx, node, v, phase):
        inst = self.instance
        xs = {}
        for vals in node.gathered.values():
            for j, xj in vals.items():
                xs[j] = max(xs.get(j, 0.0), xj)
        rows = sorted(node.gathered)
        ts = 0
        times = {}
        cost = self.cost
        while True:
            unmet = [i for i in rows if not is_satisfied(xs, inst.constraint(i))]
            if not unmet:
                break
            view = inst.constraint(unmet[0])
            before = dict((j, xs[j]) for j in view.vars)
            beta = stepsize_cmip(xs, view, cost)
            if inst.is_fractional and cost is None:
                ref = stepsize_fractional(xs, view)
                if not math.isclose(beta, ref, rel_tol=1e-12, abs_tol=1e-15):
                    raise AssertionError(f"row {view.index}: step {beta} differs from closed form {ref}")
            step(xs, view, beta, cost)
            ts += 1
            times[view.index] = (phase + 1, ts)
            self.record(StepRecord(view.index, beta, (phase + 1, ts)))
            for j in view.vars:
                if cost is None:
                    self.spent += inst.costs[j] * (xs[j] - before[j])
                else:
                    self.spent += cost.increase(j, before[j], xs[j])
                self.publish(j, xs[j])
        if times:
            order = sorted(((i, t) for i, t in times.items()), key=lambda it: it[1], reverse=True)
            node.history.append(((phase, v), order))
        part = ("b", v, xs, times)
        if v in node.gathered:
            self._apply_values(node, v, xs, times, phase, v)
        for kid in sorted(node.kids.get(("c", v), ())):
            ctx.send(kid, part)

    def _pack_components(self, ctx, node, v):
        inst = self.instance
        for key, order in node.history:
            reports = node.reports.get(key, {})
            ys = {}
            for i, ti in order:
                if i in node.packed:
                    continue
                rep = reports.get(i)
                if rep is None:
                    break
                sat, nbrs = rep
                if not sat or not all(e[0] for e in nbrs.values()):
                    break
                blocked = False
                for e in nbrs.values():
                    te = None if e[1] is None else tuple(e[1])
                    if te is not None and te > ti and not e[2]:
                        blocked = True
                        break
                if blocked:
                    break
                done_y = {int(k): e[3] for k, e in nbrs.items() if e[2]}
                cols = {j: done_y for j, _ in inst.cons_vars[i]}
                value = pack_value(inst, i, cols)
                node.packed.add(i)
                ys[i] = value
                self._set_y(i, value)
            if ys:
                if key[1] == v and v in ys:
                    self._mark_done(node, v, ys[v])
                for kid in sorted(node.kids.get(("r",) + key, ())):
                    ctx.send(kid, ("d", key, ys))

    def _pack_idle(self, node, v, phase):
        if node.done or node.t is not None or not node.sat:
            return
        if all(e[0] for e in node.nbr.values()) and len(node.nbr) == len(self.network.adj[v]):
            self._mark_done(node, v, 0.0)
            self._set_y(v, 0.0)

    def _set_y(self, i, value):
        if self.done[i]:
            raise AssertionError(f"y[{i}] set twice")
        self.y[i] = value
        self.done[i] = True
        self.n_done += 1
        self.set_phase[i] = self.phases + 1
        for j, _ in self.instance.cons_vars[i]:
            load = math.fsum(a * self.y[k] for k, a in self.instance.var_cons[j])
            if load > self.instance.costs[j] * (1 + 1e-9):
                raise AssertionError(f"packing constraint {j} exceeded after setting y[{i}]")

    # --------------------------------------------------------------- observer
    def _finished(self):
        if self.pack:
            return self.n_done == self.instance.n_cons
        return not self.counter.unsat

    def end_of_round(self, round_):
        if not self.schedule.is_phase_end(round_):
            if not self._finished() or self.finish_round is not None:
                return None
        self.phases += 1
        total = self._total()
        if not math.isclose(total - self.total_before, self.spent, rel_tol=1e-9, abs_tol=1e-9):
            raise LocalityError(
                f"cost grew by {total - self.total_before} but leaders accounted for {self.spent}"
            )
        self.total_before, self.spent = total, 0.0
        row = self.counter.row(self.phases)
        if self.cover_phase is None and row["satisfied"] == self.instance.n_cons:
            self.cover_phase = self.phases
        if self.pack:
            row["packed"] = self.n_done
        if self.finish_round is None and self._finished():
            self.finish_round = round_
        return row

    def is_done(self, round_):
        return self.finish_round is not None

    def node_state(self, v):
        node = self.nodes[v]
        return (tuple(sorted(node.vals.items())), node.sat, node.t, node.done, node.y)
