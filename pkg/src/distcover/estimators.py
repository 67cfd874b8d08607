"""Estimator-style front ends: configure with parameters, then ``fit(instance)``.

Every estimator accepts a :class:`CoveringInstance` (or the packing view of
one) and exposes its results as fitted attributes with a trailing
underscore.  There is nothing to predict or transform; a fitted estimator is
a solved instance.
"""

from __future__ import annotations

import math

from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .cover import round_assignment, sequential_cover
from .instances import PackingInstance
from .poset import build_poset, random_linear_extension, sequential_pack, verify_ratio
from .protocols import CMIP2Protocol, SubmodularCoverProtocol, WVCProtocol
from .simulator import Network, run

__all__ = [
    "DistributedCMIP2",
    "DistributedPacking2",
    "DistributedPackingGeneral",
    "DistributedSubmodularCover",
    "DistributedWeightedVertexCover",
    "FractionalPacking",
    "SequentialCover",
    "default_max_rounds",
]


def default_max_rounds(m):
    """Round budget ``200 * (1 + ceil(ln max(2, m))**2)``."""
    return 200 * (1 + math.ceil(math.log(max(2, m))) ** 2)


def _covering(instance):
    return instance.covering if isinstance(instance, PackingInstance) else instance


class _Solved(BaseEstimator):
    def _finish(self, inst, x_raw, y=None):
        self.instance_ = inst
        self.x_raw_ = list(x_raw)
        self.x_ = round_assignment(x_raw, inst)
        self.y_ = None if y is None else list(y)
        self.report_ = verify_ratio(inst, self.x_, self.y_, rho=self._rho(inst), strict=False)
        self.cost_ = self.report_.cx
        self.value_ = self.report_.wy
        self.ratio_ = self.report_.ratio

    def _rho(self, inst):
        return inst.rho

    def check_fitted(self):
        if not hasattr(self, "x_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet; call fit(instance)")
        return self


class SequentialCover(_Solved):
    """Centralized stepping in a chosen constraint order.

    Parameters
    ----------
    order : "input", "random" or a sequence of constraint indices
    seed : seed for ``order="random"``
    rule : stepsize rule, ``"phi"`` (general), ``"wvc"`` or ``"fractional"``
    cost : optional separable cost replacing the instance's linear costs
    """

    def __init__(self, order="input", seed=None, rule="phi", cost=None):
        self.order = order
        self.seed = seed
        self.rule = rule
        self.cost = cost

    def fit(self, instance):
        inst = _covering(instance)
        res = sequential_cover(inst, order=self.order, seed=self.seed, rule=self.rule, cost=self.cost)
        self.step_log_ = res.log
        self.rounds_ = len(res.log)
        self._finish(inst, res.x_raw)
        return self


class FractionalPacking(_Solved):
    """Sequential covering followed by the reverse-order dual packing pass.

    ``extension_seed=None`` processes steps in time order; an integer draws a
    random linear extension of the step poset instead (the result is the
    same).
    """

    def __init__(self, order="input", seed=None, extension_seed=None):
        self.order = order
        self.seed = seed
        self.extension_seed = extension_seed

    def fit(self, instance):
        inst = _covering(instance)
        if not inst.is_fractional:
            raise ValueError("FractionalPacking needs a fractional instance (no integers, no bounds)")
        res = sequential_cover(inst, order=self.order, seed=self.seed, rule="fractional")
        poset = build_poset(res.log, inst)
        ext = None if self.extension_seed is None else random_linear_extension(poset, self.extension_seed)
        sol = sequential_pack(inst, poset, ext)
        self.step_log_ = res.log
        self.poset_ = poset
        self.rounds_ = len(res.log)
        self._finish(inst, res.x_raw, sol.y)
        return self


class _Distributed(_Solved):
    """Shared fit loop: build the protocol and network, run, collect."""

    def _protocol(self, inst):
        raise NotImplementedError

    def _network(self, inst):
        return Network.of_variables(inst)

    def _budget(self, inst, proto):
        # the budget counts the protocol's own rounds
        rounds = default_max_rounds(inst.n_cons) if self.max_rounds is None else self.max_rounds
        per = getattr(proto, "comm_per_round", 1)
        return rounds * per

    def fit(self, instance):
        inst = _covering(instance)
        proto = self._protocol(inst)
        res = run(proto, self._network(inst), self.seed, self._budget(inst, proto))
        self.protocol_ = proto
        self.outcome_ = res.outcome
        self.trace_ = res.trace
        self.rounds_ = res.outcome.rounds
        self.comm_rounds_ = res.comm_rounds
        self.step_log_ = proto.log
        self._finish(inst, proto.x, self._dual(proto))
        return self

    def _dual(self, proto):
        return None


class DistributedWeightedVertexCover(_Distributed):
    """Randomized star protocol for weighted vertex cover.

    ``y_`` is the step dual: each edge's packing value is the size of the
    one step taken on it.
    """

    def __init__(self, seed=0, max_rounds=None):
        self.seed = seed
        self.max_rounds = max_rounds

    def _protocol(self, inst):
        return WVCProtocol(inst)

    def _dual(self, proto):
        return proto.y


class DistributedCMIP2(_Distributed):
    """Randomized star protocol for covering rows with at most two variables."""

    def __init__(self, seed=0, max_rounds=None):
        self.seed = seed
        self.max_rounds = max_rounds

    def _protocol(self, inst):
        return CMIP2Protocol(inst)

    def _rho(self, inst):
        return 2


class DistributedPacking2(_Distributed):
    """Star protocol with the dual packing computed alongside (``rho <= 2``)."""

    def __init__(self, seed=0, max_rounds=None):
        self.seed = seed
        self.max_rounds = max_rounds

    def _protocol(self, inst):
        return CMIP2Protocol(inst, pack=True)

    def _rho(self, inst):
        return 2

    def _dual(self, proto):
        self.set_round_ = list(proto.set_round)
        self.cover_round_ = proto.cover_round
        return proto.y


class DistributedSubmodularCover(_Distributed):
    """Clustered covering for rows of any width on the constraint network.

    ``k=None`` doubles the cluster radius on a fixed schedule; an integer
    pins it.  ``cost`` is an optional separable cost.
    """

    def __init__(self, seed=0, max_rounds=None, k=None, cost=None):
        self.seed = seed
        self.max_rounds = max_rounds
        self.k = k
        self.cost = cost

    def _protocol(self, inst):
        return SubmodularCoverProtocol(inst, cost=self.cost, k=self.k)

    def _network(self, inst):
        return Network.of_constraints(inst)


class DistributedPackingGeneral(DistributedSubmodularCover):
    """Clustered covering plus the dual packing, any ``rho`` (fractional instances)."""

    def __init__(self, seed=0, max_rounds=None, k=None):
        self.seed = seed
        self.max_rounds = max_rounds
        self.k = k

    def _protocol(self, inst):
        return SubmodularCoverProtocol(inst, k=self.k, pack=True)

    def _dual(self, proto):
        self.set_round_ = list(proto.set_phase)
        self.cover_round_ = proto.cover_phase
        return proto.y
