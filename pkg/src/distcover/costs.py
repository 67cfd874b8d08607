"""Locally computable cost functions.

A cost is separable: ``c(x) = sum_j f_j(x_j)`` with each ``f_j`` strictly
increasing.  The covering step only needs two primitives per variable, the
cost increase of a raise and the largest raise affordable within a budget.
"""

from __future__ import annotations

import math

__all__ = ["LinearCost", "PowerCost", "SeparableCost", "as_cost"]


class LinearCost:
    """``c(x) = sum_j c_j x_j``."""

    def __init__(self, costs):
        self.costs = tuple(float(c) for c in costs)

    def increase(self, j, old, new):
        return self.costs[j] * (new - old)

    def raise_by(self, j, old, beta):
        return old + beta / self.costs[j]

    def total(self, x):
        return math.fsum(c * v for c, v in zip(self.costs, x))

    def __repr__(self):
        return f"LinearCost(n={len(self.costs)})"


class PowerCost:
    """One-variable cost ``scale * x ** power`` on ``x >= 0``."""

    def __init__(self, scale=1.0, power=1.0):
        if scale <= 0 or power <= 0:
            raise ValueError("scale and power must be positive")
        self.scale = float(scale)
        self.power = float(power)

    def value(self, x):
        return self.scale * x**self.power

    def inverse(self, v):
        return (max(v, 0.0) / self.scale) ** (1.0 / self.power)


class SeparableCost:
    """Sum of per-variable increasing costs, each exposing ``value``/``inverse``."""

    def __init__(self, components):
        self.components = tuple(components)

    def increase(self, j, old, new):
        f = self.components[j]
        return f.value(new) - f.value(old)

    def raise_by(self, j, old, beta):
        f = self.components[j]
        new = f.inverse(f.value(old) + beta)
        # the inverse may round below the start point for tiny budgets
        return max(new, old)

    def total(self, x):
        return math.fsum(f.value(v) for f, v in zip(self.components, x))

    def __repr__(self):
        return f"SeparableCost(n={len(self.components)})"


def as_cost(cost, instance):
    """Default to the instance's linear costs when ``cost`` is None."""
    return LinearCost(instance.costs) if cost is None else cost
