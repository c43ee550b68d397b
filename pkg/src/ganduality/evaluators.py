"""Uniform evaluator objects bundling a divergence with its conjugate.

Every evaluator exposes ``value(P, Q)`` and ``conjugate(P, D)``; the
optional ``value_weights_batch`` vectorizes over many weight vectors on a
fixed support, which the exhaustive-search oracles rely on.
"""

from __future__ import annotations

import numpy as np

from .distributions import FiniteDistribution, Witness
from .fdiv import FGenerator, f_divergence, f_divergence_batch, fdiv_conjugate
from .transport import CostFunction, ot_conjugate, ot_primal, ot_values_batch


class FDivergence:
    """f-divergence evaluator for a fixed generator."""

    def __init__(self, gen: FGenerator):
        self.gen = gen
        self.name = f"d_{gen.name}"

    def value(self, P: FiniteDistribution, Q: FiniteDistribution) -> float:
        return f_divergence(P, Q, self.gen)

    def conjugate(self, P: FiniteDistribution, D: Witness) -> float:
        return fdiv_conjugate(P, D, self.gen)

    def value_weights_batch(self, P: FiniteDistribution, support, Qs: np.ndarray) -> np.ndarray:
        return f_divergence_batch(P.weights_on(support), Qs, self.gen)


class OTDivergence:
    """Optimal transport cost evaluator for a fixed cost function."""

    def __init__(self, cost: CostFunction):
        self.cost = cost
        self.name = f"ot_{cost.kind}"

    def value(self, P: FiniteDistribution, Q: FiniteDistribution) -> float:
        return ot_primal(P, Q, self.cost).value

    def conjugate(self, P: FiniteDistribution, D: Witness) -> float:
        return ot_conjugate(P, D, self.cost)

    def value_weights_batch(self, P: FiniteDistribution, support, Qs: np.ndarray) -> np.ndarray:
        if P.size <= 4 and len(support) <= 4:
            return ot_values_batch(P, support, self.cost, Qs)
        out = np.empty(len(Qs))
        for i, q in enumerate(Qs):
            Q = FiniteDistribution.from_weighted_points(support, q)
            out[i] = self.value(P, Q)
        return out
