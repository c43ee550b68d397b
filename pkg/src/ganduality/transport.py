"""Exact optimal transport on finite supports and the machinery around it.

The primal problem is the transportation linear program over couplings with
fixed marginals. It is solved by a dense transportation simplex with
deterministic pivoting (lowest-index entering cell, lowest-index leaving
cell among ties), so identical inputs always produce identical plans. The
dual potentials produced by the final basis certify optimality: the dual
objective is recomputed independently through the c-transform and compared
against the primal value.

Cost matrices are always rebuilt from atom coordinates at call time.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .distributions import (
    Coupling,
    FiniteDistribution,
    Witness,
    aligned_weights,
    as_points,
    expectation,
    MERGE_TOL,
)
from .errors import ConvergenceError, DomainError, InvariantViolation

DUALITY_RTOL = 1e-6


@dataclass(frozen=True)
class CostFunction:
    """Pairwise transport cost, one of four kinds.

    ``norm`` and ``norm_squared`` are the Euclidean distance and its square,
    ``indicator`` charges ``scale`` for moving between distinct atoms, and
    ``custom`` wraps an arbitrary pairwise function.
    """

    kind: str
    scale: float = 1.0
    pairwise: Callable[[np.ndarray, np.ndarray], float] | None = None

    def matrix(self, X, Y) -> np.ndarray:
        X, Y = as_points(X), as_points(Y)
        if self.kind in ("norm", "norm_squared", "indicator"):
            diff = X[:, None, :] - Y[None, :, :]
            dist = np.sqrt(np.sum(diff * diff, axis=2))
            if self.kind == "norm":
                return self.scale * dist
            if self.kind == "norm_squared":
                return self.scale * dist * dist
            return self.scale * (dist > MERGE_TOL).astype(float)
        if self.kind == "custom":
            out = np.empty((len(X), len(Y)))
            for i, x in enumerate(X):
                for j, y in enumerate(Y):
                    out[i, j] = self.pairwise(x, y)
            if np.any(out < 0):
                raise DomainError("custom cost produced a negative value")
            return out
        raise DomainError(f"unknown cost kind {self.kind!r}")

    def __call__(self, x, y) -> float:
        xa = np.atleast_1d(np.asarray(x, dtype=float))[None, :]
        ya = np.atleast_1d(np.asarray(y, dtype=float))[None, :]
        return float(self.matrix(xa, ya)[0, 0])


def cost_norm(scale: float = 1.0) -> CostFunction:
    return CostFunction("norm", scale)


def cost_norm_squared(scale: float = 1.0) -> CostFunction:
    return CostFunction("norm_squared", scale)


def cost_indicator(mass: float = 1.0) -> CostFunction:
    if mass <= 0:
        raise DomainError("indicator cost needs a positive charge")
    return CostFunction("indicator", mass)


def cost_custom(pairwise: Callable[[np.ndarray, np.ndarray], float]) -> CostFunction:
    return CostFunction("custom", 1.0, pairwise)


def transport_simplex(
    p: np.ndarray, q: np.ndarray, C: np.ndarray, max_pivots: int | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Solve the transportation LP exactly; returns (plan, row duals, col duals).

    Northwest-corner start, then simplex pivots on the basis tree. Entering
    cell: first violating reduced cost in row-major order. Leaving cell:
    first minimum-mass cell on the alternating cycle.
    """
    n, m = len(p), len(q)
    if C.shape != (n, m):
        raise DomainError("cost matrix shape does not match the marginals")
    tol = 1e-11 * (1.0 + float(np.max(np.abs(C))))
    M = np.zeros((n, m))
    basis: list[tuple[int, int]] = []
    a, b = p.astype(float).copy(), q.astype(float).copy()
    i = j = 0
    while True:
        amt = min(a[i], b[j])
        M[i, j] = amt
        basis.append((i, j))
        a[i] -= amt
        b[j] -= amt
        if i == n - 1 and j == m - 1:
            break
        if j == m - 1:
            i += 1
        elif i == n - 1:
            j += 1
        elif a[i] <= b[j]:
            i += 1
        else:
            j += 1

    def potentials(cells: list[tuple[int, int]]) -> tuple[np.ndarray, np.ndarray]:
        alpha = np.full(n, np.nan)
        beta = np.full(m, np.nan)
        rows_adj: list[list[tuple[int, float]]] = [[] for _ in range(n)]
        cols_adj: list[list[tuple[int, float]]] = [[] for _ in range(m)]
        for (ci, cj) in cells:
            rows_adj[ci].append((cj, C[ci, cj]))
            cols_adj[cj].append((ci, C[ci, cj]))
        alpha[0] = 0.0
        stack = [(True, 0)]
        while stack:
            is_row, k = stack.pop()
            if is_row:
                for (cj, cost) in rows_adj[k]:
                    if np.isnan(beta[cj]):
                        beta[cj] = cost - alpha[k]
                        stack.append((False, cj))
            else:
                for (ci, cost) in cols_adj[k]:
                    if np.isnan(alpha[ci]):
                        alpha[ci] = cost - beta[k]
                        stack.append((True, ci))
        if np.any(np.isnan(alpha)) or np.any(np.isnan(beta)):
            raise InvariantViolation("basis does not span the bipartite node set")
        return alpha, beta

    def tree_path(cells: list[tuple[int, int]], ei: int, ej: int) -> list[tuple[int, int]]:
        # nodes: rows 0..n-1, cols n..n+m-1; edges are the basic cells
        adj: dict[int, list[tuple[int, tuple[int, int]]]] = {}
        for (ci, cj) in cells:
            adj.setdefault(ci, []).append((n + cj, (ci, cj)))
            adj.setdefault(n + cj, []).append((ci, (ci, cj)))
        start, goal = ei, n + ej
        parent: dict[int, tuple[int, tuple[int, int]]] = {start: (-1, (-1, -1))}
        queue = [start]
        while queue:
            node = queue.pop(0)
            if node == goal:
                break
            for (nxt, cell) in adj.get(node, []):
                if nxt not in parent:
                    parent[nxt] = (node, cell)
                    queue.append(nxt)
        if goal not in parent:
            raise InvariantViolation("entering cell closes no cycle; basis corrupt")
        path = []
        node = goal
        while node != start:
            prev, cell = parent[node]
            path.append(cell)
            node = prev
        path.reverse()
        return path

    alpha, beta = potentials(basis)
    budget = max_pivots if max_pivots is not None else 50 * n * m + 1000
    for _ in range(budget):
        reduced = C - alpha[:, None] - beta[None, :]
        flat = int(np.argmax((reduced < -tol).ravel()))
        if not reduced.ravel()[flat] < -tol:
            M = np.maximum(M, 0.0)
            return M, alpha, beta
        ei, ej = divmod(flat, m)
        cycle = [(ei, ej)] + tree_path(basis, ei, ej)
        minus = cycle[1::2]
        theta = min(M[c] for c in minus)
        leaving = next(c for c in minus if M[c] <= theta)
        for k, cell in enumerate(cycle):
            M[cell] += theta if k % 2 == 0 else -theta
            if M[cell] < 0:
                M[cell] = 0.0
        basis.remove(leaving)
        basis.append((ei, ej))
        alpha, beta = potentials(basis)
    raise ConvergenceError("transportation simplex exceeded its pivot budget")


@dataclass(frozen=True)
class OTResult:
    """Primal value, optimal plan, and the dual certificate."""

    value: float
    plan: Coupling
    dual_value: float
    dual_potential: Witness
    col_potential: np.ndarray

    def __post_init__(self):
        if abs(self.value - self.dual_value) > DUALITY_RTOL * (1.0 + abs(self.value)):
            raise InvariantViolation(
                f"duality gap {self.value - self.dual_value!r} exceeds the certificate tolerance"
            )


def ot_primal(P: FiniteDistribution, Q: FiniteDistribution, c: CostFunction) -> OTResult:
    """Exact optimal transport cost with plan and dual certificate."""
    if P.size * Q.size > 10**6:
        raise DomainError("instance too large for the dense solver")
    C = c.matrix(P.points, Q.points)
    M, alpha, beta = transport_simplex(P.weights, Q.weights, C)
    value = float(np.sum(M * C))
    plan = Coupling(P.points, Q.points, M, P.weights)
    potential = Witness(alpha, P.points)
    dual_value = kantorovich_value(potential, P, Q, c)
    return OTResult(value, plan, dual_value, potential, beta)


def wasserstein(P: FiniteDistribution, Q: FiniteDistribution, order: int) -> float:
    """Wasserstein distance: transport value for the norm cost raised to 1/order."""
    if order == 1:
        return ot_primal(P, Q, cost_norm()).value
    if order == 2:
        return float(np.sqrt(max(ot_primal(P, Q, cost_norm_squared()).value, 0.0)))
    raise DomainError("only orders 1 and 2 are supported")


def c_transform(D: Witness, c: CostFunction, to_support) -> Witness:
    """sup over the witness's support of ``D(x') - c(x, x')`` at each target atom."""
    S = as_points(to_support)
    C = c.matrix(S, D.support)
    return Witness(np.max(D.values[None, :] - C, axis=1), S)


def c_concave_restore(D: Witness, c: CostFunction, support=None) -> Witness:
    """Double c-transform on a support: the pointwise-smallest c-concave majorant.

    Never decreases any value of ``D`` and leaves its c-transform unchanged,
    so it restores feasibility in c-concave maximizations without hurting the
    objective. For the norm cost this is the 1-Lipschitz upper envelope.
    """
    S = D.support if support is None else as_points(support)
    E = c_transform(D, c, S)
    C = c.matrix(S, S)
    return Witness(np.min(E.values[:, None] + C, axis=0), S)


def kantorovich_value(D: Witness, P: FiniteDistribution, Q: FiniteDistribution, c: CostFunction) -> float:
    """Dual objective E_P[D] - E_Q[D^c]; never exceeds the primal value."""
    Dc = c_transform(D, c, Q.points)
    return expectation(P, D) - expectation(Q, Dc)


def ot_conjugate(P: FiniteDistribution, D: Witness, c: CostFunction) -> float:
    """Divergence conjugate of the transport cost: E_P of the c-transform of D."""
    Dc = c_transform(D, c, P.points)
    return expectation(P, Dc)


def optimal_potential(result: OTResult, c: CostFunction, support) -> Witness:
    """Exact Kantorovich witness on ``support`` built from the column potential.

    For a symmetric cost, ``min_j c(x, y_j) - beta_j`` dominates the row
    potential on the source atoms and c-transforms back onto the column
    potential, so it attains the primal value in the dual objective.
    """
    S = as_points(support)
    C = c.matrix(S, result.plan.col_support)
    return Witness(np.min(C - result.col_potential[None, :], axis=1), S)


def tv_distance(P: FiniteDistribution, Q: FiniteDistribution) -> float:
    """Total variation distance, half the L1 gap on the merged support."""
    _, p, q = aligned_weights(P, Q)
    return 0.5 * float(np.sum(np.abs(p - q)))


def mcshane_regularize(D: Witness, L: float, support=None) -> Witness:
    """Largest L-Lipschitz minorant ``min_y D(y) + L |x - y|`` on the support.

    Evaluating on a larger support extends ``D`` instead; a witness that is
    already L-Lipschitz is a fixed point.
    """
    if L <= 0:
        raise DomainError("Lipschitz constant must be positive")
    S = D.support if support is None else as_points(support)
    dist = cost_norm().matrix(S, D.support)
    return Witness(np.min(D.values[None, :] + L * dist, axis=1), S)


def lipschitz_constant(D: Witness) -> float:
    """Largest difference quotient over distinct support pairs."""
    dist = cost_norm().matrix(D.support, D.support)
    gaps = np.abs(D.values[:, None] - D.values[None, :])
    mask = dist > MERGE_TOL
    if not np.any(mask):
        return 0.0
    return float(np.max(gaps[mask] / dist[mask]))


def _spanning_tree_potentials(C: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Feasible dual vertices of the gauged transportation dual polytope.

    Enumerates the spanning trees of the complete bipartite basis graph,
    solves the tight equations of each (row 0 gauged to zero), and keeps the
    feasible solutions. The maximum of ``p @ alpha + q @ beta`` over these
    points equals the transport value for any marginals, by LP duality.
    """
    n, m = C.shape
    edges = list(itertools.product(range(n), range(m)))
    alphas, betas = [], []
    for subset in itertools.combinations(range(len(edges)), n + m - 1):
        parent = list(range(n + m))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        acyclic = True
        for e in subset:
            i, j = edges[e]
            ri, rj = find(i), find(n + j)
            if ri == rj:
                acyclic = False
                break
            parent[ri] = rj
        if not acyclic:
            continue
        alpha = np.full(n, np.nan)
        beta = np.full(m, np.nan)
        alpha[0] = 0.0
        cells = [edges[e] for e in subset]
        for _ in range(n + m):
            for (i, j) in cells:
                if np.isnan(beta[j]) and not np.isnan(alpha[i]):
                    beta[j] = C[i, j] - alpha[i]
                if np.isnan(alpha[i]) and not np.isnan(beta[j]):
                    alpha[i] = C[i, j] - beta[j]
        if np.all(alpha[:, None] + beta[None, :] <= C + 1e-9):
            alphas.append(alpha)
            betas.append(beta)
    return np.asarray(alphas), np.asarray(betas)


def ot_values_batch(
    P: FiniteDistribution, col_support, c: CostFunction, Qs: np.ndarray
) -> np.ndarray:
    """Exact transport values from P to every weight row of ``Qs``.

    Only for tiny supports (at most 4 atoms on each side); used by the
    exhaustive-search oracles where per-point LP solves would be wasteful.
    """
    S = as_points(col_support)
    if P.size > 4 or len(S) > 4:
        raise DomainError("batch transport evaluation is limited to 4-atom supports")
    C = c.matrix(P.points, S)
    alphas, betas = _spanning_tree_potentials(C)
    base = alphas @ P.weights
    return np.max(base[None, :] + Qs @ betas.T, axis=1)
