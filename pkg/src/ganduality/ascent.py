"""Monotone backtracking ascent shared by the dual and identity-check solvers."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import DomainError


def backtracking_ascent(
    value_and_grad: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0: np.ndarray,
    project: Callable[[np.ndarray], np.ndarray] | None = None,
    max_iter: int = 2000,
    init_step: float = 1.0,
    min_step: float = 1e-14,
) -> tuple[np.ndarray, float]:
    """Maximize by gradient steps, halving the step until the value improves.

    ``value_and_grad`` may return ``-inf`` to mark an infeasible trial point,
    which rejects the step. ``project`` restores feasibility after each move;
    acceptance is decided purely by the (projected) value, so the iteration
    is monotone and terminates at the first stalled step.
    """
    x = project(x0) if project is not None else np.asarray(x0, dtype=float)
    val, grad = value_and_grad(x)
    if not np.isfinite(val):
        raise DomainError("ascent started from an infeasible point")
    step = init_step
    for _ in range(max_iter):
        accepted = False
        while step >= min_step:
            trial = x + step * grad
            if project is not None:
                trial = project(trial)
            tval, tgrad = value_and_grad(trial)
            if tval > val:
                x, val, grad = trial, tval, tgrad
                step = min(step * 1.5, 1e6)
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
    return x, val
