"""The f-divergence family, its convex conjugates, and divergence conjugates.

A generator is a convex lower semicontinuous ``f`` with ``f(1) = 0``. The
divergence it induces between finite distributions P and Q is

    d_f(P, Q) = sum_i p_i f(q_i / p_i)

with the perspective-limit conventions ``p > 0, q = 0 -> p * f(0+)`` and
``p = 0, q > 0 -> q * lim f(t)/t``. Note the argument order: the ratio is
second-over-first, so for the KL generator ``d(P, Q)`` equals the relative
entropy of Q with respect to P evaluated as ``sum q log(q/p)``.

The divergence conjugate over P maps a discriminator D to

    sup_Q  E_Q[D] - d_f(P, Q),

computed in closed form from the convex conjugate ``f*`` once the additive
shift making ``E_P[f*'(D + shift)] = 1`` is known (first-order condition of
the inner maximization). All logs are natural; only ``js_divergence``
converts to bits at its surface so the unit-interval bound holds.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .distributions import FiniteDistribution, Witness, aligned_weights
from .errors import ConvergenceError, DomainError, InfeasibleError

LN2 = float(np.log(2.0))


@dataclass(frozen=True)
class FGenerator:
    """Convex generator with the pieces needed for divergences and conjugates.

    ``conjugate`` is only finite on the open interval (-inf, conj_hi); the
    upper endpoint always equals ``slope_at_infinity``. ``f_at_zero`` is the
    limit of f at 0 from the right (may be +inf).
    """

    name: str
    f: Callable[[np.ndarray], np.ndarray]
    f_deriv: Callable[[np.ndarray], np.ndarray]
    conjugate: Callable[[np.ndarray], np.ndarray]
    conjugate_deriv: Callable[[np.ndarray], np.ndarray]
    conj_hi: float
    f_at_zero: float
    slope_at_infinity: float
    symmetric: bool
    conjugate_inverse: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if abs(float(self.f(np.array([1.0]))[0])) > 1e-12:
            raise DomainError(f"generator {self.name}: f(1) must be 0")

    def in_domain(self, u: np.ndarray, margin: float = 0.0) -> bool:
        return bool(np.all(np.asarray(u) < self.conj_hi - margin))


def _kl() -> FGenerator:
    return FGenerator(
        name="kl",
        f=lambda t: t * np.log(t),
        f_deriv=lambda t: np.log(t) + 1.0,
        conjugate=lambda u: np.exp(u - 1.0),
        conjugate_deriv=lambda u: np.exp(u - 1.0),
        conj_hi=np.inf,
        f_at_zero=0.0,
        slope_at_infinity=np.inf,
        symmetric=False,
    )


def _js() -> FGenerator:
    # f(t) = (t/2) log t - ((t+1)/2) log((t+1)/2); conjugate -log(2 - e^{2u})/2
    return FGenerator(
        name="js",
        f=lambda t: 0.5 * t * np.log(t) - 0.5 * (t + 1.0) * np.log(0.5 * (t + 1.0)),
        f_deriv=lambda t: 0.5 * np.log(2.0 * t / (t + 1.0)),
        conjugate=lambda u: -0.5 * np.log(2.0 - np.exp(2.0 * np.asarray(u, dtype=float))),
        conjugate_deriv=lambda u: np.exp(2.0 * u) / (2.0 - np.exp(2.0 * u)),
        conj_hi=0.5 * LN2,
        f_at_zero=0.5 * LN2,
        slope_at_infinity=0.5 * LN2,
        symmetric=True,
        conjugate_inverse=lambda v: 0.5 * np.log(2.0 - np.exp(-2.0 * np.asarray(v, dtype=float))),
    )


def _sqhellinger() -> FGenerator:
    # f(t) = (sqrt(t) - 1)^2; conjugate u/(1-u) on u < 1
    return FGenerator(
        name="sqhellinger",
        f=lambda t: (np.sqrt(t) - 1.0) ** 2,
        f_deriv=lambda t: 1.0 - 1.0 / np.sqrt(t),
        conjugate=lambda u: u / (1.0 - u),
        conjugate_deriv=lambda u: 1.0 / (1.0 - u) ** 2,
        conj_hi=1.0,
        f_at_zero=1.0,
        slope_at_infinity=1.0,
        symmetric=True,
        conjugate_inverse=lambda v: v / (1.0 + v),
    )


def _kl_reversed() -> FGenerator:
    # t * f_kl(1/t) = -log t: swaps the argument order of the KL generator
    return FGenerator(
        name="kl-reversed",
        f=lambda t: -np.log(t),
        f_deriv=lambda t: -1.0 / t,
        conjugate=lambda u: -1.0 - np.log(-u),
        conjugate_deriv=lambda u: -1.0 / u,
        conj_hi=0.0,
        f_at_zero=np.inf,
        slope_at_infinity=0.0,
        symmetric=False,
    )


GENERATORS: dict[str, FGenerator] = {
    "kl": _kl(),
    "js": _js(),
    "sqhellinger": _sqhellinger(),
}


def get_generator(name: str) -> FGenerator:
    try:
        return GENERATORS[name]
    except KeyError:
        raise DomainError(f"unknown generator {name!r}; known: {sorted(GENERATORS)}") from None


def reverse_generator(gen: FGenerator) -> FGenerator:
    """Generator g with d_g(P, Q) = d_f(Q, P): the map t -> t f(1/t)."""
    if gen.symmetric:
        return gen
    if gen.name == "kl":
        return _kl_reversed()
    if gen.name == "kl-reversed":
        return _kl()
    raise DomainError(f"no reversed form available for generator {gen.name!r}")


def f_divergence_weights(p: np.ndarray, q: np.ndarray, gen: FGenerator) -> float:
    """Divergence between aligned weight vectors (zeros allowed in both)."""
    total = 0.0
    both = (p > 0) & (q > 0)
    if np.any(both):
        total += float(np.sum(p[both] * gen.f(q[both] / p[both])))
    p_only = (p > 0) & (q == 0)
    if np.any(p_only):
        total += float(np.sum(p[p_only]) * gen.f_at_zero)
    q_only = (p == 0) & (q > 0)
    if np.any(q_only):
        total += float(np.sum(q[q_only]) * gen.slope_at_infinity)
    return total


def f_divergence_batch(p: np.ndarray, Qs: np.ndarray, gen: FGenerator) -> np.ndarray:
    """Divergence of each row of ``Qs`` from the fixed weight vector ``p``."""
    pos = p > 0
    pp = p[pos]
    Qp = Qs[:, pos]
    fvals = np.full_like(Qp, gen.f_at_zero)
    mask = Qp > 0
    ratio = np.divide(Qp, pp[None, :], out=np.ones_like(Qp), where=mask)
    fvals[mask] = gen.f(ratio[mask])
    out = fvals @ pp
    if np.any(~pos):
        q_extra = Qs[:, ~pos].sum(axis=1)
        out = out + np.where(q_extra > 0, q_extra * gen.slope_at_infinity, 0.0)
    return out


def f_divergence_batch_first(Qs: np.ndarray, p: np.ndarray, gen: FGenerator) -> np.ndarray:
    """Divergence of each row of ``Qs`` as the first argument against fixed ``p``."""
    pos = p > 0
    out = np.zeros(len(Qs))
    if np.any(pos):
        A = Qs[:, pos]
        pp = p[pos]
        mask = A > 0
        ratio = np.divide(pp[None, :], A, out=np.ones_like(A), where=mask)
        vals = np.empty_like(A)
        vals[mask] = A[mask] * gen.f(ratio[mask])
        vals[~mask] = np.broadcast_to(pp, A.shape)[~mask] * gen.slope_at_infinity
        out += vals.sum(axis=1)
    if np.any(~pos):
        q_extra = Qs[:, ~pos].sum(axis=1)
        out = out + np.where(q_extra > 0, q_extra * gen.f_at_zero, 0.0)
    return out


def f_divergence(P: FiniteDistribution, Q: FiniteDistribution, gen: FGenerator) -> float:
    """d_f(P, Q) on the merged support of the two distributions."""
    _, p, q = aligned_weights(P, Q)
    return f_divergence_weights(p, q, gen)


def js_divergence(P: FiniteDistribution, Q: FiniteDistribution) -> float:
    """Jensen-Shannon divergence in bits, so the value lies in [0, 1].

    Computed from the two relative entropies against the mid-distribution;
    the generator-based route ``f_divergence(P, Q, js) / log 2`` must agree.
    """
    _, p, q = aligned_weights(P, Q)
    m = 0.5 * (p + q)

    def rel_entropy(a: np.ndarray) -> float:
        pos = a > 0
        return float(np.sum(a[pos] * np.log(a[pos] / m[pos])))

    return 0.5 * (rel_entropy(p) + rel_entropy(q)) / LN2


def _shift_mean(p: np.ndarray, d: np.ndarray, gen: FGenerator, lam: float) -> float:
    """E_p[f*'(d + lam)], +inf when the argument leaves the conjugate domain."""
    u = d + lam
    if not gen.in_domain(u):
        return np.inf
    with np.errstate(over="ignore"):
        vals = gen.conjugate_deriv(u)
    return float(np.sum(p * vals))


def conjugate_shift_weights(
    p: np.ndarray, d: np.ndarray, gen: FGenerator, tol: float = 1e-10
) -> float:
    """Root ``lam`` of E_p[f*'(d + lam)] = 1 by bracketed bisection.

    The mean is nondecreasing in ``lam`` because f*' is nondecreasing, so a
    sign-changing bracket pins the root. Raises InfeasibleError when no
    bracket exists inside the conjugate domain (f* effectively bounded).
    """
    pos = p > 0
    p, d = p[pos], d[pos]
    edge = gen.conj_hi - float(np.max(d))

    def g(lam: float) -> float:
        return _shift_mean(p, d, gen, lam) - 1.0

    def mean_strictly_inside(lam: float) -> float | None:
        u = d + lam
        if not np.all(u < gen.conj_hi):
            return None
        with np.errstate(over="ignore"):
            return float(np.sum(p * gen.conjugate_deriv(u)))

    lo = min(0.0, edge - 1.0)
    step = 1.0
    for _ in range(200):
        if g(lo) < 0.0:
            break
        lo -= step
        step *= 2.0
    else:
        raise InfeasibleError("no shift with mean below one inside the conjugate domain")

    if np.isfinite(edge):
        hi = None
        gap = edge - lo
        for k in range(1, 200):
            cand = edge - gap * 0.5**k
            mean = mean_strictly_inside(cand)
            if mean is None:
                break
            if mean > 1.0:
                hi = cand
                break
        if hi is None:
            raise InfeasibleError("conjugate derivative stays at or below one up to the domain edge")
    else:
        hi = max(0.0, lo)
        step = 1.0
        for _ in range(200):
            if g(hi) > 0.0:
                break
            hi += step
            step *= 2.0
        else:
            raise InfeasibleError("conjugate derivative stays below one; no finite shift")

    for _ in range(500):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if abs(gm) <= tol:
            return mid
        if gm > 0.0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-17 * max(1.0, abs(hi)):
            break
    mid = 0.5 * (lo + hi)
    if abs(g(mid)) <= 10 * tol:
        return mid
    raise ConvergenceError("bisection failed to meet the shift residual tolerance")


def conjugate_shift(P: FiniteDistribution, D: Witness, gen: FGenerator, tol: float = 1e-10) -> float:
    """Additive normalization of the divergence conjugate at witness ``D``."""
    d = D.values_on(P.points)
    return conjugate_shift_weights(P.weights, d, gen, tol)


def fdiv_conjugate_weights(
    p: np.ndarray, d: np.ndarray, gen: FGenerator, shift_cap: float | None = None
) -> float:
    """sup over weight vectors q of ``q . d - d_f(p, q)`` on the shared support.

    Zero entries of ``p`` are allowed: they constrain the shift from above
    (mass placed there is priced at the slope of f at infinity) but do not
    enter the expectation. ``shift_cap`` tightens that constraint further.
    """
    cap = gen.conj_hi - float(np.max(d)) - 1e-12
    if shift_cap is not None:
        cap = min(cap, shift_cap)
    lam = conjugate_shift_weights(p, d, gen)
    lam = min(lam, cap)
    pos = p > 0
    with np.errstate(over="ignore"):
        vals = gen.conjugate(d[pos] + lam)
    return float(np.sum(p[pos] * vals) - lam)


def fdiv_conjugate(P: FiniteDistribution, D: Witness, gen: FGenerator) -> float:
    """Divergence conjugate of d_f over P at witness D (same support as P)."""
    d = D.values_on(P.points)
    lam = conjugate_shift_weights(P.weights, d, gen)
    with np.errstate(over="ignore"):
        vals = gen.conjugate(d + lam)
    return float(np.sum(P.weights * vals) - lam)


def conjugate_numeric(gen: FGenerator, u: float, tol: float = 1e-14) -> float:
    """f*(u) by direct 1-D maximization of ``u t - f(t)``; validates closed forms.

    The maximizer solves f'(t) = u with f' nondecreasing, so it is found by
    bisection on the derivative.
    """
    if u >= gen.slope_at_infinity:
        return np.inf

    def fp(t: float) -> float:
        return float(gen.f_deriv(np.array([t]))[0])

    lo, hi = 1e-300, 1.0
    for _ in range(400):
        if fp(hi) > u:
            break
        hi *= 2.0
    for _ in range(600):
        mid = 0.5 * (lo + hi)
        if fp(mid) > u:
            hi = mid
        else:
            lo = mid
        if hi - lo <= tol * max(1.0, hi):
            break
    t = 0.5 * (lo + hi)
    return u * t - float(gen.f(np.array([t]))[0])


def simplex_grid(n: int, resolution: int) -> np.ndarray:
    """All weight vectors of length ``n`` with entries that are multiples of 1/resolution."""
    if n == 1:
        return np.ones((1, 1))
    dividers = np.array(
        list(itertools.combinations(range(resolution + n - 1), n - 1)), dtype=int
    )
    padded = np.hstack(
        [
            np.full((len(dividers), 1), -1),
            dividers,
            np.full((len(dividers), 1), resolution + n - 1),
        ]
    )
    counts = np.diff(padded, axis=1) - 1
    return counts / float(resolution)


def brute_force_conjugate(
    P: FiniteDistribution, D: Witness, div, grid_resolution: int
) -> float:
    """Divergence conjugate by exhaustive search over a simplex grid.

    ``div`` is any evaluator exposing ``value(P, Q)`` (and optionally a
    vectorized ``value_weights_batch``). The search runs over candidate
    distributions on the witness's support, so it lower-bounds the true
    conjugate and converges to it as the resolution grows.
    """
    support = D.support
    if len(support) > 4:
        raise DomainError("brute force refuses supports larger than 4 atoms")
    Qs = simplex_grid(len(support), grid_resolution)
    gains = Qs @ D.values
    batch = getattr(div, "value_weights_batch", None)
    if batch is not None:
        costs = batch(P, support, Qs)
    else:
        costs = np.empty(len(Qs))
        for i, q in enumerate(Qs):
            Q = FiniteDistribution.from_weighted_points(support, q)
            costs[i] = div.value(P, Q)
    return float(np.max(gains - costs))
