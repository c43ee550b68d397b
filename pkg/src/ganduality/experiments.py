"""Desk-scale experiment drivers behind the command line.

Every driver returns plain records and leaves file emission to the caller,
so the same code paths serve both the CLI and the test suite. All outputs
are deterministic functions of their configuration, seeds included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import norm as _normal, spearmanr

from . import __version__
from .distributions import (
    FiniteDistribution,
    RandomSource,
    merge_supports,
    pushforward,
    shift_family,
)
from .duality import (
    AllFunctions,
    LinearSpan,
    LipschitzBall,
    check_lipschitz_fgan_identity,
    check_perturbed_fgan_identity,
    discriminator_max,
    penalized_divergence_min,
    polynomial_features,
)
from .errors import DomainError, GandualityError
from .evaluators import FDivergence, OTDivergence
from .fdiv import get_generator, js_divergence
from .hybrid import HybridSpec, hybrid_primal
from .neuralgan import MLPParams, TrainConfig, mixture_approx_error, train
from .transport import cost_indicator, cost_norm, cost_norm_squared, ot_primal, wasserstein

DIVERGENCE_KINDS = ("w1", "w2", "tv", "js", "kl", "sqhellinger",
                    "hyb-js-w1", "hyb-js-w2", "hyb-sh-w1", "hyb-sh-w2")


def output_header(command: str, seed) -> list[str]:
    return [f"# command: {command}", f"# seed: {seed}", f"# version: {__version__}"]


# datasets


def gaussian_grid_1d(mean: float, std: float, atoms: int = 64) -> FiniteDistribution:
    """Quantile-midpoint discretization of a normal distribution on the line."""
    qs = (np.arange(atoms) + 0.5) / atoms
    return FiniteDistribution.uniform(mean + std * _normal.ppf(qs))


def gaussian_grid(cov_diag: Sequence[float], per_axis: int = 8) -> FiniteDistribution:
    """Product quantile grid for a centered normal with diagonal covariance."""
    qs = (np.arange(per_axis) + 0.5) / per_axis
    axes = [np.sqrt(v) * _normal.ppf(qs) for v in cov_diag]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    return FiniteDistribution.uniform(pts)


def ring_mixture(seed: int, modes: int = 8, per_mode: int = 64, radius: float = 1.0,
                 std: float = 0.05) -> FiniteDistribution:
    """Two-dimensional ring of Gaussian modes, frozen into a finite sample."""
    rng = RandomSource(seed).stream(17)
    angles = 2.0 * np.pi * np.arange(modes) / modes
    centers = radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    pts = np.concatenate(
        [c + std * rng.normal(size=(per_mode, 2)) for c in centers], axis=0
    )
    return FiniteDistribution.uniform(pts)


# divergence evaluation for the CLI


def evaluate_divergence(kind: str, P: FiniteDistribution, Q: FiniteDistribution,
                        tol: float = 1e-6, candidate=None) -> dict:
    """Value of one named divergence; hybrid kinds also report their certificates."""
    from .transport import tv_distance

    if kind == "w1":
        res = ot_primal(P, Q, cost_norm())
        return {"value": res.value, "plan": res.plan}
    if kind == "w2":
        res = ot_primal(P, Q, cost_norm_squared())
        return {"value": math.sqrt(max(res.value, 0.0)), "plan": res.plan}
    if kind == "tv":
        res = ot_primal(P, Q, cost_indicator())
        return {"value": tv_distance(P, Q), "plan": res.plan}
    if kind in ("js", "kl", "sqhellinger"):
        if kind == "js":
            return {"value": js_divergence(P, Q)}
        from .fdiv import f_divergence

        return {"value": f_divergence(P, Q, get_generator(kind))}
    if kind.startswith("hyb-"):
        _, gen_tag, cost_tag = kind.split("-")
        gen = get_generator({"js": "js", "sh": "sqhellinger"}[gen_tag])
        cost = cost_norm() if cost_tag == "w1" else cost_norm_squared()
        spec = HybridSpec.for_pair(gen, cost, P, Q, extra_support=candidate)
        res = hybrid_primal(P, Q, spec, tol=tol)
        from .hybrid import hybrid_dual

        dual = hybrid_dual(P, Q, spec)
        return {
            "value": res.value,
            "fw_gap": res.fw_gap,
            "dual_lower_bound": max(res.dual_lower_bound, dual),
            "plan": res.plan,
        }
    raise DomainError(f"unknown divergence kind {kind!r}; known: {DIVERGENCE_KINDS}")


# continuity scan


@dataclass(frozen=True)
class ScanRow:
    theta: float
    js: float
    djsw1: float
    djsw2: float
    w1: float


def continuity_scan(theta_grid: Sequence[float], reference: FiniteDistribution,
                    noise: FiniteDistribution | None = None, tol: float = 1e-6) -> list[ScanRow]:
    """Divergences of a shifted family against a reference, cell by cell.

    The candidate support is the union over the whole grid, so neighboring
    cells are solved on identical discretizations. Failures in one cell are
    recorded as NaN and the scan continues.
    """
    noise = noise if noise is not None else FiniteDistribution.delta(np.zeros(reference.dim))
    family = shift_family(noise, float(min(theta_grid)) - 1.0, float(max(theta_grid)) + 1.0)
    models = [pushforward(family, np.full(reference.dim, th)) for th in theta_grid]
    candidate = merge_supports(*(m.points for m in models), reference.points)
    js_gen = get_generator("js")
    rows = []
    for th, model in zip(theta_grid, models):
        cells = {}
        for name, job in (
            ("js", lambda: js_divergence(model, reference)),
            ("djsw1", lambda: hybrid_primal(model, reference,
                                            HybridSpec(js_gen, cost_norm(), candidate), tol=tol).value),
            ("djsw2", lambda: hybrid_primal(model, reference,
                                            HybridSpec(js_gen, cost_norm_squared(), candidate), tol=tol).value),
            ("w1", lambda: wasserstein(model, reference, 1)),
        ):
            try:
                cells[name] = job()
            except GandualityError:
                cells[name] = float("nan")
        rows.append(ScanRow(float(th), cells["js"], cells["djsw1"], cells["djsw2"], cells["w1"]))
    return rows


# duality sweep


@dataclass(frozen=True)
class SweepRow:
    trial: int
    lhs: float
    rhs: float

    @property
    def gap(self) -> float:
        return abs(self.lhs - self.rhs)


def _random_instance(rng, n=4, dim=1):
    while True:
        pts = rng.uniform(-1.0, 1.0, size=(n, dim))
        diffs = pts[:, None, :] - pts[None, :, :]
        dist = np.sqrt((diffs**2).sum(axis=2))
        if np.all(dist[np.triu_indices(n, k=1)] > 5e-3):
            break
    w1 = rng.uniform(0.2, 1.0, n)
    w2 = rng.uniform(0.2, 1.0, n)
    return (
        FiniteDistribution(pts, w1 / w1.sum()),
        FiniteDistribution(pts, w2 / w2.sum()),
    )


def parse_class_spec(spec: str, support: np.ndarray):
    if spec == "all":
        return AllFunctions(support)
    if spec.startswith("span:"):
        return LinearSpan(polynomial_features(support, int(spec.split(":")[1])))
    if spec.startswith("lip:"):
        return LipschitzBall(float(spec.split(":")[1]), support)
    raise DomainError(f"unknown class spec {spec!r}; use all, span:<degree>, or lip:<L>")


def duality_sweep(divergence: str, class_spec: str, trials: int, seed: int,
                  atoms: int = 4) -> list[SweepRow]:
    """Identity gaps on random instances for one divergence and class pairing."""
    rng = RandomSource(seed).stream(5)
    rows = []
    for t in range(trials):
        model, data = _random_instance(rng, n=atoms)
        if divergence in ("hyb-js-w1", "hyb-sh-w1"):
            gen = get_generator({"hyb-js-w1": "js", "hyb-sh-w1": "sqhellinger"}[divergence])
            chk = check_lipschitz_fgan_identity(model, data, gen)
            rows.append(SweepRow(t, chk.lhs, chk.rhs))
            continue
        if divergence in ("hyb-js-w2", "hyb-sh-w2"):
            gen = get_generator({"hyb-js-w2": "js", "hyb-sh-w2": "sqhellinger"}[divergence])
            chk = check_perturbed_fgan_identity(model, data, gen)
            rows.append(SweepRow(t, chk.lhs, chk.rhs))
            continue
        div = OTDivergence(cost_norm()) if divergence == "w1" else FDivergence(get_generator(divergence))
        support = merge_supports(model.points, data.points)
        fclass = parse_class_spec(class_spec, support)
        lhs = discriminator_max(model, data, fclass, div)
        rhs = penalized_divergence_min(model, data, fclass, div)
        rows.append(SweepRow(t, lhs, rhs))
    return rows


# mixture scaling


@dataclass(frozen=True)
class MixtureRow:
    m: int
    median_err: float
    q25: float
    q75: float


def build_mixture_family(spec: str, seed: int) -> tuple[list[MLPParams], np.ndarray, np.ndarray]:
    """Member nets, mixing weights, and an evaluation grid for a family tag."""
    rng = RandomSource(seed).stream(23)
    if spec == "two-constant":
        members = [
            MLPParams([np.zeros((1, 1))], [np.array([0.0])], "tanh"),
            MLPParams([np.zeros((1, 1))], [np.array([1.0])], "tanh"),
        ]
        grid = np.linspace(-1.0, 1.0, 9)[:, None]
        return members, np.full(2, 0.5), grid
    if spec == "single":
        members = [MLPParams.create([1, 4, 1], "tanh", rng)]
        return members, np.array([1.0]), np.linspace(-1.0, 1.0, 9)[:, None]
    if spec.startswith("mlp:"):
        count = int(spec.split(":")[1])
        members = [MLPParams.create([1, 6, 1], "tanh", rng) for _ in range(count)]
        alpha = rng.uniform(0.5, 1.5, count)
        return members, alpha / alpha.sum(), np.linspace(-1.0, 1.0, 33)[:, None]
    raise DomainError(f"unknown family spec {spec!r}")


def mixture_scaling(m_list: Sequence[int], repetitions: int, family_spec: str,
                    seed: int) -> tuple[list[MixtureRow], float | None]:
    """Median sup-error of sampled mixtures per size, with the log-log slope.

    The slope is undefined (None) whenever a median vanishes, which happens
    exactly for single-member families.
    """
    members, alpha, grid = build_mixture_family(family_spec, seed)
    src = RandomSource(seed)
    rows = []
    for k, m in enumerate(m_list):
        errs = np.array([
            mixture_approx_error(members, alpha, m, grid, src.stream(1000 + 97 * k + r))
            for r in range(repetitions)
        ])
        rows.append(MixtureRow(int(m), float(np.median(errs)),
                               float(np.quantile(errs, 0.25)), float(np.quantile(errs, 0.75))))
    medians = np.array([r.median_err for r in rows])
    if len(rows) < 2 or np.any(medians <= 0):
        return rows, None
    slope = float(np.polyfit(np.log(np.asarray(m_list, dtype=float)), np.log(medians), 1)[0])
    return rows, slope


# linear-generator recovery of the leading eigenspace


@dataclass(frozen=True)
class LqgReport:
    theta: np.ndarray
    objective: float
    alignment: float
    converged: bool


def lqg_pca(dim: int, cov_diag: Sequence[float], r: int, seed: int,
            data_per_axis: int = 8, noise_atoms: int = 24, iters: int = 120) -> LqgReport:
    """Fit a linear generator to a discretized Gaussian under squared-norm transport.

    Gradient descent on the generator matrix, with the plan held fixed per
    step (the transport value is an envelope of linear functions of the
    matrix, so the optimal-plan gradient is exact). Reports the cosine
    alignment between the learned column space and the leading eigenspace.
    """
    cov_diag = np.asarray(cov_diag, dtype=float)
    if len(cov_diag) != dim or r >= dim + 1:
        raise DomainError("covariance must be dim-long and r at most dim")
    data = gaussian_grid(cov_diag, per_axis=data_per_axis)
    if r == 1:
        noise = gaussian_grid_1d(0.0, 1.0, atoms=noise_atoms)
    else:
        per_axis = max(2, int(round(noise_atoms ** (1.0 / r))))
        noise = gaussian_grid(np.ones(r), per_axis=per_axis)

    rng = RandomSource(seed).stream(31)
    theta = 0.5 * rng.normal(size=(dim, r))

    def objective_and_grad(th: np.ndarray) -> tuple[float, np.ndarray]:
        model_pts = noise.points @ th.T
        model = FiniteDistribution.from_weighted_points(model_pts, noise.weights)
        res = ot_primal(model, data, cost_norm_squared())
        plan = res.plan.mass
        # merged atoms need the plan mapped back to noise rows; re-map by
        # recomputing images per noise atom against the plan's row support
        grad = np.zeros_like(th)
        row_support = res.plan.row_support
        for i, z in enumerate(noise.points):
            img = th @ z
            hits = np.nonzero(np.linalg.norm(row_support - img[None, :], axis=1) <= 1e-9)[0]
            row = int(hits[0])
            share = noise.weights[i] / model.weights[row]
            diff = img[None, :] - data.points
            grad += 2.0 * (share * plan[row] @ diff)[:, None] * z[None, :]
        return res.value, grad

    value, grad = objective_and_grad(theta)
    step = 0.2
    converged = False
    for _ in range(iters):
        moved = False
        while step >= 1e-10:
            trial = theta - step * grad
            tval, tgrad = objective_and_grad(trial)
            if tval < value - 1e-14:
                theta, value, grad = trial, tval, tgrad
                step = min(step * 1.5, 2.0)
                moved = True
                break
            step *= 0.5
        if not moved:
            converged = True
            break

    top = np.linalg.eigh(np.diag(cov_diag))[1][:, ::-1][:, :r]
    q_theta, _ = np.linalg.qr(theta)
    sv = np.linalg.svd(top.T @ q_theta[:, :r], compute_uv=False)
    alignment = float(np.min(sv))
    return LqgReport(theta=theta, objective=value, alignment=alignment, converged=converged)


# toy training


@dataclass(frozen=True)
class ToyRunResult:
    loss_kind: str
    rows: list[tuple[int, float, float, str]]
    spearman: float


def build_dataset(tag: str, seed: int) -> FiniteDistribution:
    if tag == "ring":
        return ring_mixture(seed)
    if tag == "gauss1d":
        return gaussian_grid_1d(0.0, 1.0, atoms=64)
    if tag == "shifted-delta":
        return FiniteDistribution.delta(0.0)
    raise DomainError(f"unknown dataset tag {tag!r}")


def train_toy(base: TrainConfig, loss_kinds: Sequence[str], dataset: str) -> list[ToyRunResult]:
    """Train one configuration per loss kind on a shared dataset and seed."""
    data = build_dataset(dataset, base.seed)
    results = []
    for kind in loss_kinds:
        cfg = TrainConfig(**{**base.__dict__, "loss_kind": kind})
        log = train(cfg, data, data)
        iters = [row[0] for row in log.rows]
        ests = [row[2] for row in log.rows]
        rho = float(spearmanr(iters, ests).statistic) if len(iters) > 2 else float("nan")
        results.append(ToyRunResult(kind, log.rows, rho))
    return results
