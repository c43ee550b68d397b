"""Toy GAN engine on dense networks with hand-written gradients.

Everything differentiable here is a chain of dense layers and elementwise
activations, so reverse mode is spelled out directly instead of taping a
general graph: the training objectives need parameter gradients, input
gradients (for the generator chain and the perturbation player), and one
second-order quantity, the parameter gradient of the input-gradient norm
used by the gradient penalty. The latter is computed by forward-propagating
a tangent along the penalty direction and running reverse mode over the
augmented computation.

Discriminator outputs are mapped into the conjugate domain per generator:
the js head uses the sigmoid-log form (log 2 - softplus(t)) / 2, the
squared-Hellinger head uses 1 - exp(-t), and the kl head is the identity;
all three keep the adversarial objective finite by construction.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .distributions import FiniteDistribution, RandomSource
from .errors import ConvergenceError, DomainError
from .fdiv import FGenerator, get_generator

LN2 = float(np.log(2.0))

_ACTIVATIONS: dict[str, tuple[Callable, Callable, Callable]] = {
    "tanh": (
        np.tanh,
        lambda z: 1.0 - np.tanh(z) ** 2,
        lambda z: -2.0 * np.tanh(z) * (1.0 - np.tanh(z) ** 2),
    ),
    "relu": (
        lambda z: np.maximum(z, 0.0),
        lambda z: (z > 0).astype(float),
        lambda z: np.zeros_like(z),
    ),
    "leaky-relu": (
        lambda z: np.where(z > 0, z, 0.2 * z),
        lambda z: np.where(z > 0, 1.0, 0.2),
        lambda z: np.zeros_like(z),
    ),
    "identity": (lambda z: z, lambda z: np.ones_like(z), lambda z: np.zeros_like(z)),
}


@dataclass
class MLPParams:
    """Dense feed-forward network; the last layer is always linear."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "tanh"

    def __post_init__(self):
        if self.activation not in _ACTIVATIONS:
            raise DomainError(f"unknown activation {self.activation!r}")
        for W, b in zip(self.weights, self.biases):
            if W.shape[0] != len(b):
                raise DomainError("bias length must match the layer output size")
        for prev, nxt in zip(self.weights, self.weights[1:]):
            if nxt.shape[1] != prev.shape[0]:
                raise DomainError("layer dimensions do not chain")
        if not all(np.all(np.isfinite(W)) for W in self.weights):
            raise DomainError("parameters must be finite")

    @classmethod
    def create(cls, sizes: Sequence[int], activation: str, rng: np.random.Generator, scale: float = 1.0) -> "MLPParams":
        weights, biases = [], []
        for d_in, d_out in zip(sizes, sizes[1:]):
            weights.append(scale * rng.normal(size=(d_out, d_in)) / np.sqrt(d_in))
            biases.append(np.zeros(d_out))
        return cls(weights, biases, activation)

    def copy(self) -> "MLPParams":
        return MLPParams([W.copy() for W in self.weights], [b.copy() for b in self.biases], self.activation)

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[0]

    def flat(self) -> np.ndarray:
        return np.concatenate([W.ravel() for W in self.weights] + [b for b in self.biases])

    def with_flat(self, vec: np.ndarray) -> "MLPParams":
        out = self.copy()
        k = 0
        for i, W in enumerate(out.weights):
            out.weights[i] = vec[k : k + W.size].reshape(W.shape)
            k += W.size
        for i, b in enumerate(out.biases):
            out.biases[i] = vec[k : k + b.size].copy()
            k += b.size
        return out

    def param_hash(self) -> str:
        digest = hashlib.sha1()
        for W, b in zip(self.weights, self.biases):
            digest.update(np.ascontiguousarray(W).tobytes())
            digest.update(np.ascontiguousarray(b).tobytes())
        return digest.hexdigest()[:12]


def _forward_cache(params: MLPParams, X: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    act, _, _ = _ACTIVATIONS[params.activation]
    zs, acts = [], [np.asarray(X, dtype=float)]
    a = acts[0]
    last = len(params.weights) - 1
    for l, (W, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ W.T + b
        zs.append(z)
        a = z if l == last else act(z)
        acts.append(a)
    return zs, acts


def mlp_forward(params: MLPParams, X) -> np.ndarray:
    """Raw network outputs for a batch (rows are samples)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != params.in_dim:
        raise DomainError(f"input dimension {X.shape[1]} does not match the first layer")
    _, acts = _forward_cache(params, X)
    return acts[-1]


def mlp_backward(
    params: MLPParams, X: np.ndarray, dy: np.ndarray
) -> tuple[list[tuple[np.ndarray, np.ndarray]], np.ndarray]:
    """Gradients of ``sum(dy * output)`` for parameters and inputs."""
    _, deriv, _ = _ACTIVATIONS[params.activation]
    zs, acts = _forward_cache(params, np.atleast_2d(X))
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(params.weights)
    dz = np.asarray(dy, dtype=float)
    for l in range(len(params.weights) - 1, -1, -1):
        grads[l] = (dz.T @ acts[l], dz.sum(axis=0))
        da = dz @ params.weights[l]
        if l > 0:
            dz = da * deriv(zs[l - 1])
    return grads, da


def mlp_input_gradient(params: MLPParams, X) -> np.ndarray:
    """Gradient of the scalar output with respect to each input row."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if params.out_dim != 1:
        raise DomainError("input gradients are defined for scalar-output networks")
    _, dX = mlp_backward(params, X, np.ones((len(X), 1)))
    return dX


def gradient_penalty(
    disc: MLPParams,
    real: np.ndarray,
    fake: np.ndarray,
    rng: np.random.Generator,
) -> tuple[float, list[tuple[np.ndarray, np.ndarray]]]:
    """Mean squared deviation of the input-gradient norm from one, with its
    parameter gradients.

    Interpolates between paired real and fake samples with uniform weights.
    The parameter gradient needs the derivative of the input gradient, which
    is obtained by pushing a tangent along the penalty direction through the
    network and reverse-propagating the resulting directional derivative.
    """
    real = np.atleast_2d(real)
    fake = np.atleast_2d(fake)
    if len(real) == 0 or len(fake) == 0:
        raise DomainError("gradient penalty needs nonempty batches")
    n = min(len(real), len(fake))
    eps = rng.uniform(size=(n, 1))
    x_hat = eps * real[:n] + (1.0 - eps) * fake[:n]

    g = mlp_input_gradient(disc, x_hat)
    norms = np.sqrt(np.sum(g * g, axis=1) + 1e-12)
    penalty = float(np.mean((norms - 1.0) ** 2))
    # direction of steepest penalty change per sample, scaled by the batch mean
    v = (2.0 * (norms - 1.0) / norms)[:, None] * g / n

    act, deriv, second = (_ACTIVATIONS[disc.activation][i] for i in range(3))
    zs, acts = _forward_cache(disc, x_hat)
    # forward tangents of the augmented computation along v
    t_a = v
    t_zs = []
    last = len(disc.weights) - 1
    for l, W in enumerate(disc.weights):
        t_z = t_a @ W.T
        t_zs.append(t_z)
        t_a = t_z if l == last else deriv(zs[l]) * t_z
    # reverse pass over (z, t_z) pairs; the objective is sum of the final tangent
    grads = [(np.zeros_like(W), np.zeros_like(b)) for W, b in zip(disc.weights, disc.biases)]
    dz = np.zeros_like(zs[last])
    dt_z = np.ones_like(t_zs[last])
    for l in range(last, -1, -1):
        t_a_prev = v if l == 0 else deriv(zs[l - 1]) * t_zs[l - 1]
        dW = dz.T @ acts[l] + dt_z.T @ t_a_prev
        db = dz.sum(axis=0)
        grads[l] = (dW, db)
        da = dz @ disc.weights[l]
        dt_a = dt_z @ disc.weights[l]
        if l > 0:
            dz = da * deriv(zs[l - 1]) + dt_a * second(zs[l - 1]) * t_zs[l - 1]
            dt_z = dt_a * deriv(zs[l - 1])
    return penalty, grads


@dataclass
class SpectralNormState:
    """Persistent power-iteration vectors, one pair per layer."""

    us: list[np.ndarray]
    vs: list[np.ndarray]

    @classmethod
    def for_params(cls, params: MLPParams, rng: np.random.Generator) -> "SpectralNormState":
        us, vs = [], []
        for W in params.weights:
            u = rng.normal(size=W.shape[0])
            us.append(u / np.linalg.norm(u))
            v = rng.normal(size=W.shape[1])
            vs.append(v / np.linalg.norm(v))
        return cls(us, vs)


def _spectral_sigmas(params: MLPParams, state: SpectralNormState, n_power_iters: int) -> np.ndarray:
    """Per-layer top singular value estimates; the iteration vectors persist."""
    if n_power_iters < 1:
        raise DomainError("need at least one power iteration")
    sigmas = np.ones(len(params.weights))
    for l, W in enumerate(params.weights):
        u, v = state.us[l], state.vs[l]
        for _ in range(n_power_iters):
            v = W.T @ u
            nv = np.linalg.norm(v)
            if nv <= 1e-30:
                break
            v = v / nv
            u = W @ v
            nu = np.linalg.norm(u)
            if nu <= 1e-30:
                break
            u = u / nu
        state.us[l], state.vs[l] = u, v
        sigmas[l] = float(u @ W @ v)
    return sigmas


def spectral_normalize(params: MLPParams, state: SpectralNormState, n_power_iters: int) -> MLPParams:
    """Divide each weight matrix by its power-iteration top singular value.

    The iteration vectors persist in ``state`` across calls, so repeated
    normalization sharpens the estimate; zero matrices are left unchanged.
    """
    sigmas = _spectral_sigmas(params, state, n_power_iters)
    out = params.copy()
    for l, sigma in enumerate(sigmas):
        if sigma > 1e-30:
            out.weights[l] = params.weights[l] / sigma
    return out


@dataclass
class MixtureDiscriminator:
    """Uniform average of member networks."""

    members: list[MLPParams]

    def __post_init__(self):
        if not self.members:
            raise DomainError("a mixture needs at least one member")

    def evaluate(self, X) -> np.ndarray:
        return np.mean([mlp_forward(m, X) for m in self.members], axis=0)


def mixture_approx_error(
    members: Sequence[MLPParams],
    alpha: np.ndarray,
    m: int,
    grid: np.ndarray,
    rng: np.random.Generator,
) -> float:
    """Sup-error of an m-sample uniform mixture against the full convex mix.

    Samples member indices independently from ``alpha``, averages the drawn
    members uniformly, and reports the largest deviation over the grid from
    the alpha-weighted combination.
    """
    alpha = np.asarray(alpha, dtype=float)
    probs = alpha / alpha.sum()
    idx = rng.choice(len(members), size=m, p=probs)
    outputs = np.stack([mlp_forward(mem, grid)[:, 0] for mem in members])
    counts = np.bincount(idx, minlength=len(members))
    sampled = (counts / m) @ outputs
    reference = probs @ outputs
    return float(np.max(np.abs(sampled - reference)))


# discriminator heads: map the raw output into the conjugate domain


def _head(gen: FGenerator, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Domain-safe discriminator value and its derivative in the raw output."""
    if gen.name == "js":
        sp = np.logaddexp(0.0, t)
        sig = 1.0 / (1.0 + np.exp(-t))
        return 0.5 * (LN2 - sp), -0.5 * sig
    if gen.name == "sqhellinger":
        e = np.exp(-t)
        return 1.0 - e, e
    if gen.name == "kl":
        return t, np.ones_like(t)
    clip = gen.conj_hi - 1e-6
    return np.minimum(t, clip), (t < clip).astype(float)


def wrm_inner_solve(
    disc: MLPParams,
    gen: FGenerator,
    x: np.ndarray,
    steps: int = 60,
    step_size: float = 0.25,
    cost_coef: float = 1.0,
) -> tuple[np.ndarray, float]:
    """Backtracking descent on the perturbation objective from the origin.

    Minimizes ``-f*(D(x + u)) + cost_coef |u|^2`` over the perturbation; the
    returned value never exceeds the unperturbed start, and trial steps whose
    head value leaves the conjugate domain are rejected by halving.
    """
    if steps < 1:
        raise DomainError("need at least one descent step")
    x = np.atleast_1d(np.asarray(x, dtype=float))

    def objective_and_grad(u: np.ndarray) -> tuple[float, np.ndarray]:
        point = (x + u)[None, :]
        t = mlp_forward(disc, point)[0, 0]
        d_val, d_slope = _head(gen, np.array([t]))
        if not gen.in_domain(d_val, margin=0.0):
            return np.inf, np.zeros_like(u)
        with np.errstate(over="ignore"):
            fstar = float(gen.conjugate(d_val)[0])
            fprime = float(gen.conjugate_deriv(d_val)[0])
        value = -fstar + cost_coef * float(u @ u)
        din = mlp_input_gradient(disc, point)[0]
        grad = -fprime * float(d_slope[0]) * din + 2.0 * cost_coef * u
        return value, grad

    u = np.zeros_like(x)
    val, grad = objective_and_grad(u)
    step = step_size
    for _ in range(steps):
        moved = False
        while step >= 1e-12:
            trial = u - step * grad
            tval, tgrad = objective_and_grad(trial)
            if tval < val:
                u, val, grad = trial, tval, tgrad
                step = min(step * 1.5, 10.0)
                moved = True
                break
            step *= 0.5
        if not moved:
            break
    return u, val


@dataclass
class LossOutput:
    value: float
    disc_grads: list[tuple[np.ndarray, np.ndarray]]
    fake_input_grads: np.ndarray


def gan_loss(
    loss_kind: str,
    disc: MLPParams,
    real: np.ndarray,
    fake: np.ndarray,
    real_weights: np.ndarray | None = None,
    gen: FGenerator | None = None,
    gp_weight: float = 0.0,
    wrm_steps: int = 30,
    wrm_step_size: float = 0.25,
    wrm_cost_coef: float = 1.0,
    rng: np.random.Generator | None = None,
) -> LossOutput:
    """Discriminator objective with gradients for both players.

    The discriminator ascends ``value``; the generator descends it through
    ``fake_input_grads`` (the gradient of the value in the fake samples).
    The gradient penalty, when active, regularizes only the discriminator.
    """
    real = np.atleast_2d(np.asarray(real, dtype=float))
    fake = np.atleast_2d(np.asarray(fake, dtype=float))
    if len(real) == 0 or len(fake) == 0:
        raise DomainError("batches must be nonempty")
    rw = np.full(len(real), 1.0 / len(real)) if real_weights is None else np.asarray(real_weights)
    fw = np.full(len(fake), 1.0 / len(fake))

    t_real = mlp_forward(disc, real)[:, 0]
    t_fake = mlp_forward(disc, fake)[:, 0]

    if loss_kind == "vanilla":
        sig_r = 1.0 / (1.0 + np.exp(-t_real))
        sig_f = 1.0 / (1.0 + np.exp(-t_fake))
        value = float(rw @ (-np.logaddexp(0.0, t_real)) + fw @ (t_fake - np.logaddexp(0.0, t_fake)))
        dy_real = -rw * sig_r
        dy_fake = fw * (1.0 - sig_f)
    elif loss_kind in ("fgan", "fgan-lipschitz", "fgan-wrm"):
        if gen is None:
            raise DomainError(f"{loss_kind} needs a generator")
        d_real, s_real = _head(gen, t_real)
        if loss_kind == "fgan-wrm":
            if rng is None:
                raise DomainError("the perturbed loss needs a random source")
            inner_vals = np.empty(len(fake))
            grads_fake_pts = np.empty_like(fake)
            slopes = np.empty(len(fake))
            moved = np.empty_like(fake)
            for i, x in enumerate(fake):
                u, inner_vals[i] = wrm_inner_solve(
                    disc, gen, x, steps=wrm_steps, step_size=wrm_step_size, cost_coef=wrm_cost_coef
                )
                moved[i] = x + u
            t_moved = mlp_forward(disc, moved)[:, 0]
            d_moved, s_moved = _head(gen, t_moved)
            with np.errstate(over="ignore"):
                fprime = gen.conjugate_deriv(d_moved)
            value = float(rw @ d_real + fw @ inner_vals)
            dy_real = rw * s_real
            dy_fake = -fw * fprime * s_moved
            grads_r, _ = mlp_backward(disc, real, (dy_real)[:, None])
            grads_f, dfake = mlp_backward(disc, moved, (dy_fake)[:, None])
            grads = [(gr + gf, br + bf) for (gr, br), (gf, bf) in zip(grads_r, grads_f)]
            return LossOutput(value, grads, dfake)
        d_fake, s_fake = _head(gen, t_fake)
        with np.errstate(over="ignore"):
            conj = gen.conjugate(d_fake)
            fprime = gen.conjugate_deriv(d_fake)
        value = float(rw @ d_real - fw @ conj)
        dy_real = rw * s_real
        dy_fake = -fw * fprime * s_fake
    elif loss_kind == "w1gan":
        value = float(rw @ t_real - fw @ t_fake)
        dy_real = rw.copy()
        dy_fake = -fw
    else:
        raise DomainError(f"unknown loss kind {loss_kind!r}")

    grads_r, _ = mlp_backward(disc, real, dy_real[:, None])
    grads_f, dfake = mlp_backward(disc, fake, dy_fake[:, None])
    grads = [(gr + gf, br + bf) for (gr, br), (gf, bf) in zip(grads_r, grads_f)]

    if gp_weight > 0.0:
        if rng is None:
            raise DomainError("the gradient penalty needs a random source")
        pen, pen_grads = gradient_penalty(disc, real, fake, rng)
        value -= gp_weight * pen
        grads = [
            (g - gp_weight * pg, b - gp_weight * pb)
            for (g, b), (pg, pb) in zip(grads, pen_grads)
        ]
    return LossOutput(value, grads, dfake)


@dataclass
class TrainConfig:
    """Knobs of the alternating minimax loop."""

    loss_kind: str = "vanilla"
    generator_name: str = "js"
    disc_steps_per_gen: int = 5
    disc_warmup: int = 0
    disc_lr: float = 5e-3
    gen_lr: float = 5e-3
    batch_size: int = 64
    iterations: int = 1000
    gp_weight: float = 0.0
    wrm_steps: int = 20
    wrm_step_size: float = 0.25
    wrm_cost_coef: float = 1.0
    sn_power_iters: int = 20
    optimizer: str = "sgd"
    momentum: float = 0.9
    seed: int = 0
    log_every: int = 50
    snapshot_every: int = 0
    noise_dim: int = 2
    disc_hidden: tuple[int, ...] = (32, 32)
    gen_hidden: tuple[int, ...] = (32, 32)
    activation: str = "tanh"

    def __post_init__(self):
        if min(self.disc_steps_per_gen, self.batch_size, self.log_every) < 1:
            raise DomainError("counts must be positive")
        if self.iterations < 0 or min(self.disc_lr, self.gen_lr) <= 0:
            raise DomainError("rates must be positive and iterations nonnegative")

    def to_json(self) -> str:
        d = dict(self.__dict__)
        d["disc_hidden"] = list(self.disc_hidden)
        d["gen_hidden"] = list(self.gen_hidden)
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TrainConfig":
        d = json.loads(text)
        d["disc_hidden"] = tuple(d.get("disc_hidden", (32, 32)))
        d["gen_hidden"] = tuple(d.get("gen_hidden", (32, 32)))
        return cls(**d)


@dataclass
class TrainLog:
    rows: list[tuple[int, float, float, str]]
    snapshots: list[tuple[int, MLPParams]]
    disc: MLPParams
    gen_net: MLPParams
    config: TrainConfig

    def to_csv_rows(self) -> list[str]:
        out = ["iter,disc_loss_train,divergence_estimate_val,gen_param_hash"]
        for it, train_loss, est, h in self.rows:
            out.append(f"{it},{train_loss!r},{est!r},{h}")
        return out


class _Optimizer:
    """Momentum descent with an adaptive-moment option, one slot per array."""

    def __init__(self, kind: str, lr: float, momentum: float):
        if kind not in ("sgd", "adam"):
            raise DomainError(f"unknown optimizer {kind!r}")
        self.kind = kind
        self.lr = lr
        self.momentum = momentum
        self.state: dict[int, dict] = {}
        self.t = 0

    def step(self, arrays: list[np.ndarray], grads: list[np.ndarray], sign: float) -> None:
        """In-place update; sign +1 ascends, -1 descends."""
        self.t += 1
        for k, (a, g) in enumerate(zip(arrays, grads)):
            slot = self.state.setdefault(k, {"m": np.zeros_like(a), "v": np.zeros_like(a)})
            if self.kind == "sgd":
                slot["m"] = self.momentum * slot["m"] + g
                a += sign * self.lr * slot["m"]
            else:
                b1, b2, eps = 0.9, 0.999, 1e-8
                slot["m"] = b1 * slot["m"] + (1 - b1) * g
                slot["v"] = b2 * slot["v"] + (1 - b2) * g * g
                mhat = slot["m"] / (1 - b1**self.t)
                vhat = slot["v"] / (1 - b2**self.t)
                a += sign * self.lr * mhat / (np.sqrt(vhat) + eps)


def _sample_batch(dist: FiniteDistribution, size: int, rng: np.random.Generator) -> np.ndarray:
    idx = rng.choice(dist.size, size=size, p=dist.weights)
    return dist.points[idx]


def train(
    config: TrainConfig,
    data: FiniteDistribution,
    validation: FiniteDistribution,
) -> TrainLog:
    """Alternating minimax loop, deterministic for a fixed seed.

    Runs ``disc_steps_per_gen`` discriminator ascent steps per generator
    descent step (after an optional discriminator-only warmup), applying
    spectral normalization under the Lipschitz loss and the gradient penalty
    under the plain transport loss when its weight is positive. Logs the
    discriminator objective on the validation distribution (against a fixed
    evaluation noise batch) as the divergence estimate.
    """
    src = RandomSource(config.seed)
    init_rng = src.stream(0)
    batch_rng = src.stream(1)
    eval_rng = src.stream(2)

    gen_f = get_generator(config.generator_name) if config.loss_kind != "vanilla" else None
    dim = data.dim
    disc_raw = MLPParams.create([dim, *config.disc_hidden, 1], config.activation, init_rng)
    gen_net = MLPParams.create([config.noise_dim, *config.gen_hidden, dim], config.activation, init_rng)
    sn_state = SpectralNormState.for_params(disc_raw, init_rng)
    normalized = config.loss_kind == "fgan-lipschitz"

    def applied_disc() -> MLPParams:
        # normalization lives in the applied weights; raw weights carry the
        # optimizer state and receive the through-the-division gradient
        if normalized:
            return spectral_normalize(disc_raw, sn_state, config.sn_power_iters)
        return disc_raw

    disc = applied_disc()
    disc_opt = _Optimizer(config.optimizer, config.disc_lr, config.momentum)
    gen_opt = _Optimizer(config.optimizer, config.gen_lr, config.momentum)

    eval_noise = eval_rng.normal(size=(512, config.noise_dim))

    def loss_args(rng):
        return dict(
            gen=gen_f,
            gp_weight=config.gp_weight if config.loss_kind == "w1gan" else 0.0,
            wrm_steps=config.wrm_steps,
            wrm_step_size=config.wrm_step_size,
            wrm_cost_coef=config.wrm_cost_coef,
            rng=rng,
        )

    def validation_estimate() -> float:
        fake = mlp_forward(gen_net, eval_noise)
        out = gan_loss(
            config.loss_kind,
            disc,
            validation.points,
            fake,
            real_weights=validation.weights,
            gen=gen_f,
            gp_weight=0.0,
            wrm_steps=config.wrm_steps,
            wrm_step_size=config.wrm_step_size,
            wrm_cost_coef=config.wrm_cost_coef,
            rng=RandomSource(config.seed).stream(9),
        )
        return out.value

    rows: list[tuple[int, float, float, str]] = []
    snapshots: list[tuple[int, MLPParams]] = []
    last_train = np.nan

    def disc_step() -> None:
        nonlocal disc, last_train
        real = _sample_batch(data, config.batch_size, batch_rng)
        noise = batch_rng.normal(size=(config.batch_size, config.noise_dim))
        fake = mlp_forward(gen_net, noise)
        out = gan_loss(config.loss_kind, disc, real, fake, **loss_args(batch_rng))
        if normalized:
            # differentiate through the division: with sigma = u' W v,
            # d(W/sigma) strips the radial component along u v'
            sigmas = _spectral_sigmas(disc_raw, sn_state, 1)
            grads = []
            for l, (g, _) in enumerate(out.disc_grads):
                s = max(sigmas[l], 1e-30)
                w_bar = disc_raw.weights[l] / s
                radial = float(np.sum(g * w_bar))
                grads.append((g - radial * np.outer(sn_state.us[l], sn_state.vs[l])) / s)
            grads += [b for _, b in out.disc_grads]
        else:
            grads = [g for g, _ in out.disc_grads] + [b for _, b in out.disc_grads]
        arrays = disc_raw.weights + disc_raw.biases
        disc_opt.step(arrays, grads, sign=+1.0)
        disc = applied_disc()
        last_train = out.value

    for _ in range(config.disc_warmup):
        disc_step()

    for it in range(config.iterations + 1):
        if it % config.log_every == 0 or it == config.iterations:
            rows.append((it, last_train, validation_estimate(), gen_net.param_hash()))
        if config.snapshot_every and it % config.snapshot_every == 0:
            snapshots.append((it, gen_net.copy()))
        if it == config.iterations:
            break

        for _ in range(config.disc_steps_per_gen):
            disc_step()

        real = _sample_batch(data, config.batch_size, batch_rng)
        noise = batch_rng.normal(size=(config.batch_size, config.noise_dim))
        fake = mlp_forward(gen_net, noise)
        out = gan_loss(config.loss_kind, disc, real, fake, **loss_args(batch_rng))
        gen_grads, _ = mlp_backward(gen_net, noise, out.fake_input_grads)
        arrays = gen_net.weights + gen_net.biases
        grads = [g for g, _ in gen_grads] + [b for _, b in gen_grads]
        gen_opt.step(arrays, grads, sign=-1.0)

        if not all(np.all(np.isfinite(W)) for W in disc_raw.weights + gen_net.weights):
            raise ConvergenceError(f"parameters diverged at iteration {it}")

    return TrainLog(rows, snapshots, disc, gen_net, config)


# model snapshot format: magic, version, json header length, header, float64 payload

_MAGIC = b"GDNN"
_VERSION = 1


def save_params(params: MLPParams, path) -> None:
    header = json.dumps(
        {
            "activation": params.activation,
            "shapes": [list(W.shape) for W in params.weights],
        }
    ).encode()
    payload = params.flat().astype("<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<HI", _VERSION, len(header)))
        fh.write(header)
        fh.write(payload)


def load_params(path) -> MLPParams:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _MAGIC:
        raise DomainError(f"{path}: not a parameter snapshot")
    version, hlen = struct.unpack("<HI", blob[4:10])
    if version != _VERSION:
        raise DomainError(f"{path}: unsupported snapshot version {version}")
    header = json.loads(blob[10 : 10 + hlen].decode())
    vec = np.frombuffer(blob[10 + hlen :], dtype="<f8")
    shapes = [tuple(s) for s in header["shapes"]]
    weights, biases, k = [], [], 0
    for shape in shapes:
        size = shape[0] * shape[1]
        weights.append(vec[k : k + size].reshape(shape).copy())
        k += size
    for shape in shapes:
        biases.append(vec[k : k + shape[0]].copy())
        k += shape[0]
    return MLPParams(weights, biases, header["activation"])
