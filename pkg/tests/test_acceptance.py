"""End-to-end acceptance checks, one per shipped guarantee.

Each test prints a single pass/fail line with its headline statistic, so a
plain pytest run doubles as the acceptance report:

    pytest tests/test_acceptance.py -s
"""

import time

import numpy as np
import pytest
from scipy.stats import spearmanr

from ganduality import (
    AllFunctions,
    FDivergence,
    FiniteDistribution,
    InfeasibleError,
    LinearSpan,
    LipschitzBall,
    MomentVector,
    OTDivergence,
    RandomSource,
    Witness,
    check_perturbed_fgan_identity,
    check_w2_perturbation_bound,
    cost_indicator,
    cost_norm,
    cost_norm_squared,
    brute_force_conjugate,
    discriminator_max,
    fdiv_conjugate,
    fgan_span_max,
    get_generator,
    hybrid_brute,
    hybrid_dual,
    hybrid_primal,
    HybridSpec,
    merge_supports,
    moment_projection,
    ot_primal,
    penalized_divergence_min,
    polynomial_features,
    shift_family,
    tv_distance,
)
from ganduality.experiments import (
    continuity_scan,
    lqg_pca,
    mixture_scaling,
    ring_mixture,
)
from ganduality.neuralgan import MLPParams, TrainConfig, gan_loss, train
from conftest import distinct_points, random_distribution, random_pair, random_witness

JS = get_generator("js")
KL = get_generator("kl")
SQH = get_generator("sqhellinger")


def report(num: int, name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {num:02d} {name}: {detail}")
    assert ok, f"criterion {num} ({name}) failed: {detail}"


def test_01_transport_strong_duality():
    rng = RandomSource(101).stream()
    costs = [cost_norm(), cost_norm_squared(), cost_indicator(0.8)]
    started = time.time()
    worst = 0.0
    for k in range(100):
        n = int(rng.integers(2, 31))
        m = int(rng.integers(2, 31))
        P = random_distribution(rng, n, dim=2)
        Q = random_distribution(rng, m, dim=2)
        res = ot_primal(P, Q, costs[k % 3])
        worst = max(worst, abs(res.value - res.dual_value) / (1.0 + abs(res.value)))
    elapsed = time.time() - started
    ok = worst <= 1e-6 and elapsed < 30.0
    report(1, "transport strong duality", ok,
           f"worst relative gap {worst:.2e} on 100 instances in {elapsed:.1f}s")


def test_02_indicator_cost_matches_total_variation():
    rng = RandomSource(102).stream()
    worst = 0.0
    for _ in range(50):
        m = float(rng.uniform(0.2, 3.0))
        P = random_distribution(rng, int(rng.integers(2, 7)))
        Q = random_distribution(rng, int(rng.integers(2, 7)))
        ot = ot_primal(P, Q, cost_indicator(m)).value
        worst = max(worst, abs(ot - m * tv_distance(P, Q)))
    ok = worst <= 1e-8
    report(2, "indicator cost equals scaled total variation", ok,
           f"worst absolute gap {worst:.2e} on 50 pairs")


def test_03_exponential_family_closed_form():
    rng = RandomSource(103).stream()
    worst = 0.0
    for _ in range(50):
        P = random_distribution(rng, int(rng.integers(2, 8)))
        D = random_witness(rng, P.points, scale=1.5)
        conj = fdiv_conjugate(P, D, KL)
        gibbs = float(np.log(P.weights @ np.exp(D.values)))
        worst = max(worst, abs(conj - gibbs))
    ok = worst <= 1e-8
    report(3, "log-mean-exp closed form of the kl conjugate", ok,
           f"worst absolute gap {worst:.2e} on 50 witnesses")


def test_04_conjugate_matches_exhaustive_search():
    rng = RandomSource(104).stream()
    worst = 0.0
    for gen in (JS, KL, SQH):
        div = FDivergence(gen)
        for _ in range(10):
            P = random_distribution(rng, 3)
            D = random_witness(rng, P.points)
            closed = fdiv_conjugate(P, D, gen)
            brute = brute_force_conjugate(P, D, div, 400)
            worst = max(worst, abs(closed - brute))
    ok = worst <= 2e-3
    report(4, "divergence conjugate vs simplex-grid search", ok,
           f"worst gap {worst:.2e} at resolution 400")


def test_05_minimax_identity_suite():
    rng = RandomSource(105).stream()
    worst = 0.0
    for div_name in ("js", "kl", "w1"):
        div = OTDivergence(cost_norm()) if div_name == "w1" else FDivergence(get_generator(div_name))
        for class_name in ("all", "span2", "lip"):
            for _ in range(20):
                model, data = random_pair(rng, 4)
                support = merge_supports(model.points, data.points)
                fclass = {
                    "all": AllFunctions(support),
                    "span2": LinearSpan(polynomial_features(support, 2)),
                    "lip": LipschitzBall(1.0, support),
                }[class_name]
                lhs = discriminator_max(model, data, fclass, div)
                rhs = penalized_divergence_min(model, data, fclass, div)
                rel = abs(lhs - rhs) / (1.0 + max(abs(lhs), abs(rhs)))
                worst = max(worst, rel)
    ok = worst <= 1e-3
    report(5, "penalized-minimum identity suite", ok,
           f"worst relative gap {worst:.2e} over 9 configurations x 20 instances")


def test_06_span_primal_dual_agreement():
    rng = RandomSource(106).stream()
    worst = 0.0
    for gen in (KL, JS):
        for _ in range(5):
            model, data = random_pair(rng, 4)
            features = polynomial_features(model.points, 1)
            primal, _ = moment_projection(model, data, features, FDivergence(gen))
            dual = fgan_span_max(model, data, features, gen)
            worst = max(worst, abs(primal - dual) / (1.0 + max(abs(primal), abs(dual))))
    feasibility_consistent = True
    for k in range(3):
        model = random_distribution(rng, 3, span=0.4)
        features = polynomial_features(model.points, 1)
        target = MomentVector(np.array([5.0 + k]))
        primal_flag = dual_flag = False
        try:
            moment_projection(model, target, features, FDivergence(KL), support=model.points)
        except InfeasibleError:
            primal_flag = True
        try:
            fgan_span_max(model, target, features, KL)
        except InfeasibleError:
            dual_flag = True
        feasibility_consistent &= primal_flag and dual_flag
    ok = worst <= 1e-4 and feasibility_consistent
    report(6, "span objective primal-dual agreement", ok,
           f"worst relative gap {worst:.2e}; infeasible targets flagged on both routes: "
           f"{feasibility_consistent}")


def test_07_hybrid_primal_dual_and_oracle():
    rng = RandomSource(107).stream()
    worst_dual = 0.0
    for _ in range(20):
        P1 = random_distribution(rng, 5)
        P2 = random_distribution(rng, 5)
        spec = HybridSpec.for_pair(JS, cost_norm(), P1, P2)
        primal = hybrid_primal(P1, P2, spec, tol=1e-8)
        dual = hybrid_dual(P1, P2, spec)
        assert dual <= primal.value + 1e-6
        worst_dual = max(worst_dual, primal.value - dual)
    worst_brute = 0.0
    for _ in range(10):
        pts = distinct_points(rng, 3)
        P1 = FiniteDistribution(pts, np.array([0.5, 0.3, 0.2]))
        P2 = FiniteDistribution(pts, np.array([0.25, 0.4, 0.35]))
        spec = HybridSpec(JS, cost_norm(), pts)
        fw = hybrid_primal(P1, P2, spec, tol=1e-8).value
        brute = hybrid_brute(P1, P2, spec, 400)
        worst_brute = max(worst_brute, abs(fw - brute))
    ok = worst_dual <= 1e-3 and worst_brute <= max(2.0 / 400, 1e-4)
    report(7, "hybrid primal-dual and grid oracle", ok,
           f"worst primal-dual gap {worst_dual:.2e}; worst oracle gap {worst_brute:.2e}")


def test_08_shift_scan_contrast():
    step = 0.1
    grid = np.round(np.arange(-0.5, 0.5 + step / 2, step), 10)
    rows = continuity_scan(grid, FiniteDistribution.delta(0.0), tol=1e-6)
    js_exact = all(
        (abs(r.theta) > 1e-9 and r.js == pytest.approx(1.0, abs=1e-12))
        or (abs(r.theta) <= 1e-9 and r.js == pytest.approx(0.0, abs=1e-12))
        for r in rows
    )
    jumps = np.abs(np.diff([r.djsw1 for r in rows]))
    max_jump = float(jumps.max())
    ok = js_exact and max_jump <= step + 2e-6
    report(8, "saturation versus hybrid continuity on the shift scan", ok,
           f"max adjacent hybrid jump {max_jump:.6f} (budget {step + 2e-6:.6f}); "
           f"unit-interval saturation exact: {js_exact}")


def test_09_quadratic_perturbation_bound():
    noise = FiniteDistribution.uniform(np.linspace(-1.0, 1.0, 7))
    family = shift_family(noise, -2.0, 2.0)
    Q = FiniteDistribution.uniform([-0.25, 0.25])
    all_ok = True
    worst_margin = -np.inf
    for theta in np.linspace(-0.9, 0.9, 10):
        chk = check_w2_perturbation_bound(family, [theta], [theta + 0.1], Q, JS, tol=1e-6)
        all_ok &= chk.ok
        worst_margin = max(worst_margin, chk.lhs - chk.rhs)
    report(9, "squared-norm hybrid perturbation bound", all_ok,
           f"largest lhs-rhs margin {worst_margin:.2e} over a 10-point sweep")


def test_10_mixture_scaling_rate():
    rows, slope = mixture_scaling([16, 64, 256, 1024], 200, "two-constant", seed=110)
    single_rows, single_slope = mixture_scaling([16, 64, 256, 1024], 50, "single", seed=110)
    singles_zero = all(r.median_err == 0.0 for r in single_rows)
    ok = slope is not None and -0.65 <= slope <= -0.35 and singles_zero and single_slope is None
    report(10, "sampled-mixture error scaling", ok,
           f"log-log slope {slope:.3f} (target [-0.65, -0.35]); single-member errors all zero: "
           f"{singles_zero}")


def test_11_perturbed_adversarial_identity():
    rng = RandomSource(111).stream()
    worst = 0.0
    for _ in range(10):
        model, data = random_pair(rng, 3)
        chk = check_perturbed_fgan_identity(model, data, JS)
        worst = max(worst, chk.gap)
    ok = worst <= 5e-3
    report(11, "quadratic-perturbation adversarial identity", ok,
           f"worst gap {worst:.2e} on 10 line instances")


def test_12_linear_generator_recovers_leading_eigenvector():
    rep = lqg_pca(2, [4.0, 1.0], 1, seed=112)
    ok = rep.alignment >= 0.99
    report(12, "linear generator aligns with the top eigenvector", ok,
           f"alignment {rep.alignment:.4f} (objective {rep.objective:.4f})")


def test_13_loss_head_gradient_validation():
    src = RandomSource(113)
    heads = [
        ("vanilla", None, 0.0),
        ("fgan", KL, 0.0),
        ("fgan", JS, 0.0),
        ("fgan-lipschitz", JS, 0.0),
        ("w1gan", None, 10.0),
        ("fgan-wrm", JS, 0.0),
    ]
    worst = 0.0
    points = 0
    for h_idx, (kind, gen, gp) in enumerate(heads):
        for rep in range(20):
            rng = src.stream(100 * h_idx + rep)
            net = MLPParams.create([2, 4, 1], "tanh", rng, scale=0.5)
            real = rng.normal(size=(3, 2))
            fake = rng.normal(size=(3, 2))

            def value(vec):
                out = gan_loss(kind, net.with_flat(vec), real, fake, gen=gen,
                               gp_weight=gp, wrm_steps=80, rng=RandomSource(7).stream())
                return out.value

            out = gan_loss(kind, net, real, fake, gen=gen, gp_weight=gp,
                           wrm_steps=80, rng=RandomSource(7).stream())
            flat = np.concatenate([g.ravel() for g, _ in out.disc_grads]
                                  + [b for _, b in out.disc_grads])
            v0 = net.flat()
            h = 1e-5
            for k in range(0, len(v0), 6):
                e = np.zeros_like(v0)
                e[k] = h
                fd = (value(v0 + e) - value(v0 - e)) / (2 * h)
                rel = abs(fd - flat[k]) / (1.0 + abs(fd))
                worst = max(worst, rel)
            points += 1
    ok = worst <= 1e-4
    report(13, "loss-head gradients vs finite differences", ok,
           f"worst relative error {worst:.2e} over {points} parameter points")


def test_14_ring_training_estimate_decreases():
    data = ring_mixture(seed=0)
    cfg = TrainConfig(
        loss_kind="fgan-lipschitz",
        generator_name="js",
        iterations=20000,
        log_every=200,
        optimizer="adam",
        disc_lr=5e-3,
        gen_lr=1e-4,
        batch_size=64,
        disc_hidden=(64, 64),
        gen_hidden=(32, 32),
        noise_dim=2,
        sn_power_iters=5,
        seed=0,
        activation="leaky-relu",
        disc_warmup=2000,
    )
    started = time.time()
    log = train(cfg, data, data)
    elapsed = time.time() - started
    iters = [r[0] for r in log.rows]
    ests = [r[2] for r in log.rows]
    rho = float(spearmanr(iters, ests).statistic)
    ok = rho <= -0.5 and elapsed < 600.0
    report(14, "ring training has a decreasing divergence estimate", ok,
           f"spearman {rho:.3f} over {len(iters)} logged points in {elapsed:.0f}s")
