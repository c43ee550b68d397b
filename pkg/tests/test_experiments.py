import numpy as np
import pytest

from ganduality import FiniteDistribution, save_distribution_csv
from ganduality.cli import main
from ganduality.experiments import (
    build_mixture_family,
    continuity_scan,
    duality_sweep,
    evaluate_divergence,
    gaussian_grid,
    gaussian_grid_1d,
    lqg_pca,
    mixture_scaling,
    ring_mixture,
    train_toy,
)
from ganduality.neuralgan import TrainConfig
from ganduality.plotting import line_plot_svg

GOLDEN = __file__.rsplit("/", 1)[0] + "/golden"


class TestDatasets:
    def test_gaussian_grid_1d_moments(self):
        P = gaussian_grid_1d(0.3, 2.0, atoms=256)
        mean = float(P.weights @ P.points[:, 0])
        var = float(P.weights @ (P.points[:, 0] - mean) ** 2)
        assert mean == pytest.approx(0.3, abs=1e-9)
        assert var == pytest.approx(4.0, rel=0.05)

    def test_gaussian_grid_product(self):
        P = gaussian_grid([4.0, 1.0], per_axis=8)
        assert P.size == 64
        cov = (P.points * P.weights[:, None]).T @ P.points
        assert cov[0, 0] > cov[1, 1]

    def test_ring_dataset_shape(self):
        P = ring_mixture(seed=1, modes=8, per_mode=16)
        assert P.size == 128
        radii = np.linalg.norm(P.points, axis=1)
        assert np.all((radii > 0.6) & (radii < 1.4))


class TestContinuityScan:
    def test_js_saturates_and_hybrid_is_lipschitz(self):
        grid = np.round(np.arange(-0.5, 0.51, 0.1), 10)
        rows = continuity_scan(grid, FiniteDistribution.delta(0.0), tol=1e-8)
        for r in rows:
            if abs(r.theta) > 1e-9:
                assert r.js == pytest.approx(1.0, abs=1e-12)
                assert r.djsw1 <= abs(r.theta) + 1e-8
            else:
                assert r.js == pytest.approx(0.0, abs=1e-12)
        jumps = np.abs(np.diff([r.djsw1 for r in rows]))
        assert np.all(jumps <= 0.1 + 2e-8)

    def test_same_candidate_support_across_cells(self):
        rows = continuity_scan([0.0, 0.25], FiniteDistribution.delta(0.0), tol=1e-8)
        assert rows[0].djsw1 == pytest.approx(0.0, abs=1e-9)
        assert rows[1].djsw1 == pytest.approx(0.25, abs=1e-6)


class TestDualitySweep:
    def test_span_kl_gaps_small(self):
        rows = duality_sweep("kl", "span:1", trials=3, seed=4)
        for r in rows:
            assert r.gap <= 1e-3 * (1.0 + max(abs(r.lhs), abs(r.rhs)))

    def test_hybrid_route(self):
        rows = duality_sweep("hyb-js-w1", "lip:1", trials=2, seed=4)
        for r in rows:
            assert r.gap <= 1e-3


class TestMixtureScaling:
    def test_single_member_slope_undefined(self):
        rows, slope = mixture_scaling([4, 16], 20, "single", seed=2)
        assert all(r.median_err == 0.0 for r in rows)
        assert slope is None

    def test_two_constant_family_slope(self):
        rows, slope = mixture_scaling([16, 64, 256, 1024], 200, "two-constant", seed=0)
        assert slope is not None
        assert -0.65 <= slope <= -0.35

    def test_mlp_family_decreasing(self):
        rows, _ = mixture_scaling([16, 64, 256], 60, "mlp:8", seed=3)
        meds = [r.median_err for r in rows]
        assert meds[0] > meds[1] > meds[2]

    def test_family_specs(self):
        members, alpha, grid = build_mixture_family("mlp:3", seed=1)
        assert len(members) == 3 and len(alpha) == 3 and grid.ndim == 2


class TestLqgPca:
    def test_anisotropic_alignment(self):
        rep = lqg_pca(2, [4.0, 1.0], 1, seed=0)
        assert rep.alignment >= 0.99

    def test_isotropic_objective_flat(self):
        vals = [lqg_pca(2, [1.0, 1.0], 1, seed=s).objective for s in (0, 1, 2)]
        assert max(vals) - min(vals) <= 0.05 * (1.0 + max(vals))

    def test_full_rank_near_zero(self):
        rep = lqg_pca(2, [1.0, 0.5], 2, seed=0, data_per_axis=6, noise_atoms=36, iters=200)
        assert rep.objective <= 0.2


class TestTrainToy:
    def test_zero_iteration_run(self):
        cfg = TrainConfig(iterations=0, noise_dim=1, disc_hidden=(4,), gen_hidden=(4,), seed=1)
        results = train_toy(cfg, ["vanilla"], "gauss1d")
        assert len(results[0].rows) == 1
        assert np.isnan(results[0].spearman)

    def test_vanilla_saturates_on_disjoint_supports(self):
        # point-mass data vs a spread-out generator: with no Lipschitz
        # control the logistic objective saturates, pinning the implied
        # unit-interval divergence estimate near its ceiling
        cfg = TrainConfig(loss_kind="vanilla", iterations=800, log_every=50,
                          optimizer="adam", disc_lr=1e-2, gen_lr=1e-4, batch_size=32,
                          disc_hidden=(16, 16), gen_hidden=(8,), noise_dim=1,
                          seed=9, disc_warmup=2500)
        results = train_toy(cfg, ["vanilla"], "shifted-delta")
        ests = np.array([row[2] for row in results[0].rows])
        bits = ests / (2.0 * np.log(2.0)) + 1.0
        near_ceiling = np.mean(np.abs(bits - 1.0) <= 0.05)
        assert near_ceiling >= 0.8


class TestPlotting:
    @pytest.mark.parametrize("name,series,kwargs", [
        ("pair", [("rising", np.linspace(0, 1, 9), np.linspace(0, 1, 9) ** 2),
                  ("falling", np.linspace(0, 1, 9), 1.0 - np.linspace(0, 1, 9))],
         dict(title="pair", x_label="x", y_label="y")),
        ("scatter", [("dots", np.array([0.0, 0.5, 1.0]), np.array([1.0, -1.0, 0.5]))],
         dict(title="scatter", scatter=True)),
        ("flat", [("flat", np.array([0.0, 1.0]), np.array([2.0, 2.0]))], dict(title="flat")),
    ])
    def test_golden_files(self, name, series, kwargs):
        rendered = line_plot_svg(series, **kwargs)
        assert rendered == open(f"{GOLDEN}/{name}.svg").read()


class TestCli:
    def dist_files(self, tmp_path, rng):
        P = FiniteDistribution.uniform(np.array([[0.0], [1.0]]))
        Q = FiniteDistribution(np.array([[0.0], [1.0]]), np.array([0.7, 0.3]))
        pa, qa = tmp_path / "p.csv", tmp_path / "q.csv"
        save_distribution_csv(P, pa)
        save_distribution_csv(Q, qa)
        return str(pa), str(qa)

    def test_divergence_command(self, tmp_path, rng, capsys):
        pa, qa = self.dist_files(tmp_path, rng)
        code = main(["divergence", "--kind", "w1", pa, qa, "--out", str(tmp_path)])
        assert code == 0
        out = capsys.readouterr().out
        assert float(out.split("value: ")[1].splitlines()[0]) == pytest.approx(0.2)
        plan = (tmp_path / "plan.csv").read_text()
        assert plan.startswith("# command:")
        assert "i,j,mass" in plan

    def test_hybrid_divergence_command(self, tmp_path, rng, capsys):
        pa, qa = self.dist_files(tmp_path, rng)
        code = main(["divergence", "--kind", "hyb-js-w1", pa, qa])
        assert code == 0
        out = capsys.readouterr().out
        assert "fw_gap" in out and "dual_lower_bound" in out

    def test_duality_check_exit_codes(self, tmp_path, capsys):
        code = main(["duality-check", "--divergence", "kl", "--class", "span:1",
                     "--trials", "2", "--seed", "3", "--tol", "1e-3",
                     "--out", str(tmp_path)])
        assert code == 0
        strict = main(["duality-check", "--divergence", "kl", "--class", "span:1",
                       "--trials", "2", "--seed", "3", "--tol", "1e-16"])
        assert strict == 1

    def test_continuity_scan_outputs_are_reproducible(self, tmp_path, capsys):
        argv = ["continuity-scan", "--theta-min", "-0.2", "--theta-max", "0.2",
                "--theta-step", "0.1", "--tol", "1e-8", "--out", str(tmp_path)]
        assert main(argv) == 0
        first = (tmp_path / "continuity_scan.csv").read_bytes()
        assert main(argv) == 0
        assert (tmp_path / "continuity_scan.csv").read_bytes() == first
        assert (tmp_path / "continuity_scan.svg").exists()

    def test_mixture_scaling_command(self, tmp_path, capsys):
        code = main(["mixture-scaling", "--m-list", "4,16", "--repetitions", "10",
                     "--family", "single", "--seed", "1", "--out", str(tmp_path)])
        assert code == 0
        assert "undefined" in capsys.readouterr().out

    def test_train_toy_command(self, tmp_path, capsys):
        cfg = TrainConfig(iterations=10, log_every=5, noise_dim=1,
                          disc_hidden=(4,), gen_hidden=(4,), seed=2, batch_size=8)
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(cfg.to_json())
        code = main(["train-toy", "--config", str(cfg_path), "--losses", "vanilla",
                     "--dataset", "gauss1d", "--out", str(tmp_path)])
        assert code == 0
        assert (tmp_path / "train_vanilla.csv").exists()
        assert (tmp_path / "train_overlay.svg").exists()

    def test_usage_error_exit_code(self):
        with pytest.raises(SystemExit) as exc:
            main(["divergence", "--kind", "nope", "a", "b"])
        assert exc.value.code == 2

    def test_missing_file_is_config_error(self, capsys):
        assert main(["divergence", "--kind", "w1", "/nonexistent/a.csv", "/nonexistent/b.csv"]) == 2
