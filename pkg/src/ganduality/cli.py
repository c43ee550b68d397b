"""Command-line entry point.

Subcommands: divergence, duality-check, continuity-scan, train-toy,
mixture-scaling, lqg-pca. Every output file starts with comment lines
recording the command, the seed, and the tool version; re-running with the
same configuration writes byte-identical files. Exit codes: 0 when all
checks pass, 1 on a tolerance violation, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .distributions import FiniteDistribution, load_distribution_csv
from .errors import GandualityError
from .experiments import (
    DIVERGENCE_KINDS,
    continuity_scan,
    duality_sweep,
    evaluate_divergence,
    lqg_pca,
    mixture_scaling,
    output_header,
    train_toy,
)
from .neuralgan import TrainConfig
from .plotting import line_plot_svg


def _write_lines(path: Path, lines: list[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")


def _cmd_string(args: argparse.Namespace) -> str:
    skip = {"func", "out"}
    parts = [args.command]
    for key, val in sorted(vars(args).items()):
        if key in skip or key == "command":
            continue
        parts.append(f"--{key.replace('_', '-')}={val}")
    return " ".join(parts)


def cmd_divergence(args) -> int:
    P = load_distribution_csv(args.p)
    Q = load_distribution_csv(args.q)
    candidate = load_distribution_csv(args.candidate_grid).points if args.candidate_grid else None
    report = evaluate_divergence(args.kind, P, Q, tol=args.tol, candidate=candidate)
    print(f"value: {report['value']!r}")
    if "fw_gap" in report:
        print(f"fw_gap: {report['fw_gap']!r}")
        print(f"dual_lower_bound: {report['dual_lower_bound']!r}")
    if args.out and "plan" in report:
        plan = report["plan"]
        lines = output_header(_cmd_string(args), "-") + ["i,j,mass"]
        for i in range(plan.mass.shape[0]):
            for j in range(plan.mass.shape[1]):
                if plan.mass[i, j] > 0:
                    lines.append(f"{i},{j},{plan.mass[i, j]!r}")
        _write_lines(Path(args.out) / "plan.csv", lines)
    return 0


def cmd_duality_check(args) -> int:
    rows = duality_sweep(args.divergence, args.cls, args.trials, args.seed)
    lines = output_header(_cmd_string(args), args.seed) + ["trial,lhs,rhs,gap"]
    worst = 0.0
    for row in rows:
        rel = row.gap / (1.0 + max(abs(row.lhs), abs(row.rhs)))
        worst = max(worst, rel)
        lines.append(f"{row.trial},{row.lhs!r},{row.rhs!r},{row.gap!r}")
    if args.out:
        _write_lines(Path(args.out) / "duality_check.csv", lines)
    print(f"trials: {len(rows)}  worst relative gap: {worst!r}")
    return 0 if worst <= args.tol else 1


def cmd_continuity_scan(args) -> int:
    grid = np.arange(args.theta_min, args.theta_max + 0.5 * args.theta_step, args.theta_step)
    reference = (
        load_distribution_csv(args.reference)
        if args.reference
        else FiniteDistribution.delta(0.0)
    )
    rows = continuity_scan(grid, reference, tol=args.tol)
    lines = output_header(_cmd_string(args), "-") + ["theta,js,djsw1,djsw2,w1"]
    for r in rows:
        lines.append(f"{r.theta!r},{r.js!r},{r.djsw1!r},{r.djsw2!r},{r.w1!r}")
    out = Path(args.out)
    _write_lines(out / "continuity_scan.csv", lines)
    thetas = np.array([r.theta for r in rows])
    svg = line_plot_svg(
        [
            ("js (bits)", thetas, np.array([r.js for r in rows])),
            ("hybrid w1", thetas, np.array([r.djsw1 for r in rows])),
            ("hybrid w2", thetas, np.array([r.djsw2 for r in rows])),
            ("w1", thetas, np.array([r.w1 for r in rows])),
        ],
        title="continuity scan",
        x_label="theta",
        y_label="divergence",
    )
    (out / "continuity_scan.svg").write_text(svg)
    jumps = np.abs(np.diff([r.djsw1 for r in rows]))
    ok = bool(np.all(jumps <= args.theta_step + 2 * args.tol))
    print(f"cells: {len(rows)}  max hybrid jump: {float(jumps.max()) if len(jumps) else 0.0!r}")
    return 0 if ok else 1


def cmd_train_toy(args) -> int:
    if args.config:
        base = TrainConfig.from_json(Path(args.config).read_text())
    else:
        base = TrainConfig(
            iterations=args.iterations,
            seed=args.seed,
            log_every=args.log_every,
            optimizer="adam",
            disc_lr=1e-3,
            gen_lr=1e-3,
        )
    results = train_toy(base, args.losses.split(","), args.dataset)
    out = Path(args.out)
    series = []
    for res in results:
        lines = output_header(_cmd_string(args), base.seed) + [
            "iter,disc_loss_train,divergence_estimate_val,gen_param_hash"
        ]
        for it, train_loss, est, h in res.rows:
            lines.append(f"{it},{train_loss!r},{est!r},{h}")
        _write_lines(out / f"train_{res.loss_kind}.csv", lines)
        iters = np.array([r[0] for r in res.rows], dtype=float)
        ests = np.array([r[2] for r in res.rows])
        series.append((res.loss_kind, iters, ests))
        print(f"{res.loss_kind}: spearman(estimate, iter) = {res.spearman!r}")
    (out / "train_overlay.svg").write_text(
        line_plot_svg(series, title=f"divergence estimates ({args.dataset})",
                      x_label="iteration", y_label="estimate")
    )
    return 0


def cmd_mixture_scaling(args) -> int:
    m_list = [int(tok) for tok in args.m_list.split(",")]
    rows, slope = mixture_scaling(m_list, args.repetitions, args.family, args.seed)
    lines = output_header(_cmd_string(args), args.seed) + ["m,median_err,q25,q75"]
    for r in rows:
        lines.append(f"{r.m},{r.median_err!r},{r.q25!r},{r.q75!r}")
    slope_text = "undefined" if slope is None else repr(slope)
    lines.append(f"# slope: {slope_text}")
    if args.out:
        _write_lines(Path(args.out) / "mixture_scaling.csv", lines)
    print(f"log-log slope of the median error: {slope_text}")
    return 0


def cmd_lqg_pca(args) -> int:
    cov = [float(tok) for tok in args.cov.split(",")]
    report = lqg_pca(len(cov), cov, args.r, args.seed)
    print(f"objective: {report.objective!r}")
    print(f"alignment: {report.alignment!r}")
    print(f"stalled-at-stationary: {report.converged}")
    if args.out:
        lines = output_header(_cmd_string(args), args.seed) + [
            "objective,alignment",
            f"{report.objective!r},{report.alignment!r}",
        ]
        _write_lines(Path(args.out) / "lqg_pca.csv", lines)
    return 0 if report.alignment >= args.min_alignment else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ganduality",
        description="divergences, transport, hybrid divergences, and toy GAN experiments",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("divergence", help="evaluate a divergence between two distribution files")
    p.add_argument("--kind", required=True, choices=DIVERGENCE_KINDS)
    p.add_argument("p", help="first distribution CSV (w,x1,...,xk)")
    p.add_argument("q", help="second distribution CSV")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--candidate-grid", default=None, help="extra candidate atoms CSV for hybrids")
    p.add_argument("--out", default=None, help="directory for the plan CSV")
    p.set_defaults(func=cmd_divergence)

    p = sub.add_parser("duality-check", help="identity gaps on random instances")
    p.add_argument("--divergence", required=True,
                   choices=["js", "kl", "sqhellinger", "w1", "hyb-js-w1", "hyb-sh-w1",
                            "hyb-js-w2", "hyb-sh-w2"])
    p.add_argument("--class", dest="cls", default="all",
                   help="all, span:<degree>, or lip:<L> (ignored for hybrid kinds)")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_duality_check)

    p = sub.add_parser("continuity-scan", help="divergences of a shifted family vs a reference")
    p.add_argument("--theta-min", type=float, default=-0.5)
    p.add_argument("--theta-max", type=float, default=0.5)
    p.add_argument("--theta-step", type=float, default=0.1)
    p.add_argument("--reference", default=None, help="reference distribution CSV (default: point mass at 0)")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_continuity_scan)

    p = sub.add_parser("train-toy", help="train the toy GAN for one or more loss kinds")
    p.add_argument("--config", default=None, help="TrainConfig JSON file")
    p.add_argument("--losses", default="vanilla", help="comma-separated loss kinds")
    p.add_argument("--dataset", default="ring", choices=["ring", "gauss1d", "shifted-delta"])
    p.add_argument("--iterations", type=int, default=500)
    p.add_argument("--log-every", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_toy)

    p = sub.add_parser("mixture-scaling", help="sup-error of sampled mixtures vs size")
    p.add_argument("--m-list", default="16,64,256,1024")
    p.add_argument("--repetitions", type=int, default=200)
    p.add_argument("--family", default="two-constant")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_mixture_scaling)

    p = sub.add_parser("lqg-pca", help="linear generator recovery of the leading eigenspace")
    p.add_argument("--cov", default="4,1", help="diagonal covariance entries")
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-alignment", type=float, default=0.99)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_lqg_pca)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GandualityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
