"""Command-line interface: solve / simulate / verify / bounds.

Exit codes: 0 on success, 1 when verification finds more envelope failures
than the bound (plus sampling slack) allows, 2 on usage or schema errors.
All printed numbers carry 12 significant digits.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .bounds import (
    azuma_bound,
    binomial_tail,
    binomial_tail_remark_bound,
    freedman_failure_probability,
    freedman_two_term_probability,
    gronwall_continuous_bound,
    gronwall_discrete_bound,
    stability_bound,
    theorem_failure_probability,
    truncated_failure_probability,
)
from .ode import check_lambda_admissible, compute_RT, lambda_threshold, solve_ode
from .simulate import run_ensemble
from .specio import load_spec
from .verify import report_to_json, sampling_slack, verify, within_bound


def _fmt(v) -> str:
    return f"{v:.12g}"


def cmd_solve(args) -> int:
    spec, _plugin = load_spec(args.spec)
    R, T = compute_RT(spec)
    sol = solve_ode(spec, R, T)
    c = sol.constants
    admissible = check_lambda_admissible(spec, R, T)
    threshold = lambda_threshold(spec, R, T)
    print(f"R = {_fmt(c.R)}")
    print(f"T = {_fmt(c.T)}")
    print(f"sigma = {_fmt(c.sigma)}")
    print(f"margin = {_fmt(c.margin)}")
    print(
        f"lambda_admissible = {str(admissible).lower()} "
        f"(lambda = {_fmt(spec.lam)}, threshold = {_fmt(threshold)})"
    )
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t"] + [f"y_{k + 1}" for k in range(spec.a)])
            for t, row in zip(sol.ts, sol.ys):
                writer.writerow([_fmt(t)] + [_fmt(v) for v in row])
        print(f"grid written to {args.out} ({len(sol.ts)} rows)")
    return 0


def cmd_simulate(args) -> int:
    spec, plugin = load_spec(args.spec)
    sol = solve_ode(spec) if args.deviations else None
    ensemble = run_ensemble(
        plugin,
        spec,
        args.count,
        args.seed,
        solution=sol,
        full_paths=args.full,
        jobs=args.jobs,
    )
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    for idx, traj in enumerate(ensemble.trajectories):
        flags = {}
        for v in traj.violations:
            flags[v.i] = flags.get(v.i, 0) | (1 if v.kind == "trend" else 2)
        path = outdir / f"traj_{idx:04d}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["i"]
                + [f"Y_{k + 1}" for k in range(spec.a)]
                + [f"drift_{k + 1}" for k in range(spec.a)]
                + ["flags"]
            )
            for i, y_row, d_row in zip(traj.indices, traj.steps, traj.drifts):
                writer.writerow(
                    [int(i)]
                    + [int(v) for v in y_row]
                    + [_fmt(v) for v in d_row]
                    + [flags.get(int(i), 0)]
                )
        line = f"{path}: stop_index = {traj.stop_index}, seed = {traj.seed}"
        if traj.sup_deviation is not None:
            line += f", sup_deviation = {_fmt(traj.sup_deviation)}"
        print(line)
    return 0


def cmd_verify(args) -> int:
    spec, plugin = load_spec(args.spec)
    if args.mode == "truncated" and (
        spec.trunc_gamma is None or spec.trunc_bound is None or spec.trunc_x is None
    ):
        raise ValueError(
            "truncated mode needs extensions.gamma, extensions.B and extensions.x "
            "in the spec file"
        )
    if args.mode == "averaged" and spec.avg_step_bound is None:
        b = plugin.avg_step_bound(spec)
        if b is None:
            raise ValueError("averaged mode needs extensions.b in the spec file")
    report = verify(
        spec,
        plugin,
        args.count,
        args.seed,
        mode=args.mode,
        jobs=args.jobs,
        replay_check=not args.no_replay,
    )
    if args.report:
        report_to_json(report, args.report)
    c = report.constants
    print(f"mode = {report.mode}, trajectories = {report.count}")
    print(
        f"R = {_fmt(c.R)}, T = {_fmt(c.T)}, sigma = {_fmt(c.sigma)}, "
        f"margin = {_fmt(c.margin)}"
    )
    print(f"envelope = {_fmt(report.envelope)} (counts)")
    shown = min(report.failure_probability, 1.0)
    note = " (clamped for display)" if report.failure_probability > 1.0 else ""
    print(f"failure probability bound = {_fmt(shown)}{note}")
    if report.vacuous:
        print("sigma = 0: guarantee vacuous over an empty range")
        return 0
    devs = report.empirical_sup_deviations
    print(
        f"empirical sup deviation: max = {_fmt(max(devs))}, "
        f"median = {_fmt(sorted(devs)[len(devs) // 2])}"
    )
    print(f"failures = {report.failure_count} / {report.count}")
    print(f"martingale bound exceeded in {report.martingale_exceed_count} trajectories")
    if report.hypotheses_failed:
        print(
            f"hypotheses-failed: {report.trend_violation_count} trend / "
            f"{report.bound_violation_count} bound violations"
        )
    ok = within_bound(report)
    slack = sampling_slack(report.failure_probability, report.count)
    print(
        f"verdict: {'PASS' if ok else 'FAIL'} "
        f"(failure fraction {_fmt(report.failure_count / report.count)} vs "
        f"bound {_fmt(shown)} + slack {_fmt(slack)})"
    )
    return 0 if ok else 1


def cmd_bounds(args) -> int:
    kind = args.kind
    if kind == "azuma":
        v = azuma_bound(args.m, args.c, args.t)
    elif kind == "theorem":
        v = theorem_failure_probability(args.a, args.n, args.lam, args.T, args.beta)
    elif kind == "freedman":
        v = freedman_failure_probability(args.a, args.n, args.lam, args.T, args.beta, args.b)
    elif kind == "freedman-two-term":
        v = freedman_two_term_probability(args.a, args.n, args.lam, args.T, args.beta, args.b)
    elif kind == "gronwall-discrete":
        v = gronwall_discrete_bound(args.c, args.b, args.a, args.m)
    elif kind == "gronwall-continuous":
        v = gronwall_continuous_bound(args.C, args.L, args.t)
    elif kind == "stability":
        v = stability_bound(args.lam, args.delta, args.L, args.T)
    elif kind == "binomial-tail":
        v = binomial_tail(args.m, args.gamma, args.k)
    elif kind == "binomial-remark":
        v = binomial_tail_remark_bound(args.m, args.gamma, args.x)
    elif kind == "truncated":
        v = truncated_failure_probability(
            args.a, args.n, args.lam, args.T, args.beta, args.gamma, args.x
        )
    else:  # pragma: no cover - argparse restricts choices
        raise ValueError(f"unknown bound {kind!r}")
    print(_fmt(v))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="demtrack",
        description="Track discrete random processes against their limiting ODEs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve the limiting ODE and print constants")
    p.add_argument("spec", help="spec JSON file")
    p.add_argument("--out", help="write the solution grid as CSV")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="simulate trajectories to CSV files")
    p.add_argument("spec")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--full", action="store_true", help="record every step")
    p.add_argument("--deviations", action="store_true", help="track ODE deviations")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="verify the concentration envelope")
    p.add_argument("spec")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("plain", "averaged", "truncated"), default="plain")
    p.add_argument("--report", help="write the JSON report here")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-replay", action="store_true", help="skip the recurrence replay")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bounds", help="evaluate one closed-form bound")
    bsub = p.add_subparsers(dest="kind", required=True)

    q = bsub.add_parser("azuma")
    q.add_argument("--m", type=int, required=True)
    q.add_argument("--c", type=float, required=True)
    q.add_argument("--t", type=float, required=True)

    for name in ("theorem",):
        q = bsub.add_parser(name)
        _common_prob_args(q)

    for name in ("freedman", "freedman-two-term"):
        q = bsub.add_parser(name)
        _common_prob_args(q)
        q.add_argument("--b", type=float, required=True)

    q = bsub.add_parser("gronwall-discrete")
    q.add_argument("--c", type=float, required=True)
    q.add_argument("--b", type=float, required=True)
    q.add_argument("--a", type=float, required=True)
    q.add_argument("--m", type=int, required=True)

    q = bsub.add_parser("gronwall-continuous")
    q.add_argument("--C", type=float, required=True)
    q.add_argument("--L", type=float, required=True)
    q.add_argument("--t", type=float, required=True)

    q = bsub.add_parser("stability")
    q.add_argument("--lam", type=float, required=True)
    q.add_argument("--delta", type=float, required=True)
    q.add_argument("--L", type=float, required=True)
    q.add_argument("--T", type=float, required=True)

    q = bsub.add_parser("binomial-tail")
    q.add_argument("--m", type=int, required=True)
    q.add_argument("--gamma", type=float, required=True)
    q.add_argument("--k", type=int, required=True)

    q = bsub.add_parser("binomial-remark")
    q.add_argument("--m", type=int, required=True)
    q.add_argument("--gamma", type=float, required=True)
    q.add_argument("--x", type=float, required=True)

    q = bsub.add_parser("truncated")
    _common_prob_args(q)
    q.add_argument("--gamma", type=float, required=True)
    q.add_argument("--x", type=float, required=True)

    p.set_defaults(func=cmd_bounds)
    return parser


def _common_prob_args(q) -> None:
    q.add_argument("--a", type=int, required=True)
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--lam", "--lambda", dest="lam", type=float, required=True)
    q.add_argument("--T", type=float, required=True)
    q.add_argument("--beta", type=float, required=True)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
