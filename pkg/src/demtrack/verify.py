"""End-to-end verification harness for the dynamic-concentration guarantee.

Assembles constants, probability bounds, and a simulated ensemble into a
pass/fail report: the theoretical envelope 3*exp(L*T)*lambda*n is compared
against every trajectory's sup-deviation from the ODE path over
0 <= i <= sigma*n (truncated at the first failure of an optional side
event). Verification is a pure reduction over independent trajectories and
is deterministic for fixed inputs.
"""

from __future__ import annotations

import json
import math
from dataclasses import replace
from typing import Callable, Sequence

import numpy as np

from .bounds import (
    freedman_failure_probability,
    theorem_failure_probability,
    truncated_failure_probability,
)
from .core import (
    Constants,
    LambdaNotAdmissible,
    ProcessSpec,
    VerificationReport,
    check_initial_condition,
)
from .ode import check_lambda_admissible, compute_RT, lambda_threshold, solve_ode
from .processes import ProcessPlugin
from .simulate import run_ensemble

MODES = ("plain", "averaged", "truncated")


def _resolve_extension_params(spec: ProcessSpec, plugin: ProcessPlugin, mode: str):
    """(b, gamma, B, x) for the mode, preferring spec values over plugin defaults."""
    b = gamma = B = x = 0.0
    if mode == "averaged":
        b = spec.avg_step_bound
        if b is None:
            b = plugin.avg_step_bound(spec)
        if b is None:
            raise ValueError("averaged mode needs an average step bound b")
    elif mode == "truncated":
        gamma, B = spec.trunc_gamma, spec.trunc_bound
        if gamma is None or B is None:
            declared = plugin.truncation(spec)
            if declared is None:
                raise ValueError("truncated mode needs gamma and B")
            gamma = declared[0] if gamma is None else gamma
            B = declared[1] if B is None else B
        x = spec.trunc_x
        if x is None:
            raise ValueError("truncated mode needs the oversized-step budget x")
    return b, gamma, B, x


def _failure_probability(spec: ProcessSpec, T: float, mode: str, b, gamma, x) -> float:
    if mode == "plain":
        return theorem_failure_probability(spec.a, spec.n, spec.lam, T, spec.beta)
    if mode == "averaged":
        return freedman_failure_probability(spec.a, spec.n, spec.lam, T, spec.beta, b)
    return truncated_failure_probability(
        spec.a, spec.n, spec.lam, T, spec.beta, gamma, x
    )


def _gw_final_inequality(spec: ProcessSpec, c: Constants) -> bool:
    """(2*lam*n + [R + delta*min(Tn, n/L)]) * exp(L*m/n) <= 3*lam*n*exp(L*T) at all m <= sigma*n."""
    n = spec.n
    horizon_n = T_n = c.T * n
    if spec.L > 0:
        horizon_n = min(T_n, n / spec.L)
    lhs_base = 2.0 * spec.lam * n + (c.R + spec.delta * horizon_n)
    rhs = 3.0 * spec.lam * n * math.exp(spec.L * c.T)
    ms = np.arange(math.floor(c.sigma * n + 1e-9) + 1)
    return bool(np.all(lhs_base * np.exp(spec.L * ms / n) <= rhs))


def verify(
    spec: ProcessSpec,
    plugin: ProcessPlugin,
    count: int,
    base_seed: int,
    mode: str = "plain",
    event_predicate: Callable[[int, tuple], bool] | None = None,
    *,
    replay_check: bool = True,
    jobs: int = 1,
    anchor: tuple[float, ...] | None = None,
) -> VerificationReport:
    """Solve, simulate, and check the envelope; raises if lambda is inadmissible.

    ``mode`` selects the failure-probability bound: 'plain' (worst-case step
    bound beta), 'averaged' (conditional mean absolute step at most b), or
    'truncated' (steps exceed beta with probability at most gamma, hard cap
    B, budget x). An ``event_predicate`` restricts the deviation range per
    side-event semantics and relabels plain mode as 'side-events'.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    b, gamma, B, x = _resolve_extension_params(spec, plugin, mode)
    R, T = compute_RT(spec)
    threshold = lambda_threshold(spec, R, T, gamma=gamma, B=B, x=x)
    if not check_lambda_admissible(spec, R, T, gamma=gamma, B=B, x=x):
        raise LambdaNotAdmissible(
            f"lambda={spec.lam} < (delta + gamma*B)*min(T, 1/L) + (R + x*B)/n"
            f" = {threshold}"
        )
    solution = solve_ode(spec, R, T)
    c = solution.constants
    n = spec.n
    envelope = c.margin * n
    lam_n = spec.lam * n
    reported_mode = mode
    if event_predicate is not None and mode == "plain":
        reported_mode = "side-events"
    failure_probability = _failure_probability(spec, T, mode, b, gamma, x)
    gw_holds = _gw_final_inequality(spec, c)

    if c.sigma == 0.0:
        return VerificationReport(
            mode=reported_mode,
            plugin=spec.plugin_name,
            count=count,
            base_seed=int(base_seed),
            constants=c,
            envelope=envelope,
            lambda_value=spec.lam,
            lambda_threshold=threshold,
            lambda_admissible=True,
            failure_probability=failure_probability,
            failure_count=0,
            empirical_sup_deviations=(),
            martingale_bound=lam_n,
            martingale_exceed_count=0,
            trend_violation_count=0,
            bound_violation_count=0,
            trajectories_with_violations=0,
            hypotheses_failed=False,
            vacuous=True,
            gw_final_inequality_holds=gw_holds,
            event_predicate_active=event_predicate is not None,
            anchor=anchor,
        )

    ensemble = run_ensemble(
        plugin,
        spec,
        count,
        base_seed,
        event_predicate,
        solution=solution,
        replay_check=replay_check,
        jobs=jobs,
    )
    for idx, traj in enumerate(ensemble.trajectories):
        if not traj.valid:
            raise RuntimeError(
                f"trajectory {idx} failed at step {traj.error_step}; cannot verify"
            )
        if not check_initial_condition(spec, traj.steps[0]):
            raise ValueError(
                f"trajectory {idx} violates the initial condition "
                f"max_k |Y_k(0) - y_hat_k*n| <= lambda*n"
            )

    sup_devs = tuple(t.sup_deviation for t in ensemble.trajectories)
    failure_count = sum(1 for d in sup_devs if d >= envelope)
    mart_exceed = sum(1 for t in ensemble.trajectories if t.sup_martingale >= lam_n)
    trend = sum(
        sum(1 for v in t.violations if v.kind == "trend") for t in ensemble.trajectories
    )
    bound = sum(
        sum(1 for v in t.violations if v.kind == "bound") for t in ensemble.trajectories
    )
    dirty = sum(1 for t in ensemble.trajectories if t.violations)

    replay_checked = replay_failures = None
    if replay_check:
        holders = [t for t in ensemble.trajectories if t.sup_martingale < lam_n]
        replay_checked = len(holders)
        replay_failures = sum(1 for t in holders if t.replay_ok is False)

    event_stops = None
    if event_predicate is not None:
        event_stops = tuple(
            t.event_stop if t.event_stop is not None else -1
            for t in ensemble.trajectories
        )

    return VerificationReport(
        mode=reported_mode,
        plugin=spec.plugin_name,
        count=count,
        base_seed=int(base_seed),
        constants=c,
        envelope=envelope,
        lambda_value=spec.lam,
        lambda_threshold=threshold,
        lambda_admissible=True,
        failure_probability=failure_probability,
        failure_count=failure_count,
        empirical_sup_deviations=sup_devs,
        martingale_bound=lam_n,
        martingale_exceed_count=mart_exceed,
        trend_violation_count=trend,
        bound_violation_count=bound,
        trajectories_with_violations=dirty,
        hypotheses_failed=dirty > 0,
        vacuous=False,
        gw_final_inequality_holds=gw_holds,
        replay_checked=replay_checked,
        replay_failures=replay_failures,
        event_predicate_active=event_predicate is not None,
        event_stops=event_stops,
        anchor=anchor,
    )


def verify_multi_anchor(
    spec: ProcessSpec,
    plugin: ProcessPlugin,
    count: int,
    base_seed: int,
    anchors: Sequence[Sequence[float]],
    mode: str = "plain",
    *,
    jobs: int = 1,
) -> list[VerificationReport]:
    """Verify the envelope against each anchor's re-solved ODE path.

    The continuum relaxation of the initial condition (the envelope holding
    simultaneously for every admissible anchor) is approximated by this
    finite anchor set. All anchors share ``base_seed``, hence see identical
    trajectories, so the per-anchor reports jointly check one realization.
    Each anchor must lie in the domain and within lambda*n of the process's
    deterministic initial counts; offenders are rejected with their index.
    """
    if not anchors:
        raise ValueError("need at least one anchor")
    y0 = plugin.observables(plugin.initial_state())
    reports = []
    for idx, anchor in enumerate(anchors):
        anchor = tuple(float(v) for v in anchor)
        if len(anchor) != spec.a:
            raise ValueError(f"anchor {idx} has wrong dimension {len(anchor)}")
        if not spec.domain.contains((0.0, *anchor)):
            raise ValueError(f"anchor {idx} lies outside the domain: {anchor}")
        offset = max(abs(v - h * spec.n) for v, h in zip(y0, anchor))
        if offset > spec.lam * spec.n:
            raise ValueError(
                f"anchor {idx} violates max_k |Y_k(0) - y_hat_k*n| <= lambda*n "
                f"(offset {offset}, allowed {spec.lam * spec.n})"
            )
        anchored = replace(spec, y_hat=anchor)
        reports.append(
            verify(
                anchored,
                plugin,
                count,
                base_seed,
                mode=mode,
                jobs=jobs,
                anchor=anchor,
            )
        )
    return reports


def report_to_json(report: VerificationReport, path) -> None:
    """Write the versioned JSON form of a report."""
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")


def sampling_slack(p: float, count: int) -> float:
    """Three-sigma binomial sampling slack for an empirical failure fraction."""
    p = min(max(p, 0.0), 1.0)
    return 3.0 * math.sqrt(p * (1.0 - p) / count)


def within_bound(report: VerificationReport) -> bool:
    """Empirical failure fraction <= failure probability + sampling slack."""
    if report.vacuous:
        return True
    frac = report.failure_count / report.count
    p = min(report.failure_probability, 1.0)
    return frac <= p + sampling_slack(p, report.count)
