"""Trajectory simulation with exact drift recording and online verification stats.

The stopping index of a trajectory is the first step at which the rescaled
state leaves the domain, capped at floor(T*n). Sup-deviation from the ODE
path, the sup of the martingale part, and the recurrence replay are all
accumulated online, so the default thinned storage (every ceil(n/1000)-th
step) never affects verification.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import Ensemble, ProcessSpec, Trajectory, Violation
from .ode import OdeSolution
from .processes import ProcessPlugin


def derive_seed(base_seed: int, index: int) -> int:
    """64-bit per-trajectory seed hashed from (base_seed, index).

    Order-independent, so ensembles are identical across worker counts.
    """
    ss = np.random.SeedSequence(int(base_seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class _SimPrep:
    """Per-spec data shared by every trajectory of an ensemble."""

    yode: list          # n * y_k(i/n) as nested python lists, rows 0..cap
    cap: int            # min(floor(T*n), floor(sigma*n))
    lam_n: float
    two_lam_n: float
    step_term: float    # L*R/n + delta, the per-step additive recurrence term
    L_over_n: float


def _prepare(spec: ProcessSpec, solution: OdeSolution) -> _SimPrep:
    n = spec.n
    c = solution.constants
    cap = min(math.floor(c.T * n), math.floor(c.sigma * n + 1e-9))
    yode = solution.counts_at_steps(cap).tolist()
    lam_n = spec.lam * n
    return _SimPrep(
        yode=yode,
        cap=cap,
        lam_n=lam_n,
        two_lam_n=2.0 * lam_n,
        step_term=spec.L * c.R / n + spec.delta,
        L_over_n=spec.L / n,
    )


def simulate(
    plugin: ProcessPlugin,
    spec: ProcessSpec,
    seed: int,
    *,
    solution: OdeSolution | None = None,
    full_paths: bool = False,
    event_predicate: Callable[[int, tuple], bool] | None = None,
    replay_check: bool = False,
) -> Trajectory:
    """Run one trajectory from a 64-bit seed.

    When ``solution`` is supplied, the sup-deviation from the ODE path over
    steps 0..min(sigma*n, first predicate failure) is tracked online, and
    with ``replay_check`` the additive-plus-linear recurrence chain of the
    concentration argument is verified at every step. ``event_predicate``
    receives (i, Y) and its first failing index truncates the deviation
    range. The RNG is a counter-based Philox stream keyed by the seed.
    """
    if replay_check and solution is None:
        raise ValueError("replay_check requires an ODE solution")
    prep = _prepare(spec, solution) if solution is not None else None
    return _simulate_prepared(
        plugin, spec, int(seed), prep, full_paths, event_predicate, replay_check
    )


def _simulate_prepared(
    plugin: ProcessPlugin,
    spec: ProcessSpec,
    seed: int,
    prep: _SimPrep | None,
    full_paths: bool,
    event_predicate,
    replay_check: bool,
) -> Trajectory:
    n = spec.n
    a = spec.a
    if plugin.n != n:
        raise ValueError(f"plugin scale n={plugin.n} differs from spec n={n}")
    if plugin.dim != a:
        raise ValueError(f"plugin tracks {plugin.dim} variables, spec expects {a}")

    m_cap = math.floor(spec.domain.t_hi * n)
    stride = 1 if full_paths else max(1, math.ceil(n / 1000))
    lo = spec.domain.lo
    hi = spec.domain.hi
    beta = spec.beta
    delta = spec.delta
    check_trend = not plugin.exact_drift
    ks = range(a)

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    state = plugin.initial_state()
    Y = plugin.observables(state)
    Y0 = Y

    rec_i: list[int] = []
    rec_y: list[tuple] = []
    rec_d: list[tuple] = []
    nan_row = (math.nan,) * a
    violations: list[Violation] = []
    drift_cum = [0.0] * a
    sup_mart = 0.0
    event_stop: int | None = None
    valid = True
    error_step: int | None = None

    if prep is not None:
        yode = prep.yode
        cap = prep.cap
        sup_dev: float | None = 0.0
        replay_ok: bool | None = True if replay_check else None
        chain_sum = 0.0
        prev_dev = 0.0
    else:
        yode = None
        cap = -1
        sup_dev = None
        replay_ok = None

    i = 0
    while True:
        # stopping rule: first index at or past the horizon, or with the
        # rescaled state outside the open box (the time axis cannot bind
        # earlier because 0 <= i/n < T and t_lo < 0)
        stopped = i >= m_cap
        if not stopped:
            for k in ks:
                yk = Y[k] / n
                if not lo[k] < yk < hi[k]:
                    stopped = True
                    break

        if event_predicate is not None and event_stop is None and not event_predicate(i, Y):
            event_stop = i

        dev_i: float | None = None
        if 0 <= i <= cap:
            row = yode[i]
            dev_i = 0.0
            for k in ks:
                d = Y[k] - row[k]
                if d < 0.0:
                    d = -d
                if d > dev_i:
                    dev_i = d
            if event_stop is None or i <= event_stop:
                if dev_i > sup_dev:
                    sup_dev = dev_i
            if replay_ok is not None:
                if i > 0:
                    chain_sum += prep.L_over_n * prev_dev + prep.step_term
                if not dev_i < prep.two_lam_n + chain_sum:
                    replay_ok = False
                prev_dev = dev_i

        md = 0.0
        for k in ks:
            d = Y[k] - Y0[k] - drift_cum[k]
            if d < 0.0:
                d = -d
            if d > md:
                md = d
        if md > sup_mart:
            sup_mart = md

        if stopped:
            rec_i.append(i)
            rec_y.append(Y)
            rec_d.append(nan_row)
            break

        d = plugin.drift(state)
        if i % stride == 0:
            rec_i.append(i)
            rec_y.append(Y)
            rec_d.append(d)
        if check_trend:
            field = plugin.drift_field(i / n, np.asarray(Y, dtype=float) / n)
            for k in ks:
                gap = abs(d[k] - float(field[k]))
                if gap > delta:
                    violations.append(Violation(i, k, "trend", gap, delta, dev_i))
        try:
            state = plugin.step(state, rng)
        except Exception:
            valid = False
            error_step = i
            if rec_i[-1] != i:
                rec_i.append(i)
                rec_y.append(Y)
                rec_d.append(nan_row)
            break
        Y_new = plugin.observables(state)
        for k in ks:
            ch = Y_new[k] - Y[k]
            if ch < 0:
                ch = -ch
            if ch > beta:
                violations.append(Violation(i, k, "bound", float(ch), beta, dev_i))
        for k in ks:
            drift_cum[k] += d[k]
        Y = Y_new
        i += 1

    dev_cap = None
    if prep is not None:
        dev_cap = min(cap, i)
        if event_stop is not None:
            dev_cap = min(dev_cap, event_stop)

    return Trajectory(
        seed=seed,
        stop_index=i,
        indices=np.array(rec_i, dtype=np.int64),
        steps=np.array(rec_y, dtype=np.int64),
        drifts=np.array(rec_d, dtype=float),
        violations=tuple(violations),
        sup_deviation=sup_dev,
        deviation_cap=dev_cap,
        sup_martingale=sup_mart,
        event_stop=event_stop,
        replay_ok=replay_ok,
        valid=valid,
        error_step=error_step,
    )


def _ensemble_worker(args) -> Trajectory:
    plugin, spec, seed, prep, full_paths, event_predicate, replay_check = args
    return _simulate_prepared(
        plugin, spec, seed, prep, full_paths, event_predicate, replay_check
    )


def run_ensemble(
    plugin: ProcessPlugin,
    spec: ProcessSpec,
    count: int,
    base_seed: int,
    event_predicate: Callable[[int, tuple], bool] | None = None,
    *,
    solution: OdeSolution | None = None,
    full_paths: bool = False,
    replay_check: bool = False,
    jobs: int = 1,
) -> Ensemble:
    """Simulate ``count`` independent trajectories from derived seeds.

    Trajectory i uses seed derive_seed(base_seed, i); results are identical
    for any ``jobs`` value, and jobs > 1 distributes trajectories over a
    process pool (everything passed in must then be picklable).
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    if replay_check and solution is None:
        raise ValueError("replay_check requires an ODE solution")
    prep = _prepare(spec, solution) if solution is not None else None
    seeds = [derive_seed(base_seed, idx) for idx in range(count)]
    work = [
        (plugin, spec, s, prep, full_paths, event_predicate, replay_check)
        for s in seeds
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            trajectories = list(pool.map(_ensemble_worker, work, chunksize=8))
    else:
        trajectories = [_ensemble_worker(w) for w in work]
    return Ensemble(
        spec=spec,
        base_seed=int(base_seed),
        seeds=tuple(seeds),
        trajectories=tuple(trajectories),
    )


def doob_decompose(traj: Trajectory) -> np.ndarray:
    """Martingale part M_k(j) = sum_{i<j} [dY_k(i) - drift_k(i)], j = 0..stop_index.

    Requires a fully recorded trajectory; thinned trajectories lack the
    per-step drift records needed for the decomposition.
    """
    if not traj.is_full:
        raise ValueError(
            "trajectory is thinned; doob_decompose needs full per-step drift records"
        )
    a = traj.steps.shape[1]
    if traj.stop_index == 0:
        return np.zeros((1, a))
    increments = np.diff(traj.steps, axis=0) - traj.drifts[:-1]
    out = np.zeros((traj.stop_index + 1, a))
    np.cumsum(increments, axis=0, out=out[1:])
    return out


@dataclass(frozen=True)
class HypothesisSummary:
    """Violation counts for one trajectory under the selected checking mode."""

    mode: str
    trend_count: int
    bound_count: int
    violations: tuple[Violation, ...]

    @property
    def clean(self) -> bool:
        return not self.violations


def check_hypotheses(
    traj: Trajectory,
    spec: ProcessSpec,
    mode: str = "strict",
    solution: OdeSolution | None = None,
) -> HypothesisSummary:
    """Summarize recorded condition violations.

    ``strict`` keeps every violation recorded inside the domain.
    ``proof-structure`` keeps only violations at steps that additionally
    satisfy i < floor(T*n) and deviation-from-ODE < 3*exp(L*T)*lambda*n;
    steps already past the envelope are exempt because the concentration
    argument never inspects them. Deviations must have been tracked at
    simulation time (pass the solution to :func:`simulate`), or be
    recomputable here from a fully recorded trajectory plus ``solution``.
    """
    if mode not in ("strict", "proof-structure"):
        raise ValueError(f"unknown mode {mode!r}")
    kept = traj.violations
    if mode == "proof-structure":
        m_cap = math.floor(spec.domain.t_hi * spec.n)
        kept = []
        for v in traj.violations:
            dev = v.deviation
            if dev is None:
                dev = _deviation_at(traj, v.i, solution)
            if v.i < m_cap and dev < _envelope(spec, solution):
                kept.append(v)
        kept = tuple(kept)
    trend = sum(1 for v in kept if v.kind == "trend")
    bound = sum(1 for v in kept if v.kind == "bound")
    return HypothesisSummary(mode=mode, trend_count=trend, bound_count=bound, violations=kept)


def _envelope(spec: ProcessSpec, solution: OdeSolution | None) -> float:
    if solution is None:
        raise ValueError("proof-structure mode needs an ODE solution")
    return solution.constants.margin * spec.n


def _deviation_at(traj: Trajectory, i: int, solution: OdeSolution | None) -> float:
    if solution is None:
        raise ValueError(
            "violation lacks a tracked deviation; simulate with the solution "
            "or pass it here together with a fully recorded trajectory"
        )
    if not traj.is_full:
        raise ValueError("cannot recompute deviations on a thinned trajectory")
    target = solution.counts_at_steps(i)[i]
    return float(np.max(np.abs(traj.steps[i] - target)))
