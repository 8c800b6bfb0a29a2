"""Core domain types: box domains, process specifications, trajectories, reports.

All types here are immutable after construction and safe to share between
worker processes. Counts are kept as 64-bit integers, rescaled quantities
as double-precision floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class LambdaNotAdmissible(ValueError):
    """Raised when the approximation parameter is below its admissible threshold."""


@dataclass(frozen=True)
class Domain:
    """Open axis-aligned box in (t, y_1..y_a) space.

    The time axis spans (t_lo, t_hi); coordinate k spans (lo[k], hi[k]) in
    rescaled Y/n units. Boundary geometry is l-infinity: the distance of a
    point to the boundary is the minimum over all 2(a+1) face distances.
    """

    t_lo: float
    t_hi: float
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("lo/hi must have equal length")
        if not self.lo:
            raise ValueError("domain needs at least one tracked coordinate")
        ends = (self.t_lo, self.t_hi, *self.lo, *self.hi)
        if not all(math.isfinite(v) for v in ends):
            raise ValueError("domain endpoints must be finite")
        if not self.t_lo < self.t_hi:
            raise ValueError(f"need t_lo < t_hi, got ({self.t_lo}, {self.t_hi})")
        for k, (a, b) in enumerate(zip(self.lo, self.hi)):
            if not a < b:
                raise ValueError(f"coordinate {k}: need lo < hi, got ({a}, {b})")

    @property
    def dim(self) -> int:
        """Number of tracked coordinates (a)."""
        return len(self.lo)

    def boundary_distance(self, point: Sequence[float]) -> float:
        """Signed l-infinity distance of (t, y_1..y_a) to the box boundary.

        Positive iff the point is strictly inside; zero on a face; negative
        outside (then its magnitude is the l-infinity distance to the box).
        """
        if len(point) != self.dim + 1:
            raise ValueError(
                f"point has dimension {len(point)}, domain needs {self.dim + 1}"
            )
        t = point[0]
        d = min(t - self.t_lo, self.t_hi - t)
        for y, a, b in zip(point[1:], self.lo, self.hi):
            d = min(d, y - a, b - y)
        return d

    def contains(self, point: Sequence[float]) -> bool:
        return self.boundary_distance(point) > 0.0


def boundary_distance(domain: Domain, point: Sequence[float]) -> float:
    """Module-level alias for :meth:`Domain.boundary_distance`."""
    return domain.boundary_distance(point)


@dataclass(frozen=True)
class ProcessSpec:
    """Full problem instance for one tracked random process.

    ``drift`` maps (t, y) with y an array of length ``a`` to the array of
    expected one-step changes F_1..F_a (rescaled coordinates). ``L`` is the
    Lipschitz constant of every F_k per unit l-infinity distance, ``delta``
    the drift tolerance, ``beta`` the worst-case one-step bound, ``lam`` the
    approximation parameter, and ``y_hat`` the initial anchor with
    (0, y_hat) inside ``domain``.

    Optional extension parameters: ``avg_step_bound`` (a bound b on the
    conditional mean absolute step), ``trunc_gamma``/``trunc_bound`` (a
    probability gamma of exceeding beta together with a hard cap B), and
    ``trunc_x`` (the tolerated number x of oversized steps).
    """

    n: int
    drift: Callable[[float, np.ndarray], np.ndarray]
    L: float
    delta: float
    beta: float
    lam: float
    y_hat: tuple[float, ...]
    domain: Domain
    plugin_name: str | None = None
    plugin_params: dict = field(default_factory=dict)
    avg_step_bound: float | None = None
    trunc_gamma: float | None = None
    trunc_bound: float | None = None
    trunc_x: float | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be a positive integer")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.delta < 0 or self.L < 0:
            raise ValueError("delta and L must be nonnegative")
        if len(self.y_hat) != self.domain.dim:
            raise ValueError("y_hat dimension does not match domain")
        if not self.domain.contains((0.0, *self.y_hat)):
            raise ValueError("initial anchor (0, y_hat) must lie inside the domain")
        object.__setattr__(self, "y_hat", tuple(float(v) for v in self.y_hat))

    @property
    def a(self) -> int:
        """Number of tracked variables."""
        return len(self.y_hat)


def check_initial_condition(spec: ProcessSpec, y0: Sequence[int]) -> bool:
    """True iff max_k |Y_k(0) - y_hat_k * n| <= lambda*n and (0, y_hat) is in D.

    The anchor-inclusion half is guaranteed by ProcessSpec construction but is
    re-checked so the predicate stands on its own.
    """
    if len(y0) != spec.a:
        raise ValueError(f"y0 has {len(y0)} entries, spec tracks {spec.a}")
    offset = max(abs(float(v) - h * spec.n) for v, h in zip(y0, spec.y_hat))
    return offset <= spec.lam * spec.n and spec.domain.contains((0.0, *spec.y_hat))


@dataclass(frozen=True)
class Constants:
    """Derived constants of a solved instance.

    R bounds max_k |F_k| over the domain (R >= 1), T bounds the time axis,
    sigma is the horizon up to which the ODE solution keeps l-infinity
    distance >= margin from the boundary, and margin = 3*exp(L*T)*lambda in
    rescaled units.
    """

    R: float
    T: float
    sigma: float
    margin: float

    def __post_init__(self):
        if self.R < 1.0:
            raise ValueError("R must be at least 1")
        if not 0.0 <= self.sigma <= self.T:
            raise ValueError("sigma must lie in [0, T]")


@dataclass(frozen=True)
class Violation:
    """One recorded hypothesis violation at step ``i``, coordinate ``k``.

    ``kind`` is 'trend' (conditional drift differs from F_k by more than
    delta) or 'bound' (one-step change exceeds beta). ``deviation`` is the
    trajectory's distance to the ODE path at step i, when known.
    """

    i: int
    k: int
    kind: str
    observed: float
    allowed: float
    deviation: float | None = None


@dataclass(frozen=True)
class Trajectory:
    """One recorded integer-step path.

    ``indices`` lists the recorded step indices (all of 0..stop_index when
    fully recorded, a thinned subset otherwise); ``steps[r]`` is the count
    vector Y(indices[r]) and ``drifts[r]`` the exact conditional expectation
    E(Y(i+1)-Y(i) | F_i) at that step (NaN on the final record, where no
    step was taken). ``stop_index`` is the first exit from the domain capped
    at floor(T*n). Online statistics (sup_deviation, sup_martingale,
    replay_ok) are computed during simulation so that thinning never affects
    verification.
    """

    seed: int
    stop_index: int
    indices: np.ndarray
    steps: np.ndarray
    drifts: np.ndarray
    violations: tuple[Violation, ...] = ()
    sup_deviation: float | None = None
    deviation_cap: int | None = None
    sup_martingale: float = 0.0
    event_stop: int | None = None
    replay_ok: bool | None = None
    valid: bool = True
    error_step: int | None = None

    def __post_init__(self):
        for arr in (self.indices, self.steps, self.drifts):
            arr.setflags(write=False)

    @property
    def is_full(self) -> bool:
        """True when every step 0..stop_index was recorded."""
        return len(self.indices) == self.stop_index + 1

    def final_counts(self) -> np.ndarray:
        return self.steps[-1]


@dataclass(frozen=True)
class Ensemble:
    """Independent trajectories simulated from one spec.

    Per-trajectory seeds are derived from ``base_seed`` and the trajectory
    index, so the collection is independent of generation order and worker
    count.
    """

    spec: ProcessSpec
    base_seed: int
    seeds: tuple[int, ...]
    trajectories: tuple[Trajectory, ...]

    def __post_init__(self):
        if not self.trajectories:
            raise ValueError("ensemble needs at least one trajectory")

    def __len__(self) -> int:
        return len(self.trajectories)


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of checking the dynamic-concentration envelope on an ensemble.

    ``failure_probability`` is reported exactly as the bound formula yields
    it (it may exceed 1; display clamps only). Empirical deviations are the
    per-trajectory sup over steps 0..min(sigma*n, event stop).
    """

    mode: str
    plugin: str | None
    count: int
    base_seed: int
    constants: Constants
    envelope: float
    lambda_value: float
    lambda_threshold: float
    lambda_admissible: bool
    failure_probability: float
    failure_count: int
    empirical_sup_deviations: tuple[float, ...]
    martingale_bound: float
    martingale_exceed_count: int
    trend_violation_count: int
    bound_violation_count: int
    trajectories_with_violations: int
    hypotheses_failed: bool
    vacuous: bool
    gw_final_inequality_holds: bool
    replay_checked: int | None = None
    replay_failures: int | None = None
    event_predicate_active: bool = False
    event_stops: tuple[int, ...] | None = None
    anchor: tuple[float, ...] | None = None

    def to_dict(self) -> dict:
        c = self.constants
        out = {
            "schema": 1,
            "mode": self.mode,
            "plugin": self.plugin,
            "count": self.count,
            "base_seed": self.base_seed,
            "constants": {"R": c.R, "T": c.T, "sigma": c.sigma, "margin": c.margin},
            "envelope": self.envelope,
            "lambda": self.lambda_value,
            "lambda_threshold": self.lambda_threshold,
            "lambda_admissible": self.lambda_admissible,
            "failure_probability": self.failure_probability,
            "failure_count": self.failure_count,
            "empirical_sup_deviations": list(self.empirical_sup_deviations),
            "martingale_bound": self.martingale_bound,
            "martingale_exceed_count": self.martingale_exceed_count,
            "hypothesis_violations": {
                "trend": self.trend_violation_count,
                "bound": self.bound_violation_count,
                "trajectories_with_violations": self.trajectories_with_violations,
            },
            "hypotheses_failed": self.hypotheses_failed,
            "vacuous": self.vacuous,
            "gw_final_inequality_holds": self.gw_final_inequality_holds,
            "event_predicate_active": self.event_predicate_active,
        }
        if self.replay_checked is not None:
            out["gronwall_replay"] = {
                "checked": self.replay_checked,
                "failures": self.replay_failures,
            }
        if self.event_stops is not None:
            out["event_stops"] = list(self.event_stops)
        if self.anchor is not None:
            out["anchor"] = list(self.anchor)
        return out
