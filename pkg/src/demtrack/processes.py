"""Built-in random processes and the plugin contract the simulator consumes.

A plugin owns the process dynamics at scale n: it steps the state, reports
the tracked count vector Y(i), and supplies the exact conditional drift
E(Y(i+1) - Y(i) | F_i) in closed form (estimating drifts from samples would
confound verification). ``drift_field`` is the limiting right-hand side
F(t, y) in rescaled coordinates; plugins with ``exact_drift`` guarantee that
``drift(state)`` equals the field at the current rescaled state, so the
trend condition can never be violated.

States must be cheap plain values (ints or tuples) and hashable, so that
small instances can be exhaustively enumerated for oracle tests.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Callable

import numpy as np

from .core import Domain, ProcessSpec


class ProcessPlugin(ABC):
    """Dynamics of one discrete-time process at a fixed scale n."""

    name: str = "?"
    exact_drift: bool = False

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("n must be positive")
        self.n = n

    @property
    @abstractmethod
    def dim(self) -> int:
        """Number of tracked variables."""

    @property
    def params(self) -> dict:
        """JSON-serializable constructor parameters (excluding n)."""
        return {}

    @abstractmethod
    def initial_state(self):
        ...

    @abstractmethod
    def observables(self, state) -> tuple[int, ...]:
        """Tracked counts Y(i) for the given state."""

    @abstractmethod
    def step(self, state, rng: np.random.Generator):
        """Advance one step; returns the next state."""

    @abstractmethod
    def drift(self, state) -> tuple[float, ...]:
        """Exact E(Y_k(i+1) - Y_k(i) | F_i) for each k."""

    @abstractmethod
    def drift_field(self, t: float, y: np.ndarray) -> np.ndarray:
        """Limiting drift F(t, y) in rescaled coordinates."""

    @abstractmethod
    def enumerate_transitions(self, state) -> list[tuple[float, object]]:
        """All one-step outcomes as (probability, next_state) pairs.

        Only required to be practical at small n; drives the brute-force
        drift oracle and reachability enumeration in tests.
        """

    def avg_step_bound(self, spec: ProcessSpec) -> float | None:
        """Declared bound b on E(|Y_k(i+1) - Y_k(i)| | F_i) inside the domain."""
        return None

    def truncation(self, spec: ProcessSpec) -> tuple[float, float] | None:
        """Declared (gamma, B): step exceeds beta with prob <= gamma, hard cap B."""
        return None


class BallsInBins(ProcessPlugin):
    """Throw balls one at a time into n uniform bins; Y(i) = empty bins left.

    A ball lands in an empty bin with probability Y/n, so the drift is
    exactly -Y/n and the limit solves y' = -y, y(0) = 1.
    """

    name = "balls-in-bins"
    exact_drift = True

    @property
    def dim(self) -> int:
        return 1

    def initial_state(self):
        return self.n

    def observables(self, state) -> tuple[int, ...]:
        return (state,)

    def step(self, state, rng):
        return state - 1 if rng.random() * self.n < state else state

    def drift(self, state) -> tuple[float, ...]:
        return (-(state / self.n),)

    def drift_field(self, t, y):
        return -np.asarray(y, dtype=float)

    def enumerate_transitions(self, state):
        p = state / self.n
        out = []
        if p > 0:
            out.append((p, state - 1))
        if p < 1:
            out.append((1.0 - p, state))
        return out

    def avg_step_bound(self, spec):
        return min(1.0, spec.domain.hi[0])

    def truncation(self, spec):
        return 0.0, spec.beta


class DegreeProcess(ProcessPlugin):
    """Degree profile of a multigraph grown one uniformly random edge at a time.

    Each step picks an ordered pair of distinct vertices (repeats across
    steps allowed) and raises both endpoint degrees. Y_k(i) counts vertices
    of degree k for k = 0..max_degree; vertices beyond max_degree are lumped
    into an untracked overflow class. Every vertex is an edge endpoint with
    probability exactly 2/n, so the drift is exactly 2(y_{k-1} - y_k) and
    the limit is the Poisson profile y_k(t) = (2t)^k e^{-2t} / k!.
    """

    name = "degree-process"
    exact_drift = True

    def __init__(self, n: int, max_degree: int = 3):
        super().__init__(n)
        if n < 2:
            raise ValueError("degree process needs at least two vertices")
        if max_degree < 0:
            raise ValueError("max_degree must be nonnegative")
        self.max_degree = max_degree
        self._overflow = max_degree + 1  # lumped class index

    @property
    def dim(self) -> int:
        return self.max_degree + 1

    @property
    def params(self) -> dict:
        return {"max_degree": self.max_degree}

    def initial_state(self):
        counts = [0] * (self.max_degree + 2)
        counts[0] = self.n
        return tuple(counts)

    def observables(self, state) -> tuple[int, ...]:
        return state[: self.max_degree + 1]

    def step(self, state, rng):
        n = self.n
        top = self._overflow
        u = rng.random() * n
        acc = 0.0
        ju = top
        for j, c in enumerate(state):
            acc += c
            if u < acc:
                ju = j
                break
        v = rng.random() * (n - 1)
        acc = 0.0
        jv = top
        for j, c in enumerate(state):
            acc += c - (j == ju)
            if v < acc:
                jv = j
                break
        out = list(state)
        out[ju] -= 1
        out[min(ju + 1, top)] += 1
        out[jv] -= 1
        out[min(jv + 1, top)] += 1
        return tuple(out)

    def drift(self, state) -> tuple[float, ...]:
        n = self.n
        return tuple(
            2.0 * ((state[k - 1] if k else 0) - state[k]) / n
            for k in range(self.max_degree + 1)
        )

    def drift_field(self, t, y):
        y = np.asarray(y, dtype=float)
        prev = np.concatenate(([0.0], y[:-1]))
        return 2.0 * (prev - y)

    def enumerate_transitions(self, state):
        n = self.n
        top = self._overflow
        acc: dict[tuple, float] = {}
        for ju, cu in enumerate(state):
            if cu == 0:
                continue
            for jv, cv in enumerate(state):
                avail = cv - (jv == ju)
                if avail <= 0:
                    continue
                p = (cu / n) * (avail / (n - 1))
                out = list(state)
                out[ju] -= 1
                out[min(ju + 1, top)] += 1
                out[jv] -= 1
                out[min(jv + 1, top)] += 1
                key = tuple(out)
                acc[key] = acc.get(key, 0.0) + p
        return [(p, s) for s, p in acc.items()]

    def avg_step_bound(self, spec):
        hi = (0.0, *spec.domain.hi)
        return min(spec.beta, max(2.0 * (hi[k] + hi[k + 1]) for k in range(self.dim)))

    def truncation(self, spec):
        return 0.0, spec.beta


class GreedyMatching(ProcessPlugin):
    """Random greedy matching on the complete graph; Y(i) = unmatched vertices.

    Each step matches a uniformly random pair of unmatched vertices, so Y
    decreases by exactly 2 per step: the drift is the constant -2 and the
    martingale part vanishes. Included as a deterministic-drift smoke test.
    """

    name = "greedy-matching"
    exact_drift = True

    def __init__(self, n: int):
        super().__init__(n)
        if n % 2:
            raise ValueError("greedy matching needs an even number of vertices")

    @property
    def dim(self) -> int:
        return 1

    def initial_state(self):
        return self.n

    def observables(self, state) -> tuple[int, ...]:
        return (state,)

    def step(self, state, rng):
        return state - 2 if state >= 2 else state

    def drift(self, state) -> tuple[float, ...]:
        return (-2.0,) if state >= 2 else (0.0,)

    def drift_field(self, t, y):
        return np.full(1, -2.0)

    def enumerate_transitions(self, state):
        return [(1.0, state - 2)] if state >= 2 else [(1.0, state)]

    def avg_step_bound(self, spec):
        return 2.0

    def truncation(self, spec):
        return 0.0, spec.beta


_REGISTRY: dict[str, Callable[[int, dict], ProcessPlugin]] = {}


def register_plugin(name: str, factory: Callable[[int, dict], ProcessPlugin]) -> None:
    """Register a plugin factory (n, params) -> plugin under a spec-file name."""
    _REGISTRY[name] = factory


def make_plugin(name: str, n: int, params: dict | None = None) -> ProcessPlugin:
    if name not in _REGISTRY:
        known = ", ".join(sorted(_REGISTRY))
        raise ValueError(f"unknown plugin {name!r} (registered: {known})")
    return _REGISTRY[name](n, params or {})


register_plugin("balls-in-bins", lambda n, params: BallsInBins(n))
register_plugin(
    "degree-process",
    lambda n, params: DegreeProcess(n, max_degree=int(params.get("max_degree", 3))),
)
register_plugin("greedy-matching", lambda n, params: GreedyMatching(n))


def balls_in_bins_spec(
    n: int,
    lam: float = 1e-3,
    domain: Domain | None = None,
) -> tuple[ProcessSpec, BallsInBins]:
    """Standard instance: empty-bin count vs y(t) = e^{-t} on a box."""
    plugin = BallsInBins(n)
    dom = domain or Domain(t_lo=-0.1, t_hi=2.0, lo=(0.05,), hi=(1.1,))
    spec = ProcessSpec(
        n=n,
        drift=plugin.drift_field,
        L=1.0,
        delta=0.0,
        beta=1.0,
        lam=lam,
        y_hat=(1.0,),
        domain=dom,
        plugin_name=plugin.name,
    )
    return spec, plugin


def degree_process_spec(
    n: int,
    max_degree: int = 3,
    lam: float = 0.01,
    domain: Domain | None = None,
) -> tuple[ProcessSpec, DegreeProcess]:
    """Degree profile vs the Poisson curves on [0, 0.5]; L = 4 covers all F_k."""
    plugin = DegreeProcess(n, max_degree=max_degree)
    a = plugin.dim
    dom = domain or Domain(t_lo=-0.3, t_hi=0.5, lo=(-0.3,) * a, hi=(1.3,) * a)
    spec = ProcessSpec(
        n=n,
        drift=plugin.drift_field,
        L=4.0,
        delta=0.0,
        beta=2.0,
        lam=lam,
        y_hat=(1.0,) + (0.0,) * (a - 1),
        domain=dom,
        plugin_name=plugin.name,
        plugin_params=plugin.params,
    )
    return spec, plugin


def greedy_matching_spec(
    n: int,
    lam: float = 0.01,
    domain: Domain | None = None,
) -> tuple[ProcessSpec, GreedyMatching]:
    """Unmatched-vertex count vs y(t) = 1 - 2t; constant drift, L = 0."""
    plugin = GreedyMatching(n)
    dom = domain or Domain(t_lo=-0.1, t_hi=0.45, lo=(0.05,), hi=(1.1,))
    spec = ProcessSpec(
        n=n,
        drift=plugin.drift_field,
        L=0.0,
        delta=0.0,
        beta=2.0,
        lam=lam,
        y_hat=(1.0,),
        domain=dom,
        plugin_name=plugin.name,
    )
    return spec, plugin
