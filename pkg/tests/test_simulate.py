import math

import numpy as np
import pytest

from demtrack import Domain, ProcessSpec
from demtrack.ode import solve_ode
from demtrack.processes import (
    BallsInBins,
    ProcessPlugin,
    balls_in_bins_spec,
    greedy_matching_spec,
)
from demtrack.simulate import (
    check_hypotheses,
    derive_seed,
    doob_decompose,
    run_ensemble,
    simulate,
)


class FairCoin(ProcessPlugin):
    """+-1 step with zero drift: Y is itself the martingale part."""

    name = "fair-coin"
    exact_drift = False

    @property
    def dim(self):
        return 1

    def initial_state(self):
        return 0

    def observables(self, state):
        return (state,)

    def step(self, state, rng):
        return state + (1 if rng.random() < 0.5 else -1)

    def drift(self, state):
        return (0.0,)

    def drift_field(self, t, y):
        return np.zeros(1)

    def enumerate_transitions(self, state):
        return [(0.5, state + 1), (0.5, state - 1)]


class ConstantPlugin(ProcessPlugin):
    name = "constant"
    exact_drift = False

    @property
    def dim(self):
        return 1

    def initial_state(self):
        return self.n // 2

    def observables(self, state):
        return (state,)

    def step(self, state, rng):
        return state

    def drift(self, state):
        return (0.0,)

    def drift_field(self, t, y):
        return np.zeros(1)

    def enumerate_transitions(self, state):
        return [(1.0, state)]


class DriftLiar(BallsInBins):
    """Balls-in-bins dynamics but a deliberately wrong drift report."""

    name = "drift-liar"
    exact_drift = False

    def drift(self, state):
        return (-(state / self.n) + 0.5,)


class FailingPlugin(ConstantPlugin):
    name = "failing"

    def step(self, state, rng):
        if state != self.n // 2:
            raise RuntimeError("unreachable")
        raise RuntimeError("boom")


def coin_spec(n=100, lam=0.4, t_hi=1.0, width=0.45):
    dom = Domain(t_lo=-0.1, t_hi=t_hi, lo=(-width,), hi=(width,))
    return ProcessSpec(
        n=n, drift=lambda t, y: np.zeros(1), L=0.0, delta=0.0, beta=1.0,
        lam=lam, y_hat=(0.0,), domain=dom,
    )


class TestStopping:
    def test_cap_at_time_horizon(self):
        spec, plugin = balls_in_bins_spec(200, lam=1e-3)
        traj = simulate(plugin, spec, 5, full_paths=True)
        assert traj.stop_index == math.floor(2.0 * 200)
        assert len(traj.indices) == traj.stop_index + 1

    def test_domain_exit_recorded(self):
        # balls empties below the 0.05 floor long before t = 5 on a long box
        dom = Domain(t_lo=-0.1, t_hi=5.0, lo=(0.05,), hi=(1.1,))
        spec, plugin = balls_in_bins_spec(500, lam=1e-3, domain=dom)
        traj = simulate(plugin, spec, 9, full_paths=True)
        assert traj.stop_index < math.floor(5.0 * 500)
        last = traj.steps[-1, 0] / 500
        assert not 0.05 < last  # exited through the floor
        for i, y in zip(traj.indices[:-1], traj.steps[:-1, 0]):
            assert spec.domain.boundary_distance((i / 500, y / 500)) > 0

    def test_two_bins_first_ball_deterministic(self):
        # with two empty bins the first ball always lands in an empty one
        dom = Domain(t_lo=-0.1, t_hi=1.0, lo=(0.05,), hi=(1.5,))
        spec, plugin = balls_in_bins_spec(2, lam=0.4, domain=dom)
        for seed in range(10):
            traj = simulate(plugin, spec, seed, full_paths=True)
            assert traj.steps[0, 0] == 2 and traj.steps[1, 0] == 1

    def test_constant_plugin_runs_to_horizon(self):
        spec = coin_spec(n=50, t_hi=0.8, width=0.6)  # box contains y = 0.5
        plugin = ConstantPlugin(50)
        traj = simulate(plugin, spec, 1, full_paths=True)
        assert traj.stop_index == math.floor(0.8 * 50)
        assert np.all(traj.steps == 25)


class TestDeterminism:
    def test_same_seed_same_path(self):
        spec, plugin = balls_in_bins_spec(300, lam=1e-3)
        t1 = simulate(plugin, spec, 123, full_paths=True)
        t2 = simulate(plugin, spec, 123, full_paths=True)
        assert np.array_equal(t1.steps, t2.steps)
        assert t1.sup_martingale == t2.sup_martingale

    def test_ensemble_matches_derived_seeds(self):
        spec, plugin = balls_in_bins_spec(150, lam=1e-3)
        ens = run_ensemble(plugin, spec, 3, base_seed=77)
        for idx, traj in enumerate(ens.trajectories):
            solo = simulate(plugin, spec, derive_seed(77, idx))
            assert np.array_equal(traj.steps, solo.steps)
            assert traj.seed == solo.seed

    def test_worker_count_does_not_change_results(self):
        spec, plugin = balls_in_bins_spec(100, lam=1e-3)
        seq = run_ensemble(plugin, spec, 4, base_seed=5, jobs=1)
        par = run_ensemble(plugin, spec, 4, base_seed=5, jobs=2)
        for a, b in zip(seq.trajectories, par.trajectories):
            assert np.array_equal(a.steps, b.steps)
            assert a.sup_martingale == b.sup_martingale

    def test_seed_derivation_is_stable(self):
        assert derive_seed(42, 0) == derive_seed(42, 0)
        assert derive_seed(42, 0) != derive_seed(42, 1)
        assert derive_seed(42, 0) != derive_seed(43, 0)


class TestThinning:
    def test_default_stride(self):
        spec, plugin = balls_in_bins_spec(5000, lam=1e-3)
        traj = simulate(plugin, spec, 3)
        stride = math.ceil(5000 / 1000)
        assert stride == 5
        assert np.all(np.diff(traj.indices[:-1]) == stride)
        assert traj.indices[-1] == traj.stop_index
        assert not traj.is_full

    def test_online_stats_unaffected_by_thinning(self):
        spec, plugin = balls_in_bins_spec(5000, lam=2e-3)
        sol = solve_ode(spec)
        full = simulate(plugin, spec, 3, solution=sol, full_paths=True)
        thin = simulate(plugin, spec, 3, solution=sol)
        assert full.sup_deviation == thin.sup_deviation
        assert full.sup_martingale == thin.sup_martingale
        assert full.deviation_cap == thin.deviation_cap


class TestDoob:
    def test_identity_replay(self):
        spec, plugin = balls_in_bins_spec(500, lam=1e-3)
        for seed in range(5):
            traj = simulate(plugin, spec, seed, full_paths=True)
            M = doob_decompose(traj)
            recon = M + traj.steps[0] + np.vstack(
                [np.zeros(1), np.cumsum(traj.drifts[:-1], axis=0)]
            )
            rel = np.abs(recon - traj.steps) / np.maximum(1.0, np.abs(traj.steps))
            assert rel.max() <= 1e-9
            assert np.all(M[0] == 0.0)

    def test_deterministic_plugin_has_zero_martingale(self):
        spec, plugin = greedy_matching_spec(100, lam=0.05)
        traj = simulate(plugin, spec, 11, full_paths=True)
        M = doob_decompose(traj)
        assert np.max(np.abs(M)) == 0.0
        assert traj.sup_martingale == 0.0

    def test_fair_coin_martingale_is_the_walk(self):
        spec = coin_spec()
        plugin = FairCoin(100)
        traj = simulate(plugin, spec, 21, full_paths=True)
        M = doob_decompose(traj)
        assert np.array_equal(M[:, 0], traj.steps[:, 0] - traj.steps[0, 0])

    def test_thinned_trajectory_rejected(self):
        spec, plugin = balls_in_bins_spec(5000, lam=1e-3)
        traj = simulate(plugin, spec, 3)
        with pytest.raises(ValueError, match="thinned"):
            doob_decompose(traj)


class TestHypothesisChecks:
    def test_clean_run_has_no_violations(self):
        spec, plugin = balls_in_bins_spec(400, lam=1e-3)
        traj = simulate(plugin, spec, 2, full_paths=True)
        summary = check_hypotheses(traj, spec)
        assert summary.clean
        assert summary.trend_count == summary.bound_count == 0

    def test_small_beta_flags_every_emptying_step(self):
        spec, plugin = balls_in_bins_spec(200, lam=1e-3)
        spec = ProcessSpec(
            n=200, drift=plugin.drift_field, L=1.0, delta=0.0, beta=0.5,
            lam=1e-3, y_hat=(1.0,), domain=spec.domain,
        )
        traj = simulate(plugin, spec, 8, full_paths=True)
        summary = check_hypotheses(traj, spec)
        emptied = int(traj.steps[0, 0] - traj.steps[-1, 0])
        assert summary.bound_count == emptied
        assert all(v.kind == "bound" for v in summary.violations)

    def test_drift_liar_flags_every_step(self):
        spec, _ = balls_in_bins_spec(100, lam=1e-3)
        liar = DriftLiar(100)
        traj = simulate(liar, spec, 4, full_paths=True)
        summary = check_hypotheses(traj, spec, mode="strict")
        assert summary.trend_count == traj.stop_index

    def test_proof_structure_mode_exempts_far_steps(self):
        # wrong drift pushes the path away from the ODE curve; once the
        # deviation passes the tiny envelope, violations stop counting
        dom = Domain(t_lo=-0.1, t_hi=1.0, lo=(0.05,), hi=(2.0,))
        spec, _ = balls_in_bins_spec(100, lam=1e-3, domain=dom)
        liar = DriftLiar(100)
        sol = solve_ode(spec)
        traj = simulate(liar, spec, 4, solution=sol, full_paths=True)
        strict = check_hypotheses(traj, spec, mode="strict")
        proof = check_hypotheses(traj, spec, mode="proof-structure", solution=sol)
        assert 0 < proof.trend_count < strict.trend_count
        envelope = sol.constants.margin * spec.n
        assert all(v.deviation < envelope for v in proof.violations)

    def test_unknown_mode_rejected(self):
        spec, plugin = balls_in_bins_spec(100, lam=1e-3)
        traj = simulate(plugin, spec, 1)
        with pytest.raises(ValueError):
            check_hypotheses(traj, spec, mode="lenient")


class TestEventPredicate:
    def test_known_failure_step(self):
        # greedy matching is deterministic: Y(i) = n - 2i, so the predicate
        # Y >= n - 10 fails first at exactly i = 6
        spec, plugin = greedy_matching_spec(100, lam=0.05)
        traj = simulate(
            plugin, spec, 3, event_predicate=lambda i, y: y[0] >= 100 - 10
        )
        assert traj.event_stop == 6

    def test_deviation_range_truncated(self):
        spec, plugin = balls_in_bins_spec(400, lam=2e-3)
        sol = solve_ode(spec)
        free = simulate(plugin, spec, 13, solution=sol)
        stopper = simulate(
            plugin, spec, 13, solution=sol, event_predicate=lambda i, y: i < 50
        )
        assert stopper.event_stop == 50
        assert stopper.deviation_cap == 50
        assert stopper.sup_deviation <= free.sup_deviation

    def test_never_failing_predicate(self):
        spec, plugin = balls_in_bins_spec(100, lam=1e-3)
        traj = simulate(plugin, spec, 3, event_predicate=lambda i, y: True)
        assert traj.event_stop is None


class TestFailureHandling:
    def test_step_failure_marks_invalid(self):
        spec = coin_spec(n=50, t_hi=0.8, width=0.6)
        plugin = FailingPlugin(50)
        traj = simulate(plugin, spec, 1, full_paths=True)
        assert not traj.valid
        assert traj.error_step == 0
        assert traj.stop_index == 0

    def test_dimension_mismatch_rejected(self):
        spec, _ = balls_in_bins_spec(100, lam=1e-3)
        with pytest.raises(ValueError, match="scale"):
            simulate(BallsInBins(99), spec, 1)

    def test_replay_without_solution_rejected(self):
        spec, plugin = balls_in_bins_spec(100, lam=1e-3)
        with pytest.raises(ValueError, match="solution"):
            simulate(plugin, spec, 1, replay_check=True)
