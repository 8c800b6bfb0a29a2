#!/usr/bin/env python3
"""End-to-end demo: solve, simulate, and verify each built-in process.

Runs at a reduced scale so the whole script finishes in well under a minute;
point the spec loaders at scripts/specs/*.json for the full-size instances.
"""

import math

import demtrack as dt
from demtrack.core import Domain


def show(title, spec, plugin, count=50, seed=2024):
    report = dt.verify(spec, plugin, count, seed)
    c = report.constants
    devs = report.empirical_sup_deviations
    print(f"== {title} (n={spec.n}, lambda={spec.lam})")
    print(f"   R={c.R:.6g}  T={c.T:.6g}  sigma={c.sigma:.6g}  margin={c.margin:.6g}")
    print(f"   envelope {report.envelope:.6g} counts; bound {min(report.failure_probability, 1):.6g}")
    if report.vacuous:
        print("   sigma = 0: guarantee vacuous for this box/lambda")
        print()
        return
    print(f"   sup deviation: max {max(devs):.6g}, median {sorted(devs)[len(devs)//2]:.6g}")
    print(f"   envelope failures {report.failure_count}/{count}; "
          f"martingale bound exceeded {report.martingale_exceed_count}x")
    if report.replay_checked is not None:
        print(f"   recurrence replay: {report.replay_checked} checked, "
              f"{report.replay_failures} failed")
    print()


def main():
    dom = Domain(t_lo=-0.2, t_hi=1.0, lo=(0.05,), hi=(1.3,))
    spec, plugin = dt.balls_in_bins_spec(20_000, lam=0.02, domain=dom)
    show("balls into bins", spec, plugin)

    spec, plugin = dt.degree_process_spec(5_000, max_degree=3, lam=0.01)
    show("degree profile", spec, plugin)

    spec, plugin = dt.greedy_matching_spec(2_000, lam=0.01)
    show("greedy matching", spec, plugin)

    # the sigma mechanics on the classic box: sigma = T - margin here
    spec, plugin = dt.balls_in_bins_spec(10_000, lam=1e-3)
    sol = dt.solve_ode(spec)
    print(f"sigma example: sigma={sol.sigma:.6f} vs "
          f"T - margin = {2 - 3 * math.e**2 * 1e-3:.6f}")


if __name__ == "__main__":
    main()
