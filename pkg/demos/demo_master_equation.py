"""Grid master equation vs the closed forms, and the Dyson expansion.

All generators are diagonal in the position (x) mass basis, so the master
equation evolves each density-matrix entry by a scalar exponential.  The
numeric grid evolver therefore reproduces the closed-form transition
probabilities to near machine precision -- and the truncated interaction-
picture (Dyson) expansion approaches it at the expected power of the
coupling.

Run:  python3 demos/demo_master_equation.py
"""

import numpy as np

from mesoncollapse import (DensityBlocks, Grid, ModelParams,
                           SuperoperatorKernel, build_qmupl, dyson_expand,
                           evolve_me_qmupl_exact, make_gaussian_state,
                           me_flavor_probabilities,
                           qmupl_flavor_probabilities,
                           transition_probability)


def main():
    params = ModelParams(lam=0.2, alpha=1.0, dim=1)
    grid = Grid.centered(128, 16.0)
    model = build_qmupl(params, grid)
    rho0 = DensityBlocks.from_state(make_gaussian_state(params, grid, "M0"))

    dt = 0.01
    times = dt * np.arange(50, 401, 50)
    record = me_flavor_probabilities(model, rho0, times, dt)
    ps, _ = qmupl_flavor_probabilities(params, times)

    print("grid ME vs closed form (QMUPL, dim=1)")
    print("%8s %14s %14s %10s" % ("t", "p_same(ME)", "p_same(exact)", "|diff|"))
    for t, a, b in zip(times, record.p_same, ps):
        print("%8.2f %14.10f %14.10f %10.1e" % (t, a, b, abs(a - b)))

    print("\nDyson truncation error at t = 1 (flavor probability)")
    print("%10s %12s %12s %12s" % ("lambda", "order 0", "order 1", "order 2"))
    for lam in (0.04, 0.02, 0.01):
        p = ModelParams(lam=lam, alpha=1.0)
        m = build_qmupl(p, grid)
        r0 = DensityBlocks.from_state(make_gaussian_state(p, grid, "M0"))
        kernel = SuperoperatorKernel.from_model(m)
        exact = transition_probability(evolve_me_qmupl_exact(r0, p, 1.0), "M0bar")
        errs = [abs(transition_probability(dyson_expand(kernel, r0, 1.0, k),
                                           "M0bar", validate=False) - exact)
                for k in (0, 1, 2)]
        print("%10g %12.2e %12.2e %12.2e" % (lam, *errs))
    print("halving lambda divides the order-k error by ~2^(k+1)")


if __name__ == "__main__":
    main()
