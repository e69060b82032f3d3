"""Closed-form flavor oscillations under the two collapse models.

The particle -> particle probability oscillates as cos(dm t) with a
damping envelope that is algebraic for the position-localization (QMUPL)
model and exponential for the smeared-density (CSL) model.  The spatial
dimension enters the QMUPL envelope as an exponent dim/2 -- getting this
exponent wrong (1/2 instead of 3/2 at dim=3) is a visible, fittable
error, which this script demonstrates.

Run:  python3 demos/demo_closed_forms.py
"""

import numpy as np

from mesoncollapse import (ModelParams, csl_flavor_probabilities,
                           qmupl_flavor_probabilities)


def main():
    times = np.linspace(0.0, 25.0, 11)

    print("QMUPL, lam*alpha*dm^2/(2 m0^2) = 0.1, dim = 1 vs dim = 3")
    print("%8s %12s %12s" % ("t", "p_same(d=1)", "p_same(d=3)"))
    p1 = ModelParams(lam=0.2, alpha=1.0, dim=1)
    p3 = ModelParams(lam=0.2, alpha=1.0, dim=3)
    for t in times:
        print("%8.2f %12.6f %12.6f"
              % (t, qmupl_flavor_probabilities(p1, t)[0],
                 qmupl_flavor_probabilities(p3, t)[0]))

    # the envelope exponent is recoverable by a log-log fit
    t = np.linspace(0.5, 100.0, 500)
    x = np.log1p(0.1 * t)
    for params in (p1, p3):
        env = 2.0 * (qmupl_flavor_probabilities(params, t)[0] - 0.5) / np.cos(t)
        slope = np.polyfit(x, np.log(env), 1)[0]
        print("dim=%d envelope ~ (1 + 0.1 t)^%.3f   (expect %.1f)"
              % (params.dim, slope, -params.dim / 2.0))

    print("\nCSL, gamma = 0.4, rC = 0.5: exponential envelope")
    pc = ModelParams(gamma=0.4, rC=0.5)
    print("%8s %12s %12s" % ("t", "p_same", "p_other"))
    for t in times:
        ps, po = csl_flavor_probabilities(pc, t)
        print("%8.2f %12.6f %12.6f" % (t, ps, po))


if __name__ == "__main__":
    main()
