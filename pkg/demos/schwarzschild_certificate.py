"""Schwarzschild-type hypersurface: pinching, instability and volume growth.

Run with ``python3 demos/schwarzschild_certificate.py``.
"""

import numpy as np

from zsc.immersion.chart import chart_batch
from zsc.immersion.models import circle_cylinder, interior_points, schwarzschild
from zsc.immersion.radial import growth_exponent
from zsc.invariants import PINCHING_MAX, symmetric_functions
from zsc.stability import instability_search
from zsc.tubes import constant_tube, self_intersection_test


def main():
    model = schwarzschild(m=1.0)

    # every point attains the extremal pinching 4/27
    lam = chart_batch(model, interior_points(model, 200, seed=0)).eigenvalues
    H, R, K = symmetric_functions(lam)
    print(f"max |R|            {np.max(np.abs(R)):.2e}")
    print(f"pinching - 4/27    {np.max(np.abs(-K / H**3 - PINCHING_MAX)):.2e}")

    # a radial bump with negative second variation
    rep = instability_search(model, "bump", budget=500, seed=0)
    print(f"Q1 certificate     {rep.q1_value:.6f} +- {rep.error:.1e}")

    alpha, se = growth_exponent(model, np.geomspace(5.0, 50.0, 10))
    print(f"volume growth      r^{alpha:.3f} (+- {se:.1e})")

    # tubes about the unit circle cylinder flip at the focal radius 1
    cyl = circle_cylinder()
    for h in (0.5, 1.5):
        res = self_intersection_test(constant_tube(cyl, h, 3.0))
        print(f"cylinder tube h={h}  {'embedded' if res.embedded else 'self-intersecting'}")


if __name__ == "__main__":
    main()
