"""Bubbling off: find the scale and center of a shrunken L1 and classify it.

V = t L1 converges to the cone as t -> 0.  The scale at which the annulus
energy first reaches eps / 2 tracks t, and rescaling there recovers L1.
"""

import time

import numpy as np

from slcone.bubble import ClassificationError, bubble_center, classify_bubble, extract_bubble
from slcone.local_models import plane_radius_for_ball, sample_fiber, sample_model
from slcone.varifold import rescale

for t in (0.05, 0.1):
    P = plane_radius_for_ball(1.0 / t)
    V = rescale(sample_model("L1", P, int(np.ceil(P / 0.07)), 16), t)
    t0 = time.perf_counter()
    scan = bubble_center(V)
    W = extract_bubble(V, scan.y_star, scan.delta_star)
    fit = classify_bubble(W)
    print(f"t={t}: |y*|={np.linalg.norm(scan.y_star):.1e}, delta*/t={scan.delta_star / t:.4f}, "
          f"model {fit.model.value}, s*delta*/t={fit.s * scan.delta_star / t:.6f}, "
          f"residual {fit.residual:.1e} ({time.perf_counter() - t0:.1f}s)")

try:
    classify_bubble(sample_fiber(np.array([1.0, 1.0, 1.0]), 4.0, 100, 24))
except ClassificationError as exc:
    print("smooth fiber:", exc)
