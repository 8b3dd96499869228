"""The T^2-invariant fibration of C^3 and its singular fibers.

Smooth fibers are cylinders; labels on the three rays of the discriminant
give scaled copies of L1, L2 and L3.
"""

import numpy as np

from slcone.calib_core import defect_total, flat_structure
from slcone.local_models import (
    classify_fiber,
    fiber_coords,
    fiber_label,
    fiber_point,
    sample_fiber,
    sample_model,
    solve_phi,
)

S = flat_structure(3)
print(f"solve_phi(1, 1, 0, 1) = {solve_phi(1, 1, 0, 1):.15f}")

for c in ([1.0, 1.0, 1.0], [4.0, 0.0, 0.0], [0.0, 2.25, 0.0], [-1.0, -1.0, 0.0], [0.0, 0.0, 0.0]):
    cls = classify_fiber(np.array(c))
    model = None if cls.model is None else cls.model.value
    print(f"label {c}: {cls.kind:14s} model {model}  scale {cls.scale}")

c = np.array([2.0, 0.5, -0.3])
V = sample_fiber(c, 3.0, 64, 16)
print(f"\nsmooth fiber {c.tolist()}: {len(V)} samples, defect {defect_total(S, V.frames).max():.1e}, "
      f"label spread {np.abs(fiber_label(V.points) - c).max():.1e}")
z = fiber_point(c, 0.7, np.exp(0.3j), np.exp(2.0j))
t, u, v = fiber_coords(c, z)
print(f"chart inverse at (0.7, e^0.3i, e^2i): t={t:.12f}, arg u={np.angle(u):.12f}, arg v={np.angle(v):.12f}")

for model in ("L1", "L2", "L3"):
    W = sample_model(model, 4.0, 40, 8, s=1.5)
    print(f"1.5*{model}: label {np.round(fiber_label(W.points).mean(axis=0), 12)}")
