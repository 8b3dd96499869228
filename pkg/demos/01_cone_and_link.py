"""The T^2-cone, its flat link and the special Lagrangian condition.

Samples the cone in a ball, checks that every tangent plane is calibrated,
and compares the sampled mass with the closed-form ball volume.
"""

import numpy as np

from slcone.calib_core import defect_total, flat_structure
from slcone.hl_cone import LINK_METRIC, cone_ball_volume, link_area, link_metric_numeric, sample_cone
from slcone.varifold import density_ratio, energy

S = flat_structure(3)
print("flat structure: psi residual", S.psi_residual())

g = link_metric_numeric(0.4, 1.9)
print("link metric at (0.4, 1.9):\n", g)
print("closed form:\n", LINK_METRIC)
print(f"link area {link_area():.10f}; unit-ball volume {cone_ball_volume():.10f}")

C = sample_cone(0.0, 2.0, 200, 48)
print(f"{len(C)} cone samples; max calibration defect {defect_total(S, C.frames).max():.2e}")
for R in (0.5, 1.0, 2.0):
    print(f"  density ratio in B_{R:g}: {density_ratio(C, None, R):.6f}")
# the cone is radial, so its monotonicity energy vanishes
print(f"energy about the vertex: {energy(C):.2e}")
print(f"energy about a point off the vertex: {energy(C, np.r_[0.05, np.zeros(5)]):.4f}")
