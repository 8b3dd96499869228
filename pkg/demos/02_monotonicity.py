"""Monotonicity of the density ratio along the smoothing L1.

The density ratio of a stationary varifold grows exactly by the annulus
energy.  For L1 sampled on a plane grid aligned with the ball radii, the
residual of that identity shrinks at second order.
"""

from slcone.hl_cone import cone_ball_volume
from slcone.local_models import model_ball_mass, plane_radius_for_ball, sample_model, sample_model_aligned
from slcone.varifold import density_table, monotonicity_residual

theta = cone_ball_volume()
P = plane_radius_for_ball(8.0)
print(f"L1 inside B_8 is the plane disc |w| <= {P:.6f}")

prev = None
for n_rho in (100, 200, 400, 800):
    V = sample_model("L1", P, n_rho, 4)
    res = monotonicity_residual(V, 0.5, 8.0)
    note = "" if prev is None else f"  ratio {prev / res:.2f}"
    print(f"n_rho={n_rho:4d}: residual {res:+.3e}  (tolerance 1e-3 theta = {1e-3 * theta:.2e}){note}")
    prev = res

# cells aligned with the table radii remove the boundary-cell error
radii = [1.5, 2.0, 4.0, 8.0]
V = sample_model_aligned("L1", radii, 100, 4)
print("\n rho   density     exact")
for rho, mass, ratio, _ in density_table(V, [R * (1 + 1e-12) for R in radii]):
    print(f"{rho:5.2f}  {ratio:.6f}  {model_ball_mass('L1', rho) / rho**3:.6f}")
