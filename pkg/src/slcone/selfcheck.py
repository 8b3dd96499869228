"""Fast invariant suite behind ``slcone selfcheck``."""

import numpy as np


def _check(results, name, ok, detail):
    results.append((name, bool(ok), detail))


def run_checks(seed=0):
    """Run the invariant checks; returns ``[(name, passed, detail), ...]``."""
    from .asymptotics import decay_report, graph_over_cone, recenter
    from .calib_core import defect_total, flat_structure
    from .hl_cone import ConeGrid, cone_ball_volume, link_metric_numeric, sample_cone
    from .local_models import (
        LModel,
        ScaledSurface,
        fiber_coords,
        fiber_label,
        fiber_point,
        plane_radius_for_ball,
        sample_model,
        solve_phi,
    )
    from .spectral import spectrum_error, stability_check
    from .varifold import energy, mass_in_ball, monotonicity_residual

    rng = np.random.default_rng(seed)
    out = []
    S = flat_structure(3)
    _check(out, "psi factor", S.psi_residual() < 1e-14, f"residual {S.psi_residual():.1e}")

    th = rng.uniform(0, 2 * np.pi, (100, 2))
    g = link_metric_numeric(th[:, 0], th[:, 1])
    err = np.abs(g - np.array([[2, 1], [1, 2]]) / 3).max()
    _check(out, "link metric", err < 1e-12, f"max error {err:.1e}")

    C = sample_cone(0.0, 2.0, 200, 16)
    rel = abs(mass_in_ball(C, None, 1.0) / cone_ball_volume() - 1)
    _check(out, "cone mass", rel < 5e-3, f"relative error {rel:.2e}")
    _check(out, "cone energy", energy(C) < 1e-12, f"{energy(C):.1e}")

    e32, e64 = spectrum_error(32), spectrum_error(64)
    _check(out, "link spectrum", e64 < 0.01 and e32 / e64 > 3.5, f"errors {e32:.2e}, {e64:.2e}")
    v = stability_check()
    _check(out, "stability", v.stable, v.summary())

    phi = solve_phi(1, 1, 0, 1)
    _check(out, "cubic solver", abs(phi**3 + 2 * phi**2 + phi - 1) < 1e-14, f"phi = {phi:.15f}")

    c = np.array([0.7, -0.3, 0.4])
    t = rng.normal(size=100)
    u = np.exp(1j * rng.uniform(0, 2 * np.pi, 100))
    w = np.exp(1j * rng.uniform(0, 2 * np.pi, 100))
    z = fiber_point(c, t, u, w)
    t2, u2, w2 = fiber_coords(c, z)
    rt = max(np.abs(t - t2).max(), np.abs(u - u2).max(), np.abs(w - w2).max())
    lab = np.abs(fiber_label(z) - c).max()
    _check(out, "fiber chart", rt < 1e-12 and lab < 1e-12, f"round trip {rt:.1e}, label {lab:.1e}")

    worst = 0.0
    for model in ("L1", "L2", "L3"):
        V = sample_model(model, 6.0, 40, 16)
        worst = max(worst, defect_total(S, V.frames).max())
    _check(out, "model defects", worst < 1e-9, f"max {worst:.1e}")

    L = sample_model("L1", plane_radius_for_ball(8.0), 200, 8)
    res = monotonicity_residual(L, 0.5, 8.0)
    tol = 1e-3 * cone_ball_volume()
    _check(out, "monotonicity", abs(res) < tol, f"residual {res:.2e} (tol {tol:.1e})")

    grid = ConeGrid.shells(np.geomspace(4, 16, 7), 16)
    lead = decay_report(graph_over_cone("L1", grid)).leading_exponent
    _check(out, "L1 decay", abs(lead + 1) < 0.1, f"exponent {lead:.4f}")

    b = np.array([0.01, 0, 0.02, 0, 0, -0.01])
    rc = recenter(ScaledSurface(LModel("L1"), 1.0, b), ConeGrid.shells(np.geomspace(8, 16, 5), 16))
    err = np.abs(rc.b - b).max()
    _check(out, "recenter", err < 5e-3, f"error {err:.1e}")
    return out
