"""Graphs over the cone, mode-by-mode decay rates and translational recentering.

A target surface (an explicit chart or a raw sampled varifold) is written as
a normal graph over the cone on an annulus: for each cone node ``x`` we find
the target point in the affine normal space ``x + N_x C``.  The normal
displacement is decomposed into link eigenmodes shell by shell and each mode
is fitted by a power law in ``r``.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .hl_cone import GRAPH_CHART_BOUND, ConeGrid, NormalField, cyl_norm
from .local_models import ChartSurface, ScaledSurface, model_surface
from .spectral import fit_decay_exponent, link_spectrum, project_on_modes, snap_exponent
from .varifold import DiscreteVarifold, translate

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 50
NOISE_FLOOR = 1e-12
SNAP_TOL = 0.15
RECENTER_TOL = 1e-12


@dataclass
class NormalGraphField:
    """Normal displacement of a target over cone nodes.

    ``components`` has shape ``(n_r, N, N, 3)`` in the cone's normal frame;
    ``residuals`` is the per-node tangential mismatch of the solve (Newton)
    or the in-plane offset from the nearest sample (raw varifolds).
    """

    grid: ConeGrid
    components: np.ndarray
    residuals: np.ndarray
    method: str = "newton"

    @property
    def field(self):
        return NormalField(self.grid, self.components)

    def displacement(self):
        return self.field.vectors()

    def sup_profile(self):
        """Largest displacement length on each shell."""
        return np.sqrt((self.components**2).sum(axis=-1)).reshape(self.grid.n_r, -1).max(axis=1)


def _as_target(target):
    if isinstance(target, (ChartSurface, DiscreteVarifold)):
        return target
    return model_surface(target)


def _translated(target, b):
    """``target + b`` for charts and varifolds."""
    b = np.asarray(b, dtype=float)
    if isinstance(target, DiscreteVarifold):
        return translate(target, b)
    if isinstance(target, ScaledSurface):
        return ScaledSurface(target.base, target.s, target.b + b)
    return ScaledSurface(target, 1.0, b)


def _newton_graph(surface, x0, T, Nf, r):
    p = surface.guess(x0[:, :3] + 1j * x0[:, 3:])
    for _ in range(NEWTON_MAX_ITER):
        X, D = surface.chart(p)
        res = np.einsum("mkj,mj->mk", T, X - x0)
        err = np.abs(res).max(axis=1) / np.maximum(r, 1.0)
        if err.max() < NEWTON_TOL:
            break
        J = np.einsum("mkj,maj->mka", T, D)
        p = p - np.linalg.solve(J, res[..., None])[..., 0]
    X, _ = surface.chart(p)
    res = np.abs(np.einsum("mkj,mj->mk", T, X - x0)).max(axis=1)
    comps = np.einsum("mkj,mj->mk", Nf, X - x0)
    return comps, res


def _projection_graph(V, x0, T, Nf, k=8):
    tree = cKDTree(V.points)
    k = min(k, len(V))
    _, idx = tree.query(x0, k=k)
    idx = np.atleast_2d(idx).reshape(len(x0), k)
    S = V.frames[idx]  # (M, k, 3, 6)
    y = V.points[idx]
    # y + S^T a = x0 + N^T c
    A = np.concatenate([np.swapaxes(S, -1, -2), -np.swapaxes(Nf[:, None], -1, -2).repeat(k, axis=1)], axis=-1)
    rhs = x0[:, None, :] - y
    sol = np.linalg.solve(A, rhs[..., None])[..., 0]
    a, c = sol[..., :3], sol[..., 3:]
    offset = np.linalg.norm(a, axis=-1)
    best = np.argmin(offset, axis=1)
    rows = np.arange(len(x0))
    return c[rows, best], offset[rows, best]


def graph_over_cone(target, grid, tube=GRAPH_CHART_BOUND):
    """Normal graph of ``target`` over the cone nodes of ``grid``.

    Parameters
    ----------
    target : ChartSurface, DiscreteVarifold or model id
        Charts are solved by Newton iteration (tolerance ``NEWTON_TOL``
        relative to ``max(r, 1)``); varifolds by nearest-sample projection
        onto the sample's tangent plane.
    grid : ConeGrid
    tube : float
        Tubular radius in cylindrical units: displacements must satisfy
        ``|u| < tube * r``.
    """
    target = _as_target(target)
    x0 = grid.nodes().reshape(-1, 6)
    T = np.ascontiguousarray(grid.tangent_frames()).reshape(-1, 3, 6)
    Nf = np.ascontiguousarray(grid.normal_frames()).reshape(-1, 3, 6)
    r = np.linalg.norm(x0, axis=1)
    if isinstance(target, DiscreteVarifold):
        comps, res = _projection_graph(target, x0, T, Nf)
        method = "projection"
        ok = np.isfinite(comps).all(axis=1)
    else:
        with np.errstate(all="ignore"):
            comps, res = _newton_graph(target, x0, T, Nf, r)
        method = "newton"
        ok = np.isfinite(comps).all(axis=1) & (res < max(NEWTON_TOL, 1e-10) * np.maximum(r, 1.0))
    ok &= np.linalg.norm(np.nan_to_num(comps, nan=np.inf), axis=1) < tube * r
    if not ok.all():
        raise ValueError(f"not graphical on annulus: {int((~ok).sum())} of {len(ok)} nodes failed")
    shape = grid.shape
    return NormalGraphField(grid, comps.reshape(shape + (3,)), res.reshape(shape), method)


def translation_basis(grid):
    """Normal parts of the six unit translations, shape (n_r, N, N, 3, 6).

    Entry ``[..., k, j]`` is the k-th normal component of the j-th unit vector.
    """
    return np.asarray(grid.normal_frames())


def lambda1_block(field):
    """Least-squares ``b`` with normal part closest to the displacement.

    Shells are weighted by their area ``r^2``.
    """
    grid = field.grid
    B = translation_basis(grid).reshape(grid.n_r, -1, 6)
    u = field.components.reshape(grid.n_r, -1)
    w = grid.r[:, None]  # sqrt of the r^2 shell weight
    A = (B * w[..., None]).reshape(-1, 6)
    y = (u * w).reshape(-1)
    b, *_ = np.linalg.lstsq(A, y, rcond=None)
    return b


@dataclass
class ModeDecay:
    n1: int
    n2: int
    kind: str
    component: int
    exponent: float
    snapped: float
    off_grid: bool
    coefficient: float
    residual: float

    @property
    def label(self):
        return f"{self.kind}({self.n1},{self.n2})[{self.component}]"


@dataclass
class AsymptoticReport:
    radii: np.ndarray
    modes: list
    leading_exponent: float
    leading_snapped: float
    leading_stderr: float
    lambda1_block: np.ndarray
    tail_norm: float
    exponent_grid: list = field(default_factory=list)

    def reconstruct(self, grid):
        """Field synthesized from the fitted mode terms, shape (n_r, N, N, 3)."""
        from .spectral import RealMode

        R, T1, T2 = grid.mesh()
        out = np.zeros(grid.shape + (3,))
        for md in self.modes:
            x = md.snapped if md.snapped is not None else md.exponent
            v = RealMode(md.n1, md.n2, md.kind)(T1, T2)
            out[..., md.component] += md.coefficient * R**x * v
        return out

    def write_csv(self, path, header_comment=None):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# {header_comment or 'normal displacement over the cone: per-mode power laws'}\n")
            fh.write("# exponent[1]: radial power of the mode amplitude; coefficient[length^(1-exponent)]\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["mode", "exponent", "coefficient", "residual"])
            for md in self.modes:
                x = md.snapped if md.snapped is not None else md.exponent
                w.writerow([md.label, repr(float(x)), repr(float(md.coefficient)), repr(float(md.residual))])


def displacement_exponent_grid(m=3, gamma_max=12.0, window=(-6.0, 4.0)):
    """Admissible radial rates of normal displacements.

    A harmonic potential ``r^x v`` gives displacement rate ``x - 1`` and the
    rates ``x`` themselves appear for directly synthesized fields; both sets
    are included.
    """
    lam = link_spectrum(gamma_max, m).exponent_set()
    vals = sorted({round(v, 12) for v in lam} | {round(v - 1, 12) for v in lam})
    lo, hi = window
    return [v for v in vals if lo <= v <= hi]


def _power_fit(r, y, x, sw):
    A = r**x
    coef = float(np.dot(A * sw**2, y) / np.dot(A * sw**2, A))
    res = float(np.sqrt(np.mean((coef * A - y) ** 2)))
    return coef, res


def decay_report(field, gamma_max=8.0, m=3, snap_tol=SNAP_TOL):
    """Per-mode power-law fits of a normal graph field.

    Each displacement component is projected on the real link eigenbasis up
    to ``gamma_max`` on every shell.  Modes whose amplitude exceeds the noise
    floor on every shell get a free log-log exponent, snapped to the
    admissible rate grid when within ``snap_tol``; the coefficient is then
    refitted with the snapped rate.  The leading exponent comes from the
    shell-wise sup-norm profile.
    """
    grid = field.grid
    if grid.n_r < 4:
        raise ValueError("need at least four shells")
    basis = link_spectrum(gamma_max, m).real_basis()
    xgrid = displacement_exponent_grid(m)
    r = grid.r
    sw = np.sqrt(r ** (m - 1))
    scale = max(float(np.abs(field.components).max()), 1e-300)
    modes = []
    for comp in range(3):
        proj = project_on_modes(field.components[..., comp], basis, grid)
        for k, mode in enumerate(basis):
            y = proj[:, k]
            if np.abs(y).min() <= NOISE_FLOOR * max(scale, 1.0) or np.abs(y).max() < 1e-9 * scale:
                continue
            if not (np.all(y > 0) or np.all(y < 0)):
                continue
            fit = fit_decay_exponent(r, np.abs(y))
            snapped = snap_exponent(fit.exponent, xgrid, snap_tol)
            x = snapped if snapped is not None else fit.exponent
            coef, res = _power_fit(r, y, x, sw)
            modes.append(ModeDecay(mode.n1, mode.n2, mode.kind, comp, fit.exponent, snapped, snapped is None, coef, res))
    modes.sort(key=lambda md: (-(md.snapped if md.snapped is not None else md.exponent), md.component, md.n1, md.n2, md.kind))

    prof = field.sup_profile()
    if np.all(prof > 0):
        lead = fit_decay_exponent(r, prof)
        lead_x, lead_se = lead.exponent, lead.stderr
        lead_snap = snap_exponent(lead_x, xgrid, snap_tol)
    else:
        lead_x, lead_se, lead_snap = None, None, None
    report = AsymptoticReport(r.copy(), modes, lead_x, lead_snap, lead_se, lambda1_block(field), 0.0, xgrid)
    report.tail_norm = float(np.abs(field.components - report.reconstruct(grid)).max())
    return report


@dataclass
class RecenterResult:
    b: np.ndarray
    iterations: int
    already_centered: bool
    residual_block: np.ndarray
    initial_block: np.ndarray


def recenter(target, grid, max_iter=10, tol=RECENTER_TOL):
    """Estimate the translation ``b`` with ``target - b`` centered on the cone.

    Iterates ``b <- b + lambda1_block(graph(target - b))`` until the update
    falls below ``tol``; the fixed point removes the translation mode
    exactly for translated exact models.  A first block below the noise
    floor returns ``b = 0`` with ``already_centered`` set.
    """
    target = _as_target(target)
    fld = graph_over_cone(target, grid)
    first = lambda1_block(fld)
    noise = NOISE_FLOOR * max(1.0, float(grid.r.max()))
    if np.linalg.norm(first) < noise:
        return RecenterResult(np.zeros(6), 0, True, first, first)
    b = first.copy()
    it = 1
    block = first
    for it in range(2, max_iter + 1):
        block = lambda1_block(graph_over_cone(_translated(target, -b), grid))
        b = b + block
        if np.linalg.norm(block) < tol:
            break
    return RecenterResult(b, it, False, block, first)
