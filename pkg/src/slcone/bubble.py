"""Bubble-scale detection, extraction and classification of the bubble.

For a center ``y`` the scale ``delta(y)`` is where the energy of the annulus
``A_{delta, rho}(y)`` first reaches ``eps / 2`` when ``delta`` decreases
from ``rho``.  The bubble center minimizes ``delta`` over a search ball of
radius ``rho * eps``; rescaling by ``1 / delta`` at that center extracts the
bubble, which is then matched against ``s L + b`` for the local models.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .asymptotics import recenter
from .hl_cone import ConeGrid, cone_ball_volume
from .local_models import (
    ModelId,
    classify_fiber,
    f_holo,
    fiber_label,
    model_ball_mass,
)
from .varifold import ENERGY_EXCLUSION, energy_density, mass_in_ball, rescale, translate

DEFAULT_EPS = cone_ball_volume() / 10.0
DEFAULT_RHO = 0.5
LABEL_SPREAD_TOL = 1e-8
LS_SUBSAMPLE = 3000


class ClassificationError(RuntimeError):
    """The input is not of the form ``s L + b`` for a classified model."""


def _annulus_energies(V, y, rho):
    """Radii (descending) and cumulative energies of samples in ``B_rho(y)``."""
    y = np.asarray(y, dtype=float)
    d = V.points - y
    r = np.linalg.norm(d, axis=1)
    near = r < rho
    if np.any(near & (r < ENERGY_EXCLUSION)):
        warnings.warn("sample at the center excluded from the energy")
        near &= r >= ENERGY_EXCLUSION
    V_in = V.subset(near)
    e = energy_density(V_in, y) * V_in.weights
    rr = r[near]
    order = np.argsort(-rr, kind="stable")
    return rr[order], np.cumsum(e[order])


def energy_profile(V, y, rho, delta_grid):
    """Energies of ``A_{delta, rho}(y)`` for each ``delta`` in an increasing grid."""
    delta_grid = np.asarray(delta_grid, dtype=float)
    if np.any(np.diff(delta_grid) <= 0):
        raise ValueError("delta grid must be strictly increasing")
    if delta_grid.size and (delta_grid[0] <= 0 or delta_grid[-1] >= rho):
        raise ValueError("delta grid must lie in (0, rho)")
    rr, cum = _annulus_energies(V, y, rho)
    # samples with r >= delta are the first k entries of the descending list
    k = np.searchsorted(-rr, -delta_grid, side="right")
    prof = np.where(k > 0, cum[np.maximum(k - 1, 0)], 0.0) if len(cum) else np.zeros_like(delta_grid)
    return prof


def _scale_and_total(V, y, rho, eps):
    if eps <= 0:
        raise ValueError("eps must be positive")
    rr, cum = _annulus_energies(V, y, rho)
    total = float(cum[-1]) if len(cum) else 0.0
    if total < eps / 2:
        return None, total
    k = int(np.searchsorted(cum, eps / 2, side="left"))
    return float(rr[k]), total


def bubble_scale(V, y, rho=DEFAULT_RHO, eps=DEFAULT_EPS):
    """``delta(y)``: the radius at which the annulus energy reaches ``eps / 2``.

    Exact on discrete input: samples are accumulated from the outside in and
    the radius of the sample that crosses the threshold is returned.
    ``None`` when the whole ball carries less than ``eps / 2``.
    """
    return _scale_and_total(V, y, rho, eps)[0]


def _ball_lattice(radius, spacing, dim=6):
    n = int(np.floor(radius / spacing + 1e-12))
    ax = np.arange(-n, n + 1) * spacing
    pts = np.stack(np.meshgrid(*([ax] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    keep = np.linalg.norm(pts, axis=1) <= radius * (1 + 1e-12)
    return pts[keep]


@dataclass
class BubbleScan:
    rho: float
    eps: float
    centers: np.ndarray
    deltas: np.ndarray
    y_star: np.ndarray = None
    delta_star: float = None
    spacing: float = None
    plateau: int = 0
    evaluations: int = 0
    conical_at: np.ndarray = None

    @property
    def found(self):
        return self.delta_star is not None

    def report(self):
        return {
            "y*": None if self.y_star is None else [float(v) for v in self.y_star],
            "delta*": self.delta_star,
            "rho": self.rho,
            "eps": self.eps,
            "spacing": self.spacing,
            "plateau": self.plateau,
            "conical_at": None if self.conical_at is None else [float(v) for v in self.conical_at],
        }


def _better(d_new, y_new, d_old, y_old):
    if d_old is None:
        return d_new is not None
    if d_new is None:
        return False
    if d_new != d_old:
        return d_new < d_old
    return np.linalg.norm(y_new) < np.linalg.norm(y_old)


def bubble_center(V, rho=DEFAULT_RHO, eps=DEFAULT_EPS, center_grid=None, spacing=None, refine_levels=3):
    """Minimize ``delta`` over candidate centers.

    Parameters
    ----------
    center_grid : (K, 6) array, optional
        Explicit candidates.  By default a cubic lattice of spacing
        ``spacing`` (default ``rho * eps / 2``) inside the ball of radius
        ``rho * eps`` about the origin.
    refine_levels : int
        Second pass: compass search around the coarse minimizer, halving the
        step ``refine_levels`` times.  Ties go to the smaller ``|y|``.

    Returns
    -------
    BubbleScan
        ``plateau`` counts coarse candidates within 1% of the coarse minimum.
        The search presumes the energy about every coarse candidate is at
        least ``eps``; a candidate below that is a conical point, reported in
        ``conical_at`` with no bubble.
    """
    search = rho * eps
    if center_grid is None:
        spacing = search / 2 if spacing is None else spacing
        center_grid = _ball_lattice(search, spacing)
    center_grid = np.atleast_2d(np.asarray(center_grid, dtype=float))
    if len(center_grid) == 0:
        raise ValueError("empty center grid")
    evals = [_scale_and_total(V, y, rho, eps) for y in center_grid]
    deltas = [d for d, _ in evals]
    scan = BubbleScan(rho, eps, center_grid, np.array([np.nan if d is None else d for d in deltas]),
                      spacing=spacing, evaluations=len(center_grid))
    totals = np.array([e for _, e in evals])
    if np.any(totals < eps):
        scan.conical_at = center_grid[int(np.argmin(totals))].copy()
        return scan
    best_d, best_y = None, None
    for d, y in zip(deltas, center_grid):
        if _better(d, y, best_d, best_y):
            best_d, best_y = d, y
    if best_d is None:
        return scan
    vals = scan.deltas[np.isfinite(scan.deltas)]
    scan.plateau = int((vals <= best_d * 1.01).sum())

    step = spacing if spacing is not None else search / 2
    for _ in range(refine_levels):
        step /= 2
        moved = True
        while moved:
            moved = False
            for k in range(center_grid.shape[1]):
                for sgn in (1.0, -1.0):
                    y = best_y.copy()
                    y[k] += sgn * step
                    if np.linalg.norm(y) > search:
                        continue
                    d = bubble_scale(V, y, rho, eps)
                    scan.evaluations += 1
                    if _better(d, y, best_d, best_y):
                        best_d, best_y, moved = d, y, True
    scan.y_star = best_y
    scan.delta_star = best_d
    scan.spacing = step
    return scan


def extract_bubble(V, y, delta):
    """``(V - y) / delta``."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    return rescale(translate(V, -np.asarray(y, dtype=float)), 1.0 / delta)


@dataclass
class ModelFit:
    model: ModelId
    s: float
    b: np.ndarray
    residual: float
    label: np.ndarray
    label_spread: float
    diagnostics: dict = field(default_factory=dict)

    def report(self):
        return {
            "model": self.model.value,
            "s": self.s,
            "b": [float(v) for v in self.b],
            "residual": self.residual,
            "label": [float(v) for v in self.label],
            "label_spread": self.label_spread,
        }


def _gap_radii(r, targets):
    """Radii near ``targets`` placed midway between consecutive sample radii."""
    rs = np.unique(r)
    out = []
    for t in targets:
        k = int(np.searchsorted(rs, t))
        if 0 < k < len(rs):
            out.append(0.5 * (rs[k - 1] + rs[k]))
    return out


def _fit_label(W, b0, c0):
    idx = np.linspace(0, len(W) - 1, min(len(W), LS_SUBSAMPLE)).astype(int)
    pts = W.points[idx]
    scale = np.sqrt(np.mean(np.sum(pts**2, axis=1)))

    def resid(v):
        return ((fiber_label(pts - v[:6]) - v[6:]) / scale).ravel()

    sol = least_squares(resid, np.concatenate([b0, c0]), xtol=1e-15, ftol=1e-15, gtol=1e-15)
    return sol.x[:6], sol.x[6:]


def classify_bubble(W, annulus=(0.5, 0.85), n_shells=6, n_theta=24):
    """Match ``W`` against ``s L + b`` for ``L`` in {Cone, L1, L2, L3}.

    Pipeline: centroid, translational recentering on an outer annulus
    (fractions ``annulus`` of the sample extent), joint least-squares fit of
    the translation and the fiber label, classification of the label,
    scale from the label, and a mass comparison on test balls about ``b``
    against the exact ball volume of ``s L``.

    Raises
    ------
    ClassificationError
        If the fibration is not constant on the recentered samples, or the
        label is off the discriminant, or the samples lie on the mirror piece.
    """
    b0 = np.average(W.points, axis=0, weights=W.weights)
    R_W = float(W.radii(b0).max())
    diag = {"centroid": b0.tolist(), "extent": R_W}
    try:
        radii = np.geomspace(annulus[0] * R_W, annulus[1] * R_W, n_shells)
        rc = recenter(translate(W, -b0), ConeGrid.shells(radii, n_theta), max_iter=3)
        b1 = b0 + rc.b
        diag["recenter"] = rc.b.tolist()
    except (ValueError, np.linalg.LinAlgError) as exc:
        b1 = b0
        diag["recenter"] = f"skipped: {exc}"
    c0 = np.median(fiber_label(W.points - b1), axis=0)
    b, c = _fit_label(W, b1, c0)
    labels = fiber_label(W.points - b)
    spread = float(np.abs(labels - c).max())
    diag["spread_tol"] = LABEL_SPREAD_TOL * max(1.0, R_W**2)
    if spread > diag["spread_tol"]:
        raise ClassificationError(f"not in the classified family: fiber label varies by {spread:.3e}")
    cls = classify_fiber(c, tol=max(1e-9, 10 * spread))
    diag["fiber_class"] = cls.kind
    if cls.kind == "SmoothCylinder":
        raise ClassificationError(
            f"not in the classified family: label {np.round(c, 6).tolist()} is off the discriminant"
        )
    if np.median(f_holo(W.points - b).real) < 0:
        raise ClassificationError("not in the classified family: samples lie on the mirror piece")
    model = cls.model
    s = 1.0 if model is ModelId.Cone else cls.scale

    r = W.radii(b)
    targets = s * np.array([1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0])
    targets = targets[targets < 0.95 * r.max()]
    balls = _gap_radii(r, targets)
    theta = cone_ball_volume()
    if balls:
        errs = [abs(mass_in_ball(W, b, R) - model_ball_mass(model, R, s)) / (theta * R**3) for R in balls]
        residual = float(max(errs))
    else:
        residual = float("nan")
    diag["test_radii"] = [float(x) for x in balls]
    return ModelFit(model, float(s), b, residual, c, spread, diag)
