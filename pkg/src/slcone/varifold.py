"""Discrete integral varifolds and the functionals acting on them.

A varifold is approximated by weighted atoms ``(y, S, w)``: a point, an
oriented orthonormal frame of the tangent m-plane at that point, and an
m-dimensional volume weight.  Samples are stored as stacked arrays; the
per-sample view :class:`VarifoldSample` exists for iteration and I/O.
"""

import csv
import json
import warnings
from dataclasses import dataclass

import numpy as np

from .calib_core import CalibrationError, check_orthonormal, flat_structure, orient_frames

ENERGY_EXCLUSION = 1e-12
ORIENTATION_TOL = 1e-6


@dataclass(frozen=True)
class VarifoldSample:
    y: np.ndarray
    frame: np.ndarray
    w: float


class DiscreteVarifold:
    """Weighted point/plane samples of an m-dimensional varifold in R^{2m}.

    Parameters
    ----------
    points : (N, n) array
    frames : (N, m, n) array
        Orthonormal frames; validated on construction.
    weights : (N,) array
        Strictly positive volumes.
    provenance : str
        Free-form tag naming the generator.
    grid_shape : tuple, optional
        Parameter-grid shape when samples come from a product rule (row-major).
    """

    def __init__(self, points, frames, weights, provenance="", grid_shape=None, validate=True):
        points = np.array(points, dtype=float, copy=True)
        frames = np.array(frames, dtype=float, copy=True)
        weights = np.array(weights, dtype=float, copy=True).reshape(-1)
        points = points.reshape(-1, points.shape[-1])
        frames = frames.reshape(-1, *frames.shape[-2:])
        if not (len(points) == len(frames) == len(weights)):
            raise ValueError("points, frames and weights differ in length")
        if frames.shape[-1] != points.shape[-1]:
            raise ValueError("frames and points live in different spaces")
        if validate:
            if np.any(weights <= 0):
                raise ValueError("weights must be positive")
            check_orthonormal(frames)
        for a in (points, frames, weights):
            a.flags.writeable = False
        self.points = points
        self.frames = frames
        self.weights = weights
        self.provenance = provenance
        self.grid_shape = tuple(grid_shape) if grid_shape is not None else None

    @property
    def ambient_dim(self):
        return self.points.shape[1]

    @property
    def dim(self):
        return self.frames.shape[1]

    def __len__(self):
        return len(self.weights)

    @property
    def samples(self):
        return [VarifoldSample(y, f, float(w)) for y, f, w in zip(self.points, self.frames, self.weights)]

    @property
    def total_mass(self):
        return float(self.weights.sum())

    def radii(self, center=None):
        d = self.points if center is None else self.points - np.asarray(center, dtype=float)
        return np.linalg.norm(d, axis=1)

    def subset(self, mask, provenance=None):
        return DiscreteVarifold(
            self.points[mask],
            self.frames[mask],
            self.weights[mask],
            provenance=self.provenance if provenance is None else provenance,
            validate=False,
        )

    def with_weights(self, weights, provenance=None):
        return DiscreteVarifold(
            self.points, self.frames, weights,
            provenance=self.provenance if provenance is None else provenance,
            grid_shape=self.grid_shape,
        )

    def __repr__(self):
        return (f"DiscreteVarifold(n={len(self)}, dim={self.dim}, ambient={self.ambient_dim}, "
                f"mass={self.total_mass:.6g}, provenance={self.provenance!r})")


def concatenate(varifolds, provenance="union"):
    return DiscreteVarifold(
        np.concatenate([v.points for v in varifolds]),
        np.concatenate([v.frames for v in varifolds]),
        np.concatenate([v.weights for v in varifolds]),
        provenance=provenance,
        validate=False,
    )


def mass_in_ball(V, center, rho):
    """Total weight of samples with ``|y - center| < rho``."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    return float(V.weights[V.radii(center) < rho].sum())


def density_ratio(V, center, rho):
    return mass_in_ball(V, center, rho) / rho**V.dim


def current_pair(V, chi, structure=None, orientation="calibrated"):
    """Pair an m-form with the current of V.

    Parameters
    ----------
    chi : array or callable
        Constant form tensor of degree m, or a function mapping an ``(N, n)``
        point array to an ``(N,) + (n,)*m`` tensor array.
    orientation : {"calibrated", "frame"}
        ``"calibrated"`` orients every plane so that it pairs to +1 with
        Re Omega and rejects planes that are not calibrated.  ``"frame"``
        uses the stored frame orientation as is (for non-special inputs).
    """
    structure = structure or flat_structure(V.dim)
    frames = V.frames
    if orientation == "calibrated":
        re = structure.Omega_on(frames).real
        if np.any(1.0 - np.abs(re) >= ORIENTATION_TOL):
            raise CalibrationError("not a calibrated plane: orientation undefined")
        frames = orient_frames(structure, frames)
    elif orientation != "frame":
        raise ValueError(f"unknown orientation mode {orientation!r}")

    m = V.dim
    letters = "abcdefgh"[:m]
    vecs = [frames[:, k, :] for k in range(m)]
    if callable(chi):
        T = np.asarray(chi(V.points))
        subs = "n" + letters + "," + ",".join("n" + c for c in letters) + "->n"
    else:
        T = np.asarray(chi)
        subs = letters + "," + ",".join("n" + c for c in letters) + "->n"
    vals = np.einsum(subs, T, *vecs)
    return complex(np.dot(V.weights, vals)) if np.iscomplexobj(vals) else float(np.dot(V.weights, vals))


def normal_part(frames, vectors):
    """Component of ``vectors`` orthogonal to the row span of ``frames``."""
    coef = np.einsum("nij,nj->ni", frames, vectors)
    return vectors - np.einsum("ni,nij->nj", coef, frames)


def energy_density(V, center=None):
    """Per-sample integrand ``|S^perp y|^2 / |y|^{m+2}`` (about ``center``)."""
    y = V.points if center is None else V.points - np.asarray(center, dtype=float)
    r = np.linalg.norm(y, axis=1)
    if np.any(r < ENERGY_EXCLUSION):
        raise ValueError("sample at the origin: energy integrand is singular")
    perp = normal_part(V.frames, y)
    return (perp**2).sum(axis=1) / r ** (V.dim + 2)


def energy(V, center=None):
    """Energy: sum of ``w |S^perp y|^2 / |y|^{m+2}`` over samples."""
    if len(V) == 0:
        return 0.0
    return float(np.dot(V.weights, energy_density(V, center)))


def restrict_annulus(V, sigma, rho, center=None):
    """Samples with ``sigma <= |y - center| < rho``."""
    r = V.radii(center)
    tag = f"{V.provenance}|A[{sigma:g},{rho:g})"
    return V.subset((r >= sigma) & (r < rho), provenance=tag)


def rescale(V, t):
    """Push forward by ``y -> t y``; weights scale by ``t^m``."""
    if t <= 0:
        raise ValueError("scale factor must be positive")
    return DiscreteVarifold(
        V.points * t, V.frames, V.weights * t**V.dim,
        provenance=f"{t:g}*({V.provenance})", grid_shape=V.grid_shape, validate=False,
    )


def translate(V, b):
    """Push forward by ``y -> y + b``."""
    b = np.asarray(b, dtype=float)
    return DiscreteVarifold(
        V.points + b, V.frames, V.weights,
        provenance=f"({V.provenance})+b", grid_shape=V.grid_shape, validate=False,
    )


def apply_linear_map(V, A, provenance=None):
    """Push forward by an orthogonal linear map (e.g. a unitary on C^m)."""
    from .calib_core import gram_schmidt

    A = np.asarray(A, dtype=float)
    if not np.allclose(A.T @ A, np.eye(A.shape[0]), atol=1e-12):
        raise ValueError("only orthogonal maps preserve the sample weights")
    frames = gram_schmidt(V.frames @ A.T)
    return DiscreteVarifold(
        V.points @ A.T, frames, V.weights,
        provenance=provenance or f"A({V.provenance})", grid_shape=V.grid_shape, validate=False,
    )


def monotonicity_residual(V, sigma, rho, center=None):
    """Left minus right side of the flat monotonicity identity.

    ``||V||(B_rho)/rho^m - ||V||(B_sigma)/sigma^m - E(V restricted to A)``.
    Vanishes for stationary varifolds up to quadrature error.
    """
    if not 0 < sigma < rho:
        raise ValueError("need 0 < sigma < rho")
    lhs = density_ratio(V, center, rho) - density_ratio(V, center, sigma)
    return lhs - energy(restrict_annulus(V, sigma, rho, center), center)


def divergence_radial(plane, dim=None):
    """Tangential divergence of the position field ``y`` on a plane.

    ``sum_i <e_i, D_{e_i} y> = sum_i |e_i|^2``, which is the plane dimension.
    """
    from .calib_core import TangentPlane

    if not isinstance(plane, TangentPlane):
        plane = TangentPlane(np.zeros(np.shape(plane)[-1]), plane)
    frame = plane.frame if dim is None else plane.frame[:dim]
    # D_e y = e for the position field
    return float(np.einsum("ij,ij->", frame, frame))


def weak_distance(V1, V2, test_balls):
    """Largest mass discrepancy over a family of test balls.

    ``test_balls`` is an iterable of ``(center, radius)`` pairs.
    """
    if V1.ambient_dim != V2.ambient_dim:
        raise ValueError("varifolds live in different ambient spaces")
    balls = list(test_balls)
    if not balls:
        raise ValueError("empty test-ball family")
    return max(abs(mass_in_ball(V1, c, r) - mass_in_ball(V2, c, r)) for c, r in balls)


def write_jsonl(V, path):
    """One JSON object per sample: ``{"y": [...], "frame": [[...]...], "w": float}``."""
    with open(path, "w", encoding="utf-8") as fh:
        for y, f, w in zip(V.points, V.frames, V.weights):
            fh.write(json.dumps({"y": y.tolist(), "frame": f.tolist(), "w": float(w)}) + "\n")


def read_jsonl(path, provenance=None):
    """Read a JSONL sample file, re-validating every invariant."""
    pts, frs, ws = [], [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            try:
                pts.append(rec["y"])
                frs.append(rec["frame"])
                ws.append(rec["w"])
            except KeyError as exc:
                raise ValueError(f"{path}:{lineno}: missing field {exc}") from None
    if not ws:
        raise ValueError(f"{path}: no samples")
    pts = np.asarray(pts, dtype=float)
    frs = np.asarray(frs, dtype=float)
    if frs.ndim != 3 or pts.shape[1] != frs.shape[2] or pts.shape[1] != 2 * frs.shape[1]:
        raise ValueError(f"{path}: inconsistent sample dimensions")
    return DiscreteVarifold(pts, frs, ws, provenance=provenance or str(path))


def density_table(V, radii, center=None):
    """Rows ``(rho, mass, density_ratio, annulus_energy)``.

    ``annulus_energy`` is the energy between consecutive radii (the first
    row uses the ball around ``center`` minus the exact center).
    """
    rows = []
    prev = 0.0
    for rho in radii:
        mass = mass_in_ball(V, center, rho)
        ann = restrict_annulus(V, prev, rho, center)
        r = ann.radii(center)
        if np.any(r < ENERGY_EXCLUSION):
            warnings.warn("sample at the center excluded from the energy")
            ann = ann.subset(r >= ENERGY_EXCLUSION)
        rows.append((rho, mass, mass / rho**V.dim, energy(ann, center)))
        prev = rho
    return rows


def write_density_csv(rows, path, header_comment=None):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rho[length]", "mass[length^m]", "density_ratio[1]", "annulus_energy[1]"])
        for row in rows:
            w.writerow([repr(float(x)) for x in row])
