"""Smoothings L1, L2, L3 of the cone, the moment-map fibration and its fibers.

Moment maps ``2 mu_j = |z1|^2 - |z_j|^2`` (j = 2, 3) and the holomorphic
function ``f = i^{m+1} z1 ... zm`` give the fibration ``F = (mu2, mu3, Im f)``
of C^3.  Fibers are described in *label* coordinates

    c = (|z1|^2 - |z3|^2, |z2|^2 - |z3|^2, Im z1 z2 z3) = (2 mu3, 2 mu3 - 2 mu2, Im f),

in which the discriminant ``Y`` is the union of the rays spanned by
``(1, 0, 0)``, ``(0, 1, 0)`` and ``(-1, -1, 0)``.  The model ``L1`` is the
label-``(1, 0, 0)`` piece ``{|z1|^2 - 1 = |z2|^2 = |z3|^2, z1 z2 z3 >= 0}``;
``L2`` and ``L3`` are its images under cyclic coordinate shifts.

Every surface here is a :class:`ChartSurface`: a map from three real
parameters to C^3 together with its derivatives, which the samplers and the
graph solver in :mod:`slcone.asymptotics` consume.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .calib_core import flat_structure, gram_schmidt, orient_frames, to_real
from .hl_cone import SQRT3, sample_cone
from .varifold import DiscreteVarifold

Y_TOL = 1e-9


class ModelId(str, Enum):
    Cone = "Cone"
    L1 = "L1"
    L2 = "L2"
    L3 = "L3"


# z = w[PERMUTATION[id]] where w is a point of L1
PERMUTATION = {ModelId.L1: (0, 1, 2), ModelId.L2: (2, 0, 1), ModelId.L3: (1, 2, 0)}
UNIT_LABEL = {
    ModelId.Cone: np.zeros(3),
    ModelId.L1: np.array([1.0, 0.0, 0.0]),
    ModelId.L2: np.array([0.0, 1.0, 0.0]),
    ModelId.L3: np.array([-1.0, -1.0, 0.0]),
}
RAY_MODELS = (ModelId.L1, ModelId.L2, ModelId.L3)


def as_model_id(model):
    try:
        return ModelId(model)
    except ValueError:
        raise ValueError(f"unknown model {model!r}; expected one of {[m.value for m in ModelId]}") from None


def _as_complex(z):
    z = np.asarray(z)
    if np.iscomplexobj(z):
        return z
    if z.shape[-1] == 6:
        return z[..., :3] + 1j * z[..., 3:]
    return z.astype(complex)


def moment_mu(j, z):
    """``mu_j = (|z1|^2 - |z_j|^2) / 2``."""
    if j not in (2, 3):
        raise ValueError("j must be 2 or 3")
    z = _as_complex(z)
    return 0.5 * (np.abs(z[..., 0]) ** 2 - np.abs(z[..., j - 1]) ** 2)


def f_holo(z):
    """``i^{m+1} z1 ... zm``; for m = 3 this is ``z1 z2 z3``."""
    z = _as_complex(z)
    m = z.shape[-1]
    return (1j ** (m + 1)) * np.prod(z, axis=-1)


def fibration_F(z):
    """``F = (mu2, mu3, Im f)`` on C^3."""
    z = _as_complex(z)
    return np.stack([moment_mu(2, z), moment_mu(3, z), f_holo(z).imag], axis=-1)


def label_from_F(F):
    F = np.asarray(F, dtype=float)
    return np.stack([2 * F[..., 1], 2 * F[..., 1] - 2 * F[..., 0], F[..., 2]], axis=-1)


def F_from_label(c):
    c = np.asarray(c, dtype=float)
    return np.stack([(c[..., 0] - c[..., 1]) / 2, c[..., 0] / 2, c[..., 2]], axis=-1)


def fiber_label(z):
    """Label coordinates ``(|z1|^2-|z3|^2, |z2|^2-|z3|^2, Im z1 z2 z3)``."""
    return label_from_F(fibration_F(z))


def fibration_jacobian(z):
    """Real Jacobian of F, shape (..., 3, 6), in coordinates (x, y)."""
    z = _as_complex(z)
    x, y = z.real, z.imag
    zero = np.zeros_like(x[..., 0])
    dmu2 = np.stack([x[..., 0], -x[..., 1], zero, y[..., 0], -y[..., 1], zero], axis=-1)
    dmu3 = np.stack([x[..., 0], zero, -x[..., 2], y[..., 0], zero, -y[..., 2]], axis=-1)
    fk = np.stack([z[..., 1] * z[..., 2], z[..., 0] * z[..., 2], z[..., 0] * z[..., 1]], axis=-1)
    # d Im f = Im(f_k dz_k): d/dx_k -> Im f_k, d/dy_k -> Re f_k
    dimf = np.concatenate([fk.imag, fk.real], axis=-1)
    return np.stack([dmu2, dmu3, dimf], axis=-2)


def defining_residual(model, z):
    """Largest violation of the model's defining equations at points ``z``."""
    model = as_model_id(model)
    z = _as_complex(z)
    lab = fiber_label(z)
    if model is ModelId.Cone:
        a = np.abs(z) ** 2
        eq = np.abs(lab[..., :2]).max(axis=-1)
        eq = np.maximum(eq, np.abs(lab[..., 2]))
        return np.maximum(eq, np.maximum(-f_holo(z).real, 0) / np.maximum(a.max(axis=-1), 1) ** 1.5)
    err = np.abs(lab - UNIT_LABEL[model]).max(axis=-1)
    return np.maximum(err, np.maximum(-f_holo(z).real, 0))


class ChartSurface:
    """Three-parameter surface in C^3 given by an explicit chart.

    Subclasses implement ``chart_complex(p) -> (z, dz)`` with ``p`` of shape
    (..., 3), ``z`` of shape (..., 3) and ``dz`` of shape (..., 3, 3) (row a
    is the derivative along parameter a), and ``guess(z)`` returning chart
    parameters of a point near the surface.
    """

    model = None
    periodic = (False, True, True)

    def chart_complex(self, p):
        raise NotImplementedError

    def guess(self, z):
        raise NotImplementedError

    def chart(self, p):
        """Real points (..., 6) and derivative rows (..., 3, 6)."""
        z, dz = self.chart_complex(np.asarray(p, dtype=float))
        return to_real(z), to_real(dz)

    def point(self, p):
        return self.chart(p)[0]

    def sample(self, axes, cells, provenance=""):
        """Product-rule samples on the parameter grid ``axes`` (three 1D arrays).

        ``cells`` is the parameter-cell volume per node.
        """
        P = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        shape = P.shape[:-1]
        x, D = self.chart(P.reshape(-1, 3))
        gram = D @ np.swapaxes(D, -1, -2)
        w = np.sqrt(np.linalg.det(gram)) * cells
        frames = orient_frames(flat_structure(3), gram_schmidt(D))
        return DiscreteVarifold(x, frames, w, provenance=provenance, grid_shape=shape)


class ConeSurface(ChartSurface):
    """The cone in chart ``(r, t1, t2)``."""

    model = ModelId.Cone

    def chart_complex(self, p):
        r, t1, t2 = p[..., 0], p[..., 1], p[..., 2]
        e = np.stack([np.exp(1j * t1), np.exp(1j * t2), np.exp(-1j * (t1 + t2))], axis=-1) / SQRT3
        z = r[..., None] * e
        zero = np.zeros_like(e[..., 0])
        d1 = np.stack([1j * z[..., 0], zero, -1j * z[..., 2]], axis=-1)
        d2 = np.stack([zero, 1j * z[..., 1], -1j * z[..., 2]], axis=-1)
        return z, np.stack([e, d1, d2], axis=-2)

    def guess(self, z):
        z = _as_complex(z)
        r = np.linalg.norm(np.abs(z), axis=-1)
        return np.stack([r, np.angle(z[..., 0]), np.angle(z[..., 1])], axis=-1)


class LModel(ChartSurface):
    """``L1``, ``L2`` or ``L3`` in chart ``(theta, rho, phi)``.

    The L1 chart is ``(sqrt(rho^2+1) e^{i theta}, rho e^{i phi}, rho e^{-i(theta+phi)})``;
    L2 and L3 permute its coordinates cyclically.
    """

    periodic = (True, False, True)

    def __init__(self, model):
        model = as_model_id(model)
        if model is ModelId.Cone:
            raise ValueError("the cone has no L-chart; use ConeSurface")
        self.model = model
        self.perm = PERMUTATION[model]
        self.inverse_perm = tuple(int(k) for k in np.argsort(self.perm))

    def chart_complex(self, p):
        th, rho, ph = p[..., 0], p[..., 1], p[..., 2]
        s = np.sqrt(rho**2 + 1)
        e1, e2, e3 = np.exp(1j * th), np.exp(1j * ph), np.exp(-1j * (th + ph))
        w = np.stack([s * e1, rho * e2, rho * e3], axis=-1)
        zero = np.zeros_like(e1)
        d_th = np.stack([1j * w[..., 0], zero, -1j * w[..., 2]], axis=-1)
        d_rho = np.stack([(rho / s) * e1, e2, e3], axis=-1)
        d_ph = np.stack([zero, 1j * w[..., 1], -1j * w[..., 2]], axis=-1)
        dw = np.stack([d_th, d_rho, d_ph], axis=-2)
        idx = list(self.perm)
        return w[..., idx], dw[..., idx]

    def unpermute(self, z):
        return _as_complex(z)[..., list(self.inverse_perm)]

    def guess(self, z):
        w = self.unpermute(z)
        rho = np.sqrt(np.maximum(0.5 * (np.abs(w[..., 1]) ** 2 + np.abs(w[..., 2]) ** 2), 0))
        return np.stack([np.angle(w[..., 0]), rho, np.angle(w[..., 1])], axis=-1)


def model_surface(model):
    model = as_model_id(model)
    return ConeSurface() if model is ModelId.Cone else LModel(model)


def model_point(model, angle, plane_coord):
    """``(sqrt(|w|^2+1) a, w, conj(a) conj(w))`` for ``a = angle`` on the unit circle, permuted for L2/L3."""
    model = as_model_id(model)
    if model is ModelId.Cone:
        raise ValueError("Cone has no (angle, plane) chart; use hl_cone.cone_point")
    a = np.asarray(angle, dtype=complex)
    if np.any(np.abs(np.abs(a) - 1) > 1e-12):
        raise ValueError("angle must lie on the unit circle")
    w2 = np.asarray(plane_coord, dtype=complex)
    a, w2 = np.broadcast_arrays(a, w2)
    w = np.stack([np.sqrt(np.abs(w2) ** 2 + 1) * a, w2, np.conj(a) * np.conj(w2)], axis=-1)
    return w[..., list(PERMUTATION[model])]


def model_inverse(model, z):
    """Inverse of :func:`model_point`: ``(z1 / sqrt(|z2|^2 + 1), z2)`` in L1 coordinates."""
    w = LModel(model).unpermute(z)
    return w[..., 0] / np.sqrt(np.abs(w[..., 1]) ** 2 + 1), w[..., 1]


def model_ball_mass(model, R, s=1.0):
    """Exact volume of ``s L`` inside the ball of radius R about its center.

    Integrating the L1 area element ``rho (3 rho^2 + 2) / sqrt(rho^2 + 1)``
    gives ``Theta (R^2 - 1) sqrt(R^2 + 2)`` for ``R >= 1``, where ``Theta`` is
    the cone's unit-ball volume; the cone itself gives ``Theta R^3``.
    """
    from .hl_cone import cone_ball_volume

    model = as_model_id(model)
    if s <= 0:
        raise ValueError("scale must be positive")
    R = np.asarray(R, dtype=float) / s
    theta = cone_ball_volume()
    if model is ModelId.Cone:
        out = theta * R**3
    else:
        out = np.where(R > 1, theta * (R**2 - 1) * np.sqrt(np.maximum(R**2 + 2, 0)), 0.0)
    out = out * s**3
    return float(out) if out.ndim == 0 else out


def plane_radius_for_ball(R):
    """Plane-coordinate bound whose image is exactly ``L cap B_R`` (needs R > 1)."""
    if R <= 1:
        raise ValueError("L1 has no points inside the unit ball")
    return float(np.sqrt((R**2 - 1) / 3.0))


def sample_model(model, R, n_rho=200, n_angle=32, s=1.0, b=None):
    """Midpoint samples of ``s L + b`` over plane coordinates ``|w| <= R``.

    For ``Cone`` the radius bound is ``r <= R`` instead.
    """
    model = as_model_id(model)
    if R <= 0:
        raise ValueError("R must be positive")
    if n_rho < 2 or n_angle < 2:
        raise ValueError("resolutions must be at least 2")
    if model is ModelId.Cone:
        V = sample_cone(0.0, R, n_rho, n_angle)
        if s != 1.0:
            from .varifold import rescale
            V = rescale(V, s)
        if b is not None:
            from .varifold import translate
            V = translate(V, b)
        return V
    surf = scale_translate(model, s, b)
    rho = (np.arange(n_rho) + 0.5) * R / n_rho
    ang = 2 * np.pi * np.arange(n_angle) / n_angle
    cell = (R / n_rho) * (2 * np.pi / n_angle) ** 2
    tag = f"{s:g}*{model.value}+b" if b is not None else f"{s:g}*{model.value}"
    return surf.sample((ang, rho, ang), cell, provenance=f"{tag}[|w|<={R:g}]")


def sample_model_aligned(model, radii, n_per_ring=100, n_angle=32, s=1.0):
    """Samples of ``s L`` whose cells end exactly on the spheres of ``radii``.

    The plane coordinate is split into rings at the preimages of the ball
    radii and each ring gets a uniform midpoint rule, so ``mass_in_ball`` at
    those radii has no boundary-cell error.
    """
    model = as_model_id(model)
    if model is ModelId.Cone:
        raise ValueError("use hl_cone.sample_cone for the cone")
    radii = np.sort(np.asarray(radii, dtype=float))
    if n_per_ring < 1 or n_angle < 2:
        raise ValueError("resolutions too small")
    edges = np.concatenate([[0.0], [plane_radius_for_ball(R / s) for R in radii]])
    rho, drho = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        h = (b - a) / n_per_ring
        rho.append(a + (np.arange(n_per_ring) + 0.5) * h)
        drho.append(np.full(n_per_ring, h))
    rho, drho = np.concatenate(rho), np.concatenate(drho)
    ang = 2 * np.pi * np.arange(n_angle) / n_angle
    cells = np.broadcast_to(drho[None, :, None], (n_angle, len(rho), n_angle)).reshape(-1) * (2 * np.pi / n_angle) ** 2
    surf = scale_translate(model, s)
    return surf.sample((ang, rho, ang), cells, provenance=f"{s:g}*{model.value}[aligned]")


class ScaledSurface(ChartSurface):
    """``s X + b`` for a base :class:`ChartSurface` X."""

    def __init__(self, base, s=1.0, b=None):
        if s <= 0:
            raise ValueError("scale must be positive")
        self.base = base
        self.s = float(s)
        b = np.zeros(6) if b is None else np.asarray(b, dtype=float)
        if b.shape != (6,):
            raise ValueError("translation must be a vector in R^6")
        self.b = b
        self.b_complex = b[:3] + 1j * b[3:]
        self.model = base.model
        self.periodic = base.periodic

    def chart_complex(self, p):
        z, dz = self.base.chart_complex(p)
        return self.s * z + self.b_complex, self.s * dz

    def guess(self, z):
        return self.base.guess((_as_complex(z) - self.b_complex) / self.s)


def scale_translate(model, s=1.0, b=None):
    """Chart surface of ``s L + b``."""
    base = model if isinstance(model, ChartSurface) else model_surface(model)
    return ScaledSurface(base, s, b)


def _cubic(phi, c1, c2, q):
    return (phi + c1) * (phi + c2) * phi - q


def _cubic_prime(phi, c1, c2):
    return 3 * phi**2 + 2 * (c1 + c2) * phi + c1 * c2


def solve_phi(c1, c2, t, c3, bisect_steps=60):
    """Nonnegative root of ``(phi + c1)(phi + c2) phi = t^2 + c3^2``.

    Vectorized over broadcastable inputs.  On ``phi >= 0`` the cubic is
    strictly increasing and convex, so bisection brackets the unique root
    and a few Newton steps from the right polish it.
    """
    c1, c2, t, c3 = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (c1, c2, t, c3)))
    if np.any(np.minimum(c1, c2) < 0):
        raise ValueError("need c1, c2 >= 0 (normalize the label first)")
    q = t**2 + c3**2
    lo = np.zeros_like(q)
    hi = np.maximum(1.0, np.cbrt(q))
    for _ in range(bisect_steps):
        mid = 0.5 * (lo + hi)
        up = _cubic(mid, c1, c2, q) > 0
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
    phi = hi
    for _ in range(6):
        d = _cubic_prime(phi, c1, c2)
        safe = d > 0
        step = np.where(safe, _cubic(phi, c1, c2, q) / np.where(safe, d, 1.0), 0.0)
        phi = np.maximum(phi - step, lo)
    phi = np.where(q == 0, 0.0, phi)
    return float(phi) if phi.ndim == 0 else phi


def in_Y(c, tol=Y_TOL):
    return bool(_ray_distance(c)[0] < tol)


_RAYS = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, -1.0, 0.0]]) / np.array([[1.0], [1.0], [np.sqrt(2)]])


def _ray_distance(c):
    c = np.asarray(c, dtype=float)
    proj = np.maximum(_RAYS @ c, 0.0)
    dists = np.linalg.norm(c[None, :] - proj[:, None] * _RAYS, axis=1)
    k = int(np.argmin(dists))
    return float(dists[k]), k, float(proj[k])


@dataclass(frozen=True)
class FiberClass:
    kind: str  # "ConeFiber", "SingularRay" or "SmoothCylinder"
    model: object = None
    scale: float = None
    distance: float = 0.0
    near_discriminant: bool = False


def classify_fiber(c, tol=Y_TOL):
    """Cone fiber, singular fiber on a ray of Y, or smooth R x T^2 fiber."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    c = np.asarray(c, dtype=float)
    if np.linalg.norm(c) < tol:
        return FiberClass("ConeFiber", ModelId.Cone, None, float(np.linalg.norm(c)))
    dist, k, a = _ray_distance(c)
    if dist < tol:
        model = RAY_MODELS[k]
        s = np.sqrt(a / np.linalg.norm(UNIT_LABEL[model]))
        exact = dist <= 1e-12 * max(1.0, float(np.linalg.norm(c)))
        return FiberClass("SingularRay", model, float(s), dist, near_discriminant=not exact)
    return FiberClass("SmoothCylinder", None, None, dist)


def cyclic_shift(z, k):
    """``z -> (z_{1+k}, z_{2+k}, z_{3+k})`` (indices mod 3); preserves Omega."""
    return np.roll(_as_complex(z), -k, axis=-1)


def shift_label(c, k):
    c = np.asarray(c, dtype=float)
    for _ in range(k % 3):
        c = np.array([c[1] - c[0], -c[0], c[2]])
    return c


def normalize_label(c):
    """Cyclic shift ``k`` and shifted label with ``c1, c2 >= 0``."""
    c = np.asarray(c, dtype=float)
    moduli = np.array([c[0], c[1], 0.0])
    j = int(np.argmin(moduli))
    k = (j + 1) % 3
    return k, shift_label(c, k)


class FiberSurface(ChartSurface):
    """Smooth fiber ``F^{-1}(c)``, ``c`` outside Y, in chart ``(t, alpha, beta)``.

    After a cyclic shift making ``c1, c2 >= 0`` the chart is

        (sqrt(phi + c1) u, sqrt(phi + c2) v, (t + i c3) / (sqrt((phi+c1)(phi+c2)) u v))

    with ``u = e^{i alpha}``, ``v = e^{i beta}`` and ``phi = solve_phi(c1, c2, t, c3)``.
    """

    periodic = (False, True, True)

    def __init__(self, c, tol=Y_TOL):
        c = np.asarray(c, dtype=float)
        if c.shape != (3,):
            raise ValueError("label must have three components")
        if in_Y(c, tol):
            raise ValueError("singular fiber; use L_c")
        self.c = c
        self.shift, self.cn = normalize_label(c)

    def chart_complex(self, p):
        t, al, be = p[..., 0], p[..., 1], p[..., 2]
        c1, c2, c3 = self.cn
        phi = solve_phi(c1, c2, t, c3)
        dphi = 2 * t / _cubic_prime(phi, c1, c2)
        A, B = np.sqrt(phi + c1), np.sqrt(phi + c2)
        dA, dB = dphi / (2 * A), dphi / (2 * B)
        u, v = np.exp(1j * al), np.exp(1j * be)
        q = (t + 1j * c3) / (A * B)
        dq = 1.0 / (A * B) - (t + 1j * c3) * (dA * B + A * dB) / (A * B) ** 2
        z = np.stack([A * u, B * v, q / (u * v)], axis=-1)
        zero = np.zeros_like(u)
        d_t = np.stack([dA * u, dB * v, dq / (u * v)], axis=-1)
        d_a = np.stack([1j * z[..., 0], zero, -1j * z[..., 2]], axis=-1)
        d_b = np.stack([zero, 1j * z[..., 1], -1j * z[..., 2]], axis=-1)
        dz = np.stack([d_t, d_a, d_b], axis=-2)
        k = self.shift
        return cyclic_shift(z, -k), np.roll(dz, k, axis=-1)

    def coords(self, z):
        """Inverse chart ``(t, u, v) = (Re z1 z2 z3, z1/|z1|, z2/|z2|)`` in shifted coordinates."""
        zs = cyclic_shift(z, self.shift)
        t = np.prod(zs, axis=-1).real
        return t, zs[..., 0] / np.abs(zs[..., 0]), zs[..., 1] / np.abs(zs[..., 1])

    def guess(self, z):
        t, u, v = self.coords(z)
        return np.stack([t, np.angle(u), np.angle(v)], axis=-1)


def fiber_point(c, t, u, v):
    """Point of the fiber with label ``c`` at chart coordinates ``(t, u, v)``, |u| = |v| = 1."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if np.any(np.abs(np.abs(u) - 1) > 1e-12) or np.any(np.abs(np.abs(v) - 1) > 1e-12):
        raise ValueError("u and v must lie on the unit circle")
    surf = FiberSurface(c)
    t, al, be = np.broadcast_arrays(np.asarray(t, dtype=float), np.angle(u), np.angle(v))
    return surf.chart_complex(np.stack([t, al, be], axis=-1))[0]


def fiber_coords(c, z):
    return FiberSurface(c).coords(z)


def sample_fiber(c, T, n_t=128, n_angle=32):
    """Midpoint samples of the fiber over ``|t| <= T``."""
    if T <= 0:
        raise ValueError("T must be positive")
    surf = FiberSurface(c)
    t = -T + (np.arange(n_t) + 0.5) * (2 * T / n_t)
    ang = 2 * np.pi * np.arange(n_angle) / n_angle
    cell = (2 * T / n_t) * (2 * np.pi / n_angle) ** 2
    return surf.sample((t, ang, ang), cell, provenance=f"fiber{tuple(np.round(c, 12))}")


def chart_laplacian(surface, values, axes):
    """Laplace-Beltrami of grid values on a chart surface.

    ``axes`` are three 1D parameter arrays (uniform spacing); periodic axes
    use spectral derivatives, the others second-order differences.  Returns
    the Laplacian on the grid (edge nodes along non-periodic axes are
    one-sided and less accurate).
    """
    P = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    _, D = surface.chart(P)
    g = D @ np.swapaxes(D, -1, -2)
    gi = np.linalg.inv(g)
    sq = np.sqrt(np.linalg.det(g))

    def deriv(f, a):
        if surface.periodic[a]:
            n = f.shape[a]
            k = np.fft.fftfreq(n, d=1.0 / n)
            if n % 2 == 0:
                k[n // 2] = 0.0
            span = 2 * np.pi / (len(axes[a]) * (axes[a][1] - axes[a][0]))
            shape = [1] * f.ndim
            shape[a] = n
            F = np.fft.fft(f, axis=a) * (1j * span * k.reshape(shape))
            return np.fft.ifft(F, axis=a).real
        return np.gradient(f, axes[a], axis=a, edge_order=2)

    grads = [deriv(values, a) for a in range(3)]
    out = np.zeros_like(values)
    for a in range(3):
        flux = sq * sum(gi[..., a, b] * grads[b] for b in range(3))
        out += deriv(flux, a)
    return out / sq
