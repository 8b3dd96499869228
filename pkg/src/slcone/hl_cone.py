"""The special Lagrangian T^2-cone in C^3 and normal fields over it.

The cone is ``C = {|z1| = |z2| = |z3|, z1 z2 z3 > 0}``, parametrized by

    (r, t1, t2) -> r * xi(t1, t2),
    xi = (e^{i t1}, e^{i t2}, e^{-i(t1 + t2)}) / sqrt(3).

Its link is a flat torus with constant metric ``[[2, 1], [1, 2]] / 3`` in
the angle coordinates.  Normal fields over C are stored on product grids
(radial shells x periodic angle grid) as components in the normal frame
``J e_r, J E_1, J E_2``, where ``(e_r, E_1, E_2)`` is the Gram-Schmidt
orthonormalization of the chart derivatives.  That frame is equivariant
under the T^2-action, so T^2-invariant surfaces give angle-independent
components.
"""

import numpy as np

from .calib_core import flat_structure, gram_schmidt, to_real, unitary_to_real
from .varifold import DiscreteVarifold, apply_linear_map

SQRT3 = np.sqrt(3.0)
# exponent vectors of the three coordinates of xi over (t1, t2)
PHASES = np.array([[1, 0], [0, 1], [-1, -1]])
LINK_METRIC = np.array([[2.0, 1.0], [1.0, 2.0]]) / 3.0
LINK_METRIC_INV = np.array([[2.0, -1.0], [-1.0, 2.0]])
# rows: orthonormal link directions as combinations of d/dt1, d/dt2
_LINV = np.linalg.inv(np.linalg.cholesky(LINK_METRIC))
CHART_ORIENTATION = -1.0  # sign of Re Omega on (e_r, E_1, E_2)
GRAPH_CHART_BOUND = 0.2


def cone_point(r, theta1, theta2):
    """Point of C in C^3 (complex coordinates)."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("r must be positive")
    return r[..., None] * xi(theta1, theta2)


def xi(theta1, theta2):
    t1, t2 = np.broadcast_arrays(np.asarray(theta1, dtype=float), np.asarray(theta2, dtype=float))
    return np.stack([np.exp(1j * t1), np.exp(1j * t2), np.exp(-1j * (t1 + t2))], axis=-1) / SQRT3


def xi_derivatives(theta1, theta2):
    """``xi, d_a xi, d_a d_b xi`` (complex), shapes (...,3), (...,2,3), (...,2,2,3)."""
    x = xi(theta1, theta2)
    d = 1j * PHASES.T * x[..., None, :]  # (..., 2, 3)
    dd = -(PHASES.T[:, None, :] * PHASES.T[None, :, :]) * x[..., None, None, :]
    return x, d, dd


def cone_point_real(r, theta1, theta2):
    """Real coordinates of the chart, written so complex arguments work."""
    t3 = -(theta1 + theta2)
    return (r / SQRT3) * np.stack(
        [np.cos(theta1), np.cos(theta2), np.cos(t3), np.sin(theta1), np.sin(theta2), np.sin(t3)], axis=-1
    )


def on_cone(z, tol=1e-12):
    """Whether complex points satisfy the defining equations of C."""
    z = np.asarray(z, dtype=complex)
    a = np.abs(z)
    prod = z[..., 0] * z[..., 1] * z[..., 2]
    scale = np.maximum(a.max(axis=-1), 1e-300)
    eq = (np.abs(a[..., 0] - a[..., 1]) < tol * scale) & (np.abs(a[..., 1] - a[..., 2]) < tol * scale)
    pos = (prod.real > 0) & (np.abs(prod.imag) < tol * scale**3)
    return eq & pos


def link_metric():
    return LINK_METRIC.copy()


def link_metric_numeric(theta1, theta2, h=1e-30):
    """Pull back the Euclidean metric to the link by complex-step differentiation."""
    t1 = np.asarray(theta1, dtype=float)
    t2 = np.asarray(theta2, dtype=float)
    d1 = cone_point_real(1.0, t1 + 1j * h, t2 + 0j).imag / h
    d2 = cone_point_real(1.0, t1 + 0j, t2 + 1j * h).imag / h
    D = np.stack([d1, d2], axis=-2)
    return D @ np.swapaxes(D, -1, -2)


def chart_pullback_numeric(r, theta1, theta2, h=1e-30):
    """Pull back of g_0 through the (r, t1, t2) chart, shape (..., 3, 3)."""
    r = np.asarray(r, dtype=float)
    t1 = np.asarray(theta1, dtype=float)
    t2 = np.asarray(theta2, dtype=float)
    dr = cone_point_real(r + 1j * h, t1 + 0j, t2 + 0j).imag / h
    d1 = cone_point_real(r + 0j, t1 + 1j * h, t2 + 0j).imag / h
    d2 = cone_point_real(r + 0j, t1 + 0j, t2 + 1j * h).imag / h
    D = np.stack([dr, d1, d2], axis=-2)
    return D @ np.swapaxes(D, -1, -2)


def link_area():
    """Area of the link torus, ``sqrt(det g) (2 pi)^2 = 4 pi^2 / sqrt(3)``."""
    return float(np.sqrt(np.linalg.det(LINK_METRIC)) * (2 * np.pi) ** 2)


def cone_ball_volume():
    """Volume of C inside the unit ball."""
    return link_area() / 3.0


def link_area_quadrature(n=64):
    """Midpoint rule for the link area from the chart's Jacobian."""
    t = (np.arange(n) + 0.5) * 2 * np.pi / n
    T1, T2 = np.meshgrid(t, t, indexing="ij")
    g = link_metric_numeric(T1, T2)
    return float(np.sqrt(np.linalg.det(g)).sum() * (2 * np.pi / n) ** 2)


def tangent_frame(theta1, theta2):
    """Real orthonormal tangent frame ``(e_r, E_1, E_2)`` of C, shape (..., 3, 6).

    Constant along rays.
    """
    x, d, _ = xi_derivatives(theta1, theta2)
    E = np.einsum("ab,...bk->...ak", _LINV, d)
    return to_real(np.concatenate([x[..., None, :], E], axis=-2))


def normal_frame(theta1, theta2):
    """``J`` applied to the tangent frame; orthonormal frame of the normal space."""
    x, d, _ = xi_derivatives(theta1, theta2)
    E = np.einsum("ab,...bk->...ak", _LINV, d)
    return to_real(1j * np.concatenate([x[..., None, :], E], axis=-2))


def _normal_frame_derivatives(x, d, dd):
    """d_a of the normal frame vectors (complex), shape (..., 2 [a], 3 [k], 3)."""
    dE = np.einsum("cb,...abk->...ack", _LINV, dd)  # d_a E_c
    dT = np.concatenate([d[..., :, None, :], dE], axis=-2)
    return 1j * dT


def oriented(frames):
    out = np.array(frames, dtype=float)
    out[..., -1, :] *= CHART_ORIENTATION
    return out


class ConeGrid:
    """Product grid over ``C cap A_{sigma, rho}``.

    Radial nodes are cell midpoints of ``n_r`` uniform cells; angles are the
    periodic grid ``2 pi j / n_theta`` in both directions.
    """

    def __init__(self, sigma, rho, n_r, n_theta, radii=None):
        if not 0 <= sigma < rho:
            raise ValueError("need 0 <= sigma < rho")
        if radii is not None and np.any(np.asarray(radii) <= 0):
            raise ValueError("shell radii must be positive")
        if n_r < 1 or n_theta < 2:
            raise ValueError("grid too small")
        self.sigma = float(sigma)
        self.rho = float(rho)
        if radii is None:
            self.dr = (rho - sigma) / n_r
            self.r = sigma + (np.arange(n_r) + 0.5) * self.dr
        else:
            self.r = np.asarray(radii, dtype=float)
            self.dr = None
        self.n_theta = int(n_theta)
        self.theta = 2 * np.pi * np.arange(n_theta) / n_theta
        self.dtheta = 2 * np.pi / n_theta

    @classmethod
    def shells(cls, radii, n_theta):
        """Grid on explicit radial shells (no cell measure)."""
        radii = np.sort(np.asarray(radii, dtype=float))
        return cls(radii[0], radii[-1] + 1.0, len(radii), n_theta, radii=radii)

    @property
    def n_r(self):
        return len(self.r)

    @property
    def shape(self):
        return (self.n_r, self.n_theta, self.n_theta)

    def angles(self):
        return np.meshgrid(self.theta, self.theta, indexing="ij")

    def mesh(self):
        R, T1, T2 = np.meshgrid(self.r, self.theta, self.theta, indexing="ij")
        return R, T1, T2

    def nodes(self):
        """Real node positions, shape (n_r, N, N, 6)."""
        R, T1, T2 = self.mesh()
        return to_real(R[..., None] * xi(T1, T2))

    def nodes_complex(self):
        R, T1, T2 = self.mesh()
        return R[..., None] * xi(T1, T2)

    def tangent_frames(self):
        T1, T2 = self.angles()
        return np.broadcast_to(tangent_frame(T1, T2), self.shape + (3, 6))

    def normal_frames(self):
        T1, T2 = self.angles()
        return np.broadcast_to(normal_frame(T1, T2), self.shape + (3, 6))

    def cell_measure(self):
        """Parameter-cell volume ``dr dt1 dt2`` per node."""
        if self.dr is None:
            raise ValueError("grid built from explicit shells has no cell measure")
        return self.dr * self.dtheta**2

    def link_weights(self):
        """Quadrature weights of the link torus (uniform, summing to the area)."""
        return np.full((self.n_theta, self.n_theta), link_area() / self.n_theta**2)


class NormalField:
    """Normal vector field over a cone grid, as normal-frame components.

    ``components`` has shape ``(n_r, N, N, 3)``; entry k is the coefficient of
    the k-th normal frame vector.
    """

    def __init__(self, grid, components):
        components = np.asarray(components, dtype=float)
        if components.shape != grid.shape + (3,):
            raise ValueError(f"components must have shape {grid.shape + (3,)}")
        self.grid = grid
        self.components = components

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape + (3,)))

    @classmethod
    def from_vectors(cls, grid, vectors):
        """Project ambient vectors (n_r, N, N, 6) onto the normal frame."""
        vectors = np.broadcast_to(np.asarray(vectors, dtype=float), grid.shape + (6,))
        return cls(grid, np.einsum("...kj,...j->...k", grid.normal_frames(), vectors))

    def vectors(self):
        """Ambient displacement vectors, shape (n_r, N, N, 6)."""
        return np.einsum("...k,...kj->...j", self.components, self.grid.normal_frames())

    def __add__(self, other):
        return NormalField(self.grid, self.components + other.components)

    def __mul__(self, s):
        return NormalField(self.grid, self.components * s)

    __rmul__ = __mul__


def link_gradient(f, axes=(1, 2)):
    """Spectral derivatives of a periodic grid function along the two angle axes."""
    f = np.asarray(f, dtype=float)
    out = []
    for ax in axes:
        n = f.shape[ax]
        k = np.fft.fftfreq(n, d=1.0 / n)
        if n % 2 == 0:
            k[n // 2] = 0.0
        shape = [1] * f.ndim
        shape[ax] = n
        F = np.fft.fft(f, axis=ax) * (1j * k.reshape(shape))
        out.append(np.fft.ifft(F, axis=ax).real)
    return out


def _radial_derivative(f, r, log=False):
    if len(r) < 2:
        return np.zeros_like(f)
    coord = np.log(r) if log else r
    return np.gradient(f, coord, axis=0, edge_order=2 if len(r) > 2 else 1)


def cyl_norm(u, k=0):
    """Cylindrical C^k norm of a normal field, k in {0, 1}.

    Pointwise norms use ``|v|_cyl = |v| / r``; derivatives act on the rescaled
    field ``u / r`` along ``t = log r`` (finite differences) and along the
    link (spectral), with the link gradient measured in the link metric.
    """
    if not isinstance(u, NormalField):
        raise ValueError("cyl_norm needs a field sampled on a ConeGrid")
    if k not in (0, 1):
        raise ValueError("only k = 0 and k = 1 are supported")
    r = u.grid.r
    uc = u.components / r[:, None, None, None]
    total = np.sqrt((uc**2).sum(axis=-1))
    if k == 1:
        if u.grid.n_r < 2:
            raise ValueError("k = 1 needs at least two shells")
        dt = _radial_derivative(uc, r, log=True)
        total = total + np.sqrt((dt**2).sum(axis=-1))
        g1, g2 = link_gradient(uc)
        gi = LINK_METRIC_INV
        grad2 = gi[0, 0] * g1 * g1 + 2 * gi[0, 1] * g1 * g2 + gi[1, 1] * g2 * g2
        total = total + np.sqrt(grad2.sum(axis=-1))
    return float(total.max())


def graph_cyl(u, check=True, provenance="graph_cyl"):
    """Samples of the normal graph ``x + u(x)`` over the grid.

    Tangents are exact chart derivatives plus derivatives of ``u`` (finite
    differences in r, spectral along the link); weights are the graph
    Jacobian times the parameter-cell measure.
    """
    if not isinstance(u, NormalField):
        raise ValueError("graph_cyl needs a field sampled on a ConeGrid")
    if check and cyl_norm(u, 1) >= GRAPH_CHART_BOUND:
        raise ValueError("leaves tubular neighbourhood: cyl_norm(u, 1) exceeds the chart bound")
    grid = u.grid
    R, T1, T2 = grid.mesh()
    x, d, dd = xi_derivatives(T1, T2)
    Nf = normal_frame(T1, T2)  # real (.., 3, 6)
    dN = to_real(_normal_frame_derivatives(x, d, dd))  # (.., 2, 3, 6)
    c = u.components
    dc_r = _radial_derivative(c, grid.r)
    dc_1, dc_2 = link_gradient(c)

    xr = to_real(x)
    dr_vec = xr + np.einsum("...k,...kj->...j", dc_r, Nf)
    d_ang = []
    for a, dc in enumerate((dc_1, dc_2)):
        base = R[..., None] * to_real(d[..., a, :])
        vec = base + np.einsum("...k,...kj->...j", dc, Nf) + np.einsum("...k,...kj->...j", c, dN[..., a, :, :])
        d_ang.append(vec)
    D = np.stack([dr_vec] + d_ang, axis=-2)
    gram = D @ np.swapaxes(D, -1, -2)
    jac = np.sqrt(np.linalg.det(gram))
    frames = oriented(gram_schmidt(D))
    points = to_real(R[..., None] * x) + np.einsum("...k,...kj->...j", c, Nf)
    return DiscreteVarifold(points, frames, jac * grid.cell_measure(), provenance=provenance, grid_shape=grid.shape)


def sample_cone(sigma, rho, n_r, n_theta):
    """Midpoint-rule samples of ``C cap A_{sigma, rho}`` with exact frames.

    ``sigma = 0`` is allowed (the midpoint rule never places a node at 0).
    """
    if not 0 <= sigma < rho:
        raise ValueError("need 0 <= sigma < rho")
    if n_r < 2 or n_theta < 2:
        raise ValueError("resolutions must be at least 2")
    grid = ConeGrid(sigma, rho, n_r, n_theta)
    R, T1, T2 = grid.mesh()
    frames = oriented(np.broadcast_to(tangent_frame(*grid.angles()), grid.shape + (3, 6)))
    # area element r^2 sqrt(det g_link)
    w = R**2 * np.sqrt(np.linalg.det(LINK_METRIC)) * grid.cell_measure()
    return DiscreteVarifold(grid.nodes(), frames, w, provenance=f"C[{sigma:g},{rho:g})", grid_shape=grid.shape)


def rotate(V, U):
    """Apply a determinant-one unitary ``U`` on C^3 to a varifold."""
    U = np.asarray(U, dtype=complex)
    if not np.allclose(U.conj().T @ U, np.eye(U.shape[0]), atol=1e-12):
        raise ValueError("U is not unitary")
    if abs(np.linalg.det(U) - 1) > 1e-12:
        raise ValueError("U must have determinant one to preserve Omega")
    return apply_linear_map(V, unitary_to_real(U), provenance=f"a({V.provenance})")


def cone_structure():
    """The flat structure on C^3 used throughout this module."""
    return flat_structure(3)
