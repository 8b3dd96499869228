"""Flat Calabi-Yau linear algebra on R^{2m} = C^m.

Vectors use the real ordering ``(x^1, ..., x^m, y^1, ..., y^m)`` with
``z^k = x^k + i y^k``.  Differential forms with constant coefficients are
stored as dense, fully antisymmetric coefficient tensors over that basis, so
a p-form on R^{2m} is an array of shape ``(2m,) * p``.  Evaluating a form on
p vectors is a tensor contraction.

Tangent planes are carried as orthonormal frames.  All batch routines accept
frames of shape ``(..., m, 2m)``.
"""

from dataclasses import dataclass, field
from itertools import combinations, permutations
from math import factorial

import numpy as np

ORTHO_TOL = 1e-10
MAX_DIM = 4


class CalibrationError(ValueError):
    """A plane failed a calibration precondition."""


def to_real(z):
    """C^m points ``(..., m)`` to R^{2m} points ``(..., 2m)``."""
    z = np.asarray(z, dtype=complex)
    return np.concatenate([z.real, z.imag], axis=-1)


def to_complex(x):
    """R^{2m} points ``(..., 2m)`` to C^m points ``(..., m)``."""
    x = np.asarray(x, dtype=float)
    m = x.shape[-1] // 2
    return x[..., :m] + 1j * x[..., m:]


def _perm_sign(p):
    p = list(p)
    sign = 1
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            sign = -sign
    return sign


def form_from_evaluator(evaluate, n, degree, dtype=float):
    """Build the coefficient tensor of an alternating form.

    ``evaluate`` maps a list of ``degree`` basis indices to the form's value
    on those basis vectors.  Only increasing index tuples are evaluated; the
    rest follow by antisymmetry.
    """
    T = np.zeros((n,) * degree, dtype=dtype)
    for idx in combinations(range(n), degree):
        val = evaluate(idx)
        if val == 0:
            continue
        for p in permutations(range(degree)):
            T[tuple(idx[k] for k in p)] = _perm_sign(p) * val
    return T


def evaluate_form(T, vectors):
    """Evaluate a p-form tensor on p vectors.

    ``vectors`` has shape ``(..., p, n)``; the result has shape ``(...)``.
    """
    vectors = np.asarray(vectors)
    p = T.ndim
    if p == 0:
        return T[()] * np.ones(vectors.shape[:-2])
    letters = "abcdefgh"[:p]
    subs = letters + "," + ",".join("..." + c for c in letters) + "->..."
    return np.einsum(subs, T, *[vectors[..., k, :] for k in range(p)])


def wedge(A, B):
    """Wedge product of two alternating tensors.

    Uses the determinant convention, so that ``dx ^ dy`` evaluated on
    ``(e_x, e_y)`` equals 1.
    """
    p, q = A.ndim, B.ndim
    n = A.shape[0] if p else B.shape[0]
    dtype = np.result_type(A, B)

    def ev(idx):
        total = 0
        for I in combinations(range(p + q), p):
            Ic = [k for k in range(p + q) if k not in I]
            sign = _perm_sign(list(I) + Ic)
            total += sign * A[tuple(idx[k] for k in I)] * B[tuple(idx[k] for k in Ic)]
        return total

    return form_from_evaluator(ev, n, p + q, dtype=dtype)


def top_coefficient(T):
    """Value of a top-degree form on the ordered standard basis."""
    return T[tuple(range(T.ndim))]


def flat_omega(m):
    """Matrix of omega_0 = sum dx^k ^ dy^k."""
    w = np.zeros((2 * m, 2 * m))
    for k in range(m):
        w[k, m + k] = 1.0
        w[m + k, k] = -1.0
    return w


def flat_J(m):
    """Multiplication by i on R^{2m}."""
    J = np.zeros((2 * m, 2 * m))
    J[m:, :m] = np.eye(m)
    J[:m, m:] = -np.eye(m)
    return J


def flat_Omega(m):
    """Coefficient tensor of dz^1 ^ ... ^ dz^m."""
    basis = np.eye(2 * m)

    def ev(idx):
        # dz^k(e_j) for the selected basis vectors
        A = to_complex(basis[list(idx)]).T
        return np.linalg.det(A)

    return form_from_evaluator(ev, 2 * m, m, dtype=complex)


def psi_factor(omega, Omega, m):
    """Conformal factor of an almost Calabi-Yau pair at a point.

    Solves ``psi^{2m}/m! * omega^m = (-1)^s (i/2)^m Omega ^ conj(Omega)``
    with ``s = m(m-1)/2`` for ``psi > 0``.

    Parameters
    ----------
    omega : (2m, 2m) array
        Antisymmetric matrix of the symplectic form.
    Omega : complex array of shape ``(2m,) * m``
        Coefficient tensor of the (m, 0)-form.
    m : int
        Complex dimension.

    Returns
    -------
    float
    """
    omega = np.asarray(omega, dtype=float)
    top = omega
    for _ in range(m - 1):
        top = wedge(top, omega)
    lhs = top_coefficient(top) / factorial(m)
    if abs(lhs) < 1e-300:
        raise ValueError("omega is degenerate: its top power vanishes")
    s = m * (m - 1) // 2
    rhs = (-1) ** s * (0.5j) ** m * top_coefficient(wedge(Omega, np.conj(Omega)))
    ratio = rhs / lhs
    if abs(ratio.imag) > 1e-10 * max(1.0, abs(ratio)) or ratio.real <= 0:
        raise ValueError("Omega ^ conj(Omega) is not a positive multiple of omega^m")
    return float(ratio.real ** (1.0 / (2 * m)))


@dataclass(frozen=True, eq=False)
class CYStructure:
    """Constant-coefficient almost Calabi-Yau structure on R^{2m}."""

    m: int
    omega: np.ndarray
    J: np.ndarray
    Omega: np.ndarray
    psi: float = field(init=False)
    metric: np.ndarray = field(init=False)
    _standard_Omega: bool = field(init=False, repr=False)

    def __post_init__(self):
        if not 1 <= self.m <= MAX_DIM:
            raise ValueError(f"complex dimension must be in 1..{MAX_DIM}, got {self.m}")
        n = 2 * self.m
        if not np.allclose(self.J @ self.J, -np.eye(n), atol=1e-12):
            raise ValueError("J does not square to -1")
        psi = psi_factor(self.omega, self.Omega, self.m)
        g = psi**2 * self.omega @ self.J
        g = 0.5 * (g + g.T)
        if np.linalg.eigvalsh(g).min() <= 0:
            raise ValueError("omega(., J.) is not positive definite")
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "metric", g)
        standard = np.array_equal(self.Omega, flat_Omega(self.m))
        object.__setattr__(self, "_standard_Omega", standard)

    @property
    def flat(self):
        return self.psi == 1.0 and np.array_equal(self.metric, np.eye(2 * self.m))

    def psi_residual(self):
        """Absolute residual of the psi-factor equation on the standard basis."""
        m = self.m
        top = self.omega
        for _ in range(m - 1):
            top = wedge(top, self.omega)
        s = m * (m - 1) // 2
        lhs = self.psi ** (2 * m) / factorial(m) * top_coefficient(top)
        rhs = (-1) ** s * (0.5j) ** m * top_coefficient(wedge(self.Omega, np.conj(self.Omega)))
        return abs(lhs - rhs)

    def Omega_on(self, frames):
        """Complex value of Omega on frames ``(..., m, 2m)``."""
        frames = np.asarray(frames, dtype=float)
        if self._standard_Omega:
            return np.linalg.det(to_complex(frames))
        return evaluate_form(self.Omega, frames)

    def omega_on(self, frames):
        """Matrix ``omega(e_i, e_j)`` for frames ``(..., m, 2m)``."""
        frames = np.asarray(frames, dtype=float)
        return frames @ self.omega @ np.swapaxes(frames, -1, -2)


def flat_structure(m):
    """The standard structure (omega_0, J_0, Omega_0) on C^m with psi = 1."""
    if m < 1:
        raise ValueError("m must be a positive integer")
    return CYStructure(m, flat_omega(m), flat_J(m), flat_Omega(m))


def gram_schmidt(vectors, metric=None):
    """Orthonormalize rows of ``vectors`` (shape ``(..., p, n)``) in order."""
    V = np.array(vectors, dtype=float)
    G = np.eye(V.shape[-1]) if metric is None else np.asarray(metric)
    p = V.shape[-2]
    for i in range(p):
        v = V[..., i, :]
        for j in range(i):
            e = V[..., j, :]
            v = v - np.einsum("...a,ab,...b->...", v, G, e)[..., None] * e
        norm = np.sqrt(np.einsum("...a,ab,...b->...", v, G, v))
        if np.any(norm < 1e-14):
            raise ValueError("frame vectors are linearly dependent")
        V[..., i, :] = v / norm[..., None]
    return V


@dataclass(frozen=True, eq=False)
class TangentPlane:
    """An m-plane at ``base_point`` given by an orthonormal frame.

    The frame is validated against ``metric`` (Euclidean by default) and then
    re-orthonormalized; ``correction`` is the size of that adjustment.
    """

    base_point: np.ndarray
    frame: np.ndarray
    metric: np.ndarray = None
    correction: float = field(init=False, default=0.0)

    def __post_init__(self):
        frame = np.atleast_2d(np.asarray(self.frame, dtype=float))
        base = np.asarray(self.base_point, dtype=float)
        n = frame.shape[1]
        if base.shape != (n,):
            raise ValueError("base point and frame live in different spaces")
        G = np.eye(n) if self.metric is None else np.asarray(self.metric)
        gram = frame @ G @ frame.T
        dev = np.abs(gram - np.eye(frame.shape[0])).max()
        if dev > ORTHO_TOL:
            raise ValueError(f"frame is not orthonormal (deviation {dev:.3e})")
        fixed = gram_schmidt(frame, G)
        object.__setattr__(self, "frame", fixed)
        object.__setattr__(self, "base_point", base)
        object.__setattr__(self, "correction", float(np.abs(fixed - frame).max()))

    @classmethod
    def from_spanning(cls, base_point, vectors, metric=None):
        """Plane spanned by arbitrary independent vectors."""
        return cls(base_point, gram_schmidt(vectors, metric), metric)

    @property
    def dim(self):
        return self.frame.shape[0]


def _frames_of(plane_or_frames):
    if isinstance(plane_or_frames, TangentPlane):
        return plane_or_frames.frame
    return np.asarray(plane_or_frames, dtype=float)


def check_orthonormal(frames, metric=None, tol=ORTHO_TOL):
    frames = np.asarray(frames, dtype=float)
    G = np.eye(frames.shape[-1]) if metric is None else metric
    gram = frames @ G @ np.swapaxes(frames, -1, -2)
    dev = np.abs(gram - np.eye(frames.shape[-2])).max() if frames.size else 0.0
    if dev > tol:
        raise ValueError(f"frame is not orthonormal (deviation {dev:.3e})")


def calibration_defect(structure, plane):
    """Special Lagrangian defects of a plane (or a batch of frames).

    Returns
    -------
    lagrangian_defect, im_defect, angle_defect
        Frobenius norm of omega restricted to the plane, ``|Im Omega(e)|``
        and ``1 - |Re Omega(e)|``.  All vanish exactly on special Lagrangian
        planes.  For batched frames each entry is an array.
    """
    frames = _frames_of(plane)
    check_orthonormal(frames, structure.metric)
    lag = np.sqrt((structure.omega_on(frames) ** 2).sum(axis=(-1, -2)))
    val = structure.Omega_on(frames)
    return lag, np.abs(val.imag), 1.0 - np.abs(val.real)


def defect_total(structure, frames):
    """Sum of the three defects, per frame."""
    lag, im, ang = calibration_defect(structure, frames)
    return lag + im + ang


def orient_frames(structure, frames):
    """Flip the last frame vector wherever Re Omega(frame) < 0."""
    frames = np.array(frames, dtype=float)
    sign = np.sign(structure.Omega_on(frames).real)
    sign = np.where(sign == 0, 1.0, sign)
    frames[..., -1, :] *= sign[..., None]
    return frames


def plucker(frames):
    """Plucker coordinates of the wedge of frame rows.

    Returns coefficients over increasing multi-indices of length m, in
    ``itertools.combinations`` order.
    """
    frames = np.asarray(frames, dtype=float)
    m, n = frames.shape[-2], frames.shape[-1]
    cols = [frames[..., :, list(I)] for I in combinations(range(n), m)]
    return np.stack([np.linalg.det(c) for c in cols], axis=-1)


def oriented_unit(structure, plane, tol=1e-6):
    """Unit simple m-vector of a calibrated plane, as Plucker coordinates.

    The orientation is the one pairing to +1 with Re Omega.

    Raises
    ------
    CalibrationError
        If the plane is not calibrated by Re Omega to within ``tol``.
    """
    frames = _frames_of(plane)
    check_orthonormal(frames, structure.metric)
    val = structure.Omega_on(frames).real
    if np.any(1.0 - np.abs(val) >= tol):
        raise CalibrationError("not a calibrated plane")
    return plucker(orient_frames(structure, frames))


def form_on_plucker(T, S):
    """Pair a form tensor with Plucker coordinates of m-vectors."""
    n, m = T.shape[0], T.ndim
    coeffs = np.array([T[I] for I in combinations(range(n), m)])
    return S @ coeffs


def apply_linear(A, frames):
    """Push frames ``(..., m, 2m)`` forward by a real linear map."""
    return np.asarray(frames) @ np.asarray(A).T


def unitary_to_real(U):
    """Real 2m x 2m matrix of a complex m x m matrix."""
    U = np.asarray(U, dtype=complex)
    return np.block([[U.real, -U.imag], [U.imag, U.real]])
