"""Laplace spectrum of the link of the T^2-cone and harmonic analysis on the cone.

The link is the flat torus ``R^2 / (2 pi Z)^2`` with metric
``[[2, 1], [1, 2]] / 3``.  Its eigenfunctions are ``exp(i n . theta)`` for
lattice vectors ``n`` with eigenvalue ``gamma = n^T G^{-1} n =
2 (n1^2 - n1 n2 + n2^2)``.  Each eigenvalue gives two indicial roots, the
solutions of ``x^2 + (m - 2) x - gamma = 0``; a function ``r^x v`` with
``v`` in the gamma-eigenspace is harmonic on the cone exactly when ``x`` is
one of them.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from numpy.polynomial import chebyshev as cheb
from scipy.sparse.linalg import eigsh
from scipy.stats import linregress

from .hl_cone import LINK_METRIC_INV, ConeGrid, link_area, link_gradient, xi

STABILITY_CUTOFF = 12.0


@dataclass(frozen=True)
class EigenMode:
    n1: int
    n2: int

    @property
    def gamma(self):
        return float(2 * (self.n1**2 - self.n1 * self.n2 + self.n2**2))

    @property
    def n(self):
        return (self.n1, self.n2)

    def __call__(self, theta1, theta2):
        """Complex eigenfunction ``exp(i (n1 t1 + n2 t2))``."""
        return np.exp(1j * (self.n1 * np.asarray(theta1) + self.n2 * np.asarray(theta2)))


@dataclass(frozen=True)
class IndicialPair:
    gamma: float
    alpha: float
    beta: float


@dataclass(frozen=True)
class RealMode:
    """Real orthonormal eigenfunction on the link: ``kind`` is ``"c"`` or ``"s"``."""

    n1: int
    n2: int
    kind: str

    @property
    def gamma(self):
        return EigenMode(self.n1, self.n2).gamma

    @property
    def label(self):
        return f"{self.kind}({self.n1},{self.n2})"

    def __call__(self, theta1, theta2):
        phase = self.n1 * np.asarray(theta1) + self.n2 * np.asarray(theta2)
        if self.n1 == 0 and self.n2 == 0:
            return np.full(np.shape(phase), 1.0 / np.sqrt(link_area()))
        norm = np.sqrt(2.0 / link_area())
        return norm * (np.cos(phase) if self.kind == "c" else np.sin(phase))


def lattice_norm(n1, n2):
    return n1 * n1 - n1 * n2 + n2 * n2


def is_representative(n1, n2):
    """Lexicographically positive member of the pair ``{n, -n}``."""
    return n1 > 0 or (n1 == 0 and n2 >= 0)


@dataclass
class SpectralTable:
    m: int
    gamma_max: float
    modes: list
    multiplicities: dict = field(default_factory=dict)

    @property
    def gammas(self):
        return sorted(self.multiplicities)

    def indicial(self):
        return [indicial_roots(g, self.m) for g in self.gammas]

    def exponent_set(self, window=None):
        """Sorted indicial roots, optionally restricted to an open window."""
        vals = sorted({x for p in self.indicial() for x in (p.alpha, p.beta)})
        if window is not None:
            lo, hi = window
            vals = [v for v in vals if lo < v < hi]
        return vals

    def real_basis(self):
        """Real orthonormal eigenbasis sorted by (gamma, n, kind)."""
        out = []
        for mode in self.modes:
            n1, n2 = mode.n
            if not is_representative(n1, n2):
                continue
            out.append(RealMode(n1, n2, "c"))
            if (n1, n2) != (0, 0):
                out.append(RealMode(n1, n2, "s"))
        return out

    def rows(self):
        """CSV rows ``(n1, n2, gamma, multiplicity, alpha, beta)``."""
        rows = []
        for mode in self.modes:
            p = indicial_roots(mode.gamma, self.m)
            rows.append((mode.n1, mode.n2, mode.gamma, self.multiplicities[mode.gamma], p.alpha, p.beta))
        return rows


def link_spectrum(gamma_max, m=3):
    """All lattice modes with ``gamma <= gamma_max``, closed form."""
    if gamma_max <= 0:
        raise ValueError("gamma_max must be positive")
    # n1^2 - n1 n2 + n2^2 >= (n1^2 + n2^2) / 2
    bound = int(np.floor(np.sqrt(gamma_max))) + 1
    modes = []
    for n1 in range(-bound, bound + 1):
        for n2 in range(-bound, bound + 1):
            mode = EigenMode(n1, n2)
            if mode.gamma <= gamma_max:
                modes.append(mode)
    modes.sort(key=lambda e: (e.gamma, e.n1, e.n2))
    mult = {}
    for mode in modes:
        mult[mode.gamma] = mult.get(mode.gamma, 0) + 1
    return SpectralTable(m=m, gamma_max=gamma_max, modes=modes, multiplicities=mult)


def indicial_roots(gamma, m=3):
    """Roots ``alpha >= beta`` of ``x^2 + (m-2) x - gamma = 0``."""
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    if m < 2:
        raise ValueError("m must be at least 2")
    disc = np.sqrt((m - 2) ** 2 + 4.0 * gamma)
    return IndicialPair(float(gamma), float((-(m - 2) + disc) / 2), float((-(m - 2) - disc) / 2))


def eigenvalue_for_exponent(lam, m=3):
    """``lam (lam + m - 2)``: the link eigenvalue giving radial rate ``lam``."""
    return lam * (lam + m - 2)


@dataclass
class StabilityVerdict:
    stable: bool
    gamma_cutoff: float
    window_roots: list
    alpha_above_one: list
    lambda1_multiplicity: int
    coordinate_residual: float
    coordinate_rank: int

    def summary(self):
        status = "true" if self.stable else "false"
        return f"stable: {status}; Λ∩(1,2)=∅ certified to γ≤{self.gamma_cutoff:g}"


def coordinate_restrictions(theta1, theta2):
    """The six real coordinate functions restricted to the link."""
    z = xi(theta1, theta2)
    return np.concatenate([z.real, z.imag], axis=-1)


def stability_check(m=3, gamma_cutoff=STABILITY_CUTOFF, n_theta=32):
    """Certify the spectral gap and identify the rate-one eigenspace.

    Checks that no indicial root lies in (1, 2) for eigenvalues up to the
    cutoff, that this cutoff already forces every larger eigenvalue to have
    ``alpha > 2``, and that the eigenspace with ``alpha = 1`` has dimension
    2m and is spanned by the coordinate functions.
    """
    if m != 3:
        raise ValueError("only the three-dimensional cone is supported")
    if indicial_roots(gamma_cutoff, m).alpha < 2:
        raise ValueError("cutoff too small to certify the window (1, 2)")
    table = link_spectrum(gamma_cutoff, m)
    in_window = table.exponent_set(window=(1.0, 2.0))
    alphas = sorted({p.alpha for p in table.indicial() if p.alpha > 1})

    gamma1 = eigenvalue_for_exponent(1.0, m)
    mult = table.multiplicities.get(gamma1, 0)
    t = 2 * np.pi * np.arange(n_theta) / n_theta
    T1, T2 = np.meshgrid(t, t, indexing="ij")
    coords = coordinate_restrictions(T1, T2).reshape(-1, 2 * m)
    basis = [rm for rm in table.real_basis() if rm.gamma == gamma1]
    B = np.stack([rm(T1, T2).ravel() for rm in basis], axis=1)
    coef, *_ = np.linalg.lstsq(B, coords, rcond=None)
    residual = float(np.abs(B @ coef - coords).max())
    rank = int(np.linalg.matrix_rank(coef, tol=1e-8))
    stable = not in_window and mult == 2 * m and residual < 1e-10 and rank == 2 * m
    return StabilityVerdict(stable, gamma_cutoff, in_window, alphas, mult, residual, rank)


def discrete_link_laplacian(N):
    """Finite-difference Laplace-Beltrami operator (positive) on an N x N grid.

    Second-order central differences for the pure and mixed derivatives of
    ``-(G^{ab} d_a d_b)``.
    """
    h = 2 * np.pi / N
    e = np.ones(N)
    D2 = sp.diags([e[:-1], -2 * e, e[:-1]], [-1, 0, 1], format="lil")
    D2[0, N - 1] = 1
    D2[N - 1, 0] = 1
    D2 = D2.tocsr() / h**2
    D1 = sp.diags([-e[:-1], e[:-1]], [-1, 1], format="lil")
    D1[0, N - 1] = -1
    D1[N - 1, 0] = 1
    D1 = D1.tocsr() / (2 * h)
    I = sp.identity(N, format="csr")
    gi = LINK_METRIC_INV
    L = gi[0, 0] * sp.kron(D2, I) + 2 * gi[0, 1] * sp.kron(D1, D1) + gi[1, 1] * sp.kron(I, D2)
    return (-L).tocsc()


def discrete_link_eigenvalues(N, k=13):
    """Smallest ``k`` eigenvalues of the finite-difference link operator."""
    vals = eigsh(discrete_link_laplacian(N), k=k, sigma=-0.5, which="LM", return_eigenvectors=False)
    return np.sort(vals)


def lowest_eigenvalues(k=13):
    """First ``k`` eigenvalues with multiplicity, closed form."""
    gmax = 2.0
    while True:
        table = link_spectrum(gmax)
        vals = sorted(mode.gamma for mode in table.modes)
        if len(vals) > k and vals[k] > vals[k - 1] or len(vals) >= 4 * k:
            return np.array(vals[:k])
        gmax *= 2


def spectrum_error(N, k=13):
    """Largest relative eigenvalue error of the discrete operator (absolute for 0)."""
    exact = lowest_eigenvalues(k)
    approx = discrete_link_eigenvalues(N, k)
    err = np.abs(approx - exact)
    nz = exact > 0
    err[nz] /= exact[nz]
    return float(err.max())


def project_on_modes(values, basis, grid):
    """L^2(link) coefficients per shell: values (n_r, N, N) -> (n_r, len(basis))."""
    T1, T2 = grid.angles()
    dA = link_area() / grid.n_theta**2
    B = np.stack([rm(T1, T2) for rm in basis], axis=-1)
    return np.einsum("rij,ijk->rk", values, B) * dA


def synthesize(coefficients, grid, m=3):
    """Field ``sum (a r^alpha + b r^beta) v_i`` on a grid.

    ``coefficients`` maps :class:`RealMode` to ``(a, b)``.
    """
    R, T1, T2 = grid.mesh()
    out = np.zeros(grid.shape)
    for mode, (a, b) in coefficients.items():
        p = indicial_roots(mode.gamma, m)
        out += (a * R**p.alpha + b * R**p.beta) * mode(T1, T2)
    return out


@dataclass
class ModeFit:
    mode: RealMode
    a: float
    b: float
    alpha: float
    beta: float
    residual: float


def harmonic_expand(values, grid, gamma_max=8.0, m=3):
    """Expand a scalar field on cone shells in homogeneous harmonics.

    For each real eigenmode, project onto the mode on every shell and fit
    ``u_i(r) = a r^alpha + b r^beta`` by weighted least squares (weights
    proportional to the shell area ``r^{m-1}``), with the exponents fixed at
    the indicial roots.

    Returns
    -------
    dict
        :class:`RealMode` -> :class:`ModeFit`.
    """
    values = np.asarray(values, dtype=float)
    if values.shape != grid.shape:
        raise ValueError(f"values must have shape {grid.shape}")
    if grid.n_r < 3:
        raise ValueError("need at least three radial shells")
    basis = link_spectrum(gamma_max, m).real_basis()
    proj = project_on_modes(values, basis, grid)
    r = grid.r
    sw = np.sqrt(r ** (m - 1))
    fits = {}
    for k, mode in enumerate(basis):
        p = indicial_roots(mode.gamma, m)
        A = np.stack([r**p.alpha, r**p.beta], axis=1)
        y = proj[:, k]
        (a, b), *_ = np.linalg.lstsq(A * sw[:, None], y * sw, rcond=None)
        res = float(np.sqrt(np.mean((A @ (a, b) - y) ** 2)))
        fits[mode] = ModeFit(mode, float(a), float(b), p.alpha, p.beta, res)
    return fits


@dataclass
class DecayFit:
    exponent: float
    stderr: float
    intercept: float
    max_log_residual: float
    r_squared: float


def fit_decay_exponent(r, s):
    """Least-squares slope of ``log s`` against ``log r``."""
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    if len(r) < 4:
        raise ValueError("need at least four shells")
    if np.any(s <= 0) or np.any(r <= 0):
        raise ValueError("profile values must be positive")
    lr, ls = np.log(r), np.log(s)
    fit = linregress(lr, ls)
    res = ls - (fit.intercept + fit.slope * lr)
    return DecayFit(float(fit.slope), float(fit.stderr), float(fit.intercept), float(np.abs(res).max()), float(fit.rvalue**2))


def snap_exponent(x, grid_values, tol=0.15):
    """Nearest value of ``grid_values`` within ``tol`` of ``x``, else None."""
    grid_values = np.asarray(grid_values, dtype=float)
    k = int(np.argmin(np.abs(grid_values - x)))
    return float(grid_values[k]) if abs(grid_values[k] - x) <= tol else None


def cone_laplacian_residual(lam, mode, m=3, n_theta=128, t_range=(0.0, 1.0), n_t=32):
    """Apply ``d_t^2 + (m-2) d_t - Delta_link`` to ``e^{lam t} v`` numerically.

    Radial derivatives use Chebyshev interpolation in ``t = log r``; the
    link Laplacian is spectral on the angle grid.  Returns the largest
    residual relative to ``(1 + lam^2 + gamma) max|u|``.
    """
    if not isinstance(mode, (EigenMode, RealMode)):
        mode = RealMode(*mode, "c")
    k = np.arange(n_t)
    x = np.cos(np.pi * (2 * k + 1) / (2 * n_t))
    t0, t1 = t_range
    t = t0 + (x + 1) * (t1 - t0) / 2
    radial = np.exp(lam * t)
    coef = cheb.chebfit(x, radial, n_t - 1)
    scale = 2.0 / (t1 - t0)
    d1 = cheb.chebval(x, cheb.chebder(coef)) * scale
    d2 = cheb.chebval(x, cheb.chebder(coef, 2)) * scale**2

    grid = ConeGrid(1.0, 2.0, 1, n_theta)
    T1, T2 = grid.angles()
    v = np.real(mode(T1, T2))
    g1, g2 = link_gradient(v[None], axes=(1, 2))
    g11 = link_gradient(g1, axes=(1,))[0]
    g12 = link_gradient(g1, axes=(2,))[0]
    g22 = link_gradient(g2, axes=(2,))[0]
    gi = LINK_METRIC_INV
    lap_v = -(gi[0, 0] * g11 + 2 * gi[0, 1] * g12 + gi[1, 1] * g22)[0]

    u = radial[:, None, None] * v[None]
    res = (d2 + (m - 2) * d1)[:, None, None] * v[None] - radial[:, None, None] * lap_v[None]
    return float(np.abs(res).max() / ((1 + lam**2 + mode.gamma) * np.abs(u).max()))


def spectrum_rows_csv(table, path, config=None):
    """Write ``table.rows()`` with a commented header naming units."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("# link Laplace eigenmodes exp(i(n1 t1 + n2 t2)); gamma dimensionless; "
                 "alpha, beta are radial exponents of r^x v harmonic on the cone\n")
        if config:
            fh.write(f"# config={config}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n1", "n2", "gamma", "multiplicity", "alpha", "beta"])
        for row in table.rows():
            w.writerow([row[0], row[1], repr(row[2]), row[3], repr(row[4]), repr(row[5])])
