"""Principal Dirichlet eigenpair of a 1-d generator and the derived densities.

The generator ``L = (sigma^2/2) d^2/dx^2 + f d/dx`` is discretised in
divergence form ``(sigma^2/2) e^{-gamma} (e^{gamma} u')'`` on a uniform grid,
which after the similarity transform ``diag(e^{gamma/2})`` is a symmetric
tridiagonal matrix. Its top eigenvalue is bracketed by Sturm-sequence
bisection and the eigenvector is found by inverse iteration.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.linalg

from .models import Interval, ModelError, SdeModel

__all__ = [
    "SolverError",
    "Grid1D",
    "Tridiagonal",
    "SpectralSolution",
    "compute_gamma",
    "assemble_generator",
    "sturm_count",
    "principal_eigenpair",
    "normalize_and_densities",
    "conditioned_lyapunov_1d",
    "identity_check",
    "survival_curve",
    "solve",
    "trapezoid",
    "write_solution_csv",
    "read_solution_csv",
]

DEFAULT_N = 4000
DEFAULT_TOL = 1e-10


class SolverError(RuntimeError):
    """The eigen-solver failed to produce a converged principal pair."""


def trapezoid(y, h):
    """Composite trapezoid rule on a uniform grid with spacing ``h``."""
    y = np.asarray(y, dtype=float)
    return float(h * (y.sum() - 0.5 * (y[0] + y[-1])))


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid ``x_i = a + i h``, ``i = 0..n+1``, with ``n`` interior points."""

    a: float
    b: float
    n: int

    def __post_init__(self):
        if not self.a < self.b:
            raise ModelError(f"grid requires a < b, got ({self.a}, {self.b})")
        if self.n < 8:
            raise ModelError(f"grid requires n >= 8 interior points, got {self.n}")

    @classmethod
    def for_model(cls, model: SdeModel, n: int = DEFAULT_N) -> "Grid1D":
        if not isinstance(model.domain, Interval):
            raise ModelError("spectral solver needs a one-dimensional interval domain")
        return cls(model.domain.a, model.domain.b, int(n))

    @property
    def h(self) -> float:
        return (self.b - self.a) / (self.n + 1)

    @property
    def x(self) -> np.ndarray:
        return self.a + self.h * np.arange(self.n + 2)

    @property
    def interior(self) -> slice:
        return slice(1, self.n + 1)


@dataclass
class Tridiagonal:
    """Symmetric tridiagonal matrix stored as diagonal and off-diagonal."""

    diag: np.ndarray
    off: np.ndarray

    @property
    def n(self):
        return self.diag.size

    def matvec(self, v):
        out = self.diag * v
        out[:-1] += self.off * v[1:]
        out[1:] += self.off * v[:-1]
        return out

    def to_dense(self):
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)

    def norm_inf(self):
        row = np.abs(self.diag).copy()
        row[:-1] += np.abs(self.off)
        row[1:] += np.abs(self.off)
        return float(row.max())

    def gershgorin(self):
        r = np.zeros_like(self.diag)
        r[:-1] += np.abs(self.off)
        r[1:] += np.abs(self.off)
        return float((self.diag - r).min()), float((self.diag + r).max())


@dataclass
class SpectralSolution:
    """Grid functions and scalars of the 1-d killed diffusion.

    Arrays include both endpoints (length ``n + 2``); ``psi``, ``nu`` and ``m``
    vanish there. ``gamma`` is the log-density of the speed measure with
    ``gamma(a) = 0``.
    """

    grid: Grid1D
    gamma: np.ndarray
    psi: np.ndarray
    lambda0: float
    nu: np.ndarray
    eta: np.ndarray
    m: np.ndarray
    lam: float

    @property
    def x(self):
        return self.grid.x

    def integrate(self, values) -> float:
        return trapezoid(values, self.grid.h)

    def expect(self, h) -> float:
        """``int h dm`` for a callable or grid array ``h``."""
        vals = h(self.x) if callable(h) else np.asarray(h)
        return self.integrate(vals * self.m)

    def bin_masses(self, edges, density="m"):
        """Mass of ``nu`` or ``m`` in each bin, from the trapezoid CDF on the grid."""
        dens = getattr(self, density)
        cdf = scipy.integrate.cumulative_trapezoid(dens, self.x, initial=0.0)
        cdf /= cdf[-1]
        return np.diff(np.interp(edges, self.x, cdf))


# -- building blocks ---------------------------------------------------------


def compute_gamma(model: SdeModel, grid: Grid1D) -> np.ndarray:
    """``gamma(x) = (2/sigma^2) int_a^x f``, by cumulative trapezoid on the grid."""
    if model.dim != 1:
        raise ModelError("compute_gamma requires a one-dimensional model")
    x = grid.x
    f = model.f1(x)
    if not np.all(np.isfinite(f)):
        raise ModelError("non-finite drift on the grid")
    g = scipy.integrate.cumulative_trapezoid(f, dx=grid.h, initial=0.0)
    return (2.0 / model.sigma**2) * g


def _midpoint_gamma(model, grid, gamma):
    # gamma at x_{i+1/2}: trapezoid over the half cell with the midpoint drift
    x = grid.x
    xm = 0.5 * (x[:-1] + x[1:])
    fm = model.f1(xm)
    f = model.f1(x)
    return gamma[:-1] + (2.0 / model.sigma**2) * 0.25 * grid.h * (f[:-1] + fm)


def assemble_generator(model: SdeModel, grid: Grid1D, gamma=None) -> Tridiagonal:
    """Symmetric tridiagonal form of the Dirichlet generator on the interior nodes.

    Row ``i`` of the divergence-form operator is
    ``(s/h^2) [e^{g(i+1/2) - g(i)} (u_{i+1} - u_i) - e^{g(i-1/2) - g(i)} (u_i - u_{i-1})]``
    with ``s = sigma^2/2``. Conjugating with ``diag(e^{g/2})`` gives
    off-diagonals ``s/h^2 * e^{g(i+1/2) - (g(i) + g(i+1))/2}``. Only differences
    of ``gamma`` appear, so the matrix is invariant under ``gamma + const``.
    """
    if gamma is None:
        gamma = compute_gamma(model, grid)
    gamma = np.asarray(gamma, dtype=float)
    gm = _midpoint_gamma(model, grid, gamma - gamma[0]) + gamma[0]
    s = 0.5 * model.sigma**2 / grid.h**2
    # flux weights relative to each node (i = 1..n interior)
    right = np.exp(gm[1:] - gamma[1:-1])      # e^{g(i+1/2) - g(i)}
    left = np.exp(gm[:-1] - gamma[1:-1])      # e^{g(i-1/2) - g(i)}
    diag = -s * (right + left)
    off = s * np.exp(gm[1:-1] - 0.5 * (gamma[1:-2] + gamma[2:-1]))
    if not (np.all(np.isfinite(diag)) and np.all(np.isfinite(off))):
        raise SolverError("overflow while assembling the generator")
    return Tridiagonal(diag, off)


def sturm_count(mat: Tridiagonal, mu: float) -> int:
    """Number of eigenvalues strictly greater than ``mu``.

    Counts negative pivots of the LDL^T factorisation of ``A - mu I``.
    """
    d = mat.diag.tolist()
    e2 = (mat.off * mat.off).tolist()
    tiny = np.finfo(float).tiny * 1e3
    below = 0
    q = d[0] - mu
    if q < 0:
        below += 1
    for i in range(1, len(d)):
        if q == 0.0:
            q = tiny
        q = d[i] - mu - e2[i - 1] / q
        if q < 0:
            below += 1
    return len(d) - below


def _inverse_iteration(mat: Tridiagonal, shift: float, max_iter: int, rtol: float):
    n = mat.n
    ab = np.zeros((3, n))
    ab[0, 1:] = mat.off
    ab[1] = mat.diag - shift
    ab[2, :-1] = mat.off
    v = np.sin(np.pi * (np.arange(1, n + 1)) / (n + 1))
    v /= np.linalg.norm(v)
    scale = max(1.0, mat.norm_inf())
    res = np.inf
    for it in range(max_iter):
        w = scipy.linalg.solve_banded((1, 1), ab, v, check_finite=False)
        nw = np.linalg.norm(w)
        if not np.isfinite(nw) or nw == 0:
            raise np.linalg.LinAlgError("inverse iteration produced a non-finite iterate")
        v = w / nw
        res = np.linalg.norm(mat.matvec(v) - shift * v)
        if res <= rtol * scale:
            return v, res, it + 1
    raise np.linalg.LinAlgError(f"inverse iteration stagnated, residual {res:.3e}")


def principal_eigenpair(mat: Tridiagonal, tol: float = DEFAULT_TOL, max_iter: int = 50,
                        rtol: float = 1e-10):
    """Largest eigenvalue and its eigenvector.

    The eigenvalue is bracketed to width ``tol`` by Sturm bisection, starting
    from the Gershgorin upper bound and the Rayleigh quotient of a positive
    trial vector. The eigenvector comes from inverse iteration with residual
    ``|A v - lam v| <= rtol * max(1, |A|_inf)``; a stagnating iteration is
    retried once with the shift perturbed by a relative 1e-10.

    Returns
    -------
    lam0 : float
    v : ndarray
        Unit-norm eigenvector, sign chosen so its first entry is positive.
    """
    n = mat.n
    if n < 8:
        raise SolverError("principal_eigenpair needs at least 8 unknowns")
    trial = np.sin(np.pi * np.arange(1, n + 1) / (n + 1))
    lo = float(trial @ mat.matvec(trial) / (trial @ trial))
    _, hi = mat.gershgorin()
    # the Dirichlet operator is negative definite
    hi = min(hi, 0.0)
    if not np.isfinite(lo) or not np.isfinite(hi):
        raise SolverError("non-finite matrix entries")
    # lo is a Rayleigh quotient, so at least one eigenvalue is >= lo
    lo = lo - 1e-12 * max(1.0, abs(lo))
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if sturm_count(mat, mid) >= 1:
            lo = mid
        else:
            hi = mid
    lam0 = 0.5 * (lo + hi)
    try:
        v, _, _ = _inverse_iteration(mat, lam0, max_iter, rtol)
    except (np.linalg.LinAlgError, ValueError):
        try:
            v, _, _ = _inverse_iteration(mat, lam0 * (1 + 1e-10), max_iter, rtol)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SolverError(f"principal eigenvector did not converge: {exc}") from exc
    if v[0] < 0:
        v = -v
    return lam0, v


def normalize_and_densities(gamma, y, grid: Grid1D):
    """Densities from the symmetrised eigenvector ``y`` (interior values).

    ``psi = e^{-gamma/2} y`` is scaled so that ``int psi^2 e^gamma = 1`` and
    ``psi'(a) > 0``; then ``nu = psi e^gamma / int psi e^gamma``,
    ``eta = (int psi e^gamma) psi`` and ``m = psi^2 e^gamma``.

    Returns ``(psi, nu, eta, m)`` on the full grid including endpoints.
    """
    gamma = np.asarray(gamma, dtype=float)
    h = grid.h
    yy = np.zeros(grid.n + 2)
    yy[grid.interior] = y
    if yy[1] < 0:
        yy = -yy
    # m = psi^2 e^gamma = y^2 and psi e^gamma = y e^{gamma/2}, independent of shifts in gamma
    yy /= math.sqrt(trapezoid(yy * yy, h))
    m = yy * yy
    half = np.exp(0.5 * gamma)
    phi = yy * half
    z = trapezoid(phi, h)
    nu = phi / z
    with np.errstate(over="ignore"):
        psi = yy / half
    eta = z * psi
    return psi, nu, eta, m


def conditioned_lyapunov_1d(model: SdeModel, solution: SpectralSolution) -> float:
    """``int f'(y) m(dy)`` by trapezoid quadrature."""
    return solution.integrate(model.fprime(solution.x) * solution.m)


@dataclass
class IdentityCheck:
    direct: float
    by_flux: float
    by_curvature: float

    @property
    def dev_flux(self):
        return abs(self.by_flux - self.direct)

    @property
    def dev_curvature(self):
        return abs(self.by_curvature - self.direct)

    @property
    def max_deviation(self):
        return max(self.dev_flux, self.dev_curvature)


def identity_check(model: SdeModel, solution: SpectralSolution) -> IdentityCheck:
    """Two integration-by-parts rewrites of ``lambda``.

    ``by_flux = -(2/s^2) int f^2 dm - 2 int f psi' psi e^gamma`` and
    ``by_curvature = -(2/s^2) int f^2 dm - 2 lambda0 + s^2 int psi'' psi e^gamma``,
    with ``psi'`` and ``psi''`` from central differences. The products
    ``psi' psi e^gamma`` are formed as ``(psi'/psi) m`` on the interior to
    stay finite when ``gamma`` is large.
    """
    x = solution.x
    h = solution.grid.h
    s2 = model.sigma**2
    f = model.f1(x)
    psi, m, g = solution.psi, solution.m, solution.gamma
    w = np.exp(g - g.max())
    # psi e^{gamma} rescaled; the constant is restored below
    pe = psi * w
    dpsi = np.gradient(psi, h, edge_order=2)
    d2psi = np.zeros_like(psi)
    d2psi[1:-1] = (psi[2:] - 2 * psi[1:-1] + psi[:-2]) / h**2
    d2psi[0] = (2 * psi[0] - 5 * psi[1] + 4 * psi[2] - psi[3]) / h**2
    d2psi[-1] = (2 * psi[-1] - 5 * psi[-2] + 4 * psi[-3] - psi[-4]) / h**2
    const = math.exp(g.max())
    first = -(2.0 / s2) * trapezoid(f * f * m, h)
    flux = trapezoid(f * dpsi * pe, h) * const
    curv = trapezoid(d2psi * pe, h) * const
    return IdentityCheck(
        direct=solution.lam,
        by_flux=first - 2.0 * flux,
        by_curvature=first - 2.0 * solution.lambda0 + s2 * curv,
    )


def survival_curve(solution: SpectralSolution, t):
    """``P_nu(T > t) = exp(lambda0 t)``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("survival_curve needs t >= 0")
    out = np.exp(solution.lambda0 * t)
    return float(out) if out.ndim == 0 else out


def solve(model: SdeModel, n: int = DEFAULT_N, tol: float = DEFAULT_TOL,
          gamma_shift: float = 0.0) -> SpectralSolution:
    """Full 1-d pipeline: gamma, generator, principal pair, densities, lambda.

    ``gamma_shift`` adds a constant to gamma; results do not depend on it.
    """
    grid = Grid1D.for_model(model, n)
    gamma = compute_gamma(model, grid) + gamma_shift
    mat = assemble_generator(model, grid, gamma)
    lam0, y = principal_eigenpair(mat, tol)
    psi, nu, eta, m = normalize_and_densities(gamma, y, grid)
    sol = SpectralSolution(grid, gamma, psi, lam0, nu, eta, m, float("nan"))
    sol.lam = conditioned_lyapunov_1d(model, sol)
    return sol


# -- CSV ---------------------------------------------------------------------


def write_solution_csv(solution: SpectralSolution, path, meta=()):
    """Write ``x, gamma, psi, nu, eta, m`` with a ``#`` metadata header."""
    with open(path, "w", newline="") as fh:
        for line in meta:
            fh.write(f"# {line}\n")
        fh.write(f"# lambda0={solution.lambda0!r}, lambda={solution.lam!r}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "gamma", "psi", "nu", "eta", "m"])
        for row in zip(solution.x, solution.gamma, solution.psi, solution.nu,
                       solution.eta, solution.m):
            w.writerow([repr(float(v)) for v in row])


def read_solution_csv(path):
    """Read back ``(header dict, column dict)`` from :func:`write_solution_csv` output."""
    header = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                for item in line[1:].split(","):
                    if "=" in item:
                        k, v = item.split("=", 1)
                        header[k.strip()] = v.strip()
            else:
                rows.append(line)
    reader = csv.reader(rows)
    names = next(reader)
    data = np.array([[float(v) for v in r] for r in reader])
    return header, {name: data[:, i] for i, name in enumerate(names)}
