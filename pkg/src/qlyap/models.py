"""SDE models dX = f(X) dt + sigma dW on bounded domains, and the model zoo.

Drift and Jacobian callables are vectorised over leading axes: ``drift`` maps
an array of shape ``(..., d)`` to ``(..., d)`` and ``jacobian`` maps it to
``(..., d, d)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

__all__ = [
    "ModelError",
    "Interval",
    "Box",
    "Ball",
    "SdeModel",
    "ZooEntry",
    "JacobianReport",
    "ZOO",
    "make_model",
    "zoo_names",
    "lambda_plus_minus",
    "symmetric_extremes",
    "jacobi_eigenvalues",
    "check_jacobian",
]


class ModelError(ValueError):
    """Invalid model, domain, or a non-finite model evaluation."""


# -- domains -----------------------------------------------------------------


class Interval:
    """Open interval (a, b) in one dimension."""

    dim = 1

    def __init__(self, a: float, b: float):
        a, b = float(a), float(b)
        if not a < b:
            raise ModelError(f"Interval requires a < b, got ({a}, {b})")
        self.a, self.b = a, b

    def __repr__(self):
        return f"Interval({self.a!r}, {self.b!r})"

    @property
    def bounds(self):
        return np.array([self.a]), np.array([self.b])

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return (x[..., 0] > self.a) & (x[..., 0] < self.b)

    def distance(self, x):
        x = np.asarray(x, dtype=float)[..., 0]
        return np.maximum(np.minimum(x - self.a, self.b - x), 0.0)

    def exit_fraction(self, x0, x1):
        return _box_exit_fraction(x0, x1, np.array([self.a]), np.array([self.b]))

    def bridge_exit_prob(self, x0, x1, var):
        return _box_bridge_prob(x0, x1, np.array([self.a]), np.array([self.b]), var)

    def nearest_boundary(self, x):
        return _box_nearest(x, np.array([self.a]), np.array([self.b]))

    def sample_interior(self, rng, n):
        return rng.uniform(self.a, self.b, size=(n, 1))


class Box:
    """Open axis-aligned box with per-axis bounds ``lo < hi``."""

    def __init__(self, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ModelError("Box bounds must be 1-d arrays of equal length")
        if not np.all(lo < hi):
            raise ModelError(f"Box requires lo < hi componentwise, got {lo}, {hi}")
        self.lo, self.hi = lo, hi
        self.dim = lo.size

    def __repr__(self):
        return f"Box({self.lo.tolist()!r}, {self.hi.tolist()!r})"

    @property
    def bounds(self):
        return self.lo, self.hi

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return np.all((x > self.lo) & (x < self.hi), axis=-1)

    def distance(self, x):
        x = np.asarray(x, dtype=float)
        d = np.minimum(x - self.lo, self.hi - x).min(axis=-1)
        return np.maximum(d, 0.0)

    def exit_fraction(self, x0, x1):
        return _box_exit_fraction(x0, x1, self.lo, self.hi)

    def bridge_exit_prob(self, x0, x1, var):
        return _box_bridge_prob(x0, x1, self.lo, self.hi, var)

    def nearest_boundary(self, x):
        return _box_nearest(x, self.lo, self.hi)

    def sample_interior(self, rng, n):
        return rng.uniform(self.lo, self.hi, size=(n, self.dim))


class Ball:
    """Open Euclidean ball."""

    def __init__(self, center, radius: float):
        center = np.atleast_1d(np.asarray(center, dtype=float))
        if not radius > 0:
            raise ModelError(f"Ball requires radius > 0, got {radius}")
        self.center, self.radius = center, float(radius)
        self.dim = center.size

    def __repr__(self):
        return f"Ball({self.center.tolist()!r}, {self.radius!r})"

    @property
    def bounds(self):
        return self.center - self.radius, self.center + self.radius

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return np.sum((x - self.center) ** 2, axis=-1) < self.radius**2

    def distance(self, x):
        x = np.asarray(x, dtype=float)
        r = np.sqrt(np.sum((x - self.center) ** 2, axis=-1))
        return np.maximum(self.radius - r, 0.0)

    def exit_fraction(self, x0, x1):
        # smallest tau in (0, 1] with |x0 + tau (x1 - x0) - c| = R, x0 inside
        p = np.asarray(x0, dtype=float) - self.center
        v = np.asarray(x1, dtype=float) - np.asarray(x0, dtype=float)
        a = np.sum(v * v, axis=-1)
        b = np.sum(p * v, axis=-1)
        c = np.sum(p * p, axis=-1) - self.radius**2
        disc = np.sqrt(np.maximum(b * b - a * c, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            # c < 0 inside, so the root is positive; this form avoids cancellation
            tau = np.where(b >= 0, -c / (b + disc), (disc - b) / a)
        return np.clip(np.nan_to_num(tau, nan=1.0), 0.0, 1.0)

    def bridge_exit_prob(self, x0, x1, var):
        # half-space approximation at the nearest point of the sphere
        arg = 2.0 * self.distance(x0) * self.distance(x1) / var
        return np.where(arg < _BRIDGE_CUTOFF, np.exp(-np.minimum(arg, _BRIDGE_CUTOFF)), 0.0)

    def nearest_boundary(self, x):
        x = np.asarray(x, dtype=float)
        r = x - self.center
        nr = np.linalg.norm(r, axis=-1, keepdims=True)
        unit = np.where(nr > 0, r / np.where(nr > 0, nr, 1.0), np.eye(self.dim)[0])
        return self.center + self.radius * unit

    def sample_interior(self, rng, n):
        g = rng.standard_normal((n, self.dim))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = self.radius * rng.uniform(0, 1, n) ** (1.0 / self.dim)
        return self.center + 0.999 * r[:, None] * g


def _box_exit_fraction(x0, x1, lo, hi):
    x0 = np.asarray(x0, dtype=float)
    v = np.asarray(x1, dtype=float) - x0
    with np.errstate(divide="ignore", invalid="ignore"):
        t_lo = np.where(v < 0, (lo - x0) / v, np.inf)
        t_hi = np.where(v > 0, (hi - x0) / v, np.inf)
    tau = np.minimum(t_lo, t_hi).min(axis=-1)
    return np.clip(tau, 0.0, 1.0)


def _box_bridge_prob(x0, x1, lo, hi, var):
    # probability that a Brownian bridge between two interior points crosses
    # any face, treating faces as independent half-spaces
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    g0 = _face_gap(x0, lo, hi)
    g1 = _face_gap(x1, lo, hi)
    out = np.zeros(np.broadcast(g0, g1).shape)
    # p < exp(-60) when both endpoints are this far from every face
    near = np.minimum(g0, g1) < np.sqrt(_BRIDGE_CUTOFF * var / 2.0)
    if near.any():
        a, b = x0[near], x1[near]
        p_lo = np.exp(-2.0 * (a - lo) * (b - lo) / var)
        p_hi = np.exp(-2.0 * (hi - a) * (hi - b) / var)
        out[near] = 1.0 - np.prod((1.0 - p_lo) * (1.0 - p_hi), axis=-1)
    return out


_BRIDGE_CUTOFF = 60.0


def _face_gap(x, lo, hi):
    if x.shape[-1] == 1:
        v = x[..., 0]
        return np.minimum(v - lo[0], hi[0] - v)
    return np.minimum(x - lo, hi - x).min(axis=-1)


def _box_nearest(x, lo, hi):
    x = np.array(x, dtype=float, copy=True)
    gap_lo = x - lo
    gap_hi = hi - x
    flat = x.reshape(-1, x.shape[-1])
    glo = gap_lo.reshape(flat.shape)
    ghi = gap_hi.reshape(flat.shape)
    rows = np.arange(flat.shape[0])
    m = np.minimum(glo, ghi)
    axis = np.argmin(m, axis=1)
    to_lo = glo[rows, axis] <= ghi[rows, axis]
    flat[rows, axis] = np.where(to_lo, lo[axis], hi[axis])
    return flat.reshape(x.shape)


def project_exit(domain, x0, x1):
    """Point where the segment from ``x0`` (inside) to ``x1`` first meets the boundary."""
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    tau = domain.exit_fraction(x0, x1)
    p = x0 + tau[..., None] * (x1 - x0)
    # snap the crossed coordinate exactly onto the face for interval/box domains
    if isinstance(domain, (Interval, Box)):
        lo, hi = domain.bounds
        p = np.clip(p, lo, hi)
        v = x1 - x0
        with np.errstate(divide="ignore", invalid="ignore"):
            hit_lo = (v < 0) & np.isclose((lo - x0) / v, tau[..., None], rtol=1e-12, atol=0)
            hit_hi = (v > 0) & np.isclose((hi - x0) / v, tau[..., None], rtol=1e-12, atol=0)
        p = np.where(hit_lo, lo, np.where(hit_hi, hi, p))
    return p


# -- models ------------------------------------------------------------------


@dataclass
class SdeModel:
    """Additive-noise SDE ``dX = f(X) dt + sigma dW`` killed on leaving ``domain``.

    Parameters
    ----------
    drift : callable
        ``f``, vectorised over leading axes of an ``(..., d)`` array.
    jacobian : callable
        ``Df``, returning ``(..., d, d)``.
    sigma : float
        Noise amplitude, identical in every coordinate.
    domain : Interval, Box or Ball
    derivative : callable, optional
        Scalar ``f'`` for one-dimensional models, on plain arrays. Defaults
        to the 1x1 Jacobian.
    """

    drift: Callable
    jacobian: Callable
    sigma: float
    domain: object
    derivative: Callable | None = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.sigma > 0:
            raise ModelError(f"sigma must be positive, got {self.sigma}")
        self.sigma = float(self.sigma)

    @property
    def dim(self) -> int:
        return self.domain.dim

    def f(self, x):
        return self.drift(np.asarray(x, dtype=float))

    def df(self, x):
        return self.jacobian(np.asarray(x, dtype=float))

    def fprime(self, x):
        """Scalar derivative on a plain array of points (1-d models only)."""
        if self.dim != 1:
            raise ModelError("fprime is only defined for one-dimensional models")
        x = np.asarray(x, dtype=float)
        if self.derivative is not None:
            return self.derivative(x)
        return self.jacobian(x[..., None])[..., 0, 0]

    def f1(self, x):
        """Scalar drift on a plain array of points (1-d models only)."""
        if self.dim != 1:
            raise ModelError("f1 is only defined for one-dimensional models")
        x = np.asarray(x, dtype=float)
        return self.drift(x[..., None])[..., 0]

    def with_domain(self, domain) -> "SdeModel":
        if domain.dim != self.dim:
            raise ModelError(f"domain dimension {domain.dim} != model dimension {self.dim}")
        return SdeModel(self.drift, self.jacobian, self.sigma, domain,
                        self.derivative, self.name, dict(self.params))


# -- zoo ---------------------------------------------------------------------


def _poly1d(coeffs):
    """Drift/derivative pair for f(x) = sum_k coeffs[k] x**k."""
    c = np.asarray(coeffs, dtype=float)
    dc = np.polynomial.polynomial.polyder(c) if c.size > 1 else np.zeros(1)

    def f(x):
        return np.polynomial.polynomial.polyval(x, c)

    def fp(x):
        return np.polynomial.polynomial.polyval(x, dc)

    return f, fp


def _scalar_model(coeffs, sigma, domain, name, params):
    f, fp = _poly1d(coeffs)
    return SdeModel(
        drift=lambda x: f(x),
        jacobian=lambda x: fp(x)[..., None],
        sigma=sigma,
        domain=domain,
        derivative=fp,
        name=name,
        params=params,
    )


def _zero_coeffs(p):
    return [0.0]


def _ou_coeffs(p):
    return [0.0, -p["kappa"]]


def _pitchfork_coeffs(p):
    return [0.0, p["alpha"], 0.0, -1.0]


def _quintic_coeffs(p):
    return [0.0, p["alpha"], 0.0, -1.0, 0.0, 0.3]


def _septic_coeffs(p):
    return [0.0, p["alpha"], 0.0, -1.0, 0.0, 0.3, 0.0, -0.1]


def _gradient2d(p, sigma, domain):
    # f = -grad V with V = (|x|^2 - 1)^2 / 4
    def drift(x):
        r2 = np.sum(x * x, axis=-1, keepdims=True)
        return -(r2 - 1.0) * x

    def jac(x):
        r2 = np.sum(x * x, axis=-1)
        eye = np.eye(x.shape[-1])
        return -(r2 - 1.0)[..., None, None] * eye - 2.0 * x[..., :, None] * x[..., None, :]

    return SdeModel(drift, jac, sigma, domain, name="gradient2d", params=dict(p))


def _linear2d(p, sigma, domain):
    a = np.array([[p["a"], -p["omega"]], [p["omega"], p["b"]]])

    def drift(x):
        return x @ a.T

    def jac(x):
        return np.broadcast_to(a, x.shape[:-1] + (2, 2)).copy()

    return SdeModel(drift, jac, sigma, domain, name="linear2d", params=dict(p))


@dataclass(frozen=True)
class ZooEntry:
    """Named model family with default parameters and default domain."""

    name: str
    dim: int
    defaults: Mapping[str, float]
    build: Callable
    doc: str = ""

    def make(self, sigma=1.0, domain=None, **params) -> SdeModel:
        unknown = set(params) - set(self.defaults)
        if unknown:
            raise ModelError(f"unknown parameters for {self.name!r}: {sorted(unknown)}")
        p = {**self.defaults, **{k: float(v) for k, v in params.items()}}
        if domain is None:
            domain = self.default_domain(p)
        if domain.dim != self.dim:
            raise ModelError(f"{self.name!r} is {self.dim}-dimensional, domain is {domain.dim}-dimensional")
        model = self.build(p, float(sigma), domain)
        model.name = self.name
        model.params = p
        return model

    def default_domain(self, p):
        if self.dim == 1:
            c = p.get("c")
            if c is not None:
                return Interval(-c, c)
            return Interval(0.0, np.pi)
        if self.name == "gradient2d":
            return Ball(np.zeros(2), p.get("radius", 1.5))
        return Box(-np.ones(self.dim), np.ones(self.dim))


def _scalar_entry(name, coeff_fn, defaults, doc):
    def build(p, sigma, domain):
        return _scalar_model(coeff_fn(p), sigma, domain, name, p)

    return ZooEntry(name, 1, defaults, build, doc)


ZOO: dict[str, ZooEntry] = {
    e.name: e
    for e in [
        _scalar_entry("brownian", _zero_coeffs, {}, "f = 0"),
        _scalar_entry("ou", _ou_coeffs, {"kappa": 1.0, "c": 1.0}, "f = -kappa x"),
        _scalar_entry("pitchfork", _pitchfork_coeffs, {"alpha": 1.0, "c": 1.0},
                      "f = alpha x - x^3"),
        _scalar_entry("quintic", _quintic_coeffs, {"alpha": 1.0, "c": 1.5},
                      "f = alpha x - x^3 + 0.3 x^5"),
        _scalar_entry("septic", _septic_coeffs, {"alpha": 1.0, "c": 1.5},
                      "f = alpha x - x^3 + 0.3 x^5 - 0.1 x^7"),
        ZooEntry("gradient2d", 2, {"radius": 1.5}, _gradient2d,
                 "f = -grad (|x|^2 - 1)^2 / 4 on a ball"),
        ZooEntry("linear2d", 2, {"a": 1.0, "b": -1.0, "omega": 0.0}, _linear2d,
                 "f = [[a, -omega], [omega, b]] x on [-1, 1]^2"),
    ]
}


def zoo_names():
    return sorted(ZOO)


def make_model(name: str, sigma: float = 1.0, domain=None, **params) -> SdeModel:
    """Instantiate a zoo model by name.

    Parameters ``c`` (1-d) and ``radius`` (gradient2d) select the default
    symmetric domain when ``domain`` is not given.

    >>> make_model("pitchfork", alpha=1.0, c=2.0).domain
    Interval(-2.0, 2.0)
    """
    try:
        entry = ZOO[name]
    except KeyError:
        raise ModelError(f"unknown model {name!r}; choose from {zoo_names()}") from None
    return entry.make(sigma=sigma, domain=domain, **params)


# -- symmetric-part spectra --------------------------------------------------


def jacobi_eigenvalues(a, tol=1e-12, max_sweeps=50):
    """Eigenvalues of symmetric matrices by cyclic Jacobi rotations.

    Works on a stack of shape ``(..., d, d)``; returns ``(..., d)`` eigenvalues
    in ascending order. Sweeps stop once the off-diagonal Frobenius norm is at
    most ``tol`` times the Frobenius norm of the input.
    """
    a = np.asarray(a, dtype=float)
    d = a.shape[-1]
    batch = a.shape[:-2]
    a = _jacobi_sweeps(a.reshape((-1, d, d)), tol, max_sweeps)
    ev = np.sort(np.diagonal(a, axis1=-2, axis2=-1), axis=-1)
    return ev.reshape(batch + (d,))


def _jacobi_sweeps(a, tol=1e-12, max_sweeps=50):
    """Rotate a ``(m, d, d)`` (or ``(d, d)``) symmetric stack towards diagonal form."""
    single = a.ndim == 2
    a = np.array(a, dtype=float, copy=True).reshape((-1,) + a.shape[-2:])
    d = a.shape[-1]
    scale = np.sqrt(np.sum(a * a, axis=(-2, -1)))
    off_mask = ~np.eye(d, dtype=bool)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(a[:, off_mask] ** 2, axis=-1))
        if np.all(off <= tol * np.maximum(scale, np.finfo(float).tiny)):
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[:, p, q]
                app = a[:, p, p]
                aqq = a[:, q, q]
                active = apq != 0.0
                with np.errstate(divide="ignore", invalid="ignore"):
                    theta = np.where(active, (aqq - app) / (2.0 * apq), 0.0)
                    t = np.where(
                        active,
                        np.sign(theta + (theta == 0)) / (np.abs(theta) + np.hypot(theta, 1.0)),
                        0.0,
                    )
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J with J the (p, q) rotation
                ap = a[:, :, p].copy()
                aq = a[:, :, q].copy()
                a[:, :, p] = c[:, None] * ap - s[:, None] * aq
                a[:, :, q] = s[:, None] * ap + c[:, None] * aq
                ap = a[:, p, :].copy()
                aq = a[:, q, :].copy()
                a[:, p, :] = c[:, None] * ap - s[:, None] * aq
                a[:, q, :] = s[:, None] * ap + c[:, None] * aq
    return a[0] if single else a


def symmetric_extremes(jac):
    """Max and min eigenvalue of the symmetric part of ``jac`` (shape ``(..., d, d)``)."""
    jac = np.asarray(jac, dtype=float)
    d = jac.shape[-1]
    sym = 0.5 * (jac + np.swapaxes(jac, -1, -2))
    if d == 1:
        v = sym[..., 0, 0]
        return v, v.copy()
    if d == 2:
        p = sym[..., 0, 0]
        q = sym[..., 1, 1]
        r = sym[..., 0, 1]
        mid = 0.5 * (p + q)
        rad = np.hypot(0.5 * (p - q), r)
        return mid + rad, mid - rad
    ev = jacobi_eigenvalues(sym)
    return ev[..., -1], ev[..., 0]


def lambda_plus_minus(model: SdeModel, x):
    """Extremal rates of ``<Df(x) r, r>`` over unit vectors ``r``.

    Returns ``(lam_plus, lam_minus)``, the largest and smallest eigenvalue of
    the symmetrised Jacobian at ``x``. ``x`` may be a single point of shape
    ``(d,)`` or a batch ``(..., d)``.
    """
    x = np.asarray(x, dtype=float)
    jac = model.df(x)
    if not np.all(np.isfinite(jac)):
        bad = x if x.ndim == 1 else x.reshape(-1, model.dim)[
            ~np.all(np.isfinite(jac.reshape(-1, model.dim * model.dim)), axis=1)][0]
        raise ModelError(f"non-finite Jacobian at x={np.asarray(bad).tolist()}")
    hi, lo = symmetric_extremes(jac)
    if x.ndim == 1:
        return float(hi), float(lo)
    return hi, lo


# -- Jacobian checker --------------------------------------------------------


@dataclass
class JacobianReport:
    max_rel_error: float
    points: np.ndarray
    errors: np.ndarray
    tol: float
    failing: np.ndarray

    @property
    def ok(self) -> bool:
        return self.failing.size == 0


def check_jacobian(model: SdeModel, n_points: int = 100, tol: float = 1e-5,
                   step: float = 1e-5, seed: int = 0) -> JacobianReport:
    """Compare ``model.jacobian`` with central differences of ``model.drift``.

    The relative error at a point is ``|J - J_fd|_max / max(1, |J|_max)``.
    Points failing ``tol`` are listed in ``failing`` (indices into ``points``).
    """
    if n_points < 1:
        raise ModelError("n_points must be >= 1")
    rng = np.random.default_rng(seed)
    pts = model.domain.sample_interior(rng, n_points)
    d = model.dim
    jac = model.df(pts)
    fd = np.empty_like(jac)
    for k in range(d):
        e = np.zeros(d)
        e[k] = step
        fd[..., :, k] = (model.f(pts + e) - model.f(pts - e)) / (2 * step)
    diff = np.abs(jac - fd).reshape(n_points, -1).max(axis=1)
    scale = np.maximum(1.0, np.abs(jac).reshape(n_points, -1).max(axis=1))
    err = diff / scale
    finite = np.all(np.isfinite(jac.reshape(n_points, -1)), axis=1)
    err = np.where(finite, err, np.inf)
    failing = np.flatnonzero(err > tol)
    return JacobianReport(float(err.max()), pts, err, tol, failing)
