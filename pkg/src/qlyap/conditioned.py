"""Ensemble estimators conditioned on survival, and the statistical probes.

Two conditioning schemes are available:

``rejection``
    independent killed paths; conditional averages use the paths alive at the
    horizon. Unbiased, but the survivor count decays like ``exp(lambda0 t)``.
``fv``
    Fleming-Viot resampling: a particle that hits the boundary is replaced by
    a copy of a uniformly chosen survivor, including its direction, tangent
    growth and every running path functional. The particle count stays
    constant and the ensemble represents the law of whole paths conditioned
    on survival, with an O(1/N) bias.

Time averages use left-point sums, ``(1/t) int_0^t h(X_s) ds ~ (1/K) sum_k
h(X_k)`` with ``K = t / dt`` steps. Observables ``h`` receive an ``(m, d)``
array of positions and return ``(m,)`` values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .models import SdeModel, lambda_plus_minus
from .paths import SimulationError, _check_finite, euler_update, polar_update, run_pairs
from .streams import BLOCK, BRIDGE, DONOR, NOISE, PathStreams

__all__ = [
    "StarvationError",
    "Ensemble",
    "ConditionedEstimate",
    "conditioned_expectation",
    "estimate_lambda_mc",
    "bounds_check",
    "survival_rate_fit",
    "empirical_qsd",
    "empirical_qed",
    "convergence_probe",
    "correlation_probe",
    "spectrum_probe",
    "sync_probe",
    "resolve_mode",
    "wilson_interval",
]

MODES = ("rejection", "fv")
MIN_SURVIVORS = 30


class StarvationError(RuntimeError):
    """Too few (or no) surviving paths for a conditional estimate."""


def wilson_interval(k, n, z=1.959963984540054):
    """Wilson score interval for a binomial proportion ``k / n``."""
    if n <= 0:
        return 0.0, 1.0
    p = k / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if k == 0 else max(0.0, centre - half)
    hi = 1.0 if k == n else min(1.0, centre + half)
    return lo, hi


# -- ensemble ----------------------------------------------------------------


class Ensemble:
    """``n`` particles started at ``x0`` with tangent direction ``v0``.

    Per-particle path functionals live in ``records`` (name -> array with one
    row per particle) and travel with the particle under Fleming-Viot
    resampling. ``rate_sum`` accumulates ``<s, Df s>`` per step so that the
    finite-time exponent at step ``k`` is ``rate_sum / k``.
    """

    def __init__(self, model: SdeModel, x0, n: int, dt: float, seed: int = 0,
                 mode: str = "rejection", v0=None, threads=None, bridge=True):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        if n < 1:
            raise ValueError("n must be >= 1")
        if not dt > 0:
            raise ValueError("dt must be positive")
        d = model.dim
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        if x0.shape != (d,) or not bool(model.domain.contains(x0)):
            raise ValueError(f"x0={x0.tolist()} must be a point inside the domain")
        v0 = np.ones(d) if v0 is None else np.atleast_1d(np.asarray(v0, dtype=float))
        if not np.linalg.norm(v0) > 0:
            raise ValueError("v0 must be non-zero")
        self.model, self.n, self.dt, self.seed, self.mode = model, int(n), float(dt), int(seed), mode
        self.x = np.tile(x0, (n, 1))
        self.s = np.tile(v0 / np.linalg.norm(v0), (n, 1))
        self.rate_sum = np.zeros(n)
        self.alive = np.ones(n, dtype=bool)
        self.kill_time = np.full(n, np.nan)
        self.kill_count = 0
        self.k = 0
        self.records: dict[str, np.ndarray] = {}
        self._observables: dict[str, callable] = {}
        self._occupation = None
        self._active = None
        self._noise = PathStreams(seed, d, n, NOISE, threads)
        self._donor = PathStreams(seed, 1, n, DONOR, threads) if mode == "fv" else None
        self._bridge = PathStreams(seed, 1, n, BRIDGE, threads) if bridge else None
        self._sq = math.sqrt(dt)

    # configuration

    def add_observable(self, name, h):
        """Accumulate ``sum_k h(X_k)`` per particle under ``records[name]``."""
        self._observables[name] = h
        self.records[name] = np.zeros(self.n)

    def add_occupation(self, edges):
        """Per-particle occupation counts of the first coordinate in ``edges`` bins."""
        edges = np.asarray(edges, dtype=float)
        self._occupation = edges
        nb = edges.size - 1
        self.records["_occupation"] = np.zeros((self.n, nb))
        self._occ_base = np.arange(self.n) * nb
        w = np.diff(edges)
        self._uniform_bins = bool(np.allclose(w, w[0], rtol=1e-12, atol=0))

    def _bin_index(self, v):
        edges = self._occupation
        nb = edges.size - 1
        if self._uniform_bins:
            b = ((v - edges[0]) * (nb / (edges[-1] - edges[0]))).astype(np.int64)
        else:
            b = np.searchsorted(edges, v, side="right") - 1
        return np.clip(b, 0, nb - 1)

    def mark(self, name, values):
        """Store per-particle ``values`` (e.g. ``h(X_t)`` now) as a path record."""
        self.records[name] = np.array(values, dtype=float, copy=True)

    # state

    @property
    def t(self) -> float:
        return self.k * self.dt

    @property
    def n_alive(self) -> int:
        return int(self.alive.sum())

    def ftle(self):
        """Finite-time exponents ``logr / t`` of all particles (valid where alive)."""
        if self.k == 0:
            return np.zeros(self.n)
        return self.rate_sum / self.k

    def time_average(self, name):
        return self.records[name] / max(self.k, 1)

    # dynamics

    def step(self):
        model, dt = self.model, self.dt
        if self._active is None:
            sel = slice(None)
            blocks = None
            rows = None
        else:
            sel = self._active
            blocks = np.unique(sel // BLOCK)
            rows = sel
        if self._active is not None and sel.size == 0:
            raise StarvationError(f"all {self.n} paths were killed by t={self.t:g}; "
                                  "use mode='fv' or a shorter horizon")
        noise = self._noise.draw(blocks)[: self.n]
        x = self.x[sel]
        for name, h in self._observables.items():
            self.records[name][sel] += h(x)
        if self._occupation is not None:
            occ = self.records["_occupation"]
            nb = occ.shape[1]
            b = self._bin_index(x[:, 0])
            base = self._occ_base if rows is None else rows * nb
            occ.reshape(-1)[base + b] += 1.0
        s, rate = polar_update(model, x, self.s[sel], dt)
        self.rate_sum[sel] += rate
        u = None if self._bridge is None else self._bridge.draw(blocks)[: self.n][sel, 0]
        xn, exited = euler_update(model, x, noise[sel] * self._sq, dt, u)
        _check_finite(xn, np.arange(self.n)[sel])
        self.x[sel] = xn
        self.s[sel] = s
        self.k += 1
        if exited.any():
            ids = np.arange(self.n)[sel][exited]
            if self.mode == "rejection":
                self.alive[ids] = False
                self.kill_time[ids] = self.t
                self._active = np.flatnonzero(self.alive)
            else:
                self._resample(ids)

    def _resample(self, dying):
        keep = np.ones(self.n, dtype=bool)
        keep[dying] = False
        donors_pool = np.flatnonzero(keep)
        if donors_pool.size == 0:
            raise StarvationError(f"every particle hit the boundary at t={self.t:g}")
        u = self._donor.draw(np.unique(dying // BLOCK))[dying, 0]
        pick = np.minimum((u * donors_pool.size).astype(np.int64), donors_pool.size - 1)
        donors = donors_pool[pick]
        self.x[dying] = self.x[donors]
        self.s[dying] = self.s[donors]
        self.rate_sum[dying] = self.rate_sum[donors]
        for arr in self.records.values():
            arr[dying] = arr[donors]
        self.kill_count += int(dying.size)

    def run_to(self, t, callbacks=None):
        """Step until time ``t``; ``callbacks`` maps step index -> list of callables."""
        target = int(round(t / self.dt))
        while self.k < target:
            self.step()
            if callbacks and self.k in callbacks:
                for cb in callbacks[self.k]:
                    cb(self)

    # reductions

    def estimate(self, values, t=None) -> "ConditionedEstimate":
        """Mean and standard error of per-particle ``values`` over survivors."""
        values = np.asarray(values, dtype=float)
        live = values[self.alive]
        n = live.size
        if n == 0:
            raise StarvationError(
                f"no surviving paths at t={self.t:g} out of {self.n}; "
                "use mode='fv' or a shorter horizon")
        if np.all(live == live[0]):
            value, se = float(live[0]), 0.0
        else:
            value = float(live.mean())
            se = float(live.std(ddof=1) / math.sqrt(n)) if n > 1 else float("inf")
        return ConditionedEstimate(value, se, n, self.n, self.t if t is None else t, self.mode)


@dataclass
class ConditionedEstimate:
    """Conditional mean given survival to ``t`` with its standard error."""

    value: float
    std_error: float
    n_survivors: int
    n_total: int
    t: float
    mode: str

    @property
    def valid(self) -> bool:
        return self.mode == "fv" or self.n_survivors >= MIN_SURVIVORS

    def within(self, target, k=3.0, slack=0.0) -> bool:
        return abs(self.value - target) <= k * self.std_error + slack


def _steps(t, dt):
    return int(round(t / dt))


def resolve_mode(model, x0, t, dt, mode="auto", seed=0):
    """Pick ``rejection`` when ``t <= 5 / |lambda0|``, else ``fv``.

    ``lambda0`` comes from the spectral solver in one dimension and from a
    small pilot rejection run otherwise.
    """
    if mode != "auto":
        return mode
    if model.dim == 1:
        from .spectral import solve

        lam0 = solve(model, n=1000).lambda0
    else:
        ens = Ensemble(model, x0, 2000, dt, seed=seed + 7919)
        horizon = min(t, 2.0)
        ens.run_to(horizon)
        frac = max(ens.n_alive, 1) / ens.n
        lam0 = math.log(frac) / horizon
    if lam0 == 0 or t <= 5.0 / abs(lam0):
        return "rejection"
    return "fv"


# -- estimators --------------------------------------------------------------


def conditioned_expectation(model, h, x0, t, dt=1e-3, n=1000, mode="rejection", seed=0,
                            threads=None) -> ConditionedEstimate:
    """Estimate ``E_x[(1/t) int_0^t h(X_s) ds | T > t]``."""
    mode = resolve_mode(model, x0, t, dt, mode, seed)
    ens = Ensemble(model, x0, n, dt, seed, mode, threads=threads)
    ens.add_observable("h", h)
    ens.run_to(t)
    return ens.estimate(ens.time_average("h"), t)


def estimate_lambda_mc(model, x0, v0=None, t=10.0, dt=1e-3, n=1000, mode="rejection", seed=0,
                       threads=None) -> ConditionedEstimate:
    """Conditioned mean of the finite-time exponent ``lambda_v(t)``."""
    mode = resolve_mode(model, x0, t, dt, mode, seed)
    ens = Ensemble(model, x0, n, dt, seed, mode, v0=v0, threads=threads)
    ens.run_to(t)
    return ens.estimate(ens.ftle(), t)


@dataclass
class BoundsResult:
    lower: ConditionedEstimate
    lam: ConditionedEstimate
    upper: ConditionedEstimate

    def sandwiched(self, k=3.0) -> bool:
        lo = self.lower.value - k * self.lower.std_error
        hi = self.upper.value + k * self.upper.std_error
        return lo <= self.lam.value <= hi


def bounds_check(model, x0, t=10.0, dt=1e-3, n=1000, mode="rejection", seed=0, v0=None,
                 threads=None) -> BoundsResult:
    """Bracket ``int lambda^- dm <= lambda <= int lambda^+ dm`` from one run.

    The extremal rates of the symmetrised Jacobian are time-averaged along the
    same paths that carry the tangent flow.
    """
    mode = resolve_mode(model, x0, t, dt, mode, seed)
    ens = Ensemble(model, x0, n, dt, seed, mode, v0=v0, threads=threads)
    ens.add_observable("lam_plus", lambda x: lambda_plus_minus(model, x)[0])
    ens.add_observable("lam_minus", lambda x: lambda_plus_minus(model, x)[1])
    ens.run_to(t)
    return BoundsResult(
        ens.estimate(ens.time_average("lam_minus"), t),
        ens.estimate(ens.ftle(), t),
        ens.estimate(ens.time_average("lam_plus"), t),
    )


@dataclass
class SurvivalFit:
    slope: float
    intercept: float
    residual: float
    slope_se: float
    times: np.ndarray
    survival: np.ndarray
    counts: np.ndarray
    n_total: int


def survival_rate_fit(model, x0, dt=1e-3, n=10000, t_grid=(2, 4, 6, 8), seed=0,
                      threads=None) -> SurvivalFit:
    """Least-squares slope of ``ln P_x(T > t)`` against ``t`` from rejection counts.

    Times with no survivors are dropped; fewer than four usable times is an
    error. ``slope_se`` propagates the multinomial covariance of the survival
    fractions, ``Cov(ln P_s, ln P_t) = (1 - P_s) / (n P_s)`` for ``s <= t``.
    """
    t_grid = np.sort(np.asarray(t_grid, dtype=float))
    ens = Ensemble(model, x0, n, dt, seed, "rejection", threads=threads)
    counts = []
    for t in t_grid:
        try:
            ens.run_to(t)
            counts.append(ens.n_alive)
        except StarvationError:
            counts.append(0)
            break
    counts = np.array(counts + [0] * (t_grid.size - len(counts)))
    use = counts > 0
    if use.sum() < 4:
        raise StarvationError(f"only {int(use.sum())} survival times with survivors; need 4")
    tt = t_grid[use]
    p = counts[use] / n
    y = np.log(p)
    a = np.vstack([tt, np.ones_like(tt)]).T
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    resid = y - a @ coef
    w = np.linalg.pinv(a)[0]
    cov = np.empty((tt.size, tt.size))
    for i in range(tt.size):
        for j in range(tt.size):
            s = min(i, j)
            cov[i, j] = (1 - p[s]) / (n * p[s])
    return SurvivalFit(float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(resid**2))),
                       float(np.sqrt(max(w @ cov @ w, 0.0))), t_grid, counts / n, counts, n)


# -- distributional probes ---------------------------------------------------


@dataclass
class HistogramResult:
    edges: np.ndarray
    mass: np.ndarray
    reference_mass: np.ndarray
    distance: float
    n_survivors: int
    n_total: int
    t: float
    mode: str
    extra: dict = field(default_factory=dict)


def _reference(model, reference):
    if reference is not None:
        return reference
    from .spectral import solve

    return solve(model)


def empirical_qsd(model, x0, t=8.0, dt=1e-3, n=10000, bins=64, mode="fv", seed=0,
                  reference=None, threads=None) -> HistogramResult:
    """Histogram of ``X_t`` given survival, and its total-variation distance to ``nu``."""
    if model.dim != 1:
        raise ValueError("empirical_qsd needs a one-dimensional model")
    ref = _reference(model, reference)
    mode = resolve_mode(model, x0, t, dt, mode, seed)
    ens = Ensemble(model, x0, n, dt, seed, mode, threads=threads)
    ens.run_to(t)
    pos = ens.x[ens.alive, 0]
    if pos.size == 0:
        raise StarvationError(f"no survivors at t={t:g}")
    edges = np.linspace(model.domain.a, model.domain.b, bins + 1)
    counts, _ = np.histogram(pos, edges)
    mass = counts / pos.size
    refm = ref.bin_masses(edges, "nu")
    tv = 0.5 * float(np.abs(mass - refm).sum())
    return HistogramResult(edges, mass, refm, tv, int(pos.size), n, t, mode,
                           {"counts": counts})


def empirical_qed(model, x0, t=10.0, dt=1e-3, n=10000, bins=64, mode="fv", seed=0,
                  reference=None, threads=None) -> HistogramResult:
    """Occupation histogram of surviving paths and its L1 distance to ``m``.

    Each survivor contributes the fraction of its steps spent in each bin.
    ``extra`` carries the L1 distance to ``nu``, the finite-time exponent
    estimate from the same run, and the same exponent re-aggregated from the
    occupation histograms against ``f'`` at bin centres.
    """
    if model.dim != 1:
        raise ValueError("empirical_qed needs a one-dimensional model")
    ref = _reference(model, reference)
    mode = resolve_mode(model, x0, t, dt, mode, seed)
    ens = Ensemble(model, x0, n, dt, seed, mode, threads=threads)
    edges = np.linspace(model.domain.a, model.domain.b, bins + 1)
    ens.add_occupation(edges)
    ens.run_to(t)
    occ = ens.records["_occupation"][ens.alive] / ens.k
    if occ.shape[0] == 0:
        raise StarvationError(f"no survivors at t={t:g}")
    mass = occ.mean(axis=0)
    ref_m = ref.bin_masses(edges, "m")
    ref_nu = ref.bin_masses(edges, "nu")
    centres = 0.5 * (edges[:-1] + edges[1:])
    lam_hist = ens.estimate(occ @ model.fprime(centres), t)
    return HistogramResult(
        edges, mass, ref_m, float(np.abs(mass - ref_m).sum()), int(occ.shape[0]), n, t, mode,
        {"l1_nu": float(np.abs(mass - ref_nu).sum()),
         "lambda": ens.estimate(ens.ftle(), t),
         "lambda_from_histogram": lam_hist},
    )


# -- time-dependence probes --------------------------------------------------


@dataclass
class CurveRow:
    t: float
    value: float
    lo: float
    hi: float
    n_survivors: int
    n_total: int
    extra: dict = field(default_factory=dict)


@dataclass
class Curve:
    rows: list
    reference: float
    truncated: bool = False
    mode: str = "rejection"

    @property
    def t(self):
        return np.array([r.t for r in self.rows])

    @property
    def values(self):
        return np.array([r.value for r in self.rows])


def convergence_probe(model, x0, v0=None, eps=0.2, t_grid=(2, 5, 10, 20), dt=1e-3, n=10000,
                      mode="fv", seed=0, lam=None, threads=None) -> Curve:
    """Conditional exceedance ``P(|lambda_v(t) - lambda| >= eps | T > t)`` per ``t``.

    ``lam`` defaults to the spectral value in one dimension and to the
    ensemble mean at the largest ``t`` otherwise. Rows carry Wilson 95%
    intervals and, in ``extra``, the conditional variance and mean squared
    deviation of ``lambda_v(t)``. The curve is truncated at the first
    horizon without survivors.
    """
    t_grid = sorted(float(t) for t in t_grid)
    mode = resolve_mode(model, x0, t_grid[-1], dt, mode, seed)
    ens = Ensemble(model, x0, n, dt, seed, mode, v0=v0, threads=threads)
    snaps = []
    truncated = False
    for t in t_grid:
        try:
            ens.run_to(t)
        except StarvationError:
            truncated = True
            break
        vals = ens.ftle()[ens.alive]
        if vals.size == 0:
            truncated = True
            break
        snaps.append((t, vals.copy()))
    if lam is None:
        if model.dim == 1:
            from .spectral import solve

            lam = solve(model).lam
        elif snaps:
            lam = float(snaps[-1][1].mean())
        else:
            raise StarvationError("no horizon had survivors")
    rows = []
    for t, vals in snaps:
        k = int(np.sum(np.abs(vals - lam) >= eps))
        lo, hi = wilson_interval(k, vals.size)
        var = float(vals.var(ddof=1)) if vals.size > 1 else 0.0
        rows.append(CurveRow(t, k / vals.size, lo, hi, int(vals.size), n,
                             {"variance": var, "mse": float(np.mean((vals - lam) ** 2)),
                              "mean": float(vals.mean())}))
    return Curve(rows, float(lam), truncated, mode)


def correlation_probe(model, x0, h1, h2, q=0.75, r=0.25, t_grid=(4, 10, 20), dt=1e-3, n=10000,
                      mode="fv", seed=0, reference=None, threads=None) -> Curve:
    """Conditional product moment ``E[h1(X_{qt}) h2(X_{rt}) | T > t]`` per ``t``.

    The reference ``int h1 dm * int h2 dm`` comes from the spectral solution
    in one dimension (NaN otherwise). Rows carry mean +- standard error as
    ``lo``/``hi`` and the standard error in ``extra``.
    """
    if not 0 < r < q < 1:
        raise ValueError("need 0 < r < q < 1")
    t_grid = sorted(float(t) for t in t_grid)
    mode = resolve_mode(model, x0, t_grid[-1], dt, mode, seed)
    ens = Ensemble(model, x0, n, dt, seed, mode, threads=threads)
    callbacks = {}
    for j, t in enumerate(t_grid):
        for frac, h, tag in ((r, h2, "h2"), (q, h1, "h1")):
            k = _steps(frac * t, dt)
            if k == 0:
                ens.mark(f"{tag}_{j}", h(ens.x))
                continue

            def cb(e, h=h, name=f"{tag}_{j}"):
                e.mark(name, h(e.x))

            callbacks.setdefault(k, []).append(cb)
    rows = []
    truncated = False
    for j, t in enumerate(t_grid):
        try:
            ens.run_to(t, callbacks)
            est = ens.estimate(ens.records[f"h1_{j}"] * ens.records[f"h2_{j}"], t)
        except StarvationError:
            truncated = True
            break
        rows.append(CurveRow(t, est.value, est.value - est.std_error, est.value + est.std_error,
                             est.n_survivors, n, {"std_error": est.std_error}))
    if reference is None:
        if model.dim == 1:
            ref = _reference(model, None)
            reference = ref.expect(lambda x: h1(x[:, None])) * ref.expect(lambda x: h2(x[:, None]))
        else:
            reference = float("nan")
    return Curve(rows, float(reference), truncated, mode)


@dataclass
class SpectrumProbe:
    sup: float
    inf: float
    mean: float
    n_survivors: int
    extra: dict = field(default_factory=dict)


def spectrum_probe(model, x0_grid, v_grid=None, t=10.0, dt=1e-3, n=1000, mode="rejection",
                   seed=0, threads=None) -> SpectrumProbe:
    """Extremes of ``lambda_v(t)`` over survivors from every ``(x0, v)`` start.

    A finite-time numerical probe of the dichotomy spectrum's endpoints, not
    a certified enclosure. In one dimension ``extra['fprime_max']`` and
    ``extra['fprime_min']`` are the extremes of the time-averaged ``f'``
    along the same paths.
    """
    d = model.dim
    x0_grid = [np.atleast_1d(np.asarray(p, dtype=float)) for p in x0_grid]
    if v_grid is None:
        v_grid = [np.eye(d)[i] for i in range(d)]
    v_grid = [np.atleast_1d(np.asarray(v, dtype=float)) for v in v_grid]
    vals, fvals = [], []
    run = 0
    for x0 in x0_grid:
        for v0 in v_grid:
            m = resolve_mode(model, x0, t, dt, mode, seed)
            ens = Ensemble(model, x0, n, dt, seed + 1009 * run, m, v0=v0, threads=threads)
            run += 1
            if d == 1:
                ens.add_observable("fprime", lambda x: model.fprime(x[:, 0]))
            try:
                ens.run_to(t)
            except StarvationError:
                continue
            vals.append(ens.ftle()[ens.alive])
            if d == 1:
                fvals.append(ens.time_average("fprime")[ens.alive])
    if not vals or sum(v.size for v in vals) == 0:
        raise StarvationError(f"no survivors at t={t:g} from any start")
    allv = np.concatenate(vals)
    extra = {}
    if fvals:
        allf = np.concatenate(fvals)
        extra = {"fprime_max": float(allf.max()), "fprime_min": float(allf.min())}
    return SpectrumProbe(float(allv.max()), float(allv.min()), float(allv.mean()), int(allv.size),
                         extra)


@dataclass
class SyncResult:
    """Common-noise pair statistics at horizon ``t``.

    ``raw_rates`` are ``(1/t) ln |x_t - y_t|`` and ``fraction`` is the share
    of surviving pairs with ``raw_rates <= threshold``. ``rates`` are the
    log-distance growth rates ``(1/t) ln(|x_t - y_t| / |x_0 - y_0|)`` and
    ``fraction_normalised`` the share of those below the threshold.
    """

    t: float
    rates: np.ndarray
    raw_rates: np.ndarray
    fraction: float
    fraction_normalised: float
    threshold: float
    n_surviving: int
    n_pairs: int
    first_death: np.ndarray


def sync_probe(model, x0, separation=1e-3, t=10.0, dt=1e-3, n_pairs=2000, seed=0, lam=None,
               eps=0.1, direction=None) -> SyncResult:
    """Synchronisation of surviving pairs started ``separation`` apart under common noise.

    Pairs start at ``x0`` and ``x0 + separation * direction``. The headline
    ``fraction`` counts pairs whose distance satisfies
    ``(1/t) ln |x_t - y_t| <= lam + eps``; the separation plays the role of
    the radius of the starting ball. Once two paths agree to rounding their
    distance stops shrinking, so normalised rates saturate near
    ``ln(1e-16 / separation) / t``.
    """
    d = model.dim
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    u = np.ones(d) / math.sqrt(d) if direction is None else np.asarray(direction, dtype=float)
    y0 = x0 + separation * u / np.linalg.norm(u)
    rec = run_pairs(model, x0, y0, dt, t, seed, n_pairs)
    rates = rec.rate[:, -1]
    ok = ~np.isnan(rates)
    if lam is None:
        if d == 1:
            from .spectral import solve

            lam = solve(model).lam
        else:
            lam = estimate_lambda_mc(model, x0, None, t, dt, n_pairs, "fv", seed).value
    r = rates[ok]
    raw = r + rec.log_dist0[ok] / t
    thr = lam + eps
    frac = float(np.mean(raw <= thr)) if r.size else float("nan")
    frac_n = float(np.mean(r <= thr)) if r.size else float("nan")
    return SyncResult(t, r, raw, frac, frac_n, thr, int(r.size), n_pairs, rec.first_death)
