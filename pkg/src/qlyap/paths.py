"""Euler-Maruyama paths with first-exit killing and a polar tangent flow.

Along a path the tangent direction ``s`` and log-radius ``logr`` obey

    ds = (Df s - <s, Df s> s) dt,    d logr = <s, Df s> dt,

integrated with explicit Euler on the pre-step position. The finite-time
Lyapunov exponent at time ``t`` is ``logr / t``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .models import SdeModel, project_exit
from .streams import BLOCK, BRIDGE, PathStreams, single_path_streams

__all__ = [
    "SimulationError",
    "PathState",
    "StepConfig",
    "PathResult",
    "PairRecord",
    "em_step",
    "polar_step",
    "run_path",
    "run_pair",
    "run_pairs",
    "tangent_rate",
    "euler_update",
    "write_trace_csv",
]


class SimulationError(RuntimeError):
    """A path left the finite numbers."""


# -- vectorised kernels (rows are paths) -------------------------------------


def tangent_rate(model: SdeModel, x, s):
    """``<s, Df(x) s>`` and ``Df(x) s`` for row-stacked ``x`` and ``s``."""
    jac = model.df(x)
    if model.dim == 1:
        js = jac[:, 0, :] * s
        return js[:, 0] * s[:, 0], js
    js = np.einsum("nij,nj->ni", jac, s)
    return np.einsum("ni,ni->n", s, js), js


def polar_update(model, x, s, dt):
    """Euler step of the direction ``s``; returns ``(s_new, rate)``.

    ``rate = <s, Df(x) s>`` at the pre-step point is the log-radius growth
    rate, left to the caller to accumulate.
    """
    rate, js = tangent_rate(model, x, s)
    if model.dim == 1:
        return s, rate
    s = s + (js - rate[:, None] * s) * dt
    s = s / np.linalg.norm(s, axis=1, keepdims=True)
    return s, rate


def euler_update(model, x, dW, dt, bridge_u=None):
    """One Euler-Maruyama step; returns ``(x_new, exited)``.

    Rows whose step segment leaves the domain are moved to the crossing
    point. With ``bridge_u`` (one uniform per row), rows that end inside are
    also killed with the probability that a Brownian bridge between the two
    endpoints touches the boundary; they are placed on the boundary point
    nearest to the step's end.
    """
    xn = x + model.f(x) * dt + model.sigma * dW
    inside = model.domain.contains(xn)
    exited = ~inside
    if exited.any():
        idx = np.flatnonzero(exited)
        xn[idx] = project_exit(model.domain, x[idx], xn[idx])
    if bridge_u is not None:
        var = model.sigma**2 * dt
        p = model.domain.bridge_exit_prob(x, xn, var)
        crossed = inside & (bridge_u < p)
        if crossed.any():
            idx = np.flatnonzero(crossed)
            xn[idx] = model.domain.nearest_boundary(xn[idx])
            exited |= crossed
    return xn, exited


def _check_finite(arr, path_ids):
    bad = ~np.all(np.isfinite(np.reshape(arr, (arr.shape[0], -1))), axis=1)
    if bad.any():
        pid = np.asarray(path_ids)[np.flatnonzero(bad)[0]]
        raise SimulationError(f"non-finite state on path {int(pid)}")


# -- single path -------------------------------------------------------------


@dataclass
class StepConfig:
    dt: float
    seed: int = 0
    path_id: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")


@dataclass
class PathState:
    """Position, tangent direction, log tangent growth and clock of one path."""

    x: np.ndarray
    s: np.ndarray
    logr: float = 0.0
    t: float = 0.0
    alive: bool = True
    kill_time: float | None = None
    path_id: int = 0

    @classmethod
    def start(cls, model, x0, v0=None, path_id=0):
        x0 = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
        if x0.shape != (model.dim,):
            raise ValueError(f"x0 must have shape ({model.dim},)")
        if not bool(model.domain.contains(x0)):
            raise ValueError(f"x0={x0.tolist()} is not inside the domain")
        if v0 is None:
            v0 = np.ones(model.dim)
        v0 = np.atleast_1d(np.asarray(v0, dtype=float))
        nv = np.linalg.norm(v0)
        if not nv > 0:
            raise ValueError("v0 must be non-zero")
        return cls(x0, v0 / nv, path_id=path_id)


def em_step(model: SdeModel, state: PathState, dW, dt: float, bridge_u=None) -> PathState:
    """Euler-Maruyama step with segment-exact killing.

    A killed state is returned unchanged; a step that leaves the domain ends
    on the boundary with ``alive=False`` and ``kill_time = t + dt``. Passing
    a uniform ``bridge_u`` adds the Brownian-bridge crossing test.
    """
    if not state.alive:
        return state
    x = state.x[None, :]
    dW = np.asarray(dW, dtype=float).reshape(1, model.dim)
    u = None if bridge_u is None else np.atleast_1d(float(bridge_u))
    xn, exited = euler_update(model, x, dW, dt, u)
    _check_finite(xn, [state.path_id])
    t = state.t + dt
    if exited[0]:
        return replace(state, x=xn[0], t=t, alive=False, kill_time=t)
    return replace(state, x=xn[0], t=t)


def polar_step(model: SdeModel, state: PathState, dt: float) -> PathState:
    """Advance ``(s, logr)`` by one explicit Euler step at the current ``x``."""
    if not state.alive:
        return state
    s, rate = polar_update(model, state.x[None, :], state.s[None, :], dt)
    return replace(state, s=s[0], logr=state.logr + float(rate[0]) * dt)


@dataclass
class PathResult:
    """Final state of a path plus its finite-time exponents at checkpoints.

    ``ftle`` only holds checkpoints reached while the path was alive.
    """

    state: PathState
    checkpoints: np.ndarray
    ftle: dict = field(default_factory=dict)
    trace: list | None = None


def _checkpoint_steps(checkpoints, dt, t_max):
    cps = np.atleast_1d(np.asarray(checkpoints, dtype=float))
    if np.any(cps <= 0) or np.any(cps > t_max * (1 + 1e-12)):
        raise ValueError("checkpoints must lie in (0, t_max]")
    return np.rint(cps / dt).astype(int)


def run_path(model: SdeModel, x0, v0=None, dt=1e-3, t_max=1.0, seed=0, path_id=0,
             checkpoints=None, trace=False, bridge=True) -> PathResult:
    """Simulate one killed path with its tangent flow.

    Noise increments (and bridge-test uniforms when ``bridge``) come from the
    ``(seed, path_id)`` streams and match those the ensemble engine hands to
    the same path id.
    """
    cfg = StepConfig(dt, seed, path_id)
    n_steps = int(round(t_max / dt))
    if checkpoints is None:
        checkpoints = [n_steps * dt]
    cp_steps = _checkpoint_steps(checkpoints, dt, t_max)
    wanted = {int(k): float(c) for k, c in zip(cp_steps, np.atleast_1d(checkpoints))}
    streams, block, row = single_path_streams(cfg.seed, model.dim, cfg.path_id)
    ustreams = single_path_streams(cfg.seed, 1, cfg.path_id, BRIDGE)[0] if bridge else None
    state = PathState.start(model, x0, v0, path_id)
    sq = np.sqrt(dt)
    rows = [] if trace else None
    if trace:
        rows.append(_trace_row(state))
    ftle = {}
    x = state.x[None, :].copy()
    s = state.s[None, :].copy()
    # sum of per-step rates; logr = dt * rate_sum and the FTLE is rate_sum / k
    rate_sum = 0.0
    alive = True
    kill_time = None
    k = 0
    for k in range(1, n_steps + 1):
        dW = streams.draw([block])[row:row + 1] * sq
        u = ustreams.draw([block])[row:row + 1, 0] if bridge else None
        s, rate = polar_update(model, x, s, dt)
        rate_sum += float(rate[0])
        x, exited = euler_update(model, x, dW, dt, u)
        _check_finite(x, [path_id])
        if exited[0]:
            alive = False
            kill_time = k * dt
        if trace:
            rows.append(_trace_row(PathState(x[0], s[0], rate_sum * dt, k * dt, alive, kill_time)))
        if not alive:
            break
        if k in wanted:
            ftle[wanted[k]] = rate_sum / k
    state = PathState(x[0].copy(), s[0].copy(), rate_sum * dt, k * dt, alive, kill_time, path_id)
    return PathResult(state, np.atleast_1d(np.asarray(checkpoints, dtype=float)), ftle, rows)


def _trace_row(state):
    return (state.t, *state.x.tolist(), *state.s.tolist(), state.logr,
            "alive" if state.alive else "killed")


def write_trace_csv(result: PathResult, path):
    """Write ``t, x_1..x_d, s_1..s_d, logr, status`` for a traced path."""
    if result.trace is None:
        raise ValueError("path was run without trace=True")
    d = result.state.x.size
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *[f"x_{i + 1}" for i in range(d)], *[f"s_{i + 1}" for i in range(d)],
                    "logr", "status"])
        for row in result.trace:
            w.writerow([repr(float(v)) if not isinstance(v, str) else v for v in row])


# -- pairs driven by common noise --------------------------------------------


@dataclass
class PairRecord:
    """Synchronisation data of ``n`` path pairs sharing their noise.

    ``rate[i, j]`` is ``(1/t_j) ln(|x_t - y_t| / |x_0 - y_0|)`` for pair ``i``
    at checkpoint ``t_j``, NaN once either member has been killed. The
    log-distance is accumulated along the pair as
    ``d ln|D| = <D, f(x) - f(y)> / |D|^2 dt`` with ``D = x - y`` (common
    additive noise cancels in ``D``), using the pre-step positions just like
    the tangent log-radius. ``direct_rate`` is the same quantity computed
    from the Euler positions themselves. Coinciding starts give ``-inf``.
    ``first_death`` is 0 (none), 1 (x died first or together) or 2 (y first).
    """

    times: np.ndarray
    rate: np.ndarray
    direct_rate: np.ndarray
    log_dist0: np.ndarray
    first_death: np.ndarray
    death_time: np.ndarray

    def both_alive(self, j=-1):
        return np.isfinite(self.rate[:, j]) | (self.rate[:, j] == -np.inf)


def run_pairs(model: SdeModel, x0, y0, dt, t_max, seed=0, n_pairs=1, checkpoints=None,
              path_offset=0, bridge=True) -> PairRecord:
    """Vectorised :func:`run_pair` over path ids ``path_offset .. path_offset + n_pairs - 1``."""
    n_steps = int(round(t_max / dt))
    if checkpoints is None:
        checkpoints = [n_steps * dt]
    cp_steps = _checkpoint_steps(checkpoints, dt, t_max)
    d = model.dim
    x = np.tile(np.atleast_1d(np.asarray(x0, dtype=float)), (n_pairs, 1))
    y = np.tile(np.atleast_1d(np.asarray(y0, dtype=float)), (n_pairs, 1))
    for p, nm in ((x, "x0"), (y, "y0")):
        if not np.all(model.domain.contains(p)):
            raise ValueError(f"{nm} is not inside the domain")
    streams = PathStreams(seed, d, path_offset + n_pairs, threads=None)
    ustreams = PathStreams(seed, 1, path_offset + n_pairs, BRIDGE, threads=None) if bridge else None
    lo = path_offset
    blocks = range(lo // BLOCK, streams.n_blocks)
    sq = np.sqrt(dt)
    dist0 = np.linalg.norm(x - y, axis=1)
    with np.errstate(divide="ignore"):
        log0 = np.log(dist0)
    coincide = dist0 == 0
    logd = np.zeros(n_pairs)
    alive = np.ones(n_pairs, dtype=bool)
    first = np.zeros(n_pairs, dtype=int)
    death = np.full(n_pairs, np.nan)
    rate = np.full((n_pairs, len(cp_steps)), np.nan)
    direct = np.full((n_pairs, len(cp_steps)), np.nan)
    cp_index = {int(k): j for j, k in enumerate(cp_steps)}
    for k in range(1, n_steps + 1):
        noise = streams.draw(blocks)[lo:lo + n_pairs] * sq
        u = ustreams.draw(blocks)[lo:lo + n_pairs, 0] if bridge else None
        live = np.flatnonzero(alive)
        if live.size == 0:
            break
        xa, ya = x[live], y[live]
        diff = xa - ya
        nd2 = np.sum(diff * diff, axis=1)
        fdiff = model.f(xa) - model.f(ya)
        with np.errstate(divide="ignore", invalid="ignore"):
            inc = np.where(nd2 > 0, np.sum(diff * fdiff, axis=1) / nd2, 0.0)
        logd[live] += inc
        ul = None if u is None else u[live]
        xn, ex = euler_update(model, xa, noise[live], dt, ul)
        yn, ey = euler_update(model, ya, noise[live], dt, ul)
        _check_finite(xn, live + lo)
        _check_finite(yn, live + lo)
        x[live], y[live] = xn, yn
        dead = ex | ey
        if dead.any():
            di = live[dead]
            alive[di] = False
            first[di] = np.where(ex[dead], 1, 2)
            death[di] = k * dt
        j = cp_index.get(k)
        if j is not None:
            t = k * dt
            ok = np.flatnonzero(alive)
            rate[ok, j] = np.where(coincide[ok], -np.inf, logd[ok] / k)
            with np.errstate(divide="ignore", invalid="ignore"):
                dd = np.linalg.norm(x[ok] - y[ok], axis=1)
                direct[ok, j] = np.where(coincide[ok], -np.inf, (np.log(dd) - log0[ok]) / t)
    return PairRecord(np.atleast_1d(np.asarray(checkpoints, dtype=float)), rate, direct,
                      log0, first, death)


def run_pair(model: SdeModel, x0, y0, dt, t_max, seed=0, path_id=0, checkpoints=None,
             bridge=True):
    """Two paths from ``x0`` and ``y0`` driven by the same noise (path ``path_id``)."""
    return run_pairs(model, x0, y0, dt, t_max, seed, 1, checkpoints, path_offset=path_id,
                     bridge=bridge)
