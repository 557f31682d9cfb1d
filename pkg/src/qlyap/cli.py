"""Command-line frontend: ``qlyap spectral|sweep|estimate|probe``.

Settings come from built-in defaults, then an optional ``--config`` file of
``key=value`` lines, then command-line flags (highest priority). Every CSV
starts with ``#`` lines echoing the full configuration and the version.

Exit codes: 0 ok, 2 usage, 3 solver failure, 4 partial sweep failure,
5 starvation (no survivors).
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from . import __version__
from . import conditioned as cm
from .models import ZOO, Ball, Box, Interval, ModelError, lambda_plus_minus, make_model
from .spectral import SolverError, identity_check, solve, write_solution_csv
from .streams import thread_count
from .svg import line_plot

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_SWEEP, EXIT_STARVED = 0, 2, 3, 4, 5

PROBES = ("survival", "qsd", "qed", "convergence", "correlation", "sync", "bounds", "spectrum")
ESTIMATES = ("lambda", "expectation")
MODEL_PARAMS = sorted({k for e in ZOO.values() for k in e.defaults})


class UsageError(ValueError):
    pass


def version_string():
    return f"v{__version__}"


# -- configuration -----------------------------------------------------------


@dataclass
class RunConfig:
    """Flat run configuration; ``params`` holds the zoo model parameters."""

    model: str = "pitchfork"
    sigma: float = 1.0
    domain: str = ""
    params: dict = field(default_factory=dict)
    n: int = 4000
    dt: float = 1e-3
    t: float = 10.0
    N: int = 10000
    seed: int = 0
    mode: str = "auto"
    out: str = ""
    svg: str = ""
    check_spectral: bool = False
    x0: str = ""
    v0: str = ""
    t_grid: str = ""
    eps: float = 0.2
    bins: int = 64
    q: float = 0.75
    r: float = 0.25
    h: str = "x"
    h1: str = "x"
    h2: str = "x"
    separation: float = 1e-3
    sweep: str = ""
    values: str = ""
    tol: float = -1.0

    _ints = ("n", "N", "seed", "bins")
    _floats = ("sigma", "dt", "t", "eps", "q", "r", "separation", "tol")

    def validate(self):
        if self.model not in ZOO:
            raise UsageError(f"unknown model {self.model!r}; choose from {sorted(ZOO)}")
        for name in ("sigma", "dt", "t", "eps", "separation"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise UsageError(f"{name} must be positive, got {v}")
        for name in ("n", "N", "bins"):
            if getattr(self, name) < 1:
                raise UsageError(f"{name} must be positive")
        if self.mode not in ("auto",) + cm.MODES:
            raise UsageError(f"mode must be auto, rejection or fv, got {self.mode!r}")
        unknown = set(self.params) - set(ZOO[self.model].defaults)
        if unknown:
            raise UsageError(f"model {self.model!r} has no parameters {sorted(unknown)}")
        return self

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            if f.name == "params":
                continue
            v = getattr(self, f.name)
            lines.append(f"{f.name}={_fmt_value(v)}")
        for k in sorted(self.params):
            lines.append(f"{k}={_fmt_value(self.params[k])}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_items(cls, items: dict) -> "RunConfig":
        cfg = cls()
        for key, raw in items.items():
            cfg.set(key, raw)
        return cfg

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        return cls.from_items(parse_kv(text))

    def set(self, key, raw):
        key = key.replace("-", "_")
        if key in MODEL_PARAMS:
            self.params[key] = _to_float(key, raw)
        elif key in self._ints:
            try:
                setattr(self, key, int(raw))
            except ValueError:
                raise UsageError(f"{key} must be an integer, got {raw!r}") from None
        elif key in self._floats:
            setattr(self, key, _to_float(key, raw))
        elif key == "check_spectral":
            setattr(self, key, _to_bool(raw))
        elif key in {f.name for f in fields(self)} and key != "params":
            setattr(self, key, str(raw))
        else:
            raise UsageError(f"unknown configuration key {key!r}")

    def build_model(self):
        try:
            return make_model(self.model, self.sigma, parse_domain(self.domain, ZOO[self.model].dim),
                              **self.params)
        except ModelError as exc:
            raise UsageError(str(exc)) from None


def _fmt_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _to_float(key, raw):
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise UsageError(f"{key} must be a number, got {raw!r}") from None


def _to_bool(raw):
    if isinstance(raw, bool):
        return raw
    s = str(raw).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off", ""):
        return False
    raise UsageError(f"expected a boolean, got {raw!r}")


def parse_kv(text: str) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment line."""
    items = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key=value, got {line!r}")
        k, v = line.split("=", 1)
        items[k.strip()] = v.strip()
    return items


def parse_domain(text: str, dim: int):
    """``a:b`` (interval, or the box ``[a, b]^d``), ``ball:R``, or empty for the default."""
    if not text:
        return None
    try:
        if text.startswith("ball:"):
            return Ball(np.zeros(dim), float(text[5:]))
        a, b = (float(v) for v in text.split(":"))
    except ValueError:
        raise UsageError(f"cannot parse domain {text!r}; use a:b or ball:R") from None
    try:
        if dim == 1:
            return Interval(a, b)
        return Box(np.full(dim, a), np.full(dim, b))
    except ModelError as exc:
        raise UsageError(str(exc)) from None


def parse_vector(text: str, dim: int, name: str):
    try:
        v = np.array([float(s) for s in text.split(",")])
    except ValueError:
        raise UsageError(f"cannot parse {name}={text!r}") from None
    if v.size == 1 and dim > 1:
        v = np.full(dim, v[0])
    if v.size != dim:
        raise UsageError(f"{name} needs {dim} components, got {v.size}")
    return v


def parse_values(text: str):
    """Sweep values from ``v1,v2,...`` or ``lo:hi:step`` (inclusive); sorted."""
    try:
        if ":" in text:
            lo, hi, step = (float(s) for s in text.split(":"))
        else:
            vals = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"cannot parse sweep values {text!r}") from None
    if ":" in text:
        if not step > 0 or not hi > lo:
            raise UsageError("range needs lo < hi and step > 0")
        k = int(math.floor((hi - lo) / step + 1e-9))
        # rounding keeps 0.68 from printing as 0.6799999999999999
        vals = [round(lo + i * step, 12) for i in range(k + 1)]
    vals = sorted(vals)
    if len(vals) < 2:
        raise UsageError("a sweep needs at least two values")
    if not all(math.isfinite(v) for v in vals):
        raise UsageError("sweep values must be finite")
    if any(b == a for a, b in zip(vals, vals[1:])):
        raise UsageError("sweep values must be distinct")
    return vals


def parse_times(text: str, default):
    if not text:
        return list(default)
    try:
        return sorted(float(s) for s in text.split(","))
    except ValueError:
        raise UsageError(f"cannot parse t_grid {text!r}") from None


# observables by name; they take (m, d) arrays
def observable(name, model):
    if name == "one":
        return lambda x: np.ones(x.shape[0])
    if name == "x":
        return lambda x: x[:, 0]
    if name == "x2":
        return lambda x: np.sum(x * x, axis=1)
    if name == "fprime":
        if model.dim != 1:
            raise UsageError("observable fprime needs a one-dimensional model")
        return lambda x: model.fprime(x[:, 0])
    if name == "lambda_plus":
        return lambda x: np.atleast_1d(lambda_plus_minus(model, x)[0])
    if name == "lambda_minus":
        return lambda x: np.atleast_1d(lambda_plus_minus(model, x)[1])
    raise UsageError(f"unknown observable {name!r}; use one, x, x2, fprime, lambda_plus, lambda_minus")


# -- output helpers ----------------------------------------------------------


def header_lines(cfg: RunConfig, command: str):
    lines = [f"qlyap {version_string()} command={command}"]
    lines += [f"config {line}" for line in cfg.to_text().splitlines()]
    return lines


def write_csv(path, cfg, command, columns, rows):
    with open(path, "w", newline="") as fh:
        for line in header_lines(cfg, command):
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _verdict(ok):
    return "PASS" if ok else "FAIL"


# -- commands ----------------------------------------------------------------


def cmd_spectral(cfg: RunConfig):
    model = cfg.build_model()
    if model.dim != 1:
        raise UsageError("spectral needs a one-dimensional model")
    sol = solve(model, n=cfg.n)
    ident = identity_check(model, sol)
    if cfg.out:
        write_solution_csv(sol, cfg.out, header_lines(cfg, "spectral"))
    print(f"lambda0={sol.lambda0!r} lambda={sol.lam!r} identity_dev={ident.max_deviation!r}")
    return EXIT_OK


def _sweep_point(args):
    name, sigma, domain, params, n = args
    dim = ZOO[name].dim
    model = make_model(name, sigma, parse_domain(domain, dim), **params)
    sol = solve(model, n=n)
    return sol.lambda0, sol.lam


def _run_points(tasks):
    workers = min(thread_count(), len(tasks))
    out = []
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            futures = [pool.submit(_sweep_point, t) for t in tasks]
            for fut in futures:
                try:
                    out.append(fut.result())
                except Exception as exc:  # flagged row, sweep continues
                    out.append(exc)
        return out
    for t in tasks:
        try:
            out.append(_sweep_point(t))
        except Exception as exc:
            out.append(exc)
    return out


def sign_changes(values, lams):
    """Indices ``i`` with ``lams[i]`` and ``lams[i+1]`` of strictly opposite sign."""
    idx = []
    for i in range(len(values) - 1):
        a, b = lams[i], lams[i + 1]
        if math.isfinite(a) and math.isfinite(b) and a * b < 0:
            idx.append(i)
    return idx


def bisect_sign_change(fn, lo, hi, flo, tol=1e-3):
    """Shrink ``[lo, hi]`` around a sign change of ``fn`` to width ``<= tol``."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if fm == 0:
            return mid, mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return lo, hi


def cmd_sweep(cfg: RunConfig):
    if not cfg.sweep:
        raise UsageError("sweep needs --param NAME")
    if not cfg.values:
        raise UsageError("sweep needs --values v1,v2,... or lo:hi:step")
    entry = ZOO.get(cfg.model)
    if entry is None or entry.dim != 1:
        raise UsageError("sweep needs a one-dimensional zoo model")
    pname = cfg.sweep
    if pname not in entry.defaults and pname != "sigma":
        raise UsageError(f"model {cfg.model!r} has no parameter {pname!r}")
    values = parse_values(cfg.values)
    cfg.validate()

    def task(v):
        params = dict(cfg.params)
        sigma = cfg.sigma
        if pname == "sigma":
            sigma = v
        else:
            params[pname] = v
        return (cfg.model, sigma, cfg.domain, params, cfg.n)

    results = _run_points([task(v) for v in values])
    rows, lams, failed = [], [], 0
    for v, res in zip(values, results):
        if isinstance(res, Exception):
            failed += 1
            rows.append((v, float("nan"), float("nan"), f"failed: {type(res).__name__}"))
            lams.append(float("nan"))
        else:
            rows.append((v, res[0], res[1], "ok"))
            lams.append(res[1])
    crossings = []
    for i in sign_changes(values, lams):
        try:
            lo, hi = bisect_sign_change(lambda p: _sweep_point(task(p))[1], values[i],
                                        values[i + 1], lams[i])
        except Exception:  # solver failure inside the bracket
            lo, hi = values[i], values[i + 1]
        crossings.append((lo, hi))
    if cfg.out:
        meta = [f"sign_change=[{lo!r}, {hi!r}]" for lo, hi in crossings]
        with open(cfg.out, "w", newline="") as fh:
            for line in header_lines(cfg, "sweep") + meta:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([pname, "lambda0", "lambda", "status"])
            for row in rows:
                w.writerow([_cell(v) for v in row])
    if cfg.svg:
        line_plot(cfg.svg, [(values, lams, f"lambda({pname})")], xlabel=pname, ylabel="lambda",
                  title=f"{cfg.model}: conditioned Lyapunov exponent")
    for v, l0, lam, status in rows:
        print(f"{pname}={v!r} lambda0={l0!r} lambda={lam!r} {status}")
    if crossings:
        for lo, hi in crossings:
            print(f"sign_change {pname}={0.5 * (lo + hi):.6f} bracket=[{lo:.6f}, {hi:.6f}]")
    else:
        print("sign_change none")
    return EXIT_SWEEP if failed else EXIT_OK


def _start(cfg, model):
    if cfg.x0:
        x0 = parse_vector(cfg.x0, model.dim, "x0")
    else:
        lo, hi = model.domain.bounds
        x0 = 0.5 * (lo + hi)
    if not bool(model.domain.contains(x0)):
        raise UsageError(f"x0={x0.tolist()} is not inside the domain")
    v0 = parse_vector(cfg.v0, model.dim, "v0") if cfg.v0 else None
    return x0, v0


def _tol(cfg, default):
    return default if cfg.tol < 0 else cfg.tol


def _estimate_row(est):
    return (est.t, est.value, est.std_error, est.n_survivors, est.n_total)


EST_COLUMNS = ["t", "estimate", "std_error", "n_survivors", "n_total"]


def cmd_estimate(cfg: RunConfig, what: str):
    model = cfg.build_model()
    x0, v0 = _start(cfg, model)
    if what == "lambda":
        est = cm.estimate_lambda_mc(model, x0, v0, cfg.t, cfg.dt, cfg.N, cfg.mode, cfg.seed)
    else:
        est = cm.conditioned_expectation(model, observable(cfg.h, model), x0, cfg.t, cfg.dt,
                                         cfg.N, cfg.mode, cfg.seed)
    if cfg.out:
        write_csv(cfg.out, cfg, f"estimate {what}", EST_COLUMNS, [_estimate_row(est)])
    line = (f"estimate {what}={est.value!r} std_error={est.std_error!r} "
            f"n_survivors={est.n_survivors} n_total={est.n_total} mode={est.mode}")
    if not est.valid:
        line += " flagged=too_few_survivors"
    if cfg.check_spectral:
        if model.dim != 1:
            raise UsageError("--check-spectral needs a one-dimensional model")
        sol = solve(model, n=cfg.n)
        ref = sol.lam if what == "lambda" else sol.expect(lambda x: observable(cfg.h, model)(x[:, None]))
        slack = _tol(cfg, 0.01)
        ok = est.within(ref, 3.0, slack)
        line += (f" spectral={ref!r} diff={est.value - ref!r} "
                 f"budget={3 * est.std_error + slack!r} {_verdict(ok)}")
    print(line)
    return EXIT_OK


def cmd_probe(cfg: RunConfig, kind: str):
    model = cfg.build_model()
    x0, v0 = _start(cfg, model)
    fn = _PROBES[kind]
    return fn(cfg, model, x0, v0)


def _probe_survival(cfg, model, x0, v0):
    times = parse_times(cfg.t_grid, (2, 4, 6, 8))
    fit = cm.survival_rate_fit(model, x0, cfg.dt, cfg.N, times, cfg.seed)
    rows = []
    for t, p, k in zip(fit.times, fit.survival, fit.counts):
        se = math.sqrt(p * (1 - p) / fit.n_total)
        rows.append((t, p, se, int(k), fit.n_total))
    if cfg.out:
        write_csv(cfg.out, cfg, "probe survival", EST_COLUMNS, rows)
    line = f"probe survival slope={fit.slope!r} slope_se={fit.slope_se!r} residual={fit.residual!r}"
    if model.dim == 1:
        lam0 = solve(model, n=cfg.n).lambda0
        rel = abs(fit.slope / lam0 - 1)
        line += f" lambda0={lam0!r} rel_dev={rel!r} {_verdict(rel <= _tol(cfg, 0.05))}"
    print(line)
    return EXIT_OK


def _hist_probe(cfg, model, x0, kind):
    if model.dim != 1:
        raise UsageError(f"probe {kind} needs a one-dimensional model")
    mode = "fv" if cfg.mode == "auto" else cfg.mode
    ref = solve(model, n=cfg.n)
    fn = cm.empirical_qsd if kind == "qsd" else cm.empirical_qed
    res = fn(model, x0, cfg.t, cfg.dt, cfg.N, cfg.bins, mode, cfg.seed, ref)
    if cfg.out:
        rows = zip(res.edges[:-1], res.edges[1:], res.mass, res.reference_mass)
        write_csv(cfg.out, cfg, f"probe {kind}", ["bin_lo", "bin_hi", "mass", "reference_mass"],
                  rows)
    if cfg.svg:
        centres = 0.5 * (res.edges[:-1] + res.edges[1:])
        width = np.diff(res.edges)
        line_plot(cfg.svg, [(centres, res.mass / width, "empirical"),
                            (centres, res.reference_mass / width, "spectral")],
                  xlabel="x", ylabel="density", title=f"{kind} histogram", zero_line=False)
    return res


def _probe_qsd(cfg, model, x0, v0):
    res = _hist_probe(cfg, model, x0, "qsd")
    tol = _tol(cfg, 0.03)
    print(f"probe qsd tv={res.distance!r} n_survivors={res.n_survivors} n_total={res.n_total} "
          f"mode={res.mode} {_verdict(res.distance <= tol)}")
    return EXIT_OK


def _probe_qed(cfg, model, x0, v0):
    res = _hist_probe(cfg, model, x0, "qed")
    tol = _tol(cfg, 0.05)
    print(f"probe qed l1={res.distance!r} l1_nu={res.extra['l1_nu']!r} "
          f"n_survivors={res.n_survivors} n_total={res.n_total} mode={res.mode} "
          f"{_verdict(res.distance <= tol)}")
    return EXIT_OK


def _probe_convergence(cfg, model, x0, v0):
    times = parse_times(cfg.t_grid, (2, 5, 10, 20))
    mode = "fv" if cfg.mode == "auto" else cfg.mode
    curve = cm.convergence_probe(model, x0, v0, cfg.eps, times, cfg.dt, cfg.N, mode, cfg.seed)
    rows = []
    for r in curve.rows:
        se = math.sqrt(r.value * (1 - r.value) / r.n_survivors)
        rows.append((r.t, r.value, se, r.n_survivors, r.n_total, r.lo, r.hi))
    if cfg.out:
        write_csv(cfg.out, cfg, "probe convergence", EST_COLUMNS + ["wilson_lo", "wilson_hi"], rows)
    ok = len(curve.rows) >= 2 and curve.rows[-1].hi < curve.rows[0].lo
    ok = ok or all(r.value == 0 for r in curve.rows)
    flag = " truncated" if curve.truncated else ""
    print(f"probe convergence lambda={curve.reference!r} "
          + " ".join(f"t={r.t:g}:{r.value:.4f}[{r.lo:.4f},{r.hi:.4f}]" for r in curve.rows)
          + f"{flag} {_verdict(ok)}")
    return EXIT_OK


def _probe_correlation(cfg, model, x0, v0):
    times = parse_times(cfg.t_grid, (4, 10, 20))
    mode = "fv" if cfg.mode == "auto" else cfg.mode
    curve = cm.correlation_probe(model, x0, observable(cfg.h1, model), observable(cfg.h2, model),
                                 cfg.q, cfg.r, times, cfg.dt, cfg.N, mode, cfg.seed)
    rows = [(r.t, r.value, r.extra["std_error"], r.n_survivors, r.n_total) for r in curve.rows]
    if cfg.out:
        write_csv(cfg.out, cfg, "probe correlation", EST_COLUMNS, rows)
    line = f"probe correlation reference={curve.reference!r}"
    if curve.rows:
        last = curve.rows[-1]
        se = last.extra["std_error"]
        ok = abs(last.value - curve.reference) <= 3 * se + max(_tol(cfg, 0.0), 0.0)
        line += f" t={last.t:g} value={last.value!r} std_error={se!r} {_verdict(ok)}"
    print(line)
    return EXIT_OK


def _probe_sync(cfg, model, x0, v0):
    res = cm.sync_probe(model, x0, cfg.separation, cfg.t, cfg.dt, cfg.N, cfg.seed, eps=0.1,
                        direction=v0)
    se = math.sqrt(res.fraction * (1 - res.fraction) / max(res.n_surviving, 1))
    if cfg.out:
        write_csv(cfg.out, cfg, "probe sync", EST_COLUMNS,
                  [(res.t, res.fraction, se, res.n_surviving, res.n_pairs)])
    ok = res.fraction >= 1 - _tol(cfg, 0.2)
    if res.rates.size:
        lo, med, hi = (float(v) for v in np.quantile(res.rates, [0, 0.5, 1]))
    else:
        lo = med = hi = float("nan")
    print(f"probe sync fraction={res.fraction!r} fraction_normalised={res.fraction_normalised!r} "
          f"threshold={res.threshold!r} rate_min={lo!r} rate_median={med!r} rate_max={hi!r} "
          f"n_surviving={res.n_surviving} n_pairs={res.n_pairs} {_verdict(ok)}")
    return EXIT_OK


def _probe_bounds(cfg, model, x0, v0):
    res = cm.bounds_check(model, x0, cfg.t, cfg.dt, cfg.N, cfg.mode, cfg.seed, v0)
    rows = [(name,) + _estimate_row(e) for name, e in
            (("lower", res.lower), ("lambda", res.lam), ("upper", res.upper))]
    if cfg.out:
        write_csv(cfg.out, cfg, "probe bounds", ["quantity"] + EST_COLUMNS, rows)
    print(f"probe bounds lower={res.lower.value!r} lambda={res.lam.value!r} "
          f"upper={res.upper.value!r} {_verdict(res.sandwiched())}")
    return EXIT_OK


def _probe_spectrum(cfg, model, x0, v0):
    res = cm.spectrum_probe(model, [x0], None if v0 is None else [v0], cfg.t, cfg.dt, cfg.N,
                            cfg.mode, cfg.seed)
    rows = [(q, cfg.t, v, 0.0, res.n_survivors, cfg.N * (1 if model.dim == 1 else model.dim))
            for q, v in (("sup", res.sup), ("inf", res.inf), ("mean", res.mean))]
    if cfg.out:
        write_csv(cfg.out, cfg, "probe spectrum", ["quantity"] + EST_COLUMNS, rows)
    ok = res.inf <= res.mean <= res.sup
    print(f"probe spectrum sup={res.sup!r} inf={res.inf!r} mean={res.mean!r} "
          f"n_survivors={res.n_survivors} {_verdict(ok)}")
    return EXIT_OK


_PROBES = {
    "survival": _probe_survival,
    "qsd": _probe_qsd,
    "qed": _probe_qed,
    "convergence": _probe_convergence,
    "correlation": _probe_correlation,
    "sync": _probe_sync,
    "bounds": _probe_bounds,
    "spectrum": _probe_spectrum,
}


# -- argument parsing --------------------------------------------------------


def _common(p):
    g = p.add_argument_group("run configuration")
    g.add_argument("--config", help="key=value file; flags override it")
    g.add_argument("--model", choices=sorted(ZOO))
    g.add_argument("--sigma", type=float)
    g.add_argument("--domain", help="a:b (interval or box [a,b]^d) or ball:R")
    g.add_argument("--n", type=int, help="spectral grid size")
    g.add_argument("--dt", type=float)
    g.add_argument("--t", type=float, help="horizon")
    g.add_argument("--N", type=int, help="paths, particles or pairs")
    g.add_argument("--seed", type=int)
    g.add_argument("--mode", choices=("auto",) + cm.MODES)
    g.add_argument("--out", help="CSV output path")
    g.add_argument("--svg", help="SVG plot path")
    g.add_argument("--check-spectral", action="store_true", default=None)
    g.add_argument("--x0", help="start point, comma separated")
    g.add_argument("--v0", help="tangent direction, comma separated")
    g.add_argument("--t-grid", dest="t_grid", help="comma separated horizons")
    g.add_argument("--eps", type=float)
    g.add_argument("--bins", type=int)
    g.add_argument("--q", type=float)
    g.add_argument("--r", type=float)
    g.add_argument("--h", help="observable: one, x, x2, fprime, lambda_plus, lambda_minus")
    g.add_argument("--h1")
    g.add_argument("--h2")
    g.add_argument("--separation", type=float)
    g.add_argument("--tol", type=float, help="pass/fail tolerance override")
    m = p.add_argument_group("model parameters")
    for name in MODEL_PARAMS:
        m.add_argument(f"--{name}", type=float)


def build_parser():
    parser = argparse.ArgumentParser(prog="qlyap", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qlyap {version_string()}")
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("spectral", help="1-d spectral solve"))
    sw = sub.add_parser("sweep", help="spectral parameter sweep")
    _common(sw)
    sw.add_argument("--param", dest="sweep", help="parameter to sweep")
    sw.add_argument("--values", help="v1,v2,... or lo:hi:step")
    est = sub.add_parser("estimate", help="Monte Carlo conditioned estimate")
    est.add_argument("what", choices=ESTIMATES)
    _common(est)
    pr = sub.add_parser("probe", help="statistical probes")
    pr.add_argument("kind", choices=PROBES)
    _common(pr)
    return parser


_NOT_CONFIG = {"command", "config", "what", "kind"}


def config_from_args(args) -> RunConfig:
    items = {}
    if args.config:
        try:
            with open(args.config) as fh:
                items.update(parse_kv(fh.read()))
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
    for key, v in vars(args).items():
        if key in _NOT_CONFIG or v is None:
            continue
        items[key] = v
    return RunConfig.from_items(items).validate()


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = config_from_args(args)
        if args.command == "spectral":
            return cmd_spectral(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        if args.command == "estimate":
            return cmd_estimate(cfg, args.what)
        return cmd_probe(cfg, args.kind)
    except (UsageError, ModelError) as exc:
        print(f"qlyap: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"qlyap: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except cm.StarvationError as exc:
        print(f"qlyap: starvation: {exc}; try --mode fv or a shorter --t", file=sys.stderr)
        return EXIT_STARVED


if __name__ == "__main__":
    sys.exit(main())
