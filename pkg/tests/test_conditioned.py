import math

import numpy as np
import pytest

from qlyap.conditioned import (
    ConditionedEstimate,
    Ensemble,
    StarvationError,
    bounds_check,
    conditioned_expectation,
    convergence_probe,
    correlation_probe,
    empirical_qed,
    empirical_qsd,
    estimate_lambda_mc,
    resolve_mode,
    spectrum_probe,
    survival_rate_fit,
    sync_probe,
    wilson_interval,
)
from qlyap.models import Interval, make_model
from qlyap.spectral import solve

from oracles import brownian_survival, coupled_ftle_levels, finite_time_average


def x_obs(x):
    return x[:, 0]


def one(x):
    return np.ones(x.shape[0])


# -- ensemble mechanics


def test_ensemble_validation(pitchfork):
    with pytest.raises(ValueError):
        Ensemble(pitchfork, [0.0], 10, 1e-3, mode="other")
    with pytest.raises(ValueError):
        Ensemble(pitchfork, [5.0], 10, 1e-3)
    with pytest.raises(ValueError):
        Ensemble(pitchfork, [0.0], 10, 0.0)
    with pytest.raises(ValueError):
        Ensemble(pitchfork, [0.0], 10, 1e-3, v0=[0.0])


def test_fv_invariants_every_step(pitchfork):
    ens = Ensemble(pitchfork, [0.0], 500, 1e-2, seed=1, mode="fv")
    hits = 0
    for _ in range(300):
        before = ens.kill_count
        x_prev = ens.x.copy()
        ens.step()
        assert ens.x.shape == (500, 1)
        assert np.all(pitchfork.domain.contains(ens.x))
        assert ens.alive.all()
        hits += ens.kill_count - before
        del x_prev
    assert hits == ens.kill_count > 0


def test_fv_kill_count_matches_boundary_hits():
    # count exits independently with a parallel rejection ensemble on the same streams
    m = make_model("pitchfork", alpha=1.0, c=0.5)
    fv = Ensemble(m, [0.0], 64, 1e-2, seed=2, mode="fv")
    fv.step()
    rj = Ensemble(m, [0.0], 64, 1e-2, seed=2, mode="rejection")
    rj.step()
    assert fv.kill_count == int((~rj.alive).sum())


def test_fv_copies_full_history(pitchfork):
    ens = Ensemble(pitchfork, [0.0], 200, 1e-2, seed=3, mode="fv")
    ens.add_observable("h", x_obs)
    ens.run_to(0.5)
    ens.records["h"][:] = np.arange(200)
    ens.rate_sum[:] = np.arange(200) * 10.0
    dying = np.array([0, 5])
    ens._resample(dying)
    donors = ens.records["h"][dying].astype(int)
    assert not np.any(np.isin(donors, dying))
    np.testing.assert_array_equal(ens.rate_sum[dying], donors * 10.0)
    np.testing.assert_array_equal(ens.x[dying], ens.x[donors])


def test_rejection_excludes_killed():
    m = make_model("brownian", domain=Interval(0.0, 1.0))
    ens = Ensemble(m, [0.5], 2000, 1e-3, seed=0, mode="rejection")
    ens.add_observable("h", x_obs)
    ens.run_to(0.3)
    assert 0 < ens.n_alive < 2000
    vals = np.where(ens.alive, 1.0, 1e9)
    est = ens.estimate(vals)
    assert est.value == 1.0 and est.n_survivors == ens.n_alive
    assert np.all(m.domain.distance(ens.x[~ens.alive]) == 0)


def test_rejection_starvation():
    m = make_model("brownian", domain=Interval(0.0, 0.05))
    with pytest.raises(StarvationError, match="fv"):
        conditioned_expectation(m, one, [0.025], t=2.0, dt=1e-3, n=100, mode="rejection")


def test_estimate_flags_few_survivors():
    est = ConditionedEstimate(1.0, 0.1, 12, 1000, 1.0, "rejection")
    assert not est.valid
    assert ConditionedEstimate(1.0, 0.1, 12, 1000, 1.0, "fv").valid


@pytest.mark.parametrize("mode", ["rejection", "fv"])
def test_constant_observable(pitchfork, mode):
    est = conditioned_expectation(pitchfork, one, [0.0], t=1.0, dt=1e-2, n=300, mode=mode)
    assert est.value == 1.0 and est.std_error == 0.0


@pytest.mark.parametrize("kappa", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("mode", ["rejection", "fv"])
def test_ou_lambda_exact(kappa, mode):
    m = make_model("ou", kappa=kappa, c=1.0)
    est = estimate_lambda_mc(m, [0.0], None, 1.0, 1e-2, 300, mode)
    assert est.value == -kappa and est.std_error == 0.0


def test_nonnegative_observable(pitchfork):
    est = conditioned_expectation(pitchfork, lambda x: x[:, 0] ** 2, [0.0], 1.0, 1e-2, 300, "fv")
    assert est.value >= 0


def test_deterministic_rerun(pitchfork):
    a = estimate_lambda_mc(pitchfork, [0.0], None, 1.0, 1e-2, 5000, "fv", seed=4)
    b = estimate_lambda_mc(pitchfork, [0.0], None, 1.0, 1e-2, 5000, "fv", seed=4)
    assert (a.value, a.std_error) == (b.value, b.std_error)


def test_threads_do_not_change_results(pitchfork):
    kw = dict(model=pitchfork, x0=[0.0], v0=None, t=0.5, dt=1e-2, n=9000, mode="fv", seed=5)
    a = estimate_lambda_mc(threads=1, **kw)
    b = estimate_lambda_mc(threads=4, **kw)
    assert (a.value, a.std_error) == (b.value, b.std_error)


def test_resolve_mode(brownian):
    assert resolve_mode(brownian, [1.0], 2.0, 1e-3) == "rejection"
    assert resolve_mode(brownian, [1.0], 20.0, 1e-3) == "fv"
    assert resolve_mode(brownian, [1.0], 20.0, 1e-3, "rejection") == "rejection"


# -- oracle comparisons


def test_brownian_survival_matches_series():
    # zero drift: Euler steps are exact, only the boundary crossing test matters
    m = make_model("brownian")
    n = 40000
    ens = Ensemble(m, [np.pi / 4], n, 1e-2, seed=0, mode="rejection")
    ens.run_to(1.0)
    p = ens.n_alive / n
    ref = brownian_survival(np.pi / 4, 1.0)
    assert abs(p - ref) <= 3 * math.sqrt(ref * (1 - ref) / n)


def test_bridge_removes_coarse_step_bias():
    m = make_model("brownian")
    n = 40000
    alive = []
    for bridge in (True, False):
        ens = Ensemble(m, [np.pi / 4], n, 5e-2, seed=0, mode="rejection", bridge=bridge)
        ens.run_to(1.0)
        alive.append(ens.n_alive / n)
    ref = brownian_survival(np.pi / 4, 1.0)
    se = math.sqrt(ref * (1 - ref) / n)
    assert abs(alive[0] - ref) <= 3 * se
    assert alive[1] - ref > 10 * se


def test_conditioned_average_matches_finite_time_oracle(pitchfork):
    # exact E[(1/t) int f'(X) | T > t] at t = 2 from the generator's eigen-expansion
    ref = finite_time_average(pitchfork, 0.0, 2.0, pitchfork.fprime)
    est = conditioned_expectation(pitchfork, lambda x: pitchfork.fprime(x[:, 0]), [0.0], 2.0,
                                  1e-3, 20000, "rejection", seed=1)
    assert est.valid
    assert est.within(ref, 3.0, 0.01)


def test_rejection_and_fv_agree(pitchfork):
    h = lambda x: pitchfork.fprime(x[:, 0])  # noqa: E731
    a = conditioned_expectation(pitchfork, h, [0.0], 2.0, 1e-3, 10000, "rejection", seed=2)
    b = conditioned_expectation(pitchfork, h, [0.0], 2.0, 1e-3, 10000, "fv", seed=3)
    assert abs(a.value - b.value) <= 3 * math.hypot(a.std_error, b.std_error) + 0.02


def test_brownian_symmetric_mean():
    m = make_model("brownian")
    est = conditioned_expectation(m, x_obs, [np.pi / 2], 5.0, 2e-3, 4000, "fv", seed=0)
    assert est.within(np.pi / 2, 3.0)


# -- bounds


def test_bounds_collapse_1d(pitchfork):
    res = bounds_check(pitchfork, [0.0], 1.0, 1e-2, 500, "fv", seed=0)
    assert res.lower.value == pytest.approx(res.lam.value, abs=1e-12)
    assert res.upper.value == pytest.approx(res.lam.value, abs=1e-12)


def test_bounds_linear_diagonal():
    m = make_model("linear2d", a=0.5, b=-1.0, sigma=0.3, domain=None)
    res = bounds_check(m, [0.0, 0.0], 4.0, 1e-2, 500, "fv", seed=0, v0=[1.0, 1.0])
    assert res.upper.value == 0.5 and res.lower.value == -1.0
    assert res.lam.value == pytest.approx(0.5, abs=0.1)
    assert res.sandwiched()


def test_bounds_gradient2d():
    m = make_model("gradient2d")
    res = bounds_check(m, [0.5, 0.5], 3.0, 2e-3, 2000, "fv", seed=0)
    assert res.sandwiched()
    assert res.lower.value < res.upper.value


# -- survival fit


def test_survival_slope_x_independent():
    m = make_model("brownian")
    a = survival_rate_fit(m, [np.pi / 2], 1e-2, 20000, (1, 2, 3, 4), seed=0)
    b = survival_rate_fit(m, [np.pi / 4], 1e-2, 20000, (1, 2, 3, 4), seed=1)
    assert abs(a.slope - b.slope) <= 3 * math.hypot(a.slope_se, b.slope_se)
    assert a.slope == pytest.approx(-0.5, rel=0.1)


def test_survival_fit_needs_four_points():
    m = make_model("brownian", domain=Interval(0.0, 0.1))
    with pytest.raises(StarvationError):
        survival_rate_fit(m, [0.05], 1e-3, 200, (1, 2, 3, 4), seed=0)


# -- histograms


def test_qsd_histogram_symmetric():
    m = make_model("brownian")
    res = empirical_qsd(m, [np.pi / 2], 3.0, 5e-3, 20000, bins=16, mode="fv", seed=0)
    p = res.mass
    n = res.n_survivors
    sd = np.sqrt((p + p[::-1]) / n)
    assert np.all(np.abs(p - p[::-1]) <= 3 * sd + 1e-12)
    assert res.mass.sum() == pytest.approx(1.0)
    assert res.reference_mass.sum() == pytest.approx(1.0, abs=1e-8)


def test_qsd_tv_improves_with_time():
    m = make_model("brownian")
    early = empirical_qsd(m, [np.pi / 2], 0.3, 5e-3, 20000, mode="fv", seed=0)
    late = empirical_qsd(m, [np.pi / 2], 4.0, 5e-3, 20000, mode="fv", seed=0)
    assert late.distance < early.distance


def test_qed_consistency_and_qsd_gap(pitchfork):
    res = empirical_qed(pitchfork, [0.0], 5.0, 2e-3, 10000, mode="fv", seed=0)
    a = res.extra["lambda"]
    b = res.extra["lambda_from_histogram"]
    assert abs(a.value - b.value) <= 3 * a.std_error
    assert res.extra["l1_nu"] > res.distance


# -- probes


def test_wilson_interval():
    lo, hi = wilson_interval(0, 100)
    assert lo == 0.0 and 0.03 < hi < 0.04
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi and hi - 0.5 == pytest.approx(0.5 - lo)
    assert wilson_interval(0, 0) == (0.0, 1.0)


def test_convergence_ou_zero():
    m = make_model("ou", kappa=1.0, c=1.0)
    curve = convergence_probe(m, [0.0], None, 0.01, (0.5, 1.0), 1e-2, 300, "fv")
    assert all(r.value == 0 for r in curve.rows)
    assert curve.reference == pytest.approx(-1.0, abs=1e-10)


def test_convergence_chebyshev(pitchfork):
    curve = convergence_probe(pitchfork, [0.0], None, 0.2, (1.0, 3.0), 2e-3, 4000, "fv", seed=0)
    for r in curve.rows:
        assert r.value <= r.extra["variance"] / 0.2**2 + 0.05
        assert r.lo <= r.value <= r.hi


def test_convergence_truncates_on_starvation():
    m = make_model("brownian", domain=Interval(0.0, 0.2))
    curve = convergence_probe(m, [0.1], None, 0.1, (0.01, 5.0), 1e-3, 200, "rejection", lam=0.0)
    assert curve.truncated and len(curve.rows) == 1


def test_correlation_constant_h1(brownian):
    curve = correlation_probe(brownian, [np.pi / 2], one, x_obs, t_grid=(2.0,), dt=5e-3, n=4000,
                              seed=0)
    assert curve.reference == pytest.approx(np.pi / 2, abs=1e-6)
    row = curve.rows[0]
    assert abs(row.value - np.pi / 2) <= 3 * row.extra["std_error"] + 0.02


def test_correlation_validation(brownian):
    with pytest.raises(ValueError):
        correlation_probe(brownian, [1.0], one, one, q=0.2, r=0.5)


def test_spectrum_trivial_models():
    ou = make_model("ou", kappa=1.0, c=1.0)
    res = spectrum_probe(ou, [[0.0], [0.5]], None, 1.0, 1e-2, 200, "fv")
    assert res.sup == res.inf == -1.0
    bm = make_model("brownian")
    res = spectrum_probe(bm, [[1.0]], None, 1.0, 1e-2, 200, "fv")
    assert res.sup == res.inf == 0.0


def test_spectrum_pitchfork_consistency():
    m = make_model("pitchfork", alpha=1.0, c=2.0)
    res = spectrum_probe(m, [[0.0], [1.0]], None, 2.0, 1e-2, 500, "rejection")
    assert res.sup >= res.mean >= res.inf
    assert res.sup == pytest.approx(res.extra["fprime_max"], abs=1e-12)


def test_sync_ou_exact():
    m = make_model("ou", kappa=1.0, c=2.0)
    res = sync_probe(m, [0.0], 1e-3, 2.0, 1e-3, 300, seed=0)
    assert res.n_surviving > 0
    assert np.all(res.rates == -1.0)
    assert res.fraction == 1.0


def test_dt_refinement_first_order():
    # successive level differences should shrink by about 2 under dt halving
    wide = make_model("pitchfork", alpha=1.0, c=1.5)
    diffs = np.mean([np.diff(coupled_ftle_levels(wide, 0.0, 1.0, 0.01, 4, 100_000, s))
                     for s in range(2)], axis=0)
    ratios = diffs[1:] / diffs[:-1]
    assert np.all((ratios > 1.5) & (ratios < 3.0)), (diffs, ratios)
