import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from qlyap.models import Interval, SdeModel, make_model
from qlyap.spectral import (
    Grid1D,
    SolverError,
    Tridiagonal,
    assemble_generator,
    compute_gamma,
    identity_check,
    normalize_and_densities,
    principal_eigenpair,
    read_solution_csv,
    solve,
    sturm_count,
    survival_curve,
    trapezoid,
    write_solution_csv,
)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid1D(0.0, 1.0, 7)
    with pytest.raises(ValueError):
        Grid1D(1.0, 1.0, 10)
    g = Grid1D(0.0, 1.0, 9)
    assert g.h == pytest.approx(0.1)
    np.testing.assert_allclose(np.diff(g.x), 0.1)
    assert g.x[0] == 0.0 and g.x[-1] == pytest.approx(1.0)


# -- gamma


def test_gamma_zero_drift(brownian):
    g = Grid1D.for_model(brownian, 50)
    assert np.all(compute_gamma(brownian, g) == 0)


def test_gamma_ou_closed_form():
    m = make_model("ou", kappa=1.0, c=1.0)
    g = Grid1D.for_model(m, 400)
    gam = compute_gamma(m, g)
    assert gam[0] == 0.0
    # trapezoid is exact up to O(h^2) on a quadratic antiderivative
    np.testing.assert_allclose(gam, 1 - g.x**2, atol=2 * g.h**2)


def test_gamma_pitchfork_closed_form():
    c = 1.3
    m = make_model("pitchfork", alpha=1.0, c=c)
    g = Grid1D.for_model(m, 2000)
    x = g.x
    ref = (x**2 - x**4 / 2) - (c**2 - c**4 / 2)
    np.testing.assert_allclose(compute_gamma(m, g), ref, atol=1e-5)


# -- generator


def test_generator_is_laplacian_for_zero_drift():
    m = make_model("brownian", sigma=math.sqrt(2.0), domain=Interval(0, 1))
    g = Grid1D(0.0, 1.0, 20)
    mat = assemble_generator(m, g)
    h2 = g.h**2
    np.testing.assert_allclose(mat.diag, -2 / h2, rtol=1e-14)
    np.testing.assert_allclose(mat.off, 1 / h2, rtol=1e-14)


def test_generator_symmetric_by_construction(pitchfork):
    g = Grid1D.for_model(pitchfork, 30)
    dense = assemble_generator(pitchfork, g).to_dense()
    assert np.array_equal(dense, dense.T)


def test_generator_matches_nonsymmetric_stencil(pitchfork):
    # conjugating back with e^{gamma/2} gives a consistent (L u) stencil
    g = Grid1D.for_model(pitchfork, 400)
    gam = compute_gamma(pitchfork, g)
    mat = assemble_generator(pitchfork, g, gam)
    w = np.exp(gam[1:-1] / 2)
    x = g.x[1:-1]
    u = np.cos(np.pi * x / 2)  # vanishes at +-1
    lu = mat.matvec(u * w) / w
    ref = 0.5 * (-(np.pi / 2) ** 2 * u) + pitchfork.f1(x) * (-(np.pi / 2) * np.sin(np.pi * x / 2))
    np.testing.assert_allclose(lu[5:-5], ref[5:-5], atol=5e-4)


def test_ou_generator_negative_definite_sturm():
    m = make_model("ou", kappa=1.0, c=1.0)
    mat = assemble_generator(m, Grid1D.for_model(m, 500))
    assert sturm_count(mat, 0.0) == 0


def test_sturm_count_matches_dense(rng):
    n = 40
    mat = Tridiagonal(rng.normal(size=n), rng.normal(size=n - 1))
    ev = scipy.linalg.eigh_tridiagonal(mat.diag, mat.off, eigvals_only=True)
    for mu in (-2.0, -0.3, 0.0, 0.7, 1.5):
        assert sturm_count(mat, mu) == int(np.sum(ev > mu))


def test_shift_invariance_gamma_plus_ten(pitchfork):
    base = solve(pitchfork, n=800)
    s = solve(pitchfork, n=800, gamma_shift=10.0)
    assert s.lambda0 == pytest.approx(base.lambda0, abs=1e-9)
    assert s.lam == pytest.approx(base.lam, abs=1e-10)
    np.testing.assert_allclose(s.m, base.m, atol=1e-10)
    np.testing.assert_allclose(s.nu, base.nu, atol=1e-10)


@pytest.mark.parametrize("shift", [800.0, -800.0])
def test_huge_gamma_shift_no_overflow(pitchfork, shift):
    # e^gamma alone would overflow or underflow here
    base = solve(pitchfork, n=800)
    s = solve(pitchfork, n=800, gamma_shift=shift)
    assert np.all(np.isfinite(s.m))
    assert s.lambda0 == pytest.approx(base.lambda0, abs=1e-8)
    assert s.lam == pytest.approx(base.lam, abs=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.floats(-50, 50), st.floats(0.3, 2.0), st.floats(0.3, 2.5))
def test_shift_invariance_property(shift, alpha, c):
    m = make_model("pitchfork", alpha=alpha, c=c)
    a = solve(m, n=200)
    b = solve(m, n=200, gamma_shift=shift)
    assert b.lambda0 == pytest.approx(a.lambda0, rel=1e-9, abs=1e-12)
    assert b.lam == pytest.approx(a.lam, rel=1e-9, abs=1e-12)


# -- eigenpair


def test_principal_pair_matches_dense(pitchfork):
    g = Grid1D.for_model(pitchfork, 300)
    mat = assemble_generator(pitchfork, g)
    lam0, v = principal_eigenpair(mat)
    ev, vec = scipy.linalg.eigh_tridiagonal(mat.diag, mat.off)
    assert lam0 == pytest.approx(ev[-1], abs=1e-9)
    ref = vec[:, -1] * np.sign(vec[0, -1])
    np.testing.assert_allclose(v / np.linalg.norm(v), ref, atol=1e-8)
    assert np.all(v > 0)
    assert np.linalg.norm(mat.matvec(v) - lam0 * v) <= 1e-10 * max(1.0, mat.norm_inf()) * np.linalg.norm(v)


def test_brownian_half_laplacian_eigenvalue(brownian):
    s = solve(brownian, n=2000)
    assert s.lambda0 == pytest.approx(-0.5, abs=1e-6)


def test_laplacian_eigenvalue_unit_interval():
    m = make_model("brownian", sigma=math.sqrt(2.0), domain=Interval(0, 1))
    assert solve(m, n=2000).lambda0 == pytest.approx(-math.pi**2, abs=1e-4)


def test_richardson_second_order(pitchfork):
    lam = [solve(pitchfork, n=n) for n in (499, 999, 1999)]
    d1 = abs(lam[0].lambda0 - lam[1].lambda0)
    d2 = abs(lam[1].lambda0 - lam[2].lambda0)
    assert 3.5 <= d1 / d2 <= 4.5
    e1 = abs(lam[0].lam - lam[1].lam)
    e2 = abs(lam[1].lam - lam[2].lam)
    assert 3.5 <= e1 / e2 <= 4.5


def test_solver_error_when_not_tridiagonal_negative():
    # a positive-definite matrix has no negative top eigenvalue in [lo, 0]
    mat = Tridiagonal(np.full(10, 5.0), np.full(9, -1.0))
    with pytest.raises(SolverError):
        principal_eigenpair(mat)


# -- densities


def test_brownian_densities(brownian):
    s = solve(brownian, n=2000)
    x = s.x
    np.testing.assert_allclose(s.m, 2 / np.pi * np.sin(x) ** 2, atol=1e-4)
    np.testing.assert_allclose(s.nu, 0.5 * np.sin(x), atol=1e-4)
    assert s.psi[0] == 0 and s.psi[-1] == 0


@pytest.mark.parametrize("name,params", [("brownian", {}), ("pitchfork", {"c": 1.0}),
                                         ("pitchfork", {"c": 2.5}), ("ou", {"kappa": 2.0})])
def test_solution_invariants(name, params):
    m = make_model(name, **params)
    s = solve(m, n=1000)
    h = s.grid.h
    assert trapezoid(s.psi**2 * np.exp(s.gamma - s.gamma.max()), h) * np.exp(s.gamma.max()) == \
        pytest.approx(1.0, abs=1e-8)
    assert s.integrate(s.nu) == pytest.approx(1.0, abs=1e-8)
    assert s.integrate(s.m) == pytest.approx(1.0, abs=1e-6)
    assert s.lambda0 < 0
    inner = slice(1, -1)
    assert np.all(s.nu[inner] > 0) and np.all(s.m[inner] > 0) and np.all(s.psi[inner] > 0)
    assert s.nu[0] == s.nu[-1] == 0 and s.m[0] == s.m[-1] == 0
    ok = s.nu > 1e-12
    np.testing.assert_allclose(s.m[ok], (s.eta * s.nu)[ok], rtol=1e-6)
    fp = m.fprime(s.x)
    assert fp.min() - 1e-12 <= s.lam <= fp.max() + 1e-12


def test_pitchfork_m_symmetric(pitchfork):
    s = solve(pitchfork, n=1001)
    np.testing.assert_allclose(s.m, s.m[::-1], atol=1e-8)


def test_normalize_fixes_sign(brownian):
    g = Grid1D.for_model(brownian, 100)
    y = -np.sin(g.x[1:-1])
    psi, nu, eta, m = normalize_and_densities(np.zeros(g.x.size), y, g)
    assert psi[1] > 0


# -- lambda


@pytest.mark.parametrize("kappa", [0.5, 1.0, 2.0])
def test_ou_lambda_exact(kappa):
    m = make_model("ou", kappa=kappa, c=1.0)
    assert solve(m, n=500).lam == pytest.approx(-kappa, abs=1e-10)


def test_zero_drift_lambda(brownian):
    assert solve(brownian, n=200).lam == 0.0


def test_pitchfork_small_c_limit():
    s = solve(make_model("pitchfork", alpha=1.0, c=0.05))
    assert abs(s.lam - 1.0) <= 0.05


def test_pitchfork_sign_change():
    lams = [solve(make_model("pitchfork", alpha=1.0, c=c), n=1000).lam for c in (0.5, 1.0, 2.0)]
    assert lams[0] > 0 and lams[1] > 0 and lams[2] < 0


def test_bounds_collapse_in_1d(pitchfork):
    from qlyap.models import lambda_plus_minus

    s = solve(pitchfork, n=1000)
    lp, lm = lambda_plus_minus(pitchfork, s.x[:, None])
    assert s.integrate(lp * s.m) == pytest.approx(s.lam, abs=1e-14)
    assert s.integrate(lm * s.m) == pytest.approx(s.lam, abs=1e-14)


# -- integration-by-parts identities


def test_identity_brownian_curvature(brownian):
    ic = identity_check(brownian, solve(brownian, n=2000))
    assert ic.dev_curvature <= 1e-3
    assert ic.dev_flux <= 1e-3


def test_identity_ou():
    m = make_model("ou", kappa=1.0, c=1.0)
    ic = identity_check(m, solve(m, n=4000))
    assert ic.direct == pytest.approx(-1.0, abs=1e-10)
    assert ic.dev_flux <= 1e-4 and ic.dev_curvature <= 1e-4


def test_identity_refinement(pitchfork):
    devs = [identity_check(pitchfork, solve(pitchfork, n=n)).max_deviation for n in (499, 999, 1999)]
    assert devs[0] > devs[1] > devs[2]
    assert 3.0 <= devs[0] / devs[1] <= 5.0


# -- survival curve and csv


def test_survival_curve(brownian):
    s = solve(brownian, n=2000)
    assert survival_curve(s, 0.0) == 1.0
    assert survival_curve(s, 2.0) == pytest.approx(math.exp(-1.0), abs=2e-6)
    vals = survival_curve(s, np.linspace(0, 5, 20))
    assert np.all(np.diff(vals) < 0)
    with pytest.raises(ValueError):
        survival_curve(s, -1.0)


def test_solution_csv_roundtrip(tmp_path, pitchfork):
    s = solve(pitchfork, n=100)
    p = tmp_path / "sol.csv"
    write_solution_csv(s, p, ["model=pitchfork"])
    head, cols = read_solution_csv(p)
    assert float(head["lambda0"]) == s.lambda0
    assert float(head["lambda"]) == s.lam
    assert list(cols) == ["x", "gamma", "psi", "nu", "eta", "m"]
    np.testing.assert_array_equal(cols["m"], s.m)


def test_solve_rejects_2d():
    with pytest.raises(ValueError):
        solve(make_model("gradient2d"))


def test_custom_model_solve():
    # user-built model: f = -x^3 on (-1, 1)
    m = SdeModel(lambda x: -x**3, lambda x: (-3 * x**2)[..., None], 0.7, Interval(-1, 1))
    s = solve(m, n=500)
    assert s.lambda0 < 0 and -3 <= s.lam <= 0
