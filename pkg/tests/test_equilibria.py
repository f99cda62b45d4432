import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from hivdelay import equilibria as eq
from hivdelay.equilibria import EquilibriumKind, RootCase
from hivdelay.io import read_table, write_table
from hivdelay.params import ModelParams, rhs_reduced
from strategies import model_params, two_root_params

E_STAR_U6 = (0.20825, 3.58664, 16.67016, 2.25800, 1.25607)


def G_single_fraction(I, p):
    """G written over one common denominator (independent of the library code)."""
    b0 = p.beta0 + p.tau * p.gamma
    d1, d2 = p.mu + p.beta1 * I, p.mu + p.beta2 * I
    num = p.B * (p.beta0 * d1 * d2 + p.tau * I * (p.beta1 * p.gamma1 * d2 + p.beta2 * p.gamma2 * d1))
    return num / ((p.mu + b0 * I) * d1 * d2)


def grid_sign_changes(p, hi, n=10_000):
    I = np.linspace(0.0, hi, n)
    s = np.sign(eq.eval_G(I, p) - (p.mu + p.d))
    s = s[s != 0]
    return int(np.sum(s[1:] != s[:-1]))


# -- G ---------------------------------------------------------------------


def test_G_at_zero_equals_target_on_threshold(uganda):
    p = uganda.replace(beta0=uganda.D0)
    assert eq.eval_G(0.0, p) == pytest.approx(p.mu + p.d, rel=1e-15)


def test_G_at_reported_I_star(uganda):
    assert eq.eval_G(1.2561, uganda) == pytest.approx(0.15176, rel=1e-3)


@given(model_params(), st.floats(0.0, 200.0))
def test_G_matches_single_fraction(p, I):
    assert eq.eval_G(I, p) == pytest.approx(G_single_fraction(I, p), rel=1e-13)


@given(model_params(), st.floats(1e-3, 50.0))
def test_dG_matches_central_difference(p, I):
    h = 1e-6 * max(1.0, I)
    fd = (eq.eval_G(I + h, p) - eq.eval_G(I - h, p)) / (2 * h)
    exact = eq.dG_dI(I, p)
    assume(abs(exact) > 1e-8 * abs(eq.eval_G(I, p)))
    assert exact == pytest.approx(fd, rel=1e-6, abs=1e-12)


@given(model_params(supercritical=True, dominant=True), st.floats(1e-6, 1e3))
def test_G_decreasing_when_beta0_dominant(p, I):
    assert eq.dG_dI(I, p) < 0


def test_G_and_slope_vanish_at_infinity(uganda):
    assert eq.eval_G(1e12, uganda) < 1e-9
    assert abs(eq.dG_dI(1e12, uganda)) < 1e-18


def test_G_vectorised(uganda):
    I = np.linspace(0, 5, 7)
    np.testing.assert_array_equal(eq.eval_G(I, uganda), [eq.eval_G(x, uganda) for x in I])


# -- equilibria ------------------------------------------------------------


def test_disease_free(uganda):
    E = eq.disease_free(uganda)
    assert E.kind is EquilibriumKind.DISEASE_FREE
    assert E.S0 == pytest.approx(46.768707, rel=1e-7)
    assert E.I == 0.0
    np.testing.assert_array_equal(rhs_reduced(uganda, E.as_array(), 0.0), np.zeros(5))


def test_uganda_endemic_golden(uganda):
    report = eq.classify_roots(uganda)
    assert report.case is RootCase.UNIQUE_SUPERCRITICAL
    assert round(report.roots[0], 4) == 1.2561
    E = eq.solve_endemic(uganda)
    assert E.kind is EquilibriumKind.ENDEMIC
    np.testing.assert_allclose(E.as_tuple(), E_STAR_U6, rtol=5e-5)


@given(model_params(supercritical=True))
def test_endemic_residuals(p):
    E = eq.solve_endemic(p)
    target = p.mu + p.d
    assert abs(eq.eval_G(E.I, p) - target) < 1e-10 * target
    assert np.max(np.abs(rhs_reduced(p, E.as_array(), E.I))) < 1e-9


@given(model_params(supercritical=True))
def test_assembly_formulas(p):
    E = eq.solve_endemic(p)
    I = E.I
    denom = p.mu + p.b0u * I
    assert E.S0 == pytest.approx(p.B / denom, rel=1e-12)
    assert E.Z == pytest.approx(p.q * I / p.eta, rel=1e-12)
    for Sj, bj, gj in ((E.S1, p.beta1, p.gamma1), (E.S2, p.beta2, p.gamma2)):
        assert Sj == pytest.approx(p.q * gj * I * p.B / (p.eta * (p.mu + bj * I) * denom),
                                   rel=1e-12, abs=1e-300)


@given(model_params(supercritical=True))
def test_supercritical_slope_negative_and_unique(p):
    report = eq.classify_roots(p)
    assert report.case is RootCase.UNIQUE_SUPERCRITICAL
    assert report.slopes[0] < 0
    assert grid_sign_changes(p, p.B / p.mu) <= 1


def test_subcritical_without_strong_classes_has_no_endemic(uganda):
    b = 0.5 * uganda.D0
    p = uganda.replace(beta0=b, beta1=0.05 * b, beta2=0.40 * b)
    assert eq.solve_endemic(p) is None
    assert eq.classify_roots(p).case is RootCase.NO_ROOT


def test_boundary_with_weak_classes_is_origin_only(uganda):
    p = uganda.replace(beta0=uganda.D0, beta1=1e-4, beta2=2e-4)
    assert p.rel_weight <= p.D0
    report = eq.classify_roots(p)
    assert report.case is RootCase.BOUNDARY_UNIQUE
    assert report.roots == (0.0,)
    assert eq.endemic_equilibria(p) == []


def test_two_roots_construction():
    p = two_root_params()
    assert eq.beta0_tau(p, p.tau) < p.beta0 < p.D0
    report = eq.classify_roots(p)
    assert report.case is RootCase.TWO_ROOTS
    lo, hi = report.roots
    assert lo < report.I_max < hi
    assert report.slopes[0] > 0 > report.slopes[1]
    assert grid_sign_changes(p, p.B / p.mu) == 2
    for E in eq.endemic_equilibria(p):
        assert np.max(np.abs(rhs_reduced(p, E.as_array(), E.I))) < 1e-9
    assert eq.solve_endemic(p) is None


@given(model_params())
def test_case_exclusivity(p):
    report = eq.classify_roots(p)
    if p.beta0 > p.D0:
        assert report.case is RootCase.UNIQUE_SUPERCRITICAL
    else:
        assert report.case is not RootCase.UNIQUE_SUPERCRITICAL
    target = p.mu + p.d
    for r in report.roots:
        assert abs(eq.eval_G(r, p) - target) < 1e-10 * target


@given(model_params(supercritical=False))
def test_grid_scan_agrees_with_root_count(p):
    report = eq.classify_roots(p)
    assume(report.case in (RootCase.NO_ROOT, RootCase.TWO_ROOTS))
    if report.case is RootCase.TWO_ROOTS:
        # roots closer than the grid spacing cannot be resolved by the scan
        assume(report.roots[1] - report.roots[0] > 3 * (p.B / p.mu) / 1e4)
        assume(report.roots[0] > 3 * (p.B / p.mu) / 1e4)
    assert grid_sign_changes(p, p.B / p.mu) == report.n_roots


@given(model_params(), st.floats(1e-3, 10.0))
def test_max_G_increases_with_beta0(p, tau):
    lo = eq.maximize_G(p, 0.5 * p.D0, tau)[1]
    hi = eq.maximize_G(p, 0.6 * p.D0, tau)[1]
    assert hi > lo


# -- thresholds ------------------------------------------------------------


@given(model_params(), st.floats(1e-3, 1e3))
def test_D1_tau_quadratic_residual(p, tau):
    D1 = eq.D1_tau(p, tau)
    s = p.weighted_beta_sum
    assert D1 * (D1 + tau * p.gamma) - tau * s == pytest.approx(0.0, abs=1e-12 * max(1.0, tau * s))
    assert D1 == pytest.approx(eq.D1_tau_quadratic(p, tau), rel=1e-8)


def test_D1_tau_limits_and_monotonicity(uganda):
    assert eq.D1_tau(uganda, 1e-16) < 1e-8
    taus = np.geomspace(0.1, 100, 40)
    values = [eq.D1_tau(uganda, t) for t in taus]
    assert np.all(np.diff(values) > 0)
    with pytest.raises(ValueError):
        eq.D1_tau(uganda, 0.0)


def test_beta0_tau_equals_D0_for_weak_classes(uganda):
    p = uganda.replace(beta1=1e-4, beta2=2e-4)
    assert eq.tau_star(p) is None
    for tau in (0.1, 1.0, 100.0):
        assert eq.beta0_tau(p, tau) == p.D0


def test_tau_star_switches_beta0_tau():
    p = two_root_params()
    ts = eq.tau_star(p)
    assert eq.D1_tau(p, ts) == pytest.approx(p.D0, rel=1e-12)
    assert eq.beta0_tau(p, 0.9 * ts) == p.D0
    assert eq.beta0_tau(p, 1.1 * ts) < p.D0


@pytest.mark.parametrize("tau", [3e-4, 1e-3, 3e-3, 0.1, 10.0])
def test_beta0_tau_cross_checks_D1(tau):
    p = two_root_params()
    assert (eq.beta0_tau(p, tau) < p.D0) == (p.D0 < eq.D1_tau(p, tau))


# -- tau sweeps and limits -------------------------------------------------


def test_sweep_monotone_and_bracketed(uganda):
    rows = eq.sweep_tau(uganda, np.geomspace(0.1, 1e3, 30))
    I = np.array([r.I for r in rows])
    assert np.all(np.diff(I) < 0)
    for r in rows:
        assert r.lower_bound <= r.I <= r.upper_bound
        assert r.I <= uganda.mu / uganda.D0


def test_sweep_rejects_bad_grid(uganda):
    with pytest.raises(ValueError):
        eq.sweep_tau(uganda, [1.0, 0.5])
    with pytest.raises(ValueError):
        eq.sweep_tau(uganda.replace(beta0=0.5 * uganda.D0), [1.0])


def test_sweep_table_round_trip(tmp_path, uganda):
    rows = eq.sweep_rows(eq.sweep_tau(uganda, [0.5, 1.0, 2.0]))
    write_table(eq.SWEEP_HEADER, rows, tmp_path / "s.csv")
    header, back = read_table(tmp_path / "s.csv")
    assert tuple(header) == eq.SWEEP_HEADER
    np.testing.assert_allclose(back, rows, rtol=1e-14)


def test_vanishing_case_tau_I_bounded(uganda):
    p = uganda.replace(beta1=0.001, beta2=0.002)
    assert eq.limit_case(p) == "vanishing"
    assert eq.I_star_limit(p) == 0.0
    products = [t * eq.solve_endemic(p.with_tau(t)).I for t in np.geomspace(1, 1e6, 13)]
    assert max(products) < 2 * products[0]


def test_Z_and_S_limits_vanishing_case(uganda):
    p = uganda.replace(beta1=0.001, beta2=0.002)
    Z = eq.Z_star_limit(p)
    lhs = p.D0 * (p.mu + p.gamma * Z)
    assert lhs == pytest.approx(p.mu * p.beta0 + Z * p.weighted_beta_sum, rel=1e-12)
    E = eq.solve_endemic(p.with_tau(1e6))
    np.testing.assert_allclose((E.S0, E.S1, E.S2), eq.S_star_limits(p), rtol=1e-3)
    assert E.Z == pytest.approx(Z, rel=1e-3)


def test_boundary_case_limits(uganda):
    b2 = (uganda.D0 * uganda.gamma - uganda.beta1 * uganda.gamma1) / uganda.gamma2
    p = uganda.replace(beta2=b2)
    assert eq.limit_case(p) == "boundary"
    S = eq.S_star_limits(p)
    assert S[0] == 0.0
    assert sum(S) == pytest.approx((p.gamma1 + p.gamma2) / p.gamma * p.B / p.mu, rel=1e-14)
    I = [eq.solve_endemic(p.with_tau(t)).I for t in (1.0, 1e8)]
    assert I[1] < 1e-3 * I[0]


def test_boundary_limits_fill_population_without_removal(uganda):
    base = uganda.replace(gamma0=0.0)
    b2 = (base.D0 * base.gamma - base.beta1 * base.gamma1) / base.gamma2
    assert sum(eq.S_star_limits(base.replace(beta2=b2))) == pytest.approx(base.B / base.mu, rel=1e-14)


def test_persistent_case_limits(uganda):
    Iinf = eq.I_star_limit(uganda)
    D0, mu, g = uganda.D0, uganda.mu, uganda.gamma
    resid = (mu / g) * sum(b * gj / (mu + b * Iinf) for b, gj in
                           ((uganda.beta1, uganda.gamma1), (uganda.beta2, uganda.gamma2))) - D0
    assert abs(resid) < 1e-12
    E = eq.solve_endemic(uganda.with_tau(1e4))
    assert E.I == pytest.approx(Iinf, rel=1e-2)
    S = eq.S_star_limits(uganda)
    assert S[0] == 0.0
    np.testing.assert_allclose((E.S1, E.S2), S[1:], rtol=1e-2)


def test_limits_require_dominant_beta0(uganda):
    with pytest.raises(ValueError):
        eq.I_star_limit(uganda.replace(beta1=1.0))
    with pytest.raises(ValueError):
        eq.Z_star_limit(uganda)


def test_I_star_bounds_hold_for_uganda(uganda):
    lo, hi = eq.I_star_bounds(uganda)
    assert lo <= eq.solve_endemic(uganda).I <= hi
