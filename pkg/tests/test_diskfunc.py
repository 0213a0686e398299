import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from singmt.diskfunc import (
    AdmissibilityError,
    F_disk,
    FunctionalParams,
    RadialProfile,
    concentration_tail,
    dirichlet_norm_radial,
    f_delta_estimate,
    l2_norm_sq_radial,
    log_grid,
    moser_grid,
    moser_profile,
    moser_value,
    radial_rule,
    richardson_zero,
)

CONE = RadialProfile(np.linspace(0, 1, 2), np.array([1.0, 0.0]))


def cone_on(grid):
    return RadialProfile.from_function(lambda r: 1 - r, grid)


# -- parameters and profiles ----------------------------------------------------

def test_admissibility():
    FunctionalParams(4 * math.pi, 0.0)
    FunctionalParams(2 * math.pi, 1.0)
    FunctionalParams(1.0, 1.8)
    for a, b in [(13.0, 0.0), (2 * math.pi, 1.01), (0.0, 0.0), (-1.0, 0.5), (1.0, 2.0), (1.0, -0.1)]:
        with pytest.raises(AdmissibilityError):
            FunctionalParams(a, b)


def test_critical_line():
    for beta in (0.0, 0.5, 1.0, 1.5):
        p = FunctionalParams.critical(beta)
        assert p.is_critical
        assert p.criticality == pytest.approx(1.0, abs=1e-15)
    assert not FunctionalParams(math.pi, 0.5).is_critical


def test_profile_validation():
    with pytest.raises(ValueError):
        RadialProfile(np.array([0.0, 0.5]), np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        RadialProfile(np.array([0.0, 1.0]), np.array([1.0, 0.1]))
    with pytest.raises(ValueError):
        RadialProfile(np.array([0.0, 0.5, 0.5, 1.0]), np.array([1.0, 0.5, 0.5, 0.0]))
    with pytest.raises(ValueError):
        RadialProfile(np.array([0.0, 0.5, 1.0]), np.array([1.0, -0.5, 0.0]))
    with pytest.raises(ValueError):
        RadialProfile(np.array([0.0, 1.0]), np.array([np.nan, 0.0]))


def test_profile_is_immutable():
    v = cone_on(np.linspace(0, 1, 5))
    with pytest.raises(ValueError):
        v.values[0] = 3.0


def test_refined_profile_is_same_function():
    v = moser_profile(0.1, 256)
    w = v.refined()
    r = np.linspace(0, 1, 1001)
    np.testing.assert_allclose(w(r), v(r), rtol=1e-15, atol=1e-15)
    assert w.grid.size == 2 * v.grid.size - 1


# -- quadrature ----------------------------------------------------------------

@pytest.mark.parametrize("beta", [0.0, 0.5, 1.0, 1.5, 1.9])
def test_radial_rule_exact_for_polynomials(beta):
    grid = log_grid(40, 1e-5)
    nodes, weights, _ = radial_rule(grid, beta)
    for m in range(0, 19, 3):
        exact = 1 / (m + 2 - beta)
        assert np.sum(weights * nodes ** m) == pytest.approx(exact, rel=1e-13)


def test_radial_rule_cells():
    grid = np.array([0.0, 0.1, 0.4, 1.0])
    nodes, _, cell = radial_rule(grid, 0.5)
    assert np.all(grid[cell] <= nodes) and np.all(nodes <= grid[cell + 1])


# -- Dirichlet energy ---------------------------------------------------------

def test_dirichlet_examples():
    assert dirichlet_norm_radial(RadialProfile.zero()) == 0
    assert dirichlet_norm_radial(CONE) == pytest.approx(math.pi, rel=1e-15)
    assert dirichlet_norm_radial(cone_on(log_grid(300))) == pytest.approx(math.pi, rel=1e-13)


def test_dirichlet_matches_slope_integral():
    # v = 1 - r^2 sampled piecewise linearly: 2 pi sum s_j^2 (r_{j+1}^2 - r_j^2) / 2
    grid = np.linspace(0, 1, 11)
    v = RadialProfile.from_function(lambda r: 1 - r * r, grid)
    s = np.diff(v.values) / np.diff(grid)
    assert dirichlet_norm_radial(v) == pytest.approx(math.pi * np.sum(s ** 2 * np.diff(grid ** 2)), rel=1e-14)


@pytest.mark.parametrize("rho", [0.1, 0.01, 1e-3, 1e-6])
def test_moser_unit_energy(rho):
    assert dirichlet_norm_radial(moser_profile(rho)) == pytest.approx(1.0, abs=1e-12)


def test_unnormalised_moser_energy_overshoots_slightly():
    # piecewise-linear interpolation of log(1/r) on a log grid raises the energy
    e = dirichlet_norm_radial(moser_profile(0.1, 4096, normalize=False))
    assert 1.0 < e < 1.0 + 1e-6


# -- functional ----------------------------------------------------------------

def test_F_disk_zero_profile():
    for p in (FunctionalParams(1.0), FunctionalParams(2 * math.pi, 1.0)):
        assert F_disk(p, RadialProfile.zero(7)) == 0.0


@pytest.mark.parametrize("alpha,beta", [(1.0, 0.0), (1.0, 1.0), (1.0, 1.5), (4 * math.pi, 0.0), (math.pi, 0.5)])
def test_F_disk_cone_against_quadrature_oracle(alpha, beta):
    # v = 1 - r is exactly piecewise linear, so only quadrature error remains
    ref = oracles.f_disk(alpha, beta, lambda r: 1 - r)
    assert F_disk(FunctionalParams(alpha, beta), cone_on(log_grid(64))) == pytest.approx(ref, rel=1e-12)


def test_F_disk_cone_frozen_values():
    assert F_disk(FunctionalParams(1.0, 0.0), cone_on(log_grid(64))) == pytest.approx(0.6503777367310062, rel=1e-13)
    assert F_disk(FunctionalParams(1.0, 1.5), cone_on(log_grid(64))) == pytest.approx(10.159525868150997, rel=1e-13)


def test_F_disk_plateau_split_closed_form():
    # v = c on [0, a], linear down to 0 on [a, 1]; with beta = 1 the plateau
    # contributes 2 pi (e^{c^2} - 1) a exactly
    c, a = 0.8, 0.3
    grid = np.concatenate([[0.0, a], np.linspace(a, 1, 201)[1:]])
    v = RadialProfile.from_function(lambda r: np.where(r <= a, c, c * (1 - r) / (1 - a)), grid)
    plateau = 2 * math.pi * math.expm1(c * c) * a
    tail = oracles.f_disk(1.0, 1.0, lambda r: c * (1 - r) / (1 - a), breaks=(a, 1))
    assert F_disk(FunctionalParams(1.0, 1.0), v) == pytest.approx(plateau + tail, rel=1e-12)


def test_F_disk_moser_against_oracle():
    rho = 0.01
    v = moser_profile(rho, 4096, normalize=False)
    p = FunctionalParams(2 * math.pi, 1.0)
    ref = oracles.f_disk(p.alpha, p.beta, oracles.moser(rho), breaks=(0, rho, 1))
    # interpolation error of the piecewise-linear sample dominates here
    assert F_disk(p, v) == pytest.approx(ref, rel=1e-6)


def test_F_disk_small_values_keep_precision():
    # expm1 keeps full relative accuracy where exp(x) - 1 would cancel
    v = cone_on(np.linspace(0, 1, 9)).scaled(1e-9)
    p = FunctionalParams(1.0, 0.0)
    # 2 pi int (1-r)^2 r dr = pi / 6
    assert F_disk(p, v) == pytest.approx(1e-18 * math.pi / 6, rel=1e-10)


def test_quadrature_refinement_on_smooth_profiles():
    p = FunctionalParams(2 * math.pi, 1.0)
    for v in (cone_on(log_grid(128)), RadialProfile.from_function(lambda r: 1 - r * r, log_grid(256)),
              moser_profile(0.05, 1024)):
        assert F_disk(p, v.refined()) == pytest.approx(F_disk(p, v), rel=1e-8)
        assert F_disk(p, v, n=20) == pytest.approx(F_disk(p, v), rel=1e-12)


profile_values = arrays(np.float64, st.integers(3, 12), elements=st.floats(0, 1.5))


def _profile(vals):
    vals = np.append(vals, 0.0)
    return RadialProfile(np.linspace(0, 1, vals.size), vals)


@settings(max_examples=80, deadline=None)
@given(vals=profile_values, bump=st.floats(0, 1), alpha=st.floats(0.1, 4 * math.pi), beta=st.floats(0, 1.9))
def test_monotone_in_profile(vals, bump, alpha, beta):
    assume(alpha / (4 * math.pi) + beta / 2 <= 1)
    p = FunctionalParams(alpha, beta)
    v1 = _profile(vals)
    v2 = _profile(vals + bump * np.linspace(1, 0, vals.size + 1)[:-1])
    assert F_disk(p, v1) <= F_disk(p, v2) * (1 + 1e-14)


@settings(max_examples=80, deadline=None)
@given(vals=profile_values, t1=st.floats(0.1, 2), dt=st.floats(1e-3, 1), alpha=st.floats(0.1, 10.5))
def test_strictly_increasing_under_scaling(vals, t1, dt, alpha):
    assume(np.any(vals > 1e-3))
    p = FunctionalParams(alpha, 0.3)
    v = _profile(vals)
    assert F_disk(p, v.scaled(t1 + dt)) > F_disk(p, v.scaled(t1))


@settings(max_examples=60, deadline=None)
@given(vals=profile_values, b1=st.floats(0, 1.5), db=st.floats(0, 0.4))
def test_nondecreasing_in_beta(vals, b1, db):
    v = _profile(vals)
    lo = F_disk(FunctionalParams(1.0, b1), v)
    hi = F_disk(FunctionalParams(1.0, b1 + db), v)
    assert lo <= hi * (1 + 1e-13)


# -- Moser family ------------------------------------------------------------------

def test_moser_closed_form_values():
    assert moser_value(0.5, 0.3) == pytest.approx(math.sqrt(math.log(2)) / math.sqrt(2 * math.pi), rel=1e-15)
    assert moser_value(0.5, 0.0) == moser_value(0.5, 0.5)
    v = moser_profile(0.5, 256, normalize=False)
    inner = v.grid <= 0.5
    np.testing.assert_allclose(v.values[inner], math.sqrt(math.log(2) / (2 * math.pi)), rtol=1e-15)
    assert moser_profile(0.1).values[-1] == 0
    assert moser_profile(0.1)(1.0) == 0


def test_moser_profile_shape():
    v = moser_profile(1e-3)
    assert np.all(np.diff(v.values) <= 0)
    assert 1e-3 in v.grid
    assert moser_grid(1e-3, 1024).size == 1025


def test_moser_profile_errors():
    for rho in (0.0, 1.0, -0.1, 2.0):
        with pytest.raises(ValueError):
            moser_profile(rho)
    with pytest.raises(ValueError):
        moser_profile(0.1, 32)


@pytest.mark.parametrize("rho,eps", [(1e-3, 0.1), (1e-4, 0.5), (0.01, 0.01), (0.2, 0.9)])
def test_moser_concentration_tail(rho, eps):
    expected = math.log(1 / eps) / math.log(1 / rho)
    assert concentration_tail(moser_profile(rho), eps) == pytest.approx(expected, abs=1e-6)


def test_concentration_tail_examples():
    assert concentration_tail(RadialProfile.zero(), 0.3) == 0
    assert concentration_tail(CONE, 0.5) == pytest.approx(3 * math.pi / 4, rel=1e-15)
    with pytest.raises(ValueError):
        concentration_tail(CONE, 1.0)
    with pytest.raises(ValueError):
        concentration_tail(CONE, 0.0)


def test_moser_tail_vanishes_at_fixed_eps():
    tails = [concentration_tail(moser_profile(rho), 0.1) for rho in (1e-2, 1e-4, 1e-8, 1e-16)]
    assert all(b < a for a, b in zip(tails, tails[1:]))
    assert tails[-1] < 0.07


@pytest.mark.parametrize("rho", [0.1, 1e-2, 1e-4])
def test_moser_l2_norm_closed_form(rho):
    L = math.log(1 / rho)
    exact = (1 - rho ** 2) / (4 * L) - rho ** 2 / 2
    assert l2_norm_sq_radial(moser_profile(rho)) == pytest.approx(exact, rel=1e-5)


def test_moser_l2_norm_tends_to_zero():
    norms = [l2_norm_sq_radial(moser_profile(rho)) for rho in (1e-2, 1e-4, 1e-8)]
    assert norms[0] > norms[1] > norms[2]


# -- concentration level -----------------------------------------------------------

def test_richardson_recovers_quadratic():
    x = np.array([0.4, 0.2, 0.1])
    assert richardson_zero(x, 3 - 2 * x + 5 * x ** 2) == pytest.approx(3.0, rel=1e-14)


def test_f_delta_single_radius_has_no_limit():
    est = f_delta_estimate(FunctionalParams(4 * math.pi), [0.5], grid_size=1024)
    assert len(est.values) == 1
    assert est.limit is None


def test_f_delta_input_checks():
    p = FunctionalParams(4 * math.pi)
    with pytest.raises(ValueError):
        f_delta_estimate(p, [])
    with pytest.raises(ValueError):
        f_delta_estimate(p, [1e-2, 1e-2, 1e-3])


def test_f_delta_subcritical_tends_to_zero():
    est = f_delta_estimate(FunctionalParams(math.pi, 0.5), [1e-2, 1e-4, 1e-8, 1e-16], grid_size=4096)
    assert all(b < a for a, b in zip(est.values, est.values[1:]))
    # the decay is only like 1/log(1/rho): F(m_rho) halves when L doubles
    ratios = [b / a for a, b in zip(est.values, est.values[1:])]
    assert all(0.4 < q < 0.5 for q in ratios[1:])
    assert est.limit == pytest.approx(0.0, abs=5e-3)


@pytest.mark.parametrize("key", list(oracles.MOSER_LIMIT))
def test_f_delta_critical_finite_positive(key):
    est = f_delta_estimate(FunctionalParams(*key), (1e-4, 1e-8, 1e-16, 1e-32))
    assert 0 < est.limit < est.values[-1]
    assert est.limit == pytest.approx(oracles.MOSER_LIMIT[key], rel=1e-9)


def test_f_delta_value_correspondence_across_the_critical_line():
    # substituting s = r^{(2-beta)/2} maps (alpha, beta) to (2 alpha/(2-beta), 0)
    # and m_rho to m_{rho^{(2-beta)/2}} up to the constant 2/(2-beta)
    a = F_disk(FunctionalParams(2 * math.pi, 1.0), moser_profile(1e-4, 16384))
    b = F_disk(FunctionalParams(4 * math.pi, 0.0), moser_profile(1e-2, 16384))
    assert a == pytest.approx(2 * b, rel=1e-3)
