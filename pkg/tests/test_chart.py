import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from bray_iso.chart import (
    ChartParams,
    OdeSpec,
    RadialProfile,
    chart_hawking_mass,
    chart_params,
    cone_scalar_curvature,
    exterior_profile,
    first_integral,
    gap_threshold,
    inner_area_minimum,
    solve_w,
    to_chart,
    to_chart_radius,
    u_derivative,
    u_gap_bound,
    u_profile,
)
from bray_iso.errors import DomainError, NumericError
from bray_iso.schwarzschild import FOUR_PI, sphere_area, sphere_mean_curvature, volume_to


@pytest.fixture(scope="module")
def chart10():
    return chart_params(1, 10)


@pytest.fixture(scope="module")
def w10(chart10):
    return solve_w(chart10)


# -- gluing data -------------------------------------------------------------
def test_chart_params_values(chart10):
    c, alpha = oracles.chart_c_alpha(1, 10)
    assert chart10.c == pytest.approx(c, rel=1e-13)
    assert chart10.alpha == pytest.approx(alpha, rel=1e-13)
    # the quoted 11.3989 is a truncated display of 11.39901
    assert chart10.c == pytest.approx(11.3989, abs=1.5e-4)
    assert chart10.alpha == pytest.approx(0.93546, abs=1e-5)
    assert chart10.V0 == pytest.approx(volume_to(1, 10) - FOUR_PI * c**3 / 3, rel=1e-12)


def test_chart_params_asymptotics():
    res_alpha, res_c = [], []
    for r in (1e2, 2e2, 1e3, 2e3):
        ch = chart_params(1, r)
        res_alpha.append(r * (r * (1 - ch.alpha) - 2 / 3))
        res_c.append(r * r * (ch.c**3 / r**3 - 1 - 4 / r))
    # both rescaled residuals settle to constants
    assert np.ptp(res_alpha) < 0.05 * max(map(abs, res_alpha))
    assert np.ptp(res_c) < 0.05 * max(map(abs, res_c))


def test_chart_params_rejects_horizon():
    with pytest.raises(DomainError):
        chart_params(1, 0.5)


@given(st.floats(0.1, 10.0), st.floats(1.01, 1e4))
def test_chart_matches_sphere_data(m, x):
    r = x * m / 2
    ch = chart_params(m, r)
    assert 0 < ch.alpha < 1
    # in alpha**-2 ds**2 + alpha s**2 g_S2 the sphere {c} x S2 has area
    # 4 pi alpha c**2 and mean curvature 2 alpha / c
    assert FOUR_PI * ch.alpha * ch.c**2 == pytest.approx(sphere_area(m, r), rel=1e-12)
    assert 2 * ch.alpha / ch.c == pytest.approx(sphere_mean_curvature(m, r), rel=1e-12)


# -- u_c ----------------------------------------------------------------------
def test_u_is_alpha_on_cone_and_continuous(chart10):
    ch = chart10
    assert abs(u_profile(ch, ch.c) - ch.alpha) <= 1e-9
    assert abs(u_profile(ch, ch.c * (1 + 1e-12)) - ch.alpha) <= 1e-9
    assert np.all(u_profile(ch, np.linspace(0.1, ch.c, 20)) == ch.alpha)


def test_u_derivative_vanishes_at_c_linearly(chart10):
    ch = chart10
    gaps = []
    for h in (1e-2, 1e-3, 1e-4):
        fd = oracles.central_difference(lambda s: u_profile(ch, s), ch.c, h)
        gaps.append(abs(fd))
    ratios = np.array(gaps[:-1]) / np.array(gaps[1:])
    assert np.all((ratios > 5) & (ratios < 20))


def test_u_derivative_matches_finite_differences(chart10):
    ch = chart10
    s = np.array([1.5, 3.0, 10.0, 50.0]) * ch.c
    h = 1e-5 * s
    fd = (u_profile(ch, s + h) - u_profile(ch, s - h)) / (2 * h)
    assert np.allclose(u_derivative(ch, s), fd, rtol=1e-6)


def test_u_gap_example_r100():
    ch = chart_params(1, 100)
    assert u_profile(ch, 2 * ch.c) - ch.alpha >= 0.15625 * 2 / (3 * ch.c)


@given(st.floats(0.1, 5.0), st.floats(1.2, 2e3))
def test_u_monotone_and_in_range(m, x):
    ch = chart_params(m, x * m / 2)
    s = ch.c * np.geomspace(1 + 1e-6, 1e3, 400)
    u = u_profile(ch, s)
    assert np.all(np.diff(u) > 0)
    assert np.all((u > ch.alpha) & (u < 1))


def test_u_tends_to_one(chart10):
    assert 1 - u_profile(chart10, 1e8 * chart10.c) < 1e-7


# -- cone curvature -----------------------------------------------------------------
def test_cone_scalar_curvature():
    assert cone_scalar_curvature(0.5, 1.0) == pytest.approx(3.5)
    assert cone_scalar_curvature(1 - 1e-12, 1.0) < 1e-11
    with pytest.raises(DomainError):
        cone_scalar_curvature(1.0, 1.0)
    with pytest.raises(DomainError):
        cone_scalar_curvature(0.5, 0.0)


@given(st.floats(1e-3, 1 - 1e-9), st.floats(1e-3, 1e3))
def test_cone_curvature_homogeneity(alpha, s):
    assert cone_scalar_curvature(alpha, 2 * s) == pytest.approx(cone_scalar_curvature(alpha, s) / 4, rel=1e-14)


# -- gap bound -----------------------------------------------------------------
@pytest.mark.parametrize("r", [1e2, 1e3])
@pytest.mark.parametrize("tau", [1.5, 2.0, 4.0])
def test_gap_bound_holds(r, tau):
    rep = u_gap_bound(chart_params(1, r), tau)
    assert rep["holds"] and rep["ratio"] >= 1


def test_gap_bound_degenerates_at_tau_one(chart10):
    rep = u_gap_bound(chart10, 1 + 1e-6)
    assert rep["rhs"] < 1e-12 and abs(rep["lhs"]) < 1e-8
    with pytest.raises(DomainError):
        u_gap_bound(chart10, 1.0)


def test_gap_ratio_tends_to_two():
    # the displayed coefficient is half of the leading-order one
    ratios = [u_gap_bound(chart_params(1, r), 2.0)["ratio"] for r in (1e1, 1e2, 1e3, 1e4)]
    assert np.all(np.diff(ratios) < 0)
    assert abs(ratios[-1] - 2) < 1e-3


def test_gap_threshold_reports_radius():
    rep = gap_threshold(1, 2.0, [10, 100, 1000])
    assert rep["threshold_r"] == 10.0
    assert len(rep["rows"]) == 3


# -- first integral ----------------------------------------------------------------
def test_first_integral_conserved(chart10):
    s = np.linspace(chart10.c, 100 * chart10.c, 1001)[1:]
    trace = first_integral(exterior_profile(chart10, s))
    assert trace.max_deviation / abs(trace.median) <= 1e-7
    assert trace.max_deviation == pytest.approx(np.max(np.abs(trace.values - np.median(trace.values))))


@given(st.floats(0.2, 5.0), st.floats(1.5, 1e3))
def test_first_integral_conserved_property(m, x):
    ch = chart_params(m, x * m / 2)
    s = ch.c * np.geomspace(1 + 1e-9, 50, 200)
    assert first_integral(exterior_profile(ch, s)).relative_deviation <= 1e-7


def test_first_integral_value_is_twice_mass(chart10):
    # constancy is the asserted property; the normalization is checked separately
    s = chart10.c * np.geomspace(1.01, 10, 50)
    assert first_integral(exterior_profile(chart10, s)).median == pytest.approx(2.0, rel=1e-10)


def test_first_integral_of_flat_profile_vanishes():
    s = np.linspace(1, 10, 50)
    prof = RadialProfile(grid=s, values=np.ones_like(s), derivs=np.zeros_like(s), kind="exterior_u")
    assert np.allclose(first_integral(prof).values, 0, atol=1e-13)


def test_first_integral_grid_independent(chart10):
    coarse = chart10.c * np.geomspace(1.01, 10, 50)
    fine = chart10.c * np.geomspace(1.01, 10, 5000)
    a = first_integral(exterior_profile(chart10, coarse)).median
    b = first_integral(exterior_profile(chart10, fine)).median
    assert a == pytest.approx(b, rel=1e-10)


def test_profile_validation():
    with pytest.raises(DomainError):
        RadialProfile(grid=[], values=[], derivs=[], kind="exterior_u")
    with pytest.raises(DomainError):
        RadialProfile(grid=[1.0, 1.0], values=[1, 1], derivs=[0, 0], kind="exterior_u")
    with pytest.raises(DomainError):
        RadialProfile(grid=[1.0, 2.0], values=[1, 1], derivs=[0, 0], kind="other")


# -- interior w ---------------------------------------------------------------------
def test_w_initial_conditions(chart10, w10):
    w, dw = w10.evaluate(chart10.c)
    assert w == pytest.approx(1.0, abs=1e-14)
    assert abs(dw) < 1e-12
    assert w10.values[-1] == pytest.approx(1.0, abs=1e-14)


def test_w_above_one_and_decreasing(w10):
    assert np.all(w10.values[:-1] > 1)
    assert np.all(w10.derivs[:-1] < 0)
    assert np.all(np.diff(w10.values) < 0)


def test_w_matches_euler_solution(chart10, w10):
    w, dw = oracles.euler_w(chart10.alpha, chart10.c, w10.grid)
    assert np.allclose(w10.values, w, rtol=1e-8)
    assert np.allclose(w10.derivs, dw, rtol=1e-7)


def test_w_blowup_point_matches_euler_solution(chart10, w10):
    s0 = w10.meta["s0"]
    w, _ = oracles.euler_w(chart10.alpha, chart10.c, s0)
    assert w == pytest.approx(1e6, rel=1e-6)


def test_w_small_coupling_limit():
    devs = []
    for r in (1e3, 1e4):
        ch = chart_params(1, r)
        prof = solve_w(ch)
        k = prof.grid >= 0.1 * ch.c
        devs.append(np.max(prof.values[k] - 1) / (1 - ch.alpha**3))
    # deviation over a fixed relative range scales with (1 - alpha**3)
    assert devs[0] == pytest.approx(devs[1], rel=0.05)


def test_w_failure_carries_partial_profile(chart10):
    with pytest.raises(NumericError) as info:
        solve_w(chart10, OdeSpec(s_min_ratio=0.5))
    part = info.value.partial
    assert part is not None and part.kind == "interior_w"
    assert part.grid[0] == pytest.approx(0.5 * chart10.c)


def test_ode_spec_validation():
    with pytest.raises(DomainError):
        OdeSpec(rtol=0)
    with pytest.raises(DomainError):
        OdeSpec(blowup=0.5)


# -- chart Hawking mass -------------------------------------------------------------
def test_chart_hawking_mass_at_gluing_sphere(chart10, w10):
    assert chart_hawking_mass(chart10, w10, chart10.c) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("m,r", [(1, 10), (2, 30), (0.5, 100)])
def test_chart_hawking_mass_constant(m, r):
    ch = chart_params(m, r)
    prof = solve_w(ch)
    hm = chart_hawking_mass(ch, prof, prof.grid)
    assert np.max(np.abs(hm - m)) / m <= 1e-5


def test_chart_hawking_mass_flat_cone():
    ch = ChartParams(m=1.0, r=1.0, c=5.0, alpha=1.0, V0=0.0)
    s = np.linspace(0.5, 5.0, 20)
    flat = RadialProfile(grid=s, values=np.ones_like(s), derivs=np.zeros_like(s), kind="interior_w")
    assert np.allclose(chart_hawking_mass(ch, flat, s), 0.0, atol=1e-14)


def test_chart_hawking_mass_outside_domain(chart10, w10):
    with pytest.raises(DomainError):
        chart_hawking_mass(chart10, w10, 2 * chart10.c)


# -- inner minimum -----------------------------------------------------------------
@pytest.mark.parametrize("m", [1.0, 2.0])
def test_inner_area_minimum_is_horizon(m):
    ch = chart_params(m, 10 * m)
    rep = inner_area_minimum(ch, solve_w(ch))
    assert rep["conclusive"]
    assert rep["area_min"] == pytest.approx(16 * np.pi * m * m, rel=1e-2)


def test_inner_area_minimum_refines_monotonically(chart10):
    errs = []
    for rtol in (1e-8, 1e-9, 1e-10):
        rep = inner_area_minimum(chart10, solve_w(chart10, OdeSpec(rtol=rtol, atol=rtol * 1e-2)))
        errs.append(abs(rep["area_min"] - 16 * np.pi))
    assert errs[1] <= errs[0] and errs[2] <= errs[1]


def test_inner_area_minimum_inconclusive_when_truncated(chart10):
    prof = solve_w(chart10, OdeSpec(blowup=1.5))
    assert not inner_area_minimum(chart10, prof)["conclusive"]


# -- transfer into the chart ---------------------------------------------------------
def test_to_chart_radius_at_gluing_sphere(chart10):
    assert to_chart_radius(chart10, 10.0) == pytest.approx(chart10.c, rel=1e-9)
    with pytest.raises(DomainError):
        to_chart_radius(chart10, 9.0)


def test_sphere_tau_r_maps_near_tau_c():
    devs = []
    for r in (1e2, 1e3, 1e4):
        ch = chart_params(1, r)
        devs.append(abs(to_chart_radius(ch, 2 * r) / (2 * ch.c) - 1))
    assert devs[0] > devs[1] > devs[2]
    assert devs[2] < 1e-3


def test_to_chart_preserves_volume(chart10):
    r1, r2 = 12.0, 30.0
    s1, s2 = to_chart_radius(chart10, np.array([r1, r2]))
    shell_flat = FOUR_PI * (s2**3 - s1**3) / 3
    assert shell_flat == pytest.approx(oracles.volume_to(1, r2) - oracles.volume_to(1, r1), rel=1e-8)


def test_to_chart_keeps_directions(chart10):
    pts = np.array([[15.0, 0, 0], [0, -20.0, 0], [3.0, 4.0, 12.0]])
    s, dirs = to_chart(pts, chart10)
    assert np.allclose(dirs, pts / np.linalg.norm(pts, axis=1)[:, None])
    assert np.allclose(s, to_chart_radius(chart10, np.linalg.norm(pts, axis=1)))
