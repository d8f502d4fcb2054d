import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bray_iso.deficit import (
    CHAIN_TERMS,
    bray_chain,
    deficit_coefficient,
    perturbed_deficit_check,
    residual_trend,
    schwarzschild_deficit_check,
    theorem_step_audit,
    two_ball_region,
    with_unit_ball,
)
from bray_iso.errors import DomainError
from bray_iso.metrics import PerturbationSpec, PerturbedMetric, SchwarzschildMetric
from bray_iso.regions import BallUnion, CenteredBall, OffsetBall, RadialGraph, SurfaceQuadrature, region_volume
from bray_iso.schwarzschild import sphere_area

Q = SurfaceQuadrature(n_theta=64, n_radial=48)


# -- exact Schwarzschild deficit ---------------------------------------------------
@pytest.mark.parametrize("r", [2.0, 10.0, 80.0])
def test_centered_ball_is_equality_case(r):
    rep = schwarzschild_deficit_check(1, CenteredBall(r), 2.0, Q)
    assert rep.eta == 0.0
    assert rep.bound_rhs == pytest.approx(sphere_area(1, r), rel=1e-12)
    assert abs(rep.margin) <= 10 * rep.error
    assert rep.holds


def test_two_ball_margin_positive():
    region = BallUnion((OffsetBall((40.0, 0, 0), 10.0),))
    rep = schwarzschild_deficit_check(1, region, 2.0)
    assert rep.holds and rep.margin > 0
    assert rep.eta > 0


def test_offset_sweep_margins_positive():
    # the margin drifts slightly down as d grows (recorded, not a theorem)
    margins = []
    for d in 10.0 * 2.0 ** np.arange(6):
        rep = schwarzschild_deficit_check(1, BallUnion((OffsetBall((d, 0, 0), 5.0),)), 2.0, Q)
        margins.append(rep.margin)
        assert rep.holds and rep.margin > 0
    assert np.ptp(margins[2:]) < 0.05 * margins[-1]


def test_deficit_rejects_bad_tau():
    with pytest.raises(DomainError):
        schwarzschild_deficit_check(1, CenteredBall(5.0), 1.0, Q)


def test_deficit_coefficient():
    assert deficit_coefficient(1.0, 2.0, 1.0, 24.0) == pytest.approx(np.pi / 96)


def test_reports_are_deterministic():
    region = two_ball_region(20.0)
    a = schwarzschild_deficit_check(1, region, 2.0, Q).to_dict()
    b = schwarzschild_deficit_check(1, region, 2.0, Q).to_dict()
    assert a == b


# -- chain ----------------------------------------------------------------------
def test_chain_equality_on_gluing_sphere():
    rep = bray_chain(1, CenteredBall(10.0), q=Q)
    assert rep.all_ok
    vals = [rep.terms[k] for k in CHAIN_TERMS]
    assert np.ptp(vals) <= 1e-8 * vals[0]


def test_chain_on_doubled_sphere():
    rep = bray_chain(1, CenteredBall(20.0), r_chart=10.0, q=Q)
    assert rep.all_ok
    assert rep.terms["gap_term"] > sphere_area(1, 10.0)
    assert rep.gap_integral > 0


@pytest.mark.parametrize(
    "region",
    [
        BallUnion((OffsetBall((60.0, 0, 0), 12.0),)),
        BallUnion((CenteredBall(12.0), OffsetBall((40.0, 0, 0), 6.0))),
        RadialGraph.from_harmonics(15.0, [(2, 0, 0.1), (3, 1, 0.05)], n_theta=32),
    ],
)
def test_euclidean_step_for_volume_matched_surfaces(region):
    try:
        rep = bray_chain(1, region, q=Q)
    except DomainError:
        # the boundary dips inside the matched sphere; use the largest admissible chart
        rep = bray_chain(1, region, r_chart=10.0, q=Q)
    assert rep.all_ok
    if rep.r_chart == pytest.approx(SchwarzschildMetric(1).matched_radius(rep.V)):
        assert rep.euclidean_area >= rep.euclidean_sphere * (1 - 1e-12)


@given(st.floats(25.0, 200.0), st.floats(2.0, 15.0), st.floats(0, np.pi))
@settings(max_examples=10)
def test_chain_holds_term_by_term(d, rho, angle):
    center = (d * np.cos(angle), d * np.sin(angle), 0.0)
    region = BallUnion((CenteredBall(10.0), OffsetBall(center, rho)))
    rep = bray_chain(1, region, r_chart=10.0, q=Q)
    assert all(rep.step_ok)


def test_chain_rejects_boundary_inside_chart():
    with pytest.raises(DomainError):
        bray_chain(1, two_ball_region(20.0), q=Q)
    with pytest.raises(DomainError):
        bray_chain(1, CenteredBall(10.0), r_chart=12.0, q=Q)


# -- perturbed deficit -----------------------------------------------------------
def test_zero_perturbation_reduces_to_schwarzschild():
    region = BallUnion((OffsetBall((40.0, 0, 0), 10.0),))
    a = schwarzschild_deficit_check(1, region, 2.0, Q)
    b = perturbed_deficit_check(PerturbationSpec(0.0), region, 2.0, q=Q)
    assert b.area_lhs == pytest.approx(a.area_lhs, rel=1e-13)
    assert b.eta == pytest.approx(a.eta, rel=1e-12)
    # identical geometry, constants 24 and 300
    slack = deficit_coefficient(1.0, 2.0, a.eta, 24.0) - deficit_coefficient(1.0, 2.0, a.eta, 300.0)
    assert b.margin - a.margin == pytest.approx(slack * a.r, rel=1e-9)


@given(st.floats(8.0, 120.0), st.floats(1.0, 20.0))
@settings(max_examples=10)
def test_weaker_constant_never_fails_first(d, rho):
    d = max(d, rho + 1.0)
    region = BallUnion((OffsetBall((d, 0, 0), rho),))
    a = schwarzschild_deficit_check(1, region, 2.0, Q)
    b = perturbed_deficit_check(PerturbationSpec(0.0), region, 2.0, q=Q)
    if a.holds:
        assert b.holds


@pytest.mark.parametrize("r", [50.0, 100.0, 200.0])
def test_perturbed_deficit_holds_for_bump(r):
    pert = PerturbationSpec(1.0, cutoff=10.0)
    R = r * (8 / 9) ** (1 / 3)
    rep = perturbed_deficit_check(pert, two_ball_region(R), 2.0, q=Q)
    assert rep.holds and rep.margin > 0
    assert rep.off_center


def test_theta_violation_is_reported_not_raised():
    pert = PerturbationSpec(1.0, cutoff=10.0)
    rep = perturbed_deficit_check(pert, two_ball_region(30.0), 2.0, Theta=1.0, q=Q)
    assert not rep.theta_ok and not rep.preconditions_ok


# -- theorem steps -------------------------------------------------------------
def test_unit_ball_union():
    region = BallUnion((OffsetBall((40.0, 0, 0), 10.0),))
    tilde = with_unit_ball(region, 0.5)
    assert isinstance(tilde, BallUnion) and len(tilde.balls) == 2
    assert with_unit_ball(CenteredBall(5.0), 0.5) == CenteredBall(5.0)
    with pytest.raises(DomainError):
        with_unit_ball(BallUnion((OffsetBall((1.5, 0, 0), 1.0),)), 0.5)


def test_audit_vanishes_without_perturbation():
    rep = theorem_step_audit(PerturbationSpec(0.0), two_ball_region(40.0), q=Q)
    for key in ("c", "d", "f"):
        assert rep.residuals[key] == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("cutoff", [10.0, None])
def test_audit_residuals_bounded_along_doubling(cutoff):
    pert = PerturbationSpec(1.0, cutoff=cutoff)
    reps = [theorem_step_audit(pert, two_ball_region(r * (8 / 9) ** (1 / 3)), q=Q) for r in (50, 100, 200, 400)]
    for key in ("c", "d", "e", "f"):
        assert residual_trend([rep.residuals[key] for rep in reps])["bounded"], key


def test_volume_shift_antisymmetric_at_first_order():
    # V_g - V_gm is odd in the perturbation up to O(C**2)
    region = two_ball_region(20.0)
    gm = SchwarzschildMetric(1.0)
    v0 = region_volume(region, gm, Q)
    ratios = []
    for C in (0.1, 0.01):
        plus = region_volume(region, PerturbedMetric(PerturbationSpec(C)), Q) - v0
        minus = region_volume(region, PerturbedMetric(PerturbationSpec(-C)), Q) - v0
        ratios.append(abs(plus + minus) / abs(plus))
    assert ratios[1] < 0.2 * ratios[0]
    assert ratios[1] < 1e-2


def test_residual_trend():
    assert residual_trend([1.0, 0.5, 0.25])["bounded"]
    assert not residual_trend([1.0, 2.0, 4.0])["bounded"]
    assert residual_trend([0.0, 1e-9])["bounded"]
