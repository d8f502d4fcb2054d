"""Effective volume comparison: area deficits of off-center regions.

Three checks are provided.

* :func:`schwarzschild_deficit_check` evaluates
  ``|dOmega| >= |S_r| + (eta m pi / 24)(1 - 1/tau)**2 r`` in exact Schwarzschild.
* :func:`bray_chain` evaluates every quantity in the chain of inequalities
  obtained by transplanting a boundary into the volume-preserving chart.
* :func:`perturbed_deficit_check` and :func:`theorem_step_audit` do the same
  for metrics ``C0``-close to Schwarzschild, including the intermediate
  comparisons used to pass from ``g`` to ``g_m``.

Every comparison carries a numeric error estimate obtained from a
half-resolution rerun, floored at a small multiple of roundoff.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .chart import chart_params, inner_area_minimum, solve_w, u_profile
from .errors import DomainError
from .metrics import ChartMetric, PerturbationSpec, PerturbedMetric, SchwarzschildMetric
from .regions import (
    DEFAULT_SURFACE_QUADRATURE,
    BallUnion,
    CenteredBall,
    OffsetBall,
    RadialGraph,
    Region,
    SurfaceQuadrature,
    _members,
    _resampled,
    boundary_area,
    boundary_area_estimate,
    boundary_pieces,
    piece_to_chart,
    region_volume,
    region_volume_estimate,
)
from .schwarzschild import FOUR_PI, as_mass, profile_area, radius_for_volume, sphere_area, sphere_mean_curvature, volume_to

ROUNDOFF = 1e-12


def deficit_coefficient(m: float, tau: float, eta: float, denominator: float) -> float:
    """``eta m pi / denominator * (1 - 1/tau)**2``: the coefficient of ``r`` in the bounds."""
    return eta * m * np.pi / denominator * (1.0 - 1.0 / tau) ** 2


@dataclass(frozen=True)
class DeficitReport:
    V: float
    r: float
    tau: float
    eta: float
    area_lhs: float
    bound_rhs: float
    margin: float
    holds: bool
    error: float
    constant: float = 24.0
    below_threshold: bool = False
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def _area_volume_errors(region, metric, q, outside=None):
    area, e_area = boundary_area_estimate(region, metric, q)
    V, e_V = region_volume_estimate(region, metric, q)
    out = None
    if outside is not None:
        out = boundary_area(region, metric, q, outside=outside)
    return area, e_area, V, e_V, out


def schwarzschild_deficit_check(
    m, region: Region, tau: float, q: SurfaceQuadrature = DEFAULT_SURFACE_QUADRATURE
) -> DeficitReport:
    """Compare ``|dOmega|`` with ``|S_r| + (eta m pi/24)(1 - 1/tau)**2 r`` under ``g_m``.

    ``r`` is the radius of the centered ball with the same horizon-relative
    volume and ``eta`` the fraction of ``|S_r|`` carried by the boundary outside
    ``B_{tau r}``.  ``holds`` allows for the quadrature error estimate.
    """
    mass = as_mass(m)
    if not tau > 1:
        raise DomainError("tau must exceed 1")
    metric = SchwarzschildMetric(mass)
    area, e_area = boundary_area_estimate(region, metric, q)
    V, e_V = region_volume_estimate(region, metric, q)
    if not V > 0:
        raise DomainError("degenerate region: zero volume")
    r = float(radius_for_volume(mass, V))
    sr = float(sphere_area(mass, r))
    outside = boundary_area(region, metric, q, outside=tau * r)
    eta = outside / sr
    bound = sr + deficit_coefficient(mass.m, tau, eta, 24.0) * r
    # dA_m/dV = H propagates the volume error into the bound
    err = e_area + float(sphere_mean_curvature(mass, r)) * e_V + ROUNDOFF * area
    margin = area - bound
    return DeficitReport(
        V=V,
        r=r,
        tau=float(tau),
        eta=eta,
        area_lhs=area,
        bound_rhs=bound,
        margin=margin,
        holds=bool(margin >= -err),
        error=err,
        constant=24.0,
        below_threshold=bool(r < 1.0),
    )


# -- Bray chain ------------------------------------------------------------
CHAIN_TERMS = (
    "A_gm",
    "A_gmc",
    "int_u_dAdelta",
    "int_ugap_plus_alphaAdelta",
    "alpha_Adelta_sphere",
    "A_gm_Sr",
    "gap_term",
)
# relation between consecutive terms
CHAIN_RELATIONS = (">=", ">=", "==", ">=", "==", ">=")


@dataclass(frozen=True)
class ChainReport:
    terms: dict
    step_ok: list
    relations: tuple
    errors: dict
    r_chart: float
    c: float
    alpha: float
    V: float
    gap_integral: float
    euclidean_area: float
    euclidean_sphere: float

    @property
    def all_ok(self) -> bool:
        return all(self.step_ok)

    def to_dict(self):
        d = asdict(self)
        d["all_ok"] = self.all_ok
        return d


def _chain_terms(m, region, r_chart, q):
    mass = as_mass(m)
    a = mass.horizon_radius
    chart = chart_params(mass, r_chart)
    pieces = boundary_pieces(region, a, q)
    horizon_s = None
    if any(p.label == "horizon" for p in pieces):
        horizon_s = inner_area_minimum(chart, solve_w(chart))["s_min"]
    for p in pieces:
        if p.label != "horizon" and np.min(np.linalg.norm(p.X, axis=-1)) < r_chart * (1 - 1e-12):
            raise DomainError(
                "boundary enters the chart's cone region; every non-horizon component must satisfy |x| >= r"
            )
    gm = SchwarzschildMetric(mass)
    cm = ChartMetric(chart)
    A_gm = A_gmc = int_u = A_delta = gap_c = 0.0
    for p in pieces:
        A_gm += float(np.sum(p.w * gm.area_density(p.X, p.T1, p.T2)))
        cp = piece_to_chart(p, chart, horizon_s)
        s = np.linalg.norm(cp.X, axis=-1)
        u = np.asarray(u_profile(chart, s))
        dA_delta = cp.w * np.linalg.norm(np.cross(cp.T1, cp.T2), axis=-1)
        dA_c = cp.w * cm.area_density(cp.X, cp.T1, cp.T2)
        A_gmc += float(np.sum(dA_c))
        int_u += float(np.sum(u * dA_delta))
        A_delta += float(np.sum(dA_delta))
        gap_c += float(np.sum((u - chart.alpha) * dA_c))
    alpha = chart.alpha
    gap = int_u - alpha * A_delta
    sphere_delta = FOUR_PI * chart.c**2
    A_Sr = float(sphere_area(mass, r_chart))
    values = {
        "A_gm": A_gm,
        "A_gmc": A_gmc,
        "int_u_dAdelta": int_u,
        "int_ugap_plus_alphaAdelta": gap + alpha * A_delta,
        "alpha_Adelta_sphere": gap + alpha * sphere_delta,
        "A_gm_Sr": gap + A_Sr,
        "gap_term": alpha**2 * gap_c + A_Sr,
    }
    return chart, values, gap, A_delta, sphere_delta


def bray_chain(
    m,
    region: Region,
    r_chart: float | None = None,
    q: SurfaceQuadrature = DEFAULT_SURFACE_QUADRATURE,
) -> ChainReport:
    """Evaluate the chain ``A_gm >= A_gmc >= int u dA_delta = ... >= alpha**2 int (u-alpha) dA_gmc + |S_r|``.

    The chart is built around ``S_{r_chart}`` (default: the centered sphere of
    equal volume).  The region must enclose at least that volume and every
    boundary component other than the horizon must lie outside ``S_{r_chart}``.
    A horizon component is transplanted to the minimal sphere of the interior
    copy of Schwarzschild.
    """
    mass = as_mass(m)
    V = region_volume(region, SchwarzschildMetric(mass), q)
    if not V > 0:
        raise DomainError("degenerate region: zero volume")
    r_match = float(radius_for_volume(mass, V))
    r = r_match if r_chart is None else float(r_chart)
    if r > r_match * (1 + 1e-9):
        raise DomainError("the region must enclose at least the volume of the chart sphere")
    chart, vals, gap, A_delta, sphere_delta = _chain_terms(mass, region, r, q)
    cq = q.coarsened()
    _, coarse, *_ = _chain_terms(mass, _resampled(region, cq), r, cq)
    errors = {k: abs(vals[k] - coarse[k]) + ROUNDOFF * abs(vals[k]) for k in CHAIN_TERMS}
    ok = []
    for (k1, k2), rel in zip(zip(CHAIN_TERMS[:-1], CHAIN_TERMS[1:]), CHAIN_RELATIONS):
        tol = errors[k1] + errors[k2]
        diff = vals[k1] - vals[k2]
        ok.append(bool(abs(diff) <= tol) if rel == "==" else bool(diff >= -tol))
    return ChainReport(
        terms=vals,
        step_ok=ok,
        relations=CHAIN_RELATIONS,
        errors=errors,
        r_chart=r,
        c=chart.c,
        alpha=chart.alpha,
        V=V,
        gap_integral=gap,
        euclidean_area=A_delta,
        euclidean_sphere=sphere_delta,
    )


# -- perturbed metrics -------------------------------------------------------
def area_growth_constant(region: Region, metric, q: SurfaceQuadrature = DEFAULT_SURFACE_QUADRATURE) -> float:
    """``sup_{sigma >= 1} |B_sigma cap dOmega| / sigma**2`` from sorted quadrature nodes."""
    pieces = boundary_pieces(region, metric.horizon_radius, q)
    rad = np.concatenate([np.linalg.norm(p.X, axis=-1).ravel() for p in pieces])
    dA = np.concatenate([(p.w * metric.area_density(p.X, p.T1, p.T2)).ravel() for p in pieces])
    order = np.argsort(rad)
    rad, cum = rad[order], np.cumsum(dA[order])
    inside_one = cum[rad <= 1.0]
    best = float(inside_one[-1]) if inside_one.size else 0.0
    far = rad > 1.0
    if np.any(far):
        best = max(best, float(np.max(cum[far] / rad[far] ** 2)))
    return best


@dataclass(frozen=True)
class PerturbedDeficitReport:
    V: float
    r: float
    tau: float
    eta: float
    eta_measured: float
    area_lhs: float
    bound_rhs: float
    margin: float
    holds: bool
    error: float
    off_center: bool
    theta_ratio: float
    theta_growth: float
    theta_ok: bool
    preconditions_ok: bool
    constant: float = 300.0

    def to_dict(self):
        return asdict(self)


def perturbed_deficit_check(
    pert: PerturbationSpec,
    region: Region,
    tau: float,
    eta: float | None = None,
    Theta: float | None = None,
    q: SurfaceQuadrature = DEFAULT_SURFACE_QUADRATURE,
) -> PerturbedDeficitReport:
    """Compare ``|dOmega|_g`` with ``|S_r|_g + (eta m pi/300)(1 - 1/tau)**2 r`` for ``g = g_m + h``.

    ``eta`` defaults to the measured off-center fraction.  The hypotheses
    ``|dOmega|**(1/2) V**(-1/3) <= Theta`` and ``|B_sigma cap dOmega| <= Theta sigma**2``
    are evaluated and reported; a violation does not raise.
    """
    if not tau > 1:
        raise DomainError("tau must exceed 1")
    g = PerturbedMetric(pert)
    area, e_area = boundary_area_estimate(region, g, q)
    V, e_V = region_volume_estimate(region, g, q)
    if not V > 0:
        raise DomainError("degenerate region: zero volume")
    r = g.matched_radius(V)
    sr = g.centered_sphere_area(r)
    measured = boundary_area(region, g, q, outside=tau * r) / sr
    eta_used = measured if eta is None else float(eta)
    bound = sr + deficit_coefficient(g.m, tau, eta_used, 300.0) * r
    err = e_area + float(sphere_mean_curvature(g.m, r)) * e_V + ROUNDOFF * area
    ratio = np.sqrt(area) / V ** (1.0 / 3.0)
    growth = area_growth_constant(region, g, q)
    theta_ok = True if Theta is None else bool(ratio <= Theta and growth <= Theta)
    off = bool(r >= 1.0 and measured >= eta_used)
    margin = area - bound
    return PerturbedDeficitReport(
        V=V,
        r=r,
        tau=float(tau),
        eta=eta_used,
        eta_measured=measured,
        area_lhs=area,
        bound_rhs=bound,
        margin=margin,
        holds=bool(margin >= -err),
        error=err,
        off_center=off,
        theta_ratio=float(ratio),
        theta_growth=growth,
        theta_ok=theta_ok,
        preconditions_ok=bool(theta_ok and off),
    )


def two_ball_region(R: float, offset: float = 3.0, ratio: float = 0.5) -> BallUnion:
    """Ball of radius ``R`` at the origin plus a ball of radius ``ratio R`` centered at ``(offset R, 0, 0)``."""
    return BallUnion((CenteredBall(R), OffsetBall((offset * R, 0.0, 0.0), ratio * R)))


def with_unit_ball(region: Region, a: float) -> Region:
    """``Omega union B_1`` for the region families here.

    A component that already contains ``B_1`` leaves the region unchanged;
    if every component avoids ``B_1`` the unit ball is added as a new member.
    Partial overlap is outside the supported family.
    """
    members = _members(region, a)
    for kind, obj in members:
        if isinstance(obj, RadialGraph):
            if np.all(obj.rho > 1.0):
                return region
            raise DomainError("graph region does not contain the unit ball")
        d, rho = obj.distance, obj.rho
        if d + 1.0 <= rho:
            return region
        if d - rho < 1.0:
            raise DomainError("region component partially overlaps the unit ball")
    balls = tuple(obj for _, obj in members)
    return BallUnion((CenteredBall(1.0),) + balls)


@dataclass(frozen=True)
class TheoremStepReport:
    r: float
    values: dict
    residuals: dict

    def to_dict(self):
        return asdict(self)


def theorem_step_audit(
    pert: PerturbationSpec,
    region: Region,
    tau: float = 2.0,
    q: SurfaceQuadrature = DEFAULT_SURFACE_QUADRATURE,
) -> TheoremStepReport:
    """Evaluate the intermediate comparisons that move ``Omega`` from ``g`` to ``g_m``.

    Residual ratios (expected bounded as ``r`` grows):

    * ``c``: ``|A_gm(dOmega~) - A_g(dOmega~)| / A_g(dOmega~)**(1/4)``
    * ``d``: ``|V_gm(Omega~) - V_g(Omega)| / V_g(Omega)**(1/2)``
    * ``e``: ``|V_gm(B_r) - V_g(Omega)| / V_g(Omega)**(1/2)``
    * ``f``: ``|r~ - r| r**(1/2)`` with ``r~`` matched to ``V_gm(Omega~)``

    where ``Omega~ = Omega union B_1`` and ``r`` is the ``g``-matched radius.
    """
    g = PerturbedMetric(pert)
    gm = SchwarzschildMetric(g.m)
    a = g.horizon_radius
    tilde = with_unit_ball(region, a)
    A_g = boundary_area(region, g, q)
    V_g = region_volume(region, g, q)
    At_g = boundary_area(tilde, g, q)
    Vt_g = region_volume(tilde, g, q)
    At_m = boundary_area(tilde, gm, q)
    Vt_m = region_volume(tilde, gm, q)
    r = g.matched_radius(V_g)
    Vr_m = float(volume_to(g.m, r))
    r_tilde = float(radius_for_volume(g.m, Vt_m))
    S_g = g.centered_sphere_area(r)
    S_m = float(sphere_area(g.m, r))
    tau_m = 0.5 * (1.0 + tau)
    eta_m = boundary_area(tilde, gm, q, outside=tau_m * r_tilde) / float(sphere_area(g.m, r_tilde))
    eta_g = boundary_area(region, g, q, outside=tau * r) / S_g
    prof = float(profile_area(g.m, Vt_m))
    values = {
        "area_g": A_g,
        "volume_g": V_g,
        "area_g_tilde": At_g,
        "volume_g_tilde": Vt_g,
        "area_gm_tilde": At_m,
        "volume_gm_tilde": Vt_m,
        "volume_gm_ball": Vr_m,
        "r_tilde": r_tilde,
        "sphere_area_g": S_g,
        "sphere_area_gm": S_m,
        "eta_g": eta_g,
        "eta_gm_tilde": eta_m,
        "step_b_area_shift": At_g - A_g,
        "step_b_volume_shift": Vt_g - V_g,
        "step_g_margin": At_m - prof - deficit_coefficient(g.m, tau, eta_g, 192.0) * r_tilde,
        "step_h_shift": S_m - prof,
        "step_i_shift": S_g - S_m,
        "step_j_margin": A_g - S_g - deficit_coefficient(g.m, tau, eta_g, 200.0) * r,
    }
    residuals = {
        "c": abs(At_m - At_g) / At_g**0.25,
        "d": abs(Vt_m - V_g) / V_g**0.5,
        "e": abs(Vr_m - V_g) / V_g**0.5,
        "f": abs(r_tilde - r) * r**0.5,
        "h": abs(S_m - prof) / V_g ** (1.0 / 6.0),
    }
    return TheoremStepReport(r=r, values=values, residuals=residuals)


def residual_trend(sequence, floor: float = 1e-6) -> dict:
    """Growth diagnostics for residuals along a doubling sweep.

    ``growth`` is the largest ratio of a later residual to the first (each
    floored at ``floor``); ``slope`` the least-squares log-log slope against
    the sweep index.  Bounded means ``growth <= 2``.
    """
    x = np.maximum(np.abs(np.asarray(sequence, dtype=float)), floor)
    growth = float(np.max(x / x[0]))
    slope = float(np.polyfit(np.arange(x.size), np.log2(x), 1)[0]) if x.size > 1 else 0.0
    return {"growth": growth, "slope_per_doubling": slope, "bounded": bool(growth <= 2.0)}
