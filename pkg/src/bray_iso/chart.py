"""Bray's volume-preserving chart around a centered sphere ``S_r``.

A flat-topped cone ``alpha**-2 ds**2 + alpha s**2 g_S2`` on ``s <= c`` is glued
to the Schwarzschild exterior of ``S_r``, written as
``u**-2 ds**2 + u s**2 g_S2`` on ``s >= c``.  The Euclidean volume element
``s**2 ds dOmega`` is the chart's own, which makes ``u`` explicit in terms of
the isoperimetric profile.  Inside the cone a conformal factor ``w`` restores
the full Schwarzschild geometry; it solves a linear radial ODE that is
integrated numerically here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .errors import DomainError, NumericError
from .schwarzschild import (
    FOUR_PI,
    MassParam,
    as_mass,
    hawking_mass,
    radius_for_volume,
    sphere_area,
    sphere_mean_curvature,
    volume_to,
)


@dataclass(frozen=True)
class ChartParams:
    m: float
    r: float
    c: float
    alpha: float
    V0: float

    @property
    def mass(self) -> MassParam:
        return MassParam(self.m)


def chart_params(m, r) -> ChartParams:
    """Gluing radius ``c``, cone aperture ``alpha`` and volume offset ``V0`` for ``S_r``.

    ``c**3 = r**3 phi**7 / (1 - m/2r)`` and
    ``alpha = phi**(-2/3) (1 - m/2r)**(2/3)`` make area and mean curvature of
    ``{c} x S2`` in the cone agree with those of ``S_r``.
    """
    mass = as_mass(m)
    if mass.m <= 0:
        raise DomainError("the chart needs a positive mass")
    r = float(r)
    if not r > mass.horizon_radius:
        raise DomainError(f"chart radius must exceed m/2 = {mass.horizon_radius:g} (aperture degenerates)")
    phi = 1.0 + mass.m / (2.0 * r)
    lapse = (r - mass.horizon_radius) / r
    c = r * (phi**7 / lapse) ** (1.0 / 3.0)
    alpha = (lapse / phi) ** (2.0 / 3.0)
    V0 = float(volume_to(mass, r)) - FOUR_PI * c**3 / 3.0
    return ChartParams(m=mass.m, r=r, c=c, alpha=alpha, V0=V0)


def cone_scalar_curvature(alpha, s):
    """Scalar curvature ``2 (1 - alpha**3) / (alpha s**2)`` of the cone metric."""
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise DomainError("cone aperture alpha must lie in (0, 1)")
    s = np.asarray(s, dtype=float)
    if np.any(~(s > 0)):
        raise DomainError("s must be positive")
    out = 2.0 * (1.0 - alpha**3) / (alpha * s**2)
    return float(out) if out.ndim == 0 else out


def _matched_radius(chart: ChartParams, s):
    """Isotropic radius of the Schwarzschild sphere isometric to ``{s} x S2``, ``s >= c``."""
    W = FOUR_PI * s**3 / 3.0 + chart.V0
    return np.asarray(radius_for_volume(chart.m, W))


def u_profile(chart: ChartParams, s):
    """Radial function ``u_c``: ``alpha`` on the cone, ``A_m(V + V0) / (4 pi s**2)`` beyond ``c``."""
    s = np.asarray(s, dtype=float)
    if np.any(~(s > 0)):
        raise DomainError("s must be positive")
    out = np.full(s.shape, chart.alpha)
    ext = s > chart.c
    if np.any(ext):
        se = s[ext]
        rp = _matched_radius(chart, se)
        out[ext] = np.asarray(sphere_area(chart.m, rp)) / (FOUR_PI * se**2)
    return float(out) if out.ndim == 0 else out


def u_derivative(chart: ChartParams, s):
    """``du_c/ds``; zero on the cone.

    Differentiating the explicit formula with ``dA_m/dV = H`` gives
    ``u' = H(r') - 2 u / s``.
    """
    s = np.asarray(s, dtype=float)
    out = np.zeros(s.shape)
    ext = s > chart.c
    if np.any(ext):
        se = s[ext]
        rp = _matched_radius(chart, se)
        u = np.asarray(sphere_area(chart.m, rp)) / (FOUR_PI * se**2)
        out[ext] = np.asarray(sphere_mean_curvature(chart.m, rp)) - 2.0 * u / se
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class RadialProfile:
    grid: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    kind: str
    # dense interpolant s -> (value, derivative); not part of equality
    dense: object = field(default=None, compare=False, repr=False)
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind not in ("exterior_u", "interior_w"):
            raise DomainError(f"unknown profile kind {self.kind!r}")
        grid = np.asarray(self.grid, dtype=float)
        if grid.size == 0:
            raise DomainError("empty profile grid")
        if not (len(grid) == len(self.values) == len(self.derivs)):
            raise DomainError("profile arrays must have equal length")
        if np.any(np.diff(grid) <= 0):
            raise DomainError("profile grid must be strictly increasing")

    def evaluate(self, s):
        """Value and derivative at ``s`` (dense interpolant when available)."""
        s = np.asarray(s, dtype=float)
        lo, hi = self.grid[0], self.grid[-1]
        if np.any((s < lo * (1 - 1e-12)) | (s > hi * (1 + 1e-12))):
            raise DomainError(f"s outside profile domain [{lo:g}, {hi:g}]")
        if self.dense is not None:
            return self.dense(s)
        return np.interp(s, self.grid, self.values), np.interp(s, self.grid, self.derivs)


def exterior_profile(chart: ChartParams, s_grid) -> RadialProfile:
    s_grid = np.asarray(s_grid, dtype=float)
    return RadialProfile(
        grid=s_grid,
        values=np.atleast_1d(u_profile(chart, s_grid)),
        derivs=np.atleast_1d(u_derivative(chart, s_grid)),
        kind="exterior_u",
        dense=lambda s: (u_profile(chart, s), u_derivative(chart, s)),
        meta={"c": chart.c, "alpha": chart.alpha},
    )


@dataclass(frozen=True)
class FirstIntegralTrace:
    grid: np.ndarray
    values: np.ndarray
    max_deviation: float

    @property
    def median(self) -> float:
        return float(np.median(self.values))

    @property
    def relative_deviation(self) -> float:
        med = self.median
        return self.max_deviation / abs(med) if med != 0 else self.max_deviation


def first_integral(profile: RadialProfile) -> FirstIntegralTrace:
    """Trace of ``y (1 - y**4 y'**2 / s**4)`` with ``y = s sqrt(u)``.

    For a scalar-flat ``u**-2 ds**2 + u s**2 g_S2`` this equals twice the
    Hawking mass of ``{s} x S2``, hence is constant.
    """
    s = np.asarray(profile.grid, dtype=float)
    if s.size == 0:
        raise DomainError("empty profile grid")
    u = np.asarray(profile.values, dtype=float)
    du = np.asarray(profile.derivs, dtype=float)
    sqrt_u = np.sqrt(u)
    y = s * sqrt_u
    dy = sqrt_u + s * du / (2.0 * sqrt_u)
    vals = y * (1.0 - y**4 * dy**2 / s**4)
    dev = float(np.max(np.abs(vals - np.median(vals))))
    return FirstIntegralTrace(grid=s, values=vals, max_deviation=dev)


def u_gap_bound(chart: ChartParams, tau: float) -> dict:
    """Compare ``u(tau c) - alpha`` with ``(tau + 1/2)(tau - 1)**2 / (2 tau**3) * 2m / (3c)``.

    The lower bound holds once ``c`` is large enough; the threshold is not
    explicit, so the result is reported per instance.
    """
    tau = float(tau)
    if not tau > 1.0:
        raise DomainError("tau must exceed 1")
    lhs = float(u_profile(chart, tau * chart.c)) - chart.alpha
    coeff = 0.5 * (tau + 0.5) * (tau - 1.0) ** 2 / tau**3
    rhs = coeff * 2.0 * chart.m / (3.0 * chart.c)
    return {
        "tau": tau,
        "c": chart.c,
        "lhs": lhs,
        "rhs": rhs,
        "ratio": lhs / rhs,
        "holds": bool(lhs >= rhs),
    }


def gap_threshold(m, tau: float, radii) -> dict:
    """Sweep chart radii (ascending) and record where the gap bound starts to hold for good."""
    radii = np.sort(np.asarray(radii, dtype=float))
    rows = [u_gap_bound(chart_params(m, r), tau) | {"r": float(r)} for r in radii]
    threshold = None
    for row in reversed(rows):
        if not row["holds"]:
            break
        threshold = row
    return {
        "tau": float(tau),
        "rows": rows,
        "threshold_r": None if threshold is None else threshold["r"],
        "threshold_c": None if threshold is None else threshold["c"],
    }


@dataclass(frozen=True)
class OdeSpec:
    rtol: float = 1e-12
    atol: float = 1e-14
    blowup: float = 1e6
    method: str = "DOP853"
    s_min_ratio: float = 1e-40
    n_samples: int = 2001

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0 and self.blowup > 1):
            raise DomainError("invalid ODE step-control settings")


def solve_w(chart: ChartParams, ode: OdeSpec = OdeSpec()) -> RadialProfile:
    """Integrate the radial Yamabe equation inward from ``s = c``.

    Solves ``(s**2 alpha**2 w')' = (1 - alpha**3) w / (4 alpha)`` with
    ``w(c) = 1``, ``w'(c) = 0`` toward ``s = 0`` and stops once ``w`` exceeds
    ``ode.blowup``; the last accepted ``s`` is reported as ``meta['s0']``.
    """
    a = chart.alpha
    if not 0.0 < a < 1.0:
        raise DomainError("chart aperture must lie in (0, 1)")
    kappa = (1.0 - a**3) / (4.0 * a)
    c = chart.c

    def rhs(s, y):
        w, p = y
        return [p / (s * s * a * a), kappa * w]

    def blow(s, y):
        return y[0] - ode.blowup

    blow.terminal = True
    blow.direction = 1

    sol = integrate.solve_ivp(
        rhs,
        (c, c * ode.s_min_ratio),
        [1.0, 0.0],
        method=ode.method,
        rtol=ode.rtol,
        atol=ode.atol,
        events=blow,
        dense_output=True,
    )
    s_end = float(sol.t[-1])
    if sol.status != 1:
        partial = None
        if sol.t.size > 1:
            t, y = sol.t[::-1], sol.y[:, ::-1]
            partial = RadialProfile(
                grid=t, values=y[0], derivs=y[1] / (t * t * a * a), kind="interior_w", meta={"s0": s_end}
            )
        reason = sol.message if sol.status == -1 else "w stayed below the blow-up threshold down to s_min"
        raise NumericError(f"w integration failed: {reason}", partial=partial)

    dense_sol = sol.sol

    def dense(s):
        s = np.asarray(s, dtype=float)
        y = dense_sol(s)
        return y[0], y[1] / (s * s * a * a)

    # Stay a hair inside the event point so samples do not exceed the threshold.
    lo = s_end * (1.0 + 1e-9)
    grid = np.geomspace(lo, c, ode.n_samples)
    grid[-1] = c
    w, dw = dense(grid)
    return RadialProfile(
        grid=grid,
        values=np.asarray(w),
        derivs=np.asarray(dw),
        kind="interior_w",
        dense=dense,
        meta={"s0": s_end, "nfev": int(sol.nfev), "alpha": a, "c": c, "steps": int(sol.t.size)},
    )


def _w_area(chart: ChartParams, w_profile: RadialProfile, s):
    w, dw = w_profile.evaluate(s)
    w, dw, s = np.asarray(w), np.asarray(dw), np.asarray(s, dtype=float)
    area = FOUR_PI * w**4 * chart.alpha * s**2
    # d(log area)/ds
    dlog = 4.0 * dw / w + 2.0 / s
    return area, dlog, w


def chart_hawking_mass(chart: ChartParams, w_profile: RadialProfile, s):
    """Hawking mass of ``{s} x S2`` in ``w**4 g_m^c`` on the cone part.

    ``H = alpha w**-2 d(log A)/ds`` because radial arclength is ``w**2 ds / alpha``.
    """
    s = np.asarray(s, dtype=float)
    if np.any(s > chart.c * (1 + 1e-12)):
        raise DomainError("s must lie in the interior (cone) part of the chart")
    area, dlog, w = _w_area(chart, w_profile, s)
    H = chart.alpha * dlog / w**2
    return hawking_mass(area, H**2 * area)


def inner_area_minimum(chart: ChartParams, w_profile: RadialProfile) -> dict:
    """Locate the minimal sphere of ``w**4 g_m^c`` (the horizon of the interior copy)."""
    s = w_profile.grid
    _, dlog, _ = _w_area(chart, w_profile, s)
    sign_change = np.nonzero((dlog[:-1] < 0) & (dlog[1:] > 0))[0]
    if sign_change.size == 0:
        return {"conclusive": False, "s_min": None, "area_min": None}
    i = sign_change[-1]
    s_min = optimize.brentq(lambda t: float(_w_area(chart, w_profile, t)[1]), s[i], s[i + 1], xtol=1e-14 * s[i], rtol=1e-14)
    area_min = float(_w_area(chart, w_profile, s_min)[0])
    return {"conclusive": True, "s_min": float(s_min), "area_min": area_min}


def to_chart_radius(chart: ChartParams, r_prime):
    """Chart radius ``s`` of the sphere ``S_{r'}`` (``r' >= r``) via equal enclosed volume."""
    r_prime = np.asarray(r_prime, dtype=float)
    if np.any(r_prime < chart.r * (1 - 1e-12)):
        raise DomainError("only points outside the gluing sphere (r' >= r) can be transferred")
    rp = np.maximum(r_prime, chart.r)
    s = np.cbrt(3.0 / FOUR_PI * (np.asarray(volume_to(chart.m, rp)) - chart.V0))
    return float(s) if s.ndim == 0 else s


def to_chart_radius_derivative(chart: ChartParams, r_prime):
    """``ds/dr' = phi**6 r'**2 / s**2`` (equal volume elements)."""
    r_prime = np.asarray(r_prime, dtype=float)
    s = np.asarray(to_chart_radius(chart, r_prime))
    return (1.0 + chart.m / (2.0 * r_prime)) ** 6 * r_prime**2 / s**2


def to_chart(points, chart: ChartParams):
    """Map isotropic Cartesian points (``r' >= r``) radially into chart coordinates.

    Returns ``(s, directions)``; directions are unit vectors and are unchanged.
    """
    X = np.asarray(points, dtype=float)
    rp = np.linalg.norm(X, axis=-1)
    s = np.asarray(to_chart_radius(chart, rp))
    return s, X / rp[..., None]
