"""Integral decay estimates for surfaces with quadratic area growth.

For a surface with ``|Sigma cap B_rho minus B_r0| <= Theta rho**2`` the co-area
formula gives

    int_{Sigma minus B_r0} r**-gamma dA <= gamma / (gamma - 2) Theta r0**(2 - gamma)

and, interpolating with the total area, a bound on ``int r**-2 dA`` for every
``beta`` in (0, 2).  Hoelder's inequality against the exterior integral of
``r**(-6 / (3 - alpha))`` bounds volume differences between metrics that agree
to order ``r**-2``.

Each check evaluates the left side by quadrature that does not use the bound.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate

from .errors import DomainError, NumericError
from .metrics import PerturbationSpec, PerturbedMetric, SchwarzschildMetric
from .regions import DEFAULT_SURFACE_QUADRATURE, Region, SurfaceQuadrature, boundary_pieces, region_volume
from .schwarzschild import FOUR_PI


@dataclass(frozen=True)
class GrowthSurface:
    """Test surface with quadratic area growth outside ``B_r0``.

    ``kind`` is ``plane`` (through the origin, optionally truncated at
    ``R``), ``spheres`` (centered spheres of the given ``radii``) or
    ``region`` (boundary of a :class:`Region` under ``metric``).  ``Theta``
    defaults to the sampled growth constant.
    """

    kind: str
    r0: float = 1.0
    Theta: Optional[float] = None
    R: Optional[float] = None
    radii: tuple = ()
    region: object = None
    metric: object = None
    q: SurfaceQuadrature = field(default=DEFAULT_SURFACE_QUADRATURE)

    def __post_init__(self):
        if self.kind not in ("plane", "spheres", "region"):
            raise DomainError(f"unknown surface kind {self.kind!r}")
        if not self.r0 >= 1.0:
            raise DomainError("r0 must be at least 1")
        if self.kind == "spheres" and not self.radii:
            raise DomainError("sphere family needs radii")
        if self.kind == "region" and (self.region is None or self.metric is None):
            raise DomainError("region surfaces need a region and a metric")
        if self.R is not None and not self.R > self.r0:
            raise DomainError("truncation radius must exceed r0")

    # discrete (radius, area) samples for the non-planar kinds
    def _nodes(self):
        if self.kind == "spheres":
            rad = np.asarray(self.radii, dtype=float)
            return rad, FOUR_PI * rad**2
        pieces = boundary_pieces(self.region, self.metric.horizon_radius, self.q)
        rad = np.concatenate([np.linalg.norm(p.X, axis=-1).ravel() for p in pieces])
        dA = np.concatenate([(p.w * self.metric.area_density(p.X, p.T1, p.T2)).ravel() for p in pieces])
        return rad, dA

    def integrate_radial(self, f) -> float:
        """``int_{Sigma minus B_r0} f(r) dA``."""
        if self.kind == "plane":
            upper = np.inf if self.R is None else self.R
            val, err = integrate.quad(lambda t: 2.0 * np.pi * t * f(t), self.r0, upper, epsabs=1e-14, epsrel=1e-12, limit=400)
            if err > 1e-9 * max(abs(val), 1.0):
                raise NumericError(f"radial quadrature did not converge (err={err:g})")
            return val
        rad, dA = self._nodes()
        keep = rad >= self.r0
        return float(np.sum(dA[keep] * f(rad[keep])))

    def exterior_area(self) -> float:
        if self.kind == "plane":
            if self.R is None:
                return np.inf
            return np.pi * (self.R**2 - self.r0**2)
        return self.integrate_radial(np.ones_like)

    def growth_profile(self, rhos) -> np.ndarray:
        """``|Sigma cap B_rho minus B_r0| / rho**2`` at the given radii."""
        rhos = np.asarray(rhos, dtype=float)
        if self.kind == "plane":
            top = rhos if self.R is None else np.minimum(rhos, self.R)
            return np.pi * np.clip(top**2 - self.r0**2, 0.0, None) / rhos**2
        rad, dA = self._nodes()
        keep = rad >= self.r0
        rad, dA = rad[keep], dA[keep]
        order = np.argsort(rad)
        cum = np.concatenate([[0.0], np.cumsum(dA[order])])
        idx = np.searchsorted(rad[order], rhos, side="right")
        return cum[idx] / rhos**2

    def sampled_theta(self) -> float:
        """Supremum of the growth ratio over ``rho >= r0``."""
        if self.kind == "plane":
            return np.pi if self.R is None else np.pi * (1.0 - (self.r0 / self.R) ** 2)
        rad, dA = self._nodes()
        keep = rad >= self.r0
        rad, dA = rad[keep], dA[keep]
        if rad.size == 0:
            return 0.0
        order = np.argsort(rad)
        cum = np.cumsum(dA[order])
        return float(np.max(cum / rad[order] ** 2))

    @property
    def theta(self) -> float:
        return self.sampled_theta() if self.Theta is None else float(self.Theta)

    def growth_verified(self, n_doublings: int = 20) -> bool:
        rhos = self.r0 * 2.0 ** np.arange(n_doublings)
        return bool(np.all(self.growth_profile(rhos) <= self.theta * (1 + 1e-12)))


def plane(r0: float = 1.0, R: float | None = None, Theta: float | None = np.pi) -> GrowthSurface:
    return GrowthSurface("plane", r0=r0, Theta=Theta, R=R)


def sphere_family(radii, r0: float = 1.0) -> GrowthSurface:
    return GrowthSurface("spheres", r0=r0, radii=tuple(float(x) for x in radii))


def coarea_bound(gamma: float, Theta: float, r0: float) -> float:
    """``gamma / (gamma - 2) Theta r0**(2 - gamma)``."""
    if not gamma > 2:
        raise DomainError("gamma must exceed 2 (the bound diverges at gamma = 2)")
    return gamma / (gamma - 2.0) * Theta * r0 ** (2.0 - gamma)


def coarea_bound_check(surface: GrowthSurface, gamma: float) -> dict:
    """Compare ``int r**-gamma dA`` over ``Sigma minus B_r0`` with the co-area bound."""
    bound = coarea_bound(gamma, surface.theta, surface.r0)
    val = surface.integrate_radial(lambda r: r ** (-gamma))
    return {
        "gamma": float(gamma),
        "r0": surface.r0,
        "Theta": surface.theta,
        "growth_verified": surface.growth_verified(),
        "integral": val,
        "bound": bound,
        "holds": bool(val <= bound * (1 + 1e-12)),
    }


def beta_bound(beta: float, area: float, Theta: float, r0: float) -> float:
    """``r0**-beta area**(beta/2) (2 Theta / beta)**((2 - beta)/2)``."""
    if not 0.0 < beta < 2.0:
        raise DomainError("beta must lie in (0, 2)")
    return r0 ** (-beta) * area ** (beta / 2.0) * (2.0 * Theta / beta) ** ((2.0 - beta) / 2.0)


def beta_bound_check(surface: GrowthSurface, beta: float) -> dict:
    """Compare ``int r**-2 dA`` over ``Sigma minus B_r0`` with the ``beta``-interpolated bound."""
    area = surface.exterior_area()
    if not np.isfinite(area):
        raise DomainError("the surface must have finite area outside B_r0 (truncate the plane)")
    bound = beta_bound(beta, area, surface.theta, surface.r0)
    val = surface.integrate_radial(lambda r: r**-2.0)
    return {
        "beta": float(beta),
        "r0": surface.r0,
        "Theta": surface.theta,
        "area": area,
        "integral": val,
        "bound": bound,
        "holds": bool(val <= bound * (1 + 1e-12)),
    }


def _check_alpha(alpha):
    if not 1.0 < alpha < 3.0:
        raise DomainError("alpha must lie in (1, 3)")


def exterior_radial_integral_closed_form(alpha: float, r0: float) -> float:
    """``4 pi (3 - alpha) / (3 (alpha - 1)) r0**(3 (1 - alpha) / (3 - alpha))``."""
    _check_alpha(alpha)
    if not r0 >= 1.0:
        raise DomainError("r0 must be at least 1")
    return FOUR_PI * (3.0 - alpha) / (3.0 * (alpha - 1.0)) * r0 ** (3.0 * (1.0 - alpha) / (3.0 - alpha))


def exterior_radial_integral(alpha: float, r0: float) -> dict:
    """``int_{|x| > r0} |x|**(-6 / (3 - alpha)) dx`` in closed form and by adaptive quadrature."""
    closed = exterior_radial_integral_closed_form(alpha, r0)
    p = 6.0 / (3.0 - alpha)
    quad, err = integrate.quad(lambda t: FOUR_PI * t ** (2.0 - p), r0, np.inf, epsabs=0.0, epsrel=1e-13, limit=400)
    return {"alpha": float(alpha), "r0": float(r0), "closed_form": closed, "quadrature": quad, "quad_error": err}


def volume_constant(pert: PerturbationSpec) -> float:
    """``C'`` for the volume comparison, from the perturbation amplitude and mass.

    On ``r >= 1``, ``|Phi_g**6 - phi_m**6| <= K r**-2`` with
    ``K = 3/2 (phi_m(1)**4 + C)**(1/2) C`` and ``dx <= P_min**(-3/2) dV_g`` with
    ``P_min = min_{r >= 1} (phi_m**4 - C / (1 + r**2))``.  Hoelder then gives the
    bound with ``C' = max(1, K (4 pi / 3)**(2/3) max(1, P_min**(-3/2)))``.
    """
    C = abs(pert.C)
    m = pert.m
    K = 1.5 * np.sqrt((1.0 + m / 2.0) ** 4 + C) * C
    t = np.geomspace(1.0, 1e6, 20001)
    p_min = float(np.min((1.0 + m / (2.0 * t)) ** 4 - C / (1.0 + t * t)))
    if p_min <= 0:
        raise DomainError("perturbation too large for the volume comparison constant")
    return max(1.0, K * (FOUR_PI / 3.0) ** (2.0 / 3.0) * max(1.0, p_min**-1.5))


def volume_diff_bound(Cprime: float, alpha: float, volume: float, r0: float) -> float:
    """``C' ((3 - alpha)/(alpha - 1))**((3 - alpha)/3) V**(alpha/3) r0**(1 - alpha)``."""
    _check_alpha(alpha)
    return Cprime * ((3.0 - alpha) / (alpha - 1.0)) ** ((3.0 - alpha) / 3.0) * volume ** (alpha / 3.0) * r0 ** (1.0 - alpha)


def volume_diff_bound_check(
    pert: PerturbationSpec,
    region: Region,
    alpha: float,
    r0: float = 1.0,
    q: SurfaceQuadrature = DEFAULT_SURFACE_QUADRATURE,
) -> dict:
    """Compare ``|V_g(Omega minus B_r0) - V_gm(Omega minus B_r0)|`` with the Hoelder bound."""
    _check_alpha(alpha)
    if not r0 >= 1.0:
        raise DomainError("r0 must be at least 1")
    g = PerturbedMetric(pert)
    gm = SchwarzschildMetric(pert.m)
    Vg = region_volume(region, g, q, exclude_radius=r0)
    Vm = region_volume(region, gm, q, exclude_radius=r0)
    Cp = volume_constant(pert)
    bound = volume_diff_bound(Cp, alpha, Vg, r0)
    diff = abs(Vg - Vm)
    return {
        "alpha": float(alpha),
        "r0": float(r0),
        "C_prime": Cp,
        "volume_g": Vg,
        "volume_gm": Vm,
        "difference": diff,
        "bound": bound,
        "holds": bool(diff <= bound),
    }
