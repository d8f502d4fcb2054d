"""Exact geometry of the time-symmetric Schwarzschild slice in isotropic coordinates.

The metric is ``phi**4 * delta`` on R^3 minus the origin with
``phi = 1 + m / (2 r)``.  Centered coordinate spheres ``S_r`` are the
isoperimetric surfaces; everything here is a closed-form function of the
isotropic radius ``r`` and the mass ``m``.  Volumes are measured relative to
the horizon ``S_{m/2}``.

All functions accept scalars or numpy arrays for the radius/volume argument.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import integrate

from .errors import DomainError, NumericError

FOUR_PI = 4.0 * np.pi
EUCLID_ISO = (36.0 * np.pi) ** (1.0 / 3.0)

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class MassParam:
    """Schwarzschild mass.

    ``m == 0`` (flat space) is only admitted with ``euclidean_sanity=True``;
    it exists so that flat-space identities can serve as test oracles.
    """

    m: float
    euclidean_sanity: bool = False

    def __post_init__(self):
        m = float(self.m)
        if not np.isfinite(m) or m < 0:
            raise DomainError(f"mass must be a finite nonnegative number, got {self.m!r}")
        if m == 0 and not self.euclidean_sanity:
            raise DomainError("mass must be positive (pass euclidean_sanity=True for m = 0)")
        object.__setattr__(self, "m", m)

    def __float__(self):
        return self.m

    @property
    def horizon_radius(self) -> float:
        return 0.5 * self.m


def as_mass(m) -> MassParam:
    if isinstance(m, MassParam):
        return m
    return MassParam(float(m))


@dataclass(frozen=True)
class QuadratureSpec:
    rule: Literal["closed-form", "adaptive"] = "closed-form"
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_subdivisions: int = 200

    def __post_init__(self):
        if self.rule not in ("closed-form", "adaptive"):
            raise DomainError(f"unknown quadrature rule {self.rule!r}")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise DomainError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be >= 1")


DEFAULT_QUADRATURE = QuadratureSpec()


def _positive(r, name="r"):
    r = np.asarray(r, dtype=float)
    if np.any(~(r > 0)):
        raise DomainError(f"{name} must be positive")
    return r


def _outside_horizon(mass: MassParam, r, strict=False):
    r = _positive(r)
    a = mass.horizon_radius
    bad = r <= a if strict else r < a * (1 - 4 * _EPS)
    if np.any(bad):
        op = ">" if strict else ">="
        raise DomainError(f"isotropic radius must be {op} m/2 = {a:g}")
    return np.maximum(r, a)


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def conformal_factor(m, r):
    """``phi_m(r) = 1 + m / (2 r)``."""
    mass = as_mass(m)
    r = _positive(r)
    return _out(1.0 + mass.m / (2.0 * r))


def sphere_area(m, r):
    """Area ``phi**4 * 4 pi r**2`` of the centered sphere ``S_r``."""
    mass = as_mass(m)
    r = _positive(r)
    phi = 1.0 + mass.m / (2.0 * r)
    return _out(phi**4 * FOUR_PI * r**2)


def sphere_mean_curvature(m, r):
    """Mean curvature of ``S_r`` with respect to the outward unit normal.

    Vanishes on the horizon ``r = m/2``; undefined (domain error) inside it.
    """
    mass = as_mass(m)
    r = _outside_horizon(mass, r)
    phi = 1.0 + mass.m / (2.0 * r)
    # (r - m/2) is exact near the horizon, 1 - m/2r is not
    return _out(phi**-3 * (r - mass.horizon_radius) / r * 2.0 / r)


def area_radial_derivative(m, r):
    """``d/dr`` of :func:`sphere_area`: ``8 pi phi**3 (r - m/2)``."""
    mass = as_mass(m)
    r = _positive(r)
    phi = 1.0 + mass.m / (2.0 * r)
    return _out(8.0 * np.pi * phi**3 * (r - 0.5 * mass.m))


def hawking_mass(area, willmore):
    """Hawking mass ``(16 pi)**-1.5 * sqrt(area) * (16 pi - willmore)``.

    ``willmore`` is the integral of the squared mean curvature over the surface.
    """
    area = np.asarray(area, dtype=float)
    if np.any(~(area > 0)):
        raise DomainError("area must be positive")
    willmore = np.asarray(willmore, dtype=float)
    return _out((16.0 * np.pi) ** -1.5 * np.sqrt(area) * (16.0 * np.pi - willmore))


def sphere_hawking_mass(m, r):
    """Hawking mass of ``S_r`` computed from its area and mean curvature."""
    area = np.asarray(sphere_area(m, r))
    h = np.asarray(sphere_mean_curvature(m, r))
    return hawking_mass(area, h**2 * area)


def _antiderivative(a, t):
    # (1 + a/t)^6 t^2 expanded binomially; the t^-1 term is integrated
    # separately as a logarithm.
    return (
        t**3 / 3.0
        + 3.0 * a * t**2
        + 15.0 * a**2 * t
        - 15.0 * a**4 / t
        - 3.0 * a**5 / t**2
        - a**6 / (3.0 * t**3)
    )


def _volume_closed_form(a, r):
    if a == 0.0:
        return FOUR_PI * r**3 / 3.0
    poly = _antiderivative(a, r) - _antiderivative(a, a)
    return FOUR_PI * (poly + 20.0 * a**3 * np.log(r / a))


def volume_density(m, r):
    """Radial volume density ``4 pi phi**6 r**2 = dV/dr``."""
    mass = as_mass(m)
    r = _positive(r)
    return _out(FOUR_PI * (1.0 + mass.m / (2.0 * r)) ** 6 * r**2)


def volume_to_quadrature(m, r, q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Horizon-relative volume by adaptive quadrature (independent oracle)."""
    mass = as_mass(m)
    r = float(_outside_horizon(mass, r))
    a = mass.horizon_radius
    # one adaptive pass per octave keeps every piece well scaled
    n = max(1, int(np.ceil(np.log2(r / a)))) if r > a else 1
    edges = np.geomspace(a, r, n + 1) if r > a else np.array([a, r])
    val = err = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        v, e = integrate.quad(
            lambda t: (1.0 + a / t) ** 6 * t**2,
            lo,
            hi,
            epsabs=q.abs_tol,
            epsrel=q.rel_tol,
            limit=q.max_subdivisions,
        )
        val += v
        err += e
    val *= FOUR_PI
    if FOUR_PI * err > max(q.abs_tol, q.rel_tol * abs(val)) * 10:
        raise NumericError(f"volume quadrature did not converge (err={err:g})")
    return val


def volume_to(m, r, q: QuadratureSpec = DEFAULT_QUADRATURE):
    """Volume between the horizon ``S_{m/2}`` and ``S_r``.

    Closed form by default: ``4 pi * int_{m/2}^r phi**6 t**2 dt`` expands to a
    polynomial in ``t`` plus one logarithm.  ``q.rule == "adaptive"`` returns
    the quadrature value instead.
    """
    mass = as_mass(m)
    r = _outside_horizon(mass, r)
    if q.rule == "adaptive":
        if np.ndim(r) == 0:
            return volume_to_quadrature(mass, r, q)
        return np.array([volume_to_quadrature(mass, x, q) for x in r.ravel()]).reshape(r.shape)
    return _out(np.maximum(_volume_closed_form(mass.horizon_radius, r), 0.0))


def radius_for_volume(m, V, rtol: float = 1e-15, max_iter: int = 200):
    """Invert :func:`volume_to`: the isotropic radius enclosing volume ``V``.

    Safeguarded Newton iteration, vectorized over ``V``.  The bracket
    ``[m/2, (R**3 + (m/2)**3)**(1/3)]`` with ``R`` the Euclidean volume radius
    always contains the root because ``phi >= 1``.
    """
    mass = as_mass(m)
    V = np.asarray(V, dtype=float)
    if np.any(~(V > 0)) or np.any(~np.isfinite(V)):
        raise DomainError("volume must be positive and finite")
    a = mass.horizon_radius
    if a == 0.0:
        return _out(np.cbrt(3.0 * V / FOUR_PI))

    lo = np.full_like(V, a)
    hi = np.cbrt(3.0 * V / FOUR_PI + a**3)
    r = hi.copy()
    done = np.zeros(V.shape, dtype=bool)
    for _ in range(max_iter):
        f = _volume_closed_form(a, r) - V
        lo = np.where(f < 0, r, lo)
        hi = np.where(f > 0, r, hi)
        dv = FOUR_PI * (1.0 + a / r) ** 6 * r**2
        step = f / dv
        trial = r - step
        outside = (trial <= lo) | (trial >= hi)
        new = np.where(outside, 0.5 * (lo + hi), trial)
        converged = (np.abs(new - r) <= rtol * r) | (f == 0) | (hi - lo <= 2 * _EPS * hi)
        r = np.where(done, r, new)
        done |= converged
        if np.all(done):
            break
    else:
        raise NumericError("radius_for_volume: Newton iteration did not converge")
    return _out(r)


def profile_area(m, V):
    """Isoperimetric profile ``A_m(V)``: area of the centered sphere enclosing ``V``."""
    mass = as_mass(m)
    return sphere_area(mass, radius_for_volume(mass, V))


def profile_area_derivative(m, V):
    """``dA_m/dV``; equals the mean curvature of the enclosing centered sphere."""
    mass = as_mass(m)
    return sphere_mean_curvature(mass, radius_for_volume(mass, V))


def isoperimetric_ratio(m, r):
    """``|S_r| / ((36 pi)**(1/3) V**(2/3))`` with ``V`` the horizon-relative volume."""
    mass = as_mass(m)
    r = _outside_horizon(mass, r, strict=True)
    return _out(np.asarray(sphere_area(mass, r)) / (EUCLID_ISO * np.asarray(volume_to(mass, r)) ** (2.0 / 3.0)))


def volume_radius(V):
    """Euclidean volume radius ``(3 V / 4 pi)**(1/3)``."""
    return _out(np.cbrt(3.0 * np.asarray(V, dtype=float) / FOUR_PI))


def profile_expansion_residual(m, V):
    """``R**2 * (A_m(V) / (4 pi R**2) - 1 + m / R)``; stays bounded as ``V`` grows."""
    mass = as_mass(m)
    R = np.asarray(volume_radius(V))
    A = np.asarray(profile_area(mass, V))
    return _out(R**2 * (A / (FOUR_PI * R**2) - 1.0 + mass.m / R))


@dataclass(frozen=True)
class ProfilePoint:
    r: float
    V: float
    A: float
    H: float
    R: float


def profile_point(m, r) -> ProfilePoint:
    mass = as_mass(m)
    V = float(volume_to(mass, r))
    return ProfilePoint(
        r=float(r),
        V=V,
        A=float(sphere_area(mass, r)),
        H=float(sphere_mean_curvature(mass, r)),
        R=float(volume_radius(V)),
    )
