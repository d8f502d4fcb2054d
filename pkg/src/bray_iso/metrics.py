"""Metrics on which regions are measured.

Three of them are conformally flat, ``P(x) * delta`` with ``P = Phi**4``:
Euclidean space, exact Schwarzschild, and Schwarzschild plus a conformal
perturbation ``h = k(x) delta`` with ``r**2 |k| <= C``.  The fourth is the
warped chart metric ``u**-2 ds**2 + u s**2 g_S2`` (optionally rescaled by
``w**4`` inside the cone), written in Cartesian chart coordinates.

All conformal metrics share the interface used by the quadrature code:
``conformal4`` (with gradient), ``ray_volume`` (horizon-relative volume along
rays) and closed-form or quadrature data for centered spheres.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize

from .chart import ChartParams, RadialProfile, u_profile
from .errors import DomainError, NumericError
from .schwarzschild import FOUR_PI, as_mass, radius_for_volume, sphere_area, volume_to
from .sphere import make_grid, real_ylm

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)


def _split(X):
    X = np.asarray(X, dtype=float)
    r = np.linalg.norm(X, axis=-1)
    return X, r


class ConformalMetric:
    """Base class for ``P(x) delta``; subclasses provide ``P`` and its gradient."""

    conformal = True
    kind = "conformal"

    def __init__(self, horizon_radius: float):
        self.horizon_radius = float(horizon_radius)

    # P and grad P at Cartesian points (..., 3)
    def conformal4(self, X):
        return self.conformal4_and_grad(X)[0]

    def conformal4_and_grad(self, X):  # pragma: no cover - abstract
        raise NotImplementedError

    def area_density(self, X, T1, T2):
        """Area element of a parametrized surface with tangents ``T1, T2``."""
        return self.conformal4(X) * np.linalg.norm(np.cross(T1, T2), axis=-1)

    def volume_density(self, X):
        return self.conformal4(X) ** 1.5

    def ray_volume(self, R, dirs):
        """``int_a^R Phi**6 t**2 dt`` along unit directions ``dirs`` (per steradian)."""
        raise NotImplementedError  # pragma: no cover

    def ray_density(self, R, dirs):
        """``d/dR`` of :meth:`ray_volume`: ``Phi(R w)**6 R**2``."""
        R = np.asarray(R, dtype=float)
        return self.conformal4(R[..., None] * dirs) ** 1.5 * R**2

    def centered_sphere_area(self, r):
        raise NotImplementedError  # pragma: no cover

    def centered_volume(self, r):
        raise NotImplementedError  # pragma: no cover

    def matched_radius(self, V):
        """Radius of the centered sphere enclosing horizon-relative volume ``V``."""
        raise NotImplementedError  # pragma: no cover

    def settings(self) -> dict:
        return {"kind": self.kind}


class Euclidean(ConformalMetric):
    """Flat metric; ``horizon_radius`` only sets which ball is excised from regions."""

    kind = "euclidean"

    def __init__(self, horizon_radius: float = 0.0):
        super().__init__(horizon_radius)

    def conformal4_and_grad(self, X):
        X = np.asarray(X, dtype=float)
        return np.ones(X.shape[:-1]), np.zeros(X.shape)

    def ray_volume(self, R, dirs=None):
        R = np.asarray(R, dtype=float)
        return (R**3 - self.horizon_radius**3) / 3.0

    def centered_sphere_area(self, r):
        return FOUR_PI * float(r) ** 2

    def centered_volume(self, r):
        return FOUR_PI * (float(r) ** 3 - self.horizon_radius**3) / 3.0

    def matched_radius(self, V):
        return float(np.cbrt(3.0 * V / FOUR_PI + self.horizon_radius**3))

    def settings(self):
        return {"kind": self.kind, "horizon_radius": self.horizon_radius}


class SchwarzschildMetric(ConformalMetric):
    kind = "schwarzschild"

    def __init__(self, m):
        self.mass = as_mass(m)
        self.m = self.mass.m
        super().__init__(self.mass.horizon_radius)

    def conformal4_and_grad(self, X):
        X, r = _split(X)
        if np.any(r <= 0):
            raise DomainError("Schwarzschild metric is singular at the origin")
        phi = 1.0 + self.m / (2.0 * r)
        P = phi**4
        # dP/dr = 4 phi**3 * (-m / 2r**2); gradient is radial
        dP = -2.0 * self.m * phi**3 / r**2
        return P, (dP / r)[..., None] * X

    def ray_volume(self, R, dirs=None):
        return np.asarray(volume_to(self.mass, R)) / FOUR_PI

    def centered_sphere_area(self, r):
        return float(sphere_area(self.mass, r))

    def centered_volume(self, r):
        return float(volume_to(self.mass, r))

    def matched_radius(self, V):
        return float(radius_for_volume(self.mass, V))

    def settings(self):
        return {"kind": self.kind, "m": self.m}


def _smoothstep(t):
    """C-infinity step: 0 for ``t <= 0``, 1 for ``t >= 1``; returns value and derivative."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        f0 = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        f1 = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
        df0 = np.where(t > 0, f0 / np.where(t > 0, t, 1.0) ** 2, 0.0)
        df1 = np.where(t < 1, -f1 / np.where(t < 1, 1.0 - t, 1.0) ** 2, 0.0)
        den = f0 + f1
        val = f0 / den
        dval = (df0 * den - f0 * (df0 + df1)) / den**2
    return val, dval


@dataclass(frozen=True)
class PerturbationSpec:
    """Conformal perturbation ``k(x) = C Y(omega) chi(r) / (1 + r**2)`` of ``g_m``.

    ``Y`` is the harmonic combination ``sum c_lm Y_lm`` rescaled to
    ``max |Y| = 1``; ``chi`` is a smooth cutoff equal to 1 on ``r <= cutoff/2``
    and 0 on ``r >= cutoff`` (``cutoff=None`` means no cutoff).  Hence
    ``r**2 |h_ij| <= C`` everywhere.
    """

    C: float
    harmonics: tuple = ((0, 0, 1.0),)
    cutoff: Optional[float] = None
    m: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.C):
            raise DomainError("perturbation amplitude must be finite")
        terms = tuple((int(l), int(mm), float(cf)) for l, mm, cf in self.harmonics)
        if not terms:
            raise DomainError("angular profile needs at least one harmonic")
        for l, mm, _ in terms:
            if l < 0 or abs(mm) > l:
                raise DomainError(f"invalid harmonic (l={l}, m={mm})")
        object.__setattr__(self, "harmonics", terms)
        if self.cutoff is not None and not self.cutoff > 0:
            raise DomainError("cutoff radius must be positive")
        as_mass(self.m)

    @property
    def lmax(self) -> int:
        return max(l for l, _, _ in self.harmonics)

    def angular_scale(self) -> float:
        """``max |sum c_lm Y_lm|`` over a fine grid (normalizing constant)."""
        g = make_grid(4 * self.lmax + 48)
        raw = sum(cf * g.harmonic(l, mm) for l, mm, cf in self.harmonics)
        i = np.unravel_index(np.argmax(np.abs(raw)), raw.shape)
        scale = float(np.abs(raw[i]))
        if scale == 0:
            raise DomainError("angular profile vanishes identically")

        # the grid maximum undershoots; polish it so that max |Y| = 1 exactly
        def neg(x):
            return -abs(sum(cf * real_ylm(l, mm, x[0], x[1]) for l, mm, cf in self.harmonics))

        res = optimize.minimize(neg, [g.theta[i[0]], g.phi[i[1]]], method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-15})
        return max(scale, float(-res.fun))

    def to_dict(self) -> dict:
        return {
            "C": self.C,
            "harmonics": [list(h) for h in self.harmonics],
            "cutoff": self.cutoff,
            "m": self.m,
        }

    def negated(self) -> "PerturbationSpec":
        return PerturbationSpec(-self.C, self.harmonics, self.cutoff, self.m)


class PerturbedMetric(ConformalMetric):
    """``g = (phi_m**4 + k) delta`` for a :class:`PerturbationSpec`."""

    kind = "perturbed"

    def __init__(self, pert: PerturbationSpec, grid_n: int | None = None):
        self.pert = pert
        self.mass = as_mass(pert.m)
        self.m = self.mass.m
        super().__init__(self.mass.horizon_radius)
        self._scale = pert.angular_scale() if pert.C != 0 else 1.0
        # Centered-sphere data only see the band-limited angular profile.
        self._grid = make_grid(grid_n or 8 * pert.lmax + 32)
        self._tail = None
        t = np.geomspace(self.horizon_radius, 1e4, 4000)
        lowest = np.min((1 + self.m / (2 * t)) ** 4 - abs(pert.C) / (1 + t * t))
        if lowest <= 0:
            raise DomainError("perturbation is too large: the metric degenerates")

    def _angular(self, dirs, derivatives=False):
        dirs = np.asarray(dirs, dtype=float)
        theta = np.arccos(np.clip(dirs[..., 2], -1.0, 1.0))
        phi = np.arctan2(dirs[..., 1], dirs[..., 0])
        Y = np.zeros(dirs.shape[:-1])
        Yt = np.zeros_like(Y)
        Yp = np.zeros_like(Y)
        for l, mm, cf in self.pert.harmonics:
            if derivatives:
                y, yt, yp = real_ylm(l, mm, theta, phi, derivatives=True)
                Yt += cf * yt
                Yp += cf * yp
            else:
                y = real_ylm(l, mm, theta, phi)
            Y += cf * y
        if derivatives:
            return Y / self._scale, Yt / self._scale, Yp / self._scale, theta, phi
        return Y / self._scale

    def _radial(self, r):
        """``chi(r) / (1 + r**2)`` and its derivative."""
        r = np.asarray(r, dtype=float)
        q = 1.0 / (1.0 + r * r)
        dq = -2.0 * r * q * q
        Rc = self.pert.cutoff
        if Rc is None:
            return q, dq
        chi, dchi = _smoothstep((Rc - r) / (0.5 * Rc))
        dchi = -dchi / (0.5 * Rc)
        return chi * q, dchi * q + chi * dq

    def perturbation(self, X):
        return self.conformal4(X) - (1.0 + self.m / (2.0 * _split(X)[1])) ** 4

    def conformal4_and_grad(self, X):
        X = np.asarray(X, dtype=float)
        shape = X.shape[:-1]
        P, grad = self._conformal4_flat(X.reshape(-1, 3))
        return P.reshape(shape), grad.reshape(shape + (3,))

    def _conformal4_flat(self, X):
        X, r = _split(X)
        if np.any(r <= 0):
            raise DomainError("metric is singular at the origin")
        phi = 1.0 + self.m / (2.0 * r)
        P0 = phi**4
        dP0 = -2.0 * self.m * phi**3 / r**2
        P = P0.copy()
        grad = (dP0 / r)[..., None] * X
        if self.pert.C == 0:
            return P, grad
        # the perturbation is only evaluated on its support
        sel = r < self.pert.cutoff if self.pert.cutoff is not None else np.ones(r.shape, dtype=bool)
        if not np.any(sel):
            return P, grad
        rs = r[sel]
        n = X[sel] / rs[:, None]
        Y, Yt, Yp, theta, ph = self._angular(n, derivatives=True)
        q, dq = self._radial(rs)
        C = self.pert.C
        st = np.sin(theta)
        e_t = np.stack([np.cos(theta) * np.cos(ph), np.cos(theta) * np.sin(ph), -st], axis=-1)
        e_p = np.stack([-np.sin(ph), np.cos(ph), np.zeros_like(ph)], axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            yp_s = np.where(st > 0, Yp / st, 0.0)
        grad[sel] += (C * Y * dq)[:, None] * n + (C * q / rs)[:, None] * (
            Yt[:, None] * e_t + yp_s[:, None] * e_p
        )
        P[sel] += C * Y * q
        return P, grad

    def _breakpoints(self, rmax):
        a = self.horizon_radius
        pts = [a]
        b = max(a, 0.25)
        while b < rmax:
            b *= 4.0
            pts.append(b)
        if self.pert.cutoff is not None:
            pts += [0.5 * self.pert.cutoff, self.pert.cutoff]
        return np.unique(np.array(pts))

    def ray_volume(self, R, dirs):
        """Closed-form Schwarzschild part plus Gauss-Legendre for the perturbation."""
        R = np.asarray(R, dtype=float)
        dirs = np.broadcast_to(np.asarray(dirs, dtype=float), R.shape + (3,))
        base = np.asarray(volume_to(self.mass, R)) / FOUR_PI
        if self.pert.C == 0:
            return base
        Y = self._angular(dirs)
        bp = self._breakpoints(float(np.max(R)))
        extra = np.zeros(R.shape)
        for lo, hi in zip(bp[:-1], bp[1:]):
            if self.pert.cutoff is not None and lo >= self.pert.cutoff:
                break
            top = np.clip(R, lo, hi)
            half = 0.5 * (top - lo)
            if not np.any(half > 0):
                continue
            t = lo + half[..., None] * (_GL_NODES + 1.0)
            P0 = (1.0 + self.m / (2.0 * t)) ** 4
            k = self.pert.C * Y[..., None] * self._radial(t)[0]
            # difference written to avoid cancellation for small k
            P = P0 + k
            diff = k * (P * P + P * P0 + P0 * P0) / (P**1.5 + P0**1.5)
            extra += half * np.sum(_GL_WEIGHTS * diff * t * t, axis=-1)
        return base + extra

    def centered_sphere_area(self, r):
        g = self._grid
        return g.integrate(self.conformal4(g.points(r)) * float(r) ** 2)

    def centered_volume(self, r):
        g = self._grid
        r = float(r)
        Rc = self.pert.cutoff
        if Rc is not None and r >= Rc:
            # beyond the support only the Schwarzschild part grows
            if self._tail is None:
                extra = g.integrate(self.ray_volume(np.full(g.shape, Rc), g.normals))
                self._tail = extra - float(volume_to(self.mass, Rc))
            return float(volume_to(self.mass, r)) + self._tail
        return g.integrate(self.ray_volume(np.full(g.shape, r), g.normals))

    def matched_radius(self, V):
        V = float(V)
        if not V > 0:
            raise DomainError("volume must be positive")
        r0 = float(radius_for_volume(self.mass, V))
        lo, hi = max(self.horizon_radius, 0.5 * r0), 1.5 * r0 + 1.0
        f = lambda r: self.centered_volume(r) - V
        while f(hi) < 0:
            hi *= 2.0
        while lo > self.horizon_radius and f(lo) > 0:
            lo = max(self.horizon_radius, 0.5 * lo)
        try:
            return optimize.brentq(f, lo, hi, xtol=1e-13 * r0, rtol=1e-14)
        except ValueError as exc:
            raise NumericError(f"matched radius root-find failed: {exc}") from exc

    def settings(self):
        return {"kind": self.kind, "perturbation": self.pert.to_dict()}


class ChartMetric:
    """The warped chart metric in Cartesian chart coordinates ``y``, ``s = |y|``.

    ``G(t1, t2) = u**-2 (n.t1)(n.t2) + u (t1.t2 - (n.t1)(n.t2))``, times
    ``w(s)**4`` inside the cone when an interior profile is supplied.
    """

    conformal = False
    kind = "chart"

    def __init__(self, chart: ChartParams, w: RadialProfile | None = None):
        self.chart = chart
        self.w = w

    def _factor(self, s):
        u = np.asarray(u_profile(self.chart, s))
        w4 = np.ones_like(u)
        inside = s < self.chart.c
        if np.any(inside):
            if self.w is None:
                w4[inside] = 1.0
            else:
                w4[inside] = np.asarray(self.w.evaluate(s[inside])[0]) ** 4
        return u, w4

    def area_density(self, Y, T1, T2):
        Y = np.asarray(Y, dtype=float)
        s = np.linalg.norm(Y, axis=-1)
        n = Y / s[..., None]
        u, w4 = self._factor(s)
        a1 = np.sum(n * T1, axis=-1)
        a2 = np.sum(n * T2, axis=-1)

        def G(x1, x2, y1, y2, d):
            return x1 * x2 / u**2 + u * (d - y1 * y2)

        g11 = G(a1, a1, a1, a1, np.sum(T1 * T1, axis=-1))
        g22 = G(a2, a2, a2, a2, np.sum(T2 * T2, axis=-1))
        g12 = G(a1, a2, a1, a2, np.sum(T1 * T2, axis=-1))
        det = np.clip(g11 * g22 - g12 * g12, 0.0, None)
        return w4 * np.sqrt(det)

    def volume_density(self, Y):
        s = np.linalg.norm(np.asarray(Y, dtype=float), axis=-1)
        return self._factor(s)[1] ** 1.5

    def settings(self):
        c = self.chart
        return {"kind": self.kind, "m": c.m, "r": c.r, "c": c.c, "alpha": c.alpha}


def make_metric(kind: str, m=1.0, pert: PerturbationSpec | None = None, chart: ChartParams | None = None):
    """Metric selector by name: ``euclidean``, ``schwarzschild``, ``perturbed`` or ``chart``."""
    if kind == "euclidean":
        return Euclidean()
    if kind == "schwarzschild":
        return SchwarzschildMetric(m)
    if kind == "perturbed":
        if pert is None:
            raise DomainError("perturbed metric needs a PerturbationSpec")
        return PerturbedMetric(pert)
    if kind == "chart":
        if chart is None:
            raise DomainError("chart metric needs ChartParams")
        return ChartMetric(chart)
    raise DomainError(f"unknown metric {kind!r}")
