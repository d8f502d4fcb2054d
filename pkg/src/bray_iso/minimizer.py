"""Volume-constrained area minimization over star-shaped radial graphs.

A surface is ``{rho(w) w}`` with ``rho`` sampled on a :class:`SphereGrid`.
The discrete area is the quadrature of the conformal area element

    P(rho w) rho sqrt(rho**2 + rho_theta**2 + rho_phi**2 / sin**2)

with spectral angular derivatives, and its gradient with respect to the
nodal radii is exact (the derivative operators have exact transposes).
Descent directions are preconditioned by the second variation of area at a
centered sphere, whose degree-``l`` eigenvalue is proportional to
``l(l+1) - 2 + 6m/R`` (``R`` the areal radius), then made tangent to the
volume constraint.  Each trial point is rescaled to the target volume and
accepted by Armijo backtracking.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize

from .errors import DomainError, NumericError
from .metrics import ConformalMetric, SchwarzschildMetric
from .schwarzschild import as_mass, profile_area, sphere_mean_curvature
from .sphere import SphereGrid, make_grid

_EPS = np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class GraphSurface:
    n_theta: int
    rho: np.ndarray
    grad_cap: float = 10.0

    def __post_init__(self):
        rho = np.array(self.rho, dtype=float)
        if rho.shape != (self.n_theta, 2 * self.n_theta):
            raise DomainError(f"rho must have shape ({self.n_theta}, {2 * self.n_theta})")
        if not np.all(np.isfinite(rho)) or np.any(rho <= 0):
            raise DomainError("graph radii must be positive and finite")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)
        if self.max_log_gradient() > self.grad_cap:
            raise DomainError("graph is too rough (|grad log rho| exceeds the cap)")

    @property
    def grid(self) -> SphereGrid:
        return make_grid(self.n_theta)

    def max_log_gradient(self) -> float:
        g = self.grid
        d = g.derivatives(np.log(self.rho))
        return float(np.sqrt(np.max(d["t"] ** 2 + (d["p"] / g.sin_theta[:, None]) ** 2)))

    def with_rho(self, rho) -> "GraphSurface":
        return GraphSurface(self.n_theta, rho, self.grad_cap)

    def to_dict(self):
        return {"n_theta": self.n_theta, "rho": self.rho.tolist()}

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(int(d["n_theta"]), np.asarray(d["rho"], dtype=float))
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainError(f"malformed surface description: {exc}") from exc

    @classmethod
    def sphere(cls, r: float, n_theta: int = 32):
        return cls(n_theta, np.full((n_theta, 2 * n_theta), float(r)))

    @classmethod
    def ellipsoidal(cls, r: float, amplitude: float = 0.2, n_theta: int = 32):
        """``rho = r (1 + amplitude P2(cos theta))``, the degree-2 zonal profile scaled to max 1."""
        g = make_grid(n_theta)
        x = np.cos(g.theta2d)
        return cls(n_theta, r * (1.0 + amplitude * 0.5 * (3.0 * x * x - 1.0)))

    @classmethod
    def random(cls, r: float, amplitude: float, seed: int, lmax: int = 4, n_theta: int = 32):
        """Sphere with a random smooth perturbation of relative sup-size ``amplitude``."""
        g = make_grid(n_theta)
        rng = np.random.default_rng(seed)
        f = np.zeros(g.shape)
        for l in range(1, lmax + 1):
            for mm in range(-l, l + 1):
                f += rng.normal() * g.harmonic(l, mm) / (l + 1)
        f *= amplitude / np.max(np.abs(f))
        return cls(n_theta, r * (1.0 + f))


@dataclass(frozen=True)
class OptimizerConfig:
    step_size: float = 1.0
    volume_tol: float = 1e-12
    grad_tol: float = 1e-8
    max_iters: int = 200
    seed: int = 0
    armijo: float = 1e-4

    def __post_init__(self):
        if not (self.step_size > 0 and self.volume_tol > 0 and self.grad_tol > 0):
            raise DomainError("optimizer tolerances and step size must be positive")
        if self.max_iters < 1:
            raise DomainError("max_iters must be >= 1")


@dataclass
class MinimizeReport:
    surface: GraphSurface
    iterations: int
    area: float
    volume: float
    target_volume: float
    matched_radius: float
    cmc_deviation: float
    mean_H: float
    stationarity: float
    centering: float
    converged: bool
    message: str
    area_error: float = 0.0
    area_history: list = field(default_factory=list)
    volume_error_history: list = field(default_factory=list)

    def to_dict(self, include_surface: bool = True):
        d = {k: v for k, v in asdict(self).items() if k != "surface"}
        if include_surface:
            d["surface"] = self.surface.to_dict()
        return d


def _check(surface: GraphSurface, metric):
    if np.any(surface.rho <= metric.horizon_radius):
        raise DomainError("graph radii must exceed the horizon radius m/2")


def area_and_gradient(surface: GraphSurface, metric: ConformalMetric):
    """Discrete area and its exact gradient with respect to the nodal radii."""
    _check(surface, metric)
    g = surface.grid
    rho = surface.rho
    n = g.normals
    P, gradP = metric.conformal4_and_grad(rho[..., None] * n)
    dP = np.sum(gradP * n, axis=-1)
    rt = g.d_theta(rho)
    rp = g.d_phi(rho)
    inv_s2 = (1.0 / g.sin_theta**2)[:, None]
    W = np.sqrt(rho * rho + rt * rt + rp * rp * inv_s2)
    w = g.weights
    area = float(np.sum(w * P * rho * W))
    grad = w * (dP * rho * W + P * W + P * rho * rho / W)
    grad += g.d_theta_T(w * P * rho * rt / W)
    grad += g.d_phi_T(w * P * rho * rp * inv_s2 / W)
    return area, grad


def volume_and_gradient(surface: GraphSurface, metric: ConformalMetric):
    g = surface.grid
    rho = surface.rho
    vol = g.integrate(metric.ray_volume(rho, g.normals))
    return vol, g.weights * metric.ray_density(rho, g.normals)


def surface_volume(surface: GraphSurface, metric: ConformalMetric) -> float:
    g = surface.grid
    return g.integrate(metric.ray_volume(surface.rho, g.normals))


def project_volume(surface: GraphSurface, m, target_V: float, metric: ConformalMetric | None = None, rtol: float = 1e-14):
    """Rescale ``rho -> lam rho`` so the enclosed volume equals ``target_V``.

    Volume is strictly increasing in ``lam``; the root is bracketed and found
    with Brent's method.  Returns ``(surface, lam)``.
    """
    if metric is None:
        metric = SchwarzschildMetric(m)
    if not target_V > 0:
        raise DomainError("target volume must be positive")
    rho = np.asarray(surface.rho)
    a = metric.horizon_radius
    f = lambda lam: surface_volume(surface.with_rho(lam * rho), metric) - target_V
    f1 = f(1.0)
    if f1 == 0.0:
        return surface, 1.0
    lo_bound = a / float(np.min(rho)) * (1 + 1e-12) if a > 0 else 1e-12
    if f1 > 0:
        hi, lo = 1.0, 0.5
        while lo > lo_bound and f(lo) > 0:
            lo *= 0.5
        if lo <= lo_bound:
            lo = lo_bound
            if f(lo) > 0:
                raise DomainError("target volume would push the surface inside the horizon")
    else:
        lo, hi = 1.0, 2.0
        while f(hi) < 0:
            hi *= 2.0
    lam = optimize.brentq(f, lo, hi, xtol=1e-16, rtol=4 * _EPS, maxiter=200)
    return surface.with_rho(lam * rho), float(lam)


def mean_curvature(surface: GraphSurface, metric: ConformalMetric):
    """Pointwise mean curvature of the graph from its second derivatives.

    With ``u = log rho`` and ``W = sqrt(1 + |grad u|**2)`` the Euclidean mean
    curvature is ``exp(-u) (2/W - lap u / W + Hess u(grad u, grad u) / W**3)``;
    the conformal change adds ``nu . grad P / P`` and rescales by ``P**(-1/2)``.
    """
    _check(surface, metric)
    g = surface.grid
    rho = surface.rho
    d = g.derivatives(np.log(rho))
    st = g.sin_theta[:, None]
    ct = np.cos(g.theta)[:, None]
    ut, up = d["t"], d["p"]
    grad2 = ut * ut + up * up / st**2
    W = np.sqrt(1.0 + grad2)
    h_tt = d["tt"]
    h_tp = d["tp"] - ct / st * up
    h_pp = d["pp"] + st * ct * ut
    hess_uu = ut * ut * h_tt + 2.0 * ut * (up / st**2) * h_tp + (up / st**2) ** 2 * h_pp
    H_delta = (2.0 / W - d["lap"] / W + hess_uu / W**3) / rho
    nu = (g.normals - ut[..., None] * g.e_theta - (up / st)[..., None] * g.e_phi) / W[..., None]
    P, gradP = metric.conformal4_and_grad(rho[..., None] * g.normals)
    return (H_delta + np.sum(nu * gradP, axis=-1) / P) / np.sqrt(P)


def _area_weights(surface: GraphSurface, metric):
    g = surface.grid
    rho = surface.rho
    P = metric.conformal4(rho[..., None] * g.normals)
    rt, rp = g.d_theta(rho), g.d_phi(rho)
    return g.weights * P * rho * np.sqrt(rho * rho + rt * rt + rp * rp / g.sin_theta[:, None] ** 2)


def cmc_deviation(surface: GraphSurface, metric) -> tuple[float, float]:
    """``max |H - mean H| / mean H`` (area-weighted mean) and the mean."""
    H = mean_curvature(surface, metric)
    dA = _area_weights(surface, metric)
    mean = float(np.sum(H * dA) / np.sum(dA))
    return float(np.max(np.abs(H - mean)) / abs(mean)), mean


def _preconditioner(surface: GraphSurface, metric):
    g = surface.grid
    rho_bar = float(np.sum(g.weights * surface.rho) / (4 * np.pi))
    P = float(metric.conformal4(np.array([0.0, 0.0, rho_bar])))
    R_areal = np.sqrt(P) * rho_bar
    m = getattr(metric, "m", 0.0)
    mu = max(6.0 * m / R_areal, 1e-2)
    ell = np.arange(g.lmax + 1, dtype=float)
    eig = ell * (ell + 1) - 2.0 + mu
    eig[0] = 2.0
    return 1.0 / (P * eig)


def minimize(
    initial: GraphSurface,
    m,
    target_V: float,
    cfg: OptimizerConfig = OptimizerConfig(),
    metric: ConformalMetric | None = None,
) -> MinimizeReport:
    """Minimize area among radial graphs enclosing horizon-relative volume ``target_V``.

    Hitting ``max_iters`` gives a non-converged report.  A projection that
    misses ``target_V`` by more than ``cfg.volume_tol`` (relative) raises
    :class:`NumericError`.
    """
    mass = as_mass(m)
    if metric is None:
        metric = SchwarzschildMetric(mass)
    _check(initial, metric)
    g = initial.grid
    w = g.weights
    gains = _preconditioner(initial, metric)

    surf, _ = project_volume(initial, mass, target_V, metric)
    A, grad = area_and_gradient(surf, metric)
    areas = [A]
    vol_err = [abs(surface_volume(surf, metric) - target_V) / target_V]

    def held(err):
        # volume_tol is relative to the target volume
        if err > cfg.volume_tol:
            raise NumericError(f"volume projection missed the target by {err:.3g} (relative)")

    held(vol_err[0])
    converged = False
    message = "max_iters reached"
    stat = np.inf
    it = 0
    for it in range(cfg.max_iters + 1):
        vol, vgrad = volume_and_gradient(surf, metric)
        lam_nodes = grad / vgrad
        lam_mean = float(np.sum(grad) / np.sum(vgrad))
        stat = float(np.max(np.abs(lam_nodes - lam_mean)) / abs(lam_mean))
        if stat <= cfg.grad_tol:
            converged = True
            message = "stationary"
            break
        if it == cfg.max_iters:
            break
        Sg = g.filter(grad / w, gains)
        Sv = g.filter(vgrad / w, gains)
        lam = float(np.sum(vgrad * Sg) / np.sum(vgrad * Sv))
        # form the projected residual before filtering: <grad, d> computed
        # directly cancels to roundoff once stationarity nears sqrt(eps)
        resid = grad - lam * vgrad
        d = -g.filter(resid / w, gains)
        slope = float(np.sum(resid * d))
        if slope >= 0:
            message = "no descent direction"
            break
        t = cfg.step_size
        slack = 64 * _EPS * A
        accepted = False
        while t > 1e-12:
            try:
                trial = surf.with_rho(surf.rho + t * d)
                _check(trial, metric)
                trial, _ = project_volume(trial, mass, target_V, metric)
                A_t, grad_t = area_and_gradient(trial, metric)
            except DomainError:
                t *= 0.5
                continue
            if A_t <= A + cfg.armijo * t * slope + slack:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            message = "line search stalled"
            break
        surf, A, grad = trial, A_t, grad_t
        areas.append(A)
        vol_err.append(abs(surface_volume(surf, metric) - target_V) / target_V)
        held(vol_err[-1])

    vol = surface_volume(surf, metric)
    r = metric.matched_radius(target_V)
    cmc, meanH = cmc_deviation(surf, metric)
    centering = float(np.max(np.abs(surf.rho - r)) / r)
    return MinimizeReport(
        area_error=area_quadrature_error(surf, metric),
        surface=surf,
        iterations=it,
        area=A,
        volume=vol,
        target_volume=float(target_V),
        matched_radius=float(r),
        cmc_deviation=cmc,
        mean_H=meanH,
        stationarity=stat,
        centering=centering,
        converged=converged,
        message=message,
        area_history=areas,
        volume_error_history=vol_err,
    )


def area_quadrature_error(surface: GraphSurface, metric) -> float:
    """``|A - A'|`` with ``A'`` the area of the spectral interpolant on a doubled grid, floored at roundoff."""
    fine = make_grid(2 * surface.n_theta)
    rho = surface.grid.resample(surface.rho, fine)
    A = area_and_gradient(surface, metric)[0]
    A2 = area_and_gradient(GraphSurface(2 * surface.n_theta, rho, surface.grad_cap), metric)[0]
    return abs(A - A2) + 64 * _EPS * A


def profile_gap(report: MinimizeReport, m) -> float:
    """``area - A_m(V)``; nonnegative up to quadrature error for exact Schwarzschild."""
    return report.area - float(profile_area(as_mass(m), report.target_volume))


def closed_form_cmc(m, r: float) -> float:
    return float(sphere_mean_curvature(as_mass(m), r))
