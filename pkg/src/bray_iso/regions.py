"""Test regions enclosing the horizon, and their boundary areas and volumes.

Every region is implicitly unioned with the horizon ball ``B_{m/2}``; volumes
are horizon-relative.  A region's boundary is a list of parametrized
pieces (spheres or radial graphs over a :class:`~bray_iso.sphere.SphereGrid`),
plus the horizon sphere itself when no member of the region contains it.
Areas are quadratures of the metric's area element over these pieces;
volumes use closed-form ray integrals for star-shaped parts and a radial
Gauss-Legendre x sphere grid for detached balls.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import chart as _chart
from .chart import ChartParams, RadialProfile
from .errors import DomainError, NumericError
from .metrics import ChartMetric, ConformalMetric, SchwarzschildMetric
from .schwarzschild import FOUR_PI, as_mass
from .sphere import SphereGrid, make_grid

_REL = 1e-12
# summation roundoff floor for the resolution error estimates
_ROUNDOFF = 1e-13


@dataclass(frozen=True)
class CenteredBall:
    r: float

    def __post_init__(self):
        if not (np.isfinite(self.r) and self.r > 0):
            raise DomainError("ball radius must be positive")


@dataclass(frozen=True)
class OffsetBall:
    center: tuple
    rho: float

    def __post_init__(self):
        c = tuple(float(x) for x in self.center)
        if len(c) != 3 or not all(np.isfinite(c)):
            raise DomainError("ball center must be a finite 3-vector")
        if not (np.isfinite(self.rho) and self.rho > 0):
            raise DomainError("ball radius must be positive")
        object.__setattr__(self, "center", c)

    @property
    def distance(self) -> float:
        return float(np.linalg.norm(self.center))


@dataclass(frozen=True, eq=False)
class RadialGraph:
    """Star-shaped region ``{t w : t <= rho(w)}`` with ``rho`` sampled on a sphere grid."""

    rho: np.ndarray

    def __post_init__(self):
        rho = np.array(self.rho, dtype=float)
        if rho.ndim != 2 or rho.shape[1] != 2 * rho.shape[0]:
            raise DomainError("rho must have shape (n, 2n) matching a sphere grid")
        if not np.all(np.isfinite(rho)) or np.any(rho <= 0):
            raise DomainError("graph radii must be positive")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @property
    def grid(self) -> SphereGrid:
        return make_grid(*self.rho.shape)

    @classmethod
    def from_harmonics(cls, r: float, terms=(), n_theta: int = 64):
        """``rho = r (1 + sum a_lm Y_lm)`` with ``terms = [(l, m, a_lm), ...]``."""
        g = make_grid(n_theta)
        shape = np.ones(g.shape)
        for l, mm, amp in terms:
            shape = shape + amp * g.harmonic(l, mm)
        return cls(r * shape)


@dataclass(frozen=True)
class BallUnion:
    balls: tuple

    def __post_init__(self):
        balls = []
        for b in self.balls:
            if isinstance(b, CenteredBall):
                b = OffsetBall((0.0, 0.0, 0.0), b.r)
            if not isinstance(b, OffsetBall):
                raise DomainError("BallUnion members must be balls")
            balls.append(b)
        if not balls:
            raise DomainError("BallUnion needs at least one ball")
        for i in range(len(balls)):
            for j in range(i + 1, len(balls)):
                d = np.linalg.norm(np.subtract(balls[i].center, balls[j].center))
                if d <= balls[i].rho + balls[j].rho:
                    raise DomainError(f"BallUnion members {i} and {j} overlap")
        object.__setattr__(self, "balls", tuple(balls))


Region = Union[CenteredBall, OffsetBall, RadialGraph, BallUnion]


@dataclass(frozen=True)
class SurfaceQuadrature:
    """Resolution of the surface (and radial) quadrature."""

    n_theta: int = 128
    n_phi: int | None = None
    n_radial: int = 64

    def __post_init__(self):
        if self.n_phi is None:
            object.__setattr__(self, "n_phi", 2 * self.n_theta)
        if self.n_theta < 4 or self.n_radial < 4:
            raise DomainError("quadrature resolution too small")

    @property
    def grid(self) -> SphereGrid:
        return make_grid(self.n_theta, self.n_phi)

    def coarsened(self) -> "SurfaceQuadrature":
        return SurfaceQuadrature(self.n_theta // 2, self.n_phi // 2, max(self.n_radial // 2, 4))

    def refined(self) -> "SurfaceQuadrature":
        return SurfaceQuadrature(2 * self.n_theta, 2 * self.n_phi, 2 * self.n_radial)

    def to_dict(self):
        return {"n_theta": self.n_theta, "n_phi": self.n_phi, "n_radial": self.n_radial}


DEFAULT_SURFACE_QUADRATURE = SurfaceQuadrature()


@dataclass
class Piece:
    """Parametrized boundary piece: points, tangents ``d_theta X`` and ``d_phi X / sin``, weights."""

    X: np.ndarray
    T1: np.ndarray
    T2: np.ndarray
    w: np.ndarray
    label: str
    meta: dict = field(default_factory=dict)


def _sphere_piece(g: SphereGrid, center, radius, label):
    center = np.asarray(center, dtype=float)
    return Piece(
        X=center + radius * g.normals,
        T1=radius * g.e_theta,
        T2=radius * g.e_phi,
        w=g.weights,
        label=label,
        meta={"center": tuple(center), "radius": float(radius)},
    )


def _graph_piece(g: SphereGrid, rho, label="graph"):
    d = g.derivatives(rho)
    n = g.normals
    rt = d["t"][..., None]
    rp = (d["p"] / g.sin_theta[:, None])[..., None]
    R = rho[..., None]
    return Piece(X=R * n, T1=rt * n + R * g.e_theta, T2=rp * n + R * g.e_phi, w=g.weights, label=label)


def _ball_relation(ball: OffsetBall, a: float) -> str:
    d = ball.distance
    if d + a <= ball.rho * (1 + _REL) or (a == 0 and d <= ball.rho):
        return "contains"
    if d - ball.rho >= a * (1 - _REL) and d > ball.rho:
        return "disjoint"
    raise DomainError(
        f"ball (center distance {d:g}, radius {ball.rho:g}) neither contains nor avoids the horizon ball of radius {a:g}"
    )


def _members(region: Region, a: float):
    """Components as ``(kind, object)`` with kind in {'star', 'detached'}; validates against the horizon."""
    if isinstance(region, CenteredBall):
        if region.r < a * (1 - _REL):
            raise DomainError("centered ball smaller than the horizon")
        return [("star", OffsetBall((0.0, 0.0, 0.0), max(region.r, a)))]
    if isinstance(region, OffsetBall):
        return [("star" if _ball_relation(region, a) == "contains" else "detached", region)]
    if isinstance(region, RadialGraph):
        if np.any(region.rho <= a):
            raise DomainError("graph radii must exceed the horizon radius m/2")
        return [("star", region)]
    if isinstance(region, BallUnion):
        return [("star" if _ball_relation(b, a) == "contains" else "detached", b) for b in region.balls]
    raise DomainError(f"unknown region type {type(region).__name__}")


def contains_horizon(region: Region, a: float) -> bool:
    return any(kind == "star" for kind, _ in _members(region, a))


def _star_radius(ball: OffsetBall, dirs):
    """Distance from the origin to the sphere along ``dirs`` (origin inside the ball)."""
    p = np.asarray(ball.center)
    b = dirs @ p
    return b + np.sqrt(np.clip(b * b - p @ p + ball.rho**2, 0.0, None))


def boundary_pieces(region: Region, horizon_radius: float, q: SurfaceQuadrature = DEFAULT_SURFACE_QUADRATURE):
    """Parametrized boundary pieces of ``region`` union the horizon ball."""
    g = q.grid
    a = float(horizon_radius)
    members = _members(region, a)
    pieces = []
    for i, (kind, obj) in enumerate(members):
        if isinstance(obj, RadialGraph):
            pieces.append(_graph_piece(obj.grid, obj.rho))
        elif kind == "star" and obj.distance == 0.0 and abs(obj.rho - a) <= _REL * max(a, 1.0):
            # centered ball equal to the horizon: boundary is the horizon itself
            pieces.append(_sphere_piece(g, obj.center, obj.rho, "horizon"))
        else:
            pieces.append(_sphere_piece(g, obj.center, obj.rho, f"ball{i}"))
    if a > 0 and not any(kind == "star" for kind, _ in members):
        pieces.append(_sphere_piece(g, (0.0, 0.0, 0.0), a, "horizon"))
    return pieces


def _horizon_radius(metric) -> float:
    if isinstance(metric, ChartMetric):
        return metric.chart.m / 2.0
    return metric.horizon_radius


def piece_to_chart(piece: Piece, chart: ChartParams, horizon_s: float | None = None) -> Piece:
    """Push a piece forward to chart coordinates.

    Exterior points (``r' >= r``) map radially by equal enclosed volume.  The
    horizon maps to ``{horizon_s} x S2`` (the minimal sphere of the interior
    copy), which requires ``horizon_s``.
    """
    if piece.label == "horizon":
        if horizon_s is None:
            raise DomainError("mapping the horizon into the chart needs the interior profile")
        scale = horizon_s / piece.meta["radius"]
        return Piece(piece.X * scale, piece.T1 * scale, piece.T2 * scale, piece.w, "horizon", dict(piece.meta))
    X = piece.X
    rp = np.linalg.norm(X, axis=-1)
    if np.any(rp < chart.r * (1 - 1e-12)):
        raise DomainError(
            f"boundary reaches r' = {rp.min():.6g} inside the chart sphere r = {chart.r:.6g}; only exterior points transfer"
        )
    s = np.asarray(_chart.to_chart_radius(chart, rp))
    ds = np.asarray(_chart.to_chart_radius_derivative(chart, rp))
    n = X / rp[..., None]

    def push(T):
        nt = np.sum(n * T, axis=-1)[..., None]
        return ds[..., None] * nt * n + (s / rp)[..., None] * (T - nt * n)

    return Piece(s[..., None] * n, push(piece.T1), push(piece.T2), piece.w, piece.label, dict(piece.meta))


def _piece_area(piece: Piece, metric, outside: float | None = None):
    dens = metric.area_density(piece.X, piece.T1, piece.T2)
    w = piece.w
    if outside is not None:
        w = np.where(np.linalg.norm(piece.X, axis=-1) > outside, w, 0.0)
    return float(np.sum(w * dens))


def _chart_pieces(region, metric: ChartMetric, q):
    a = metric.chart.m / 2.0
    horizon_s = None
    if metric.w is not None:
        info = _chart.inner_area_minimum(metric.chart, metric.w)
        horizon_s = info["s_min"]
    return [piece_to_chart(p, metric.chart, horizon_s) for p in boundary_pieces(region, a, q)]


def _resampled(region, q: SurfaceQuadrature):
    if isinstance(region, RadialGraph):
        src = region.grid
        dst = make_grid(q.n_theta, q.n_phi)
        if dst.shape == src.shape:
            return region
        return RadialGraph(src.resample(region.rho, dst))
    return region


def boundary_area(
    region: Region,
    metric,
    q: SurfaceQuadrature = DEFAULT_SURFACE_QUADRATURE,
    outside: float | None = None,
    tol: float | None = None,
) -> float:
    """Area of the boundary of ``region`` union the horizon ball under ``metric``.

    ``outside`` restricts to nodes with ``|x| > outside`` (sharp masking).  With
    ``tol`` the value is compared against a half-resolution rerun and a
    :class:`NumericError` is raised when they differ by more than ``tol``.
    """
    if tol is not None:
        val, err = boundary_area_estimate(region, metric, q, outside)
        if err > tol:
            raise NumericError(f"area quadrature error estimate {err:.3g} exceeds tolerance {tol:.3g}", partial=val)
        return val
    if isinstance(metric, ChartMetric):
        pieces = _chart_pieces(region, metric, q)
    else:
        pieces = boundary_pieces(region, _horizon_radius(metric), q)
    return sum(_piece_area(p, metric, outside) for p in pieces)


def boundary_area_estimate(region, metric, q=DEFAULT_SURFACE_QUADRATURE, outside=None):
    """Area and a resolution error estimate ``|A(q) - A(q/2)|``."""
    fine = boundary_area(region, metric, q, outside)
    cq = q.coarsened()
    coarse = boundary_area(_resampled(region, cq), metric, cq, outside)
    return fine, abs(fine - coarse) + _ROUNDOFF * abs(fine)


def _detached_volume(ball: OffsetBall, metric, q: SurfaceQuadrature, exclude_radius=None):
    g = q.grid
    t, wt = np.polynomial.legendre.leggauss(q.n_radial)
    t = 0.5 * ball.rho * (t + 1.0)
    wt = 0.5 * ball.rho * wt
    total = 0.0
    for tk, wk in zip(t, wt):
        X = np.asarray(ball.center) + tk * g.normals
        dens = metric.volume_density(X)
        if exclude_radius is not None:
            dens = np.where(np.linalg.norm(X, axis=-1) > exclude_radius, dens, 0.0)
        total += wk * tk * tk * float(np.sum(g.weights * dens))
    return total


def region_volume(
    region: Region,
    metric,
    q: SurfaceQuadrature = DEFAULT_SURFACE_QUADRATURE,
    exclude_radius: float | None = None,
) -> float:
    """Horizon-relative volume of ``region`` union the horizon ball.

    With ``exclude_radius`` only the part outside ``B_{exclude_radius}`` is
    measured.  Under the chart metric the result is the volume of the chart
    image: the Schwarzschild volume when the interior profile is supplied,
    and that minus ``V0`` when the flat cone stands in for the interior.
    """
    if isinstance(metric, ChartMetric):
        if exclude_radius is not None:
            raise DomainError("exclusion is not supported for chart volumes")
        V = region_volume(region, SchwarzschildMetric(metric.chart.m), q)
        return V if metric.w is not None else V - metric.chart.V0
    a = metric.horizon_radius
    g = q.grid
    cut = None if exclude_radius is None else max(float(exclude_radius), a)

    def ray(R, dirs):
        if cut is None:
            return metric.ray_volume(R, dirs)
        R = np.asarray(R, dtype=float)
        return metric.ray_volume(np.maximum(R, cut), dirs) - metric.ray_volume(np.full(R.shape, cut), dirs)

    total = 0.0
    for kind, obj in _members(region, a):
        if isinstance(obj, RadialGraph):
            gg = obj.grid
            total += gg.integrate(ray(obj.rho, gg.normals))
        elif kind == "star":
            if obj.distance == 0.0 and cut is None:
                total += metric.centered_volume(obj.rho)
            else:
                R = _star_radius(obj, g.normals)
                total += g.integrate(ray(R, g.normals))
        else:
            total += _detached_volume(obj, metric, q, cut)
    return float(total)


def region_volume_estimate(region, metric, q=DEFAULT_SURFACE_QUADRATURE):
    fine = region_volume(region, metric, q)
    cq = q.coarsened()
    coarse = region_volume(_resampled(region, cq), metric, cq)
    return fine, abs(fine - coarse) + _ROUNDOFF * abs(fine)


@dataclass(frozen=True)
class OffCenterReport:
    V: float
    r: float
    tau: float
    eta: float
    area_outside: float
    sphere_area: float
    below_threshold: bool

    def to_dict(self):
        return dict(self.__dict__)


def off_center_classify(
    region: Region,
    m,
    tau: float,
    metric: ConformalMetric | None = None,
    q: SurfaceQuadrature = DEFAULT_SURFACE_QUADRATURE,
) -> OffCenterReport:
    """Matched radius and the area fraction ``eta`` of the boundary outside ``B_{tau r}``."""
    mass = as_mass(m)
    if not tau > 1:
        raise DomainError("tau must exceed 1")
    if metric is None:
        metric = SchwarzschildMetric(mass)
    V = region_volume(region, metric, q)
    if not V > 0:
        raise DomainError("region has zero volume")
    r = metric.matched_radius(V)
    ref = metric.centered_sphere_area(r)
    out = boundary_area(region, metric, q, outside=tau * r)
    return OffCenterReport(
        V=V,
        r=r,
        tau=float(tau),
        eta=out / ref,
        area_outside=out,
        sphere_area=ref,
        below_threshold=bool(r < 1.0),
    )


def to_chart(points, chart: ChartParams):
    """Map exterior isotropic points into chart coordinates; see :func:`bray_iso.chart.to_chart`."""
    return _chart.to_chart(points, chart)


# -- JSON ----------------------------------------------------------------
def region_to_dict(region: Region) -> dict:
    if isinstance(region, CenteredBall):
        return {"type": "centered_ball", "r": region.r}
    if isinstance(region, OffsetBall):
        return {"type": "offset_ball", "center": list(region.center), "rho": region.rho}
    if isinstance(region, RadialGraph):
        return {"type": "radial_graph", "n_theta": region.rho.shape[0], "rho": region.rho.tolist()}
    if isinstance(region, BallUnion):
        return {"type": "ball_union", "balls": [region_to_dict(b) for b in region.balls]}
    raise DomainError(f"unknown region type {type(region).__name__}")


def region_from_dict(d: dict) -> Region:
    """Inverse of :func:`region_to_dict`.

    ``radial_graph`` also accepts ``{"r": r, "harmonics": [[l, m, a], ...], "n_theta": n}``.
    """
    if not isinstance(d, dict) or "type" not in d:
        raise DomainError("region description needs a 'type' field")
    kind = d["type"]
    try:
        if kind == "centered_ball":
            return CenteredBall(float(d["r"]))
        if kind == "offset_ball":
            return OffsetBall(tuple(d["center"]), float(d["rho"]))
        if kind == "radial_graph":
            if "rho" in d:
                return RadialGraph(np.asarray(d["rho"], dtype=float))
            return RadialGraph.from_harmonics(float(d["r"]), [tuple(t) for t in d.get("harmonics", [])], int(d.get("n_theta", 64)))
        if kind == "ball_union":
            return BallUnion(tuple(region_from_dict(b) for b in d["balls"]))
    except (KeyError, TypeError) as exc:
        raise DomainError(f"malformed {kind} description: {exc}") from exc
    raise DomainError(f"unknown region type {kind!r}")
