"""Product quadrature and band-limited spectral calculus on the unit sphere.

Nodes are Gauss-Legendre in ``cos(theta)`` times uniform azimuth.  Functions
sampled on the nodes are differentiated through their projection onto real
spherical harmonics of degree ``<= lmax``; every linear operator also has an
exact transpose so that discrete functionals can be differentiated
analytically with respect to nodal values.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import DomainError

_SQRT_2PI = np.sqrt(2.0 * np.pi)


def normalized_legendre(lmax: int, mmax: int, x):
    """Associated Legendre functions normalized to unit ``L2[-1, 1]`` norm.

    Returns ``P, dP`` of shape ``(mmax + 1, len(x), lmax + 1)`` where ``dP`` is
    the derivative with respect to ``theta = arccos(x)``.  Entries with
    ``l < m`` are zero.  No Condon-Shortley phase.
    """
    x = np.asarray(x, dtype=float).ravel()
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    P = np.zeros((mmax + 1, x.size, lmax + 1))
    dP = np.zeros_like(P)
    pmm = np.full(x.size, 1.0 / np.sqrt(2.0))
    for m in range(mmax + 1):
        if m > 0:
            pmm = np.sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * pmm
        if m > lmax:
            break
        P[m, :, m] = pmm
        if m + 1 <= lmax:
            P[m, :, m + 1] = np.sqrt(2.0 * m + 3.0) * x * pmm
        for l in range(m + 2, lmax + 1):
            a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            P[m, :, l] = a * (x * P[m, :, l - 1] - b * P[m, :, l - 2])
        with np.errstate(divide="ignore", invalid="ignore"):
            for l in range(m, lmax + 1):
                prev = P[m, :, l - 1] if l > m else 0.0
                k = np.sqrt((2.0 * l + 1.0) * (l * l - m * m) / (2.0 * l - 1.0)) if l > m else 0.0
                dP[m, :, l] = np.where(s > 0, (l * x * P[m, :, l] - k * prev) / s, 0.0)
    return P, dP


def real_ylm(l: int, m: int, theta, phi, derivatives: bool = False):
    """Orthonormal real spherical harmonic; ``m < 0`` selects the sine family.

    With ``derivatives=True`` returns ``(Y, dY/dtheta, dY/dphi)``.
    """
    if l < 0 or abs(m) > l:
        raise DomainError(f"invalid harmonic (l={l}, m={m})")
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    am = abs(m)
    P, dP = normalized_legendre(l, am, np.cos(theta).ravel())
    p = P[am, :, l].reshape(theta.shape)
    dp = dP[am, :, l].reshape(theta.shape)
    if m == 0:
        ang, dang = np.full_like(phi, 1.0 / _SQRT_2PI), np.zeros_like(phi)
    elif m > 0:
        ang, dang = np.cos(m * phi) / np.sqrt(np.pi), -m * np.sin(m * phi) / np.sqrt(np.pi)
    else:
        ang, dang = np.sin(am * phi) / np.sqrt(np.pi), am * np.cos(am * phi) / np.sqrt(np.pi)
    Y = p * ang
    if not derivatives:
        return Y
    return Y, dp * ang, p * dang


class SphereGrid:
    """Gauss-Legendre x uniform-azimuth grid with spectral derivative operators.

    Arrays of nodal values have shape ``(n_theta, n_phi)``.  ``weights`` sum
    to ``4 pi``.
    """

    def __init__(self, n_theta: int = 128, n_phi: int | None = None, lmax: int | None = None):
        if n_phi is None:
            n_phi = 2 * n_theta
        if n_theta < 2 or n_phi < 4 or n_phi % 2:
            raise DomainError("need n_theta >= 2 and an even n_phi >= 4")
        self.n_theta = int(n_theta)
        self.n_phi = int(n_phi)
        self.lmax = int(lmax if lmax is not None else n_theta - 1)
        if not 0 <= self.lmax <= n_theta - 1:
            raise DomainError("lmax must lie in [0, n_theta - 1]")
        self.mmax = min(self.lmax, self.n_phi // 2 - 1)

        x, wx = np.polynomial.legendre.leggauss(self.n_theta)
        x, wx = x[::-1], wx[::-1]  # theta increasing
        self.x = x
        self.wx = wx
        self.theta = np.arccos(x)
        self.phi = 2.0 * np.pi * np.arange(self.n_phi) / self.n_phi
        self.sin_theta = np.sqrt(1.0 - x * x)
        self.weights = np.outer(wx, np.full(self.n_phi, 2.0 * np.pi / self.n_phi))

        T, F = np.meshgrid(self.theta, self.phi, indexing="ij")
        self.theta2d, self.phi2d = T, F
        st, ct = np.sin(T), np.cos(T)
        sp, cp = np.sin(F), np.cos(F)
        self.normals = np.stack([st * cp, st * sp, ct], axis=-1)
        self.e_theta = np.stack([ct * cp, ct * sp, -st], axis=-1)
        self.e_phi = np.stack([-sp, cp, np.zeros_like(sp)], axis=-1)

        P, dP = normalized_legendre(self.lmax, self.mmax, x)
        self._P = P
        self._dP = dP
        ell = np.arange(self.lmax + 1, dtype=float)
        ms = np.arange(self.mmax + 1, dtype=float)[:, None, None]
        cot = (x / self.sin_theta)[None, :, None]
        inv_s2 = (1.0 / self.sin_theta**2)[None, :, None]
        # Legendre equation in theta gives the second derivative.
        self._d2P = -cot * dP - (ell[None, None, :] * (ell[None, None, :] + 1) - ms**2 * inv_s2) * P
        self._WP = P * wx[None, :, None]
        self._ell = ell
        self._mfac = 1j * np.arange(self.mmax + 1)

    @property
    def shape(self):
        return (self.n_theta, self.n_phi)

    @property
    def size(self):
        return self.n_theta * self.n_phi

    def integrate(self, f):
        return float(np.sum(self.weights * f))

    # -- spectral machinery ---------------------------------------------
    def _modes(self, f):
        f = np.asarray(f, dtype=float)
        if f.shape != self.shape:
            raise DomainError(f"expected nodal array of shape {self.shape}, got {f.shape}")
        return np.fft.rfft(f, axis=1)[:, : self.mmax + 1]

    def _to_grid(self, G):
        full = np.zeros((self.n_theta, self.n_phi // 2 + 1), dtype=complex)
        full[:, : self.mmax + 1] = G
        return np.fft.irfft(full, n=self.n_phi, axis=1)

    def coefficients(self, f):
        """Per-mode Legendre coefficients, shape ``(mmax + 1, lmax + 1)`` complex."""
        return np.einsum("mjl,jm->ml", self._WP, self._modes(f))

    def _synth(self, C, which, factor=None, gains=None):
        B = {"P": self._P, "dP": self._dP, "d2P": self._d2P}[which]
        if gains is not None:
            C = C * gains[None, :]
        G = np.einsum("mjl,ml->jm", B, C)
        if factor is not None:
            G = G * factor[None, :]
        return self._to_grid(G)

    def _synth_T(self, g, which, factor=None, gains=None):
        B = {"P": self._P, "dP": self._dP, "d2P": self._d2P}[which]
        G = self._modes(g)
        if factor is not None:
            G = G * np.conj(factor)[None, :]
        C = np.einsum("mjl,jm->ml", B, G)
        if gains is not None:
            C = C * gains[None, :]
        return self._to_grid(np.einsum("mjl,ml->jm", self._WP, C))

    def project(self, f):
        """Orthogonal projection onto harmonics of degree ``<= lmax``."""
        return self._synth(self.coefficients(f), "P")

    def filter(self, f, gains):
        """Multiply the degree-``l`` component by ``gains[l]`` (projecting first)."""
        return self._synth(self.coefficients(f), "P", gains=np.asarray(gains, dtype=float))

    def d_theta(self, f):
        return self._synth(self.coefficients(f), "dP")

    def d_phi(self, f):
        return self._synth(self.coefficients(f), "P", factor=self._mfac)

    def d_theta_T(self, g):
        return self._synth_T(g, "dP")

    def d_phi_T(self, g):
        return self._synth_T(g, "P", factor=self._mfac)

    def derivatives(self, f):
        """First and second angular derivatives of the band-limited part of ``f``."""
        C = self.coefficients(f)
        mf = self._mfac
        return {
            "f": self._synth(C, "P"),
            "t": self._synth(C, "dP"),
            "p": self._synth(C, "P", factor=mf),
            "tt": self._synth(C, "d2P"),
            "tp": self._synth(C, "dP", factor=mf),
            "pp": self._synth(C, "P", factor=mf * mf),
            "lap": self._synth(C, "P", gains=-self._ell * (self._ell + 1)),
        }

    def harmonic(self, l: int, m: int):
        """Nodal values of the orthonormal real harmonic ``Y_lm``."""
        return real_ylm(l, m, self.theta2d, self.phi2d)

    def points(self, radius, center=(0.0, 0.0, 0.0)):
        """Cartesian nodes of the sphere ``center + radius * n``, shape ``(nt, np, 3)``."""
        radius = np.asarray(radius, dtype=float)
        if radius.ndim == 2:
            radius = radius[..., None]
        return np.asarray(center, dtype=float) + radius * self.normals

    def resample(self, f, other: "SphereGrid"):
        """Evaluate the band-limited interpolant of ``f`` on the nodes of ``other``."""
        C = self.coefficients(f)
        mm = min(self.mmax, other.n_phi // 2 - 1)
        P, _ = normalized_legendre(self.lmax, mm, other.x)
        G = np.einsum("mjl,ml->jm", P, C[: mm + 1])
        full = np.zeros((other.n_theta, other.n_phi // 2 + 1), dtype=complex)
        full[:, : mm + 1] = G * (other.n_phi / self.n_phi)
        return np.fft.irfft(full, n=other.n_phi, axis=1)

    def refined(self):
        return make_grid(2 * self.n_theta, 2 * self.n_phi)

    def coarsened(self):
        return make_grid(max(self.n_theta // 2, 2), max(self.n_phi // 2, 4))


@lru_cache(maxsize=16)
def make_grid(n_theta: int = 128, n_phi: int | None = None, lmax: int | None = None) -> SphereGrid:
    """Cached :class:`SphereGrid` constructor (grids are treated as immutable)."""
    return SphereGrid(n_theta, n_phi, lmax)
