"""Gevrey bumps, smooth steps, cutoff windows and mollifiers.

The Gevrey-sigma bump used throughout is

    psi_sigma(x) = exp(-(1 - x^2)^(-1/(sigma-1)))   for |x| < 1,

whose derivatives grow like (p!)^sigma; sigma = 2 gives the classical
exp(-1/(1-x^2)).
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import ParameterError


def gevrey_bump(x, sigma: float = 2.0) -> np.ndarray:
    """Unnormalized bump, exactly zero for |x| >= 1."""
    if sigma <= 1:
        raise ParameterError("Gevrey bump needs sigma > 1")
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1
    u = 1.0 - x[inside] ** 2
    with np.errstate(over="ignore", under="ignore"):
        out[inside] = np.exp(-u ** (-1.0 / (sigma - 1.0)))
    return out


@functools.lru_cache(maxsize=64)
def _moments(sigma: float, kmax: int) -> tuple:
    """Even moments int x^{2i} psi(x) dx, i = 0..kmax."""
    out = []
    for i in range(kmax + 1):
        val, _ = integrate.quad(lambda s: s ** (2 * i) * gevrey_bump(s, sigma), -1, 1,
                                epsabs=1e-15, epsrel=1e-13, limit=200)
        out.append(val)
    return tuple(out)


@functools.lru_cache(maxsize=64)
def _moment_coeffs(sigma: float, q: int) -> tuple:
    """Coefficients c_i of phi = psi * sum_i c_i x^{2i} with int phi = 1 and
    int x^{2k} phi = 0 for 1 <= k <= q // 2 (odd moments vanish by symmetry)."""
    n = q // 2 + 1
    mom = _moments(sigma, 2 * n)
    A = np.array([[mom[i + k] for i in range(n)] for k in range(n)])
    rhs = np.zeros(n)
    rhs[0] = 1.0
    return tuple(np.linalg.solve(A, rhs))


_GL_CACHE: dict = {}


def gauss_legendre(n: int):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def _composite_nodes(panels: int, R: float):
    """Gauss-Legendre nodes and weights on [-R, R] split into equal panels."""
    xs, ws = gauss_legendre(1024)
    h = R / panels
    mids = -R + h * (2 * np.arange(panels) + 1)
    return (mids[:, None] + h * xs[None]).ravel(), np.tile(ws * h, panels)


@dataclass(frozen=True)
class Mollifier:
    """phi with int phi = 1, support [-radius, radius] (gevrey_bump) and
    vanishing moments of order 1..q.  fourier_cutoff is defined through its
    transform: phihat(y) = 1 for |y| <= 1, smooth Gevrey decay to 0 at |y| = 2,
    so every moment vanishes."""

    profile: str = "gevrey_bump"
    sigma: float = 2.0
    radius: float = 1.0
    q: int = 1
    coeffs: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.profile not in ("gevrey_bump", "fourier_cutoff"):
            raise ParameterError(f"unknown mollifier profile {self.profile!r}")
        if self.sigma <= 1:
            raise ParameterError("mollifier sigma must exceed 1")
        if self.q < 0:
            raise ParameterError("moment order must be >= 0")
        c = _moment_coeffs(self.sigma, self.q) if self.profile == "gevrey_bump" else (1.0,)
        object.__setattr__(self, "coeffs", c)

    @property
    def compact(self) -> bool:
        return self.profile == "gevrey_bump"

    def __call__(self, x) -> np.ndarray:
        if self.profile == "fourier_cutoff":
            return self._cutoff_space(np.asarray(x, float))
        s = np.asarray(x, dtype=float) / self.radius
        poly = np.zeros_like(s)
        for i, c in enumerate(self.coeffs):
            poly += c * s ** (2 * i)
        return gevrey_bump(s, self.sigma) * poly / self.radius

    def fourier(self, y) -> np.ndarray:
        """phihat(y) = int phi(x) e^{-ixy} dx. Quadrature for the bump.

        A 1024-node Gauss-Legendre panel resolves |y| R up to about 1000; larger
        frequencies get a composite rule with proportionally more panels."""
        y = np.asarray(y, dtype=float)
        if self.profile == "fourier_cutoff":
            return plateau(np.abs(y), 1.0, 2.0, self.sigma)
        R = self.radius
        flat = y.ravel()
        out = np.empty(flat.size)
        order = np.argsort(np.abs(flat))
        for i in range(0, flat.size, 2048):
            idx = order[i : i + 2048]
            yc = flat[idx]
            panels = max(1, math.ceil(np.abs(yc).max() * R / 1000.0))
            xs, ws = _composite_nodes(panels, R)
            out[idx] = np.cos(np.outer(yc, xs)) @ (self(xs) * ws)
        return out.reshape(y.shape)

    def cdf(self, x) -> np.ndarray:
        """Phi(x) = int_{-inf}^x phi (exact Gauss-Legendre on [-R, x])."""
        x = np.asarray(x, dtype=float)
        if self.profile == "fourier_cutoff":
            raise ParameterError("cdf only available for the compact profile")
        R = self.radius
        xc = np.clip(x, -R, R)
        xs, ws = gauss_legendre(96)
        half = 0.5 * (xc + R)
        nodes = -R + half[..., None] * (xs + 1.0)
        return np.sum(self(nodes) * ws, axis=-1) * half

    def _cutoff_space(self, x: np.ndarray) -> np.ndarray:
        # phi(x) = (1/pi) int_0^2 phihat(y) cos(xy) dy
        ys, ws = gauss_legendre(512)
        ys = ys + 1.0  # map to [0, 2]
        ph = plateau(ys, 1.0, 2.0, self.sigma) * ws
        flat = x.ravel()
        out = np.cos(np.outer(flat, ys)) @ ph / math.pi
        return out.reshape(x.shape)

    def to_record(self) -> dict:
        return {"profile": self.profile, "sigma": self.sigma, "radius": self.radius, "q": self.q}


def smooth_step(s, sigma: float = 2.0) -> np.ndarray:
    """Gevrey step: 0 for s <= 0, 1 for s >= 1, the normalized integral of the
    bump in between."""
    s = np.asarray(s, dtype=float)
    flat = s.reshape(-1)
    out = (flat >= 1).astype(float)
    mid = (flat > 0) & (flat < 1)
    if mid.any():
        out[mid] = _unit_mollifier(sigma).cdf(2.0 * flat[mid] - 1.0) / _step_norm(sigma)
    return out.reshape(s.shape)


@functools.lru_cache(maxsize=16)
def _step_norm(sigma: float) -> float:
    return float(_unit_mollifier(sigma).cdf(np.array(1.0)))


@functools.lru_cache(maxsize=16)
def _unit_mollifier(sigma: float) -> Mollifier:
    return Mollifier("gevrey_bump", sigma, 1.0, 0)


def plateau(r, r_in: float, r_out: float, sigma: float = 2.0) -> np.ndarray:
    """1 on [0, r_in], Gevrey decay to 0 at r_out, 0 beyond (r >= 0)."""
    if not 0 <= r_in < r_out:
        raise ParameterError("plateau needs 0 <= r_in < r_out")
    r = np.asarray(r, dtype=float)
    return 1.0 - smooth_step((r - r_in) / (r_out - r_in), sigma)


@dataclass(frozen=True)
class Cutoff:
    """Radial class-M cutoff centred at x0: 1 on |x - x0| <= radius - taper,
    0 outside |x - x0| < radius."""

    center: tuple
    radius: float
    taper: float
    sigma: float = 2.0

    def __call__(self, *coords) -> np.ndarray:
        r2 = sum((np.asarray(c, float) - c0) ** 2 for c, c0 in zip(coords, self.center))
        return plateau(np.sqrt(r2), self.radius - self.taper, self.radius, self.sigma)
