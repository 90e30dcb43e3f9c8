"""Canned test nets shared by the acceptance suite, the scripts and the CLI.

1-D nets live on [-2, 2) with 2^16 cells, 2-D nets on [-0.64, 0.64)^2 with
256^2 cells; both use the ladder eps in [0.02, 0.3], J = 10.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bumps import Cutoff, Mollifier, gevrey_bump, plateau, smooth_step
from .config import DEFAULT, Config
from .nets import (EpsilonLadder, Grid, Net, delta, delta_sheet, embed_constant, heaviside,
                   mollify, multiply_function, scale, synthesize)

GRID_1D = dict(lo=-2.0, hi=2.0, count=2 ** 16)
GRID_2D = dict(lo=-0.64, hi=0.64, count=256)
LADDER = dict(eps_max=0.3, eps_min=0.02, count=10)

# 2-D windows: radius 40 cells keeps the taper spectrum below the 2-D
# resolution floor while leaving room for base points off the sheet
WINDOW_RADIUS_2D = 0.2


def config_2d(cfg: Config = DEFAULT) -> Config:
    return cfg.with_section("windows", radius=WINDOW_RADIUS_2D)


def grid_1d() -> Grid:
    return Grid.box(GRID_1D["lo"], GRID_1D["hi"], GRID_1D["count"])


def grid_2d() -> Grid:
    return Grid.box(GRID_2D["lo"], GRID_2D["hi"], GRID_2D["count"], dim=2)


def ladder() -> EpsilonLadder:
    return EpsilonLadder.span(**LADDER)


def chi(x, radius: float = 1.6) -> np.ndarray:
    """Gevrey-1.3 bump normalized to chi(0) = 1.  Its derivatives stay far
    below eps^-m on the fit half of the ladder, so products with it keep the
    eps-scaling of the other factor visible up to order 6."""
    return math.e * gevrey_bump(np.asarray(x) / radius, 1.3)


def delta_net(g=None, L=None, x0: float = 0.0) -> Net:
    return mollify(delta(x0), Mollifier(), g or grid_1d(), L or ladder())


def heaviside_cut(g=None, L=None) -> Net:
    u = mollify(heaviside(0.0), Mollifier(), g or grid_1d(), L or ladder())
    return multiply_function(u, chi, "chi")


def bump_net(g=None, L=None) -> Net:
    return embed_constant(lambda x: gevrey_bump(x), g or grid_1d(), L or ladder(), label="bump")


def inv_eps_bump(g=None, L=None) -> Net:
    return scale(bump_net(g, L), 1.0, -1.0)


def oscillation(g=None, L=None) -> Net:
    return synthesize(lambda x, e: np.cos(x / e) * chi(x), g or grid_1d(), L or ladder(), "cos(x/eps) chi")


def heavy_tail_profile(g: Grid, xi_c: float = 32.0, sign: int = 1) -> np.ndarray:
    """Inverse DFT of |xi|^-1 on sign*xi > xi_c, switched on smoothly above xi_c
    and tapered off between 0.9 and 0.98 of Nyquist, so the tail reaches the
    resolution band."""
    k = g.wavenumbers(0) * sign
    nyq = g.nyquist()
    F = np.zeros_like(k)
    pos = k > 0
    F[pos] = smooth_step((k[pos] - xi_c) / xi_c) * plateau(k[pos], 0.9 * nyq, 0.98 * nyq) / k[pos]
    x = g.axis(0)
    # continuous normalization: f(x) = (2 pi)^-1 sum F e^{i x xi} dxi
    f = np.fft.ifft(F * np.exp(1j * g.wavenumbers(0) * g.origin[0])) * g.count[0] * g.dxi(0) / (2 * math.pi)
    return f * chi(x)


def heavy_tail(g=None, L=None, sign: int = 1) -> Net:
    g = g or grid_1d()
    return embed_constant(heavy_tail_profile(g, sign=sign), g, L or ladder(),
                          label="heavy tail +" if sign > 0 else "heavy tail -")


@dataclass(frozen=True)
class CannedNet:
    name: str
    net: Net
    sigma_expected: frozenset  # 1-D sectors: 0 = +, 1 = -


def canned_suite_1d() -> list:
    g, L = grid_1d(), ladder()
    return [
        CannedNet("delta", delta_net(g, L), frozenset()),
        CannedNet("heaviside_cut", heaviside_cut(g, L), frozenset()),
        CannedNet("bump", bump_net(g, L), frozenset()),
        CannedNet("inv_eps_bump", inv_eps_bump(g, L), frozenset()),
        CannedNet("oscillation", oscillation(g, L), frozenset()),
        CannedNet("heavy_tail", heavy_tail(g, L), frozenset({0})),
    ]


def lacunary_series(x, alpha: float = 7.0, J: int = 14) -> np.ndarray:
    """sum_{j <= J} exp(-j^2 / alpha) cos(2^j x): smooth and 2 pi periodic, with
    derivative growth faster than any fixed Gevrey-2 envelope on the probed
    orders."""
    return sum(math.exp(-j * j / alpha) * np.cos(2.0 ** j * x) for j in range(J + 1))


def lacunary_grid() -> Grid:
    return Grid.box(-math.pi, math.pi, 2 ** 17)


def delta_sheet_2d(axis: int = 0, g=None, L=None) -> Net:
    """Mollified delta(x) (x) 1 (axis 0) or 1 (x) delta(y) (axis 1), periodic
    along the sheet."""
    per = [False, False]
    per[1 - axis] = True
    return mollify(delta_sheet(axis, 0.0), Mollifier(), g or grid_2d(), L or ladder(), periodic=tuple(per))


def bump_2d(g=None, L=None) -> Net:
    return embed_constant(lambda x, y: gevrey_bump(np.sqrt(x * x + y * y) / 0.5), g or grid_2d(),
                          L or ladder(), label="bump2d")
