"""Fourier-side affine ultraregularity: spectra, cone partitions, decay-bound
fits, singular direction sets, wave front estimates and their calculus.

The decay bound tested per cone is

    |F(f_eps)(xi)| <= C eps^-b exp(-M~(k eps^a |xi|)),   |xi| >= rho0.

On a finite grid every slice admits some k > 0, so the falsifiable content is
the eps-trend: a is read off the log-log slope of the per-slice best k_j and
the bound is then certified jointly on all slices with the resulting (a, b, k).
A sector whose spectrum still carries energy near the Nyquist band is
unresolved and reported as a FAIL.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .classify import _r, local_ok, local_window, slice_sups, window_centers, window_radius, window_sigma
from .config import DEFAULT, Config, DecayConfig, WindowConfig
from .errors import CertificateError, GeometryError, ParameterError, ResolutionError
from .nets import DiffOp, Net, apply_diffop, multiply
from .weights import AssociatedFunctionTable, WeightSequence, associated_function


# ---------------------------------------------------------------------------
# spectra


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Continuous-normalized DFT of every slice, in numpy FFT ordering."""

    grid: object
    eps: np.ndarray
    values: np.ndarray  # (J, *grid.shape) complex
    parseval_error: float = 0.0

    @property
    def dim(self) -> int:
        return self.grid.dim

    def xi_mesh(self) -> list:
        return _xi_mesh(self.grid)

    def radius(self) -> np.ndarray:
        return _xi_polar(self.grid)[0]

    def angle(self) -> np.ndarray:
        return _xi_polar(self.grid)[1]

    @property
    def dxi(self) -> float:
        return max(self.grid.dxi(i) for i in range(self.dim))

    @property
    def nyquist(self) -> float:
        return self.grid.nyquist()

    def modulus(self) -> np.ndarray:
        return np.abs(self.values)


@functools.lru_cache(maxsize=32)
def _xi_mesh(grid) -> list:
    return np.meshgrid(*[grid.wavenumbers(i) for i in range(grid.dim)], indexing="ij")


@functools.lru_cache(maxsize=32)
def _xi_polar(grid) -> tuple:
    k = _xi_mesh(grid)
    rad = np.sqrt(sum(c ** 2 for c in k))
    if grid.dim == 1:
        ang = np.where(k[0] >= 0, 0.0, math.pi)
    else:
        ang = np.mod(np.arctan2(k[1], k[0]), 2 * math.pi)
    return rad, ang


def fourier(net: Net, parseval_tol: float = 1e-8) -> Spectrum:
    """F(f_eps)(xi) = sum_x f_eps(x) e^{-i x.xi} dx^n on the dual grid."""
    if not net.is_compact():
        raise GeometryError("fourier needs a net supported inside the padded grid")
    g = net.grid
    axes = tuple(range(1, g.dim + 1))
    vol = float(np.prod(g.spacing))
    F = np.fft.fftn(net.samples, axes=axes) * vol
    # origin phase: x_j = origin + j dx
    phase = np.ones(g.shape, complex)
    for i, k in enumerate(np.meshgrid(*[g.wavenumbers(i) for i in range(g.dim)], indexing="ij")):
        phase = phase * np.exp(-1j * k * g.origin[i])
    F = F * phase[None]
    # Parseval: sum |f|^2 dx^n = (2 pi)^-n sum |F|^2 dxi^n
    dual = float(np.prod([g.dxi(i) for i in range(g.dim)]))
    lhs = np.sum(np.abs(net.samples) ** 2, axis=axes) * vol
    rhs = np.sum(np.abs(F) ** 2, axis=axes) * dual / (2 * math.pi) ** g.dim
    scale = max(float(lhs.max()), 1e-300)
    err = float(np.max(np.abs(lhs - rhs))) / scale
    if err > parseval_tol:
        raise GeometryError(f"Parseval check failed (relative error {err:.2e})")
    return Spectrum(g, net.eps, F, err)


# ---------------------------------------------------------------------------
# cone partition


@dataclass(frozen=True)
class ConePartition:
    dim: int
    centers: tuple  # angles in [0, 2 pi)
    half_angle: float
    overlap: float = 0.25
    delta_sep: float = 0.25

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ParameterError("cone partitions exist for dim 1 and 2")
        if self.dim == 1 and len(self.centers) != 2:
            raise ParameterError("1-D partition has exactly two sectors")
        if not 0 < self.delta_sep < 0.5:
            raise ParameterError("delta_sep must lie in (0, 1/2)")
        if self.dim == 2 and self.half_angle * len(self.centers) < math.pi:
            raise ParameterError("sectors do not cover the circle")

    @classmethod
    def default(cls, dim: int, cfg: DecayConfig = DEFAULT.decay) -> "ConePartition":
        n = 2 if dim == 1 else cfg.n_sectors_2d
        centers = tuple(2 * math.pi * s / n for s in range(n))
        return cls(dim, centers, math.pi / n * (1 + cfg.overlap), cfg.overlap, cfg.delta_sep)

    @property
    def n(self) -> int:
        return len(self.centers)

    def direction(self, s: int) -> np.ndarray:
        t = self.centers[s]
        return np.array([math.cos(t), math.sin(t)])

    def label(self, s: int) -> str:
        if self.dim == 1:
            return "+" if s == 0 else "-"
        return f"{math.degrees(self.centers[s]):.0f}deg"

    def mask(self, spec: Spectrum, s: int) -> np.ndarray:
        ang = spec.angle()
        if self.dim == 1:
            k = spec.xi_mesh()[0]
            return k > 0 if s == 0 else k < 0
        d = np.abs(np.mod(ang - self.centers[s] + math.pi, 2 * math.pi) - math.pi)
        return d <= self.half_angle + 1e-12

    def neighbours(self, s: int, slack: int) -> set:
        """Sectors within `slack` steps of s; in 1-D the two sectors are
        antipodal, so slack never applies."""
        if self.dim == 1 or slack <= 0:
            return {s}
        return {(s + d) % self.n for d in range(-slack, slack + 1)}

    def includes(self, A, B, slack: int = 1) -> bool:
        """A within B up to `slack` neighbouring sectors."""
        widened = set()
        for s in B:
            widened |= self.neighbours(s, slack)
        return set(A) <= widened

    def to_record(self) -> dict:
        return {"dim": self.dim, "n_sectors": self.n, "half_angle_deg": _r(math.degrees(self.half_angle), 4),
                "delta_sep": self.delta_sep}


# ---------------------------------------------------------------------------
# decay fits


@dataclass(frozen=True)
class DecayFit:
    passed: bool
    a: float | None
    b: float | None
    k: float | None
    ln_C: float | None
    margin: float | None
    rho0: float
    a_hat: float | None = None
    b_hat: float | None = None
    resolved: bool = True
    reason: str = ""
    lam: np.ndarray = field(default=None, repr=False, compare=False)
    k_slices: np.ndarray = field(default=None, repr=False, compare=False)

    def to_record(self) -> dict:
        return {"verdict": "PASS" if self.passed else "FAIL", "a": _r(self.a), "b": _r(self.b),
                "k": _r(self.k), "ln_C": _r(self.ln_C), "margin": _r(self.margin),
                "rho0": _r(self.rho0), "a_hat": _r(self.a_hat), "b_hat": _r(self.b_hat),
                "resolved": self.resolved, "reason": self.reason}


def _table(M) -> AssociatedFunctionTable:
    if isinstance(M, AssociatedFunctionTable):
        return M
    if isinstance(M, WeightSequence):
        return associated_function(M)
    raise ParameterError("M must be a WeightSequence or an associated-function table")


def _slope(x: np.ndarray, y: np.ndarray) -> float:
    if x.size < 2:
        return 0.0
    return float(np.polyfit(x, y, 1)[0])


def fit_decay(spec: Spectrum, cone, M, cfg: DecayConfig = DEFAULT.decay, noise=None) -> DecayFit:
    """Affine decay bound on one cone (a boolean mask or a (partition, sector)
    pair).  Returns a DecayFit whose ``passed`` carries the verdict.

    ``noise`` (per slice, absolute) is the roundoff level of the data the
    spectrum came from; band content below it never counts as unresolved."""
    T = _table(M)
    if isinstance(cone, tuple):
        part, s = cone
        cone = part.mask(spec, s)
    cone = np.asarray(cone, bool)
    rho0 = cfg.rho0_cells * spec.dxi
    rad = spec.radius()
    sel = cone & (rad >= rho0)
    band = sel & (rad >= cfg.band_fraction * spec.nyquist)
    absF = spec.modulus()
    J = absF.shape[0]
    L = np.log(1.0 / spec.eps)
    ref = absF.reshape(J, -1).max(axis=1)
    top = float(ref.max())
    if top == 0:
        return DecayFit(True, 0.0, 0.0, math.inf, -math.inf, math.inf, rho0, reason="zero spectrum")
    live = ref > cfg.null_rel * top
    r_sel = rad[sel]
    lam = np.full(J, -np.inf)
    kj = np.full(J, np.inf)
    pts = []
    n_fit = max(2, int(math.ceil(cfg.fit_fraction * J)))
    for j in range(J):
        if not live[j]:
            pts.append(None)
            continue
        # resolution matters in the asymptotic regime, the small-eps half
        lim = _floor(spec.dim, cfg) * ref[j]
        if noise is not None:
            lim = max(lim, float(noise[j]))
        if j >= J - n_fit and band.any() and absF[j][band].max() > lim:
            return DecayFit(False, None, None, None, None, None, rho0, resolved=False,
                            reason=f"spectrum unresolved near Nyquist at eps = {spec.eps[j]:.4g}")
        v = absF[j][sel]
        keep = v > cfg.noise_rel * ref[j]
        if not keep.any():
            pts.append(None)
            continue
        lv, rv = np.log(v[keep]), r_sel[keep]
        pts.append((lv, rv))
        lam[j] = lv.max()
        t, cert = T.inverse(lam[j] + cfg.slack - lv)
        if not np.all(cert):
            raise CertificateError("M~ inverse uncertified; raise the sequence length P")
        kj[j] = float(np.min(t / rv))
    used = np.array([p is not None for p in pts])
    if not used.any():
        return DecayFit(True, 0.0, 0.0, math.inf, -math.inf, math.inf, rho0,
                        reason="no spectral content above the noise floor in this cone",
                        lam=lam, k_slices=kj)
    fit_idx = np.arange(J - n_fit, J)
    fit_idx = fit_idx[used[fit_idx]]
    lk = np.log(kj[fit_idx])
    a_hat = _slope(np.log(spec.eps[fit_idx]), lk)
    b_hat = _slope(L[fit_idx], lam[fit_idx])
    grid_a = np.round(np.arange(0.0, cfg.a_max + 1e-9, cfg.a_step), 10)
    cand = grid_a[grid_a >= a_hat - cfg.a_tol]
    if cand.size == 0:
        return DecayFit(False, None, None, None, None, None, rho0, a_hat, b_hat,
                        reason=f"decay scale shrinks like eps^{a_hat:.3g}, beyond a <= {cfg.a_max:g}",
                        lam=lam, k_slices=kj)
    b = max(b_hat, 0.0)
    if b > cfg.b_max:
        return DecayFit(False, None, None, None, None, None, rho0, a_hat, b_hat,
                        reason=f"growth exponent {b_hat:.3g} exceeds b_max", lam=lam, k_slices=kj)
    ln_C = float(np.max(lam[used] - b * L[used])) + cfg.slack
    a = float(cand[0])
    k = math.inf
    for j in np.nonzero(used)[0]:
        lv, rv = pts[j]
        t, cert = T.inverse(ln_C + b * L[j] - lv)
        if not np.all(cert):
            raise CertificateError("M~ inverse uncertified; raise the sequence length P")
        k = min(k, float(np.min(t / (spec.eps[j] ** a * rv))))
    if not k >= cfg.k_min:
        return DecayFit(False, a, b, k, ln_C, None, rho0, a_hat, b_hat,
                        reason="no admissible k above k_min", lam=lam, k_slices=kj)
    # certify the bound on every slice and sampled frequency
    margin = math.inf
    for j in np.nonzero(used)[0]:
        lv, rv = pts[j]
        ev = T.evaluate(k * spec.eps[j] ** a * rv)
        if not np.all(ev.certified):
            raise CertificateError("M~ evaluation uncertified on the fitted range")
        margin = min(margin, float(np.min(ln_C + b * L[j] - ev.value - lv)))
    ok = margin >= -1e-9
    return DecayFit(bool(ok), a, b, k, ln_C, margin, rho0, a_hat, b_hat,
                    reason="" if ok else "bound violated after fitting", lam=lam, k_slices=kj)


def _floor(dim: int, cfg: DecayConfig) -> float:
    return cfg.resolve_floor if dim == 1 else cfg.resolve_floor_2d


# ---------------------------------------------------------------------------
# singular direction sets


@dataclass(frozen=True)
class SigmaResult:
    sectors: frozenset
    fits: tuple  # DecayFit per sector

    def to_record(self, part: ConePartition) -> dict:
        return {"sectors": [part.label(s) for s in sorted(self.sectors)],
                "fits": {part.label(s): f.to_record() for s, f in enumerate(self.fits)}}


def sigma_set(f: Net, M, part: ConePartition | None = None, cfg: Config = DEFAULT, noise=None) -> SigmaResult:
    """Sectors without an affine decay bound for a compactly supported net.
    ``noise`` is passed through to ``fit_decay``."""
    part = ConePartition.default(f.dim, cfg.decay) if part is None else part
    if part.dim != f.dim:
        raise ParameterError("partition and net dimensions differ")
    if f.is_zero:
        z = DecayFit(True, 0.0, 0.0, math.inf, -math.inf, math.inf, 0.0, reason="zero net")
        return SigmaResult(frozenset(), (z,) * part.n)
    spec = fourier(f)
    T = _table(M)
    fits = tuple(fit_decay(spec, (part, s), T, cfg.decay, noise) for s in range(part.n))
    return SigmaResult(frozenset(s for s, ft in enumerate(fits) if not ft.passed), fits)


def roundoff_level(w: Net, ref, cfg: DecayConfig = DEFAULT.decay) -> np.ndarray:
    """Spectral size of white roundoff on ``w`` when the samples carry errors of
    one ulp of ``ref`` (per slice sup of the net the window was cut from),
    times ``roundoff_factor``."""
    n = max(int(np.count_nonzero(w.samples[0])), 1)
    cell = float(np.prod(w.grid.spacing))
    return cfg.roundoff_factor * np.finfo(float).eps * np.asarray(ref) * cell * math.sqrt(n)


def window_radii(net: Net, wcfg: WindowConfig) -> list:
    r0 = window_radius(net, wcfg)
    radii = [r0 * wcfg.shrink ** i for i in range(wcfg.n_radii)]
    if radii[-1] < wcfg.min_cells * net.grid.dx:
        raise ResolutionError(f"window radius {radii[-1]:.4g} is below {wcfg.min_cells} grid cells")
    return radii


@dataclass(frozen=True)
class PointSigma:
    x0: tuple
    sectors: frozenset
    per_radius: tuple  # (radius, frozenset) pairs, largest first
    discrepancy: bool  # the radii disagree
    monotone: bool  # smaller windows never add sectors

    def to_record(self, part: ConePartition) -> dict:
        return {"x0": [_r(v) for v in self.x0], "sectors": [part.label(s) for s in sorted(self.sectors)],
                "per_radius": [[_r(r), [part.label(s) for s in sorted(S)]] for r, S in self.per_radius],
                "discrepancy": self.discrepancy, "monotone": self.monotone}


def _operator_context(f: Net, operator: DiffOp | None, cfg: Config):
    """(net, operator, P(net)) with Net-valued coefficients applied up front."""
    if operator is None:
        return f, None, f
    full = apply_diffop(operator, f, cfg.nets)
    if not local_ok(operator):
        return full, None, full
    return f, operator, full


def sigma_at_point(f: Net, x0, M, part: ConePartition | None = None, wcfg: WindowConfig | None = None,
                   cfg: Config = DEFAULT, keep_fits: bool = False, operator: DiffOp | None = None,
                   _context=None):
    """Intersection over a shrinking family of class-M cutoffs centred at x0.

    With ``operator`` the point set is that of operator(f), each window
    computed from a wider window of f (see ``classify.local_window``).
    Windows whose content is below ``negligible`` times the net's sup carry
    no sectors."""
    wcfg = cfg.windows if wcfg is None else wcfg
    part = ConePartition.default(f.dim, cfg.decay) if part is None else part
    x0 = tuple(float(v) for v in np.broadcast_to(x0, (f.dim,)))
    sig = window_sigma(M if isinstance(M, WeightSequence) else None, wcfg)
    base, op, full = _operator_context(f, operator, cfg) if _context is None else _context
    ref = slice_sups(full)
    per, fits = [], []
    for r in window_radii(f, wcfg):
        w = local_window(op, base, x0, r, wcfg, sig, cfg, full)
        if np.all(slice_sups(w) <= wcfg.negligible * ref):
            w = w.with_samples(np.zeros_like(w.samples), w.provenance)
        res = sigma_set(w, M, part, cfg, roundoff_level(w, ref, cfg.decay))
        per.append((r, res.sectors))
        fits.append(res)
    sets = [S for _, S in per]
    inter = frozenset.intersection(*sets)
    mono = all(b <= a for a, b in zip(sets, sets[1:]))
    out = PointSigma(x0, inter, tuple(per), len(set(sets)) > 1, mono)
    return (out, fits) if keep_fits else out


# ---------------------------------------------------------------------------
# wave front


@dataclass(frozen=True)
class WaveFrontEstimate:
    part: ConePartition
    points: tuple  # PointSigma per base point
    radius: float
    evidence: tuple = field(default=(), repr=False)  # per point: SigmaResult of the smallest window

    @property
    def entries(self) -> list:
        return [(p.x0, s) for p in self.points for s in sorted(p.sectors)]

    def point_projection(self) -> np.ndarray:
        pts = [p.x0 for p in self.points if p.sectors]
        return np.array(pts, float).reshape(-1, self.part.dim)

    def sector_projection(self) -> frozenset:
        out = frozenset()
        for p in self.points:
            out |= p.sectors
        return out

    def at(self, x0) -> PointSigma:
        x0 = np.asarray(x0, float)
        d = [np.max(np.abs(np.asarray(p.x0) - x0)) for p in self.points]
        return self.points[int(np.argmin(d))]

    def to_csv(self) -> str:
        names = ["x", "y"][: self.part.dim]
        lines = [",".join(names + ["sector_center_angle", "verdict", "a", "b", "k", "margin"])]
        for p, ev in zip(self.points, self.evidence):
            for s in range(self.part.n):
                ft = ev.fits[s]
                row = [f"{v:.6g}" for v in p.x0]
                row.append(f"{math.degrees(self.part.centers[s]):.6g}")
                row.append("singular" if s in p.sectors else "regular")
                row += ["" if v is None else f"{round(v, 9) + 0.0:.6g}" for v in (ft.a, ft.b, ft.k, ft.margin)]
                lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    def to_record(self) -> dict:
        return {"radius": _r(self.radius), "partition": self.part.to_record(),
                "points": [p.to_record(self.part) for p in self.points],
                "point_projection": [[_r(v) for v in x] for x in self.point_projection()],
                "sector_projection": [self.part.label(s) for s in sorted(self.sector_projection())]}


def wavefront(f: Net, M, part: ConePartition | None = None, wcfg: WindowConfig | None = None,
              points=None, cfg: Config = DEFAULT, operator: DiffOp | None = None) -> WaveFrontEstimate:
    """Sigma at every base point of a sliding grid (window centres by default),
    of f or of operator(f)."""
    wcfg = cfg.windows if wcfg is None else wcfg
    part = ConePartition.default(f.dim, cfg.decay) if part is None else part
    r0 = window_radius(f, wcfg)
    pts = window_centers(f, r0, wcfg) if points is None else np.asarray(points, float).reshape(-1, f.dim)
    ctx = _operator_context(f, operator, cfg)
    res, ev = [], []
    for x0 in pts:
        ps, fits = sigma_at_point(f, x0, M, part, wcfg, cfg, keep_fits=True, _context=ctx)
        res.append(ps)
        ev.append(fits[-1])
    order = sorted(range(len(res)), key=lambda i: res[i].x0)
    return WaveFrontEstimate(part, tuple(res[i] for i in order), r0, tuple(ev[i] for i in order))


def wavefront_included(A: WaveFrontEstimate, B: WaveFrontEstimate, slack: int = 1) -> bool:
    """Sector-wise A within B at every common base point."""
    for p in A.points:
        q = B.at(p.x0)
        if not A.part.includes(p.sectors, q.sectors, slack):
            return False
    return True


# ---------------------------------------------------------------------------
# cone sums and the product theorem


@dataclass(frozen=True)
class ConeSum:
    sectors: frozenset
    zero_hit: bool


def _strictly_between(part: ConePartition, u: int, v: int) -> set:
    """Sectors whose centre is s d_u + t d_v with s, t > 0."""
    du, dv = part.direction(u), part.direction(v)
    A = np.column_stack([du, dv])
    out = set()
    for c in range(part.n):
        if c in (u, v):
            continue
        try:
            st = np.linalg.solve(A, part.direction(c))
        except np.linalg.LinAlgError:
            continue
        if np.all(st > 1e-12):
            out.add(c)
    return out


def cone_sum(S1, S2, part: ConePartition) -> ConeSum:
    """Sectors met by xi + eta (xi in S1, eta in S2), on sector centre
    directions.  zero_hit flags an (almost) antipodal pair: |d_u + d_v| <= 2 delta_sep."""
    out, hit = set(), False
    for u in S1:
        for v in S2:
            if part.dim == 1:
                if u == v:
                    out.add(u)
                else:
                    hit = True
                continue
            if np.linalg.norm(part.direction(u) + part.direction(v)) <= 2 * part.delta_sep:
                hit = True
                continue
            if u == v:
                out.add(u)
            else:
                out |= _strictly_between(part, u, v)
    return ConeSum(frozenset(out), hit)


def cone_sum_closure(S1, S2, part: ConePartition, n_samples: int = 257) -> frozenset:
    """Closure of the sum cone by direction sampling: s d_u + t d_v with
    s, t in [0, 1] (endpoints included), mapped to the sectors whose centre
    the sampled arc reaches.  Independent of ``cone_sum``; used to check the
    closed-cone identity."""
    out = set()
    for u in S1:
        for v in S2:
            out |= _pair_closure(part, u, v, n_samples)
    return frozenset(out)


@functools.lru_cache(maxsize=4096)
def _pair_closure(part: ConePartition, u: int, v: int, n_samples: int) -> frozenset:
    if part.dim == 1:
        return frozenset({u}) if u == v else frozenset()
    tau = np.linspace(0.0, 1.0, n_samples)
    centers = np.array([part.direction(c) for c in range(part.n)])
    w = np.outer(1 - tau, part.direction(u)) + np.outer(tau, part.direction(v))
    nrm = np.linalg.norm(w, axis=1)
    w = w[nrm > 1e-12] / nrm[nrm > 1e-12, None]
    cos = w @ centers.T
    out = set()
    for c in range(part.n):
        if np.any(cos[:, c] >= 1 - 1e-9) or _arc_crosses(w, centers[c]):
            out.add(c)
    return frozenset(out)


def _arc_crosses(w: np.ndarray, c: np.ndarray) -> bool:
    # sign change of the cross product along the sampled arc, on the same side
    cr = w[:, 0] * c[1] - w[:, 1] * c[0]
    dot = w @ c
    flip = np.nonzero(np.sign(cr[:-1]) * np.sign(cr[1:]) < 0)[0]
    return bool(np.any(dot[flip] > 0))


@dataclass(frozen=True)
class ProductPoint:
    x0: tuple
    skipped: bool
    wf_f: frozenset
    wf_g: frozenset
    predicted: frozenset
    measured: frozenset
    holds: bool | None

    def to_record(self, part: ConePartition) -> dict:
        lab = lambda S: [part.label(s) for s in sorted(S)]  # noqa: E731
        return {"x0": [_r(v) for v in self.x0], "skipped": self.skipped, "wf_f": lab(self.wf_f),
                "wf_g": lab(self.wf_g), "predicted": lab(self.predicted), "measured": lab(self.measured),
                "holds": self.holds}


@dataclass(frozen=True)
class ProductReport:
    part: ConePartition
    points: tuple

    @property
    def holds(self) -> bool:
        return all(p.holds for p in self.points if not p.skipped)

    @property
    def skipped(self) -> list:
        return [p.x0 for p in self.points if p.skipped]

    def to_record(self) -> dict:
        return {"holds": self.holds, "points": [p.to_record(self.part) for p in self.points],
                "skipped": [[_r(v) for v in x] for x in self.skipped]}


def hormander_product_check(f: Net, g: Net, M, part: ConePartition | None = None,
                            wcfg: WindowConfig | None = None, points=None,
                            cfg: Config = DEFAULT) -> ProductReport:
    """WF(fg) within (WF(f) + WF(g)) u WF(f) u WF(g) at every base point where
    no antipodal pair occurs; other points are reported as skipped."""
    wcfg = cfg.windows if wcfg is None else wcfg
    part = ConePartition.default(f.dim, cfg.decay) if part is None else part
    if points is None:
        points = window_centers(f, window_radius(f, wcfg), wcfg)
    fg = multiply(f, g)
    out = []
    for x0 in np.asarray(points, float).reshape(-1, f.dim):
        Sf = sigma_at_point(f, x0, M, part, wcfg, cfg).sectors
        Sg = sigma_at_point(g, x0, M, part, wcfg, cfg).sectors
        cs = cone_sum(Sf, Sg, part)
        pred = cs.sectors | Sf | Sg
        if cs.zero_hit:
            out.append(ProductPoint(tuple(x0), True, Sf, Sg, pred, frozenset(), None))
            continue
        meas = sigma_at_point(fg, x0, M, part, wcfg, cfg).sectors
        out.append(ProductPoint(tuple(x0), False, Sf, Sg, pred, meas,
                                part.includes(meas, pred, cfg.decay.sector_slack)))
    return ProductReport(part, tuple(out))


@dataclass(frozen=True)
class MicroPseudolocality:
    holds: bool
    equal: bool
    wf_f: WaveFrontEstimate
    wf_Pf: WaveFrontEstimate

    def to_record(self) -> dict:
        return {"holds": self.holds, "equal": self.equal, "wf_f": self.wf_f.to_record(),
                "wf_Pf": self.wf_Pf.to_record()}


def microlocal_pseudolocality(P: DiffOp, f: Net, M, part: ConePartition | None = None,
                              wcfg: WindowConfig | None = None, points=None,
                              cfg: Config = DEFAULT) -> MicroPseudolocality:
    """WF(Pf) within WF(f), sector-wise with the configured slack."""
    part = ConePartition.default(f.dim, cfg.decay) if part is None else part
    wf = wavefront(f, M, part, wcfg, points, cfg)
    wp = wavefront(f, M, part, wcfg, points, cfg, operator=P)
    same = all(p.sectors == q.sectors for p, q in zip(wf.points, wp.points))
    return MicroPseudolocality(wavefront_included(wp, wf, cfg.decay.sector_slack), same, wf, wp)


def closure_identity_holds(part: ConePartition) -> tuple[bool, int]:
    """Exhaustive check of closure(S1 + S2) = (S1 + S2) u S1 u S2 over all
    nonempty sector-set pairs with the zero-hit flag clear.  Returns
    (holds, number of pairs checked)."""
    n = part.n
    subsets = [frozenset(c) for r in range(1, n + 1) for c in itertools.combinations(range(n), r)]
    checked = 0
    for S1 in subsets:
        for S2 in subsets:
            cs = cone_sum(S1, S2, part)
            if cs.zero_hit:
                continue
            checked += 1
            if cone_sum_closure(S1, S2, part) != (cs.sectors | S1 | S2):
                return False, checked
    return True, checked
