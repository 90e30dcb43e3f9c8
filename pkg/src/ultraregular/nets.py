"""Nets: epsilon-ladders of grid-sampled functions.

A Net stores one array per ladder epsilon on a shared uniform grid (1-D or
2-D).  Differentiation is spectral on the periodic grid; padding cells at the
boundary must stay (numerically) empty along every differentiated axis that is
not genuinely periodic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .bumps import Cutoff, Mollifier, gauss_legendre
from .config import DEFAULT, NetConfig
from .errors import (CompatibilityError, EvaluationError, GeometryError,
                     ParameterError, TruncationError)


# ---------------------------------------------------------------------------
# grid and ladder


@dataclass(frozen=True)
class Grid:
    dim: int
    origin: tuple
    spacing: tuple
    count: tuple
    padding: int = 16

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ParameterError("grid dimension must be 1 or 2")
        for name in ("origin", "spacing", "count"):
            v = getattr(self, name)
            if len(v) != self.dim:
                raise ParameterError(f"grid {name} must have {self.dim} entries")
        for n in self.count:
            if n < 256 or n & (n - 1):
                raise ParameterError(f"grid count must be a power of two >= 256, got {n}")
        if any(h <= 0 for h in self.spacing):
            raise ParameterError("grid spacing must be positive")
        if self.padding < 0 or 2 * self.padding >= min(self.count):
            raise ParameterError("invalid padding width")

    @classmethod
    def box(cls, lo, hi, count, dim: int = 1, padding: int = 16) -> "Grid":
        """Uniform grid on [lo, hi)^dim with `count` cells per axis."""
        lo_t = tuple(float(v) for v in np.broadcast_to(lo, (dim,)))
        hi_t = tuple(float(v) for v in np.broadcast_to(hi, (dim,)))
        n_t = tuple(int(v) for v in np.broadcast_to(count, (dim,)))
        h = tuple((b - a) / n for a, b, n in zip(lo_t, hi_t, n_t))
        return cls(dim, lo_t, h, n_t, padding)

    @property
    def shape(self) -> tuple:
        return tuple(self.count)

    @property
    def dx(self) -> float:
        return min(self.spacing)

    def axis(self, i: int) -> np.ndarray:
        return self.origin[i] + self.spacing[i] * np.arange(self.count[i])

    def axes(self) -> list:
        return [self.axis(i) for i in range(self.dim)]

    def mesh(self) -> list:
        return np.meshgrid(*self.axes(), indexing="ij")

    def extent(self, i: int = 0) -> float:
        return self.spacing[i] * self.count[i]

    def interior(self, i: int = 0) -> tuple:
        lo = self.origin[i] + self.padding * self.spacing[i]
        hi = self.origin[i] + (self.count[i] - 1 - self.padding) * self.spacing[i]
        return lo, hi

    def wavenumbers(self, i: int) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.count[i], d=self.spacing[i])

    def dxi(self, i: int = 0) -> float:
        return 2 * np.pi / (self.count[i] * self.spacing[i])

    def nyquist(self, i: int | None = None) -> float:
        if i is None:
            return min(np.pi / h for h in self.spacing)
        return np.pi / self.spacing[i]

    def index_of(self, i: int, x: float) -> int:
        return int(round((x - self.origin[i]) / self.spacing[i]))

    def to_record(self) -> dict:
        return {"dim": self.dim, "origin": list(self.origin), "spacing": list(self.spacing),
                "count": list(self.count), "padding": self.padding}

    @classmethod
    def from_record(cls, r: Mapping) -> "Grid":
        return cls(int(r["dim"]), tuple(r["origin"]), tuple(r["spacing"]),
                   tuple(int(n) for n in r["count"]), int(r.get("padding", 16)))


@dataclass(frozen=True)
class EpsilonLadder:
    eps0: float
    ratio: float
    count: int

    def __post_init__(self):
        if not 0 < self.eps0 <= 1:
            raise ParameterError("eps0 must lie in (0, 1]")
        if not 0 < self.ratio < 1:
            raise ParameterError("ladder ratio must lie in (0, 1)")
        if self.count < 6:
            raise ParameterError("ladder needs at least 6 values")

    @classmethod
    def span(cls, eps_max: float = 0.3, eps_min: float = 0.02, count: int = 10) -> "EpsilonLadder":
        return cls(eps_max, (eps_min / eps_max) ** (1.0 / (count - 1)), count)

    @property
    def values(self) -> np.ndarray:
        return self.eps0 * self.ratio ** np.arange(self.count)

    @property
    def eps_min(self) -> float:
        return float(self.values[-1])

    def validate_for(self, grid: Grid) -> None:
        if self.eps_min < 4 * grid.dx * (1 - 1e-9):
            raise GeometryError(
                f"smallest epsilon {self.eps_min:.4g} is below 4 dx = {4 * grid.dx:.4g}")

    def to_record(self) -> dict:
        return {"eps0": self.eps0, "ratio": self.ratio, "count": self.count}

    @classmethod
    def from_record(cls, r: Mapping) -> "EpsilonLadder":
        if "eps_min" in r:
            return cls.span(float(r.get("eps_max", 0.3)), float(r["eps_min"]), int(r.get("count", 10)))
        return cls(float(r["eps0"]), float(r["ratio"]), int(r["count"]))


# ---------------------------------------------------------------------------
# nets


def _support_box(samples: np.ndarray, grid: Grid):
    """Bounding box (per axis (lo, hi) in coordinates) of nonzero samples over
    all slices; None for the zero net."""
    nz = np.any(samples != 0, axis=0)
    if not nz.any():
        return None
    box = []
    for i in range(grid.dim):
        other = tuple(j for j in range(grid.dim) if j != i)
        idx = np.nonzero(np.any(nz, axis=other) if other else nz)[0]
        box.append((grid.origin[i] + idx[0] * grid.spacing[i],
                    grid.origin[i] + idx[-1] * grid.spacing[i]))
    return tuple(box)


@dataclass(frozen=True, eq=False)
class Net:
    grid: Grid
    ladder: EpsilonLadder
    samples: np.ndarray
    provenance: dict = field(default_factory=lambda: {"kind": "synthetic"})
    periodic: tuple = ()
    compact_support: tuple | None = field(default=None)

    def __post_init__(self):
        s = np.asarray(self.samples)
        if s.shape != (self.ladder.count,) + self.grid.shape:
            raise CompatibilityError(
                f"samples shape {s.shape} does not match ladder x grid "
                f"{(self.ladder.count,) + self.grid.shape}")
        if not np.all(np.isfinite(s)):
            raise EvaluationError("net samples must be finite")
        if not np.iscomplexobj(s):
            s = s.astype(float, copy=False)
        s = np.array(s, copy=True)
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)
        per = tuple(self.periodic) if self.periodic else (False,) * self.grid.dim
        object.__setattr__(self, "periodic", per)
        object.__setattr__(self, "compact_support", _support_box(s, self.grid))

    # -- views
    @property
    def eps(self) -> np.ndarray:
        return self.ladder.values

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def is_zero(self) -> bool:
        return self.compact_support is None

    def slice(self, j: int) -> np.ndarray:
        return self.samples[j]

    def is_compact(self) -> bool:
        """True if the support stays inside the padded interior."""
        if self.compact_support is None:
            return True
        for i, (lo, hi) in enumerate(self.compact_support):
            a, b = self.grid.interior(i)
            if lo < a - 1e-12 or hi > b + 1e-12:
                return False
        return True

    def with_samples(self, samples, provenance: dict, periodic=None) -> "Net":
        return Net(self.grid, self.ladder, samples, provenance,
                   self.periodic if periodic is None else periodic)

    def describe(self) -> str:
        return _prov_str(self.provenance)

    # -- io
    def header(self) -> dict:
        return {"grid": self.grid.to_record(), "ladder": self.ladder.to_record(),
                "provenance": self.provenance, "periodic": list(self.periodic),
                "complex": bool(np.iscomplexobj(self.samples))}

    def save(self, path) -> None:
        np.savez_compressed(path, samples=self.samples,
                            header=np.array(json.dumps(self.header(), sort_keys=True)))

    @classmethod
    def load(cls, path) -> "Net":
        with np.load(path, allow_pickle=False) as z:
            hdr = json.loads(str(z["header"]))
            return cls(Grid.from_record(hdr["grid"]), EpsilonLadder.from_record(hdr["ladder"]),
                       z["samples"], hdr["provenance"], tuple(hdr["periodic"]))

    def slice_csv(self, j: int) -> str:
        cols = [c.ravel() for c in self.grid.mesh()]
        names = ["x", "y"][: self.dim]
        v = self.samples[j].ravel()
        if np.iscomplexobj(v):
            cols += [v.real, v.imag]
            names += ["re", "im"]
        else:
            cols.append(v)
            names.append("value")
        lines = [",".join(names)]
        lines += [",".join(f"{c:.17g}" for c in row) for row in zip(*cols)]
        return "\n".join(lines) + "\n"


def _prov_str(p) -> str:
    if not isinstance(p, dict):
        return str(p)
    kind = p.get("kind", "?")
    args = p.get("args")
    if isinstance(args, list):
        return f"{kind}(" + ", ".join(_prov_str(a) for a in args) + ")"
    label = p.get("label")
    return f"{kind}[{label}]" if label else kind


def _check_pair(f: Net, g: Net) -> None:
    if f.grid != g.grid or f.ladder != g.ladder:
        raise CompatibilityError("nets live on different grids or ladders")


def _broadcast(values, grid: Grid, ladder: EpsilonLadder) -> np.ndarray:
    arr = np.asarray(values)
    if arr.shape == grid.shape:
        arr = np.broadcast_to(arr, (ladder.count,) + grid.shape)
    return arr


# ---------------------------------------------------------------------------
# constructors


def embed_constant(f, grid: Grid, ladder: EpsilonLadder, periodic=False, label: str = "") -> Net:
    """u_eps = f for every eps.  f is a callable on grid coordinates or an
    array of grid shape."""
    vals = f(*grid.mesh()) if callable(f) else np.asarray(f)
    if np.shape(vals) != grid.shape:
        vals = np.broadcast_to(vals, grid.shape)
    per = tuple(np.broadcast_to(periodic, (grid.dim,)).tolist())
    return Net(grid, ladder, _broadcast(vals, grid, ladder),
               {"kind": "constant", "label": label}, per)


def zero_net(grid: Grid, ladder: EpsilonLadder) -> Net:
    return embed_constant(np.zeros(grid.shape), grid, ladder, label="0")


def synthesize(expr: Callable, grid: Grid, ladder: EpsilonLadder, label: str = "",
               periodic=False) -> Net:
    """Fill slices from a closed form expr(*coords, eps)."""
    mesh = grid.mesh()
    out = []
    for e in ladder.values:
        with np.errstate(all="ignore"):
            v = np.asarray(expr(*mesh, float(e)))
        if v.shape != grid.shape:
            v = np.broadcast_to(v, grid.shape)
        if not np.all(np.isfinite(v)):
            raise EvaluationError(f"expression {label or expr!r} is not finite at eps = {e:g}")
        out.append(v)
    per = tuple(np.broadcast_to(periodic, (grid.dim,)).tolist())
    return Net(grid, ladder, np.stack(out), {"kind": "synthetic", "label": label}, per)


# distribution descriptors -------------------------------------------------

def delta(*x0) -> dict:
    return {"delta": [float(v) for v in x0]}


def heaviside(x0: float = 0.0) -> dict:
    return {"heaviside": float(x0)}


def delta_sheet(axis: int = 0, c: float = 0.0) -> dict:
    return {"delta_sheet": {"axis": int(axis), "c": float(c)}}


def smooth(f: Callable, label: str = "") -> dict:
    return {"smooth": f, "label": label}


def combination(*terms) -> dict:
    """combination((c1, spec1), (c2, spec2), ...)."""
    return {"sum": [{"coef": float(c), "spec": s} for c, s in terms]}


def _spec_record(spec):
    if "smooth" in spec:
        return {"smooth": spec.get("label") or getattr(spec["smooth"], "__name__", "f")}
    if "sum" in spec:
        return {"sum": [{"coef": t["coef"], "spec": _spec_record(t["spec"])} for t in spec["sum"]]}
    return spec


def _feature_extent(spec, grid: Grid):
    """Per-axis (lo, hi) of the singular locus of a descriptor, or None when
    unconstrained along that axis."""
    if "delta" in spec:
        pts = spec["delta"]
        return [(p, p) for p in pts]
    if "heaviside" in spec:
        return [(spec["heaviside"], spec["heaviside"])]
    if "delta_sheet" in spec:
        ax, c = spec["delta_sheet"]["axis"], spec["delta_sheet"]["c"]
        return [(c, c) if i == ax else None for i in range(grid.dim)]
    return [None] * grid.dim


def _mollify_slice(spec, phi: Mollifier, grid: Grid, mesh, eps: float, cfg: NetConfig) -> np.ndarray:
    n = grid.dim
    if "sum" in spec:
        out = np.zeros(grid.shape)
        for t in spec["sum"]:
            out = out + t["coef"] * _mollify_slice(t["spec"], phi, grid, mesh, eps, cfg)
        return out
    if not phi.compact:
        return _mollify_fourier(spec, phi, grid, mesh, eps)
    if "delta" in spec:
        x0 = spec["delta"]
        if len(x0) != n:
            raise ParameterError("delta position must match grid dimension")
        out = np.ones(grid.shape)
        for c, c0 in zip(mesh, x0):
            out = out * phi((c - c0) / eps) / eps
        return out
    if "heaviside" in spec:
        if n != 1:
            raise ParameterError("heaviside descriptor is 1-D only")
        return phi.cdf((mesh[0] - spec["heaviside"]) / eps)
    if "delta_sheet" in spec:
        if n != 2:
            raise ParameterError("delta_sheet needs a 2-D grid")
        ax, c = spec["delta_sheet"]["axis"], spec["delta_sheet"]["c"]
        return phi((mesh[ax] - c) / eps) / eps
    if "smooth" in spec:
        f = spec["smooth"]
        R = phi.radius
        if n == 1:
            s, w = gauss_legendre(cfg.quad_nodes_1d)
            s, w = s * R, w * R * phi(s * R)
            out = np.zeros(grid.shape)
            for sk, wk in zip(s, w):
                out += wk * f(mesh[0] - eps * sk)
            return out
        s, w = gauss_legendre(cfg.quad_nodes_2d)
        s, w = s * R, w * R * phi(s * R)
        out = np.zeros(grid.shape)
        for sk, wk in zip(s, w):
            for tk, vk in zip(s, w):
                out += wk * vk * f(mesh[0] - eps * sk, mesh[1] - eps * tk)
        return out
    raise ParameterError(f"unknown distribution descriptor {spec!r}")


def _mollify_fourier(spec, phi: Mollifier, grid: Grid, mesh, eps: float) -> np.ndarray:
    """Spectral mollification with the Fourier-cutoff profile."""
    ks = np.meshgrid(*[grid.wavenumbers(i) for i in range(grid.dim)], indexing="ij")
    kabs = np.sqrt(sum(k ** 2 for k in ks))
    mult = phi.fourier(eps * kabs)
    vol = float(np.prod(grid.spacing))
    if "delta" in spec:
        ph = np.ones(grid.shape, complex)
        for k, c0, o in zip(ks, spec["delta"], grid.origin):
            ph = ph * np.exp(-1j * k * (c0 - o))
        return np.real(np.fft.ifftn(mult * ph)) / vol
    if "smooth" in spec:
        base = spec["smooth"](*mesh)
    elif "heaviside" in spec:
        base = (mesh[0] >= spec["heaviside"]).astype(float)
    elif "delta_sheet" in spec:
        ax, c = spec["delta_sheet"]["axis"], spec["delta_sheet"]["c"]
        base = (np.abs(mesh[ax] - c) < 0.5 * grid.spacing[ax]) / grid.spacing[ax]
    else:
        raise ParameterError(f"unknown distribution descriptor {spec!r}")
    return np.real(np.fft.ifftn(np.fft.fftn(base) * mult))


def mollify(spec: dict, phi: Mollifier, grid: Grid, ladder: EpsilonLadder,
            cfg: NetConfig = DEFAULT.nets, periodic=False) -> Net:
    """u_eps = spec * phi_eps, phi_eps(x) = eps^{-n} phi(x / eps)."""
    ladder.validate_for(grid)
    if phi.compact:
        reach = ladder.eps0 * phi.radius
        terms = spec["sum"] if "sum" in spec else [{"spec": spec}]
        for t in terms:
            ext = _feature_extent(t["spec"], grid)
            for i, e in enumerate(ext):
                if e is None:
                    continue
                a, b = grid.interior(i)
                if e[0] - reach < a or e[1] + reach > b:
                    raise GeometryError(
                        f"mollifier support (radius {reach:.3g} at eps = {ladder.eps0:g}) "
                        f"leaves the padded grid on axis {i}")
    mesh = grid.mesh()
    out = np.stack([_mollify_slice(spec, phi, grid, mesh, float(e), cfg) for e in ladder.values])
    prov = {"kind": "mollified", "spec": _spec_record(spec), "mollifier": phi.to_record()}
    per = tuple(np.broadcast_to(periodic, (grid.dim,)).tolist())
    return Net(grid, ladder, out, prov, per)


# ---------------------------------------------------------------------------
# algebra


def add(f: Net, g: Net) -> Net:
    _check_pair(f, g)
    per = tuple(a and b for a, b in zip(f.periodic, g.periodic))
    return f.with_samples(f.samples + g.samples, {"kind": "sum", "args": [f.provenance, g.provenance]}, per)


def multiply(f: Net, g: Net) -> Net:
    _check_pair(f, g)
    per = tuple(a and b for a, b in zip(f.periodic, g.periodic))
    return f.with_samples(f.samples * g.samples, {"kind": "product", "args": [f.provenance, g.provenance]}, per)


def scale(f: Net, c: float = 1.0, eps_power: float = 0.0) -> Net:
    """c * eps^p * f."""
    w = c * f.eps ** eps_power
    w = w.reshape((-1,) + (1,) * f.dim)
    return f.with_samples(f.samples * w, {"kind": "scaled", "c": c, "eps_power": eps_power,
                                          "args": [f.provenance]})


def multiply_function(f: Net, g: Callable | np.ndarray, label: str = "") -> Net:
    """Multiply every slice by an eps-independent grid function."""
    vals = g(*f.grid.mesh()) if callable(g) else np.asarray(g)
    return f.with_samples(f.samples * vals[None], {"kind": "product",
                                                   "args": [{"kind": "constant", "label": label},
                                                            f.provenance]})


# ---------------------------------------------------------------------------
# differentiation


def _check_ringing(f: Net, alpha, cfg: NetConfig) -> None:
    s = np.abs(f.samples)
    top = s.max() if s.size else 0.0
    if top == 0:
        return
    pad = f.grid.padding
    for ax, a in enumerate(alpha):
        if a == 0 or f.periodic[ax] or pad == 0:
            continue
        edge = np.concatenate([np.take(s, np.arange(pad), axis=ax + 1).ravel(),
                               np.take(s, np.arange(-pad, 0), axis=ax + 1).ravel()])
        if edge.max() > cfg.ringing_tol * top:
            raise GeometryError(
                f"support reaches the padding on axis {ax} "
                f"(edge/max = {edge.max() / top:.2e}); spectral derivative would ring")


def spectral_derivative(samples: np.ndarray, grid: Grid, alpha, floor: float) -> np.ndarray:
    """d^alpha of a stack of slices (leading axis = ladder)."""
    axes = tuple(range(1, grid.dim + 1))
    F = np.fft.fftn(samples, axes=axes)
    if floor > 0:
        mag = np.abs(F)
        peak = mag.reshape(mag.shape[0], -1).max(axis=1).reshape((-1,) + (1,) * grid.dim)
        F[mag < floor * peak] = 0
    for ax, a in enumerate(alpha):
        if a == 0:
            continue
        n = grid.count[ax]
        k = grid.wavenumbers(ax).astype(complex)
        if a % 2 == 1:
            k[n // 2] = 0.0
        shape = [1] * (grid.dim + 1)
        shape[ax + 1] = n
        F = F * ((1j * k) ** a).reshape(shape)
    out = np.fft.ifftn(F, axes=axes)
    return out if np.iscomplexobj(samples) else out.real


def _normalize_alpha(alpha, dim: int) -> tuple:
    if isinstance(alpha, (int, np.integer)):
        if dim != 1:
            raise ParameterError("use a multi-index in 2-D")
        return (int(alpha),)
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != dim or any(a < 0 for a in alpha):
        raise ParameterError(f"invalid multi-index {alpha}")
    return alpha


def derivative(f: Net, alpha, cfg: NetConfig = DEFAULT.nets) -> Net:
    alpha = _normalize_alpha(alpha, f.dim)
    if sum(alpha) > cfg.max_order:
        raise ParameterError(f"|alpha| = {sum(alpha)} exceeds the configured max {cfg.max_order}")
    if sum(alpha) == 0:
        return f
    if f.is_zero:
        return f.with_samples(f.samples, {"kind": "derivative", "alpha": list(alpha), "args": [f.provenance]})
    _check_ringing(f, alpha, cfg)
    out = spectral_derivative(f.samples, f.grid, alpha, cfg.spectral_floor)
    out = _clip_to_support(out, f)
    return f.with_samples(out, {"kind": "derivative", "alpha": list(alpha), "args": [f.provenance]})


def _clip_to_support(arr: np.ndarray, f: Net) -> np.ndarray:
    """Derivatives do not enlarge supports; zero roundoff outside the support
    box of each slice."""
    arr = np.array(arr)
    for j in range(arr.shape[0]):
        box = _support_box(f.samples[j][None], f.grid)
        if box is None:
            arr[j] = 0
            continue
        for i, (lo, hi) in enumerate(box):
            if f.periodic[i]:
                continue
            c = f.grid.axis(i)
            outside = (c < lo - 0.5 * f.grid.spacing[i]) | (c > hi + 0.5 * f.grid.spacing[i])
            idx = [j] + [slice(None)] * f.dim
            idx[i + 1] = outside
            arr[tuple(idx)] = 0
    return arr


def multi_indices(order: int, dim: int) -> list:
    if dim == 1:
        return [(order,)]
    return [(i, order - i) for i in range(order, -1, -1)]


# ---------------------------------------------------------------------------
# operators


@dataclass(frozen=True)
class DiffOp:
    """Finite-order operator sum_alpha a_alpha d^alpha.  Coefficients are
    Nets, scalars, or eps-independent callables on grid coordinates."""

    terms: tuple  # ((coef, alpha), ...)
    label: str = ""

    @classmethod
    def identity(cls, dim: int = 1) -> "DiffOp":
        return cls((((1.0), (0,) * dim),), "id")

    @classmethod
    def d(cls, axis: int = 0, dim: int = 1, order: int = 1) -> "DiffOp":
        alpha = [0] * dim
        alpha[axis] = order
        return cls(((1.0, tuple(alpha)),), f"d{'xy'[axis]}^{order}")

    @property
    def order(self) -> int:
        return max(sum(a) for _, a in self.terms)


def _coef_samples(coef, u: Net) -> np.ndarray:
    if isinstance(coef, Net):
        _check_pair(coef, u)
        return coef.samples
    if callable(coef):
        return np.asarray(coef(*u.grid.mesh()))[None]
    return np.asarray(coef)


def apply_diffop(P: DiffOp, u: Net, cfg: NetConfig = DEFAULT.nets) -> Net:
    total = None
    for coef, alpha in P.terms:
        du = derivative(u, alpha, cfg)
        term = _coef_samples(coef, u) * du.samples
        total = term if total is None else total + term
    per = u.periodic
    return u.with_samples(np.broadcast_to(total, u.samples.shape),
                          {"kind": "operator", "label": P.label, "args": [u.provenance]}, per)


@dataclass(frozen=True)
class UltradiffCertificate:
    G: int
    tails: tuple  # per slice
    tol: float
    growth_log: tuple  # fitted per-order growth used for extrapolation


def derivative_sup_table(u: Net, m_max: int, cfg: NetConfig = DEFAULT.nets) -> np.ndarray:
    """S[m, j] = max_{|alpha| = m} sup |d^alpha u_eps_j| over the whole grid."""
    S = np.zeros((m_max + 1, u.ladder.count))
    for m in range(m_max + 1):
        for alpha in multi_indices(m, u.dim):
            d = derivative(u, alpha, cfg).samples
            S[m] = np.maximum(S[m], np.abs(d).reshape(d.shape[0], -1).max(axis=1))
    return S


def apply_ultradiffop(coeffs: Mapping, u: Net, W, h: float, c: float, tol: float = 1e-8,
                      G_max: int = 8, cfg: NetConfig = DEFAULT.nets, continuation: bool = False):
    """Truncated series sum_{|g| <= G} a_g d^g u with a certified tail.

    The tail bound is sum_{G < |g| <= K} |a_g| S_|g| plus, with
    ``continuation`` (coeffs is a finite head of an infinite-order operator),
    c sum_{k > K} h^k / M_k * S_k for the unlisted orders.  S_k is measured
    for k <= 8 and extrapolated beyond by the envelope S_k <= exp(c0 + (k+1) lam) M_k
    (lam = largest per-order growth of ln S_k - ln M_k over the upper half of
    the measured orders, c0 chosen so the envelope covers every measurement).
    """
    from .weights import validate_ultradiff_coefficients

    if not validate_ultradiff_coefficients(W, coeffs, h, c):
        raise ParameterError("coefficients violate |a_g| <= c h^|g| / M_|g|")
    by_order: dict[int, float] = {}
    for key, a in coeffs.items():
        n = int(sum(key)) if isinstance(key, (tuple, list)) else int(key)
        by_order[n] = by_order.get(n, 0.0) + abs(a)
    K = max(by_order) if by_order else 0
    m_meas = min(cfg.max_order, 8)
    S = derivative_sup_table(u, m_meas, cfg)
    lnM = W.ln_values
    kmax = max(K, m_meas) + 1
    if kmax + 200 > W.P:
        raise ParameterError("weight sequence too short for the tail estimate")
    # per-slice envelope
    lnS_ext = np.empty((kmax + 200, u.ladder.count))
    lams = []
    with np.errstate(divide="ignore"):
        lnS = np.log(S)
    for j in range(u.ladder.count):
        e = lnS[:, j] - lnM[: m_meas + 1]
        if not np.all(np.isfinite(e)):  # zero slice or zero rows
            lnS_ext[:, j] = -np.inf
            lnS_ext[: m_meas + 1, j] = lnS[:, j]
            lams.append(-math.inf)
            continue
        half = m_meas // 2
        lam = float(np.max(np.diff(e)[half:]))
        c0 = float(np.max(e - (np.arange(m_meas + 1) + 1) * lam))
        k = np.arange(kmax + 200)
        lnS_ext[:, j] = c0 + (k + 1) * lam + lnM[: kmax + 200]
        lnS_ext[: m_meas + 1, j] = lnS[:, j]
        lams.append(lam)
    coef_by_k = np.zeros(kmax + 200)
    for n, a in by_order.items():
        coef_by_k[n] = a
    k = np.arange(kmax + 200)
    if continuation:
        bound = np.where(k > K, c * np.exp(k * math.log(h) - lnM[: kmax + 200]), coef_by_k)
    else:
        bound = coef_by_k
    with np.errstate(over="ignore", invalid="ignore"):
        terms = bound[:, None] * np.exp(lnS_ext)
    terms = np.nan_to_num(terms, nan=0.0, posinf=np.inf)
    # geometric remainder after the explicit 200 extra terms
    last = terms[-50:]
    for j in range(u.ladder.count):
        col = last[:, j]
        if np.any(col > 0):
            ratio = np.max(col[1:] / np.maximum(col[:-1], 1e-300))
            if not ratio < 1:
                terms[-1, j] = np.inf
            else:
                terms[-1, j] += col[-1] * ratio / (1 - ratio)
    G_used = None
    tails = None
    for G in range(0, G_max + 1):
        tail = terms[G + 1 :].sum(axis=0)
        if np.all(tail < tol):
            G_used, tails = G, tail
            break
    if G_used is None:
        tail = terms[G_max + 1 :].sum(axis=0)
        raise TruncationError(
            f"tail not certifiable below {tol:g} with G <= {G_max}: "
            f"worst tail {np.max(tail):.3e}")
    total = np.zeros_like(u.samples, dtype=complex if np.iscomplexobj(u.samples) else float)
    for key, a in coeffs.items():
        alpha = _normalize_alpha(tuple(key) if isinstance(key, (tuple, list)) else int(key), u.dim)
        if sum(alpha) > G_used or a == 0:
            continue
        total = total + a * derivative(u, alpha, cfg).samples
    net = u.with_samples(total, {"kind": "operator", "label": "ultradifferential",
                                 "G": G_used, "args": [u.provenance]})
    return net, UltradiffCertificate(G_used, tuple(float(t) for t in tails), tol, tuple(lams))


# ---------------------------------------------------------------------------
# windows and crops


def window(f: Net, cutoff: Cutoff) -> Net:
    """phi * f for an eps-independent cutoff."""
    w = cutoff(*f.grid.mesh())
    return f.with_samples(f.samples * w[None],
                          {"kind": "windowed", "center": list(cutoff.center),
                           "radius": cutoff.radius, "args": [f.provenance]},
                          (False,) * f.dim)


def crop(f: Net, center, half_width: float) -> Net:
    """Restrict to a sub-grid of power-of-two size covering
    [center - half_width, center + half_width] plus padding.  Only valid when
    f vanishes outside that box (as after windowing)."""
    g = f.grid
    origin, count, sl = [], [], [slice(None)]
    for i in range(g.dim):
        need = int(math.ceil(2 * half_width / g.spacing[i])) + 2 * g.padding + 4
        n = max(256, 1 << (need - 1).bit_length())
        if n >= g.count[i]:
            origin.append(g.origin[i])
            count.append(g.count[i])
            sl.append(slice(None))
            continue
        c_idx = g.index_of(i, center[i])
        i0 = min(max(c_idx - n // 2, 0), g.count[i] - n)
        origin.append(g.origin[i] + i0 * g.spacing[i])
        count.append(n)
        sl.append(slice(i0, i0 + n))
    sub = Grid(g.dim, tuple(origin), g.spacing, tuple(count), g.padding)
    samples = f.samples[tuple(sl)]
    dropped = np.abs(f.samples).sum() - np.abs(samples).sum()
    if dropped > 1e-12 * max(np.abs(f.samples).sum(), 1e-300):
        raise GeometryError("crop would discard nonzero samples")
    return Net(sub, f.ladder, samples, {"kind": "restricted", "args": [f.provenance]},
               tuple(p and sub.count[i] == g.count[i] for i, p in enumerate(f.periodic)))
