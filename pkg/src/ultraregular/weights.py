"""Denjoy-Carleman weight sequences and their associated function.

Everything is held in log space: ``ln_values[p] = ln M_p``.  Gevrey sequences
(p!)^sigma overflow a double long before p = 5000, so they are never formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import gammaln

from .config import DEFAULT, WeightsConfig
from .errors import CertificateError, DomainError, ParameterError


@dataclass(frozen=True, eq=False)
class WeightSequence:
    ln_values: np.ndarray
    kind: str = "custom"
    sigma: float | None = None

    def __post_init__(self):
        lv = np.asarray(self.ln_values, dtype=float)
        if lv.ndim != 1 or lv.size < 2:
            raise ParameterError("weight sequence needs at least M_0, M_1")
        if not np.all(np.isfinite(lv)):
            raise ParameterError("weight sequence values must be positive and finite")
        if abs(lv[0]) > 1e-12:
            raise ParameterError("weight sequence must satisfy M_0 = 1")
        lv = lv.copy()
        lv.flags.writeable = False
        object.__setattr__(self, "ln_values", lv)

    @property
    def P(self) -> int:
        return self.ln_values.size - 1

    @property
    def values(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.ln_values)

    def __getitem__(self, p):
        return float(np.exp(self.ln_values[p]))

    def to_record(self) -> dict:
        return {
            "kind": self.kind,
            "sigma": self.sigma,
            "P": self.P,
            "ln_values": [float(v) for v in self.ln_values],
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> "WeightSequence":
        if rec.get("kind") == "gevrey":
            return make_gevrey(float(rec["sigma"]), int(rec["P"]))
        return cls(np.asarray(rec["ln_values"], float), "custom", None)

    def describe(self) -> str:
        if self.kind == "gevrey":
            return f"gevrey(sigma={self.sigma:g}, P={self.P})"
        return f"custom(P={self.P})"


def make_gevrey(sigma: float, P: int = 512) -> WeightSequence:
    """M_p = (p!)^sigma, computed as sigma * lgamma(p+1)."""
    if not (np.isfinite(sigma) and sigma >= 1):
        raise ParameterError(f"sigma must be >= 1, got {sigma}")
    if int(P) != P or P < 32:
        raise ParameterError(f"truncation order P must be an integer >= 32, got {P}")
    p = np.arange(int(P) + 1, dtype=float)
    return WeightSequence(sigma * gammaln(p + 1.0), "gevrey", float(sigma))


def from_values(values: Sequence[float]) -> WeightSequence:
    v = np.asarray(values, dtype=float)
    if np.any(~np.isfinite(v)) or np.any(v <= 0):
        raise ParameterError("weight sequence values must be positive and finite")
    return WeightSequence(np.log(v), "custom", None)


def from_log_values(ln_values: Sequence[float]) -> WeightSequence:
    return WeightSequence(np.asarray(ln_values, float), "custom", None)


# ---------------------------------------------------------------------------
# structural conditions


def check_h1(W: WeightSequence, tol: float | None = None) -> tuple[bool, int | None]:
    """Log-convexity M_p^2 <= M_{p-1} M_{p+1}. Returns (ok, first bad p)."""
    tol = DEFAULT.weights.h1_tol if tol is None else tol
    lv = W.ln_values
    lhs = 2 * lv[1:-1]
    rhs = lv[:-2] + lv[2:]
    bad = np.nonzero(lhs > rhs + tol * np.maximum(1.0, np.abs(lhs)))[0]
    if bad.size:
        return False, int(bad[0] + 1)
    return True, None


@dataclass(frozen=True)
class H2Constants:
    A: float
    H: float


def default_h_grid(cfg: WeightsConfig = DEFAULT.weights) -> np.ndarray:
    j = np.arange(cfg.h_grid_points)
    return 2.0 ** (j / cfg.h_grid_steps_per_octave)


def _split_excess(lv: np.ndarray) -> np.ndarray:
    """g(p) = max_q (ln M_p - ln M_q - ln M_{p-q}) for p = 0..P-1."""
    n = lv.size - 1
    g = np.empty(n)
    for p in range(n):
        g[p] = np.max(lv[p] - lv[: p + 1] - lv[p::-1])
    return g


def _tail_bounded(f: np.ndarray, tol: float) -> bool:
    n = f.size
    lo = max(0, n - max(n // 4, 4))
    x = np.arange(lo, n, dtype=float)
    y = f[lo:]
    if y.size < 2:
        return True
    slope = np.polyfit(x, y, 1)[0]
    return bool(slope <= tol)


def _scan_h(excess: np.ndarray, H_grid, tol: float) -> H2Constants | None:
    """Smallest H whose normalized excess f(p) = excess(p) - p ln H has a
    bounded tail; A is then the exact max of f on the truncation."""
    p = np.arange(excess.size, dtype=float)
    for H in sorted(float(h) for h in H_grid):
        if H <= 0:
            continue
        f = excess - p * math.log(H)
        if _tail_bounded(f, tol):
            return H2Constants(A=float(math.exp(np.max(f))), H=H)
    return None


def check_h2(W: WeightSequence, H_grid=None, cfg: WeightsConfig = DEFAULT.weights) -> H2Constants | None:
    """(H2): M_p <= A H^p M_q M_{p-q} for all p >= q, scanned exhaustively for
    p <= P-1. Returns the smallest admissible grid H with its minimal A."""
    H_grid = default_h_grid(cfg) if H_grid is None else H_grid
    if len(H_grid) == 0:
        raise ParameterError("H_grid must be nonempty")
    return _scan_h(_split_excess(W.ln_values), H_grid, cfg.h2_tail_slope_tol)


def check_h2prime(W: WeightSequence, H_grid=None, cfg: WeightsConfig = DEFAULT.weights) -> H2Constants | None:
    """(H2)': M_{p+1} <= A H^p M_p."""
    H_grid = default_h_grid(cfg) if H_grid is None else H_grid
    if len(H_grid) == 0:
        raise ParameterError("H_grid must be nonempty")
    lv = W.ln_values
    return _scan_h(lv[1:] - lv[:-1], H_grid, cfg.h2_tail_slope_tol)


@dataclass(frozen=True)
class H3Verdict:
    verdict: str  # converges | diverges | inconclusive
    r: float


def check_h3prime(W: WeightSequence, cfg: WeightsConfig = DEFAULT.weights) -> H3Verdict:
    """Fit M_{p-1}/M_p ~ c p^{-r} on the upper half of indices and decide the
    series sum M_{p-1}/M_p by the exponent r."""
    if W.P < 64:
        raise ParameterError("check_h3prime needs P >= 64")
    lv = W.ln_values
    p = np.arange(W.P // 2, W.P + 1)
    y = lv[p - 1] - lv[p]
    r = -float(np.polyfit(np.log(p), y, 1)[0])
    if r > cfg.h3_converges_above:
        v = "converges"
    elif r <= cfg.h3_diverges_at_most:
        v = "diverges"
    else:
        v = "inconclusive"
    return H3Verdict(v, r)


# ---------------------------------------------------------------------------
# associated function


def _lower_hull(lv: np.ndarray) -> np.ndarray:
    """Indices of the lower convex hull of the points (p, ln M_p)."""
    hull: list[int] = []
    for p in range(lv.size):
        while len(hull) >= 2:
            p1, p2 = hull[-2], hull[-1]
            # drop p2 if it lies on or above the chord p1 -> p
            if (lv[p2] - lv[p1]) * (p - p1) >= (lv[p] - lv[p1]) * (p2 - p1):
                hull.pop()
            else:
                break
        hull.append(p)
    return np.asarray(hull, dtype=int)


@dataclass(frozen=True)
class MEval:
    value: np.ndarray
    argmax: np.ndarray
    certified: np.ndarray


@dataclass(frozen=True, eq=False)
class AssociatedFunctionTable:
    """M~(t) = max_p (p ln t - ln M_p), evaluated exactly through the lower
    convex hull of (p, ln M_p): on the segment between consecutive hull
    breakpoints the maximizer is a single hull vertex."""

    owner: WeightSequence
    hull: np.ndarray = field(init=False)
    breaks: np.ndarray = field(init=False)  # ln t where the maximizer changes
    break_vals: np.ndarray = field(init=False)

    def __post_init__(self):
        lv = self.owner.ln_values
        h = _lower_hull(lv)
        s = np.diff(lv[h]) / np.diff(h)
        object.__setattr__(self, "hull", h)
        object.__setattr__(self, "breaks", s)
        # M~ at each breakpoint, using the vertex on the left
        object.__setattr__(self, "break_vals", h[:-1] * s - lv[h[:-1]])

    @property
    def P(self) -> int:
        return self.owner.P

    def _vertex(self, lnt: np.ndarray) -> np.ndarray:
        return self.hull[np.searchsorted(self.breaks, lnt, side="left")]

    def evaluate(self, t) -> MEval:
        t = np.asarray(t, dtype=float)
        if np.any(~(t > 0)):
            raise DomainError("associated function needs t > 0")
        lnt = np.log(t)
        p = self._vertex(lnt)
        val = p * lnt - self.owner.ln_values[p]
        return MEval(val, p, p < self.P)

    def __call__(self, t) -> np.ndarray:
        return self.evaluate(t).value

    def eval(self, t, require_certificate: bool = False):
        e = self.evaluate(t)
        if require_certificate and not np.all(e.certified):
            raise CertificateError("M~ evaluation hit the truncation order P")
        return e.value

    def argmax_p(self, t):
        return self.evaluate(t).argmax

    def inverse(self, d) -> tuple[np.ndarray, np.ndarray]:
        """Generalized inverse sup{t : M~(t) <= d}. Returns (t, certified);
        t = 0 where no t qualifies.  Not certified when the solution lies on
        the last hull segment (maximizer = P)."""
        d = np.asarray(d, dtype=float)
        lv = self.owner.ln_values
        h = self.hull
        idx = np.searchsorted(self.break_vals, d, side="right")
        p = h[idx]
        out = np.zeros_like(d)
        pos = p > 0
        out[pos] = np.exp((d[pos] + lv[p[pos]]) / p[pos])
        # on the flat part M~ = 0 the supremum is the first breakpoint
        flat = (~pos) & (d >= 0)
        out[flat] = math.exp(self.breaks[0]) if self.breaks.size else math.inf
        return out, p < self.P


def associated_function(W: WeightSequence) -> AssociatedFunctionTable:
    return AssociatedFunctionTable(W)


def default_t_grid(cfg: WeightsConfig = DEFAULT.weights) -> np.ndarray:
    return np.geomspace(cfg.t_grid_min, cfg.t_grid_max, cfg.t_grid_points)


@dataclass(frozen=True)
class RecoveredMoment:
    ln_value: float
    certified: bool
    t_star: float

    @property
    def value(self) -> float:
        return math.exp(self.ln_value)


def recover_moments(T: AssociatedFunctionTable, p: int, t_grid=None) -> RecoveredMoment:
    """ln of sup_t t^p / exp(M~(t)) over a geometric grid plus every hull
    breakpoint inside it.  p ln t - M~(t) is piecewise linear in ln t, so
    the sup over the range is attained at a breakpoint or an end."""
    if p < 0 or p > T.P // 2:
        raise ParameterError(f"recover_moments needs 0 <= p <= P/2 = {T.P // 2}")
    t = default_t_grid() if t_grid is None else np.asarray(t_grid, float)
    lnt = np.log(t)
    m = T.evaluate(t)
    inside = (T.breaks > lnt[0]) & (T.breaks < lnt[-1])
    b = T.breaks[inside]
    # value at a breakpoint from its left vertex; certified if the right one is below P
    b_cert = T.hull[1:][inside] < T.P
    ln_all = np.concatenate([lnt, b])
    vals = p * ln_all - np.concatenate([m.value, T.break_vals[inside]])
    cert_all = np.concatenate([m.certified, b_cert])
    edge = np.zeros(ln_all.size, bool)
    edge[[0, t.size - 1]] = True
    best = float(np.max(vals))
    hits = np.nonzero(vals >= best - 1e-12 * max(1.0, abs(best)))[0]
    cert = bool(np.any(~edge[hits])) and bool(np.all(cert_all[hits]))
    return RecoveredMoment(best, cert, float(np.exp(ln_all[hits[0]])))


@dataclass(frozen=True)
class KomatsuResult:
    holds: bool
    worst_margin: float
    t_worst: float


def check_komatsu_h2(T: AssociatedFunctionTable, A: float, H: float, t_grid=None) -> KomatsuResult:
    """2 M~(t) <= M~(H t) + ln A on every grid t (M_0 = 1)."""
    if A <= 0 or H <= 0:
        raise ParameterError("A and H must be positive")
    t = np.geomspace(1.0, 1e4, 2048) if t_grid is None else np.asarray(t_grid, float)
    if np.any(t <= 0):
        raise DomainError("t_grid must be positive")
    m1 = T.evaluate(t)
    m2 = T.evaluate(H * t)
    if not (np.all(m1.certified) and np.all(m2.certified)):
        raise CertificateError("M~ evaluation uncertified on the requested t-grid; raise P")
    margin = m2.value + math.log(A) - 2 * m1.value
    i = int(np.argmin(margin))
    return KomatsuResult(bool(margin[i] >= 0), float(margin[i]), float(t[i]))


# ---------------------------------------------------------------------------
# ultradifferential operator coefficients


def _order(key) -> int:
    if isinstance(key, (tuple, list)):
        return int(sum(key))
    return int(key)


def minimal_ultradiff_constant(W: WeightSequence, coeffs: Mapping, h: float) -> float:
    """Smallest c with |a_g| <= c h^|g| / M_|g| for the given coefficients."""
    if h <= 0:
        raise ParameterError("h must be positive")
    worst = -math.inf
    for key, a in coeffs.items():
        n = _order(key)
        if n > W.P:
            raise ParameterError(f"coefficient order {n} exceeds P = {W.P}")
        if a == 0:
            continue
        worst = max(worst, math.log(abs(a)) - n * math.log(h) + W.ln_values[n])
    return 0.0 if worst == -math.inf else math.exp(worst)


def validate_ultradiff_coefficients(W: WeightSequence, coeffs: Mapping, h: float, c: float,
                                    rtol: float = 1e-12) -> bool:
    """True iff |a_g| <= c h^|g| / M_|g| for every coefficient (log space)."""
    if h <= 0 or c <= 0:
        return False
    lc, lh = math.log(c), math.log(h)
    for key, a in coeffs.items():
        n = _order(key)
        if n > W.P:
            return False
        if a == 0:
            continue
        lhs = math.log(abs(a))
        rhs = lc + n * lh - W.ln_values[n]
        if lhs > rhs + rtol * max(1.0, abs(rhs)):
            return False
    return True
