"""Canonical regular exponent sets and their closure / stability conditions.

A regular set is represented by one of four parametric families

    zero        N_m = 0
    bounded(b)  N_m = b
    affine(a,b) N_m = a m + b
    full        no constraint

ordered zero <= bounded <= affine <= full.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import DEFAULT, RegsetsConfig
from .errors import InconclusiveError, ParameterError

KINDS = ("zero", "bounded", "affine", "full")
RANK = {k: i for i, k in enumerate(KINDS)}


@dataclass(frozen=True)
class RegularClass:
    kind: str
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if self.kind not in RANK:
            raise ParameterError(f"unknown regular class {self.kind!r}")
        if self.kind == "zero" and (self.a or self.b):
            raise ParameterError("zero class has no parameters")
        if self.kind == "bounded" and self.a:
            raise ParameterError("bounded class has slope 0")
        if not (math.isfinite(self.a) and math.isfinite(self.b)) or self.a < 0:
            raise ParameterError("class parameters must be finite with a >= 0")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def bounded(cls, b: float = 0.0):
        return cls("bounded", 0.0, float(b))

    @classmethod
    def affine(cls, a: float = 1.0, b: float = 0.0):
        return cls("affine", float(a), float(b))

    @classmethod
    def full(cls):
        return cls("full")

    @property
    def rank(self) -> int:
        return RANK[self.kind]

    def representative(self, m_max: int) -> np.ndarray:
        m = np.arange(m_max + 1, dtype=float)
        if self.kind == "full":
            return np.full(m.size, np.inf)
        return self.a * m + self.b

    def contains_kind(self, other: "RegularClass") -> bool:
        """Class-level inclusion (ignores the parameters)."""
        return other.rank <= self.rank

    def join(self, other: "RegularClass") -> "RegularClass":
        top = max(self.rank, other.rank)
        kind = KINDS[top]
        if kind == "zero":
            return RegularClass.zero()
        if kind == "bounded":
            return RegularClass.bounded(max(self.b, other.b))
        if kind == "affine":
            return RegularClass.affine(max(self.a, other.a), max(self.b, other.b))
        return RegularClass.full()

    def to_record(self) -> dict:
        return {"kind": self.kind, "a": round(self.a, 6), "b": round(self.b, 6)}

    @classmethod
    def from_record(cls, rec) -> "RegularClass":
        if isinstance(rec, str):
            return cls(rec)
        return cls(rec["kind"], float(rec.get("a", 0.0)), float(rec.get("b", 0.0)))

    def __str__(self) -> str:
        if self.kind == "bounded":
            return f"bounded({self.b:.3g})"
        if self.kind == "affine":
            return f"affine({self.a:.3g},{self.b:.3g})"
        return self.kind


@dataclass(frozen=True)
class ClosureWitness:
    rule: str  # R1 | R2 | R3
    inputs: tuple
    params: tuple
    output_class: RegularClass
    escalated: bool = False
    m_max: int = 64
    output: np.ndarray = field(default=None, compare=False)

    def verify(self) -> bool:
        """Check the defining inequality exhaustively for indices <= m_max."""
        m_max = self.m_max
        out = self.output
        if self.rule == "R1":
            (N,) = self.inputs
            k, kp = self.params
            lhs = _as_seq(N, m_max + k)[k : k + m_max + 1] + kp
            return bool(np.all(lhs <= out[: m_max + 1] + 1e-12))
        if self.rule == "R2":
            N, Np = self.inputs
            lhs = np.maximum(_as_seq(N, m_max), _as_seq(Np, m_max))
            return bool(np.all(lhs <= out[: m_max + 1] + 1e-12))
        if self.rule == "R3":
            N, Np = self.inputs
            a, b = _as_seq(N, m_max), _as_seq(Np, m_max)
            for l1 in range(m_max + 1):
                l2 = np.arange(0, m_max + 1 - l1)
                if np.any(a[l1] + b[l2] > out[l1 + l2] + 1e-12):
                    return False
            return True
        raise ParameterError(self.rule)


def _as_seq(N, m_max: int) -> np.ndarray:
    if isinstance(N, RegularClass):
        return N.representative(m_max)
    arr = np.asarray(N, dtype=float)
    if arr.size < m_max + 1:
        raise ParameterError(f"sequence shorter than required length {m_max + 1}")
    return arr[: m_max + 1]


def _dominating_class(N, m_max: int) -> RegularClass:
    if isinstance(N, RegularClass):
        return N
    arr = np.asarray(N, float)[: m_max + 1]
    if np.all(arr <= 0):
        return RegularClass.zero()
    if np.ptp(arr) == 0:
        return RegularClass.bounded(float(arr[0]))
    m = np.arange(arr.size)
    a = max(0.0, float(np.max(np.diff(arr))))
    return RegularClass.affine(a, float(np.max(arr - a * m)))


def witness_r1(R: RegularClass, N=None, k: int = 0, kprime: float = 0,
               m_max: int = DEFAULT.regsets.witness_m_max) -> ClosureWitness:
    """N'_m with N_{m+k} + k' <= N'_m. For zero with k' > 0 the witness is
    bounded(k') and ``escalated`` is set."""
    if k < 0 or kprime < 0:
        raise ParameterError("k and k' must be nonnegative")
    N = R if N is None else N
    escalated = False
    if R.kind == "zero":
        out_cls = RegularClass.zero() if kprime == 0 else RegularClass.bounded(kprime)
        escalated = kprime > 0
    elif R.kind == "bounded":
        out_cls = RegularClass.bounded(R.b + kprime)
    elif R.kind == "affine":
        out_cls = RegularClass.affine(R.a, R.a * k + R.b + kprime)
    else:
        out_cls = RegularClass.full()
    if R.kind == "full":
        out = _as_seq(N, m_max + k)[k : k + m_max + 1] + kprime
    else:
        out = out_cls.representative(m_max)
    return ClosureWitness("R1", (N,), (k, kprime), out_cls, escalated, m_max, out)


def witness_r2(N, Nprime, m_max: int = DEFAULT.regsets.witness_m_max) -> ClosureWitness:
    c1, c2 = _dominating_class(N, m_max), _dominating_class(Nprime, m_max)
    out_cls = c1.join(c2)
    if out_cls.kind == "full":
        out = np.maximum(_as_seq(N, m_max), _as_seq(Nprime, m_max))
    else:
        out = out_cls.representative(m_max)
    return ClosureWitness("R2", (N, Nprime), (), out_cls, False, m_max, out)


def _maxplus(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = a.size
    out = np.full(n, -np.inf)
    for l1 in range(n):
        out[l1:] = np.maximum(out[l1:], a[l1] + b[: n - l1])
    return out


def witness_r3(N, Nprime, m_max: int = DEFAULT.regsets.witness_m_max) -> ClosureWitness:
    """N''_{l1+l2} >= N_{l1} + N'_{l2}. Class level: affine(max a, b + b')."""
    c1, c2 = _dominating_class(N, m_max), _dominating_class(Nprime, m_max)
    top = KINDS[max(c1.rank, c2.rank)]
    if top == "zero":
        out_cls = RegularClass.zero()
    elif top == "bounded":
        out_cls = RegularClass.bounded(c1.b + c2.b)
    elif top == "affine":
        out_cls = RegularClass.affine(max(c1.a, c2.a), c1.b + c2.b)
    else:
        out_cls = RegularClass.full()
    if out_cls.kind == "full":
        out = _maxplus(_as_seq(N, m_max), _as_seq(Nprime, m_max))
    else:
        out = out_cls.representative(m_max)
    return ClosureWitness("R3", (N, Nprime), (), out_cls, False, m_max, out)


@dataclass(frozen=True)
class R4Verdict:
    holds: bool
    L: float | None = None
    Nstar: np.ndarray | None = None
    worst_ratio: float | None = None
    eps_fail: float | None = None


def check_r4(R: RegularClass, N=None, h: float = 0.5, eps_grid: Sequence[float] = (),
             m_max: int = 8, cfg: RegsetsConfig = DEFAULT.regsets) -> R4Verdict:
    """Stability condition sum_k h^k eps^{-N_{k+m}} <= L eps^{-N*_m}.

    zero / bounded: closed form L = 1/(1-h), N* = N, confirmed against the
    truncated sum plus geometric tail on every grid epsilon.
    affine with a > 0: fails as soon as some grid epsilon has h eps^{-a} >= 1
    (the series diverges there); otherwise the finite grid cannot decide.
    """
    if not 0 < h < 1:
        raise ParameterError("h must lie in (0, 1)")
    eps = np.asarray(eps_grid, dtype=float)
    if eps.size == 0 or np.any((eps <= 0) | (eps > 1)):
        raise ParameterError("eps_grid must be a nonempty subset of (0, 1]")
    if R.kind in ("zero", "bounded"):
        b = R.b
        L = 1.0 / (1.0 - h)
        K = cfg.r4_k_trunc
        k = np.arange(K)
        partial = math.fsum(h ** k)
        tail = h ** K / (1.0 - h)
        worst = 0.0
        for e in eps:
            s = (partial + tail) * e ** (-b)
            worst = max(worst, abs(s / (L * e ** (-b)) - 1.0))
        if worst > cfg.r4_tail_tol:
            raise InconclusiveError(f"(R4) closed form mismatch {worst:.3e}")
        return R4Verdict(True, L, np.full(m_max + 1, b), worst)
    if R.kind == "affine" and R.a > 0:
        hit = eps[h * eps ** (-R.a) >= 1.0]
        if hit.size:
            return R4Verdict(False, eps_fail=float(np.max(hit)))
        raise InconclusiveError(
            "affine class: h eps^-a < 1 on the whole grid, divergence not visible")
    if R.kind == "affine":  # a == 0 behaves as bounded(b)
        return check_r4(RegularClass.bounded(R.b), None, h, eps, m_max, cfg)
    return R4Verdict(False, eps_fail=float(np.max(eps)))


def classify_exponents(Nhat: Sequence[float], orders: Sequence[int] | None = None,
                       cfg: RegsetsConfig = DEFAULT.regsets) -> RegularClass:
    """Smallest canonical class dominating the fitted exponents."""
    N = np.asarray(Nhat, dtype=float)
    if N.size < 4 or not np.all(np.isfinite(N)):
        raise ParameterError("classify_exponents needs >= 4 finite exponents")
    m = np.arange(N.size, dtype=float) if orders is None else np.asarray(orders, float)
    if N.max() <= cfg.zero_tol:
        return RegularClass.zero()
    if N.max() - N.min() <= cfg.bounded_tol:
        return RegularClass.bounded(float(N.max()))
    a, c = np.polyfit(m, N, 1)
    if np.max(np.abs(N - (a * m + c))) <= cfg.affine_tol:
        if a <= 0:
            return RegularClass.bounded(float(N.max()))
        return RegularClass.affine(float(a), float(max(0.0, np.max(N - a * m))))
    return RegularClass.full()
