"""Derivative scans, asymptotic exponent fits and membership verdicts.

Pipeline: scan (sup-norm table over derivative order x epsilon) -> fit
(log-log slopes on the small-epsilon half of the ladder) -> classify (regular
class from the slopes, class-M verdict from the intercepts).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bumps import Cutoff
from .config import DEFAULT, ClassifyConfig, Config, WindowConfig
from .errors import FitError, GeometryError, ParameterError
from .nets import DiffOp, Net, apply_diffop, crop, derivative, multi_indices, window
from .regsets import RegularClass, classify_exponents
from .weights import WeightSequence


@dataclass(frozen=True)
class DerivativeScan:
    table: np.ndarray  # (m_max+1, J) sup over K
    global_table: np.ndarray  # (m_max+1, J) sup over the whole grid
    eps: np.ndarray
    m_max: int
    region: tuple | None
    nyquist: float
    label: str = ""

    def to_csv(self) -> str:
        lines = ["order,epsilon,sup_norm"]
        for m in range(self.m_max + 1):
            for e, s in zip(self.eps, self.table[m]):
                lines.append(f"{m},{e:.17g},{s:.17g}")
        return "\n".join(lines) + "\n"


def _region_mask(net: Net, K) -> np.ndarray | None:
    if K is None:
        return None
    mesh = net.grid.mesh()
    mask = np.ones(net.grid.shape, bool)
    for c, (lo, hi) in zip(mesh, K):
        mask &= (c >= lo) & (c <= hi)
    return mask


def scan(net: Net, K=None, m_max: int | None = None, cfg: Config = DEFAULT) -> DerivativeScan:
    """Sup-norms of all derivatives up to order m_max over K, per epsilon."""
    m_max = cfg.classify.m_max if m_max is None else m_max
    if m_max > cfg.nets.max_order:
        raise ParameterError("m_max exceeds the configured derivative order cap")
    J = net.ladder.count
    table = np.zeros((m_max + 1, J))
    glob = np.zeros((m_max + 1, J))
    mask = _region_mask(net, K)
    for m in range(m_max + 1):
        for alpha in multi_indices(m, net.dim):
            d = np.abs(derivative(net, alpha, cfg.nets).samples)
            flat = d.reshape(J, -1)
            glob[m] = np.maximum(glob[m], flat.max(axis=1))
            if mask is None:
                table[m] = np.maximum(table[m], flat.max(axis=1))
            else:
                table[m] = np.maximum(table[m], flat[:, mask.ravel()].max(axis=1))
    return DerivativeScan(table, glob, net.eps.copy(), m_max,
                          None if K is None else tuple(tuple(k) for k in K),
                          net.grid.nyquist(), net.describe())


@dataclass(frozen=True)
class ExponentFit:
    slopes: np.ndarray  # N^_m; -inf for null rows
    intercepts: np.ndarray  # c^_m (ln of the constant); -inf for null rows
    residuals: np.ndarray  # max abs residual per row
    points_used: np.ndarray
    null_rows: np.ndarray
    fit_eps: np.ndarray
    scan: DerivativeScan = field(repr=False)

    @property
    def m_max(self) -> int:
        return self.slopes.size - 1


def _fit_indices(J: int, cfg: ClassifyConfig) -> np.ndarray:
    n = max(cfg.min_fit_points, int(math.ceil(J * cfg.fit_fraction)))
    if n > J:
        raise FitError(f"ladder of {J} values is too short for {cfg.min_fit_points} fit points")
    return np.arange(J - n, J)


def fit_exponents(sc: DerivativeScan, cfg: Config = DEFAULT) -> ExponentFit:
    """ln sup = c^ + N^ ln(1/eps) by least squares on the small-eps half."""
    ccfg = cfg.classify
    J = sc.eps.size
    idx = _fit_indices(J, ccfg)
    L = np.log(1.0 / sc.eps[idx])
    M = sc.table.shape[0]
    slopes = np.full(M, -np.inf)
    icpt = np.full(M, -np.inf)
    res = np.zeros(M)
    used = np.zeros(M, int)
    null = np.zeros(M, bool)
    for m in range(M):
        y = sc.table[m, idx]
        ref = max(sc.global_table[m].max(), 0.0)
        thr = ccfg.null_rel * ref
        good = y > thr
        if not good.any():
            null[m] = True
            continue
        if good.sum() < ccfg.min_fit_points:
            if not good[-1]:  # vanishes at the smallest eps: eventually zero
                null[m] = True
                continue
            raise FitError(f"order {m}: only {good.sum()} usable points")
        ly = np.log(y[good])
        A = np.vstack([np.ones(good.sum()), L[good]]).T
        coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
        icpt[m], slopes[m] = coef
        res[m] = float(np.max(np.abs(A @ coef - ly)))
        used[m] = int(good.sum())
    return ExponentFit(slopes, icpt, res, used, null, sc.eps[idx], sc)


@dataclass(frozen=True)
class UltraVerdict:
    passed: bool
    ln_C_hat: float  # max_m e_m / (m+1)
    ln_C_trend: float  # per-order growth fitted on the reference orders
    ln_C_allowed: float
    offset: float
    margins: dict  # order -> allowed minus observed normalized excess
    resolved: bool
    resolution_ratio: float
    reason: str = ""
    shift: int = 0

    def worst_margin(self) -> float:
        return min(self.margins.values()) if self.margins else math.inf

    def to_record(self) -> dict:
        return {
            "passed": self.passed,
            "ln_C_hat": _r(self.ln_C_hat),
            "ln_C_trend": _r(self.ln_C_trend),
            "ln_C_allowed": _r(self.ln_C_allowed),
            "margins": {str(k): _r(v) for k, v in sorted(self.margins.items())},
            "resolved": self.resolved,
            "resolution_ratio": _r(self.resolution_ratio),
            "reason": self.reason,
            "index_shift": self.shift,
        }


def _r(x, nd: int = 6):
    if x is None:
        return None
    x = float(x)
    if not math.isfinite(x):
        return str(x)
    return round(x, nd) + 0.0  # no negative zero


def em_decision(log_table: Sequence[float], M: WeightSequence, cfg: ClassifyConfig = DEFAULT.classify,
                resolution_ratio: float = 0.0) -> UltraVerdict:
    """Class-M test on ln-bounds c_m of the m-th derivatives (m = 0..m_max).

    e_m = c_m - ln M_{m-s}.  The reference orders 1 <= m <= m_max // 2 give a
    least-squares trend e_m ~ offset + (m+1) ln C.  The upper orders must stay
    under that trend with ln C enlarged by the relative margin (20% of |ln C|
    of the unshifted trend, at least ``ultra_margin * ultra_margin_floor``).  Order 0 is a sup-norm,
    not a derivative bound, and stays out of the trend.

    The index shift s runs over ``cfg.index_shifts``.  Since M_{m-1} <= M_m
    for the sequences in use, a bound against the shifted sequence is also a
    class-M bound; it absorbs nets whose derivatives are those of a class-M
    function one order lower (antiderivatives of a mollifier).  The verdict
    keeps the shift with the best worst-case margin.  Non-finite entries are
    null orders and are skipped.
    """
    best = None
    slack = None
    for shift in sorted(cfg.index_shifts):
        v = _em_single(log_table, M, cfg, resolution_ratio, int(shift), slack)
        if slack is None and math.isfinite(v.ln_C_trend):
            # the relative margin is always taken from the unshifted trend
            slack = v.ln_C_allowed - v.ln_C_trend
        if best is None or _rank(v) > _rank(best):
            best = v
    return best


def _rank(v: "UltraVerdict") -> tuple:
    w = v.worst_margin()
    return (v.passed, w if math.isfinite(w) else math.inf, -v.shift)


def _em_single(log_table, M: WeightSequence, cfg: ClassifyConfig, resolution_ratio: float,
               shift: int, slack: float | None = None) -> "UltraVerdict":
    c = np.asarray(log_table, float)
    m_all = np.arange(c.size)
    e = c - M.ln_values[np.maximum(m_all - shift, 0)]
    ok = np.isfinite(e)
    resolved = resolution_ratio <= cfg.resolution_fraction
    if not ok.any():
        return UltraVerdict(True, -math.inf, -math.inf, -math.inf, 0.0, {}, True, resolution_ratio,
                            "null", shift)
    ln_C_hat = float(np.max(e[ok] / (m_all[ok] + 1)))
    m_ref = (c.size - 1) // 2
    ref = ok & (m_all <= m_ref) & (m_all >= 1)
    upper = ok & (m_all > m_ref)
    if ref.sum() < 2:
        return UltraVerdict(False, ln_C_hat, math.nan, math.nan, math.nan, {}, resolved,
                            resolution_ratio, "too few reference orders", shift)
    x = m_all[ref] + 1.0
    lam, off = np.polyfit(x, e[ref], 1)
    if slack is None:
        slack = cfg.ultra_margin * max(abs(lam), cfg.ultra_margin_floor)
    allowed = lam + slack
    margins = {int(m): float(allowed - (e[m] - off) / (m + 1)) for m in m_all[upper]}
    passed = all(v >= 0 for v in margins.values())
    reason = ""
    if not passed:
        reason = "derivative growth exceeds the class-M envelope"
    if not resolved:
        passed = False
        reason = "derivative growth not resolved by the grid"
    return UltraVerdict(passed, ln_C_hat, float(lam), float(allowed), float(off), margins,
                        resolved, resolution_ratio, reason, shift)


def resolution_ratio(fit: ExponentFit) -> float:
    """max over fit-half slices and orders of (S_m / S_{m-1}) / Nyquist."""
    sc = fit.scan
    J = sc.eps.size
    idx = np.arange(J - fit.fit_eps.size, J)
    worst = 0.0
    for m in range(1, sc.m_max + 1):
        if fit.null_rows[m] or fit.null_rows[m - 1]:
            continue
        a, b = sc.table[m, idx], sc.table[m - 1, idx]
        good = b > 0
        if good.any():
            worst = max(worst, float(np.max(a[good] / b[good])) / sc.nyquist)
    return worst


@dataclass(frozen=True)
class UltraReport:
    fit: ExponentFit
    regular_class: RegularClass
    ultra: UltraVerdict | None
    null: bool
    null_label: str

    def member_of(self, R: RegularClass) -> bool:
        """Membership in G^{M,R} (class level) for the M the report was made with."""
        ok = R.contains_kind(self.regular_class)
        if self.ultra is not None:
            ok = ok and self.ultra.passed
        return ok

    def to_record(self) -> dict:
        f = self.fit
        return {
            "class": self.regular_class.to_record(),
            "slopes": [_r(v, 4) for v in f.slopes],
            "intercepts": [_r(v, 4) for v in f.intercepts],
            "residuals": [_r(v, 4) for v in f.residuals],
            "null_rows": [bool(v) for v in f.null_rows],
            "fit_eps": [_r(v, 6) for v in f.fit_eps],
            "null": self.null,
            "null_label": self.null_label,
            "ultra": None if self.ultra is None else self.ultra.to_record(),
        }


def classify_membership(fit: ExponentFit, M: WeightSequence | None = None,
                        cfg: Config = DEFAULT) -> UltraReport:
    ccfg = cfg.classify
    live = ~fit.null_rows
    if live.sum() >= 4:
        orders = np.nonzero(live)[0]
        rc = classify_exponents(fit.slopes[live], orders, cfg.regsets)
    elif live.sum() == 0:
        rc = RegularClass.zero()
    else:
        mx = float(np.max(fit.slopes[live]))
        rc = RegularClass.zero() if mx <= cfg.regsets.zero_tol else RegularClass.bounded(mx)
    probe = min(ccfg.null_probe_order, fit.m_max)
    # null rows carry slope -inf, so one comparison covers both cases
    null = bool(np.all(fit.slopes <= -probe))
    ultra = None
    if M is not None:
        ultra = em_decision(fit.intercepts, M, ccfg, resolution_ratio(fit))
    return UltraReport(fit, rc, ultra, null, f"null up to order {probe}" if null else "not null")


def classify_net(net: Net, M: WeightSequence | None = None, K=None, cfg: Config = DEFAULT,
                 m_max: int | None = None) -> UltraReport:
    return classify_membership(fit_exponents(scan(net, K, m_max, cfg), cfg), M, cfg)


# ---------------------------------------------------------------------------
# E^M for constant nets


@dataclass(frozen=True)
class GMBCheck:
    route_net: bool
    route_direct: bool
    report: UltraReport
    direct: UltraVerdict

    @property
    def agree(self) -> bool:
        return self.route_net == self.route_direct

    def __bool__(self) -> bool:
        return self.route_net


def theorem_gmb_check(f: Net, M: WeightSequence, direct_table=None, cfg: Config = DEFAULT) -> GMBCheck:
    """Bounded-class ultra verdict of a constant net next to the direct E^M
    decision of the underlying function.

    ``direct_table`` holds sup |f^(m)| for m = 0..m_max from an independent
    source (closed form, exact derivative formula).  Without it the slice
    itself is differentiated, which is the same data the net route sees.
    """
    if f.provenance.get("kind") != "constant":
        raise ParameterError("theorem_gmb_check expects a constant net")
    rep = classify_net(f, M, None, cfg)
    route_net = rep.regular_class.rank <= 1 and rep.ultra.passed
    if direct_table is None:
        direct_table = rep.fit.scan.table[:, 0]
    tab = np.asarray(direct_table, float)
    with np.errstate(divide="ignore"):
        lt = np.where(tab > 0, np.log(np.where(tab > 0, tab, 1.0)), -np.inf)
    direct = em_decision(lt, M, cfg.classify)
    return GMBCheck(bool(route_net), bool(direct.passed), rep, direct)


# ---------------------------------------------------------------------------
# singular support


def window_radius(net: Net, wcfg: WindowConfig) -> float:
    if wcfg.radius is not None:
        return float(wcfg.radius)
    return min(net.grid.extent(i) for i in range(net.dim)) / 16.0


def window_sigma(M: WeightSequence | None, wcfg: WindowConfig) -> float:
    if M is not None and M.kind == "gevrey" and M.sigma and M.sigma > 1:
        return float(M.sigma)
    return wcfg.sigma


def window_centers(net: Net, radius: float, wcfg: WindowConfig, region=None) -> np.ndarray:
    step = radius * wcfg.spacing_fraction
    axes = []
    for i in range(net.dim):
        lo, hi = net.grid.interior(i) if region is None else region[i]
        lo_c, hi_c = lo + radius, hi - radius
        if region is not None:
            lo_c, hi_c = lo, hi
        n = int(math.floor((hi_c - lo_c) / step + 1e-9))
        mid = 0.5 * (lo_c + hi_c)
        if region is None:
            # centre of the cell range, so symmetric grids give symmetric centres
            mid = net.grid.origin[i] + 0.5 * net.grid.extent(i)
        half = n // 2
        axes.append(mid + step * np.arange(-half, half + 1))
    pts = np.meshgrid(*axes, indexing="ij")
    return np.stack([p.ravel() for p in pts], axis=1)


@dataclass(frozen=True)
class SingSuppResult:
    centers: np.ndarray
    singular: np.ndarray
    radius: float
    reports: tuple = field(repr=False, default=())

    @property
    def points(self) -> np.ndarray:
        return self.centers[self.singular]

    def to_record(self) -> dict:
        return {"radius": _r(self.radius), "singular_points": [[_r(v) for v in p] for p in self.points],
                "n_windows": int(self.centers.shape[0])}


def localize(net: Net, center, radius: float, taper: float, sigma: float) -> Net:
    cut = Cutoff(tuple(float(c) for c in center), radius, taper, sigma)
    w = window(net, cut)
    if net.dim == 1:
        return crop(w, center, radius)
    return w


def local_window(P: DiffOp | None, net: Net, center, r: float, wcfg: WindowConfig, sig: float,
                 cfg: Config = DEFAULT, full: Net | None = None) -> Net:
    """Window of P(net) around ``center`` computed from a wider window of net.

    The wider cutoff is 1 on a radius-1.1 r ball, so P(chi' u) = P(u) on the
    support of the inner cutoff.  Differentiating the wide window instead of
    the whole net keeps roundoff from far-away sharp features (a mollified
    jump, a peaking delta) out of the probed window.  Near the grid edge the
    wide window does not fit and ``full`` (the global P(net)) is used."""
    if P is None:
        return localize(net, center, r, wcfg.taper_fraction * r, sig)
    try:
        wide = localize(net, center, 1.8 * r, 0.7 * r, sig)
        Pu = apply_diffop(P, wide, cfg.nets)
    except GeometryError:
        Pu = full if full is not None else apply_diffop(P, net, cfg.nets)
    return localize(Pu, center, r, wcfg.taper_fraction * r, sig)


def local_ok(P: DiffOp | None) -> bool:
    return P is None or all(not isinstance(c, Net) for c, _ in P.terms)


def slice_sups(net: Net) -> np.ndarray:
    return np.abs(net.samples).reshape(net.ladder.count, -1).max(axis=1)


def singsupp(net: Net, M: WeightSequence | None, R: RegularClass, wcfg: WindowConfig | None = None,
             region=None, cfg: Config = DEFAULT, operator: DiffOp | None = None,
             m_max: int | None = None) -> SingSuppResult:
    """Sliding-window scan: a window centre is singular when the windowed net
    fails membership for (M, R).

    With ``operator`` the scan is of operator(net), each window computed
    locally (see ``local_window``).  Net-valued coefficients are applied
    globally."""
    wcfg = cfg.windows if wcfg is None else wcfg
    if operator is not None and not local_ok(operator):
        net, operator = apply_diffop(operator, net, cfg.nets), None
    r = window_radius(net, wcfg)
    if r < wcfg.min_cells * net.grid.dx:
        from .errors import ResolutionError
        raise ResolutionError(f"window radius {r:g} is below {wcfg.min_cells} grid cells")
    sig = window_sigma(M, wcfg)
    centers = window_centers(net, r, wcfg, region)
    full = net if operator is None else apply_diffop(operator, net, cfg.nets)
    ref = slice_sups(full)
    flags, reps = [], []
    for c in centers:
        w = local_window(operator, net, c, r, wcfg, sig, cfg, full)
        rep = classify_net(w, M, None, cfg, m_max)
        # content at the underflow fringe of a cutoff is not a singularity
        tiny = np.all(rep.fit.scan.table[0] <= wcfg.negligible * ref)
        flags.append(not tiny and not rep.member_of(R))
        reps.append(rep)
    return SingSuppResult(centers, np.asarray(flags, bool), r, tuple(reps))


@dataclass(frozen=True)
class PseudolocalityReport:
    forward: bool
    reverse: bool
    singsupp_u: SingSuppResult
    singsupp_Pu: SingSuppResult

    def to_record(self) -> dict:
        return {"forward_holds": self.forward, "reverse_holds": self.reverse,
                "singsupp_u": self.singsupp_u.to_record(), "singsupp_Pu": self.singsupp_Pu.to_record()}


def _included(a: SingSuppResult, b: SingSuppResult, slack_cells: float) -> bool:
    """Every singular centre of a lies within slack of a singular centre of b."""
    if not a.singular.any():
        return True
    if not b.singular.any():
        return False
    pa, pb = a.points, b.points
    d = np.sqrt(((pa[:, None, :] - pb[None, :, :]) ** 2).sum(-1)).min(axis=1)
    return bool(np.all(d <= slack_cells + 1e-12))


def pseudolocality_probe(P: DiffOp, u: Net, M: WeightSequence | None, R: RegularClass,
                         wcfg: WindowConfig | None = None, cfg: Config = DEFAULT) -> PseudolocalityReport:
    """singsupp(Pu) within singsupp(u) (forward) and the reverse inclusion
    (hypoellipticity diagnostic).  Inclusions allow one window step of slack.

    Pu is scanned to order m_max - ord(P), so both scans look at the same
    derivatives of u and a grid that resolves u also resolves Pu."""
    wcfg = cfg.windows if wcfg is None else wcfg
    order = max(sum(a) for _, a in P.terms)
    m_pu = max(cfg.classify.m_max - order, 4)
    su = singsupp(u, M, R, wcfg, None, cfg)
    sp = singsupp(u, M, R, wcfg, None, cfg, operator=P, m_max=m_pu)
    slack = su.radius * wcfg.spacing_fraction
    return PseudolocalityReport(_included(sp, su, slack), _included(su, sp, slack), su, sp)
