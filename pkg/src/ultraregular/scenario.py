"""Scenario files: schema, validation, net construction and analysis runners.

A scenario is a YAML or JSON mapping.  Every mapping is checked against a
fixed key set before anything is computed, and unknown keys are rejected
with the offending key path in the message.  See README.md for the schema.
"""

from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
import math
from pathlib import Path

import numpy as np
import yaml

from . import bumps, suite
from .classify import classify_net, pseudolocality_probe, scan, singsupp, fit_exponents, _r
from .config import Config
from .errors import ParameterError, SchemaError
from .microlocal import (ConePartition, hormander_product_check, microlocal_pseudolocality,
                         sigma_at_point, sigma_set, wavefront)
from .nets import (DiffOp, EpsilonLadder, Grid, add, apply_diffop, combination, delta, delta_sheet,
                   derivative, embed_constant, heaviside, mollify, multiply, scale, smooth, synthesize)
from .regsets import RegularClass, check_r4
from .weights import (WeightSequence, associated_function, check_h1, check_h2, check_h2prime,
                      check_h3prime, check_komatsu_h2, from_log_values, make_gevrey, recover_moments)

# ---------------------------------------------------------------------------
# schema

TOP_KEYS = {"name", "description", "weights", "regular_class", "grid", "ladder", "config", "nets",
            "analyses", "output"}
WEIGHT_KEYS = {"kind", "sigma", "P", "ln_values"}
CLASS_KEYS = {"kind", "a", "b"}
GRID_KEYS = {"dim", "lo", "hi", "count", "padding"}
LADDER_KEYS = {"eps_max", "eps_min", "count"}
MOLLIFIER_KEYS = {"profile", "sigma", "radius", "q"}

NET_OPS = {
    "mollify": {"spec", "mollifier", "periodic"},
    "constant": {"expr", "periodic"},
    "synthesize": {"expr", "periodic"},
    "canned": {"which"},
    "product": {"args"},
    "sum": {"args"},
    "scale": {"arg", "c", "eps_power"},
    "derivative": {"arg", "alpha"},
    "operator": {"arg", "terms"},
}
SPEC_KINDS = {"delta", "heaviside", "delta_sheet", "smooth", "sum"}
CANNED = {"heavy_tail_plus": lambda g, L: suite.heavy_tail(g, L, 1),
          "heavy_tail_minus": lambda g, L: suite.heavy_tail(g, L, -1)}

ANALYSES = {
    "weights": {"p_max", "t_max"},
    "r4": {"h", "eps_grid", "class"},
    "scan": {"net", "m_max"},
    "classify": {"net", "class"},
    "singsupp": {"net", "class"},
    "sigma": {"net"},
    "sigma_at_point": {"net", "x0"},
    "wavefront": {"net", "points"},
    "product_check": {"f", "g", "points"},
    "pseudolocality": {"net", "terms", "level", "points"},
}

# names available inside expressions; scenario files are trusted local input,
# this only keeps expressions to arithmetic on grid coordinates
EXPR_NAMESPACE = {
    "np": np, "pi": math.pi, "e": math.e,
    "sin": np.sin, "cos": np.cos, "exp": np.exp, "log": np.log, "sqrt": np.sqrt, "abs": np.abs,
    "where": np.where, "maximum": np.maximum, "minimum": np.minimum, "tanh": np.tanh,
    "gevrey_bump": bumps.gevrey_bump, "plateau": bumps.plateau, "smooth_step": bumps.smooth_step,
    "chi": suite.chi, "lacunary": suite.lacunary_series,
}


def _check_keys(obj, allowed: set, where: str) -> None:
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected a mapping, got {type(obj).__name__}")
    for k in obj:
        if k not in allowed:
            raise SchemaError(f"{where}: unknown key {k!r}")


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise SchemaError(f"{where}: missing required key {key!r}")
    return obj[key]


def load_file(path) -> dict:
    text = Path(path).read_text()
    try:
        data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise SchemaError(f"{path}: cannot parse: {exc}") from None
    if not isinstance(data, dict):
        raise SchemaError(f"{path}: top level must be a mapping")
    return data


def _compile(expr: str, args: tuple, where: str):
    if not isinstance(expr, str):
        raise SchemaError(f"{where}: expr must be a string")
    try:
        code = compile(expr, where, "eval")
    except SyntaxError as exc:
        raise SchemaError(f"{where}: invalid expression: {exc.msg}") from None
    for name in code.co_names:
        if name not in EXPR_NAMESPACE and name not in args:
            raise SchemaError(f"{where}: unknown name {name!r} in expression")

    def fn(*vals):
        env = dict(EXPR_NAMESPACE)
        env.update(zip(args, vals))
        return np.asarray(eval(code, {"__builtins__": {}}, env), dtype=complex if "1j" in expr else float)

    return fn


@dataclasses.dataclass
class Scenario:
    raw: dict
    name: str
    weights: WeightSequence | None
    regular_class: RegularClass
    grid: Grid | None
    ladder: EpsilonLadder | None
    config: Config
    net_specs: list
    analyses: list

    def normalized(self) -> dict:
        """Canonical echo: defaults filled in, keys sorted on output."""
        out = {"name": self.name, "description": self.raw.get("description", ""),
               "weights": None if self.weights is None else
               {"kind": self.weights.kind, "sigma": self.weights.sigma, "P": self.weights.P},
               "regular_class": self.regular_class.to_record(),
               "grid": None if self.grid is None else self.grid.to_record(),
               "ladder": None if self.ladder is None else self.ladder.to_record(),
               "config_overrides": self.raw.get("config", {}),
               "nets": self.net_specs, "analyses": self.analyses}
        return json.loads(json.dumps(out, sort_keys=True, default=_json_default))

    def config_hash(self) -> str:
        blob = json.dumps({"scenario": self.normalized(), "config": self.config.as_dict()},
                          sort_keys=True, default=_json_default)
        return hashlib.sha256(blob.encode()).hexdigest()


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, (tuple, set, frozenset)):
        return list(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


def _weights(d) -> WeightSequence:
    _check_keys(d, WEIGHT_KEYS, "weights")
    kind = d.get("kind", "gevrey")
    if kind == "gevrey":
        return make_gevrey(float(d.get("sigma", 2.0)), int(d.get("P", 512)))
    if kind == "values":
        return from_log_values(_require(d, "ln_values", "weights"))
    raise SchemaError(f"weights.kind: unknown value {kind!r}")


def _class(d, where: str) -> RegularClass:
    if isinstance(d, str):
        d = {"kind": d}
    _check_keys(d, CLASS_KEYS, where)
    try:
        return RegularClass.from_record(d)
    except ParameterError as exc:
        raise SchemaError(f"{where}: {exc}") from None


def _grid(d) -> Grid:
    _check_keys(d, GRID_KEYS, "grid")
    dim = int(d.get("dim", 1))
    try:
        return Grid.box(_require(d, "lo", "grid"), _require(d, "hi", "grid"), _require(d, "count", "grid"),
                        dim, int(d.get("padding", 16)))
    except ParameterError as exc:
        raise SchemaError(f"grid: {exc}") from None


def _ladder(d) -> EpsilonLadder:
    _check_keys(d, LADDER_KEYS, "ladder")
    return EpsilonLadder.span(float(d.get("eps_max", 0.3)), float(d.get("eps_min", 0.02)), int(d.get("count", 10)))


def _config(d, base: Config) -> Config:
    if not d:
        return base
    sections = {f.name for f in dataclasses.fields(Config)}
    _check_keys(d, sections, "config")
    cfg = base
    for sec, vals in d.items():
        fields = {f.name for f in dataclasses.fields(getattr(cfg, sec))}
        _check_keys(vals, fields, f"config.{sec}")
        vals = {k: tuple(v) if isinstance(v, list) else v for k, v in vals.items()}
        cfg = cfg.with_section(sec, **vals)
    return cfg


def _validate_net(i: int, d: dict, known: set, dim: int | None) -> None:
    where = f"nets[{i}]"
    if not isinstance(d, dict):
        raise SchemaError(f"{where}: expected a mapping")
    name = _require(d, "name", where)
    op = _require(d, "op", where)
    if op not in NET_OPS:
        raise SchemaError(f"{where}.op: unknown operation {op!r}")
    _check_keys(d, NET_OPS[op] | {"name", "op"}, where)
    if name in known:
        raise SchemaError(f"{where}: duplicate net name {name!r}")
    refs = d.get("args", []) + ([d["arg"]] if "arg" in d else [])
    for r in refs:
        if r not in known:
            raise SchemaError(f"{where}: net {r!r} is not defined before use")
    if op == "mollify":
        _validate_spec(_require(d, "spec", where), f"{where}.spec")
        if "mollifier" in d:
            _check_keys(d["mollifier"], MOLLIFIER_KEYS, f"{where}.mollifier")
    if op in ("constant", "synthesize"):
        coords = ("x", "y")[: dim or 1]
        _compile(_require(d, "expr", where), coords + (("eps",) if op == "synthesize" else ()), f"{where}.expr")
    if op == "canned" and _require(d, "which", where) not in CANNED:
        raise SchemaError(f"{where}.which: unknown canned net {d['which']!r}")
    if op == "operator":
        _validate_terms(_require(d, "terms", where), f"{where}.terms", dim or 1)
    if op == "derivative":
        _require(d, "alpha", where)


def _validate_spec(s, where: str) -> None:
    if not isinstance(s, dict) or len(s) != 1:
        raise SchemaError(f"{where}: expected a single-key mapping, one of {sorted(SPEC_KINDS)}")
    (kind, val), = s.items()
    if kind not in SPEC_KINDS:
        raise SchemaError(f"{where}: unknown key {kind!r}")
    if kind == "sum":
        if not isinstance(val, list):
            raise SchemaError(f"{where}.sum: expected a list")
        for j, t in enumerate(val):
            _check_keys(t, {"coef", "spec"}, f"{where}.sum[{j}]")
            _validate_spec(_require(t, "spec", f"{where}.sum[{j}]"), f"{where}.sum[{j}].spec")
    if kind == "delta_sheet":
        _check_keys(val, {"axis", "c"}, f"{where}.delta_sheet")
    if kind == "smooth":
        _compile(val, ("x", "y"), f"{where}.smooth")


def _validate_terms(terms, where: str, dim: int) -> None:
    if not isinstance(terms, list) or not terms:
        raise SchemaError(f"{where}: expected a nonempty list")
    for j, t in enumerate(terms):
        _check_keys(t, {"coef", "alpha"}, f"{where}[{j}]")
        _require(t, "alpha", f"{where}[{j}]")
        c = t.get("coef", 1.0)
        if isinstance(c, str):
            _compile(c, ("x", "y")[:dim], f"{where}[{j}].coef")


def _validate_analysis(i: int, d: dict, nets: set, dim: int) -> None:
    where = f"analyses[{i}]"
    if not isinstance(d, dict):
        raise SchemaError(f"{where}: expected a mapping")
    typ = _require(d, "type", where)
    if typ not in ANALYSES:
        raise SchemaError(f"{where}.type: unknown analysis {typ!r}")
    _check_keys(d, ANALYSES[typ] | {"type", "label"}, where)
    for key in ("net", "f", "g"):
        if key in ANALYSES[typ]:
            ref = _require(d, key, where)
            if ref not in nets:
                raise SchemaError(f"{where}.{key}: unknown net {ref!r}")
    if "class" in d:
        _class(d["class"], f"{where}.class")
    if typ == "pseudolocality":
        _validate_terms(_require(d, "terms", where), f"{where}.terms", dim)
        if d.get("level", "singsupp") not in ("singsupp", "microlocal"):
            raise SchemaError(f"{where}.level: expected 'singsupp' or 'microlocal'")


def parse(data: dict, base: Config | None = None) -> Scenario:
    """Validate a scenario mapping completely; no net is built here."""
    data = copy.deepcopy(data)
    _check_keys(data, TOP_KEYS, "scenario")
    name = str(_require(data, "name", "scenario"))
    base = Config.from_env() if base is None else base
    cfg = _config(data.get("config"), base)
    W = _weights(data["weights"]) if "weights" in data else None
    R = _class(data.get("regular_class", {"kind": "affine", "a": 1.0, "b": 1.0}), "regular_class")
    grid = _grid(data["grid"]) if "grid" in data else None
    lad = _ladder(data["ladder"]) if "ladder" in data else None
    if grid is not None and lad is None:
        lad = EpsilonLadder.span()
    if grid is not None:
        lad.validate_for(grid)
    nets = data.get("nets", []) or []
    analyses = data.get("analyses", []) or []
    if not isinstance(nets, list):
        raise SchemaError("nets: expected a list")
    if not isinstance(analyses, list):
        raise SchemaError("analyses: expected a list")
    if nets and grid is None:
        raise SchemaError("scenario: nets need a 'grid' section")
    known: set = set()
    for i, d in enumerate(nets):
        _validate_net(i, d, known, grid.dim if grid else None)
        known.add(d["name"])
    for i, d in enumerate(analyses):
        _validate_analysis(i, d, known, grid.dim if grid else 1)
        if d["type"] in ("classify", "singsupp", "sigma", "sigma_at_point", "wavefront",
                         "product_check", "pseudolocality", "weights") and W is None:
            raise SchemaError(f"analyses[{i}]: analysis {d['type']!r} needs a 'weights' section")
    if "output" in data and not isinstance(data["output"], str):
        raise SchemaError("output: expected a directory path string")
    return Scenario(data, name, W, R, grid, lad, cfg, nets, analyses)


# ---------------------------------------------------------------------------
# net construction


def _spec_obj(s):
    (kind, val), = s.items()
    if kind == "delta":
        return delta(*np.atleast_1d(val).astype(float))
    if kind == "heaviside":
        return heaviside(float(val))
    if kind == "delta_sheet":
        return delta_sheet(int(val.get("axis", 0)), float(val.get("c", 0.0)))
    if kind == "smooth":
        return smooth(_compile(val, ("x", "y"), "smooth"), val)
    return combination(*[(float(t.get("coef", 1.0)), _spec_obj(t["spec"])) for t in val])


def _diffop(terms, dim: int) -> DiffOp:
    out = []
    for t in terms:
        c = t.get("coef", 1.0)
        if isinstance(c, str):
            c = _compile(c, ("x", "y")[:dim], "coef")
        out.append((c, tuple(int(a) for a in np.atleast_1d(t["alpha"]))))
    return DiffOp(tuple(out), "scenario operator")


def build_nets(sc: Scenario) -> dict:
    g, L, cfg = sc.grid, sc.ladder, sc.config
    out: dict = {}
    for d in sc.net_specs:
        op = d["op"]
        per = d.get("periodic", False)
        if op == "mollify":
            m = bumps.Mollifier(**d.get("mollifier", {}))
            net = mollify(_spec_obj(d["spec"]), m, g, L, cfg.nets, per)
        elif op == "constant":
            fn = _compile(d["expr"], ("x", "y")[: g.dim], d["name"])
            net = embed_constant(fn, g, L, per, d["expr"])
        elif op == "synthesize":
            fn = _compile(d["expr"], ("x", "y")[: g.dim] + ("eps",), d["name"])
            net = synthesize(fn, g, L, d["expr"], per)
        elif op == "canned":
            net = CANNED[d["which"]](g, L)
        elif op == "product":
            net = out[d["args"][0]]
            for a in d["args"][1:]:
                net = multiply(net, out[a])
        elif op == "sum":
            net = out[d["args"][0]]
            for a in d["args"][1:]:
                net = add(net, out[a])
        elif op == "scale":
            net = scale(out[d["arg"]], float(d.get("c", 1.0)), float(d.get("eps_power", 0.0)))
        elif op == "derivative":
            net = derivative(out[d["arg"]], tuple(int(a) for a in np.atleast_1d(d["alpha"])), cfg.nets)
        else:
            net = apply_diffop(_diffop(d["terms"], g.dim), out[d["arg"]], cfg.nets)
        out[d["name"]] = net
    return out


# ---------------------------------------------------------------------------
# analyses; each returns (record, verdict, csv sidecars)


def _points(d, net):
    if "points" not in d:
        return None
    return np.asarray(d["points"], float).reshape(-1, net.dim)


def run_analysis(sc: Scenario, d: dict, nets: dict):
    typ = d["type"]
    cfg, W = sc.config, sc.weights
    R = _class(d["class"], "class") if "class" in d else sc.regular_class
    sidecars = {}
    if typ == "weights":
        rec, ok = _weights_audit(W, cfg, int(d.get("p_max", 50)), float(d.get("t_max", 1e4)))
        return rec, ok, sidecars
    if typ == "r4":
        eps = d.get("eps_grid", sc.ladder.values.tolist() if sc.ladder else [0.3, 0.1, 0.03, 0.01])
        v = check_r4(R, None, float(d.get("h", 0.5)), eps, cfg=cfg.regsets)
        rec = {"class": R.to_record(), "holds": v.holds, "L": _r(v.L), "eps_fail": _r(v.eps_fail),
               "worst_ratio": _r(v.worst_ratio)}
        return rec, True, sidecars
    net = nets[d["net"]] if "net" in d else None
    if typ == "scan":
        s = scan(net, None, d.get("m_max"), cfg)
        f = fit_exponents(s, cfg)
        sidecars["scan"] = s.to_csv()
        rec = {"net": d["net"], "slopes": [_r(v, 4) for v in f.slopes],
               "intercepts": [_r(v, 4) for v in f.intercepts]}
        return rec, True, sidecars
    if typ == "classify":
        rep = classify_net(net, W, None, cfg)
        sidecars["scan"] = rep.fit.scan.to_csv()
        ok = rep.member_of(R)
        rec = {"net": d["net"], "tested_class": R.to_record(), "member": ok, **rep.to_record()}
        return rec, ok, sidecars
    if typ == "singsupp":
        ss = singsupp(net, W, R, None, None, cfg)
        rec = {"net": d["net"], "tested_class": R.to_record(), **ss.to_record()}
        return rec, not ss.singular.any(), sidecars
    part = ConePartition.default(net.dim if net is not None else nets[d["f"]].dim, cfg.decay)
    if typ == "sigma":
        res = sigma_set(net, W, part, cfg)
        return {"net": d["net"], **res.to_record(part)}, not res.sectors, sidecars
    if typ == "sigma_at_point":
        ps = sigma_at_point(net, d["x0"], W, part, None, cfg)
        return {"net": d["net"], **ps.to_record(part)}, not ps.sectors, sidecars
    if typ == "wavefront":
        wf = wavefront(net, W, part, None, _points(d, net), cfg)
        sidecars["wavefront"] = wf.to_csv()
        return {"net": d["net"], **wf.to_record()}, not wf.sector_projection(), sidecars
    if typ == "product_check":
        f, g = nets[d["f"]], nets[d["g"]]
        pr = hormander_product_check(f, g, W, part, None, _points(d, f), cfg)
        return {"f": d["f"], "g": d["g"], **pr.to_record()}, pr.holds, sidecars
    if typ == "pseudolocality":
        P = _diffop(d["terms"], net.dim)
        if d.get("level", "singsupp") == "microlocal":
            mp = microlocal_pseudolocality(P, net, W, part, None, _points(d, net), cfg)
            return {"net": d["net"], "level": "microlocal", **mp.to_record()}, mp.holds, sidecars
        pp = pseudolocality_probe(P, net, W, R, None, cfg)
        return {"net": d["net"], "level": "singsupp", **pp.to_record()}, pp.forward, sidecars
    raise SchemaError(f"unknown analysis {typ!r}")


def _weights_audit(W: WeightSequence, cfg: Config, p_max: int, t_max: float):
    h1, bad = check_h1(W, cfg.weights.h1_tol)
    h2 = check_h2(W, None, cfg.weights)
    h2p = check_h2prime(W, None, cfg.weights)
    h3 = check_h3prime(W, cfg.weights)
    T = associated_function(W)
    kom = None
    if h2 is not None:
        kr = check_komatsu_h2(T, h2.A, h2.H, np.geomspace(1.0, t_max, 2048))
        kom = {"holds": kr.holds, "worst_margin": _r(kr.worst_margin), "t_worst": _r(kr.t_worst)}
    p_top = min(p_max, W.P // 2)
    worst = 0.0
    for p in range(1, p_top + 1):
        rm = recover_moments(T, p)
        worst = max(worst, abs(rm.ln_value - W.ln_values[p]) / abs(W.ln_values[p]) if W.ln_values[p] else 0.0)
    rec = {"sequence": W.to_record() | {"ln_values": f"{W.P + 1} values"},
           "H1": {"holds": h1, "first_violation": bad},
           "H2": None if h2 is None else {"A": _r(h2.A), "H": _r(h2.H)},
           "H2prime": None if h2p is None else {"A": _r(h2p.A), "H": _r(h2p.H)},
           "H3prime": {"verdict": h3.verdict, "r": _r(h3.r)},
           "komatsu": kom,
           "moment_roundtrip_max_rel_error": float(f"{worst:.3e}"),
           "moment_roundtrip_p_max": p_top}
    ok = h1 and h2 is not None and kom is not None and kom["holds"]
    return rec, ok
