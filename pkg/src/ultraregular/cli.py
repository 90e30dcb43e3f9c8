"""Command-line front end.

    ultraregular list
    ultraregular validate SCENARIO
    ultraregular run SCENARIO [--out DIR] [--threads N] [--seed S]

SCENARIO is a path to a YAML/JSON file or the name of a bundled scenario.
Exit codes: 0 success, 2 some analysis returned FAIL, 1 execution or schema
error.  Config fields can be overridden through ULTRAREG_<SECTION>_<FIELD>
environment variables (e.g. ULTRAREG_CLASSIFY_M_MAX=5); scenario 'config'
entries take precedence over the environment.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

from . import __version__
from .config import Config
from .errors import UltraError
from .report import FAIL, PASS, AnalysisRecord, Report
from .scenario import Scenario, build_nets, load_file, parse, run_analysis


def bundled_dir() -> Path:
    return Path(str(resources.files("ultraregular") / "scenarios"))


def list_scenarios() -> list:
    """(name, description) for every bundled scenario, sorted by name."""
    out = []
    for p in sorted(bundled_dir().glob("*.yaml")):
        d = load_file(p)
        out.append((p.stem, str(d.get("description", "")).strip().splitlines()[0] if d.get("description") else ""))
    return out


def resolve(ref: str) -> Path:
    p = Path(ref)
    if p.exists():
        return p
    cand = bundled_dir() / f"{ref}.yaml"
    if cand.exists():
        return cand
    raise UltraError(f"no scenario file or bundled scenario named {ref!r}")


def load_scenario(ref: str, base: Config | None = None) -> Scenario:
    return parse(load_file(resolve(ref)), base)


def _label(i: int, d: dict) -> str:
    return str(d.get("label") or f"{i:02d}_{d['type']}")


def run_scenario(sc: Scenario, threads: int = 1) -> Report:
    """Build nets, then run analyses (optionally concurrently); the record
    order always follows the declaration order."""
    t0 = time.perf_counter()
    nets = build_nets(sc) if sc.net_specs else {}

    def one(item):
        i, d = item
        rec, ok, side = run_analysis(sc, d, nets)
        return AnalysisRecord(i, d["type"], _label(i, d), PASS if ok else FAIL, rec, side)

    items = list(enumerate(sc.analyses))
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(one, items))
    else:
        records = [one(it) for it in items]
    return Report(sc.normalized(), sc.config_hash(), records, time.perf_counter() - t0)


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ultraregular", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"ultraregular {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="list bundled scenarios")
    v = sub.add_parser("validate", help="validate a scenario without running it")
    v.add_argument("scenario")
    r = sub.add_parser("run", help="run a scenario and write reports")
    r.add_argument("scenario")
    r.add_argument("--out", default=None, help="output directory (default: scenario 'output' or ./out/<name>)")
    r.add_argument("--threads", type=int, default=1, help="analyses run concurrently on N threads")
    r.add_argument("--seed", type=int, default=None, help="reserved; the core is deterministic and ignores it")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "list":
            for name, desc in list_scenarios():
                print(f"{name:28s} {desc}")
            return 0
        sc = load_scenario(args.scenario)
        if args.command == "validate":
            print("OK")
            print(json.dumps(sc.normalized(), sort_keys=True, indent=2))
            return 0
        if args.threads < 1:
            raise UltraError("--threads must be at least 1")
        rep = run_scenario(sc, args.threads)
        out = args.out or sc.raw.get("output") or str(Path("out") / sc.name)
        rep.write(out)
        for a in rep.analyses:
            print(f"[{a.index}] {a.type:16s} {a.label:28s} {a.verdict}")
        print(f"overall {FAIL if rep.failed else PASS}; reports in {out} ({rep.wall_time:.2f} s)")
        return 2 if rep.failed else 0
    except (UltraError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
