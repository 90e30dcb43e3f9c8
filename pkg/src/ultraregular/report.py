"""Report assembly: a JSON machine report, a structured text report, CSV sidecars.

The machine report (report.json) is byte-stable across runs: keys sorted,
floats already rounded by the producers, no wall time.  The text report
(report.txt) adds the wall time.

CSV sidecar schemas (frozen):
    <label>.scan.csv       order,epsilon,sup_norm
    <label>.wavefront.csv  x[,y],sector_center_angle,verdict,a,b,k,margin
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__

PASS, FAIL = "PASS", "FAIL"


@dataclass
class AnalysisRecord:
    index: int
    type: str
    label: str
    verdict: str
    result: dict
    sidecars: dict = field(default_factory=dict)  # kind -> csv text

    def to_record(self) -> dict:
        return {"index": self.index, "type": self.type, "label": self.label, "verdict": self.verdict,
                "result": self.result, "sidecars": sorted(self.sidecar_names().values())}

    def sidecar_names(self) -> dict:
        return {k: f"{_slug(self.label)}.{k}.csv" for k in sorted(self.sidecars)}


@dataclass
class Report:
    scenario: dict
    config_hash: str
    analyses: list
    wall_time: float = 0.0

    @property
    def failed(self) -> bool:
        return any(a.verdict == FAIL for a in self.analyses)

    def machine(self) -> dict:
        return {"tool": "ultraregular", "version": __version__, "config_hash": self.config_hash,
                "scenario": self.scenario, "analyses": [a.to_record() for a in self.analyses],
                "overall": FAIL if self.failed else PASS}

    def to_json(self) -> str:
        return json.dumps(self.machine(), sort_keys=True, indent=2) + "\n"

    def to_text(self) -> str:
        lines = [f"scenario: {self.scenario.get('name')}",
                 f"tool: ultraregular {__version__}",
                 f"config_hash: {self.config_hash}",
                 f"wall_time_s: {self.wall_time:.3f}",
                 f"analyses: {len(self.analyses)}",
                 f"overall: {FAIL if self.failed else PASS}", ""]
        for a in self.analyses:
            lines.append(f"[{a.index}] {a.type} {a.label}: {a.verdict}")
            lines += ["    " + ln for ln in _flatten(a.result)]
            for name in a.sidecar_names().values():
                lines.append(f"    sidecar: {name}")
            lines.append("")
        return "\n".join(lines)

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.to_json())
        (out / "report.txt").write_text(self.to_text())
        for a in self.analyses:
            for kind, name in a.sidecar_names().items():
                (out / name).write_text(a.sidecars[kind])
        return out


def _slug(s: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", s).strip("_") or "analysis"


def _flatten(obj, prefix: str = "") -> list:
    """Key-value lines, one per scalar leaf; short scalar lists stay inline."""
    if isinstance(obj, dict):
        out = []
        for k in sorted(obj):
            out += _flatten(obj[k], f"{prefix}.{k}" if prefix else str(k))
        return out
    if isinstance(obj, list) and any(isinstance(v, (dict, list)) for v in obj):
        out = []
        for i, v in enumerate(obj):
            out += _flatten(v, f"{prefix}[{i}]")
        return out
    return [f"{prefix} = {json.dumps(obj)}"]
