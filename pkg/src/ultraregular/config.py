"""Central configuration: every tolerance and default grid lives here.

Each section is a frozen dataclass. ``Config.from_env`` applies overrides from
environment variables named ``ULTRAREG_<SECTION>_<FIELD>`` (upper case), e.g.
``ULTRAREG_DECAY_SLACK=3.0`` or ``ULTRAREG_CLASSIFY_M_MAX=5``.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field, fields, replace


@dataclass(frozen=True)
class WeightsConfig:
    h1_tol: float = 1e-12
    # H-grid for (H2)/(H2)': 2**(j/16), j = 0..n_h-1 (1.0 to 16.0)
    h_grid_steps_per_octave: int = 16
    h_grid_points: int = 65
    # a candidate H is accepted when f(p) = g(p) - p ln H stops growing over
    # the last quarter of the index range (least-squares slope below this)
    h2_tail_slope_tol: float = 1e-9
    h3_converges_above: float = 1.2
    h3_diverges_at_most: float = 1.05
    t_grid_min: float = 1e-2
    t_grid_max: float = 1e8
    t_grid_points: int = 4096


@dataclass(frozen=True)
class RegsetsConfig:
    zero_tol: float = 0.1
    bounded_tol: float = 0.1
    affine_tol: float = 0.15
    r4_k_trunc: int = 256
    r4_tail_tol: float = 1e-12
    witness_m_max: int = 64


@dataclass(frozen=True)
class NetConfig:
    max_order: int = 8
    # spectral coefficients below this fraction of the peak are zeroed before
    # multiplying by (i xi)^alpha; suppresses roundoff amplification
    spectral_floor: float = 1e-15
    ringing_tol: float = 1e-8
    quad_nodes_1d: int = 192
    quad_nodes_2d: int = 32


@dataclass(frozen=True)
class ClassifyConfig:
    m_max: int = 6
    fit_fraction: float = 0.5
    min_fit_points: int = 4
    null_rel: float = 1e-10
    null_probe_order: int = 4
    ultra_margin: float = 0.2
    ultra_margin_floor: float = 0.5
    # effective frequency S_m / S_{m-1} must stay below this fraction of Nyquist
    resolution_fraction: float = 0.25
    # witness index shifts s: derivatives bounded against M_{m-s}
    index_shifts: tuple = (0, 1)


@dataclass(frozen=True)
class WindowConfig:
    """Cutoff family for localisation. ``radius=None`` means extent/16, i.e. 16
    cells at the 256-cell reference resolution."""

    radius: float | None = None
    taper_fraction: float = 0.6
    n_radii: int = 3
    shrink: float = 0.85
    sigma: float = 2.0
    min_cells: int = 8
    spacing_fraction: float = 0.5
    negligible: float = 1e-10  # window sup / net sup below this counts as zero content


@dataclass(frozen=True)
class DecayConfig:
    a_step: float = 0.1
    a_max: float = 2.0
    a_tol: float = 0.05
    b_max: float = 6.0
    k_min: float = 1e-9
    slack: float = 2.302585092994046  # ln 10
    rho0_cells: float = 8.0
    noise_rel: float = 1e-13
    resolve_floor: float = 1e-10
    resolve_floor_2d: float = 1e-3
    roundoff_factor: float = 1e3  # band content below this many roundoff units is noise
    band_fraction: float = 0.8
    null_rel: float = 1e-10
    fit_fraction: float = 0.5
    n_sectors_2d: int = 8
    overlap: float = 0.25
    delta_sep: float = 0.25
    sector_slack: int = 1


@dataclass(frozen=True)
class Config:
    weights: WeightsConfig = field(default_factory=WeightsConfig)
    regsets: RegsetsConfig = field(default_factory=RegsetsConfig)
    nets: NetConfig = field(default_factory=NetConfig)
    classify: ClassifyConfig = field(default_factory=ClassifyConfig)
    windows: WindowConfig = field(default_factory=WindowConfig)
    decay: DecayConfig = field(default_factory=DecayConfig)

    @classmethod
    def from_env(cls, environ=None) -> "Config":
        env = os.environ if environ is None else environ
        cfg = cls()
        for sec in fields(cls):
            section = getattr(cfg, sec.name)
            updates = {}
            for f in fields(section):
                key = f"ULTRAREG_{sec.name}_{f.name}".upper()
                if key in env:
                    updates[f.name] = _coerce(env[key], getattr(section, f.name))
            if updates:
                cfg = replace(cfg, **{sec.name: replace(section, **updates)})
        return cfg

    def with_section(self, name: str, **kw) -> "Config":
        return replace(self, **{name: replace(getattr(self, name), **kw)})

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def _coerce(raw: str, current):
    if isinstance(current, bool):
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float) or current is None:
        return float(raw)
    if isinstance(current, tuple):
        return tuple(int(v) for v in raw.split(",") if v.strip())
    return raw


DEFAULT = Config()
