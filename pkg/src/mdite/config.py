"""Run configuration: TOML files validated into plain dataclasses."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Any

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .models import (
    CDHM,
    TFIM,
    LatticeSpec,
    ModelSpec,
    ProtocolParams,
    auto_depth,
    build_chain_lattice,
    build_columnar_lattice,
    build_columnar_rect,
)


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


@dataclass
class SamplerConfig:
    sweeps: int = 20_000
    equilibration: int = 10_000
    chains: int = 2
    seed: int = 1
    slice_mode: str = "trace"
    bin_size: int = 0  # 0 = automatic


@dataclass
class ScanConfig:
    axis: str
    values: list[float]
    sizes: list[int]


@dataclass
class CollapseConfig:
    x_c0: float
    nu0: float = 1.0
    beta_over_nu0: float = 0.5
    L_min: int = 0
    degree: int = 7
    n_boot: int = 200
    window: tuple[float, float] | None = None
    csv: str | None = None
    L_min_list: list[int] = field(default_factory=list)


@dataclass
class CrossingConfig:
    csv: str | None = None
    axis: str | None = None
    degree: int = 2
    n_boot: int = 200


@dataclass
class RunConfig:
    model_kind: str
    L: int
    h: float
    g: float
    J: float
    tau: float
    p: float
    n_layers: int | None  # None = auto 2L/tau
    sampler: SamplerConfig
    out_dir: str
    scan: ScanConfig | None = None
    collapse: CollapseConfig | None = None
    crossing: CrossingConfig = field(default_factory=CrossingConfig)
    surface_entries: list[dict] = field(default_factory=list)
    lattice_kind: str = "auto"  # chain | columnar | columnar-rect
    Ly: int | None = None

    def build_model(self, L: int | None = None, h: float | None = None,
                    g: float | None = None) -> ModelSpec:
        L = self.L if L is None else L
        if self.lattice_kind == "chain" or (self.lattice_kind == "auto" and self.model_kind == TFIM):
            lattice = build_chain_lattice(L)
        elif self.lattice_kind == "columnar-rect":
            lattice = build_columnar_rect(L, self.Ly or L)
        else:
            lattice = build_columnar_lattice(L)
        return ModelSpec(
            kind=self.model_kind,
            lattice=lattice,
            h=self.h if h is None else h,
            g=self.g if g is None else g,
            J=self.J,
        )

    def build_protocol(self, L: int | None = None, tau: float | None = None,
                       p: float | None = None) -> ProtocolParams:
        tau = self.tau if tau is None else tau
        p = self.p if p is None else p
        n_d = self.n_layers if self.n_layers else auto_depth(self.L if L is None else L, tau)
        return ProtocolParams(tau=tau, p=p, n_layers=n_d)


def _need(table: dict, key: str, section: str) -> Any:
    if key not in table:
        raise ConfigError(f"[{section}] is missing required key {key!r}")
    return table[key]


def _scan_values(table: dict) -> list[float]:
    if "values" in table:
        vals = [float(v) for v in table["values"]]
    else:
        start = float(_need(table, "start", "scan"))
        stop = float(_need(table, "stop", "scan"))
        count = int(_need(table, "count", "scan"))
        if count < 3:
            raise ConfigError("[scan] grid needs at least 3 points")
        vals = [start + (stop - start) * k / (count - 1) for k in range(count)]
    if len(vals) < 3:
        raise ConfigError("[scan] grid needs at least 3 points")
    return vals


def load_config(path: str) -> RunConfig:
    """Parse and validate a TOML run configuration."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    model = raw.get("model", {})
    kind = str(_need(model, "kind", "model")).lower()
    if kind not in (TFIM, CDHM):
        raise ConfigError(f"[model] kind must be 'tfim' or 'cdhm', got {kind!r}")
    L = int(_need(model, "L", "model"))
    h = float(model.get("h", 0.0))
    g = float(model.get("g", 1.0))
    J = float(model.get("J", 1.0))
    if h < 0 or g < 0 or J <= 0:
        raise ConfigError("[model] couplings must satisfy h >= 0, g >= 0, J > 0")

    protocol = raw.get("protocol", {})
    tau = float(_need(protocol, "tau", "protocol"))
    p = float(_need(protocol, "p", "protocol"))
    if tau < 0:
        raise ConfigError("[protocol] tau must be nonnegative")
    if not 0.0 <= p <= 1.0:
        raise ConfigError("[protocol] p must lie in [0, 1]")
    n_d_raw = protocol.get("n_d", "auto")
    if isinstance(n_d_raw, str):
        if n_d_raw != "auto":
            raise ConfigError("[protocol] n_d must be an integer or 'auto'")
        if tau == 0:
            raise ConfigError("[protocol] n_d = 'auto' requires tau > 0")
        n_layers = None
    else:
        n_layers = int(n_d_raw)
        if n_layers < 1:
            raise ConfigError("[protocol] n_d must be >= 1")

    s = raw.get("sampler", {})
    sampler = SamplerConfig(
        sweeps=int(s.get("sweeps", 20_000)),
        equilibration=int(s.get("equilibration", 10_000)),
        chains=int(s.get("chains", 2)),
        seed=int(s.get("seed", 1)),
        slice_mode=str(s.get("slice_mode", "trace")),
        bin_size=int(s.get("bin_size", 0)),
    )
    if sampler.sweeps < 1 or sampler.chains < 1 or sampler.equilibration < 0:
        raise ConfigError("[sampler] sweeps/chains must be positive, equilibration >= 0")
    if sampler.slice_mode not in ("trace", "free"):
        raise ConfigError("[sampler] slice_mode must be 'trace' or 'free'")

    out_dir = str(raw.get("output", {}).get("directory", "mdite-out"))

    scan = None
    if "scan" in raw:
        t = raw["scan"]
        axis = str(_need(t, "axis", "scan")).lower()
        if axis not in ("p", "tau", "h", "g"):
            raise ConfigError("[scan] axis must be one of p, tau, h, g")
        sizes = [int(v) for v in _need(t, "sizes", "scan")]
        if not sizes:
            raise ConfigError("[scan] sizes must be nonempty")
        scan = ScanConfig(axis=axis, values=_scan_values(t), sizes=sizes)

    collapse = None
    if "collapse" in raw:
        t = raw["collapse"]
        window = None
        if "window" in t:
            lo, hi = (float(v) for v in t["window"])
            window = (lo, hi)
        collapse = CollapseConfig(
            x_c0=float(_need(t, "x_c0", "collapse")),
            nu0=float(t.get("nu0", 1.0)),
            beta_over_nu0=float(t.get("beta_over_nu0", 0.5)),
            L_min=int(t.get("L_min", 0)),
            degree=int(t.get("degree", 7)),
            n_boot=int(t.get("n_boot", 200)),
            window=window,
            csv=str(t["csv"]) if "csv" in t else None,
            L_min_list=[int(v) for v in t.get("L_min_list", [])],
        )

    crossing = CrossingConfig()
    if "crossing" in raw:
        t = raw["crossing"]
        crossing = CrossingConfig(
            csv=str(t["csv"]) if "csv" in t else None,
            axis=str(t["axis"]).lower() if "axis" in t else None,
            degree=int(t.get("degree", 2)),
            n_boot=int(t.get("n_boot", 200)),
        )

    surface_entries = []
    for entry in raw.get("surface", {}).get("entries", []):
        surface_entries.append(
            {
                "tau": float(_need(entry, "tau", "surface.entries")),
                "h_or_g": float(_need(entry, "h_or_g", "surface.entries")),
                "axis": str(_need(entry, "axis", "surface.entries")),
                "csv": str(_need(entry, "csv", "surface.entries")),
            }
        )

    lattice_kind = str(model.get("lattice", "auto"))
    if lattice_kind not in ("auto", "chain", "columnar", "columnar-rect"):
        raise ConfigError("[model] lattice must be auto, chain, columnar or columnar-rect")

    return RunConfig(
        model_kind=kind,
        L=L,
        h=h,
        g=g,
        J=J,
        tau=tau,
        p=p,
        n_layers=n_layers,
        sampler=sampler,
        out_dir=out_dir,
        scan=scan,
        collapse=collapse,
        crossing=crossing,
        surface_entries=surface_entries,
        lattice_kind=lattice_kind,
        Ly=int(model["Ly"]) if "Ly" in model else None,
    )


def resolve_threads(cli_value: int | None) -> int:
    if cli_value is not None and cli_value >= 1:
        return cli_value
    env = os.environ.get("MDITE_THREADS", "")
    if env.isdigit() and int(env) >= 1:
        return int(env)
    return 1
