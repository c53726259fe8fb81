"""Experiment configuration: one JSON file holding cell, noise, detector and path settings."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .ecm import DEFAULT_CAPACITY_AH, DEFAULT_RC_PAIRS, CellParams, NoiseSpec, bundled_table
from .tables import TableKind, build_ocv_table, load_table


class ConfigError(ValueError):
    pass


DEFAULT_PATHS = {
    "healthy_trace": "out/healthy_trace.csv",
    "fault_trace": "out/fault_trace.csv",
    "thresholds": "out/thresholds.json",
    "events": "out/events.csv",
    "diagnostics": "out/diagnostics.csv",
    "report": "out/report.csv",
}


@dataclass
class Config:
    capacity_ah: float = DEFAULT_CAPACITY_AH
    ocv_table: Optional[Path] = None
    ocv_charge_curve: Optional[Path] = None
    ocv_discharge_curve: Optional[Path] = None
    r0_table: Optional[Path] = None
    rc_pairs: tuple[tuple[float, float], ...] = DEFAULT_RC_PAIRS
    coulombic_efficiency: float = 1.0
    soc_init: float = 0.8
    sampling_dt: float = 1.0
    duration_s: float = 16000.0
    seed: int = 0
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    p: float = 0.005
    gamma: float = 2.0
    tol_s: float = 3.0
    paths: dict[str, Path] = field(default_factory=lambda: {k: Path(v) for k, v in DEFAULT_PATHS.items()})

    def __post_init__(self) -> None:
        if not 0.0 < self.p < 0.5:
            raise ConfigError(f"p must lie in (0, 0.5), got {self.p}")
        if not self.gamma > 1.0:
            raise ConfigError(f"gamma must exceed 1, got {self.gamma}")
        if not 0.0 <= self.soc_init <= 1.0:
            raise ConfigError(f"soc_init must lie in [0, 1], got {self.soc_init}")
        if not self.sampling_dt > 0:
            raise ConfigError(f"sampling_dt must be positive, got {self.sampling_dt}")
        if (self.ocv_charge_curve is None) != (self.ocv_discharge_curve is None):
            raise ConfigError("ocv_charge_curve and ocv_discharge_curve must be given together")

    def cell(self) -> CellParams:
        if self.ocv_charge_curve is not None:
            chg = load_table(self.ocv_charge_curve, TableKind.OCV)
            dis = load_table(self.ocv_discharge_curve, TableKind.OCV)
            ocv = build_ocv_table(
                list(zip(chg.soc_breakpoints, chg.values)), list(zip(dis.soc_breakpoints, dis.values))
            )
        elif self.ocv_table is not None:
            ocv = load_table(self.ocv_table, TableKind.OCV)
        else:
            ocv = bundled_table("ocv.csv", TableKind.OCV)
        r0 = load_table(self.r0_table, TableKind.R0) if self.r0_table is not None else bundled_table("r0.csv", TableKind.R0)
        return CellParams(
            capacity=self.capacity_ah,
            ocv_table=ocv,
            r0_table=r0,
            rc_pairs=self.rc_pairs,
            soc_init=self.soc_init,
            coulombic_efficiency=self.coulombic_efficiency,
        )

    def path(self, name: str) -> Path:
        return self.paths[name]


def _expect(doc: dict, key: str, kind: type, default: Any) -> Any:
    if key not in doc:
        return default
    val = doc[key]
    if kind is float and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if not isinstance(val, kind) or isinstance(val, bool) and kind is not bool:
        raise ConfigError(f"config field {key!r} must be {kind.__name__}, got {val!r}")
    return val


def load_config(path: str | Path | None) -> Config:
    """Read a JSON config; relative file paths resolve against the config's directory.

    Missing keys fall back to the defaults of :class:`Config`. ``None`` gives
    the all-default configuration with output paths relative to the working
    directory.
    """
    if path is None:
        return Config()
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    base = path.parent

    def file(value: Optional[str], must_exist: bool) -> Optional[Path]:
        if value is None:
            return None
        p = Path(value)
        p = p if p.is_absolute() else base / p
        if must_exist and not p.is_file():
            raise ConfigError(f"referenced file does not exist: {p}")
        return p

    defaults = Config()
    cell = doc.get("cell", {})
    noise = doc.get("noise", {})
    paths = dict(DEFAULT_PATHS)
    paths.update(doc.get("paths", {}))
    rc = cell.get("rc_pairs", defaults.rc_pairs)
    try:
        rc_pairs = tuple((float(r), float(c)) for r, c in rc)
    except (TypeError, ValueError):
        raise ConfigError("cell.rc_pairs must be a list of [ohms, farads] pairs") from None
    seed = _expect(doc, "seed", int, defaults.seed)
    return Config(
        capacity_ah=_expect(cell, "capacity_ah", float, defaults.capacity_ah),
        ocv_table=file(cell.get("ocv_table"), True),
        ocv_charge_curve=file(cell.get("ocv_charge_curve"), True),
        ocv_discharge_curve=file(cell.get("ocv_discharge_curve"), True),
        r0_table=file(cell.get("r0_table"), True),
        rc_pairs=rc_pairs,
        coulombic_efficiency=_expect(cell, "coulombic_efficiency", float, 1.0),
        soc_init=_expect(doc, "soc_init", float, defaults.soc_init),
        sampling_dt=_expect(doc, "sampling_dt", float, defaults.sampling_dt),
        duration_s=_expect(doc, "duration_s", float, defaults.duration_s),
        seed=seed,
        noise=NoiseSpec(
            sigma_v=_expect(noise, "sigma_v", float, defaults.noise.sigma_v),
            sigma_i=_expect(noise, "sigma_i", float, defaults.noise.sigma_i),
            seed=_expect(noise, "seed", int, seed),
        ),
        p=_expect(doc, "p", float, defaults.p),
        gamma=_expect(doc, "gamma", float, defaults.gamma),
        tol_s=_expect(doc, "tol_s", float, defaults.tol_s),
        paths={k: file(v, False) for k, v in paths.items()},
    )
