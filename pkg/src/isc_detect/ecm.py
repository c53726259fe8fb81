"""Two-RC equivalent-circuit cell with a switchable internal short branch.

The short branch sits across the cell terminals, so the external current
sensor only ever sees ``i_t`` while the cell itself delivers ``i_t + i_sc``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .scenario import CurrentProfile, FaultSchedule, ScheduleError
from .tables import LookupTable1D, TableKind, load_table


class SimulationError(ValueError):
    """Non-physical input or a state that left the valid operating range."""


# fast charge-transfer pair (tau = 5 s) and slow diffusion pair (tau = 120 s)
DEFAULT_RC_PAIRS = ((0.1e-3, 50_000.0), (0.5e-3, 240_000.0))
DEFAULT_CAPACITY_AH = 40.2
SOC_SLACK = 1e-9


def bundled_table(name: str, kind: TableKind | str) -> LookupTable1D:
    with resources.as_file(resources.files("isc_detect") / "data" / name) as path:
        return load_table(path, kind)


@dataclass(frozen=True)
class CellParams:
    capacity: float
    ocv_table: LookupTable1D
    r0_table: LookupTable1D
    rc_pairs: tuple[tuple[float, float], ...] = DEFAULT_RC_PAIRS
    soc_init: float = 0.8
    coulombic_efficiency: float = 1.0

    def __post_init__(self) -> None:
        if not self.capacity > 0:
            raise SimulationError(f"capacity must be positive, got {self.capacity}")
        if not 0.0 <= self.soc_init <= 1.0:
            raise SimulationError(f"soc_init {self.soc_init} outside [0, 1]")
        if not 0.0 < self.coulombic_efficiency <= 1.0:
            raise SimulationError("coulombic efficiency must lie in (0, 1]")
        pairs = tuple((float(r), float(c)) for r, c in self.rc_pairs)
        for r, c in pairs:
            if not (r > 0 and c > 0):
                raise SimulationError(f"RC pair ({r}, {c}) must be positive")
        object.__setattr__(self, "rc_pairs", pairs)

    @property
    def taus(self) -> tuple[float, ...]:
        return tuple(r * c for r, c in self.rc_pairs)


def default_cell(**overrides) -> CellParams:
    """40.2 Ah NCM-like cell with the bundled synthetic tables."""
    kw = dict(
        capacity=DEFAULT_CAPACITY_AH,
        ocv_table=bundled_table("ocv.csv", TableKind.OCV),
        r0_table=bundled_table("r0.csv", TableKind.R0),
    )
    kw.update(overrides)
    return CellParams(**kw)


@dataclass(frozen=True)
class CellState:
    """Simulator truth. ``fault_active`` holds the engaged branch resistance."""

    soc_true: float
    u_polar: tuple[float, ...]
    fault_active: Optional[float] = None
    i_sc: float = 0.0

    @classmethod
    def initial(cls, params: CellParams) -> "CellState":
        return cls(params.soc_init, tuple(0.0 for _ in params.rc_pairs))

    @property
    def u_total(self) -> float:
        return math.fsum(self.u_polar)


@dataclass(frozen=True)
class NoiseSpec:
    sigma_v: float = 1e-3
    sigma_i: float = 0.05
    seed: int = 0

    def __post_init__(self) -> None:
        if self.sigma_v < 0 or self.sigma_i < 0:
            raise SimulationError("noise standard deviations must be non-negative")

    @classmethod
    def off(cls) -> "NoiseSpec":
        return cls(0.0, 0.0, 0)


def solve_terminal(ocv_eff: float, r0: float, i_t: float, r_sc: float | None = None) -> tuple[float, float]:
    """Terminal voltage and internal short current for one operating point.

    ``ocv_eff`` is the open-circuit voltage minus polarization. With a short
    of resistance ``r_sc`` across the terminals,
    ``v = ocv_eff - r0*(i_t + i_sc)`` and ``i_sc = v / r_sc`` together give
    ``v = (ocv_eff - r0*i_t) * r_sc / (r_sc + r0)``.
    """
    if not r0 > 0:
        raise SimulationError(f"R0 must be positive, got {r0}")
    if r_sc is None:
        return ocv_eff - r0 * i_t, 0.0
    if not r_sc > 0:
        raise SimulationError(f"short-circuit resistance must be positive, got {r_sc}")
    v = (ocv_eff - r0 * i_t) * r_sc / (r_sc + r0)
    return v, v / r_sc


def observe(params: CellParams, state: CellState, i_t: float) -> tuple[CellState, float]:
    """Solve the terminal at the current state without advancing time."""
    ocv_eff = params.ocv_table(state.soc_true) - state.u_total
    v, i_sc = solve_terminal(ocv_eff, params.r0_table(state.soc_true), i_t, state.fault_active)
    return replace(state, i_sc=i_sc), v


_KEEP = object()


def step_cell(
    params: CellParams,
    state: CellState,
    i_t: float,
    dt: float,
    r_sc=_KEEP,
) -> tuple[CellState, float]:
    """Advance the cell by ``dt`` seconds under external current ``i_t``.

    Over the interval the short current is held at its value from the start of
    the step. ``r_sc`` switches the fault branch at the end of the interval
    (``None`` disengages it); omit it to keep the branch as is. The returned
    voltage is the terminal voltage just after the switch.
    """
    if not dt > 0:
        raise SimulationError(f"dt must be positive, got {dt}")
    i_cell = i_t + state.i_sc
    charge = i_cell * dt
    if i_cell < 0:
        charge *= params.coulombic_efficiency
    soc = state.soc_true - charge / (3600.0 * params.capacity)
    if soc < -SOC_SLACK or soc > 1.0 + SOC_SLACK:
        raise SimulationError(f"SOC left [0, 1] ({soc:.6f}); cell depleted or overcharged")
    soc = min(max(soc, 0.0), 1.0)
    u = []
    for (r, c), u_i in zip(params.rc_pairs, state.u_polar):
        decay = math.exp(-dt / (r * c))
        u.append(u_i * decay + i_cell * r * (1.0 - decay))
    fault = state.fault_active if r_sc is _KEEP else r_sc
    return observe(params, CellState(soc, tuple(u), fault), i_t)


@dataclass
class Trace:
    """Recorded samples plus noise-free truth columns.

    ``i`` and ``v`` are what a BMS would measure (noise added). The truth
    arrays are only available because the data is simulated.
    """

    t: np.ndarray
    i: np.ndarray
    v: np.ndarray
    soc_true: np.ndarray
    i_sc_true: np.ndarray
    fault_active: np.ndarray
    fault_r: Optional[np.ndarray] = None
    i_true: Optional[np.ndarray] = None
    v_true: Optional[np.ndarray] = None
    u_polar: Optional[np.ndarray] = None
    schedule: FaultSchedule = field(default_factory=FaultSchedule)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else float("nan")


def run_scenario(
    params: CellParams,
    profile: CurrentProfile,
    schedule: FaultSchedule | None = None,
    noise: NoiseSpec | None = None,
) -> Trace:
    """Simulate ``profile`` with the scheduled faults injected.

    Sample ``k`` is taken at ``t = k*dt``. Shorts and extra pulses are active
    for ``t_on <= t < t_off``; extra pulses are added to the external
    (measured) current, shorts engage the internal branch.
    """
    schedule = schedule if schedule is not None else FaultSchedule()
    noise = noise if noise is not None else NoiseSpec()
    n = len(profile)
    t = profile.times
    if schedule.events and schedule.end_time > t[-1]:
        raise ScheduleError(
            f"profile ends at {t[-1]} s but the schedule runs to {schedule.end_time} s"
        )
    i_true = np.asarray(profile.samples, dtype=float) + schedule.extra_current(t)
    fault_r = schedule.short_resistance(t)

    v_true = np.empty(n)
    soc = np.empty(n)
    i_sc = np.empty(n)
    u_polar = np.empty((n, len(params.rc_pairs)))
    faults = [None if math.isnan(r) else float(r) for r in fault_r]

    state = replace(CellState.initial(params), fault_active=faults[0])
    state, v_true[0] = observe(params, state, float(i_true[0]))
    soc[0], i_sc[0], u_polar[0] = state.soc_true, state.i_sc, state.u_polar
    dt = profile.dt
    for k in range(1, n):
        state, v_true[k] = step_cell(params, state, float(i_true[k]), dt, faults[k])
        soc[k] = state.soc_true
        i_sc[k] = state.i_sc
        u_polar[k] = state.u_polar

    rng = np.random.default_rng([noise.seed, 0x5EED])
    v_noise = rng.normal(0.0, 1.0, n) * noise.sigma_v
    i_noise = rng.normal(0.0, 1.0, n) * noise.sigma_i
    return Trace(
        t=t,
        i=i_true + i_noise,
        v=v_true + v_noise,
        soc_true=soc,
        i_sc_true=i_sc,
        fault_active=~np.isnan(fault_r),
        fault_r=fault_r,
        i_true=i_true,
        v_true=v_true,
        u_polar=u_polar,
        schedule=schedule,
    )


TRACE_COLUMNS = ("t_s", "i_a", "v_v", "soc_true", "i_sc_true", "fault_active")


def write_trace(trace: Trace, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        active = trace.fault_active
        for k in range(len(trace)):
            w.writerow(
                (
                    repr(float(trace.t[k])),
                    repr(float(trace.i[k])),
                    repr(float(trace.v[k])),
                    repr(float(trace.soc_true[k])),
                    repr(float(trace.i_sc_true[k])),
                    "1" if active[k] else "0",
                )
            )


def read_trace(path: str | Path) -> Trace:
    """Read a trace CSV. Only ``t_s,i_a,v_v`` are required; truth columns are optional."""
    cols: dict[str, list[float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ScheduleError(f"{path}: empty trace file")
        header = [h.strip() for h in header]
        missing = {"t_s", "i_a", "v_v"} - set(header)
        if missing:
            raise ScheduleError(f"{path}: missing columns {sorted(missing)}")
        for name in header:
            cols[name] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ScheduleError(f"{path}:{lineno}: expected {len(header)} fields")
            try:
                for name, cell in zip(header, row):
                    cols[name].append(float(cell))
            except ValueError as exc:
                raise ScheduleError(f"{path}:{lineno}: {exc}") from None
    n = len(cols["t_s"])

    def col(name: str, fill: float) -> np.ndarray:
        return np.asarray(cols[name]) if name in cols else np.full(n, fill)

    return Trace(
        t=col("t_s", 0.0),
        i=col("i_a", 0.0),
        v=col("v_v", 0.0),
        soc_true=col("soc_true", np.nan),
        i_sc_true=col("i_sc_true", np.nan),
        fault_active=col("fault_active", 0.0) != 0.0,
    )
