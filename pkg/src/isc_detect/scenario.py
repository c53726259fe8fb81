"""Load profiles and fault schedules for simulated drive-cycle experiments."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Union

import numpy as np


class ScheduleError(ValueError):
    """Invalid fault schedule or current profile."""


@dataclass(frozen=True)
class ShortResistor:
    ohms: float

    def __post_init__(self) -> None:
        if not self.ohms > 0:
            raise ScheduleError(f"short-circuit resistance must be positive, got {self.ohms}")


@dataclass(frozen=True)
class ExtraDischargePulse:
    amperes: float


FaultKind = Union[ShortResistor, ExtraDischargePulse]


@dataclass(frozen=True)
class FaultSpec:
    """One scheduled event, active for ``t_on <= t < t_off``."""

    kind: FaultKind
    t_on: float
    t_off: float
    label: str = ""

    def __post_init__(self) -> None:
        if not self.t_off > self.t_on:
            raise ScheduleError(f"{self.label or 'event'}: t_off ({self.t_off}) must exceed t_on ({self.t_on})")

    @property
    def is_short(self) -> bool:
        return isinstance(self.kind, ShortResistor)

    def active(self, t: float) -> bool:
        return self.t_on <= t < self.t_off


@dataclass(frozen=True)
class FaultSchedule:
    events: tuple[FaultSpec, ...] = ()

    def __post_init__(self) -> None:
        evs = tuple(sorted(self.events, key=lambda e: e.t_on))
        for a, b in zip(evs, evs[1:]):
            if b.t_on < a.t_off:
                raise ScheduleError(f"overlapping events {a.label!r} and {b.label!r}")
        object.__setattr__(self, "events", evs)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    @property
    def shorts(self) -> list[FaultSpec]:
        return [e for e in self.events if e.is_short]

    @property
    def end_time(self) -> float:
        return max((e.t_off for e in self.events), default=0.0)

    def short_resistance(self, times: np.ndarray) -> np.ndarray:
        """Engaged branch resistance per time point (NaN where no short)."""
        out = np.full(len(times), np.nan)
        for e in self.events:
            if e.is_short:
                out[(times >= e.t_on) & (times < e.t_off)] = e.kind.ohms
        return out

    def extra_current(self, times: np.ndarray) -> np.ndarray:
        out = np.zeros(len(times))
        for e in self.events:
            if not e.is_short:
                out[(times >= e.t_on) & (times < e.t_off)] += e.kind.amperes
        return out


@dataclass(frozen=True)
class CurrentProfile:
    """Piecewise-constant current, sample ``k`` applies over ``(t_{k-1}, t_k]``."""

    dt: float
    samples: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ScheduleError(f"sampling period must be positive, got {self.dt}")
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim != 1 or len(arr) == 0:
            raise ScheduleError("current profile must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(arr)):
            raise ScheduleError("current profile contains non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.samples)) * self.dt

    @property
    def duration(self) -> float:
        return len(self.samples) * self.dt


def table1_schedule() -> FaultSchedule:
    """The eleven-event experiment: 4 severe, 4 moderate, 2 hidden shorts and one false pulse."""
    severe = ShortResistor(0.07)
    moderate = ShortResistor(0.10)
    hidden = ShortResistor(0.25)
    rows = [
        (1, hidden, 377, 406),
        (2, moderate, 1640, 1672),
        (3, severe, 2927, 2955),
        (4, hidden, 4489, 4518),
        (5, moderate, 6083, 6113),
        (6, severe, 7708, 7738),
        (7, moderate, 9075, 9103),
        (8, severe, 10319, 10350),
        (9, moderate, 12235, 12264),
        (11, ExtraDischargePulse(50.0), 13910, 13920),
        (10, severe, 15299, 15328),
    ]
    return FaultSchedule(tuple(FaultSpec(kind, float(on), float(off), f"#{no}") for no, kind, on, off in rows))


def hidden_windows(schedule: FaultSchedule, min_ohms: float = 0.2) -> list[tuple[float, float]]:
    """Windows of high-resistance shorts, which are injected during a charge pulse."""
    return [(e.t_on, e.t_off) for e in schedule.shorts if e.kind.ohms >= min_ohms]


# drive-cycle surrogate knobs, sized for a ~40 Ah cell
SEGMENT_S = (5.0, 60.0)
DISCHARGE_A = (0.0, 60.0)
CHARGE_A = (-30.0, 0.0)
PEAK_CHARGE_A = -45.0
PEAK_LEAD_S = 10.0
PEAK_LAG_S = 5.0
REST_GUARD_S = 10.0
EDGE_GUARD_S = 5.0
MAX_NET_AH = 12.0


def synth_drive_cycle(
    duration: float,
    dt: float,
    seed: int,
    *,
    schedule: FaultSchedule | None = None,
    max_net_ah: float = MAX_NET_AH,
) -> CurrentProfile:
    """Pseudo-random pulse train standing in for an urban drive schedule.

    Segments of 5-60 s alternate between discharge levels in [0, 60) A and
    regenerative charge levels in [-30, 0) A. Net discharged charge is held
    below ``max_net_ah`` by forcing charge segments once the budget is spent.

    ``schedule`` (the benchmark schedule by default) shapes the cycle: every high-resistance
    short window sits inside a -45 A charge pulse flanked by rest periods, and
    no segment boundary falls within 5 s of any scheduled on/off edge, so each
    injected event starts and ends under steady current.
    """
    if not dt > 0:
        raise ScheduleError(f"dt must be positive, got {dt}")
    if not duration > 0:
        raise ScheduleError(f"duration must be positive, got {duration}")
    if schedule is None:
        schedule = table1_schedule()
    n = int(round(duration / dt))
    rng = np.random.default_rng(seed)
    out = np.empty(n)

    def idx(t: float) -> int:
        return int(round(t / dt))

    # forced blocks: [start, stop) sample ranges with a fixed level
    forced: list[tuple[int, int, float]] = []
    for on, off in hidden_windows(schedule):
        p0, p1 = idx(on - PEAK_LEAD_S), idx(off + PEAK_LAG_S)
        r0, r1 = p0 - idx(REST_GUARD_S), p1 + idx(REST_GUARD_S)
        if r0 < 0 or r1 > n:
            continue
        forced += [(r0, p0, 0.0), (p0, p1, PEAK_CHARGE_A), (p1, r1, 0.0)]
    forced.sort()

    guard = idx(EDGE_GUARD_S)
    blocked = np.zeros(n + 1, dtype=bool)
    for e in schedule.events:
        for edge in (idx(e.t_on), idx(e.t_off)):
            blocked[max(edge - guard, 0) : min(edge + guard, n) + 1] = True

    lo_len = max(1, math.ceil(SEGMENT_S[0] / dt - 1e-9))
    hi_len = max(lo_len, math.floor(SEGMENT_S[1] / dt + 1e-9))
    net_as = 0.0
    budget_as = max_net_ah * 3600.0
    discharge_next = True

    def fill(a: int, b: int) -> None:
        nonlocal net_as, discharge_next
        k = a
        while k < b:
            remaining = b - k
            sizes = [L for L in range(lo_len, min(hi_len, remaining) + 1) if remaining == L or remaining - L >= lo_len]
            clear = [L for L in sizes if k + L == b or not blocked[k + L]]
            lengths = clear or sizes or [remaining]
            L = lengths[int(rng.integers(len(lengths)))]
            if net_as >= budget_as:
                discharge_next = False
            lo, hi = DISCHARGE_A if discharge_next else CHARGE_A
            level = float(rng.uniform(lo, hi))
            out[k : k + L] = level
            net_as += level * L * dt
            discharge_next = not discharge_next
            k += L

    cursor = 0
    for a, b, level in forced:
        fill(cursor, a)
        out[a:b] = level
        net_as += level * (b - a) * dt
        cursor = b
    fill(cursor, n)
    return CurrentProfile(dt, out)


def load_profile(path: str | Path) -> CurrentProfile:
    """Read a ``t_s,i_a`` CSV with a uniform sampling period."""
    t, i = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"t_s", "i_a"} <= set(reader.fieldnames):
            raise ScheduleError(f"{path}: expected header with t_s,i_a")
        for row in reader:
            t.append(float(row["t_s"]))
            i.append(float(row["i_a"]))
    if len(t) < 2:
        raise ScheduleError(f"{path}: profile needs at least two samples")
    steps = np.diff(t)
    dt = float(steps[0])
    if not np.allclose(steps, dt, rtol=1e-9, atol=1e-9):
        raise ScheduleError(f"{path}: non-uniform sampling period")
    return CurrentProfile(dt, np.asarray(i))


def save_profile(profile: CurrentProfile, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_s", "i_a"])
        for t, i in zip(profile.times, profile.samples):
            w.writerow([repr(float(t)), repr(float(i))])


def _spec_to_dict(e: FaultSpec) -> dict:
    d: dict = {"label": e.label, "t_on": e.t_on, "t_off": e.t_off}
    if isinstance(e.kind, ShortResistor):
        d.update(kind="short_resistor", ohms=e.kind.ohms)
    else:
        d.update(kind="extra_discharge_pulse", amperes=e.kind.amperes)
    return d


def _spec_from_dict(d: dict) -> FaultSpec:
    try:
        kind_name = d["kind"]
        if kind_name == "short_resistor":
            kind: FaultKind = ShortResistor(float(d["ohms"]))
        elif kind_name == "extra_discharge_pulse":
            kind = ExtraDischargePulse(float(d["amperes"]))
        else:
            raise ScheduleError(f"unknown event kind {kind_name!r}")
        return FaultSpec(kind, float(d["t_on"]), float(d["t_off"]), str(d.get("label", "")))
    except KeyError as exc:
        raise ScheduleError(f"schedule event missing field {exc}") from None


def save_schedule(schedule: FaultSchedule, path: str | Path) -> None:
    doc = {"events": [_spec_to_dict(e) for e in schedule.events]}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_schedule(path: str | Path) -> FaultSchedule:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScheduleError(f"{path}: {exc}") from None
    events: Iterable[dict] = doc["events"] if isinstance(doc, dict) else doc
    return FaultSchedule(tuple(_spec_from_dict(d) for d in events))
