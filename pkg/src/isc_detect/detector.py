"""Streaming internal-short detector on the pseudo-OCV first difference.

Per sample the detector adds the measured-current ohmic drop back onto the
terminal voltage (one R0 look-up, one multiply, one add), differences it
against the previous sample, and compares the difference with the relaxed
quantile bounds. A drop below the lower bound opens a fault event; a jump
above the upper bound closes it.
"""

from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Optional

import numpy as np

from .calibrate import Thresholds
from .tables import LookupTable1D

log = logging.getLogger(__name__)


class DetectorError(ValueError):
    pass


class Sample(NamedTuple):
    t: float
    i: float
    v: float


class Phase(enum.IntEnum):
    HEALTHY = 0
    IN_FAULT = 1


@dataclass
class FaultEvent:
    t_onset: float
    t_clear: Optional[float]
    delta_at_onset: float
    i_sc_est: float
    r_sc_est: float
    label: str = ""

    @property
    def duration(self) -> Optional[float]:
        return None if self.t_clear is None else self.t_clear - self.t_onset


class Edge(NamedTuple):
    """Emitted on a phase change; ``event`` is partial for onsets."""

    kind: str  # "onset" or "clear"
    event: FaultEvent


def pseudo_ocv(sample: Sample, soc: float, r0_table: LookupTable1D) -> float:
    """Terminal voltage plus the ohmic drop of the measured (discharge-positive) current."""
    return sample.v + r0_table(soc) * sample.i


def update_soc(soc: float, i: float, dt: float, capacity: float) -> tuple[float, bool]:
    """Coulomb-count ``soc`` forward by ``dt`` seconds; returns ``(soc, clamped)``."""
    if not capacity > 0:
        raise DetectorError(f"capacity must be positive, got {capacity}")
    soc = soc - (i * dt) / (3600.0 * capacity)
    if soc < 0.0:
        return 0.0, True
    if soc > 1.0:
        return 1.0, True
    return soc, False


def estimate_isc(delta_at_onset: float, r0: float) -> float:
    """Short-circuit current implied by the onset drop of the pseudo-OCV."""
    if not r0 > 0:
        raise DetectorError(f"R0 must be positive, got {r0}")
    return abs(delta_at_onset) / r0


def estimate_rsc(v_meas: float, r0: float, delta_at_onset: float) -> float:
    """Short-circuit resistance: terminal voltage over the implied short current."""
    if not r0 > 0:
        raise DetectorError(f"R0 must be positive, got {r0}")
    if not v_meas > 0:
        raise DetectorError(f"terminal voltage must be positive, got {v_meas}")
    if delta_at_onset == 0.0:
        raise DetectorError("zero onset difference gives no short-circuit estimate")
    return v_meas * r0 / abs(delta_at_onset)


@dataclass
class DetectorState:
    """Constant-size recursion state for one stream.

    ``clamped`` latches once the coulomb-counted SOC has hit 0 or 1, or has
    left the R0 table's breakpoint range.
    """

    soc_est: float
    prev_ocv_pseudo: Optional[float] = None
    phase: Phase = Phase.HEALTHY
    open_event: Optional[FaultEvent] = None
    clamped: bool = False
    t_prev: float = -math.inf
    delta: float = math.nan
    ocv_pseudo: float = math.nan
    n_events: int = 0
    orphan_clears: int = 0

    @classmethod
    def start(cls, soc_init: float) -> "DetectorState":
        if not 0.0 <= soc_init <= 1.0:
            raise DetectorError(f"soc_init {soc_init} outside [0, 1]")
        return cls(soc_est=float(soc_init))


def step_detector(
    state: DetectorState,
    sample: Sample,
    thresholds: Optional[Thresholds],
    r0_table: LookupTable1D,
    capacity: float,
) -> tuple[DetectorState, Optional[Edge]]:
    """Consume one sample, updating ``state`` in place.

    With ``thresholds=None`` the detector runs in pass-through mode: it tracks
    the pseudo-OCV and its difference (``state.delta``) but never emits.
    """
    t, i, v = sample
    if not t > state.t_prev:
        raise DetectorError(f"sample time {t} does not advance past {state.t_prev}")
    soc = state.soc_est
    first = state.prev_ocv_pseudo is None
    if not first:
        soc = soc - (i * (t - state.t_prev)) / (3600.0 * capacity)
        if soc < 0.0:
            soc = 0.0
            state.clamped = True
        elif soc > 1.0:
            soc = 1.0
            state.clamped = True
        state.soc_est = soc
    state.t_prev = t
    if soc < r0_table.soc_breakpoints[0] or soc > r0_table.soc_breakpoints[-1]:
        state.clamped = True
    r0 = r0_table(soc)
    ocv = v + r0 * i
    prev = state.prev_ocv_pseudo
    state.prev_ocv_pseudo = ocv
    state.ocv_pseudo = ocv
    if first:
        return state, None
    delta = ocv - prev
    state.delta = delta
    if thresholds is None:
        return state, None

    if state.phase is Phase.HEALTHY:
        if delta < thresholds.relaxed_minus:
            state.n_events += 1
            event = FaultEvent(
                t_onset=t,
                t_clear=None,
                delta_at_onset=delta,
                i_sc_est=estimate_isc(delta, r0),
                r_sc_est=estimate_rsc(v, r0, delta),
                label=f"E{state.n_events}",
            )
            state.phase = Phase.IN_FAULT
            state.open_event = event
            return state, Edge("onset", event)
        if delta > thresholds.relaxed_plus:
            state.orphan_clears += 1
            log.warning("clearance-like jump %.4g V at t=%g s with no open fault", delta, t)
    elif delta > thresholds.relaxed_plus:
        done = replace(state.open_event, t_clear=t)
        state.phase = Phase.HEALTHY
        state.open_event = None
        return state, Edge("clear", done)
    return state, None


class Detector:
    """Stateful wrapper binding one stream to its thresholds and R0 table."""

    def __init__(
        self,
        thresholds: Optional[Thresholds],
        r0_table: LookupTable1D,
        capacity: float,
        soc_init: float,
    ) -> None:
        if not capacity > 0:
            raise DetectorError(f"capacity must be positive, got {capacity}")
        self.thresholds = thresholds
        self.r0_table = r0_table
        self.capacity = float(capacity)
        self.state = DetectorState.start(soc_init)

    def step(self, sample: Sample) -> Optional[Edge]:
        _, edge = step_detector(self.state, sample, self.thresholds, self.r0_table, self.capacity)
        return edge

    def run(self, samples: Iterable[Sample]) -> Iterator[Edge]:
        for s in samples:
            edge = self.step(s)
            if edge is not None:
                yield edge


def _samples(t: np.ndarray, i: np.ndarray, v: np.ndarray) -> Iterator[Sample]:
    return map(Sample, t.tolist(), i.tolist(), v.tolist())


@dataclass
class Diagnostics:
    t: np.ndarray
    ocv_pseudo: np.ndarray
    delta: np.ndarray
    phase: np.ndarray


def detect(
    t: np.ndarray,
    i: np.ndarray,
    v: np.ndarray,
    thresholds: Thresholds,
    r0_table: LookupTable1D,
    capacity: float,
    soc_init: float,
    with_diagnostics: bool = False,
) -> tuple[list[FaultEvent], Optional[Diagnostics]]:
    """Stream whole arrays through a :class:`Detector`.

    Returns completed events plus one still-open event (``t_clear=None``) if
    the stream ends mid-fault.
    """
    det = Detector(thresholds, r0_table, capacity, soc_init)
    n = len(t)
    diag = None
    if with_diagnostics:
        diag = Diagnostics(np.asarray(t, dtype=float), np.empty(n), np.empty(n), np.empty(n, dtype=np.int8))
    events: list[FaultEvent] = []
    st = det.state
    for k, s in enumerate(_samples(np.asarray(t, float), np.asarray(i, float), np.asarray(v, float))):
        edge = det.step(s)
        if edge is not None and edge.kind == "clear":
            events.append(edge.event)
        if diag is not None:
            diag.ocv_pseudo[k] = st.ocv_pseudo
            diag.delta[k] = st.delta
            diag.phase[k] = st.phase
    if st.open_event is not None:
        events.append(st.open_event)
    return events, diag


def healthy_deltas(
    t: np.ndarray, i: np.ndarray, v: np.ndarray, r0_table: LookupTable1D, capacity: float, soc_init: float
) -> np.ndarray:
    """Pseudo-OCV differences from a pass-through run (one fewer than the samples)."""
    det = Detector(None, r0_table, capacity, soc_init)
    st = det.state
    out = np.empty(max(len(t) - 1, 0))
    for k, s in enumerate(_samples(np.asarray(t, float), np.asarray(i, float), np.asarray(v, float))):
        det.step(s)
        if k:
            out[k - 1] = st.delta
    return out


EVENT_COLUMNS = ("t_onset_s", "t_clear_s", "delta_v", "i_sc_a", "r_sc_ohm", "label")
DIAG_COLUMNS = ("t_s", "ocv_pseudo_v", "delta_v", "phase")


def write_events(events: Iterable[FaultEvent], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENT_COLUMNS)
        for e in events:
            w.writerow(
                (
                    repr(float(e.t_onset)),
                    "" if e.t_clear is None else repr(float(e.t_clear)),
                    repr(float(e.delta_at_onset)),
                    repr(float(e.i_sc_est)),
                    repr(float(e.r_sc_est)),
                    e.label,
                )
            )


def read_events(path: str | Path) -> list[FaultEvent]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(EVENT_COLUMNS) - set(reader.fieldnames):
            raise DetectorError(f"{path}: expected header {','.join(EVENT_COLUMNS)}")
        for row in reader:
            try:
                out.append(
                    FaultEvent(
                        t_onset=float(row["t_onset_s"]),
                        t_clear=float(row["t_clear_s"]) if row["t_clear_s"].strip() else None,
                        delta_at_onset=float(row["delta_v"]),
                        i_sc_est=float(row["i_sc_a"]),
                        r_sc_est=float(row["r_sc_ohm"]),
                        label=row["label"],
                    )
                )
            except ValueError as exc:
                raise DetectorError(f"{path}: {exc}") from None
    return out


def write_diagnostics(diag: Diagnostics, path: str | Path) -> None:
    names = {int(p): p.name.lower() for p in Phase}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DIAG_COLUMNS)
        for t, o, d, p in zip(diag.t.tolist(), diag.ocv_pseudo.tolist(), diag.delta.tolist(), diag.phase.tolist()):
            w.writerow((repr(t), repr(o), "" if math.isnan(d) else repr(d), names[p]))
