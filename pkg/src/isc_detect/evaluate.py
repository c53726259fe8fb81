"""Score detected events against the injected fault schedule."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .detector import FaultEvent
from .scenario import FaultSchedule

DEFAULT_TOL_S = 3.0


@dataclass(frozen=True)
class EventScore:
    label: str
    onset_error: float
    clear_error: Optional[float]
    r_sc_true: Optional[float]
    r_sc_est: float
    r_sc_rel_err: Optional[float]


@dataclass
class EvalReport:
    true_positives: int = 0
    missed: int = 0
    false_alarms: int = 0
    per_event: list[EventScore] = field(default_factory=list)
    missed_labels: list[str] = field(default_factory=list)
    unmatched: list[FaultEvent] = field(default_factory=list)

    @property
    def n_real(self) -> int:
        return self.true_positives + self.missed


def _event_key(e: FaultEvent) -> tuple:
    clear = float("inf") if e.t_clear is None else e.t_clear
    return (e.t_onset, clear, e.delta_at_onset, e.r_sc_est, e.i_sc_est, e.label)


def match_events(detected: Sequence[FaultEvent], schedule: FaultSchedule, tol: float = DEFAULT_TOL_S) -> EvalReport:
    """Pair detections with real shorts by onset proximity, greedily and one-to-one.

    Only short-resistor events count as real faults. Any detection left
    unpaired, including one inside an extra-discharge-pulse window, is a
    false alarm.
    """
    if tol < 0:
        raise ValueError(f"tolerance must be non-negative, got {tol}")
    dets = sorted(detected, key=_event_key)
    real = schedule.shorts
    pairs = []
    for di, d in enumerate(dets):
        for ri, r in enumerate(real):
            err = abs(d.t_onset - r.t_on)
            if err <= tol:
                pairs.append((err, ri, di))
    pairs.sort()
    used_d: set[int] = set()
    match: dict[int, int] = {}
    for _, ri, di in pairs:
        if ri in match or di in used_d:
            continue
        match[ri] = di
        used_d.add(di)

    report = EvalReport()
    for ri, r in enumerate(real):
        if ri not in match:
            report.missed += 1
            report.missed_labels.append(r.label)
            continue
        d = dets[match[ri]]
        r_true = r.kind.ohms
        report.true_positives += 1
        report.per_event.append(
            EventScore(
                label=r.label,
                onset_error=d.t_onset - r.t_on,
                clear_error=None if d.t_clear is None else d.t_clear - r.t_off,
                r_sc_true=r_true,
                r_sc_est=d.r_sc_est,
                r_sc_rel_err=(d.r_sc_est - r_true) / r_true,
            )
        )
    report.unmatched = [d for di, d in enumerate(dets) if di not in used_d]
    report.false_alarms = len(report.unmatched)
    return report


REPORT_COLUMNS = ("label", "onset_error_s", "clear_error_s", "r_sc_true_ohm", "r_sc_est_ohm", "r_sc_rel_err")


def _fmt(x: Optional[float], spec: str) -> str:
    return "-" if x is None else format(x, spec)


def summarize(report: EvalReport) -> str:
    """Fixed-width table of matched events followed by a one-line verdict."""
    head = f"{'event':<8}{'onset_err_s':>12}{'clear_err_s':>12}{'R_sc_true':>11}{'R_sc_est':>11}{'rel_err':>9}"
    lines = [head, "-" * len(head)]
    for s in report.per_event:
        lines.append(
            f"{s.label:<8}{s.onset_error:>12.1f}{_fmt(s.clear_error, '.1f'):>12}"
            f"{_fmt(s.r_sc_true, '.4f'):>11}{s.r_sc_est:>11.4f}{_fmt(s.r_sc_rel_err, '+.1%'):>9}"
        )
    lines.append(f"{report.true_positives}/{report.n_real} detected, {report.missed} missed, {report.false_alarms} false")
    return "\n".join(lines) + "\n"


def report_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for s in report.per_event:
        w.writerow(
            (
                s.label,
                repr(s.onset_error),
                "" if s.clear_error is None else repr(s.clear_error),
                "" if s.r_sc_true is None else repr(s.r_sc_true),
                repr(s.r_sc_est),
                "" if s.r_sc_rel_err is None else repr(s.r_sc_rel_err),
            )
        )
    return buf.getvalue()


def write_report(report: EvalReport, path: str | Path) -> None:
    Path(path).write_text(report_csv(report), encoding="utf-8")
