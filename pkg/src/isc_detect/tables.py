"""SOC-indexed lookup tables (R0 and OCV) with piecewise-linear interpolation."""

from __future__ import annotations

import bisect
import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence


class TableError(ValueError):
    """Raised for malformed or physically invalid lookup tables."""


class TableKind(str, enum.Enum):
    OCV = "ocv"
    R0 = "r0"


class Interpolated(NamedTuple):
    value: float
    clamped: bool


@dataclass(frozen=True)
class LookupTable1D:
    """Breakpoint table mapping SOC (fraction) to volts or ohms.

    Values between breakpoints are linearly interpolated. Queries outside the
    breakpoint range return the nearest endpoint value; use :func:`interp`
    when the caller needs to know that clamping happened.
    """

    soc_breakpoints: tuple[float, ...]
    values: tuple[float, ...]
    kind: TableKind

    def __post_init__(self) -> None:
        object.__setattr__(self, "soc_breakpoints", tuple(float(s) for s in self.soc_breakpoints))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "kind", TableKind(self.kind))
        _validate(self.soc_breakpoints, self.values, self.kind)

    @property
    def soc_min(self) -> float:
        return self.soc_breakpoints[0]

    @property
    def soc_max(self) -> float:
        return self.soc_breakpoints[-1]

    def __len__(self) -> int:
        return len(self.soc_breakpoints)

    def __call__(self, soc: float) -> float:
        xs = self.soc_breakpoints
        ys = self.values
        j = bisect.bisect_right(xs, soc)
        if j <= 0:
            return ys[0]
        if j >= len(xs):
            return ys[-1]
        x0 = xs[j - 1]
        y0 = ys[j - 1]
        return y0 + (ys[j] - y0) * (soc - x0) / (xs[j] - x0)

    def save(self, path: str | Path) -> None:
        save_table(self, path)


def _validate(xs: Sequence[float], ys: Sequence[float], kind: TableKind) -> None:
    if len(xs) != len(ys):
        raise TableError("breakpoint and value columns differ in length")
    if len(xs) < 2:
        raise TableError(f"need at least 2 breakpoints, got {len(xs)}")
    for x, y in zip(xs, ys):
        if not (math.isfinite(x) and math.isfinite(y)):
            raise TableError("non-finite entry in table")
        if not 0.0 <= x <= 1.0:
            raise TableError(f"SOC breakpoint {x} outside [0, 1]")
        if y <= 0.0:
            what = "resistance" if kind is TableKind.R0 else "OCV"
            raise TableError(f"non-positive {what} {y} at SOC {x}")
    for a, b in zip(xs, xs[1:]):
        if not b > a:
            raise TableError(f"SOC breakpoints not strictly increasing ({a} then {b})")
    if kind is TableKind.OCV:
        for a, b in zip(ys, ys[1:]):
            if b < a:
                raise TableError("OCV must be non-decreasing in SOC")


def interp(table: LookupTable1D, soc: float) -> Interpolated:
    """Interpolate ``table`` at ``soc``, reporting whether the query was clamped."""
    clamped = soc < table.soc_min or soc > table.soc_max
    return Interpolated(table(soc), clamped)


def load_table(path: str | Path, kind: TableKind | str) -> LookupTable1D:
    """Read a ``soc,value`` CSV into a validated table.

    Rows are sorted by SOC before validation, so a file listed from high to low
    SOC loads fine; duplicated SOC values are rejected.
    """
    kind = TableKind(kind)
    rows: list[tuple[float, float]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if lineno == 1 and row[0].strip().lower() == "soc":
                continue
            if len(row) != 2:
                raise TableError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError as exc:
                raise TableError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise TableError(f"{path}: no table rows")
    rows.sort(key=lambda r: r[0])
    return LookupTable1D(tuple(r[0] for r in rows), tuple(r[1] for r in rows), kind)


def save_table(table: LookupTable1D, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["soc", "value"])
        for x, y in zip(table.soc_breakpoints, table.values):
            writer.writerow([repr(x), repr(y)])


def _curve(points: Sequence[tuple[float, float]], name: str) -> LookupTable1D:
    pts = sorted((float(s), float(v)) for s, v in points)
    try:
        return LookupTable1D(tuple(s for s, _ in pts), tuple(v for _, v in pts), TableKind.OCV)
    except TableError as exc:
        raise TableError(f"{name} curve: {exc}") from None


def build_ocv_table(
    charge_curve: Sequence[tuple[float, float]],
    discharge_curve: Sequence[tuple[float, float]],
) -> LookupTable1D:
    """Average low-rate charge and discharge voltage curves into an OCV table.

    The output grid is the union of both SOC grids inside their common range;
    at each grid point the two curves are interpolated and averaged.
    """
    chg = _curve(charge_curve, "charge")
    dis = _curve(discharge_curve, "discharge")
    lo = max(chg.soc_min, dis.soc_min)
    hi = min(chg.soc_max, dis.soc_max)
    if lo > hi:
        raise TableError(f"charge and discharge curves share no SOC range ([{lo}, {hi}])")
    grid = sorted({s for s in chg.soc_breakpoints + dis.soc_breakpoints if lo <= s <= hi})
    values = [0.5 * (chg(s) + dis(s)) for s in grid]
    return LookupTable1D(grid, values, TableKind.OCV)
