"""Quantile thresholds on the pseudo-OCV difference, learned from a healthy run."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence


class CalibrationError(ValueError):
    pass


def quantile(values: Sequence[float], p: float) -> float:
    """Empirical ``p``-quantile by linear interpolation between order statistics.

    The sorted sample is indexed from 0 and the quantile sits at rank
    ``p * (n - 1)``.
    """
    if not 0.0 <= p <= 1.0:
        raise CalibrationError(f"p must lie in [0, 1], got {p}")
    xs = sorted(float(v) for v in values)
    if not xs:
        raise CalibrationError("quantile of an empty sequence")
    rank = p * (len(xs) - 1)
    lo = math.floor(rank)
    hi = min(lo + 1, len(xs) - 1)
    frac = rank - lo
    if frac == 0.0:
        return xs[lo]
    return xs[lo] + (xs[hi] - xs[lo]) * frac


@dataclass(frozen=True)
class Thresholds:
    theta_minus: float
    theta_plus: float
    p: float
    gamma: float
    relaxed_minus: float
    relaxed_plus: float

    def __post_init__(self) -> None:
        if not self.theta_minus < 0.0 < self.theta_plus:
            raise CalibrationError(
                f"thresholds must bracket zero, got [{self.theta_minus}, {self.theta_plus}]"
            )
        if not 0.0 < self.p < 0.5:
            raise CalibrationError(f"p must lie in (0, 0.5), got {self.p}")
        if not self.gamma > 1.0:
            raise CalibrationError(f"gamma must exceed 1, got {self.gamma}")
        if self.relaxed_minus != self.gamma * self.theta_minus or self.relaxed_plus != self.gamma * self.theta_plus:
            raise CalibrationError("relaxed bounds must equal gamma times the quantile bounds")

    @classmethod
    def from_bounds(cls, theta_minus: float, theta_plus: float, p: float, gamma: float) -> "Thresholds":
        return cls(theta_minus, theta_plus, p, gamma, gamma * theta_minus, gamma * theta_plus)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Thresholds":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
            return cls(**{k: float(doc[k]) for k in cls.__dataclass_fields__})
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise CalibrationError(f"{path}: malformed thresholds file ({exc})") from None


def calibrate_thresholds(healthy_deltas: Sequence[float], p: float = 0.005, gamma: float = 2.0) -> Thresholds:
    """Lower/upper detection bounds at the ``p`` and ``1 - p`` quantiles, scaled by ``gamma``."""
    if not 0.0 < p < 0.5:
        raise CalibrationError(f"p must lie in (0, 0.5), got {p}")
    if not gamma > 1.0:
        raise CalibrationError(f"gamma must exceed 1, got {gamma}")
    deltas = list(healthy_deltas)
    if len(deltas) < math.ceil(1.0 / p):
        raise CalibrationError(f"need at least {math.ceil(1.0 / p)} healthy samples for p={p}, got {len(deltas)}")
    lo = quantile(deltas, p)
    hi = quantile(deltas, 1.0 - p)
    if not (lo < 0.0 < hi):
        raise CalibrationError(f"degenerate healthy distribution: quantile bounds [{lo}, {hi}] do not bracket zero")
    return Thresholds.from_bounds(lo, hi, p, gamma)


def exceedance(deltas: Sequence[float], th: Thresholds) -> tuple[float, float]:
    """Fractions of ``deltas`` strictly below ``theta_minus`` and strictly above ``theta_plus``."""
    n = len(deltas)
    below = sum(1 for d in deltas if d < th.theta_minus)
    above = sum(1 for d in deltas if d > th.theta_plus)
    return below / n, above / n
