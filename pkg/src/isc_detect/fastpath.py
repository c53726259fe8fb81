"""Compiled bulk version of the streaming detector.

Same per-sample arithmetic as :func:`isc_detect.detector.step_detector`, in
the same operation order, so results match the pure-Python stream bit for
bit. All buffers are allocated by the caller before the loop starts.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np
from numba import njit

from .calibrate import Thresholds
from .detector import DetectorError, Diagnostics, FaultEvent
from .tables import LookupTable1D

ERR_TIME = -1
ERR_VOLTAGE = -2


@njit(cache=True)
def _lookup(xs, ys, s):
    # bisect_right, then linear interpolation with endpoint clamping
    lo = 0
    hi = xs.shape[0]
    while lo < hi:
        mid = (lo + hi) // 2
        if s < xs[mid]:
            hi = mid
        else:
            lo = mid + 1
    if lo <= 0:
        return ys[0]
    if lo >= xs.shape[0]:
        return ys[xs.shape[0] - 1]
    x0 = xs[lo - 1]
    y0 = ys[lo - 1]
    return y0 + (ys[lo] - y0) * (s - x0) / (xs[lo] - x0)


@njit(cache=True)
def stream_kernel(
    t, i, v, xs, ys, capacity, soc_init, lo_bound, hi_bound,
    ocv_out, delta_out, phase_out,
    ev_onset, ev_clear, ev_delta, ev_isc, ev_rsc, status,
):
    """Run the detector over whole arrays.

    Returns the number of events written. ``status[0]`` is 0 on success or a
    negative error code, with the offending sample index in ``status[1]``.
    ``status[2]`` is 1 when the SOC estimate was clamped.
    """
    n = t.shape[0]
    soc = soc_init
    t_prev = -math.inf
    prev = 0.0
    phase = 0
    n_ev = 0
    clamped = 0
    denom = 3600.0 * capacity
    x_lo = xs[0]
    x_hi = xs[xs.shape[0] - 1]
    status[0] = 0
    for k in range(n):
        tk = t[k]
        ik = i[k]
        vk = v[k]
        if not tk > t_prev:
            status[0] = ERR_TIME
            status[1] = k
            return n_ev
        if k > 0:
            soc = soc - (ik * (tk - t_prev)) / denom
            if soc < 0.0:
                soc = 0.0
                clamped = 1
            elif soc > 1.0:
                soc = 1.0
                clamped = 1
        t_prev = tk
        if soc < x_lo or soc > x_hi:
            clamped = 1
        r0 = _lookup(xs, ys, soc)
        ocv = vk + r0 * ik
        ocv_out[k] = ocv
        if k == 0:
            prev = ocv
            delta_out[k] = math.nan
            phase_out[k] = phase
            continue
        delta = ocv - prev
        prev = ocv
        delta_out[k] = delta
        if phase == 0:
            if delta < lo_bound:
                if not vk > 0.0:
                    status[0] = ERR_VOLTAGE
                    status[1] = k
                    return n_ev
                ev_onset[n_ev] = tk
                ev_clear[n_ev] = math.nan
                ev_delta[n_ev] = delta
                ev_isc[n_ev] = abs(delta) / r0
                ev_rsc[n_ev] = vk * r0 / abs(delta)
                n_ev += 1
                phase = 1
        elif delta > hi_bound:
            ev_clear[n_ev - 1] = tk
            phase = 0
        phase_out[k] = phase
    status[2] = clamped
    return n_ev


class StreamBuffers:
    """Preallocated outputs for :func:`stream_kernel`, reusable across calls."""

    def __init__(self, n: int) -> None:
        self.n = n
        self.ocv = np.empty(n)
        self.delta = np.empty(n)
        self.phase = np.empty(n, dtype=np.int8)
        m = n // 2 + 1
        self.onset = np.empty(m)
        self.clear = np.empty(m)
        self.ev_delta = np.empty(m)
        self.isc = np.empty(m)
        self.rsc = np.empty(m)
        self.status = np.zeros(3, dtype=np.int64)


def run_kernel(
    t: np.ndarray,
    i: np.ndarray,
    v: np.ndarray,
    thresholds: Optional[Thresholds],
    r0_table: LookupTable1D,
    capacity: float,
    soc_init: float,
    buffers: Optional[StreamBuffers] = None,
) -> tuple[int, StreamBuffers]:
    t = np.ascontiguousarray(t, dtype=np.float64)
    i = np.ascontiguousarray(i, dtype=np.float64)
    v = np.ascontiguousarray(v, dtype=np.float64)
    n = len(t)
    if not (len(i) == n and len(v) == n):
        raise DetectorError("t, i and v must have equal length")
    if not capacity > 0:
        raise DetectorError(f"capacity must be positive, got {capacity}")
    buf = buffers if buffers is not None and buffers.n >= n else StreamBuffers(n)
    lo, hi = (-math.inf, math.inf) if thresholds is None else (thresholds.relaxed_minus, thresholds.relaxed_plus)
    xs = np.asarray(r0_table.soc_breakpoints, dtype=np.float64)
    ys = np.asarray(r0_table.values, dtype=np.float64)
    n_ev = stream_kernel(
        t, i, v, xs, ys, float(capacity), float(soc_init), lo, hi,
        buf.ocv, buf.delta, buf.phase,
        buf.onset, buf.clear, buf.ev_delta, buf.isc, buf.rsc, buf.status,
    )
    code, where = int(buf.status[0]), int(buf.status[1])
    if code == ERR_TIME:
        raise DetectorError(f"sample {where}: time {t[where]} does not advance")
    if code == ERR_VOLTAGE:
        raise DetectorError(f"sample {where}: non-positive terminal voltage at onset")
    return n_ev, buf


def detect_fast(
    t: np.ndarray,
    i: np.ndarray,
    v: np.ndarray,
    thresholds: Thresholds,
    r0_table: LookupTable1D,
    capacity: float,
    soc_init: float,
) -> tuple[list[FaultEvent], Diagnostics]:
    """Bulk equivalent of :func:`isc_detect.detector.detect` with diagnostics."""
    n_ev, buf = run_kernel(t, i, v, thresholds, r0_table, capacity, soc_init)
    n = len(t)
    events = [
        FaultEvent(
            t_onset=float(buf.onset[k]),
            t_clear=None if math.isnan(buf.clear[k]) else float(buf.clear[k]),
            delta_at_onset=float(buf.ev_delta[k]),
            i_sc_est=float(buf.isc[k]),
            r_sc_est=float(buf.rsc[k]),
            label=f"E{k + 1}",
        )
        for k in range(n_ev)
    ]
    diag = Diagnostics(
        np.asarray(t, dtype=float).copy(), buf.ocv[:n].copy(), buf.delta[:n].copy(), buf.phase[:n].copy()
    )
    return events, diag
