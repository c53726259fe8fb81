import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isc_detect.calibrate import Thresholds
from isc_detect.detector import (
    Detector,
    DetectorError,
    DetectorState,
    FaultEvent,
    Phase,
    Sample,
    detect,
    estimate_isc,
    estimate_rsc,
    pseudo_ocv,
    read_events,
    step_detector,
    update_soc,
    write_diagnostics,
    write_events,
)
from isc_detect.fastpath import detect_fast
from isc_detect.tables import LookupTable1D, TableKind

FLAT_R0 = LookupTable1D((0.0, 1.0), (2e-3, 2e-3), TableKind.R0)
TH = Thresholds.from_bounds(-5e-3, 5e-3, 0.005, 2.0)


def batch_oracle(t, i, v, th, r0_table, capacity, soc_init):
    """Whole-array reimplementation of the rule, written independently of the stream code."""
    dt = np.diff(t)
    soc = np.concatenate(([soc_init], soc_init - np.cumsum(i[1:] * dt) / (3600.0 * capacity)))
    assert soc.min() >= 0.0 and soc.max() <= 1.0
    r0 = np.interp(soc, r0_table.soc_breakpoints, r0_table.values)
    ocv = v + r0 * i
    delta = np.diff(ocv)
    events, open_k = [], None
    for k, d in enumerate(delta, start=1):
        if open_k is None and d < th.relaxed_minus:
            open_k = k
            events.append([t[k], None, d, abs(d) / r0[k], v[k] * r0[k] / abs(d)])
        elif open_k is not None and d > th.relaxed_plus:
            events[-1][1] = t[k]
            open_k = None
    return events


class TestPrimitives:
    def test_pseudo_ocv(self):
        assert pseudo_ocv(Sample(0.0, 10.0, 3.68), 0.5, FLAT_R0) == pytest.approx(3.70)

    def test_pseudo_ocv_charge(self):
        assert pseudo_ocv(Sample(0.0, -10.0, 3.72), 0.5, FLAT_R0) == pytest.approx(3.70)

    def test_update_soc(self):
        soc, clamped = update_soc(0.8, 4.02, 3600.0, 40.2)
        assert soc == pytest.approx(0.7)
        assert not clamped

    def test_update_soc_one_hour(self):
        soc, clamped = update_soc(1.0, 40.2, 1800.0, 40.2)
        assert soc == pytest.approx(0.5)
        assert not clamped

    def test_update_soc_clamps(self):
        assert update_soc(0.01, 40.2, 3600.0, 40.2) == (0.0, True)
        assert update_soc(0.99, -40.2, 3600.0, 40.2) == (1.0, True)

    def test_estimates_for_severe_short(self):
        assert estimate_isc(-0.1028, 0.002) == pytest.approx(51.4)
        assert estimate_rsc(3.5972, 0.002, -0.1028) == pytest.approx(0.0700, abs=1e-4)

    def test_estimate_errors(self):
        with pytest.raises(DetectorError):
            estimate_isc(-0.1, 0.0)
        with pytest.raises(DetectorError):
            estimate_rsc(0.0, 0.002, -0.1)
        with pytest.raises(DetectorError):
            estimate_rsc(3.6, 0.002, 0.0)

    @given(st.floats(3.0, 4.2), st.floats(0.5e-3, 5e-3), st.floats(1e-4, 0.2))
    def test_estimates_consistent(self, v, r0, drop):
        i_sc = estimate_isc(-drop, r0)
        assert estimate_rsc(v, r0, -drop) == pytest.approx(v / i_sc)


def stream(t, i, v, th=TH, r0=FLAT_R0, cap=40.0, soc=0.5):
    return detect(np.asarray(t, float), np.asarray(i, float), np.asarray(v, float), th, r0, cap, soc)[0]


class TestStateMachine:
    def test_constant_stream_is_quiet(self):
        n = 500
        assert stream(np.arange(n), np.full(n, 5.0), np.full(n, 3.7)) == []

    def test_onset_then_clear(self):
        v = np.full(20, 3.7)
        v[5:12] -= 0.05
        (e,) = stream(np.arange(20.0), np.zeros(20), v)
        assert (e.t_onset, e.t_clear) == (5.0, 12.0)
        assert e.delta_at_onset == pytest.approx(-0.05)
        assert e.i_sc_est == pytest.approx(25.0)
        assert e.r_sc_est == pytest.approx(3.65 * 2e-3 / 0.05)
        assert e.label == "E1"

    def test_open_fault_at_end(self):
        v = np.full(10, 3.7)
        v[5:] -= 0.05
        (e,) = stream(np.arange(10.0), np.zeros(10), v)
        assert e.t_clear is None

    def test_latches_without_reemitting(self):
        v = np.full(20, 3.7)
        v[5:] -= 0.05
        v[8:] -= 0.05
        assert len(stream(np.arange(20.0), np.zeros(20), v)) == 1

    def test_orphan_clear_logged(self, caplog):
        v = np.full(10, 3.7)
        v[5:] += 0.05
        st_ = DetectorState.start(0.5)
        with caplog.at_level(logging.WARNING):
            for k in range(10):
                step_detector(st_, Sample(float(k), 0.0, float(v[k])), TH, FLAT_R0, 40.0)
        assert st_.orphan_clears == 1
        assert st_.phase is Phase.HEALTHY
        assert "no open fault" in caplog.text

    def test_time_must_advance(self):
        det = Detector(TH, FLAT_R0, 40.0, 0.5)
        det.step(Sample(1.0, 0.0, 3.7))
        with pytest.raises(DetectorError, match="does not advance"):
            det.step(Sample(1.0, 0.0, 3.7))

    def test_pass_through_never_emits(self):
        det = Detector(None, FLAT_R0, 40.0, 0.5)
        edges = list(det.run(Sample(float(k), 0.0, 3.7 - 0.1 * (k == 3)) for k in range(6)))
        assert edges == []
        assert det.state.delta == 0.0

    def test_clamp_latches(self):
        det = Detector(TH, FLAT_R0, 1.0, 0.001)
        det.step(Sample(0.0, 10.0, 3.7))
        det.step(Sample(1.0, 10.0, 3.7))
        assert det.state.clamped
        det.step(Sample(2.0, -10.0, 3.7))
        assert det.state.clamped

    def test_bad_initial_soc(self):
        with pytest.raises(DetectorError):
            DetectorState.start(1.5)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-0.02, 0.02), min_size=2, max_size=200))
    def test_events_alternate(self, steps):
        v = 3.7 + np.cumsum(steps)
        n = len(v)
        events = stream(np.arange(float(n)), np.zeros(n), v)
        for a, b in zip(events, events[1:]):
            assert a.t_clear is not None and a.t_clear <= b.t_onset
        assert all(e.delta_at_onset < TH.relaxed_minus for e in events)


class TestEquivalence:
    def test_fast_path_bit_identical(self, fault_trace, thresholds, cell):
        tr = fault_trace
        args = (tr.t, tr.i, tr.v, thresholds, cell.r0_table, cell.capacity, cell.soc_init)
        slow, d_slow = detect(*args, with_diagnostics=True)
        fast, d_fast = detect_fast(*args)
        assert slow == fast
        assert np.array_equal(d_slow.ocv_pseudo, d_fast.ocv_pseudo)
        assert np.array_equal(d_slow.delta, d_fast.delta, equal_nan=True)
        assert np.array_equal(d_slow.phase, d_fast.phase)

    def test_batch_oracle(self, fault_trace, thresholds, cell):
        tr = fault_trace
        events, _ = detect(tr.t, tr.i, tr.v, thresholds, cell.r0_table, cell.capacity, cell.soc_init)
        oracle = batch_oracle(tr.t, tr.i, tr.v, thresholds, cell.r0_table, cell.capacity, cell.soc_init)
        assert len(events) == len(oracle)
        for e, (on, off, d, isc, rsc) in zip(events, oracle):
            assert (e.t_onset, e.t_clear) == (on, off)
            assert e.delta_at_onset == pytest.approx(d, rel=1e-9)
            assert e.i_sc_est == pytest.approx(isc, rel=1e-9)
            assert e.r_sc_est == pytest.approx(rsc, rel=1e-9)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.tuples(st.floats(-30, 60), st.floats(-0.02, 0.02)), min_size=2, max_size=100))
    def test_fast_matches_stream_on_random_input(self, rows):
        i = np.array([r[0] for r in rows])
        v = 3.7 + np.cumsum([r[1] for r in rows])
        t = np.arange(float(len(rows)))
        r0 = LookupTable1D((0.0, 0.5, 1.0), (3e-3, 1.5e-3, 2e-3), TableKind.R0)
        slow, _ = detect(t, i, v, TH, r0, 40.0, 0.5)
        fast, _ = detect_fast(t, i, v, TH, r0, 40.0, 0.5)
        assert slow == fast


class TestEventIO:
    def test_round_trip(self, tmp_path):
        events = [
            FaultEvent(377.0, 406.0, -0.0241, 16.0, 0.245, "E1"),
            FaultEvent(1640.0, None, -0.05, 33.3, 0.11, "E2"),
        ]
        path = tmp_path / "ev.csv"
        write_events(events, path)
        assert read_events(path) == events

    def test_bad_header(self, tmp_path):
        path = tmp_path / "ev.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(DetectorError):
            read_events(path)

    def test_diagnostics_file(self, tmp_path, fault_trace, thresholds, cell):
        tr = fault_trace
        _, diag = detect(tr.t, tr.i, tr.v, thresholds, cell.r0_table, cell.capacity, cell.soc_init, True)
        path = tmp_path / "diag.csv"
        write_diagnostics(diag, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "t_s,ocv_pseudo_v,delta_v,phase"
        assert len(lines) == len(tr) + 1
        assert lines[1].split(",")[2] == ""
        assert {ln.rsplit(",", 1)[1] for ln in lines[1:]} == {"healthy", "in_fault"}
        assert math.isclose(float(lines[2].split(",")[0]), tr.t[1])
