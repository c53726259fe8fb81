import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isc_detect.scenario import (
    CurrentProfile,
    ExtraDischargePulse,
    FaultSchedule,
    FaultSpec,
    ScheduleError,
    ShortResistor,
    hidden_windows,
    load_profile,
    load_schedule,
    save_profile,
    save_schedule,
    synth_drive_cycle,
)


class TestBenchmarkSchedule:
    def test_eleven_events(self, schedule):
        assert len(schedule) == 11
        assert len(schedule.shorts) == 10

    def test_event_11_is_a_pulse(self, schedule):
        (pulse,) = [e for e in schedule if not e.is_short]
        assert pulse.label == "#11"
        assert pulse.kind == ExtraDischargePulse(50.0)
        assert (pulse.t_on, pulse.t_off) == (13910.0, 13920.0)

    def test_resistance_classes(self, schedule):
        ohms = sorted(e.kind.ohms for e in schedule.shorts)
        assert ohms == [0.07] * 4 + [0.10] * 4 + [0.25] * 2

    def test_short_durations(self, schedule):
        for e in schedule.shorts:
            assert 28 <= e.t_off - e.t_on <= 32

    def test_hidden_windows(self, schedule):
        assert hidden_windows(schedule) == [(377.0, 406.0), (4489.0, 4518.0)]


class TestSchedule:
    def test_overlap_rejected(self):
        a = FaultSpec(ShortResistor(0.1), 0.0, 10.0, "a")
        b = FaultSpec(ShortResistor(0.1), 5.0, 15.0, "b")
        with pytest.raises(ScheduleError, match="overlapping"):
            FaultSchedule((a, b))

    def test_adjacent_allowed(self):
        a = FaultSpec(ShortResistor(0.1), 0.0, 10.0, "a")
        b = FaultSpec(ShortResistor(0.1), 10.0, 15.0, "b")
        assert len(FaultSchedule((b, a))) == 2
        assert FaultSchedule((b, a)).events[0] is a

    def test_bad_window(self):
        with pytest.raises(ScheduleError):
            FaultSpec(ShortResistor(0.1), 10.0, 10.0)

    def test_bad_resistance(self):
        with pytest.raises(ScheduleError):
            ShortResistor(0.0)

    def test_half_open_windows(self):
        s = FaultSchedule((FaultSpec(ShortResistor(0.1), 2.0, 4.0),))
        r = s.short_resistance(np.arange(6.0))
        assert np.isnan(r[[0, 1, 4, 5]]).all()
        assert (r[[2, 3]] == 0.1).all()

    def test_json_round_trip(self, tmp_path, schedule):
        p = tmp_path / "s.json"
        save_schedule(schedule, p)
        assert load_schedule(p) == schedule

    def test_unknown_kind(self, tmp_path):
        p = tmp_path / "s.json"
        p.write_text('{"events": [{"kind": "spark", "t_on": 0, "t_off": 1}]}')
        with pytest.raises(ScheduleError, match="unknown"):
            load_schedule(p)


class TestDriveCycle:
    def test_deterministic(self, profile):
        again = synth_drive_cycle(16000.0, 1.0, 0)
        assert np.array_equal(again.samples, profile.samples)

    def test_seed_matters(self, profile):
        assert not np.array_equal(synth_drive_cycle(16000.0, 1.0, 1).samples, profile.samples)

    def test_length_and_range(self, profile):
        assert len(profile) == 16000
        assert profile.samples.min() >= -45.0
        assert profile.samples.max() < 60.0

    def test_mixed_sign_short_profile(self):
        p = synth_drive_cycle(100.0, 1.0, 3, schedule=FaultSchedule())
        assert len(p) == 100
        assert (p.samples > 0).any() and (p.samples < 0).any()

    @pytest.mark.parametrize("window", [(377, 406), (4489, 4518)])
    def test_hidden_faults_under_charge_pulse(self, profile, window):
        seg = profile.samples[window[0] : window[1] + 1]
        assert (seg <= -40.0).all()

    def test_steady_current_around_edges(self, profile, schedule):
        for e in schedule:
            for edge in (int(e.t_on), int(e.t_off)):
                seg = profile.samples[edge - 5 : edge + 5]
                assert (seg == seg[0]).all(), e.label

    def test_read_only(self, profile):
        with pytest.raises(ValueError):
            profile.samples[0] = 1.0

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_net_discharge_bounded(self, seed):
        p = synth_drive_cycle(16000.0, 1.0, seed)
        net_ah = np.cumsum(p.samples) / 3600.0
        # the budget check happens before each segment, so overshoot is one segment at most
        assert net_ah.max() <= 12.0 + 60.0 * 60.0 / 3600.0

    def test_profile_csv_round_trip(self, tmp_path):
        p = synth_drive_cycle(100.0, 1.0, 7, schedule=FaultSchedule())
        path = tmp_path / "p.csv"
        save_profile(p, path)
        back = load_profile(path)
        assert back.dt == 1.0
        assert np.array_equal(back.samples, p.samples)

    def test_non_uniform_profile_rejected(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("t_s,i_a\n0,1\n1,1\n3,1\n")
        with pytest.raises(ScheduleError, match="non-uniform"):
            load_profile(path)

    def test_profile_validation(self):
        with pytest.raises(ScheduleError):
            CurrentProfile(0.0, np.zeros(3))
        with pytest.raises(ScheduleError):
            CurrentProfile(1.0, np.array([1.0, np.nan]))
