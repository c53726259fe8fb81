import numpy as np
import pytest

from isc_detect.calibrate import calibrate_thresholds
from isc_detect.detector import healthy_deltas
from isc_detect.ecm import NoiseSpec, default_cell, run_scenario
from isc_detect.scenario import FaultSchedule, synth_drive_cycle, table1_schedule

DURATION_S = 16000.0
SEED = 0


@pytest.fixture(scope="session")
def cell():
    return default_cell()


@pytest.fixture(scope="session")
def schedule():
    return table1_schedule()


@pytest.fixture(scope="session")
def profile():
    return synth_drive_cycle(DURATION_S, 1.0, SEED)


@pytest.fixture(scope="session")
def healthy_trace(cell, profile):
    return run_scenario(cell, profile, FaultSchedule(), NoiseSpec(seed=SEED))


@pytest.fixture(scope="session")
def fault_trace(cell, profile, schedule):
    return run_scenario(cell, profile, schedule, NoiseSpec(seed=SEED))


@pytest.fixture(scope="session")
def clean_healthy_trace(cell, profile):
    return run_scenario(cell, profile, FaultSchedule(), NoiseSpec.off())


@pytest.fixture(scope="session")
def clean_fault_trace(cell, profile, schedule):
    return run_scenario(cell, profile, schedule, NoiseSpec.off())


def deltas_of(trace, cell):
    return healthy_deltas(trace.t, trace.i, trace.v, cell.r0_table, cell.capacity, cell.soc_init)


@pytest.fixture(scope="session")
def thresholds(healthy_trace, cell):
    return calibrate_thresholds(deltas_of(healthy_trace, cell), 0.005, 2.0)


@pytest.fixture(scope="session")
def clean_thresholds(clean_healthy_trace, cell):
    return calibrate_thresholds(deltas_of(clean_healthy_trace, cell), 0.005, 2.0)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
