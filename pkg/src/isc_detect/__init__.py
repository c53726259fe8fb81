"""Pseudo-OCV difference detection of transient internal short circuits in Li-ion cells."""

from .calibrate import Thresholds, calibrate_thresholds, quantile
from .detector import (
    Detector,
    DetectorState,
    FaultEvent,
    Sample,
    detect,
    estimate_isc,
    estimate_rsc,
    pseudo_ocv,
    step_detector,
    update_soc,
)
from .ecm import CellParams, CellState, NoiseSpec, Trace, default_cell, run_scenario, solve_terminal, step_cell
from .evaluate import EvalReport, match_events, summarize
from .scenario import (
    CurrentProfile,
    ExtraDischargePulse,
    FaultSchedule,
    FaultSpec,
    ShortResistor,
    synth_drive_cycle,
    table1_schedule,
)
from .tables import LookupTable1D, TableKind, build_ocv_table, interp, load_table

__version__ = "0.1.0"
