"""Simulation of a multiplex-controlled phase gate on qutrits in coupled cavities.

Work qutrits sit in separate cavities and talk only through one ancilla
qutrit coupled to every cavity.  The package compiles the gate into timed
segments, runs them through closed-form ideal maps or a Lindblad master
equation, and evaluates fidelity sweeps.
"""

from __future__ import annotations

from .analysis import (
    SweepResult,
    fidelity,
    gate_input_state,
    ideal_output_state,
    simulate_gate,
    sweep_2d,
    sweep_c,
    sweep_dt,
    truth_table,
)
from .hamiltonian import HamiltonianKind, HamiltonianSpec, PhysicalParams, atom_defaults, default_params
from .hilbert import SystemLayout, basis_state, build_space, embed
from .ideal import apply_schedule_ideal, exact_propagator, jc_map, pulse_map, tc_map
from .lindblad import IntegrationError, IntegratorOptions, NoiseModel, integrate
from .schedule import (
    GateSchedule,
    ScheduleSegment,
    SegmentClass,
    apply_time_error,
    compile_3qubit,
    compile_atom_single_cavity,
    compile_nqubit,
    compile_toffoli,
    timing_budget,
)

__version__ = "0.1.0"

__all__ = [
    "GateSchedule",
    "HamiltonianKind",
    "HamiltonianSpec",
    "IntegrationError",
    "IntegratorOptions",
    "NoiseModel",
    "PhysicalParams",
    "ScheduleSegment",
    "SegmentClass",
    "SweepResult",
    "SystemLayout",
    "apply_schedule_ideal",
    "apply_time_error",
    "atom_defaults",
    "basis_state",
    "build_space",
    "compile_3qubit",
    "compile_atom_single_cavity",
    "compile_nqubit",
    "compile_toffoli",
    "embed",
    "exact_propagator",
    "fidelity",
    "gate_input_state",
    "ideal_output_state",
    "integrate",
    "jc_map",
    "default_params",
    "pulse_map",
    "simulate_gate",
    "sweep_2d",
    "sweep_c",
    "sweep_dt",
    "tc_map",
    "timing_budget",
    "truth_table",
]
