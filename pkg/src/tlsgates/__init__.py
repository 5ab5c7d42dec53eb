"""Gate calibration and open-system simulation for TLS fluctuators in a driven resonator.

Frequencies are linear MHz, times ns, the resonator decay rate ``kappa`` 1/us.
"""
from .calibration import (
    CalibrationError,
    GatePlan,
    Segment,
    calibrate_hadamard,
    calibrate_two_qubit,
    calibrate_x,
    cirac_zoller_plan,
    decoherence_estimate,
)
from .config import SystemConfig, TLSParams
from .fidelity import Channel, compensate_local_phases, nielsen_fidelity
from .lindblad import SimulationDiagnosticError, evolve, simulate_gate_channel

__all__ = [
    "CalibrationError", "Channel", "GatePlan", "Segment", "SimulationDiagnosticError",
    "SystemConfig", "TLSParams", "calibrate_hadamard", "calibrate_two_qubit", "calibrate_x",
    "cirac_zoller_plan", "compensate_local_phases", "decoherence_estimate", "evolve",
    "nielsen_fidelity", "simulate_gate_channel",
]
