"""NMR realism: molecules, pulses, schedules, the compiler and hard-pulse TCE control."""

from .compiler import (
    CompileError,
    Rotation,
    ZRotation,
    ZZ,
    circuit_unitary,
    compile_gates,
    register_for,
    schedule_fidelity,
    walk_gates,
    walk_step_gates,
    walk_unitary,
    zz_gate,
)
from .decompose import ErrorDecomposition, error_decompose
from .molecule import Coupling, Molecule, MoleculeError, Spin, builtin_molecule, crotonic_like, load_molecule, tce
from .pulses import free_evolution, hamiltonian, soft_pulse
from .schedule import PulseEvent, PulseSchedule, simulate_schedule
from .composite import residual_coupling_angle, tce_selective

__all__ = [
    "CompileError",
    "Coupling",
    "ErrorDecomposition",
    "Molecule",
    "MoleculeError",
    "PulseEvent",
    "PulseSchedule",
    "Rotation",
    "Spin",
    "ZRotation",
    "ZZ",
    "builtin_molecule",
    "circuit_unitary",
    "compile_gates",
    "crotonic_like",
    "error_decompose",
    "free_evolution",
    "hamiltonian",
    "load_molecule",
    "register_for",
    "residual_coupling_angle",
    "schedule_fidelity",
    "simulate_schedule",
    "soft_pulse",
    "tce",
    "tce_selective",
    "walk_gates",
    "walk_step_gates",
    "walk_unitary",
    "zz_gate",
]
