"""Dissipative preparation of an entangled dark singlet of two Rydberg atoms."""

from .dynamics import (
    Liouvillian,
    Trajectory,
    build_liouvillian,
    integrate,
    lindblad_rhs,
    steady_state,
)
from .model import ModelParams, blockade_condition, build_jumps, build_total_hamiltonian, named_states
from .observables import fit_entanglement_rate, measure, scan_observable
from .reduced import bounds, effective_params, nonhermitian_spectrum, simulate_effective

__version__ = "0.1.0"
