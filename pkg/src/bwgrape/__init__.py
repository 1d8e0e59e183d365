"""Bandwidth-aware GRAPE: optimal control pulses that account for resonator distortion."""
from bwgrape.kernels import BACKEND
from bwgrape.resonator import (
    Circuit,
    DiscreteImpulseResponse,
    MeasuredResponse,
    ResonatorKind,
    ResonatorModel,
    derive_transients,
    distort,
    impulse_response,
    ringdown_energy,
)
from bwgrape.spinsys import (
    EnsembleMember,
    HyperfineParams,
    SpinSystem,
    ensemble_grid,
    hyperfine_eigensystem,
    hyperfine_system,
    single_spin_system,
    with_carrier_on_14,
)
from bwgrape.propagate import avg_gate_fidelity, ensemble_fidelity, total_propagator
from bwgrape.grape import GrapeConfig, OptimizationResult, Problem, run, run_stages

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Circuit",
    "DiscreteImpulseResponse",
    "EnsembleMember",
    "GrapeConfig",
    "HyperfineParams",
    "MeasuredResponse",
    "OptimizationResult",
    "Problem",
    "ResonatorKind",
    "ResonatorModel",
    "SpinSystem",
    "avg_gate_fidelity",
    "derive_transients",
    "distort",
    "ensemble_fidelity",
    "ensemble_grid",
    "hyperfine_eigensystem",
    "hyperfine_system",
    "impulse_response",
    "ringdown_energy",
    "run",
    "run_stages",
    "single_spin_system",
    "total_propagator",
    "with_carrier_on_14",
]
