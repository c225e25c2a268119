"""Worst-case fidelity of a passive two-photon controlled-phase gate.

The gate routes photons through two-level emitters in chiral waveguides;
see README.md for the model and units.
"""

__version__ = "0.1.0"

from .errors import ContractError, ConvergenceError, ParameterError  # noqa: E402
from .fidelity import (FidelityResult, LogicalInputWeights, gate_fidelity,  # noqa: E402
                       state_fidelity, state_fidelity_map)
from .overlaps import (GateOverlaps, OverlapKernel, beam_splitter_transform,  # noqa: E402
                       ideal_zero_amplitude, single_overlap, two_overlap, two_photon_target)
from .pulses import SpectralProfile, amplitude, make_profile, tabulated_profile  # noqa: E402
from .quadrature import QuadratureSpec, integrate_1d, integrate_2d  # noqa: E402
from .scattering import (EmitterParams, TwoPhotonAmplitude, bound_state_kernel,  # noqa: E402
                         nonlinear_g, phase_theta, s_pole, single_photon_scatter,
                         transmission, two_photon_scatter)
from .sweep import (ResultCache, SweepResult, SweepSpec, optimize, optimize_fidelity,  # noqa: E402
                    run_sweep)

__all__ = [
    "ContractError", "ConvergenceError", "ParameterError",
    "FidelityResult", "LogicalInputWeights", "gate_fidelity", "state_fidelity",
    "state_fidelity_map",
    "GateOverlaps", "OverlapKernel", "beam_splitter_transform", "ideal_zero_amplitude",
    "single_overlap", "two_overlap", "two_photon_target",
    "SpectralProfile", "amplitude", "make_profile", "tabulated_profile",
    "QuadratureSpec", "integrate_1d", "integrate_2d",
    "EmitterParams", "TwoPhotonAmplitude", "bound_state_kernel", "nonlinear_g", "phase_theta",
    "s_pole", "single_photon_scatter", "transmission", "two_photon_scatter",
    "ResultCache", "SweepResult", "SweepSpec", "optimize", "optimize_fidelity", "run_sweep",
]
