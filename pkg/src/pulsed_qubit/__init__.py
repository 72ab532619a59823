"""Propagators for a two-level system driven by a single finite pulse.

The Hamiltonian is ``H(t) = -(dE/2) sigma_z + V(t) sigma_x``. The package
provides a refined numerical propagator, the closed-form propagators of the
limiting regimes, and the regime map that tells them apart.
"""
__version__ = "0.1.0"

from .core import Complex2State, SystemParams, Unitary2, apply, decompose_pauli, populations
from .errors import (ConfigError, DegeneratePulseError, NoPointwiseValueError, NonUnitaryError,
                     NormalizationError, PreconditionError, PropagationDivergedError, QubitError,
                     RefinementExhaustedError)
from .propagator import EvolutionRecord, PropagationSettings, propagate, refine_to_tolerance
from .pulses import DeltaKick, Gaussian, Pulse, Rectangular, Sampled, TAU_CONVENTION
from .regime_map import (AtlasGrid, AtlasSpec, MapCoordinates, RegimeReport, adiabaticity_ratio,
                         build_atlas, classify, map_coordinates)
from .regimes import (RegimeKind, adiabatic_u, closed_form, degenerate_extended_u, degenerate_u,
                      kick_convergence_study, kicked_u, perturbative_u, zero_potential_u)
