"""Disordered U(1)-symmetric Floquet circuits on a ring.

Sector-restricted state-vector simulation, circular-moment transport
analysis, filtered Arnoldi spectra and the classical SWAP-circuit drift.
"""

__version__ = "0.1.0"

from .sector import (
    SectorBasis,
    SectorState,
    measure_profile,
    project_up,
    random_sector_state,
    sector_dimension,
)
from .gates import GateParams, SwapForm, build_gate, from_four_phases, swap_form
from .circuit import FloquetCircuit, apply_floquet, apply_floquet_power, cyclic_shift, sample_circuit
from .circular import (
    CircularMoment,
    QuasiProb,
    circular_mean,
    discrete_wrapped_normal,
    drift_mu_tilde,
    quasiprob,
    wrapped_normal_pdf,
)
from .transport import (
    TransportSummary,
    TransportTrace,
    ensemble_average,
    fit_exponent,
    initial_state,
    prethermal_times,
    run_trajectory,
    stroboscopic_schedule,
    time_averaged_drift,
)
from .spectral import (
    PolfedConfig,
    SpectralResult,
    apply_polfed,
    arnoldi_eigenpairs,
    default_filter_order,
    entanglement_entropy,
    gap_ratios,
    page_entropy,
)
from .drift import DriftEstimate, drift_bounds, drift_of_permutation, staircase, typical_drift
