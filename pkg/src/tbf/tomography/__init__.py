"""Quadrature sampling, binned POVMs and maximum-likelihood state estimation."""

from .analysis import (
    CARDINAL_STATES,
    BootstrapResult,
    ChannelStack,
    PopulationFit,
    SuiteResult,
    bootstrap,
    cardinal_state_suite,
    fit_marginal_photon_populations,
    prepare_and_measure,
    qubit_fidelity,
)
from .mle import MleResult, MonotonicityError, mle_from_counts, mle_reconstruct
from .povm import PovmSet, bin_integrals, build_povm
from .sampling import sample_quadratures
from .settings import MeasurementSettings, QuadratureDataset, default_edges, phase_grid

__all__ = [
    "CARDINAL_STATES",
    "BootstrapResult",
    "ChannelStack",
    "MeasurementSettings",
    "MleResult",
    "MonotonicityError",
    "PopulationFit",
    "PovmSet",
    "QuadratureDataset",
    "SuiteResult",
    "bin_integrals",
    "bootstrap",
    "build_povm",
    "cardinal_state_suite",
    "default_edges",
    "fit_marginal_photon_populations",
    "mle_from_counts",
    "mle_reconstruct",
    "phase_grid",
    "prepare_and_measure",
    "qubit_fidelity",
    "sample_quadratures",
]
