"""Continuous-time quantum walks of photon pairs in coupled waveguide lattices."""

__version__ = "0.1.0"

from .lattice import (  # noqa: E402
    CouplingModel,
    Waveguide,
    WaveguideLattice,
    build_linear_chain,
    build_swiss_cross,
    hamiltonian,
)
from .evolution import Propagator, propagator, single_photon_distribution  # noqa: E402
from .correlations import (  # noqa: E402
    CorrelationMatrix,
    PortEfficiencies,
    apply_losses,
    branch_sum,
    distinguishable_correlations,
    partial_correlations,
    quantum_correlations,
)
from .nonclassicality import (  # noqa: E402
    CountMatrix,
    ViolationReport,
    sample_counts,
    violation_matrix,
    violation_significance,
)
from .configspace import ConfigGraph, expand, simulate_on_graph  # noqa: E402
from .analysis import (  # noqa: E402
    CalibrationProblem,
    calibrate,
    hom_scan,
    hom_visibility,
    similarity,
)
