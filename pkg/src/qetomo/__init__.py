"""Simulation and estimation for multi-photon tomography of two-mode unitaries."""

from .errors import AmbiguityError, InvalidArgumentError, TomographyError
from .estimate import (
    EstimationResult,
    PEstimate,
    central_estimate,
    disambiguate,
    estimate_unitary,
    mle_p,
)
from .fock import (
    OutcomeDistribution,
    ProbeSpec,
    brute_force_distribution,
    distribution,
    fisher_information,
    table1_distribution,
    wigner_d_outcome_prob,
)
from .region import in_physical_region, linear_inversion, project_to_physical_region
from .simulate import CountsRecord, ExperimentRecord, run_protocol, simulate_counts, simulate_cross_basis
from .su2 import (
    U_A,
    U_B,
    BlochPoint,
    ProbabilityTriple,
    UnitaryParams,
    bloch_coords,
    cross_probs_from_params,
    from_matrix,
    haar_sample,
    normalize,
    probs_from_params,
    process_infidelity,
    to_matrix,
)

__version__ = "0.1.0"
