"""Nonlinear dissipative quantum dynamics of the steepest-entropy-ascent kind.

The master equation rho_dot = (i/hbar)[rho, H] - L(log rho) is driven by a
constrained projector dissipator L that conserves the trace and every listed
observable while producing entropy at rate <log rho, L log rho> >= 0. The
package integrates trajectories with thermodynamic diagnostics, verifies the
generator's structural conditions, checks exact Onsager reciprocity over
Heisenberg-transformed operator bases, and probes superselection sectors and
composite-system separability.
"""

from .operators import (
    DensityState,
    DimensionError,
    HermiticityError,
    PositivityError,
    SelfAdjointBasis,
    TraceError,
    build_selfadjoint_basis,
    hermitian_part,
    hs_inner,
    hs_norm,
    matrix_exp_hermitian,
    matrix_log,
    operator_from_json,
    operator_to_json,
    trace_distance,
    trace_norm,
    validate_hermitian,
)
from .generator import (
    ConstraintSet,
    DissipativeGenerator,
    VerificationReport,
    apply_generator,
    build_constraint_set,
    build_projector_generator,
    random_property_checks,
    verify_generator,
)
from .dynamics import (
    BracketError,
    ScenarioConfig,
    Trajectory,
    TrajectoryPoint,
    entropy,
    entropy_production,
    gibbs_state,
    integrate,
    rhs,
    with_updates,
)
from .onsager import (
    OnsagerMatrix,
    ReciprocityReport,
    check_reciprocity,
    hamiltonian_propagator,
    heisenberg_transform,
    onsager_matrix,
)
from .sectors import (
    RedundancyReport,
    SectorReport,
    SectorSpec,
    SeparabilityReport,
    check_sector_preservation,
    constraint_redundancy_probe,
    mutual_information,
    partial_trace,
    sector_decompose,
    separability_probe,
)
from .runner import RunManifest, ScenarioError, load_scenario, run

__version__ = "0.1.0"
