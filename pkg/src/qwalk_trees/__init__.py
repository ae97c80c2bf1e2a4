"""Walks on decision trees: classical Markov evolution, quantum evolution,
energy-domain transmission through base-bush trees, exact-cover trimming,
and few-bit local-term encodings."""

__version__ = "0.1.0"

from .errors import CapacityError, LocalityError, PoleError, ReductionError
from .trees import (
    BaseBushForm,
    ConstraintFamily,
    DecisionTree,
    ExplicitBush,
    NoBush,
    PerfectBush,
    attach_runways,
    build_even_bush_tree,
    build_grover_tree,
    build_underlying_tree,
    canonical_certificate,
    default_runway_length,
    even_bush_form,
    from_base_bush_form,
    grover_form,
    line_form,
    to_base_bush_form,
    trim_tree,
    validate_tree,
)
from .hamiltonian import (
    EffectiveChain,
    GraphHamiltonian,
    RunwayWeights,
    hamiltonian_from_tree,
    reduce_perfect_bushes,
    spectrum,
    zero_mode_check,
)
from .evolution import (
    PenetrabilityReport,
    ProbabilityVector,
    StateVector,
    bessel_reference,
    cauchy_relation_check,
    classical_propagate,
    penetrability_probe,
    quantum_propagate,
)
from .scattering import (
    BoundState,
    BushRatio,
    ScatteringResult,
    TransferMatrix,
    WavePacket,
    bound_state_scan,
    bush_ratio_generic,
    bush_ratio_perfect,
    log_energy_grid,
    make_packet,
    packet_transmission,
    theta_from_energy,
    transfer_matrix,
    transmission,
    transmission_sweep,
)
from .exact_cover import (
    ExactCoverInstance,
    MarkedPathFamily,
    SipserResult,
    brute_force_solve,
    constraint_c0,
    constraint_c1,
    constraint_family,
    feasibility_family,
    generate_restricted_instance,
    sipser_solve,
)
from .spin_encoding import (
    BitBasisState,
    LocalTerm,
    TrotterPlan,
    assemble_tree_terms,
    assemble_trimmed_terms,
    subspace_matrix,
    terms_to_dense,
    trotter_evolve,
)
