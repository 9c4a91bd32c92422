"""macrospin: a numerical laboratory for coarse-grained spin-j measurements.

Exact spin-j states and operators, Husimi Q / quasi-diagonal P phase-space
maps on exact sphere quadratures, slot-coarse-grained projective measurements
with Lüders updates, precession dynamics against a Newtonian oracle, and
Leggett-Garg temporal correlators — all reproducible from seeded configs via
the `macrospin` CLI.
"""

from .spin_core import (
    DensityOperator,
    Direction,
    LogAmplitude,
    PureState,
    SpinJ,
    SpinOperator,
    coherent_log_amplitudes,
    coherent_overlap,
    coherent_state,
    expectation,
    j_omega_operator,
    jx_operator,
    jy_operator,
    jz_operator,
    overlap,
    rotate,
    spin_expectation_vector,
    wigner_d_matrix,
)
from .phase_space import (
    MultipoleCoeffs,
    PMap,
    QMap,
    SphereGrid,
    build_grid,
    p_function,
    q_distance,
    q_function,
    state_from_p,
    state_multipoles,
)
from .coarse_grain import (
    SlotBand,
    SlotDistribution,
    SlotPartition,
    approx_slot_probs_via_q,
    cat_gap,
    cat_state,
    exact_slot_probs,
    invasiveness,
    luders_update,
    make_partition,
    mixture_residual,
    nonselective_update,
    partition_grid,
    sample_slot,
    slot_bands,
)
from .dynamics import (
    LgResult,
    PrecessionSpec,
    TrajectoryRecord,
    classical_trajectory,
    evolve,
    lg_correlator,
    quantum_trajectory,
)

__version__ = "0.1.0"

__all__ = [
    "SpinJ",
    "Direction",
    "LogAmplitude",
    "PureState",
    "DensityOperator",
    "SpinOperator",
    "jz_operator",
    "jx_operator",
    "jy_operator",
    "j_omega_operator",
    "coherent_state",
    "coherent_log_amplitudes",
    "coherent_overlap",
    "overlap",
    "rotate",
    "expectation",
    "spin_expectation_vector",
    "wigner_d_matrix",
    "SphereGrid",
    "QMap",
    "PMap",
    "MultipoleCoeffs",
    "build_grid",
    "q_function",
    "q_distance",
    "state_multipoles",
    "p_function",
    "state_from_p",
    "SlotPartition",
    "SlotBand",
    "SlotDistribution",
    "make_partition",
    "slot_bands",
    "partition_grid",
    "exact_slot_probs",
    "approx_slot_probs_via_q",
    "luders_update",
    "nonselective_update",
    "sample_slot",
    "mixture_residual",
    "invasiveness",
    "cat_state",
    "cat_gap",
    "PrecessionSpec",
    "TrajectoryRecord",
    "LgResult",
    "evolve",
    "classical_trajectory",
    "quantum_trajectory",
    "lg_correlator",
    "__version__",
]
