"""cvarq: a desk-scale laboratory for sampling from noisy quantum circuits
and computing provable CVaR bounds on noise-free expectation values."""

from cvarq.pauli import (
    PauliString,
    CommutingGroup,
    commutes,
    conjugate_through_cnot_layer,
    group_commuting,
    diagonalize_group,
)
from cvarq.noise import (
    PauliLindbladModel,
    ErrorEvent,
    gamma,
    layer_fidelity,
    sample_error,
    apply_channel_dense,
    twirl_channel_dense,
)
from cvarq.circuit import (
    Gate,
    SingleQubitLayer,
    CnotLayer,
    LayeredCircuit,
    stats,
    total_gamma,
    insert_pauli_twirl,
    inverse_circuit,
)
from cvarq.simulator import (
    Distribution,
    SampleSet,
    statevector,
    ideal_distribution,
    noisy_distribution_exact,
    sample_noisy,
    sample_ideal,
    fidelity_upper_bound,
)

from cvarq.problems import (
    IsingPolynomial,
    QaoaParams,
    FeasibilityFilter,
    brute_force,
    build_qaoa,
    maxcut_3regular,
    approximation_ratio,
)
from cvarq.heavyhex import HeavyHexInstance, heavy_hex_instance
from cvarq.cvar import (
    FiniteDistribution,
    CVaRReport,
    cvar_exact,
    cvar_upper_exact,
    cvar_empirical,
    cvar_filtered,
    cvar_sandwich_bounds,
    calibrate_alpha,
    bootstrap_variance,
    analytic_variance,
)
from cvarq.pec import qpd_inverse, pec_expectation, pec_sampling_distribution
from cvarq.report import (
    OverheadReport,
    derive_overheads,
    min_layer_fidelity,
    min_cnot_fidelity,
    bound_report,
)

__version__ = "0.1.0"
