"""bellforge: port-based teleportation, remote state preparation, and
communication-derived Bell certification on exact dense linear algebra."""

__version__ = "0.1.0"

from .states import (
    ATOL_NORM,
    ATOL_HERM,
    ATOL_POVM,
    ATOL_UNITARY,
    MAX_TOTAL_DIM,
    CapExceededError,
    InvariantError,
    RegisterLayout,
    PureState,
    MixedState,
    Povm,
    tensor,
    partial_trace,
    apply_on,
    reorder_registers,
    embed_operator,
    measure,
    fidelity,
    max_entangled,
    basis_state,
)
from .protocols import (
    TruthTable,
    CommProtocol,
    MemorylessProtocol,
    run_exact,
    success_probability,
    builtin_qrac,
    random_protocol,
)
from .transforms import (
    to_single_qubit_rounds,
    memory_span_basis,
    to_memoryless,
)
from .teleport import (
    PbtResource,
    PbtMeasurement,
    build_resource,
    build_pbt_povm,
    teleport,
    teleport_branches,
    entanglement_fidelity,
    classical_cost,
)
from .remoteprep import (
    RspAttempt,
    RspBatch,
    rsp_povm,
    rsp_attempt,
    rsp_batch,
    abort_probability,
    index_cost_bits,
)
from .classicalcc import (
    CCQueryResult,
    best_success_one_way,
    best_success_tree,
    distributional_cc,
    build_cc_table,
    chernoff_repeats,
    majority_amplify,
    pumping_bound,
    pumping_inverse,
)
from .bell import (
    PortSchedule,
    CorrelationTable,
    OutcomePath,
    BellFunctional,
    BellReport,
    OneWayStats,
    NonlinearCheck,
    generate_correlations,
    simulate_with_classical_comm,
    build_linear_bell,
    bell_value,
    lhv_bound,
    lhv_strategies,
    lhv_table,
    violation_ratio,
    ratio_lower_bound,
    margin_ratio_lower_bound,
    asymptotic_ratio_one_way,
    asymptotic_ratio_two_way,
    one_way_correlations,
    nonlinear_bell_check,
    observation_bound,
    one_way_linear_bell,
)

__all__ = [
    "PbtResource",
    "PbtMeasurement",
    "build_resource",
    "build_pbt_povm",
    "teleport",
    "teleport_branches",
    "entanglement_fidelity",
    "classical_cost",
    "RspAttempt",
    "RspBatch",
    "rsp_povm",
    "rsp_attempt",
    "rsp_batch",
    "abort_probability",
    "index_cost_bits",
    "TruthTable",
    "CommProtocol",
    "MemorylessProtocol",
    "run_exact",
    "success_probability",
    "builtin_qrac",
    "random_protocol",
    "to_single_qubit_rounds",
    "memory_span_basis",
    "to_memoryless",
    "CCQueryResult",
    "best_success_one_way",
    "best_success_tree",
    "distributional_cc",
    "build_cc_table",
    "chernoff_repeats",
    "majority_amplify",
    "pumping_bound",
    "pumping_inverse",
    "PortSchedule",
    "CorrelationTable",
    "OutcomePath",
    "BellFunctional",
    "BellReport",
    "OneWayStats",
    "NonlinearCheck",
    "generate_correlations",
    "simulate_with_classical_comm",
    "build_linear_bell",
    "bell_value",
    "lhv_bound",
    "lhv_strategies",
    "lhv_table",
    "violation_ratio",
    "ratio_lower_bound",
    "margin_ratio_lower_bound",
    "asymptotic_ratio_one_way",
    "asymptotic_ratio_two_way",
    "one_way_correlations",
    "nonlinear_bell_check",
    "observation_bound",
    "one_way_linear_bell",
    "__version__",
    "ATOL_NORM",
    "ATOL_HERM",
    "ATOL_POVM",
    "ATOL_UNITARY",
    "MAX_TOTAL_DIM",
    "CapExceededError",
    "InvariantError",
    "RegisterLayout",
    "PureState",
    "MixedState",
    "Povm",
    "tensor",
    "partial_trace",
    "apply_on",
    "reorder_registers",
    "embed_operator",
    "measure",
    "fidelity",
    "max_entangled",
    "basis_state",
]
