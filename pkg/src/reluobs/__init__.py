"""Local observability of two-layer ReLU networks: rank checks, input design, neighborhoods."""

__version__ = "0.1.0"

from .exceptions import (  # noqa: E402
    BudgetExhaustedError,
    ConfigError,
    DesignError,
    DimensionError,
    FactorizationError,
    GridCapError,
    KinkProximityError,
    RankDeficientError,
    ReluObsError,
    SingularWeightsError,
)
from .fnn import (  # noqa: E402
    InputSequence,
    WeightState,
    forward,
    indicator,
    output_sequence,
    relu,
    relu_derivative,
)
from .input_design import (  # noqa: E402
    DesignTemplate,
    canonical_B,
    design_input,
    sample_B,
    sample_T,
    validate_template,
)
from .neighborhood import (  # noqa: E402
    NeighborSample,
    compute_delta,
    generate_neighborhood,
    sample_K,
    sample_consistent_K,
    verify_neighbor,
)
from .observability import (  # noqa: E402
    JacobianBundle,
    jacobian,
    jacobian_fd_check,
    numerical_rank,
    rank_condition,
)
from .oracle import (  # noqa: E402
    SweepGrid,
    example1_oracle,
    pattern_census,
    sweep_distinguish,
)
