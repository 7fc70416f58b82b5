"""Heat diffusion on graphs and least-squares recovery of its sources."""

from .diffusion import (
    SourceConfig,
    TimeGrid,
    field_at,
    heat_kernel_weights,
    input_kernel_weights,
    simulate_field,
)
from .graph import (
    Graph,
    Spectrum,
    apply_graph_filter,
    build_laplacian,
    complete_graph,
    cycle_graph,
    eigendecompose,
    gft,
    igft,
    path_graph,
    random_connected_graph,
)
from .mesh import TriangleMesh, cotan_laplacian, default_plate, generate_plate_with_cavity
from .recovery import (
    RankDeficientError,
    RecoveryResult,
    identifiability_check,
    recover_external_input,
    recover_initial_field,
    recover_joint,
)
from .sampling import (
    IdentifiabilityError,
    ObservationOperator,
    VertexSelection,
    build_case1_operator,
    build_case2_operator,
    build_joint_operator,
    conditioning_report,
    greedy_sensor_selection,
    random_selection,
)

__version__ = "0.1.0"
