"""Sequential and distributed primal-dual algorithms for covering and packing.

The package covers weighted vertex cover, covering integer programs with
upper bounds and integrality, and covering with separable monotone costs,
together with the dual packing each algorithm certifies itself with.
Everything runs on a deterministic, seeded round simulator.
"""

from .cover import (
    InfeasibleInstanceError,
    StepLog,
    StepRecord,
    phi,
    round_assignment,
    sequential_cover,
    step,
    stepsize_cmip,
)
from .costs import LinearCost, PowerCost, SeparableCost
from .estimators import (
    DistributedCMIP2,
    DistributedPacking2,
    DistributedPackingGeneral,
    DistributedSubmodularCover,
    DistributedWeightedVertexCover,
    FractionalPacking,
    SequentialCover,
)
from .experiment import ExperimentSpec, run_experiment, scaling_table
from .instances import (
    CoveringInstance,
    PackingInstance,
    from_rows,
    gen_cmip,
    gen_cmip2,
    gen_fractional,
    gen_hypergraph_bmatching,
    gen_wvc,
    read_instance,
    validate,
    write_instance,
)
from .oracles import distance_oracle, exact_bmatching, exact_vertex_cover
from .poset import build_poset, random_linear_extension, sequential_pack, verify_ratio
from .simulator import Network, run

__version__ = "0.1.0"

__all__ = [
    "CoveringInstance",
    "DistributedCMIP2",
    "DistributedPacking2",
    "DistributedPackingGeneral",
    "DistributedSubmodularCover",
    "DistributedWeightedVertexCover",
    "ExperimentSpec",
    "FractionalPacking",
    "InfeasibleInstanceError",
    "LinearCost",
    "Network",
    "PackingInstance",
    "PowerCost",
    "SeparableCost",
    "SequentialCover",
    "StepLog",
    "StepRecord",
    "build_poset",
    "distance_oracle",
    "exact_bmatching",
    "exact_vertex_cover",
    "from_rows",
    "gen_cmip",
    "gen_cmip2",
    "gen_fractional",
    "gen_hypergraph_bmatching",
    "gen_wvc",
    "phi",
    "random_linear_extension",
    "read_instance",
    "round_assignment",
    "run",
    "run_experiment",
    "scaling_table",
    "sequential_cover",
    "sequential_pack",
    "step",
    "stepsize_cmip",
    "validate",
    "verify_ratio",
    "write_instance",
]
