"""crptune: tuning and simulation of tree-based contention resolution.

The pipeline: model the number of contending stations as a generating
function (distributions), tune a probability tree whose interval
partition maximizes the single-winner probability (tree, optimizer),
check the tree analytically and by Monte Carlo (crp), then race it
against classic MAC protocols under saturation (macsim).
"""

from .crp import (
    CrpOutcome,
    SurvivorDistribution,
    collision_rate_fixed_n,
    mc_collision_rate,
    mixture_collision_rate,
    run_crp,
    survivor_distribution,
    winner_histogram,
)
from .distributions import (
    Polynomial,
    StationDistribution,
    gf_from_distribution,
    make_power_law,
)
from .macsim import (
    PROTOCOL_KINDS,
    PhyTimings,
    ProtocolConfig,
    SimResult,
    jain_index,
    packet_airtime,
    simulate,
)
from .optimizer import (
    DEFAULT_GRID_SIZE,
    DegeneratePartitionError,
    RootNotFoundError,
    TuningReport,
    asymptotic_collision,
    dp_optimal_partition,
    lower_bound_collision,
    lower_bound_details,
    quantile_partition,
    rho_by_pieces,
    single_step_optimum,
    sqrt_curvature_integral,
    success_probability,
    tune,
)
from .tree import (
    CONTI_LEVEL_PROBS,
    Partition,
    ProbabilityTree,
    Word,
    conti_tree,
    tree_from_levels,
    uniform_tree,
)

__version__ = "0.1.0"
