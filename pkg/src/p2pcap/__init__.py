"""Capacity solvers for peer-to-peer overlays.

The package answers two questions about an overlay whose nodes have an
upload capacity and a demand:

* how much of the total demand can be served when every node always has
  data to forward (stationary regime) -- solved exactly through a max-flow
  reduction (:mod:`p2pcap.sra`);
* how many nodes can be reached by K source-rooted distribution trees when
  a node may forward data only after receiving it -- exact solvers in
  :mod:`p2pcap.dcda` / :mod:`p2pcap.benders` and polynomial heuristics in
  :mod:`p2pcap.heuristics`.

:mod:`p2pcap.bench` runs seeded experiment batteries over generated
overlays; the ``p2pcap`` command line exposes everything.
"""

from .overlay import (
    InstanceFormatError,
    OverlayGraph,
    assign_capacities,
    assign_demands,
    build_knn_overlay,
    overlay_from_edges,
    read_instance,
    read_latency_matrix,
    synth_latency_matrix,
    write_instance,
    write_latency_matrix,
)
from .sra import (
    Allocation,
    FlowNetwork,
    FlowResult,
    SraOutcome,
    build_flow_network,
    extract_allocation,
    max_flow,
    min_cut,
    sra_decide,
)
from .dcda import (
    DcdaInstance,
    ExactResult,
    Forest,
    InvalidForestError,
    SizeLimitError,
    allocation_ratio,
    branch_and_bound,
    brute_force,
    parse_dimacs,
    sat_to_dcda,
    score_forest,
    validate_forest,
)
from .benders import (
    BMatchInstance,
    BMatchResult,
    b_matching_feasible,
    levels_to_forest,
    solve_p1_benders,
)
from .heuristics import genetic, greedy, prefixed_variant, random_variant, split_capacity
from .bench import (
    ExperimentConfig,
    ExperimentReport,
    ResultRow,
    build_instance,
    emit_csv,
    parse_config_file,
    run_battery,
)

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "BMatchInstance",
    "BMatchResult",
    "DcdaInstance",
    "ExactResult",
    "ExperimentConfig",
    "ExperimentReport",
    "FlowNetwork",
    "FlowResult",
    "Forest",
    "InstanceFormatError",
    "InvalidForestError",
    "OverlayGraph",
    "ResultRow",
    "SizeLimitError",
    "SraOutcome",
    "allocation_ratio",
    "assign_capacities",
    "assign_demands",
    "b_matching_feasible",
    "branch_and_bound",
    "brute_force",
    "build_flow_network",
    "build_instance",
    "build_knn_overlay",
    "emit_csv",
    "extract_allocation",
    "genetic",
    "greedy",
    "levels_to_forest",
    "max_flow",
    "min_cut",
    "overlay_from_edges",
    "parse_config_file",
    "parse_dimacs",
    "prefixed_variant",
    "random_variant",
    "read_instance",
    "read_latency_matrix",
    "run_battery",
    "sat_to_dcda",
    "score_forest",
    "solve_p1_benders",
    "split_capacity",
    "sra_decide",
    "synth_latency_matrix",
    "validate_forest",
    "write_instance",
    "write_latency_matrix",
]
