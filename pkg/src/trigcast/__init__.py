"""Trigger-based Byzantine-resilient broadcast for sparse networks: protocol,
simulator, reliable-set analysis and Monte Carlo estimation."""

from .analysis import (
    BLOCKING_PATTERNS,
    PlacementAnalysis,
    UnsafePlacement,
    analyze_placement,
    check_figure3_blocking,
    check_subgrid_reliability,
    exhaustive_neighborhood_check,
    fast_closure,
    is_safe,
    min_byzantine_distance,
    reliable_set_closure,
    verify_torus_theorem,
)
from .montecarlo import EstimateReport, TrialConfig, estimate, exact_probability, run_trial, sweep
from .placement import Placement
from .protocol import NodeState, ProtocolParams, Standard, Trigger
from .sim import ByzantineScript, Scheduler, check_safety, replay_theorem2_attack, run_execution
from .topology import (
    Topology,
    exists_bounded_correct_path,
    from_edges,
    hop_distance,
    load_topology,
    make_grid,
    make_torus,
    path_graph,
)

__version__ = "0.1.0"
