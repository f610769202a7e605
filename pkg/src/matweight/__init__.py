"""Vector consensus on matrix-weighted directed networks."""
from .analysis import ConsensusVerdict, VerdictKind, classify
from .dynamics import Mode, RunTrace, StopRule, build_sync_operator, simulate
from .graph import MatrixWeightedGraph, gen_directed, gen_regular_ring, gen_rgg, structural_balance
from .weights import WeightMode, WeightPolicy, assign_weights, default_tau, step_size_upper

__version__ = "0.1.0"
