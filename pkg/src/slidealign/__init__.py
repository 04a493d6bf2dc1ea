"""Sliding-window, beam-pruned alignment of long traces against Petri-net process models."""

__version__ = "0.1.0"

from .alignment import (
    Alignment,
    CostProfile,
    Move,
    MoveKind,
    SyncState,
    astar_optimal_alignment,
    move_cost,
    partial_alignments,
    successors,
)
from .errors import (
    BudgetExceeded,
    GenerationFailed,
    MalformedInput,
    MissingColumn,
    NoGoalFound,
    Unreachable,
    WindowLengthZero,
)
from .event_log import EventLog, SubtraceView, Trace, parse_csv, parse_xes, split_trace, suffix_frequencies
from .petri_net import (
    Marking,
    ProcessNet,
    Transition,
    build_reachability_graph,
    enabled_transitions,
    fire,
    loop_fixture,
    reachable_label_sets,
)
from .pnml import parse_pnml, read_pnml
from .sliding_window import (
    ConformanceResult,
    WindowConfig,
    compare_with_oracle,
    marginal_cost_lower_bound,
    prepare_model,
    window_conformance,
)
