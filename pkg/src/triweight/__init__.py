"""Factor-graph optimization with three-weight message passing.

Public surface:

- graph_core: the mutable factor graph, edge state, and graph edits.
- twa_engine: the iteration engine, reasoner hooks, and message algebra.
- sudoku: puzzle encoding, propagation and pruning reasoners, solver.
- rtree: incremental bounding-box index for spatial constraint upkeep.
- packing: circle packing factors, dynamic constraint maintenance,
  steering reasoners.
- cli: the `twa` command line entry point.
- steer_service: live steering of a packing run over a socket.
"""

from .errors import (
    CertaintyConflict,
    DecodeError,
    Inconsistent,
    InfeasibleCertainty,
    InfeasibleRadius,
    InvalidPuzzle,
    KindMismatch,
    MultipleSolutions,
    NoSolution,
    NotYetConcurred,
    PortInUse,
    PuzzleSyntaxError,
    TriweightError,
    UnknownCircle,
    UnknownId,
    Unsolved,
)
from .graph_core import (
    AddEdge,
    AddFactor,
    AddVariable,
    EdgeState,
    EditReport,
    FactorGraph,
    FactorNode,
    RemoveEdge,
    RemoveFactor,
    Reparameterize,
    VariableNode,
    Weight,
)
from .twa_engine import (
    EngineConfig,
    GlobalContext,
    GlobalReasoner,
    IterationStatus,
    LocalReasoner,
    LocalView,
    concur_variable,
    minimize_factor,
    run,
    schedule,
    update_edge,
)

__version__ = "0.1.0"

__all__ = [
    "AddEdge",
    "AddFactor",
    "AddVariable",
    "CertaintyConflict",
    "DecodeError",
    "EdgeState",
    "EditReport",
    "EngineConfig",
    "FactorGraph",
    "FactorNode",
    "GlobalContext",
    "GlobalReasoner",
    "Inconsistent",
    "InfeasibleCertainty",
    "InfeasibleRadius",
    "InvalidPuzzle",
    "IterationStatus",
    "KindMismatch",
    "LocalReasoner",
    "LocalView",
    "MultipleSolutions",
    "NoSolution",
    "NotYetConcurred",
    "PortInUse",
    "PuzzleSyntaxError",
    "RemoveEdge",
    "RemoveFactor",
    "Reparameterize",
    "TriweightError",
    "UnknownCircle",
    "UnknownId",
    "Unsolved",
    "VariableNode",
    "Weight",
    "concur_variable",
    "minimize_factor",
    "run",
    "schedule",
    "update_edge",
]
