"""Solvers and analysis tools for games played on a player hierarchy.

The package revolves around one object shape: a *game* is a ``(tree,
oracle)`` pair — a :class:`~hiergames.core.GameTree` describing who sits
above whom and how actions are boxed, plus a
:class:`~hiergames.core.UtilityOracle` scoring profiles.  Everything else
consumes that pair:

* :mod:`hiergames.dbi` — the hierarchical total-gradient solver;
* :mod:`hiergames.fields` — one-shot baseline gradient dynamics;
* :mod:`hiergames.brd` — grid best response: solving and regret scoring;
* :mod:`hiergames.diff` — the response-derivative machinery underneath;
* :mod:`hiergames.analysis` — stability and local-equilibrium tests;
* :mod:`hiergames.games` — built-in game families;
* :mod:`hiergames.cli` — the batch front end (``hiergames run/compare``).
"""

from importlib.metadata import PackageNotFoundError, version as _version

from . import games
from .analysis import (
    LspeReport,
    PropertyStudy,
    StabilityReport,
    check_lspe,
    classify_lasp,
    max_stable_lr,
    measure_properties,
)
from .brd import (
    BRDConfig,
    BRDResult,
    BRDSolver,
    Grid,
    RegretReport,
    SearchOutcome,
    brd_solve,
    compute_eps,
    local_regret,
    search,
)
from .core import (
    ActionProfile,
    FunctionOracle,
    GameTree,
    UtilityOracle,
    as_profile,
    build_tree,
    check_game,
    load_game,
    project,
    rng_from,
)
from .dbi import (
    DBISolver,
    SolverConfig,
    Trace,
    TraceEntry,
    dbi_field,
    dbi_solve,
    dbi_step,
    field_function,
)
from .diff import (
    LeafJacobian,
    TotalGradient,
    backprop_leaf_jacobian,
    local_response_jacobian,
    total_grad,
    total_hessian,
)
from .errors import (
    BadNetworkFile,
    BadPartition,
    ConfigError,
    DependencyViolation,
    EmptyLevel,
    HierGameError,
    InvalidParams,
    InvalidWeights,
    MalformedTree,
    NotLasp,
    NotStationary,
    SingularHessian,
    UnknownPlayer,
)
from .fields import (
    FIELD_KINDS,
    FieldDynamics,
    field_co,
    field_ham,
    field_jacobian,
    field_sim,
    field_sym,
    iterate_field,
    make_field,
)
from .games import GAME_KINDS, from_definition

try:
    __version__ = _version("hiergames")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0+unknown"

__all__ = [
    "__version__",
    "games",
    # core
    "GameTree",
    "ActionProfile",
    "UtilityOracle",
    "FunctionOracle",
    "build_tree",
    "check_game",
    "load_game",
    "as_profile",
    "project",
    "rng_from",
    # derivatives
    "LeafJacobian",
    "TotalGradient",
    "local_response_jacobian",
    "backprop_leaf_jacobian",
    "total_grad",
    "total_hessian",
    # hierarchical solver
    "SolverConfig",
    "Trace",
    "TraceEntry",
    "dbi_field",
    "field_function",
    "dbi_step",
    "dbi_solve",
    "DBISolver",
    # baseline fields
    "FIELD_KINDS",
    "field_sim",
    "field_jacobian",
    "field_sym",
    "field_ham",
    "field_co",
    "make_field",
    "iterate_field",
    "FieldDynamics",
    # best response
    "Grid",
    "BRDConfig",
    "BRDResult",
    "RegretReport",
    "SearchOutcome",
    "search",
    "compute_eps",
    "brd_solve",
    "local_regret",
    "BRDSolver",
    # analysis
    "StabilityReport",
    "LspeReport",
    "PropertyStudy",
    "classify_lasp",
    "max_stable_lr",
    "check_lspe",
    "measure_properties",
    # game registry
    "GAME_KINDS",
    "from_definition",
    # errors
    "HierGameError",
    "MalformedTree",
    "EmptyLevel",
    "UnknownPlayer",
    "DependencyViolation",
    "SingularHessian",
    "NotStationary",
    "NotLasp",
    "InvalidWeights",
    "InvalidParams",
    "BadNetworkFile",
    "BadPartition",
    "ConfigError",
]
