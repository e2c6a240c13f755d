"""tracegraph: record program executions as versioned operation-variable graphs
and automatically localize the earliest decisive faulty operation."""

from .attribution import (
    DECISIVE_ERROR_CRITERION,
    ERROR_TYPES,
    SYSTEM_ERROR_TYPES,
    brute_force_decisive_sets,
    check_candidate,
    score,
    singleton_decisive,
)
from .errors import (
    BackendError,
    ConfigError,
    NoFault,
    NotFound,
    NotSequential,
    ParseError,
    ProtocolError,
    RangeError,
    RunError,
    StateError,
    ToolError,
    TooLarge,
    TraceGraphError,
    ValidationError,
)
from .explorer import (
    AttributionResult,
    ExploreConfig,
    manage_context,
    render_operation_subgraph,
    run_attribution,
)
from .graph import (
    DependencyEdge,
    ExecutionGraph,
    OperationRecord,
    Session,
    ValidationReport,
    VariableChain,
    VariableVersion,
    inputs_of,
    op_ancestors,
    op_descendants,
    ops_involving,
    outputs_of,
    validate,
)
from .llm import Backend, ChatTurn, CostMeter, HttpBackend, ScriptedBackend, estimate_tokens
from .oplog import build_log, run_attribution_obs, search_operations
from .persist import export, export_dot, import_, load, save
from .recorder import IdentityStrategy, TraceContext, VarConfig
from .retrieval import (
    Corpus,
    HashingEmbedder,
    bm25_rank,
    dense_rank,
    recall_at_k,
    rrf_fuse,
    seed_exploration,
    tokenize,
)

__version__ = "0.1.0"
