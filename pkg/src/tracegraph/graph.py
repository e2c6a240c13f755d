"""In-memory execution graph: sessions, operations, versioned variables, dependency edges.

The graph is variable-to-variable edged; each edge stores the id of the operation
that induced it, so the bipartite variable/operation view is derived, never stored.
Acyclicity is enforced through logical timestamps: every edge's destination version
must carry a strictly greater timestamp than its source version.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .errors import NotFound

VarRef = tuple[str, int]  # (var_id, version)


@dataclass
class VariableVersion:
    """One immutable snapshot of a traced variable at a logical timestamp."""

    version: int
    ts: int
    value: str
    comment: str = ""
    metadata: dict[str, str] = field(default_factory=dict)


@dataclass
class VariableChain:
    var_id: str
    identity_key: str
    category: str
    versions: list[VariableVersion] = field(default_factory=list)

    def latest(self) -> VariableVersion:
        return self.versions[-1]

    def at(self, version: int) -> VariableVersion:
        for v in self.versions:
            if v.version == version:
                return v
        raise NotFound(f"variable {self.var_id!r} has no version {version}")


@dataclass
class OperationRecord:
    op_id: str
    session_id: str
    name: str
    category: str = ""
    comment: str = ""
    metadata: dict[str, str] = field(default_factory=dict)
    ts_start: int = 0
    ts_end: int = 0


@dataclass
class Session:
    session_id: str
    label: str
    comment: str = ""
    metadata: dict[str, str] = field(default_factory=dict)
    member_operation_ids: list[str] = field(default_factory=list)


@dataclass
class DependencyEdge:
    src: VarRef
    dst: VarRef
    op_id: str
    comment: str = ""
    metadata: dict[str, str] = field(default_factory=dict)


@dataclass
class Violation:
    code: str
    offender: str
    message: str
    severity: str = "error"  # "error" | "warning"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def errors(self) -> list[Violation]:
        return [v for v in self.violations if v.severity == "error"]

    @property
    def ok(self) -> bool:
        return not self.errors

    def __bool__(self) -> bool:
        return self.ok


@dataclass
class ExecutionGraph:
    """The full recorded trace of one program run."""

    graph_id: str = "trace"
    metadata: dict[str, str] = field(default_factory=dict)
    sessions: list[Session] = field(default_factory=list)
    operations: dict[str, OperationRecord] = field(default_factory=dict)
    variables: dict[str, VariableChain] = field(default_factory=dict)
    edges: list[DependencyEdge] = field(default_factory=list)
    clock: int = 0
    sealed: bool = True

    def variable(self, var_id: str) -> VariableChain:
        try:
            return self.variables[var_id]
        except KeyError:
            raise NotFound(f"unknown variable {var_id!r}") from None

    def version(self, var_id: str, version: int) -> VariableVersion:
        return self.variable(var_id).at(version)

    def operation(self, op_id: str) -> OperationRecord:
        try:
            return self.operations[op_id]
        except KeyError:
            raise NotFound(f"unknown operation {op_id!r}") from None

    def version_ts(self, ref: VarRef) -> int:
        return self.version(ref[0], ref[1]).ts


def _version_exists(graph: ExecutionGraph, ref: VarRef) -> bool:
    chain = graph.variables.get(ref[0])
    if chain is None:
        return False
    return any(v.version == ref[1] for v in chain.versions)


def validate(graph: ExecutionGraph) -> ValidationReport:
    """Check every structural invariant; violations are returned, never raised.

    Severity "error" breaks the graph contract; "warning" flags suspicious but
    permitted shapes (an operation that recorded no edges). Timestamp uniqueness
    is across owners: a version and an operation record may not share a tick,
    but one operation's own ts_start == ts_end is tolerated here (flagged only
    when it collides with another owner).
    """
    report = ValidationReport()
    add = report.violations.append

    session_ids = {s.session_id for s in graph.sessions}
    ts_owner: dict[int, str] = {}

    def claim(ts: int, owner: str) -> None:
        prev = ts_owner.get(ts)
        if prev is not None and prev != owner:
            add(Violation("DUPLICATE_TIMESTAMP", owner,
                          f"timestamp {ts} used by both {prev} and {owner}"))
        else:
            ts_owner[ts] = owner

    for chain in graph.variables.values():
        prev_ts = None
        for i, ver in enumerate(chain.versions):
            if ver.version != i:
                add(Violation("BAD_VERSION_SEQUENCE", chain.var_id,
                              f"version numbers of {chain.var_id!r} are not consecutive from 0"))
                break
            if prev_ts is not None and ver.ts <= prev_ts:
                add(Violation("BAD_VERSION_ORDER", chain.var_id,
                              f"versions of {chain.var_id!r} are not strictly increasing in ts"))
            prev_ts = ver.ts
            claim(ver.ts, f"var:{chain.var_id}#{ver.version}")

    for op in graph.operations.values():
        if op.ts_start > op.ts_end:
            add(Violation("BAD_INTERVAL", op.op_id,
                          f"operation {op.op_id!r} has ts_start > ts_end"))
        if op.session_id not in session_ids:
            add(Violation("MISSING_SESSION", op.op_id,
                          f"operation {op.op_id!r} references unknown session {op.session_id!r}"))
        claim(op.ts_start, f"op:{op.op_id}")
        claim(op.ts_end, f"op:{op.op_id}")

    for sess in graph.sessions:
        seen: set[str] = set()
        for member in sess.member_operation_ids:
            if member in seen:
                add(Violation("SESSION_MEMBER_DUPLICATE", sess.session_id,
                              f"session {sess.session_id!r} lists {member!r} twice"))
            seen.add(member)
            if member not in graph.operations:
                add(Violation("SESSION_MEMBER_MISSING", sess.session_id,
                              f"session {sess.session_id!r} lists unknown operation {member!r}"))
            elif graph.operations[member].session_id != sess.session_id:
                add(Violation("SESSION_MISMATCH", member,
                              f"operation {member!r} is listed by session {sess.session_id!r} "
                              f"but belongs to {graph.operations[member].session_id!r}"))

    ops_with_edges: set[str] = set()
    for i, edge in enumerate(graph.edges):
        ident = f"edge[{i}]"
        missing = False
        for end, ref in (("src", edge.src), ("dst", edge.dst)):
            if not _version_exists(graph, ref):
                add(Violation("MISSING_ENDPOINT", ident,
                              f"{ident} {end} {ref[0]}#{ref[1]} does not exist"))
                missing = True
        if edge.op_id not in graph.operations:
            add(Violation("MISSING_OPERATION", ident,
                          f"{ident} references unknown operation {edge.op_id!r}"))
        else:
            ops_with_edges.add(edge.op_id)
        if edge.src == edge.dst:
            add(Violation("SELF_EDGE", ident, f"{ident} has identical src and dst"))
        elif not missing:
            if graph.version_ts(edge.dst) <= graph.version_ts(edge.src):
                add(Violation("CYCLE_RISK", ident,
                              f"{ident} destination ts is not greater than source ts"))

    for op_id in sorted(graph.operations):
        if op_id not in ops_with_edges:
            add(Violation("EMPTY_OPERATION", op_id,
                          f"operation {op_id!r} recorded no edges", severity="warning"))

    return report


def inputs_of(graph: ExecutionGraph, op_id: str) -> list[VarRef]:
    """Sources of all edges labeled ``op_id``, deduplicated and sorted by (var_id, version)."""
    graph.operation(op_id)
    return sorted({e.src for e in graph.edges if e.op_id == op_id})


def outputs_of(graph: ExecutionGraph, op_id: str) -> list[VarRef]:
    """Destinations of all edges labeled ``op_id``, deduplicated and sorted."""
    graph.operation(op_id)
    return sorted({e.dst for e in graph.edges if e.op_id == op_id})


def ops_involving(graph: ExecutionGraph, var_id: str,
                  version: Optional[int] = None) -> list[str]:
    """All operations with the variable (one version, or any) among their inputs or outputs.

    Ordered by ts_start ascending, ties by op_id.
    """
    graph.variable(var_id)
    hits: set[str] = set()
    for e in graph.edges:
        for ref in (e.src, e.dst):
            if ref[0] == var_id and (version is None or ref[1] == version):
                hits.add(e.op_id)
    return sorted(hits, key=lambda o: (graph.operations[o].ts_start, o))


def _op_adjacency(graph: ExecutionGraph) -> tuple[dict[str, set[str]], dict[str, set[str]]]:
    """Operation-level succession: a precedes b iff some output of a is an input of b."""
    producers: dict[VarRef, set[str]] = {}
    consumers: dict[VarRef, set[str]] = {}
    for e in graph.edges:
        producers.setdefault(e.dst, set()).add(e.op_id)
        consumers.setdefault(e.src, set()).add(e.op_id)
    succ: dict[str, set[str]] = {op: set() for op in graph.operations}
    pred: dict[str, set[str]] = {op: set() for op in graph.operations}
    for ref, prods in producers.items():
        for p in prods:
            for c in consumers.get(ref, ()):
                succ[p].add(c)
                pred[c].add(p)
    return succ, pred


def _closure(adj: dict[str, set[str]], roots: Iterable[str]) -> set[str]:
    roots = set(roots)
    seen: set[str] = set()
    queue = deque(roots)
    while queue:
        cur = queue.popleft()
        for nxt in adj[cur]:
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen - roots


def op_ancestors(graph: ExecutionGraph, op_set: Iterable[str]) -> set[str]:
    """Strictly upstream operations, transitively closed; disjoint from ``op_set``."""
    ops = set(op_set)
    for o in ops:
        graph.operation(o)
    _, pred = _op_adjacency(graph)
    return _closure(pred, ops)


def op_descendants(graph: ExecutionGraph, op_set: Iterable[str]) -> set[str]:
    """Strictly downstream operations, transitively closed; disjoint from ``op_set``."""
    ops = set(op_set)
    for o in ops:
        graph.operation(o)
    succ, _ = _op_adjacency(graph)
    return _closure(succ, ops)
