"""Instrumentation API: programs call this to build an ExecutionGraph.

Recording is explicit: the instrumenter marks session and operation boundaries,
registers variable snapshots, and links dependencies. Values are always stored
as UTF-8 text via a named renderer; a named identity strategy decides when two
snapshots belong to the same variable chain (in-place update semantics).

Ids are deterministic: sessions are s0, s1, ...; operations o0, o1, ... unless
an explicit id is supplied; variable ids are the sanitized identity key, with a
numeric suffix when two distinct keys sanitize to the same id. Determinism here
is what makes canonical exports reproducible across runs and implementations.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Union

from .errors import ConfigError, StateError, ValidationError
from .graph import (
    DependencyEdge,
    ExecutionGraph,
    OperationRecord,
    Session,
    VariableChain,
    VariableVersion,
    VarRef,
    validate,
)

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a64(text: str) -> int:
    """64-bit FNV-1a over the UTF-8 encoding of ``text``."""
    h = FNV_OFFSET
    for b in text.encode("utf-8"):
        h = ((h ^ b) * FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def render_kv(value: Any) -> str:
    """Render a flat string-valued mapping as sorted ``key=value`` lines."""
    if not isinstance(value, dict):
        raise ConfigError("kv renderer requires a mapping snapshot")
    lines = []
    for k in sorted(value):
        v = value[k]
        if not isinstance(v, str):
            raise ConfigError(f"kv renderer requires string values (field {k!r})")
        lines.append(f"{k}={v}")
    return "\n".join(lines)


def _renderer(name: str) -> Callable[[Any], str]:
    if name == "text":
        def text_render(value: Any) -> str:
            if not isinstance(value, str):
                raise ConfigError("text renderer requires a str snapshot")
            return value
        return text_render
    if name == "kv":
        return render_kv
    if name.startswith("field:"):
        fname = name.split(":", 1)[1]

        def field_render(value: Any) -> str:
            if not isinstance(value, dict) or fname not in value:
                raise ConfigError(f"field renderer: snapshot has no field {fname!r}")
            out = value[fname]
            if not isinstance(out, str):
                raise ConfigError(f"field renderer: field {fname!r} is not a string")
            return out
        return field_render
    raise ConfigError(f"unknown renderer {name!r}")


@dataclass
class IdentityStrategy:
    """Names a pure key function deciding which chain a snapshot belongs to.

    The function receives both the raw snapshot value and its rendered text;
    built-in strategies only read the rendering, custom ones may use either.
    """

    name: str
    key_fn: Callable[[Any, str], str]


def _builtin_strategy(name: str) -> Optional[IdentityStrategy]:
    if name == "by-render":
        return IdentityStrategy("by-render", lambda value, text: f"fnv1a64:{fnv1a64(text):016x}")
    if name == "mem0-dict":
        name = "by-field:id"
    if name.startswith("by-field:"):
        fname = name.split(":", 1)[1]

        def by_field(value: Any, text: str) -> str:
            for line in text.split("\n"):
                if line.startswith(fname + "="):
                    return line[len(fname) + 1:]
            raise ConfigError(f"identity by-field:{fname}: rendering has no {fname}= line")
        return IdentityStrategy(name, by_field)
    return None


@dataclass
class VarConfig:
    category: str = ""
    comment: str = ""
    metadata: dict[str, str] = field(default_factory=dict)
    identity: str = "by-render"
    renderer: str = "text"


_ID_SAFE = re.compile(r"[^A-Za-z0-9_.-]")

Endpoint = Union[VarRef, tuple[Any, VarConfig]]


class TraceContext:
    """One in-progress recording; single-threaded, sealed by ``finish``."""

    def __init__(self, graph_id: str = "trace", metadata: Optional[dict[str, str]] = None):
        self.graph = ExecutionGraph(graph_id=graph_id, metadata=dict(metadata or {}),
                                    clock=0, sealed=False)
        self._active_session: Optional[Session] = None
        self._active_op: Optional[OperationRecord] = None
        self._strategies: dict[str, IdentityStrategy] = {}
        self._key_to_var: dict[str, str] = {}
        self._finished = False
        self._session_count = 0
        self._op_count = 0

    # -- clock and id helpers ------------------------------------------------

    def _tick(self) -> int:
        ts = self.graph.clock
        self.graph.clock += 1
        return ts

    def _check_open(self) -> None:
        if self._finished:
            raise StateError("context already finished; graph is sealed")

    def _var_id_for_key(self, key: str) -> str:
        base = _ID_SAFE.sub("_", key) or "v"
        candidate = base
        n = 1
        while candidate in self.graph.variables:
            n += 1
            candidate = f"{base}_{n}"
        return candidate

    # -- sessions and operations ----------------------------------------------

    def begin_session(self, label: str, comment: str = "",
                      metadata: Optional[dict[str, str]] = None,
                      session_id: Optional[str] = None) -> str:
        self._check_open()
        if self._active_op is not None:
            raise StateError("cannot begin a session while an operation is active")
        sid = session_id if session_id is not None else f"s{self._session_count}"
        if any(s.session_id == sid for s in self.graph.sessions):
            raise ConfigError(f"duplicate session id {sid!r}")
        self._session_count += 1
        sess = Session(session_id=sid, label=label, comment=comment,
                       metadata=dict(metadata or {}))
        self.graph.sessions.append(sess)
        self._active_session = sess
        return sid

    def end_session(self) -> None:
        self._check_open()
        if self._active_session is None:
            raise StateError("no active session to end")
        if self._active_op is not None:
            raise StateError("cannot end a session while an operation is active")
        self._active_session = None

    def begin_operation(self, name: str, category: str = "", comment: str = "",
                        metadata: Optional[dict[str, str]] = None,
                        op_id: Optional[str] = None) -> str:
        self._check_open()
        if self._active_session is None:
            raise StateError("begin_operation requires an active session")
        if self._active_op is not None:
            raise StateError("operations do not nest; end the active operation first")
        oid = op_id if op_id is not None else f"o{self._op_count}"
        if oid in self.graph.operations:
            raise ConfigError(f"duplicate operation id {oid!r}")
        self._op_count += 1
        op = OperationRecord(op_id=oid, session_id=self._active_session.session_id,
                             name=name, category=category, comment=comment,
                             metadata=dict(metadata or {}), ts_start=self._tick())
        self.graph.operations[oid] = op
        self._active_session.member_operation_ids.append(oid)
        self._active_op = op
        return oid

    def end_operation(self) -> None:
        self._check_open()
        if self._active_op is None:
            raise StateError("no active operation to end")
        self._active_op.ts_end = self._tick()
        self._active_op = None

    # -- variables and links ---------------------------------------------------

    def register_identity(self, strategy: IdentityStrategy) -> None:
        self._check_open()
        if strategy.name in self._strategies or _builtin_strategy(strategy.name) is not None:
            raise ConfigError(f"identity strategy {strategy.name!r} is already registered")
        self._strategies[strategy.name] = strategy

    def _strategy(self, name: str) -> IdentityStrategy:
        if name in self._strategies:
            return self._strategies[name]
        built = _builtin_strategy(name)
        if built is None:
            raise ConfigError(f"unregistered identity strategy {name!r}")
        return built

    def comment_variable(self, snapshot: Any, config: VarConfig) -> VarRef:
        """Record a snapshot; same identity key appends a new version of the chain."""
        self._check_open()
        text = _renderer(config.renderer)(snapshot)
        key = self._strategy(config.identity).key_fn(snapshot, text)
        var_id = self._key_to_var.get(key)
        if var_id is None:
            var_id = self._var_id_for_key(key)
            self._key_to_var[key] = var_id
            self.graph.variables[var_id] = VariableChain(
                var_id=var_id, identity_key=key, category=config.category)
        chain = self.graph.variables[var_id]
        ver = VariableVersion(version=len(chain.versions), ts=self._tick(), value=text,
                              comment=config.comment, metadata=dict(config.metadata))
        chain.versions.append(ver)
        return (var_id, ver.version)

    def _materialize(self, endpoint: Endpoint) -> VarRef:
        if (isinstance(endpoint, tuple) and len(endpoint) == 2
                and isinstance(endpoint[0], str) and isinstance(endpoint[1], int)):
            ref: VarRef = endpoint  # type: ignore[assignment]
            self.graph.version(ref[0], ref[1])  # raises NotFound on bad handles
            return ref
        if isinstance(endpoint, tuple) and len(endpoint) == 2 and isinstance(endpoint[1], VarConfig):
            return self.comment_variable(endpoint[0], endpoint[1])
        raise ConfigError("endpoint must be a (var_id, version) handle or a (snapshot, VarConfig) pair")

    def _reversion(self, ref: VarRef) -> VarRef:
        """Append a fresh version carrying the referenced snapshot; keeps edges acyclic."""
        chain = self.graph.variable(ref[0])
        old = chain.at(ref[1])
        ver = VariableVersion(version=len(chain.versions), ts=self._tick(), value=old.value,
                              comment=old.comment, metadata=dict(old.metadata))
        chain.versions.append(ver)
        return (chain.var_id, ver.version)

    def comment_link(self, source: Endpoint, target: Endpoint, comment: str = "",
                     metadata: Optional[dict[str, str]] = None) -> DependencyEdge:
        """Record a dependency edge under the active operation.

        Snapshot endpoints are materialized first (source before target). If the
        target version does not strictly postdate the source, the target chain is
        re-versioned so the edge satisfies the timestamp ordering invariant.
        """
        self._check_open()
        if self._active_op is None:
            raise StateError("comment_link requires an active operation")
        src = self._materialize(source)
        dst = self._materialize(target)
        if self.graph.version_ts(dst) <= self.graph.version_ts(src):
            dst = self._reversion(dst)
        edge = DependencyEdge(src=src, dst=dst, op_id=self._active_op.op_id,
                              comment=comment, metadata=dict(metadata or {}))
        self.graph.edges.append(edge)
        return edge

    # -- finalization -----------------------------------------------------------

    def finish(self) -> ExecutionGraph:
        """Seal and return the graph; it is guaranteed validate-clean."""
        self._check_open()
        if self._active_op is not None:
            raise StateError("cannot finish while an operation is active")
        self._active_session = None
        self._finished = True
        self.graph.sealed = True
        report = validate(self.graph)
        if not report.ok:
            first = report.errors[0]
            raise ValidationError(f"recorder produced an invalid graph: {first.message}", first.code)
        return self.graph
