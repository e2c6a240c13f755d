"""Trace file format (tracegraph/1), import/export, and .dot rendering.

The wire format is a single UTF-8 JSON document. Canonical form pins a total
order on every array and a fixed key order inside every object, so equal graphs
export byte-equal documents regardless of construction history or platform:

  sessions    by first member ts_start (empty sessions last), then session_id
  operations  by ts_start, then op_id
  variables   by first-version ts, then var_id
  edges       by (dst ts, src ts), then op_id, then comment

Metadata maps are emitted with sorted keys. Numbers are decimal integers; the
format contains no floats. Compact separators, no trailing newline.
"""

from __future__ import annotations

import json
from typing import Any

from .errors import ParseError, StateError, ValidationError
from .graph import (
    DependencyEdge,
    ExecutionGraph,
    OperationRecord,
    Session,
    VariableChain,
    VariableVersion,
    validate,
)

FORMAT_VERSION = "tracegraph/1"

_INF = float("inf")


def _meta(d: dict[str, str]) -> dict[str, str]:
    return {k: d[k] for k in sorted(d)}


def _session_obj(s: Session) -> dict[str, Any]:
    return {
        "session_id": s.session_id,
        "label": s.label,
        "comment": s.comment,
        "metadata": _meta(s.metadata),
        "member_operation_ids": list(s.member_operation_ids),
    }


def _op_obj(o: OperationRecord) -> dict[str, Any]:
    return {
        "op_id": o.op_id,
        "session_id": o.session_id,
        "name": o.name,
        "category": o.category,
        "comment": o.comment,
        "metadata": _meta(o.metadata),
        "ts_start": o.ts_start,
        "ts_end": o.ts_end,
    }


def _var_obj(c: VariableChain) -> dict[str, Any]:
    return {
        "var_id": c.var_id,
        "identity_key": c.identity_key,
        "category": c.category,
        "versions": [
            {
                "version": v.version,
                "ts": v.ts,
                "value": v.value,
                "comment": v.comment,
                "metadata": _meta(v.metadata),
            }
            for v in c.versions
        ],
    }


def _edge_obj(e: DependencyEdge) -> dict[str, Any]:
    return {
        "src": [e.src[0], e.src[1]],
        "dst": [e.dst[0], e.dst[1]],
        "op_id": e.op_id,
        "comment": e.comment,
        "metadata": _meta(e.metadata),
    }


def export(graph: ExecutionGraph, canonical: bool = True) -> bytes:
    """Serialize a sealed graph. Canonical form is a byte-stable fixed point."""
    if not graph.sealed:
        raise StateError("cannot export an unsealed graph")
    sessions = list(graph.sessions)
    operations = list(graph.operations.values())
    variables = list(graph.variables.values())
    edges = list(graph.edges)
    if canonical:
        def session_key(s: Session):
            member_ts = [graph.operations[m].ts_start
                         for m in s.member_operation_ids if m in graph.operations]
            return (min(member_ts) if member_ts else _INF, s.session_id)

        sessions.sort(key=session_key)
        operations.sort(key=lambda o: (o.ts_start, o.op_id))
        variables.sort(key=lambda c: (c.versions[0].ts if c.versions else _INF, c.var_id))
        edges.sort(key=lambda e: (graph.version_ts(e.dst), graph.version_ts(e.src),
                                  e.op_id, e.comment))
    doc = {
        "format_version": FORMAT_VERSION,
        "graph_id": graph.graph_id,
        "metadata": _meta(graph.metadata),
        "sessions": [_session_obj(s) for s in sessions],
        "operations": [_op_obj(o) for o in operations],
        "variables": [_var_obj(c) for c in variables],
        "edges": [_edge_obj(e) for e in edges],
    }
    return json.dumps(doc, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ParseError(message, offset=None)


def _str_map(obj: Any, where: str) -> dict[str, str]:
    _require(isinstance(obj, dict), f"{where}: metadata must be an object")
    for k, v in obj.items():
        _require(isinstance(k, str) and isinstance(v, str),
                 f"{where}: metadata entries must be strings")
    return dict(obj)


def import_(data: bytes) -> ExecutionGraph:
    """Parse a trace document; the graph is validated and returned sealed."""
    try:
        doc = json.loads(data.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise ParseError(f"document is not UTF-8: {exc}", offset=exc.start) from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc.msg}", offset=exc.pos) from None

    _require(isinstance(doc, dict), "top level must be an object")
    _require(doc.get("format_version") == FORMAT_VERSION,
             f"unsupported format_version {doc.get('format_version')!r}")
    for key in ("graph_id", "metadata", "sessions", "operations", "variables", "edges"):
        _require(key in doc, f"missing top-level key {key!r}")
    _require(isinstance(doc["graph_id"], str), "graph_id must be a string")

    graph = ExecutionGraph(graph_id=doc["graph_id"],
                           metadata=_str_map(doc["metadata"], "graph"), sealed=True)
    max_ts = -1

    for s in doc["sessions"]:
        _require(isinstance(s, dict), "session entries must be objects")
        graph.sessions.append(Session(
            session_id=str(s["session_id"]), label=str(s.get("label", "")),
            comment=str(s.get("comment", "")),
            metadata=_str_map(s.get("metadata", {}), "session"),
            member_operation_ids=[str(m) for m in s.get("member_operation_ids", [])]))

    for o in doc["operations"]:
        _require(isinstance(o, dict), "operation entries must be objects")
        _require(isinstance(o.get("ts_start"), int) and isinstance(o.get("ts_end"), int),
                 "operation timestamps must be integers")
        op = OperationRecord(
            op_id=str(o["op_id"]), session_id=str(o["session_id"]), name=str(o.get("name", "")),
            category=str(o.get("category", "")), comment=str(o.get("comment", "")),
            metadata=_str_map(o.get("metadata", {}), "operation"),
            ts_start=o["ts_start"], ts_end=o["ts_end"])
        _require(op.op_id not in graph.operations, f"duplicate operation id {op.op_id!r}")
        graph.operations[op.op_id] = op
        max_ts = max(max_ts, op.ts_end, op.ts_start)

    for c in doc["variables"]:
        _require(isinstance(c, dict), "variable entries must be objects")
        chain = VariableChain(var_id=str(c["var_id"]), identity_key=str(c.get("identity_key", "")),
                              category=str(c.get("category", "")))
        for v in c.get("versions", []):
            _require(isinstance(v.get("version"), int) and isinstance(v.get("ts"), int),
                     "version numbers and timestamps must be integers")
            _require(isinstance(v.get("value"), str), "version values must be strings")
            chain.versions.append(VariableVersion(
                version=v["version"], ts=v["ts"], value=v["value"],
                comment=str(v.get("comment", "")),
                metadata=_str_map(v.get("metadata", {}), "version")))
            max_ts = max(max_ts, v["ts"])
        _require(chain.var_id not in graph.variables, f"duplicate variable id {chain.var_id!r}")
        graph.variables[chain.var_id] = chain

    for e in doc["edges"]:
        _require(isinstance(e, dict), "edge entries must be objects")
        src, dst = e.get("src"), e.get("dst")
        for name, ref in (("src", src), ("dst", dst)):
            _require(isinstance(ref, list) and len(ref) == 2
                     and isinstance(ref[0], str) and isinstance(ref[1], int),
                     f"edge {name} must be a [var_id, version] pair")
        graph.edges.append(DependencyEdge(
            src=(src[0], src[1]), dst=(dst[0], dst[1]), op_id=str(e["op_id"]),
            comment=str(e.get("comment", "")), metadata=_str_map(e.get("metadata", {}), "edge")))

    graph.clock = max_ts + 1
    report = validate(graph)
    if not report.ok:
        first = report.errors[0]
        raise ValidationError(first.message, first.code)
    return graph


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")


def export_dot(graph: ExecutionGraph, max_value_chars: int = 48) -> bytes:
    """Static visualization: variable versions as ellipses, operations as boxes.

    Each dependency edge is routed src -> op -> dst; duplicate segments collapse.
    """
    lines = ["digraph trace {", "  rankdir=LR;"]
    variables = sorted(graph.variables.values(),
                       key=lambda c: (c.versions[0].ts if c.versions else _INF, c.var_id))
    for chain in variables:
        for v in chain.versions:
            value = v.value
            if len(value) > max_value_chars:
                value = value[:max_value_chars] + "…"
            label = _dot_escape(f"{chain.var_id}#{v.version}\n[{chain.category}]\n{value}")
            lines.append(f'  "var:{chain.var_id}#{v.version}" [shape=ellipse label="{label}"];')
    for op in sorted(graph.operations.values(), key=lambda o: (o.ts_start, o.op_id)):
        label = _dot_escape(f"{op.op_id}\n{op.name} [{op.category}]")
        lines.append(f'  "op:{op.op_id}" [shape=box label="{label}"];')
    seen: set[str] = set()
    edges = sorted(graph.edges, key=lambda e: (graph.version_ts(e.dst), graph.version_ts(e.src),
                                               e.op_id, e.comment))
    for e in edges:
        for seg in (f'  "var:{e.src[0]}#{e.src[1]}" -> "op:{e.op_id}";',
                    f'  "op:{e.op_id}" -> "var:{e.dst[0]}#{e.dst[1]}";'):
            if seg not in seen:
                seen.add(seg)
                lines.append(seg)
    lines.append("}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def load(path: str) -> ExecutionGraph:
    with open(path, "rb") as fh:
        return import_(fh.read())


def save(graph: ExecutionGraph, path: str, canonical: bool = True) -> None:
    with open(path, "wb") as fh:
        fh.write(export(graph, canonical=canonical))
