"""Operation-log compilation and global search attribution (the obs method).

The graph is flattened into timestamp-ordered textual operation blocks. Blocks
keep operation attributes and variable snapshots but drop dependency edges and
variable identifiers, which collapses high-fanout neighborhoods into compact
text. The agent then localizes faults with a global regex search instead of
walking dependency edges.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .errors import RangeError, ToolError
from .explorer import (
    AttributionResult,
    ExploreConfig,
    WorkingContext,
    _agent_loop,
    _paginate,
    build_system_turn,
)
from .graph import ExecutionGraph, VarRef, inputs_of, outputs_of
from .llm import Backend, ChatTurn, CostMeter, ToolCall

SEPARATOR = "===== OPERATION BLOCK ====="
DEFAULT_SEARCH_LIMIT = 8

OBS_TOOLS: list[dict] = [
    {"name": "search_operations", "args": {"regex": "pattern", "limit": "max blocks"},
     "description": "return operation blocks whose text matches the regex, in timestamp order"},
    {"name": "view_block", "args": {"index": "block index", "page": "page index"},
     "description": "read one page of an operation block"},
    {"name": "report_fault", "args": {"op": "op_id", "error_type": "type", "explanation": "why"},
     "description": "terminate with the decisive faulty operation"},
]


@dataclass
class OperationBlock:
    block_index: int
    op_id: str
    text: str


@dataclass
class OperationLog:
    blocks: list[OperationBlock]
    separator: str = SEPARATOR

    def full_text(self) -> str:
        return "".join(f"{self.separator}\n{b.text}\n" for b in self.blocks)


def _block_text(graph: ExecutionGraph, op_id: str) -> str:
    """One block: HEADER, INPUTS, OUTPUTS, INTERMEDIATES; snapshots without ids.

    A chain appearing on both sides of the operation is an intermediate: its
    consumed snapshot and produced snapshot are shown as a before/after pair.
    """
    op = graph.operations[op_id]
    ins = inputs_of(graph, op_id)
    outs = outputs_of(graph, op_id)
    in_chains = {r[0] for r in ins}
    out_chains = {r[0] for r in outs}
    through = in_chains & out_chains
    pure_ins = [r for r in ins if r[0] not in through]
    pure_outs = [r for r in outs if r[0] not in through]

    def snapshot(ref: VarRef) -> list[str]:
        chain = graph.variable(ref[0])
        return [f"[{chain.category}]", chain.at(ref[1]).value]

    lines = [
        f"op: {op.op_id}",
        f"name: {op.name}",
        f"category: {op.category}",
        f"comment: {op.comment}",
    ]
    if op.metadata:
        lines.append("metadata: " + "; ".join(f"{k}={op.metadata[k]}"
                                              for k in sorted(op.metadata)))
    lines.append(f"INPUTS ({len(pure_ins)}):")
    for ref in pure_ins:
        lines.extend(snapshot(ref))
    lines.append(f"OUTPUTS ({len(pure_outs)}):")
    for ref in pure_outs:
        lines.extend(snapshot(ref))
    inter = sorted(through)
    lines.append(f"INTERMEDIATES ({len(inter)}):")
    for chain_id in inter:
        before = min(r[1] for r in ins if r[0] == chain_id)
        after = max(r[1] for r in outs if r[0] == chain_id)
        chain = graph.variable(chain_id)
        lines.extend([f"[{chain.category}]", chain.at(before).value, "->",
                      chain.at(after).value])
    return "\n".join(lines)


def build_log(graph: ExecutionGraph) -> OperationLog:
    ops = sorted(graph.operations.values(), key=lambda o: (o.ts_start, o.op_id))
    blocks = [OperationBlock(block_index=i, op_id=o.op_id, text=_block_text(graph, o.op_id))
              for i, o in enumerate(ops)]
    return OperationLog(blocks=blocks)


def export_oplog(log: OperationLog, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(log.full_text())


def search_operations(log: OperationLog, regex: str,
                      limit: int = DEFAULT_SEARCH_LIMIT) -> list[tuple[int, str, list[str]]]:
    """Blocks matching the regex, ascending index, at most ``limit``.

    Each hit carries up to 3 excerpts of 120 chars around the first matches.
    """
    try:
        pattern = re.compile(regex, re.MULTILINE)
    except re.error as exc:
        raise ToolError(f"invalid regex: {exc}") from None
    hits: list[tuple[int, str, list[str]]] = []
    for block in log.blocks:
        matches = list(pattern.finditer(block.text))
        if not matches:
            continue
        excerpts = []
        for m in matches[:3]:
            start = max(0, m.start() - 40)
            excerpts.append(block.text[start:start + 120])
        hits.append((block.block_index, block.op_id, excerpts))
        if len(hits) >= limit:
            break
    return hits


def view_block(log: OperationLog, index: int, page: int = 0,
               page_size_chars: int = 4000) -> str:
    if index < 0 or index >= len(log.blocks):
        raise RangeError(f"block {index} out of range (0..{len(log.blocks) - 1})")
    return _paginate(log.blocks[index].text, page, page_size_chars)


def _obs_step(log: OperationLog, config: ExploreConfig, call: ToolCall) -> str:
    try:
        if call.tool == "search_operations":
            if "regex" not in call.args:
                raise ToolError("search_operations requires regex")
            limit_raw = call.args.get("limit", "")
            limit = int(limit_raw) if limit_raw else DEFAULT_SEARCH_LIMIT
            hits = search_operations(log, call.args["regex"], limit=limit)
            if not hits:
                return "no matching blocks"
            lines = [f"{len(hits)} matching blocks:"]
            for index, op_id, excerpts in hits:
                shown = " | ".join(repr(e) for e in excerpts)
                lines.append(f"  block {index} [{op_id}]: {shown}")
            return "\n".join(lines)
        if call.tool == "view_block":
            if "index" not in call.args:
                raise ToolError("view_block requires index")
            return view_block(log, int(call.args["index"]),
                              page=int(call.args.get("page") or 0),
                              page_size_chars=config.page_size_chars)
        raise ToolError(f"unknown tool {call.tool!r}")
    except ValueError:
        return "tool error: index and page must be integers"
    except (ToolError, RangeError) as exc:
        return f"tool error: {exc}"


def run_attribution_obs(graph: ExecutionGraph, case, backend: Backend,
                        config: Optional[ExploreConfig] = None) -> AttributionResult:
    """Same contract as run_attribution, driven by log search instead of edges."""
    config = config or ExploreConfig()
    log = build_log(graph)
    question_text = graph.variable(case.question_var).latest().value
    case_turn = ChatTurn(role="user", content=(
        f"Failed case.\nQuestion: {question_text}\nGolden answer: {case.golden_answer}\n"
        f"The execution is compiled into {len(log.blocks)} operation blocks; search them.\n"
        "Find the decisive faulty operation and report it."))
    ctx = WorkingContext([build_system_turn(OBS_TOOLS), case_turn])
    meter = CostMeter()
    return _agent_loop(ctx, backend, config, meter, case.case_id,
                       lambda call: _obs_step(log, config, call))
