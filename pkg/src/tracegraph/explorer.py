"""Agentic earliest-first exploration of operation subgraphs.

The agent keeps a bounded to-explore list of variable versions, prioritized by
earliest logical timestamp. Each iteration is one assistant turn carrying one
tool directive; observations stream back into a working context that is
summarized whenever its token estimate crosses the safety threshold. The run
ends when the agent reports a faulty operation or the iteration budget is gone.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .attribution import DECISIVE_ERROR_CRITERION, ERROR_TYPES
from .errors import (
    BackendError,
    ConfigError,
    NotFound,
    RangeError,
    RunError,
    ToolError,
)
from .graph import ExecutionGraph, VarRef, inputs_of, ops_involving, outputs_of
from .llm import (
    Backend,
    ChatTurn,
    CostMeter,
    ToolCall,
    complete_with_meter,
    estimate_tokens,
    parse_tool_call,
)
from .retrieval import EmbeddingProvider, seed_exploration

SUMMARIZE_MARKER = "Condense the earlier exploration turns"
RECENT_TURNS_KEPT = 4

TOOLS: list[dict] = [
    {"name": "pop_next", "args": {},
     "description": "remove and inspect the earliest-timestamp variable in the to-explore list"},
    {"name": "list_ops", "args": {"var": "optional var_id", "version": "optional version"},
     "description": "operations involving a variable (defaults to the one under exploration)"},
    {"name": "view_op", "args": {"op": "op_id", "mode": "preview|full", "page": "page index"},
     "description": "render one operation subgraph; preview omits variable values"},
    {"name": "read_var", "args": {"var": "var_id", "version": "version", "page": "page index"},
     "description": "read one page of a variable value"},
    {"name": "search_var", "args": {"var": "var_id", "version": "version", "regex": "pattern",
                                    "max_hits": "limit"},
     "description": "regex search inside a variable value"},
    {"name": "add_to_explore", "args": {"vars": "comma-separated var_id#version"},
     "description": "queue downstream variables for exploration"},
    {"name": "report_fault", "args": {"op": "op_id", "error_type": "|".join(ERROR_TYPES),
                                      "explanation": "why"},
     "description": "terminate with the decisive faulty operation"},
]


@dataclass
class ExploreConfig:
    n: int = 16                      # to-explore list capacity
    context_threshold: int = 272_000  # working-context token budget
    max_iters: int = 200
    temperature: float = 1.0
    page_size_chars: int = 4000

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ConfigError("list capacity must be >= 2")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")


@dataclass
class AttributionResult:
    case_id: str
    predicted_op_id: str
    error_type: Optional[str]
    explanation: str
    meter: CostMeter
    iterations: int
    terminated_by: str  # "report" | "budget"


# ---------------------------------------------------------------------------
# rendering and targeted access


def _paginate(text: str, page: int, page_size: int) -> str:
    pages = max(1, -(-len(text) // page_size))
    if page < 0 or page >= pages:
        raise RangeError(f"page {page} out of range (0..{pages - 1})")
    chunk = text[page * page_size:(page + 1) * page_size]
    if pages > 1:
        return chunk + f"\n(page {page} of {pages - 1})"
    return chunk


def render_operation_subgraph(graph: ExecutionGraph, op_id: str, mode: str = "preview",
                              page: int = 0, page_size_chars: int = 4000) -> str:
    """Deterministic textual view of one operation and its dependency neighborhood.

    Preview shows structure only (ids, categories, value sizes); full appends the
    value snapshots and is paginated by ``page_size_chars``.
    """
    op = graph.operation(op_id)
    if mode not in ("preview", "full"):
        raise ToolError(f"unknown mode {mode!r}")
    ins = inputs_of(graph, op_id)
    outs = outputs_of(graph, op_id)
    lines = [
        f"OPERATION {op.op_id} [{op.name}]",
        f"category: {op.category}",
        f"session: {op.session_id}",
        f"ts: [{op.ts_start}, {op.ts_end}]",
        f"comment: {op.comment}",
    ]
    if op.metadata:
        meta = "; ".join(f"{k}={op.metadata[k]}" for k in sorted(op.metadata))
        lines.append(f"metadata: {meta}")

    def var_line(ref: VarRef) -> str:
        chain = graph.variable(ref[0])
        ver = chain.at(ref[1])
        return (f"  - {ref[0]}#{ref[1]} [{chain.category}] "
                f"ts={ver.ts} chars={len(ver.value)}")

    lines.append(f"INPUTS ({len(ins)}):")
    lines.extend(var_line(r) for r in ins)
    lines.append(f"OUTPUTS ({len(outs)}):")
    lines.extend(var_line(r) for r in outs)
    deps = sorted((e.src, e.dst) for e in graph.edges if e.op_id == op_id)
    lines.append(f"DEPENDENCIES ({len(deps)}):")
    lines.extend(f"  - {s[0]}#{s[1]} -> {d[0]}#{d[1]}" for s, d in deps)
    if mode == "full":
        lines.append("VALUES:")
        for ref in sorted(set(ins) | set(outs)):
            lines.append(f"--- {ref[0]}#{ref[1]} ---")
            lines.append(graph.version(ref[0], ref[1]).value)
    return _paginate("\n".join(lines), page, page_size_chars)


def read_variable(graph: ExecutionGraph, var_id: str, version: int, page: int = 0,
                  page_size_chars: int = 4000) -> str:
    return _paginate(graph.version(var_id, version).value, page, page_size_chars)


def search_variable(graph: ExecutionGraph, var_id: str, version: int, regex: str,
                    max_hits: int = 8) -> list[tuple[int, str]]:
    """Non-overlapping matches as (offset, 80-char excerpt around the match)."""
    value = graph.version(var_id, version).value
    try:
        pattern = re.compile(regex)
    except re.error as exc:
        raise ToolError(f"invalid regex: {exc}") from None
    hits: list[tuple[int, str]] = []
    for m in pattern.finditer(value):
        start = max(0, m.start() - 30)
        hits.append((m.start(), value[start:start + 80]))
        if len(hits) >= max_hits:
            break
    return hits


# ---------------------------------------------------------------------------
# exploration state


class ToExploreList:
    """Bounded min-priority structure keyed by (timestamp, var_id, version).

    A popped entry never re-enters; rejected insertions report their reason.
    """

    def __init__(self, capacity: int):
        self.capacity = capacity
        self._entries: dict[VarRef, int] = {}
        self._popped: set[VarRef] = set()

    def __len__(self) -> int:
        return len(self._entries)

    def push(self, ref: VarRef, ts: int) -> Optional[str]:
        """Insert; returns a rejection reason or None on success."""
        if ref in self._popped:
            return "already explored"
        if ref in self._entries:
            return "already queued"
        if len(self._entries) >= self.capacity:
            return "capacity full"
        self._entries[ref] = ts
        return None

    def pop(self) -> Optional[tuple[VarRef, int]]:
        if not self._entries:
            return None
        ref = min(self._entries, key=lambda r: (self._entries[r], r[0], r[1]))
        ts = self._entries.pop(ref)
        self._popped.add(ref)
        return ref, ts


@dataclass
class ExploreState:
    graph: ExecutionGraph
    config: ExploreConfig
    queue: ToExploreList
    current: Optional[VarRef] = None

    @classmethod
    def seeded(cls, graph: ExecutionGraph, config: ExploreConfig,
               seeds: Sequence[VarRef]) -> "ExploreState":
        queue = ToExploreList(config.n)
        for ref in seeds:
            queue.push(ref, graph.version_ts(ref))
        return cls(graph=graph, config=config, queue=queue)


def _int_arg(args: dict[str, str], key: str, default: int) -> int:
    raw = args.get(key)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ToolError(f"argument {key!r} must be an integer, got {raw!r}") from None


def _parse_refs(raw: str) -> list[VarRef]:
    refs: list[VarRef] = []
    for part in raw.split(","):
        part = part.strip()
        if not part:
            continue
        if "#" not in part:
            raise ToolError(f"expected var_id#version, got {part!r}")
        var_id, _, ver = part.rpartition("#")
        try:
            refs.append((var_id, int(ver)))
        except ValueError:
            raise ToolError(f"expected var_id#version, got {part!r}") from None
    if not refs:
        raise ToolError("no variables given")
    return refs


def explore_step(state: ExploreState, call: ToolCall) -> str:
    """Apply one tool call; agent mistakes become observations, never crashes."""
    try:
        return _explore_step(state, call)
    except (ToolError, NotFound, RangeError) as exc:
        return f"tool error: {exc}"


def _explore_step(state: ExploreState, call: ToolCall) -> str:
    graph, args = state.graph, call.args
    if call.tool == "pop_next":
        popped = state.queue.pop()
        if popped is None:
            return "to-explore list is empty"
        ref, ts = popped
        state.current = ref
        cat = graph.variable(ref[0]).category
        return (f"now exploring {ref[0]}#{ref[1]} [{cat}] (ts={ts}); "
                f"{len(state.queue)} entries remain in the to-explore list")

    if call.tool == "list_ops":
        if "var" in args and args["var"]:
            var_id = args["var"]
            version = _int_arg(args, "version", -1)
            ver: Optional[int] = None if version < 0 else version
        elif state.current is not None:
            var_id, ver = state.current[0], state.current[1]
        else:
            raise ToolError("no variable under exploration; pass var explicitly")
        ops = ops_involving(graph, var_id, ver)
        if not ops:
            return f"no operations involve {var_id}"
        rendered = ", ".join(f"{o} [{graph.operations[o].name}]" for o in ops)
        return f"operations involving {var_id}: {rendered}"

    if call.tool == "view_op":
        if "op" not in args:
            raise ToolError("view_op requires op")
        return render_operation_subgraph(graph, args["op"], mode=args.get("mode", "preview"),
                                         page=_int_arg(args, "page", 0),
                                         page_size_chars=state.config.page_size_chars)

    if call.tool == "read_var":
        if "var" not in args:
            raise ToolError("read_var requires var and version")
        return read_variable(graph, args["var"], _int_arg(args, "version", 0),
                             page=_int_arg(args, "page", 0),
                             page_size_chars=state.config.page_size_chars)

    if call.tool == "search_var":
        if "var" not in args or "regex" not in args:
            raise ToolError("search_var requires var, version and regex")
        hits = search_variable(graph, args["var"], _int_arg(args, "version", 0),
                               args["regex"], max_hits=_int_arg(args, "max_hits", 8))
        if not hits:
            return "no matches"
        return "; ".join(f"offset={off} {excerpt!r}" for off, excerpt in hits)

    if call.tool == "add_to_explore":
        refs = _parse_refs(args.get("vars", ""))
        added: list[str] = []
        rejected: list[str] = []
        for ref in refs:
            try:
                ts = graph.version_ts(ref)
            except NotFound:
                rejected.append(f"{ref[0]}#{ref[1]} (unknown variable)")
                continue
            reason = state.queue.push(ref, ts)
            if reason is None:
                added.append(f"{ref[0]}#{ref[1]}")
            else:
                rejected.append(f"{ref[0]}#{ref[1]} ({reason})")
        parts = []
        parts.append("added: " + (", ".join(added) if added else "(none)"))
        if rejected:
            parts.append("rejected: " + ", ".join(rejected))
        return "; ".join(parts)

    raise ToolError(f"unknown tool {call.tool!r}")


# ---------------------------------------------------------------------------
# working context


class WorkingContext:
    """Ordered chat turns with a pinned prefix and a cached token estimate."""

    def __init__(self, pinned_turns: Sequence[ChatTurn]):
        self.turns: list[ChatTurn] = list(pinned_turns)
        self.pinned = len(self.turns)
        self._estimates: list[int] = [estimate_tokens(t.content) for t in self.turns]

    @property
    def estimate(self) -> int:
        return sum(self._estimates)

    def append(self, turn: ChatTurn) -> None:
        self.turns.append(turn)
        self._estimates.append(estimate_tokens(turn.content))

    def replace_unpinned(self, turns: list[ChatTurn]) -> None:
        self.turns = self.turns[:self.pinned] + turns
        self._estimates = self._estimates[:self.pinned] + [estimate_tokens(t.content)
                                                           for t in turns]


def manage_context(ctx: WorkingContext, backend: Backend, threshold: int,
                   meter: Optional[CostMeter] = None, temperature: float = 1.0) -> WorkingContext:
    """Shrink the context below ``threshold`` in one pass.

    Identity when already within budget. Otherwise the oldest unpinned turns
    (all but the most recent 4) are replaced by one backend-produced summary
    turn; if the result still exceeds the threshold the summary tail is
    hard-truncated. The pinned prefix and the 4 most recent turns survive.
    """
    if ctx.estimate <= threshold:
        return ctx
    pinned_estimate = sum(estimate_tokens(t.content) for t in ctx.turns[:ctx.pinned])
    if pinned_estimate > threshold:
        raise ConfigError("pinned context prefix alone exceeds the token threshold")
    unpinned = ctx.turns[ctx.pinned:]
    kept = unpinned[-RECENT_TURNS_KEPT:] if len(unpinned) > RECENT_TURNS_KEPT else list(unpinned)
    compress = unpinned[:-RECENT_TURNS_KEPT] if len(unpinned) > RECENT_TURNS_KEPT else []
    kept_estimate = sum(estimate_tokens(t.content) for t in kept)
    budget = threshold - pinned_estimate - kept_estimate
    if budget < 0:
        raise ConfigError("token threshold too small: pinned prefix plus the most "
                          "recent turns cannot fit")
    if not compress:
        raise ConfigError("token threshold too small: nothing left to summarize")
    body = "\n\n".join(f"[{t.role}] {t.content}" for t in compress)
    request = [
        ChatTurn(role="system", content=f"{SUMMARIZE_MARKER} into one short digest. "
                                        "Reply with a single message starting with 'SUMMARY:'."),
        ChatTurn(role="user", content=body),
    ]
    meter = meter if meter is not None else CostMeter()
    reply = complete_with_meter(backend, request, temperature, None, meter)
    summary = reply.content
    if not summary.startswith("SUMMARY:"):
        summary = "SUMMARY: " + summary
    # Truncate by the estimator's own granularity until the summary fits.
    max_chars = max(0, budget * 4)
    if estimate_tokens(summary) > budget:
        summary = summary[:max_chars]
        while summary and estimate_tokens(summary) > budget:
            summary = summary[:-4]
    new_turns = ([ChatTurn(role="assistant", content=summary)] if summary else []) + kept
    ctx.replace_unpinned(new_turns)
    if ctx.estimate > threshold:
        raise ConfigError("context could not be reduced below the threshold")
    return ctx


# ---------------------------------------------------------------------------
# the attribution loop


def _tools_text(tools: list[dict]) -> str:
    lines = []
    for t in tools:
        args = ", ".join(f"{k}: {v}" for k, v in t["args"].items()) or "(no args)"
        lines.append(f"- {t['name']}({args}): {t['description']}")
    return "\n".join(lines)


def build_system_turn(tools: list[dict], prior_knowledge: Optional[str] = None) -> ChatTurn:
    parts = [
        "You are a failure-attribution agent working over a recorded execution graph.",
        DECISIVE_ERROR_CRITERION,
        "Error taxonomy: " + ", ".join(ERROR_TYPES) + ".",
        "Respond with exactly one tool directive per turn, a single JSON object on "
        'its own line: {"tool": <name>, "args": {...}}. Text before it is reasoning.',
        "Tools:",
        _tools_text(tools),
    ]
    if prior_knowledge:
        parts.append("Pipeline prior knowledge:\n" + prior_knowledge)
    return ChatTurn(role="system", content="\n".join(parts))


def _case_turn(question_text: str, golden_answer: str, seeds: Sequence[VarRef]) -> ChatTurn:
    seed_text = ", ".join(f"{v}#{ver}" for v, ver in seeds) or "(empty)"
    return ChatTurn(role="user", content=(
        f"Failed case.\nQuestion: {question_text}\nGolden answer: {golden_answer}\n"
        f"Initial to-explore list: {seed_text}\n"
        "Find the decisive faulty operation and report it."))


def _validate_report(args: dict[str, str]) -> Optional[str]:
    if not args.get("op"):
        return "report_fault requires op"
    if args.get("error_type") not in ERROR_TYPES:
        return (f"report_fault error_type must be one of {', '.join(ERROR_TYPES)}; "
                f"got {args.get('error_type')!r}")
    return None


def run_attribution(graph: ExecutionGraph, case, backend: Backend,
                    config: Optional[ExploreConfig] = None,
                    seeds: Optional[Sequence[VarRef]] = None,
                    prior_knowledge: Optional[str] = None,
                    provider: Optional[EmbeddingProvider] = None) -> AttributionResult:
    """Drive the backend over the graph until it reports a fault or runs out of turns.

    ``case`` needs case_id, question_var and golden_answer attributes. ``seeds``
    overrides retrieval seeding with caller-provided source evidence.
    """
    config = config or ExploreConfig()
    if not graph.sealed:
        raise ConfigError("attribution requires a sealed graph")
    if seeds is None:
        seeds = seed_exploration(graph, case.question_var, case.golden_answer,
                                 config.n, provider=provider)
    question_text = graph.variable(case.question_var).latest().value
    state = ExploreState.seeded(graph, config, seeds)
    ctx = WorkingContext([build_system_turn(TOOLS, prior_knowledge),
                          _case_turn(question_text, case.golden_answer, seeds)])
    meter = CostMeter()
    return _agent_loop(ctx, backend, config, meter, case.case_id,
                       lambda call: explore_step(state, call))


def _agent_loop(ctx: WorkingContext, backend: Backend, config: ExploreConfig,
                meter: CostMeter, case_id: str,
                apply_tool: Callable[[ToolCall], str]) -> AttributionResult:
    """Shared driver for the graph and operation-log agents."""
    for iteration in range(1, config.max_iters + 1):
        try:
            reply = complete_with_meter(backend, ctx.turns, config.temperature, None, meter)
        except BackendError as exc:
            raise RunError(f"backend failed after retries: {exc}", meter=meter) from exc
        ctx.append(reply)
        call = parse_tool_call(reply.content)
        if call is None:
            observation = "tool error: no tool directive found in the reply"
            tool_name = "error"
        elif call.tool == "report_fault":
            problem = _validate_report(call.args)
            if problem is None:
                return AttributionResult(
                    case_id=case_id, predicted_op_id=call.args["op"],
                    error_type=call.args["error_type"],
                    explanation=call.args.get("explanation", ""),
                    meter=meter, iterations=iteration, terminated_by="report")
            observation = f"tool error: {problem}"
            tool_name = call.tool
        else:
            observation = apply_tool(call)
            tool_name = call.tool
        ctx.append(ChatTurn(role="tool", content=observation, tool_name=tool_name))
        manage_context(ctx, backend, config.context_threshold, meter, config.temperature)
        if ctx.estimate > config.context_threshold:
            raise RuntimeError("working-context invariant violated after management pass")
    return AttributionResult(case_id=case_id, predicted_op_id="", error_type=None,
                             explanation="", meter=meter, iterations=config.max_iters,
                             terminated_by="budget")
