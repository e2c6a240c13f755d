"""Downstream consumers of attribution results: diagnostic reports and
localized prompt optimization.

Report synthesis feeds the backend mini-batches of four results and keeps the
full revised report after each batch. Prompt optimization never replays the
traced system: attribution localizes the faulty operation, only the prompts
bound to that operation's name are touched, and each prompt keeps exactly one
prior version of history.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import BackendError, ConfigError
from .explorer import AttributionResult, render_operation_subgraph
from .graph import ExecutionGraph
from .llm import Backend, ChatTurn, CostMeter, complete_with_meter

BATCH_SIZE = 4


@dataclass
class DiagnosticReport:
    text: str = ""
    revision: int = 0
    source_case_ids: list[str] = field(default_factory=list)
    failed: bool = False


@dataclass
class PromptEntry:
    text: str
    history: list[str] = field(default_factory=list)  # capacity 1
    bound_ops: list[str] = field(default_factory=list)  # operation names


@dataclass
class PromptRegistry:
    prompts: dict[str, PromptEntry] = field(default_factory=dict)

    def to_json(self) -> str:
        doc = {name: {"text": e.text, "history": list(e.history),
                      "bound_ops": list(e.bound_ops)}
               for name, e in sorted(self.prompts.items())}
        return json.dumps(doc, ensure_ascii=False, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "PromptRegistry":
        doc = json.loads(text)
        prompts = {name: PromptEntry(text=e["text"], history=list(e.get("history", [])),
                                     bound_ops=list(e.get("bound_ops", [])))
                   for name, e in doc.items()}
        return cls(prompts=prompts)


@dataclass
class FeedbackItem:
    case_id: str
    target: str       # prompt name
    suggestion: str


def _result_summary(r: AttributionResult) -> str:
    return (f"case {r.case_id}: faulty operation {r.predicted_op_id or '(none)'}"
            f" type={r.error_type or '(none)'} — {r.explanation}")


def build_report(results: Sequence[AttributionResult], backend: Backend,
                 batch_size: int = BATCH_SIZE, exemplar: Optional[str] = None,
                 meter: Optional[CostMeter] = None) -> DiagnosticReport:
    """Iteratively refine one report over batches of results.

    The backend receives the current report plus the next batch and must reply
    with the complete revised report. A backend failure returns the partial
    report with the failed flag set.
    """
    if batch_size < 1:
        raise ConfigError("batch_size must be >= 1")
    report = DiagnosticReport()
    meter = meter if meter is not None else CostMeter()
    instruction = ("You maintain a systematic failure-analysis report. Given the current "
                   "report and a new batch of attributed failures, reply with the full "
                   "revised report, grouping failures by operation and error type and "
                   "naming finer-grained subtypes where the evidence supports them.")
    if exemplar:
        instruction += "\nStyle example:\n" + exemplar
    for start in range(0, len(results), batch_size):
        batch = results[start:start + batch_size]
        body = (f"Current report:\n{report.text or '(empty)'}\n\nNew batch:\n"
                + "\n".join(_result_summary(r) for r in batch))
        turns = [ChatTurn(role="system", content=instruction),
                 ChatTurn(role="user", content=body)]
        try:
            reply = complete_with_meter(backend, turns, 1.0, None, meter)
        except BackendError:
            report.failed = True
            return report
        report.text = reply.content
        report.revision += 1
        report.source_case_ids.extend(r.case_id for r in batch)
    return report


def localize_prompts(result: AttributionResult, graph: ExecutionGraph,
                     registry: PromptRegistry) -> list[str]:
    """Prompts bound to the predicted faulty operation's name, registry order."""
    if not result.predicted_op_id or result.predicted_op_id not in graph.operations:
        return []
    op_name = graph.operations[result.predicted_op_id].name
    return [name for name, entry in registry.prompts.items() if op_name in entry.bound_ops]


def _parse_feedback(content: str, case_id: str, allowed: set[str]) -> list[FeedbackItem]:
    """First JSON array of {target, suggestion} objects found in the reply."""
    decoder = json.JSONDecoder()
    for i, ch in enumerate(content):
        if ch != "[":
            continue
        try:
            parsed, _ = decoder.raw_decode(content[i:])
        except json.JSONDecodeError:
            continue
        items = []
        for entry in parsed:
            if (isinstance(entry, dict) and isinstance(entry.get("target"), str)
                    and entry["target"] in allowed):
                items.append(FeedbackItem(case_id=case_id, target=entry["target"],
                                          suggestion=str(entry.get("suggestion", ""))))
        return items
    return []


def optimize_round(failed_results: Sequence[AttributionResult],
                   graphs: dict[str, ExecutionGraph], registry: PromptRegistry,
                   backend: Backend, meter: Optional[CostMeter] = None) -> PromptRegistry:
    """One optimization round: feedback per case, aggregation per prompt, rewrite.

    Only the prompts localized to some case's faulty operation are touched.
    History rotates to hold exactly the previous version.
    """
    meter = meter if meter is not None else CostMeter()
    items: list[FeedbackItem] = []
    for result in failed_results:
        graph = graphs.get(result.case_id)
        if graph is None:
            continue
        targets = set(localize_prompts(result, graph, registry))
        if not targets:
            continue
        subgraph = render_operation_subgraph(graph, result.predicted_op_id, mode="full",
                                             page_size_chars=1_000_000)
        body = (f"Failure:\n{_result_summary(result)}\n\nFaulty operation subgraph:\n{subgraph}\n\n"
                f"Candidate prompts: {', '.join(sorted(targets))}\n"
                'Reply with a JSON array of {"target": prompt_name, "suggestion": text}.')
        turns = [ChatTurn(role="system",
                          content="Generate prompt-improvement suggestions from one failure."),
                 ChatTurn(role="user", content=body)]
        reply = complete_with_meter(backend, turns, 1.0, None, meter)
        items.extend(_parse_feedback(reply.content, result.case_id, targets))

    by_prompt: dict[str, list[FeedbackItem]] = {}
    for item in items:
        by_prompt.setdefault(item.target, []).append(item)

    for name in sorted(by_prompt):
        suggestions = "\n".join(f"- ({i.case_id}) {i.suggestion}" for i in by_prompt[name])
        agg_turns = [
            ChatTurn(role="system",
                     content="Aggregate the suggestions into one rewrite directive."),
            ChatTurn(role="user", content=f"Prompt: {name}\nSuggestions:\n{suggestions}"),
        ]
        directive_text = complete_with_meter(backend, agg_turns, 1.0, None, meter).content
        entry = registry.prompts[name]
        history_block = entry.history[0] if entry.history else "(none)"
        rewrite_turns = [
            ChatTurn(role="system",
                     content="Rewrite the prompt according to the directive. Reply with the "
                             "new prompt text only."),
            ChatTurn(role="user", content=(f"Current prompt:\n{entry.text}\n\n"
                                           f"Previous version:\n{history_block}\n\n"
                                           f"Directive:\n{directive_text}")),
        ]
        new_text = complete_with_meter(backend, rewrite_turns, 1.0, None, meter).content
        entry.history = [entry.text]
        entry.text = new_text
    return registry
