"""Deterministic generator of synthetic memory-pipeline traces with injected faults.

One run simulates the canonical three-stage pipeline: per-message fact
extraction (with probabilistic updates and deletion-marker deletes) threading a
memory-state chain, retrieval over the stored units, and answer generation.
The state thread makes operation precedence a total order, matching strictly
sequential execution. Exactly one message is planted evidence carrying the
golden answer verbatim; a fault, when injected, rewrites exactly one operation.

Ground truth for counterfactuals is monotone corruption propagation: a value is
corrupted when produced by an unintervened, non-idealized faulty operation, or
when its producing operation consumed any corrupted value. This is the
simulator's semantics, not a claim about real systems.
"""

from __future__ import annotations

import json
import os
import random
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .attribution import SYSTEM_ERROR_TYPES
from .errors import ConfigError, NotFound
from .explorer import SUMMARIZE_MARKER
from .graph import ExecutionGraph, VarRef, op_descendants
from .llm import ChatTurn, directive
from .persist import load, save
from .recorder import IdentityStrategy, TraceContext, VarConfig

_NAMES = ["Alex", "Brianna", "Carlos", "Dalia", "Elliot", "Fatima",
          "Gustav", "Helena", "Ingrid", "Jonas", "Katya", "Lorenzo"]
_PLACES = ["harbor", "festival", "workshop", "orchard", "library", "market",
           "studio", "stadium", "garden", "museum", "plaza", "cafe"]
_ACTIVITIES = ["sketching murals", "repairing bicycles", "sorting archives",
               "practicing scales", "planting herbs", "reviewing drafts",
               "tuning engines", "weaving baskets", "labeling samples",
               "charting routes", "brewing coffee", "folding origami",
               "polishing lenses", "stacking crates"]
# Answer vocabulary is disjoint from the pools above so planted evidence is
# the only message carrying golden-answer terms.
_ANSWER_ADJ = ["crimson", "cobalt", "amber", "ivory", "emerald", "violet",
               "scarlet", "turquoise", "bronze", "magenta", "indigo", "ochre"]
_ANSWER_NOUN = ["falcon", "heron", "orchid", "compass", "lantern", "anchor",
                "sundial", "quill", "prism", "beacon", "mosaic", "pennant"]
_ANSWER_OBJ = ["trophy", "figurine", "banner", "medallion", "carving",
               "tapestry", "locket", "statuette", "emblem", "plaque"]

_SIM_IDENTITY = IdentityStrategy("sim", lambda value, text: value["key"])


def _var(key: str, text: str, category: str) -> tuple[dict, VarConfig]:
    snapshot = {"key": key, "text": text}
    return snapshot, VarConfig(category=category, identity="sim", renderer="field:text")


@dataclass
class SimConfig:
    seed: int = 0
    n_messages: int = 40
    memories_per_message: int = 1
    update_prob: float = 0.2
    delete_prob: float = 0.02
    top_k: int = 10
    fault: Optional[str] = None  # one of SYSTEM_ERROR_TYPES, or None

    def __post_init__(self) -> None:
        for name in ("update_prob", "delete_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1]")
        if self.top_k < 1:
            raise ConfigError("top_k must be >= 1")
        if self.fault is not None and self.fault not in SYSTEM_ERROR_TYPES:
            raise ConfigError(f"fault must be one of {SYSTEM_ERROR_TYPES} or None")


@dataclass
class FaultCase:
    case_id: str
    graph: ExecutionGraph
    question_var: str
    golden_answer: str
    evidence_var_ids: list[str]
    truth_op_id: Optional[str]
    truth_error_type: Optional[str]
    outcome: int  # 1 = failed run, 0 = success
    config: SimConfig

    @property
    def faulty_op_ids(self) -> frozenset[str]:
        return frozenset({self.truth_op_id} if self.truth_op_id else set())


def _overlap(a: str, b: str) -> int:
    ta = set(re.findall(r"[a-z0-9]+", a.lower()))
    tb = set(re.findall(r"[a-z0-9]+", b.lower()))
    return len(ta & tb)


def generate(config: SimConfig, case_id: str = "case") -> FaultCase:
    """Build one traced pipeline run, deterministically from the seed."""
    rng = random.Random(config.seed)
    subject = rng.choice(_NAMES)
    place = rng.choice(_PLACES)
    golden = f"the {rng.choice(_ANSWER_ADJ)} {rng.choice(_ANSWER_NOUN)} {rng.choice(_ANSWER_OBJ)}"
    question_text = f"What did {subject} bring to the {place} gathering?"
    evidence_idx = rng.randrange(config.n_messages) if config.n_messages else 0

    ctx = TraceContext(graph_id=case_id, metadata={
        "generator": "faultsim", "seed": str(config.seed),
        "fault": config.fault or "none"})
    ctx.register_identity(_SIM_IDENTITY)

    unit_text: dict[str, str] = {}   # unit var key -> latest text
    unit_ref: dict[str, VarRef] = {}  # unit var key -> latest (var, version)
    deleted: set[str] = set()
    state_ref: Optional[VarRef] = None
    state_steps = 0
    update_count = 0
    delete_count = 0
    truth_op: Optional[str] = None

    # The injected update/delete, when any, lands right after the evidence
    # message has been extracted (or at a later seeded message index).
    fault_at = None
    if config.fault in ("update", "deletion"):
        if evidence_idx + 1 < config.n_messages:
            fault_at = rng.randrange(evidence_idx + 1, config.n_messages)
        else:
            fault_at = evidence_idx

    def bump_state() -> tuple[dict, VarConfig]:
        nonlocal state_steps
        state_steps += 1
        return _var("memory_state", f"memory store snapshot: {state_steps} steps applied",
                    "memory_state")

    ctx.begin_session("memory_construction", comment="per-message extraction and maintenance")
    state_ref = ctx.comment_variable(*_var("memory_state", "memory store snapshot: empty",
                                           "memory_state"))

    for j in range(config.n_messages):
        speaker = subject if j == evidence_idx else rng.choice(_NAMES)
        if j == evidence_idx:
            msg_text = (f"{subject} said: I brought {golden} to the {place} gathering "
                        "and everyone asked about it.")
        else:
            msg_text = (f"{speaker} said: I spent the afternoon {rng.choice(_ACTIVITIES)} "
                        f"near the {rng.choice(_PLACES)}.")
        msg_ref = ctx.comment_variable(*_var(f"message_{j}", msg_text, "raw_message"))

        extract_id = ctx.begin_operation("extract_facts", category="extraction",
                                         comment=f"extract facts from message {j}",
                                         op_id=f"extract_{j}")
        for i in range(config.memories_per_message):
            key = f"memory_unit_{j}" if i == 0 else f"memory_unit_{j}_{i}"
            if j == evidence_idx and i == 0:
                if config.fault == "extraction":
                    fact = f"{subject} attended the {place} gathering."
                    truth_op = extract_id
                else:
                    fact = f"{subject} brought {golden} to the {place} gathering."
            else:
                fact = f"{speaker} was {rng.choice(_ACTIVITIES)} near the {rng.choice(_PLACES)}."
            ref = ctx.comment_link(msg_ref, _var(key, fact, "memory_unit")).dst
            unit_text[key] = fact
            unit_ref[key] = ref
        state_ref = ctx.comment_link(state_ref, bump_state()).dst
        ctx.end_operation()

        forced_here = fault_at == j
        if forced_here and config.fault == "update":
            target = f"memory_unit_{evidence_idx}"
            new_text = f"{subject} attended a gathering recently."
            op_id = ctx.begin_operation("update_memory", category="update",
                                        comment="rewrite an existing memory unit",
                                        op_id=f"update_{update_count}")
            update_count += 1
            ref = ctx.comment_link(unit_ref[target], _var(target, new_text, "memory_unit")).dst
            unit_text[target] = new_text
            unit_ref[target] = ref
            state_ref = ctx.comment_link(state_ref, bump_state()).dst
            ctx.end_operation()
            truth_op = op_id
        elif forced_here and config.fault == "deletion":
            target = f"memory_unit_{evidence_idx}"
            op_id = ctx.begin_operation("delete_memory", category="deletion",
                                        comment="remove a memory unit",
                                        op_id=f"delete_{delete_count}")
            delete_count += 1
            ctx.comment_link(unit_ref[target],
                             ("DELETED", VarConfig(category="deletion_marker",
                                                   identity="by-render", renderer="text")))
            deleted.add(target)
            state_ref = ctx.comment_link(state_ref, bump_state()).dst
            ctx.end_operation()
            truth_op = op_id
        else:
            alive = sorted(k for k in unit_text if k not in deleted)
            if alive and rng.random() < config.update_prob:
                target = rng.choice(alive)
                new_text = unit_text[target] + " (reviewed)"
                ctx.begin_operation("update_memory", category="update",
                                    comment="refresh an existing memory unit",
                                    op_id=f"update_{update_count}")
                update_count += 1
                ref = ctx.comment_link(unit_ref[target], _var(target, new_text, "memory_unit")).dst
                unit_text[target] = new_text
                unit_ref[target] = ref
                state_ref = ctx.comment_link(state_ref, bump_state()).dst
                ctx.end_operation()
            evidence_key = f"memory_unit_{evidence_idx}"
            deletable = sorted(k for k in unit_text if k not in deleted and k != evidence_key)
            if deletable and rng.random() < config.delete_prob:
                target = rng.choice(deletable)
                ctx.begin_operation("delete_memory", category="deletion",
                                    comment="prune a memory unit",
                                    op_id=f"delete_{delete_count}")
                delete_count += 1
                ctx.comment_link(unit_ref[target],
                                 ("DELETED", VarConfig(category="deletion_marker",
                                                       identity="by-render", renderer="text")))
                deleted.add(target)
                state_ref = ctx.comment_link(state_ref, bump_state()).dst
                ctx.end_operation()
    ctx.end_session()

    # Retrieval: read the latest memory state for the question.
    ctx.begin_session("retrieval", comment="query-time memory read")
    question_ref = ctx.comment_variable(*_var("question", question_text, "question"))

    ctx.begin_operation("embed_query", category="retrieval",
                        comment="embed the question against the current store",
                        op_id="embed_query")
    qe_ref = ctx.comment_link(question_ref,
                              _var("query_embedding", f"embedding({question_text})",
                                   "query_embedding")).dst
    ctx.comment_link(state_ref, qe_ref)
    ctx.end_operation()

    alive_units = sorted(k for k in unit_text if k not in deleted)
    ranked = sorted(alive_units,
                    key=lambda k: (-_overlap(question_text, unit_text[k]), k))
    evidence_key = f"memory_unit_{evidence_idx}"
    selected = ranked[:config.top_k]
    if config.fault == "retrieval":
        selected = [k for k in ranked if k != evidence_key][:config.top_k]
    elif evidence_key in unit_text and evidence_key not in deleted and evidence_key not in selected:
        selected = selected[:-1] + [evidence_key]

    ctx.begin_operation("vector_search", category="retrieval",
                        comment=f"top-{config.top_k} unit lookup", op_id="search")
    if config.fault == "retrieval":
        truth_op = "search"
    retrieved_text = "\n".join(unit_text[k] for k in selected) if selected else "(nothing retrieved)"
    rs_ref = ctx.comment_link(qe_ref, _var("retrieved_set", retrieved_text,
                                           "retrieved_context")).dst
    for k in selected:
        ctx.comment_link(unit_ref[k], rs_ref)
    ctx.end_operation()

    ctx.begin_operation("assemble_context", category="retrieval",
                        comment="concatenate retrieved units", op_id="context_assemble")
    context_text = "Context:\n" + retrieved_text
    context_ref = ctx.comment_link(rs_ref, _var("context", context_text, "context")).dst
    ctx.end_operation()
    ctx.end_session()

    ctx.begin_session("response", comment="answer generation")
    ctx.begin_operation("build_prompt", category="response",
                        comment="compose the answering prompt", op_id="build_prompt")
    prompt_text = f"Question: {question_text}\n{context_text}"
    prompt_ref = ctx.comment_link(context_ref, _var("prompt", prompt_text, "prompt")).dst
    ctx.comment_link(question_ref, prompt_ref)
    ctx.end_operation()

    ctx.begin_operation("generate_answer", category="response",
                        comment="model answers from the prompt", op_id="generate")
    if config.fault == "response":
        truth_op = "generate"
        prediction_text = f"Answer: {subject} brought refreshments."
    elif golden in context_text:
        prediction_text = f"Answer: {subject} brought {golden}."
    else:
        prediction_text = "Answer: the requested detail does not appear in memory."
    ctx.comment_link(prompt_ref, _var("prediction", prediction_text, "prediction"))
    ctx.end_operation()
    ctx.end_session()

    graph = ctx.finish()
    return FaultCase(
        case_id=case_id, graph=graph, question_var="question", golden_answer=golden,
        evidence_var_ids=[f"message_{evidence_idx}"] if config.n_messages else [],
        truth_op_id=truth_op, truth_error_type=config.fault if truth_op else None,
        outcome=1 if config.fault else 0, config=config)


# ---------------------------------------------------------------------------
# counterfactual semantics


@dataclass(frozen=True)
class SetFaultOracle:
    faulty: frozenset[str]

    def is_faulty(self, op_id: str) -> bool:
        return op_id in self.faulty


class CorruptionOutcome:
    """Outcome oracle over any graph: least-fixpoint corruption propagation.

    Intervention semantics: the outputs of faulty intervened operations are
    corrected, strictly downstream operations execute ideally (introduce no new
    faults), and corruption still flows through every uncorrected operation
    that consumed a corrupted input.
    """

    def __init__(self, graph: ExecutionGraph, faulty_ops: frozenset[str], sink_var: str):
        self.graph = graph
        self.faulty = faulty_ops
        self.sink_var = sink_var
        self._producers: dict[VarRef, set[str]] = {}
        self._op_inputs: dict[str, set[VarRef]] = {o: set() for o in graph.operations}
        for e in graph.edges:
            self._producers.setdefault(e.dst, set()).add(e.op_id)
            self._op_inputs.setdefault(e.op_id, set()).add(e.src)

    def corrupted_versions(self, intervention: frozenset[str]) -> set[VarRef]:
        desc = op_descendants(self.graph, intervention) if intervention else set()
        corrupted: set[VarRef] = set()
        changed = True
        while changed:
            changed = False
            for ref, producers in self._producers.items():
                if ref in corrupted:
                    continue
                for op in producers:
                    if op in intervention and op in self.faulty:
                        continue  # outputs replaced by correct counterparts
                    if op in self.faulty and op not in intervention and op not in desc:
                        corrupted.add(ref)
                        changed = True
                        break
                    if any(u in corrupted for u in self._op_inputs[op]):
                        corrupted.add(ref)
                        changed = True
                        break
        return corrupted

    def outcome(self, graph: ExecutionGraph, intervention: frozenset[str]) -> int:
        chain = self.graph.variables.get(self.sink_var)
        if chain is None or not chain.versions:
            raise NotFound(f"sink variable {self.sink_var!r} missing")
        sink: VarRef = (chain.var_id, chain.latest().version)
        return 1 if sink in self.corrupted_versions(frozenset(intervention)) else 0


def fault_oracle(case: FaultCase) -> SetFaultOracle:
    return SetFaultOracle(case.faulty_op_ids)


def outcome_oracle(case: FaultCase) -> CorruptionOutcome:
    return CorruptionOutcome(case.graph, case.faulty_op_ids, "prediction")


def propagation_outcome(case: FaultCase, intervention: Sequence[str] | frozenset[str]) -> int:
    """Z after correcting ``intervention``; the empty set yields the recorded outcome."""
    return outcome_oracle(case).outcome(case.graph, frozenset(intervention))


# ---------------------------------------------------------------------------
# scripted judges (deterministic Backend test doubles)


@dataclass
class _Step:
    text: str
    kind: str
    op: str = ""


_POP_RE = re.compile(r"^now exploring (\S+)#(\d+) \[")
_LIST_RE = re.compile(r"^operations involving \S+: (.*)$")
_OP_ENTRY_RE = re.compile(r"(\S+) \[")
_VAR_LINE_RE = re.compile(r"^  - (\S+#\d+) \[", re.MULTILINE)
_CAPACITY_RE = re.compile(r"(\S+#\d+) \(capacity full\)")
_BLOCK_HIT_RE = re.compile(r"^  block (\d+) \[(\S+)\]", re.MULTILINE)


def _is_summarize_request(turns: Sequence[ChatTurn]) -> bool:
    return bool(turns) and turns[0].role == "system" and turns[0].content.startswith(
        SUMMARIZE_MARKER)


class OmniscientJudge:
    """Rule-driven Backend that explores earliest-first and reports the known truth.

    Policy: pop the next variable, list its operations, preview each unseen one;
    on previewing the ground-truth operation, report it; otherwise queue the
    operation's outputs. Capacity-rejected additions are retried after pops.
    Deterministic given the observation stream, so runs are reproducible.
    """

    name = "omniscient-judge"
    deterministic = True

    def __init__(self, case: FaultCase):
        self.truth_op = case.truth_op_id or ""
        self.truth_type = case.truth_error_type or ""
        self._plan: deque[_Step] = deque()
        self._pending: list[str] = []
        self._offered: set[str] = set()   # var#ver ever handed to add_to_explore
        self._seen_ops: set[str] = set()
        self._last: Optional[_Step] = None

    def _report_step(self) -> _Step:
        text = directive("report_fault", op=self.truth_op, error_type=self.truth_type,
                         explanation=f"operation {self.truth_op} is the earliest faulty step; "
                                     "correcting its outputs rescues the run")
        return _Step(text, "report")

    def _add_step(self, refs: list[str]) -> _Step:
        return _Step(directive("add_to_explore", vars=", ".join(refs)), "add")

    def _ingest(self, step: _Step, obs: str) -> None:
        if step.kind == "pop":
            if _POP_RE.match(obs):
                if self._pending:
                    refs, self._pending = self._pending, []
                    self._plan.append(self._add_step(refs))
                self._plan.append(_Step(directive("list_ops"), "list"))
            # empty-list observation: fall through; pending is flushed lazily
        elif step.kind == "list":
            m = _LIST_RE.match(obs)
            if m:
                for op_id in _OP_ENTRY_RE.findall(m.group(1)):
                    if op_id not in self._seen_ops:
                        self._seen_ops.add(op_id)
                        self._plan.append(_Step(directive("view_op", op=op_id, mode="preview"),
                                                "view", op=op_id))
        elif step.kind == "view":
            if step.op == self.truth_op:
                self._plan.clear()
                self._plan.append(self._report_step())
                return
            section = re.search(r"OUTPUTS \(\d+\):\n(.*?)DEPENDENCIES \(", obs, re.DOTALL)
            if section:
                fresh = [ref for ref in _VAR_LINE_RE.findall(section.group(1))
                         if ref not in self._offered]
                if fresh:
                    self._offered.update(fresh)
                    self._plan.appendleft(self._add_step(fresh))
        elif step.kind == "add":
            stuck = _CAPACITY_RE.findall(obs)
            if stuck:
                self._pending.extend(stuck)

    def _next(self) -> _Step:
        if self._plan:
            return self._plan.popleft()
        if self._pending:
            refs, self._pending = self._pending, []
            return self._add_step(refs)
        return _Step(directive("pop_next"), "pop")

    def complete(self, turns: Sequence[ChatTurn], temperature: float,
                 tools_schema: Optional[list[dict]] = None) -> ChatTurn:
        if _is_summarize_request(turns):
            return ChatTurn(role="assistant", content="SUMMARY: exploration so far condensed.")
        if self._last is not None and turns and turns[-1].role == "tool":
            self._ingest(self._last, turns[-1].content)
        step = self._next()
        self._last = step
        return ChatTurn(role="assistant", content=step.text)


class OmniscientObsJudge:
    """Backend twin for the operation-log method: search the truth op, view, report."""

    name = "omniscient-obs-judge"
    deterministic = True

    def __init__(self, case: FaultCase):
        self.truth_op = case.truth_op_id or ""
        self.truth_type = case.truth_error_type or ""
        self._phase = 0

    def complete(self, turns: Sequence[ChatTurn], temperature: float,
                 tools_schema: Optional[list[dict]] = None) -> ChatTurn:
        if _is_summarize_request(turns):
            return ChatTurn(role="assistant", content="SUMMARY: search so far condensed.")
        if not self.truth_op:
            return ChatTurn(role="assistant",
                            content=directive("search_operations", regex="^op: __none__$"))
        if self._phase == 0:
            self._phase = 1
            pattern = f"^op: {re.escape(self.truth_op)}$"
            return ChatTurn(role="assistant",
                            content=directive("search_operations", regex=pattern, limit=2))
        if self._phase == 1:
            self._phase = 2
            obs = turns[-1].content if turns[-1].role == "tool" else ""
            m = _BLOCK_HIT_RE.search(obs)
            index = m.group(1) if m else "0"
            return ChatTurn(role="assistant", content=directive("view_block", index=index))
        return ChatTurn(role="assistant", content=directive(
            "report_fault", op=self.truth_op, error_type=self.truth_type,
            explanation=f"block search pinpoints {self.truth_op} as the faulty step"))


def omniscient_judge(case: FaultCase) -> OmniscientJudge:
    return OmniscientJudge(case)


def omniscient_obs_judge(case: FaultCase) -> OmniscientObsJudge:
    return OmniscientObsJudge(case)


# ---------------------------------------------------------------------------
# suites


def make_suite(n_cases: int, base_seed: int, mix: Optional[dict[str, int]] = None,
               **config_overrides) -> list[FaultCase]:
    """Stratified deterministic suite. ``mix`` maps error type to exact count;
    None spreads cases uniformly over the five system error types."""
    if mix is None:
        per, extra = divmod(n_cases, len(SYSTEM_ERROR_TYPES))
        mix = {t: per + (1 if i < extra else 0)
               for i, t in enumerate(SYSTEM_ERROR_TYPES)}
    if sum(mix.values()) != n_cases:
        raise ConfigError(f"mix counts sum to {sum(mix.values())}, expected {n_cases}")
    for t in mix:
        if t not in SYSTEM_ERROR_TYPES:
            raise ConfigError(f"unknown error type {t!r} in mix")
    cases: list[FaultCase] = []
    index = 0
    for fault in SYSTEM_ERROR_TYPES:
        for _ in range(mix.get(fault, 0)):
            config = SimConfig(seed=base_seed + index, fault=fault, **config_overrides)
            cases.append(generate(config, case_id=f"case{index:04d}"))
            index += 1
    return cases


def save_case(case: FaultCase, directory: str) -> str:
    """Write <case_id>.trace.json and <case_id>.case.json; returns the case path."""
    graph_name = f"{case.case_id}.trace.json"
    save(case.graph, os.path.join(directory, graph_name))
    doc = {
        "case_id": case.case_id,
        "graph_file": graph_name,
        "question_var": case.question_var,
        "golden_answer": case.golden_answer,
        "evidence_var_ids": case.evidence_var_ids,
        "truth_op_id": case.truth_op_id,
        "truth_error_type": case.truth_error_type,
        "outcome": case.outcome,
        "seed": case.config.seed,
    }
    path = os.path.join(directory, f"{case.case_id}.case.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def load_case(path: str) -> FaultCase:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    graph = load(os.path.join(os.path.dirname(path), doc["graph_file"]))
    return FaultCase(
        case_id=doc["case_id"], graph=graph, question_var=doc["question_var"],
        golden_answer=doc["golden_answer"], evidence_var_ids=list(doc["evidence_var_ids"]),
        truth_op_id=doc.get("truth_op_id"), truth_error_type=doc.get("truth_error_type"),
        outcome=int(doc["outcome"]),
        config=SimConfig(seed=int(doc.get("seed", 0)), fault=doc.get("truth_error_type")))


def write_manifest(cases: Sequence[FaultCase], path: str) -> None:
    """One tab-separated line per case: case_id, seed, truth_op_id, truth_error_type."""
    with open(path, "w", encoding="utf-8") as fh:
        for case in cases:
            fh.write(f"{case.case_id}\t{case.config.seed}\t{case.truth_op_id or ''}\t"
                     f"{case.truth_error_type or ''}\n")


def read_manifest(path: str) -> dict[str, tuple[str, Optional[str]]]:
    """case_id -> (truth_op_id, truth_error_type) for scoring."""
    truths: dict[str, tuple[str, Optional[str]]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            case_id, _seed, op_id, err = line.split("\t")
            truths[case_id] = (op_id, err or None)
    return truths
