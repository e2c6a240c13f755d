"""Decisive-error-set machinery: validity checks, exhaustive search, metrics.

A candidate operation set is a valid causal cut when (1) every member executed
incorrectly, (2) every strictly upstream ancestor executed correctly, and
(3) correcting the members' outputs, with ideal execution downstream of them,
flips the run outcome to success. The decisive sets are the valid candidates
with no valid strict subset. Whether an operation is faulty and what a
counterfactual intervention yields are abstracted behind oracles, so the
formalism is testable without executing real systems.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Optional, Protocol, Sequence

from .errors import NoFault, NotSequential, TooLarge
from .graph import ExecutionGraph, op_ancestors

# Lifecycle taxonomy: two evaluation-side kinds plus five pipeline kinds.
ERROR_TYPES = ("annotation", "judge", "extraction", "update", "deletion",
               "retrieval", "response")
SYSTEM_ERROR_TYPES = ("extraction", "update", "deletion", "retrieval", "response")

DECISIVE_ERROR_CRITERION = (
    "An operation set is a decisive error set when: (1) every member operation "
    "executed incorrectly; (2) every operation strictly upstream of the set "
    "executed correctly; (3) replacing the members' outputs with correct values, "
    "assuming ideal execution for all strictly downstream operations, turns the "
    "failed run into a success; and (4) no strict subset also satisfies 1-3. "
    "Report the single earliest such operation."
)


class FaultOracle(Protocol):
    def is_faulty(self, op_id: str) -> bool: ...


class OutcomeOracle(Protocol):
    def outcome(self, graph: ExecutionGraph, intervention: frozenset[str]) -> int:
        """0 = success, 1 = failure; the empty intervention yields the original outcome."""
        ...


@dataclass
class CutSetVerdict:
    candidate: frozenset[str]
    all_faulty: bool
    ancestors_correct: bool
    rescues: bool

    @property
    def valid(self) -> bool:
        return self.all_faulty and self.ancestors_correct and self.rescues


def check_candidate(graph: ExecutionGraph, candidate: Iterable[str],
                    fault_oracle: FaultOracle, outcome_oracle: OutcomeOracle) -> CutSetVerdict:
    cand = frozenset(candidate)
    all_faulty = all(fault_oracle.is_faulty(o) for o in cand)
    ancestors_correct = all(not fault_oracle.is_faulty(o) for o in op_ancestors(graph, cand))
    rescues = outcome_oracle.outcome(graph, cand) == 0
    return CutSetVerdict(cand, all_faulty, ancestors_correct, rescues)


def brute_force_decisive_sets(graph: ExecutionGraph, fault_oracle: FaultOracle,
                              outcome_oracle: OutcomeOracle,
                              max_ops: int = 12) -> list[frozenset[str]]:
    """Enumerate subsets by size then lexicographic order; keep minimal valid sets.

    A subset containing an already-kept set cannot be minimal and is skipped.
    """
    ops = sorted(graph.operations)
    if len(ops) > max_ops:
        raise TooLarge(f"{len(ops)} operations exceeds the exhaustive cap of {max_ops}")
    kept: list[frozenset[str]] = []
    for size in range(len(ops) + 1):
        for combo in combinations(ops, size):
            cand = frozenset(combo)
            if any(k <= cand for k in kept):
                continue
            # Cheap rejection first: membership faultiness needs no intervention.
            if not all(fault_oracle.is_faulty(o) for o in cand):
                continue
            if check_candidate(graph, cand, fault_oracle, outcome_oracle).valid:
                kept.append(cand)
    return kept


def is_sequential(graph: ExecutionGraph) -> bool:
    """True when operation precedence is a total order.

    Sufficient check: sorted by ts_start, each operation must be an ancestor of
    its successor; transitivity then chains every pair.
    """
    ops = sorted(graph.operations.values(), key=lambda o: (o.ts_start, o.op_id))
    for earlier, later in zip(ops, ops[1:]):
        if earlier.op_id not in op_ancestors(graph, [later.op_id]):
            return False
    return True


def singleton_decisive(graph: ExecutionGraph, fault_oracle: FaultOracle,
                       outcome_oracle: OutcomeOracle) -> str:
    """In a strictly sequential graph the decisive set degenerates to the earliest
    faulty operation whose lone correction rescues the run."""
    if not is_sequential(graph):
        raise NotSequential("operation precedence is not a total order")
    faulty = [o for o in sorted(graph.operations.values(), key=lambda o: (o.ts_start, o.op_id))
              if fault_oracle.is_faulty(o.op_id)]
    if not faulty:
        raise NoFault("no operation is faulty under the given oracle")
    for op in faulty:
        if check_candidate(graph, [op.op_id], fault_oracle, outcome_oracle).valid:
            return op.op_id
    raise NoFault("no faulty singleton rescues the outcome")


@dataclass
class Scores:
    eta: float          # error-type accuracy, fraction in [0, 1]
    oia: float          # operation-identification accuracy, fraction in [0, 1]
    mean_tokens_k: float  # mean total tokens per case, in thousands
    mean_minutes: float   # mean wall time per case, in minutes


def score(results: Sequence, truths: dict[str, tuple[str, Optional[str]]]) -> Scores:
    """ETA/OIA over attributed cases plus averaged cost.

    ``truths`` maps case_id -> (truth_op_id, truth_error_type). Results without
    a truth entry count as misses on both metrics.
    """
    if not results:
        return Scores(0.0, 0.0, 0.0, 0.0)
    n = len(results)
    eta_hits = oia_hits = 0
    tokens = 0.0
    seconds = 0.0
    for r in results:
        truth = truths.get(r.case_id)
        if truth is not None:
            truth_op, truth_type = truth
            if r.predicted_op_id and r.predicted_op_id == truth_op:
                oia_hits += 1
            if r.error_type is not None and r.error_type == truth_type:
                eta_hits += 1
        tokens += r.meter.total_tokens
        seconds += r.meter.wall_time
    return Scores(eta=eta_hits / n, oia=oia_hits / n,
                  mean_tokens_k=tokens / n / 1000.0, mean_minutes=seconds / n / 60.0)
