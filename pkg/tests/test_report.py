"""Diagnostic report refinement and localized prompt optimization."""

import json
import math

import pytest

from tracegraph import faultsim
from tracegraph.explorer import AttributionResult
from tracegraph.llm import ChatTurn, CostMeter, ScriptedBackend
from tracegraph.report import (
    PromptEntry,
    PromptRegistry,
    build_report,
    localize_prompts,
    optimize_round,
)


def result(case_id, op="extract_0", err="extraction"):
    return AttributionResult(case_id=case_id, predicted_op_id=op, error_type=err,
                             explanation=f"explanation for {case_id}", meter=CostMeter(),
                             iterations=3, terminated_by="report")


class AppendingBackend:
    """Replies with the current report plus the batch's case ids (one per line)."""

    name = "appending"
    deterministic = True

    def complete(self, turns, temperature, tools_schema=None):
        body = turns[-1].content
        current = body.split("Current report:\n", 1)[1].split("\n\nNew batch:\n")[0]
        batch = body.split("New batch:\n", 1)[1]
        ids = [line.split()[1].rstrip(":") for line in batch.splitlines() if line.startswith("case ")]
        base = "" if current == "(empty)" else current + "\n"
        return ChatTurn(role="assistant", content=base + "\n".join(ids))


class TestBuildReport:
    def test_zero_results(self):
        report = build_report([], ScriptedBackend(responses=[]))
        assert report.text == "" and report.revision == 0 and not report.failed

    @pytest.mark.parametrize("n,batches", [(1, 1), (4, 1), (5, 2), (8, 2), (9, 3)])
    def test_revision_count_is_batch_count(self, n, batches):
        results = [result(f"case{i:02d}") for i in range(n)]
        backend = ScriptedBackend(responses=[f"rev {i}" for i in range(batches)])
        report = build_report(results, backend)
        assert report.revision == batches == math.ceil(n / 4)

    def test_appending_backend_lists_all_ids_in_order(self):
        results = [result(f"case{i:02d}") for i in range(9)]
        report = build_report(results, AppendingBackend())
        assert report.text.splitlines() == [f"case{i:02d}" for i in range(9)]
        assert report.revision == 3
        assert report.source_case_ids == [f"case{i:02d}" for i in range(9)]

    def test_backend_failure_returns_partial_with_flag(self):
        results = [result(f"case{i}") for i in range(8)]
        backend = ScriptedBackend(responses=["first revision"])  # second call raises
        report = build_report(results, backend)
        assert report.failed
        assert report.text == "first revision"
        assert report.revision == 1

    def test_exemplar_reaches_instruction(self):
        seen = {}

        class Spy:
            name = "spy"
            deterministic = True

            def complete(self, turns, temperature, tools_schema=None):
                seen["system"] = turns[0].content
                return ChatTurn(role="assistant", content="r")

        build_report([result("c")], Spy(), exemplar="EXEMPLAR TEXT")
        assert "EXEMPLAR TEXT" in seen["system"]


def registry():
    return PromptRegistry(prompts={
        "extraction_prompt": PromptEntry(text="extract facts v1", bound_ops=["extract_facts"]),
        "answer_prompt": PromptEntry(text="answer v1", bound_ops=["generate_answer"]),
        "both_prompt": PromptEntry(text="both v1", bound_ops=["extract_facts",
                                                              "generate_answer"]),
    })


class TestLocalize:
    def case_graph(self):
        return faultsim.generate(faultsim.SimConfig(seed=3, n_messages=4,
                                                    fault="extraction")).graph

    def test_bound_prompt_found(self):
        g = self.case_graph()
        names = localize_prompts(result("c", op="extract_0"), g, registry())
        assert names == ["extraction_prompt", "both_prompt"]

    def test_unbound_op_returns_empty(self):
        g = self.case_graph()
        assert localize_prompts(result("c", op="search"), g, registry()) == []

    def test_two_bound_prompts_registry_order(self):
        g = self.case_graph()
        names = localize_prompts(result("c", op="generate"), g, registry())
        assert names == ["answer_prompt", "both_prompt"]

    def test_missing_prediction_returns_empty(self):
        g = self.case_graph()
        assert localize_prompts(result("c", op=""), g, registry()) == []


def scripted_optimizer(feedback_targets):
    """Stage replies: one feedback JSON per case, then per-prompt directive+rewrite."""
    responses = []
    for targets in feedback_targets:
        responses.append(json.dumps([
            {"target": t, "suggestion": f"improve {t}"} for t in targets]))
    for t in sorted({t for targets in feedback_targets for t in targets}):
        responses.append(f"directive for {t}")
        responses.append(f"{t} v2")
    return ScriptedBackend(responses=responses)


class TestOptimizeRound:
    def case(self, seed=3):
        return faultsim.generate(faultsim.SimConfig(seed=seed, n_messages=4,
                                                    fault="extraction"))

    def test_zero_failures_is_identity(self):
        reg = registry()
        before = reg.to_json()
        out = optimize_round([], {}, reg, ScriptedBackend(responses=[]))
        assert out.to_json() == before

    def test_two_failures_one_prompt_one_rewrite(self):
        case_a, case_b = self.case(3), self.case(4)
        reg = PromptRegistry(prompts={
            "extraction_prompt": PromptEntry(text="old text", bound_ops=["extract_facts"])})
        results = [
            result(case_a.case_id or "a", op=case_a.truth_op_id),
            result("b", op=case_b.truth_op_id),
        ]
        results[0].case_id = "a"
        graphs = {"a": case_a.graph, "b": case_b.graph}
        backend = scripted_optimizer([["extraction_prompt"], ["extraction_prompt"]])
        out = optimize_round(results, graphs, reg, backend)
        entry = out.prompts["extraction_prompt"]
        assert entry.text == "extraction_prompt v2"
        assert entry.history == ["old text"]

    def test_history_capacity_one_over_two_rounds(self):
        case = self.case(3)
        reg = PromptRegistry(prompts={
            "extraction_prompt": PromptEntry(text="v1", bound_ops=["extract_facts"])})
        graphs = {"a": case.graph}
        results = [result("a", op=case.truth_op_id)]
        for _ in range(2):
            backend = scripted_optimizer([["extraction_prompt"]])
            reg = optimize_round(results, graphs, reg, backend)
        entry = reg.prompts["extraction_prompt"]
        assert entry.text == "extraction_prompt v2"
        assert entry.history == ["extraction_prompt v2"]  # only the round-1 output

    def test_untargeted_prompts_untouched(self):
        case = self.case(3)
        reg = registry()
        results = [result("a", op=case.truth_op_id)]
        backend = scripted_optimizer([["extraction_prompt", "both_prompt"]])
        out = optimize_round(results, {"a": case.graph}, reg, backend)
        assert out.prompts["answer_prompt"].text == "answer v1"
        assert out.prompts["answer_prompt"].history == []

    def test_suggestions_outside_localization_filtered(self):
        case = self.case(3)
        reg = registry()
        results = [result("a", op=case.truth_op_id)]
        backend = ScriptedBackend(responses=[
            json.dumps([{"target": "answer_prompt", "suggestion": "not allowed"},
                        {"target": "extraction_prompt", "suggestion": "ok"}]),
            "directive", "new extraction text",
        ])
        out = optimize_round(results, {"a": case.graph}, reg, backend)
        assert out.prompts["answer_prompt"].text == "answer v1"
        assert out.prompts["extraction_prompt"].text == "new extraction text"


class TestRegistryFile:
    def test_json_round_trip_is_byte_stable(self):
        reg = registry()
        text = reg.to_json()
        assert PromptRegistry.from_json(text).to_json() == text
