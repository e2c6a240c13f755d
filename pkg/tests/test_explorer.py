"""Explorer: rendering, targeted access, the to-explore list, context management,
and whole attribution runs."""

import pytest
from helpers import KEY_STRATEGY, keyed_var

from tracegraph import faultsim
from tracegraph.errors import ConfigError, NotFound, RangeError
from tracegraph.explorer import (
    ExploreConfig,
    ExploreState,
    ToExploreList,
    WorkingContext,
    explore_step,
    manage_context,
    read_variable,
    render_operation_subgraph,
    run_attribution,
    search_variable,
)
from tracegraph.llm import ChatTurn, ScriptedBackend, ToolCall, directive
from tracegraph.recorder import TraceContext, VarConfig


def edgeless_op_graph():
    ctx = TraceContext()
    ctx.begin_session("main")
    ctx.begin_operation("noop", category="misc", comment="does nothing", op_id="noop")
    ctx.end_operation()
    return ctx.finish()


def seed7(fault=None, n=8):
    return faultsim.generate(faultsim.SimConfig(seed=7, n_messages=n, fault=fault))


class TestRender:
    def test_edgeless_preview_sections(self):
        text = render_operation_subgraph(edgeless_op_graph(), "noop", "preview")
        assert "OPERATION noop [noop]" in text
        assert "INPUTS (0):" in text
        assert "OUTPUTS (0):" in text
        assert "DEPENDENCIES (0):" in text

    def test_small_full_render_is_one_page(self):
        ctx = TraceContext()
        ctx.begin_session("main")
        ctx.begin_operation("emit", op_id="emit")
        ctx.comment_link(("0123456789", VarConfig(category="note")),
                         ("y", VarConfig(category="note")))
        ctx.end_operation()
        g = ctx.finish()
        render_operation_subgraph(g, "emit", "full", page=0)
        with pytest.raises(RangeError):
            render_operation_subgraph(g, "emit", "full", page=1)

    def test_preview_omits_values_full_contains_them(self):
        case = seed7()
        evidence = case.evidence_var_ids[0]
        extract_op = f"extract_{evidence.split('_')[1]}"
        unit_value = case.graph.variables[f"memory_unit_{evidence.split('_')[1]}"].versions[0].value
        preview = render_operation_subgraph(case.graph, extract_op, "preview")
        full = render_operation_subgraph(case.graph, extract_op, "full",
                                         page_size_chars=100_000)
        assert unit_value in full
        assert unit_value not in preview

    def test_preview_never_leaks_planted_values(self):
        ctx = TraceContext()
        ctx.begin_session("main")
        ctx.begin_operation("emit", op_id="emit")
        sentinel_in = "SENTINEL_VALUE_IN_93102"
        sentinel_out = "SENTINEL_VALUE_OUT_77215"
        ctx.comment_link((sentinel_in, VarConfig(category="note")),
                         (sentinel_out, VarConfig(category="note")))
        ctx.end_operation()
        preview = render_operation_subgraph(ctx.finish(), "emit", "preview")
        assert sentinel_in not in preview
        assert sentinel_out not in preview

    def test_unknown_op(self):
        with pytest.raises(NotFound):
            render_operation_subgraph(edgeless_op_graph(), "ghost", "preview")


class TestReadAndSearch:
    def graph_with_value(self, value):
        ctx = TraceContext()
        ctx.register_identity(KEY_STRATEGY)
        ctx.begin_session("main")
        ctx.comment_variable(*keyed_var("v", value))
        return ctx.finish()

    def test_search_without_match(self):
        g = self.graph_with_value("plain text")
        assert search_variable(g, "v", 0, "xyz") == []

    def test_search_optional_group(self):
        g = self.graph_with_value("loves skiing")
        hits = search_variable(g, "v", 0, "ski(ing)?")
        assert len(hits) == 1
        assert hits[0][0] == "loves skiing".index("skiing")

    def test_pagination_bounds(self):
        g = self.graph_with_value("a" * 9000)
        for page in (0, 1, 2):
            read_variable(g, "v", 0, page=page, page_size_chars=4000)
        with pytest.raises(RangeError):
            read_variable(g, "v", 0, page=3, page_size_chars=4000)

    def test_invalid_regex_is_tool_error(self):
        from tracegraph.errors import ToolError
        g = self.graph_with_value("text")
        with pytest.raises(ToolError):
            search_variable(g, "v", 0, "(unclosed")

    def test_max_hits_and_excerpts(self):
        g = self.graph_with_value("ab " * 100)
        hits = search_variable(g, "v", 0, "ab", max_hits=5)
        assert len(hits) == 5
        assert all(len(excerpt) <= 80 for _, excerpt in hits)


class TestToExploreList:
    def test_pop_is_min_timestamp(self):
        q = ToExploreList(capacity=16)
        q.push(("a", 0), 5)
        q.push(("b", 0), 3)
        q.push(("c", 0), 9)
        order = [q.pop()[0][0] for _ in range(3)]
        assert order == ["b", "a", "c"]

    def test_capacity_rejections(self):
        q = ToExploreList(capacity=16)
        outcomes = [q.push((f"v{i}", 0), i) for i in range(20)]
        assert outcomes[:16] == [None] * 16
        assert outcomes[16:] == ["capacity full"] * 4

    def test_popped_never_reenters(self):
        q = ToExploreList(capacity=4)
        q.push(("a", 0), 1)
        q.pop()
        assert q.push(("a", 0), 1) == "already explored"

    def test_duplicate_rejected(self):
        q = ToExploreList(capacity=4)
        q.push(("a", 0), 1)
        assert q.push(("a", 0), 1) == "already queued"


class TestExploreStep:
    def state(self, case=None, n=16):
        case = case or seed7()
        seeds = [(v, 0) for v in case.evidence_var_ids]
        return ExploreState.seeded(case.graph, ExploreConfig(n=n), seeds)

    def test_pop_on_empty_list(self):
        state = ExploreState.seeded(seed7().graph, ExploreConfig(), [])
        assert explore_step(state, ToolCall("pop_next", {})) == "to-explore list is empty"

    def test_add_twenty_to_empty_sixteen(self):
        case = seed7(n=30)
        state = ExploreState.seeded(case.graph, ExploreConfig(n=16), [])
        vars_arg = ", ".join(f"message_{i}#0" for i in range(20))
        obs = explore_step(state, ToolCall("add_to_explore", {"vars": vars_arg}))
        assert obs.count(",") >= 15
        accepted = obs.split("rejected:")[0]
        rejected = obs.split("rejected:")[1]
        assert len([p for p in accepted.split(",") if "#" in p]) == 16
        assert rejected.count("capacity full") == 4

    def test_pop_order_by_timestamp(self):
        case = seed7()
        g = case.graph
        state = ExploreState.seeded(g, ExploreConfig(), [])
        refs = [("message_2", 0), ("message_0", 0), ("message_1", 0)]
        explore_step(state, ToolCall("add_to_explore",
                                     {"vars": ", ".join(f"{v}#{ver}" for v, ver in refs)}))
        popped = []
        for _ in range(3):
            obs = explore_step(state, ToolCall("pop_next", {}))
            popped.append(obs.split()[2])
        assert popped == ["message_0#0", "message_1#0", "message_2#0"]

    def test_malformed_args_observed_not_raised(self):
        state = self.state()
        obs = explore_step(state, ToolCall("view_op", {"op": "ghost"}))
        assert obs.startswith("tool error:")
        obs = explore_step(state, ToolCall("add_to_explore", {"vars": "not-a-ref"}))
        assert obs.startswith("tool error:")
        obs = explore_step(state, ToolCall("frobnicate", {}))
        assert obs.startswith("tool error:")

    def test_unknown_variable_named_in_rejection(self):
        state = self.state()
        obs = explore_step(state, ToolCall("add_to_explore", {"vars": "ghost#0"}))
        assert "ghost#0 (unknown variable)" in obs


class TestManageContext:
    def pinned(self):
        return [ChatTurn("system", "sys instruction"), ChatTurn("user", "case statement")]

    def test_under_threshold_unchanged(self):
        ctx = WorkingContext(self.pinned())
        ctx.append(ChatTurn("assistant", "small"))
        before = list(ctx.turns)
        manage_context(ctx, ScriptedBackend(responses=[]), threshold=10_000)
        assert ctx.turns == before

    def test_oversized_context_is_summarized(self):
        ctx = WorkingContext(self.pinned())
        for i in range(60):
            ctx.append(ChatTurn("tool", f"page {i}: " + "x" * 4000, tool_name="read_var"))
        assert ctx.estimate > 30_000
        manage_context(ctx, ScriptedBackend(responses=["SUMMARY: s"]), threshold=30_000)
        assert ctx.estimate <= 30_000
        assert ctx.turns[2].content.startswith("SUMMARY:")
        assert len(ctx.turns) == 2 + 1 + 4  # pinned + summary + recent four

    def test_recent_four_and_pinned_survive(self):
        ctx = WorkingContext(self.pinned())
        for i in range(10):
            ctx.append(ChatTurn("tool", f"obs {i} " + "y" * 2000, tool_name="view_op"))
        recent = ctx.turns[-4:]
        manage_context(ctx, ScriptedBackend(responses=["SUMMARY: s"]), threshold=3000)
        assert ctx.turns[:2] == self.pinned()
        assert ctx.turns[-4:] == recent

    def test_long_summary_hard_truncated(self):
        ctx = WorkingContext(self.pinned())
        for i in range(12):
            ctx.append(ChatTurn("tool", "z" * 2000, tool_name="view_op"))
        manage_context(ctx, ScriptedBackend(responses=["SUMMARY: " + "w" * 99_999]),
                       threshold=2100)
        assert ctx.estimate <= 2100

    def test_impossible_pinned_budget(self):
        ctx = WorkingContext([ChatTurn("system", "s" * 48_000)])
        ctx.append(ChatTurn("tool", "x", tool_name="read_var"))
        with pytest.raises(ConfigError):
            manage_context(ctx, ScriptedBackend(responses=[]), threshold=10_000)


class TestRunAttribution:
    def test_omniscient_judge_on_seed7(self):
        case = seed7(fault="update")
        seeds = [(v, case.graph.variable(v).latest().version) for v in case.evidence_var_ids]
        result = run_attribution(case.graph, case, faultsim.omniscient_judge(case),
                                 ExploreConfig(), seeds=seeds)
        assert result.terminated_by == "report"
        assert result.predicted_op_id == case.truth_op_id
        assert result.error_type == "update"
        assert result.iterations <= 200

    def test_retrieval_seeded_run_without_override(self):
        case = seed7(fault="extraction", n=20)
        result = run_attribution(case.graph, case, faultsim.omniscient_judge(case),
                                 ExploreConfig())
        assert result.predicted_op_id == case.truth_op_id

    def test_budget_termination_after_exactly_max_iters(self):
        case = seed7()
        backend = ScriptedBackend(responses=[directive("pop_next")] * 200)
        result = run_attribution(case.graph, case, backend,
                                 ExploreConfig(max_iters=200),
                                 seeds=[(case.evidence_var_ids[0], 0)])
        assert result.terminated_by == "budget"
        assert result.iterations == 200
        assert result.predicted_op_id == ""
        assert result.error_type is None

    def test_single_op_graph_reported_in_one_iteration(self):
        ctx = TraceContext()
        ctx.register_identity(KEY_STRATEGY)
        ctx.begin_session("response")
        q = ctx.comment_variable(*keyed_var("question", "what?", category="question"))
        ctx.begin_operation("generate_answer", category="response", op_id="generate")
        ctx.comment_link(q, keyed_var("prediction", "wrong", category="prediction"))
        ctx.end_operation()
        g = ctx.finish()

        class Case:
            case_id = "single"
            question_var = "question"
            golden_answer = "right"

        backend = ScriptedBackend(responses=[directive(
            "report_fault", op="generate", error_type="response", explanation="only candidate")])
        result = run_attribution(g, Case(), backend, ExploreConfig())
        assert result.terminated_by == "report"
        assert result.error_type == "response"
        assert result.iterations == 1

    def test_invalid_report_type_is_observed_and_loop_continues(self):
        case = seed7()
        backend = ScriptedBackend(responses=[
            directive("report_fault", op="generate", error_type="bogus", explanation=""),
            directive("report_fault", op="generate", error_type="response", explanation=""),
        ])
        result = run_attribution(case.graph, case, backend, ExploreConfig(),
                                 seeds=[(case.evidence_var_ids[0], 0)])
        assert result.terminated_by == "report"
        assert result.iterations == 2

    def test_transcript_reproducible(self):
        case = seed7(fault="response")
        seeds = [(v, case.graph.variable(v).latest().version) for v in case.evidence_var_ids]

        def run():
            return run_attribution(case.graph, case, faultsim.omniscient_judge(case),
                                   ExploreConfig(), seeds=seeds)

        a, b = run(), run()
        assert (a.predicted_op_id, a.iterations, a.explanation) == \
               (b.predicted_op_id, b.iterations, b.explanation)
        assert (a.meter.input_tokens, a.meter.output_tokens, a.meter.wall_time) == \
               (b.meter.input_tokens, b.meter.output_tokens, b.meter.wall_time)

    def test_summarization_inside_run_keeps_invariant(self):
        case = seed7(fault="response")
        seeds = [(v, case.graph.variable(v).latest().version) for v in case.evidence_var_ids]
        sys_estimate = 600  # generous bound for pinned prefix
        config = ExploreConfig(context_threshold=sys_estimate + 1400)
        result = run_attribution(case.graph, case, faultsim.omniscient_judge(case),
                                 config, seeds=seeds)
        assert result.terminated_by == "report"
        assert result.predicted_op_id == case.truth_op_id


class TestPriorKnowledge:
    def test_prior_knowledge_lands_in_system_turn(self):
        case = seed7()
        seen = {}

        class Spy:
            name = "spy"
            deterministic = True

            def complete(self, turns, temperature, tools_schema=None):
                seen["system"] = turns[0].content
                return ChatTurn("assistant", directive(
                    "report_fault", op="generate", error_type="response", explanation="x"))

        run_attribution(case.graph, case, Spy(), ExploreConfig(),
                        seeds=[(case.evidence_var_ids[0], 0)],
                        prior_knowledge="PIPELINE OVERVIEW TEXT")
        assert "PIPELINE OVERVIEW TEXT" in seen["system"]
        from tracegraph.attribution import DECISIVE_ERROR_CRITERION
        assert DECISIVE_ERROR_CRITERION in seen["system"]
