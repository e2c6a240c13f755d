"""Cut-set validity, exhaustive minimal-set search, singleton reduction, scoring."""

import itertools

import pytest
from helpers import chain_graph, diamond_graph

from tracegraph import faultsim
from tracegraph.attribution import (
    ERROR_TYPES,
    brute_force_decisive_sets,
    check_candidate,
    is_sequential,
    score,
    singleton_decisive,
)
from tracegraph.errors import NoFault, NotSequential, TooLarge
from tracegraph.explorer import AttributionResult
from tracegraph.faultsim import CorruptionOutcome, SetFaultOracle
from tracegraph.llm import CostMeter


def chain_oracles(faulty: set[str]):
    g = chain_graph(3)
    return g, SetFaultOracle(frozenset(faulty)), CorruptionOutcome(g, frozenset(faulty), "v3")


class TestCheckCandidate:
    def test_empty_candidate_never_rescues_a_failed_run(self):
        g, fo, oo = chain_oracles({"o2"})
        verdict = check_candidate(g, [], fo, oo)
        assert verdict.all_faulty and verdict.ancestors_correct
        assert not verdict.rescues and not verdict.valid

    def test_exact_fault_is_valid(self):
        g, fo, oo = chain_oracles({"o2"})
        assert check_candidate(g, ["o2"], fo, oo).valid

    def test_correct_member_fails_condition_one(self):
        g, fo, oo = chain_oracles({"o2"})
        verdict = check_candidate(g, ["o3"], fo, oo)
        assert not verdict.all_faulty and not verdict.valid

    def test_faulty_ancestor_fails_condition_two(self):
        g, fo, oo = chain_oracles({"o1", "o2"})
        verdict = check_candidate(g, ["o2"], fo, oo)
        assert verdict.all_faulty and not verdict.ancestors_correct


class TestBruteForce:
    def test_single_fault_graph(self):
        g, fo, oo = chain_oracles({"o1"})
        assert brute_force_decisive_sets(g, fo, oo) == [frozenset({"o1"})]

    def test_chain_mid_fault_full_enumeration(self):
        g, fo, oo = chain_oracles({"o2"})
        assert brute_force_decisive_sets(g, fo, oo) == [frozenset({"o2"})]
        # cross-check against direct enumeration of all 8 subsets
        valid = [frozenset(c) for size in range(4)
                 for c in itertools.combinations(["o1", "o2", "o3"], size)
                 if check_candidate(g, c, fo, oo).valid]
        minimal = [v for v in valid if not any(o < v for o in valid)]
        assert minimal == [frozenset({"o2"})]

    def test_two_independent_faults_need_both(self):
        g = diamond_graph()
        faulty = frozenset({"o2", "o3"})
        fo = SetFaultOracle(faulty)
        oo = CorruptionOutcome(g, faulty, "final")
        sets = brute_force_decisive_sets(g, fo, oo)
        assert sets == [frozenset({"o2", "o3"})]

    def test_minimality_of_returned_sets(self):
        g = diamond_graph()
        faulty = frozenset({"o2", "o3"})
        fo = SetFaultOracle(faulty)
        oo = CorruptionOutcome(g, faulty, "final")
        for kept in brute_force_decisive_sets(g, fo, oo):
            assert check_candidate(g, kept, fo, oo).valid
            for size in range(len(kept)):
                for sub in itertools.combinations(sorted(kept), size):
                    assert not check_candidate(g, sub, fo, oo).valid

    def test_size_cap(self):
        case = faultsim.generate(faultsim.SimConfig(seed=1, n_messages=20))
        with pytest.raises(TooLarge):
            brute_force_decisive_sets(case.graph, SetFaultOracle(frozenset()),
                                      CorruptionOutcome(case.graph, frozenset(), "prediction"))


class TestSingleton:
    def test_sequential_pipeline_fault_at_index_two(self):
        g = chain_graph(6)
        faulty = frozenset({"o3"})
        fo = SetFaultOracle(faulty)
        oo = CorruptionOutcome(g, faulty, "v6")
        assert singleton_decisive(g, fo, oo) == "o3"
        assert brute_force_decisive_sets(g, fo, oo) == [frozenset({"o3"})]

    def test_no_fault(self):
        g = chain_graph(3)
        with pytest.raises(NoFault):
            singleton_decisive(g, SetFaultOracle(frozenset()),
                               CorruptionOutcome(g, frozenset(), "v3"))

    def test_non_sequential_graph_rejected(self):
        g = diamond_graph()
        assert not is_sequential(g)
        with pytest.raises(NotSequential):
            singleton_decisive(g, SetFaultOracle(frozenset({"o2"})),
                               CorruptionOutcome(g, frozenset({"o2"}), "final"))

    def test_simulator_graphs_are_sequential(self):
        for fault in ("extraction", "response"):
            case = faultsim.generate(faultsim.SimConfig(seed=3, n_messages=5, fault=fault))
            assert is_sequential(case.graph)


def result(case_id, op, err, tokens=0, seconds=0.0):
    return AttributionResult(case_id=case_id, predicted_op_id=op, error_type=err,
                             explanation="", meter=CostMeter(input_tokens=tokens,
                                                             wall_time=seconds),
                             iterations=1, terminated_by="report")


class TestScore:
    def test_all_correct(self):
        truths = {"a": ("o1", "update"), "b": ("o2", "response")}
        results = [result("a", "o1", "update"), result("b", "o2", "response")]
        s = score(results, truths)
        assert (s.eta, s.oia) == (1.0, 1.0)

    def test_partial(self):
        truths = {f"c{i}": ("op", "update") for i in range(4)}
        results = [
            result("c0", "op", "update"),      # both right
            result("c1", "wrong", "update"),   # type right
            result("c2", "wrong", "update"),   # type right
            result("c3", "wrong", "deletion"),  # both wrong
        ]
        s = score(results, truths)
        assert s.eta == pytest.approx(0.75)
        assert s.oia == pytest.approx(0.25)

    def test_cost_means(self):
        truths = {"a": ("o", "update"), "b": ("o", "update")}
        results = [result("a", "o", "update", tokens=1000, seconds=60.0),
                   result("b", "o", "update", tokens=3000, seconds=180.0)]
        s = score(results, truths)
        assert s.mean_tokens_k == pytest.approx(2.0)
        assert s.mean_minutes == pytest.approx(2.0)

    def test_permutation_invariant(self):
        truths = {f"c{i}": ("o", "update") for i in range(5)}
        results = [result(f"c{i}", "o" if i % 2 else "x", "update", tokens=i * 100)
                   for i in range(5)]
        forward = score(results, truths)
        backward = score(list(reversed(results)), truths)
        assert forward == backward

    def test_budget_results_miss_both(self):
        truths = {"a": ("o1", "update")}
        budget = AttributionResult(case_id="a", predicted_op_id="", error_type=None,
                                   explanation="", meter=CostMeter(), iterations=200,
                                   terminated_by="budget")
        s = score([budget], truths)
        assert (s.eta, s.oia) == (0.0, 0.0)

    def test_empty_results(self):
        s = score([], {})
        assert (s.eta, s.oia, s.mean_tokens_k, s.mean_minutes) == (0.0, 0.0, 0.0, 0.0)

    def test_taxonomy_has_exactly_seven_types(self):
        assert len(ERROR_TYPES) == 7
        assert set(faultsim.SYSTEM_ERROR_TYPES) < set(ERROR_TYPES)
        assert len(faultsim.SYSTEM_ERROR_TYPES) == 5
