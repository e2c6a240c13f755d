"""Operator command line: validate, viz, attribute, bench, report, optimize.

Exit codes: 0 success, 1 validation violations, 2 missing/unreadable input,
3 attribution budget exhausted. Human tables are printed with two-decimal
percentages; every command also writes machine-readable JSON.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

from . import faultsim, oplog, persist, report as report_mod
from .attribution import score
from .errors import ParseError, TraceGraphError, ValidationError
from .explorer import AttributionResult, ExploreConfig, run_attribution
from .graph import ExecutionGraph, validate
from .llm import Backend, CostMeter, HttpBackend, ScriptedBackend


def result_to_dict(result: AttributionResult) -> dict:
    return {
        "case_id": result.case_id,
        "predicted_op_id": result.predicted_op_id,
        "error_type": result.error_type,
        "explanation": result.explanation,
        "iterations": result.iterations,
        "terminated_by": result.terminated_by,
        "input_tokens": result.meter.input_tokens,
        "output_tokens": result.meter.output_tokens,
        "wall_time_s": result.meter.wall_time,
    }


def result_from_dict(doc: dict) -> AttributionResult:
    meter = CostMeter(input_tokens=int(doc["input_tokens"]),
                      output_tokens=int(doc["output_tokens"]),
                      wall_time=float(doc["wall_time_s"]))
    return AttributionResult(
        case_id=doc["case_id"], predicted_op_id=doc["predicted_op_id"],
        error_type=doc.get("error_type"), explanation=doc.get("explanation", ""),
        meter=meter, iterations=int(doc["iterations"]), terminated_by=doc["terminated_by"])


def write_results(results: Sequence[AttributionResult], path: str) -> None:
    docs = [result_to_dict(r) for r in sorted(results, key=lambda r: r.case_id)]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(docs, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")


def read_results(path: str) -> list[AttributionResult]:
    with open(path, "r", encoding="utf-8") as fh:
        return [result_from_dict(doc) for doc in json.load(fh)]


def _case_from_doc(doc: dict, graph: ExecutionGraph) -> faultsim.FaultCase:
    return faultsim.FaultCase(
        case_id=doc["case_id"], graph=graph, question_var=doc["question_var"],
        golden_answer=doc["golden_answer"],
        evidence_var_ids=list(doc.get("evidence_var_ids", [])),
        truth_op_id=doc.get("truth_op_id"), truth_error_type=doc.get("truth_error_type"),
        outcome=int(doc.get("outcome", 1)),
        config=faultsim.SimConfig(seed=int(doc.get("seed", 0)),
                                  fault=doc.get("truth_error_type")))


def _make_backend(spec: str, case: faultsim.FaultCase, method: str) -> Backend:
    if spec == "omniscient":
        if method == "obs":
            return faultsim.omniscient_obs_judge(case)
        return faultsim.omniscient_judge(case)
    if spec.startswith("scripted:"):
        path = spec.split(":", 1)[1]
        with open(path, "r", encoding="utf-8") as fh:
            return ScriptedBackend(responses=json.load(fh))
    if spec == "http":
        return HttpBackend()
    raise TraceGraphError(f"unknown backend {spec!r}; use omniscient, scripted:PATH or http")


def _explore_config(args: argparse.Namespace) -> ExploreConfig:
    return ExploreConfig(n=args.list_size, context_threshold=args.context_threshold,
                         max_iters=args.max_iters, temperature=args.temperature)


def _run_one(case: faultsim.FaultCase, method: str, backend_spec: str,
             config: ExploreConfig, seed_evidence: bool,
             prior_knowledge: Optional[str]) -> AttributionResult:
    backend = _make_backend(backend_spec, case, method)
    if method == "obs":
        return oplog.run_attribution_obs(case.graph, case, backend, config)
    seeds = None
    if seed_evidence:
        seeds = [(var_id, case.graph.variable(var_id).latest().version)
                 for var_id in case.evidence_var_ids]
    return run_attribution(case.graph, case, backend, config, seeds=seeds,
                           prior_knowledge=prior_knowledge)


# ---------------------------------------------------------------------------
# subcommands


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        with open(args.path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        graph = persist.import_(data)
    except ParseError as exc:
        print(f"parse error at offset {exc.offset}: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"{exc.code}: {exc}")
        return 1
    report = validate(graph)
    for v in report.violations:
        print(f"{v.severity.upper()} {v.code} [{v.offender}]: {v.message}")
    if not report.ok:
        return 1
    print(f"ok: {len(graph.operations)} operations, {len(graph.variables)} variables, "
          f"{len(graph.edges)} edges")
    return 0


def cmd_viz(args: argparse.Namespace) -> int:
    try:
        graph = persist.load(args.path)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    dot = persist.export_dot(graph, max_value_chars=args.max_value_chars)
    with open(args.out, "wb") as fh:
        fh.write(dot)
    print(f"wrote {args.out}")
    return 0


def cmd_attribute(args: argparse.Namespace) -> int:
    try:
        graph = persist.load(args.path)
        with open(args.case, "r", encoding="utf-8") as fh:
            case_doc = json.load(fh)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ParseError, ValidationError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    case = _case_from_doc(case_doc, graph)
    prior = None
    if args.prior_knowledge:
        with open(args.prior_knowledge, "r", encoding="utf-8") as fh:
            prior = fh.read()
    result = _run_one(case, args.method, args.backend, _explore_config(args),
                      args.seed_evidence, prior)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(result_to_dict(result), fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"{result.case_id}: {result.terminated_by} predicted={result.predicted_op_id or '-'} "
          f"type={result.error_type or '-'} iterations={result.iterations}")
    return 0 if result.terminated_by == "report" else 3


def _parse_mix(raw: Optional[str]) -> Optional[dict[str, int]]:
    if not raw or raw == "uniform":
        return None
    mix: dict[str, int] = {}
    for part in raw.split(","):
        name, _, count = part.partition("=")
        mix[name.strip()] = int(count)
    return mix


def cmd_bench_generate(args: argparse.Namespace) -> int:
    os.makedirs(args.out, exist_ok=True)
    overrides = {}
    for key in ("n_messages", "memories_per_message", "update_prob", "delete_prob", "top_k"):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = value
    cases = faultsim.make_suite(args.n, args.base_seed, mix=_parse_mix(args.mix), **overrides)
    for case in cases:
        faultsim.save_case(case, args.out)
    faultsim.write_manifest(cases, os.path.join(args.out, "manifest.tsv"))
    print(f"wrote {len(cases)} cases to {args.out}")
    return 0


def _suite_cases(suite_dir: str) -> list[faultsim.FaultCase]:
    names = sorted(n for n in os.listdir(suite_dir) if n.endswith(".case.json"))
    return [faultsim.load_case(os.path.join(suite_dir, n)) for n in names]


def cmd_bench_run(args: argparse.Namespace) -> int:
    try:
        cases = _suite_cases(args.suite)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    prior = None
    if args.prior_knowledge:
        with open(args.prior_knowledge, "r", encoding="utf-8") as fh:
            prior = fh.read()
    config = _explore_config(args)

    def run(case: faultsim.FaultCase) -> AttributionResult:
        return _run_one(case, args.method, args.backend, config, args.seed_evidence, prior)

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(run, cases))
    else:
        results = [run(c) for c in cases]
    write_results(results, args.out)
    reported = sum(1 for r in results if r.terminated_by == "report")
    print(f"ran {len(results)} cases ({reported} reported, {len(results) - reported} budget); "
          f"wrote {args.out}")
    return 0


def cmd_bench_score(args: argparse.Namespace) -> int:
    try:
        results = read_results(args.results)
        truths = faultsim.read_manifest(os.path.join(args.suite, "manifest.tsv"))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    scores = score(results, truths)
    table = {
        "cases": len(results),
        "eta_pct": round(scores.eta * 100.0, 10),
        "oia_pct": round(scores.oia * 100.0, 10),
        "mean_tokens_k": scores.mean_tokens_k,
        "mean_minutes": scores.mean_minutes,
    }
    print(f"cases:        {table['cases']}")
    print(f"ETA:          {scores.eta * 100.0:.2f}")
    print(f"OIA:          {scores.oia * 100.0:.2f}")
    print(f"tokens (k):   {scores.mean_tokens_k:.2f}")
    print(f"time (min):   {scores.mean_minutes:.2f}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(table, fh, ensure_ascii=False, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    try:
        results = read_results(args.results)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    exemplar = None
    if args.exemplar:
        with open(args.exemplar, "r", encoding="utf-8") as fh:
            exemplar = fh.read()
    if results:
        backend = _make_backend_simple(args.backend)
        rep = report_mod.build_report(results, backend, batch_size=args.batch_size,
                                      exemplar=exemplar)
    else:
        rep = report_mod.DiagnosticReport()
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(rep.text)
    print(f"report revision {rep.revision} over {len(rep.source_case_ids)} cases -> {args.out}")
    return 0 if not rep.failed else 1


def _make_backend_simple(spec: str) -> Backend:
    if spec.startswith("scripted:"):
        path = spec.split(":", 1)[1]
        with open(path, "r", encoding="utf-8") as fh:
            return ScriptedBackend(responses=json.load(fh))
    if spec == "http":
        return HttpBackend()
    raise TraceGraphError(f"unknown backend {spec!r}; use scripted:PATH or http")


def cmd_optimize(args: argparse.Namespace) -> int:
    try:
        results = read_results(args.results)
        with open(args.registry, "r", encoding="utf-8") as fh:
            registry = report_mod.PromptRegistry.from_json(fh.read())
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    graphs: dict[str, ExecutionGraph] = {}
    for r in results:
        graph_path = os.path.join(args.suite, f"{r.case_id}.trace.json")
        if os.path.exists(graph_path):
            graphs[r.case_id] = persist.load(graph_path)
    if results:
        backend = _make_backend_simple(args.backend)
        registry = report_mod.optimize_round(results, graphs, registry, backend)
    out = args.out or args.registry
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(registry.to_json())
    print(f"registry with {len(registry.prompts)} prompts -> {out}")
    return 0


# ---------------------------------------------------------------------------
# argument wiring


def _add_explore_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", choices=("graph", "obs"), default="graph")
    p.add_argument("--backend", default="omniscient",
                   help="omniscient | scripted:PATH | http")
    p.add_argument("--list-size", type=int, default=16, metavar="N",
                   help="to-explore list capacity (default 16)")
    p.add_argument("--context-threshold", type=int, default=272_000, metavar="T",
                   help="working-context token threshold (default 272000)")
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--seed-evidence", action="store_true",
                   help="initialize the to-explore list from the case's evidence variables")
    p.add_argument("--prior-knowledge", metavar="FILE",
                   help="text file appended to the system instruction")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tracegraph",
                                     description="execution-trace recording and fault attribution")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a trace file against the graph invariants")
    p.add_argument("path")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("viz", help="export a trace to .dot")
    p.add_argument("path")
    p.add_argument("--out", required=True)
    p.add_argument("--max-value-chars", type=int, default=48)
    p.set_defaults(func=cmd_viz)

    p = sub.add_parser("attribute", help="run failure attribution on one case")
    p.add_argument("path", help="graph .trace.json")
    p.add_argument("--case", required=True, help="case spec .case.json")
    p.add_argument("--out", required=True, help="result JSON path")
    _add_explore_args(p)
    p.set_defaults(func=cmd_attribute)

    p = sub.add_parser("bench", help="suite generation, runs and scoring")
    bench_sub = p.add_subparsers(dest="bench_command", required=True)

    g = bench_sub.add_parser("generate")
    g.add_argument("--out", required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--base-seed", type=int, default=1)
    g.add_argument("--mix", help='"uniform" or e.g. "extraction=2,response=2"')
    g.add_argument("--n-messages", dest="n_messages", type=int)
    g.add_argument("--memories-per-message", dest="memories_per_message", type=int)
    g.add_argument("--update-prob", dest="update_prob", type=float)
    g.add_argument("--delete-prob", dest="delete_prob", type=float)
    g.add_argument("--top-k", dest="top_k", type=int)
    g.set_defaults(func=cmd_bench_generate)

    r = bench_sub.add_parser("run")
    r.add_argument("--suite", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--jobs", type=int, default=1)
    _add_explore_args(r)
    r.set_defaults(func=cmd_bench_run)

    s = bench_sub.add_parser("score")
    s.add_argument("--suite", required=True)
    s.add_argument("--results", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_bench_score)

    p = sub.add_parser("report", help="synthesize a diagnostic report from results")
    p.add_argument("--results", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--backend", default="http", help="scripted:PATH | http")
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--exemplar")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("optimize", help="one localized prompt-optimization round")
    p.add_argument("--results", required=True)
    p.add_argument("--suite", required=True, help="directory holding the case graphs")
    p.add_argument("--registry", required=True)
    p.add_argument("--out", help="output registry path (default: overwrite --registry)")
    p.add_argument("--backend", default="http", help="scripted:PATH | http")
    p.set_defaults(func=cmd_optimize)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TraceGraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
