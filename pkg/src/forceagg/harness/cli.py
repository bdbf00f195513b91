"""Command-line entry point.

Exit codes: 0 success, 2 invalid input, 3 exhaustive-search guard refused.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from typing import Sequence

from ..annealer import TraceRecord, anneal
from ..evidence import build_conflict_matrix, energy
from ..specification import ClusterPartition
from .io import InputError, parse_assignment, parse_catalog, parse_reports, read_json, write_json
from .metrics import evaluate
from .oracles import GuardRefused, oracle_exact_conflict, oracle_min_energy
from .pipeline import PipelineConfig, PipelineError, run_pipeline
from .scenario import generate_scenario, scenario_from_dict, spec_from_dict

EXIT_OK, EXIT_INVALID, EXIT_GUARD = 0, 2, 3

log = logging.getLogger("forceagg")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--k", type=int, help="number of clusters")
    p.add_argument("--seed", type=int, help="RNG seed")
    p.add_argument("--core-threshold", type=float, help="credibility a report must exceed to join a core")
    p.add_argument("--penalty-mode", choices=["home", "all"], help="which cluster columns carry template penalties")
    p.add_argument("--restart-on-promotion", action="store_true", default=None,
                   help="reinitialize free spins and reheat after each promotion")
    p.add_argument("--config", help="JSON config file (annealer constants and pipeline options)")
    p.add_argument("--emit-trace", metavar="FILE", help="write the annealing trace as JSON lines")
    p.add_argument("-o", "--output", help="output file (default stdout)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="forceagg", description="Evidence clustering and template-based force aggregation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cluster", parents=[common], help="standard clustering only (step 1)")
    p.add_argument("reports")

    p = sub.add_parser("pipeline", parents=[common], help="steps 1-7")
    p.add_argument("reports")
    p.add_argument("templates")

    p = sub.add_parser("refine", parents=[common], help="steps 2-7 from a given assignment")
    p.add_argument("reports")
    p.add_argument("templates")
    p.add_argument("assignment")

    p = sub.add_parser("gen", parents=[common], help="generate a synthetic scenario")
    p.add_argument("spec", help="scenario spec JSON (universe, templates, units, noise parameters)")

    p = sub.add_parser("oracle", parents=[common], help="exhaustive minimum energy / exact conflict")
    p.add_argument("reports")
    p.add_argument("--exact-conflict", action="store_true", help="also report exact combined conflict")

    p = sub.add_parser("eval", parents=[common], help="score results against scenario ground truth")
    p.add_argument("scenarios", nargs="+")
    p.add_argument("--result", help="pipeline or cluster output to score (single scenario only)")
    p.add_argument("--jobs", type=int, default=1, help="scenarios evaluated in parallel")

    sub.add_parser("config", parents=[common], help="print the effective configuration")
    return parser


def load_config(args: argparse.Namespace, default_k: int | None = None) -> PipelineConfig:
    config = PipelineConfig.from_dict(read_json(args.config)) if args.config else PipelineConfig()
    anneal_changes = {}
    if args.k is not None:
        anneal_changes["k"] = args.k
    elif default_k is not None and not args.config:
        anneal_changes["k"] = default_k
    if args.seed is not None:
        anneal_changes["seed"] = args.seed
    changes = {}
    if anneal_changes:
        changes["anneal"] = config.anneal.with_(**anneal_changes)
    if args.core_threshold is not None:
        changes["core_threshold"] = args.core_threshold
    if args.penalty_mode is not None:
        changes["penalty_mode"] = args.penalty_mode
    if args.restart_on_promotion:
        changes["restart_on_promotion"] = True
    return config.with_(**changes) if changes else config


def _write_trace(path: str, phases: Sequence[tuple[str, Sequence[TraceRecord]]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for phase, trace in phases:
            for rec in trace:
                fh.write(json.dumps({"phase": phase, **asdict(rec)}) + "\n")


def cmd_cluster(args) -> int:
    universe, reports = parse_reports(read_json(args.reports))
    config = load_config(args)
    j = build_conflict_matrix(reports)
    res = anneal(j, config.anneal)
    if args.emit_trace:
        _write_trace(args.emit_trace, [("step1", res.trace)])
    write_json({
        "config": config.anneal.to_dict(),
        "k": config.anneal.k,
        "assignment": {rid: res.assignment.cluster_of[rid] for rid in j.ids},
        "energy": energy(res.assignment, j),
        "converged": res.converged,
        "t_c": asdict(res.t_c),
        "trace": [asdict(t) for t in res.trace],
    }, args.output)
    return EXIT_OK


def _pipeline(args, assignment_path: str | None) -> int:
    rdoc = read_json(args.reports)
    universe, reports = parse_reports(rdoc)
    catalog = parse_catalog(read_json(args.templates), universe)
    config = load_config(args)
    assignment = None
    if assignment_path:
        adoc = read_json(assignment_path)
        assignment = parse_assignment(adoc, [r.id for r in reports])
        if args.k is None and assignment.k != config.anneal.k:
            config = config.with_(anneal=config.anneal.with_(k=assignment.k))
    result = run_pipeline(reports, catalog, config, assignment=assignment)
    if args.emit_trace:
        phases = [("step5", result.refine.trace)]
        if result.step1_result is not None:
            phases.insert(0, ("step1", result.step1_result.trace))
        _write_trace(args.emit_trace, phases)
    write_json(result.document, args.output)
    return EXIT_OK


def cmd_pipeline(args) -> int:
    return _pipeline(args, None)


def cmd_refine(args) -> int:
    return _pipeline(args, args.assignment)


def cmd_gen(args) -> int:
    doc = read_json(args.spec)
    spec = spec_from_dict(doc)
    seed = args.seed if args.seed is not None else int(doc.get("seed", 0))
    write_json(generate_scenario(spec, seed).to_dict(), args.output)
    return EXIT_OK


def cmd_oracle(args) -> int:
    _, reports = parse_reports(read_json(args.reports))
    if args.k is None:
        raise InputError("oracle needs --k")
    assign, e = oracle_min_energy(reports, args.k)
    out = {"k": args.k, "energy": e, "assignment": dict(assign.cluster_of)}
    if args.exact_conflict:
        out["exact_conflict"] = oracle_exact_conflict(reports)
    write_json(out, args.output)
    return EXIT_OK


def _score_scenario(path: str, config_doc: dict, overrides: dict) -> dict:
    doc = read_json(path)
    truth, _ = scenario_from_dict(doc)
    universe, reports = parse_reports(doc)
    catalog = parse_catalog(doc, universe)
    config = PipelineConfig.from_dict(config_doc)
    anneal_over = {key: overrides[key] for key in ("k", "seed") if overrides.get(key) is not None}
    if "k" not in anneal_over and not config_doc.get("anneal", {}).get("k") and "k" not in config_doc:
        anneal_over["k"] = len(truth)
    config = config.with_(anneal=config.anneal.with_(**anneal_over))
    rest = {key: overrides[key] for key in ("core_threshold", "penalty_mode", "restart_on_promotion")
            if overrides.get(key) is not None}
    if rest:
        config = config.with_(**rest)
    result = run_pipeline(reports, catalog, config)
    ids = [r.id for r in reports]
    step1 = evaluate(ClusterPartition.from_assignment(result.step1, ids), truth)
    names = {e.cluster: e.template for e in result.force_elements}
    final = evaluate(result.refine.partition, truth, names)
    final.runtimes = {k: round(v, 6) for k, v in result.timings.items()}
    return {"scenario": path, "step1": step1.to_dict(), "final": final.to_dict()}


def cmd_eval(args) -> int:
    if args.result:
        if len(args.scenarios) != 1:
            raise InputError("--result scores exactly one scenario")
        truth, _ = scenario_from_dict(read_json(args.scenarios[0]))
        res = read_json(args.result)
        raw = res.get("step5", res).get("assignment") if isinstance(res, dict) else None
        if raw is None:
            raise InputError("result document has no assignment")
        k = max(len(truth), max(raw.values()))
        partition = ClusterPartition.from_assignment(parse_assignment({"k": k, "assignment": raw}, list(raw)),
                                                     list(raw))
        templates = None
        if "step7" in res:
            templates = {e["cluster"]: e["template"] for e in res["step7"]["force_elements"]}
        write_json(evaluate(partition, truth, templates).to_dict(), args.output)
        return EXIT_OK

    config_doc = read_json(args.config) if args.config else {}
    overrides = {"k": args.k, "seed": args.seed, "core_threshold": args.core_threshold,
                 "penalty_mode": args.penalty_mode, "restart_on_promotion": args.restart_on_promotion}
    if args.jobs > 1 and len(args.scenarios) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_score_scenario, args.scenarios,
                                 [config_doc] * len(args.scenarios), [overrides] * len(args.scenarios)))
    else:
        rows = [_score_scenario(p, config_doc, overrides) for p in args.scenarios]
    summary = {
        "scenarios": len(rows),
        "step1_misplacements": sum(r["step1"]["misplacements"] for r in rows),
        "final_misplacements": sum(r["final"]["misplacements"] for r in rows),
    }
    write_json({"results": rows, "summary": summary}, args.output)
    return EXIT_OK


def cmd_config(args) -> int:
    write_json(load_config(args).to_dict(), args.output)
    return EXIT_OK


COMMANDS = {
    "cluster": cmd_cluster,
    "pipeline": cmd_pipeline,
    "refine": cmd_refine,
    "gen": cmd_gen,
    "oracle": cmd_oracle,
    "eval": cmd_eval,
    "config": cmd_config,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except GuardRefused as exc:
        print(f"forceagg: refused: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except PipelineError as exc:
        print(f"forceagg: {exc.stage} failed: {exc.cause}", file=sys.stderr)
        return EXIT_INVALID
    except (InputError, ValueError, KeyError) as exc:
        print(f"forceagg: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    raise SystemExit(main())
