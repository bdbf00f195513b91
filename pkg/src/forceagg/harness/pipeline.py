"""End-to-end force aggregation: cluster, specify, select, penalize, recluster, rank, aggregate."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

from ..aggregate import ForceElement, aggregate, final_fit
from ..annealer import AnnealConfig, AnnealResult, TraceRecord, anneal
from ..evidence import ConflictMatrix, HardAssignment, Report, build_conflict_matrix, energy
from ..refine import RefineOptions, RefineResult, _candidates, build_interactions, refined_cluster
from ..specification import (
    DEFAULT_CORE_THRESHOLD,
    ClusterPartition,
    CorePartition,
    CredibilityRecord,
    credibility_table,
    extract_cores,
)
from ..templates import (
    Template,
    TemplateFit,
    basic_belief_not_in,
    cluster_support,
    rank_templates,
    template_interaction,
)


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class PipelineConfig:
    anneal: AnnealConfig = field(default_factory=AnnealConfig)
    core_threshold: float = DEFAULT_CORE_THRESHOLD
    penalty_mode: str = "home"
    restart_on_promotion: bool = False

    def __post_init__(self):
        if not 0.0 < self.core_threshold <= 1.0:
            raise ValueError("core threshold must lie in (0, 1]")
        self.refine_options  # validates penalty_mode

    @property
    def refine_options(self) -> RefineOptions:
        return RefineOptions(self.penalty_mode, self.restart_on_promotion)

    def to_dict(self) -> dict:
        return {
            "anneal": self.anneal.to_dict(),
            "core_threshold": self.core_threshold,
            "penalty_mode": self.penalty_mode,
            "restart_on_promotion": self.restart_on_promotion,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> PipelineConfig:
        """Accepts nested ``{"anneal": {...}}`` or flat annealer keys."""
        anneal_keys = set(AnnealConfig.__dataclass_fields__)
        nested = dict(doc.get("anneal", {}))
        nested.pop("alpha_by_k", None)
        for key in anneal_keys:
            if key in doc:
                nested[key] = doc[key]
        unknown = set(doc) - anneal_keys - {"anneal", "core_threshold", "penalty_mode", "restart_on_promotion"}
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        base = cls()
        return cls(
            anneal=AnnealConfig(**nested),
            core_threshold=float(doc.get("core_threshold", base.core_threshold)),
            penalty_mode=str(doc.get("penalty_mode", base.penalty_mode)),
            restart_on_promotion=bool(doc.get("restart_on_promotion", base.restart_on_promotion)),
        )

    def with_(self, **changes) -> PipelineConfig:
        return replace(self, **changes)


@dataclass
class PipelineResult:
    step1: HardAssignment
    step1_result: AnnealResult | None
    credibility: list[CredibilityRecord] | None
    cores: CorePartition
    selected: list[tuple[Template, TemplateFit] | None]
    refine: RefineResult
    final_ranking: list[list[TemplateFit]]
    force_elements: list[ForceElement]
    document: dict
    timings: dict[str, float] = field(default_factory=dict)


def _trace_doc(trace: Sequence[TraceRecord]) -> list[dict]:
    return [asdict(t) for t in trace]


class _Stages:
    """Runs step functions, accumulating wall time and tagging failures with the step."""

    def __init__(self):
        self.timings: dict[str, float] = {}

    def __call__(self, name: str, fn, *args, **kwargs):
        start = time.perf_counter()
        try:
            return fn(*args, **kwargs)
        except Exception as exc:
            raise PipelineError(name, exc) from exc
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - start


def run_pipeline(reports: Sequence[Report], catalog: Sequence[Template], config: PipelineConfig,
                 assignment: HardAssignment | None = None, cores: CorePartition | None = None,
                 j: ConflictMatrix | None = None) -> PipelineResult:
    """Run all seven steps and collect every intermediate artifact.

    ``assignment`` replaces step 1; ``cores`` replaces steps 1-2 (its
    clusters define the step-1 partition).
    """
    _stage = _Stages()
    k = config.anneal.k
    universe = reports[0].universe
    by_id = {r.id: r for r in reports}
    if j is None:
        j = _stage("conflict", build_conflict_matrix, reports)
    ids = j.ids
    doc: dict = {"config": config.to_dict(), "universe": list(universe.labels)}

    # Step 1: standard clustering
    step1_result = None
    if cores is not None:
        if cores.k != k:
            raise PipelineError("step1", ValueError(f"cores define {cores.k} clusters, config.k={k}"))
        assignment = HardAssignment(
            {rid: a + 1 for a, (c, nc) in enumerate(zip(cores.cores, cores.non_cores)) for rid in c + nc}, k)
        source = "cores"
    elif assignment is None:
        step1_result = _stage("step1", anneal, j, config.anneal)
        assignment = step1_result.assignment
        source = "anneal"
    else:
        source = "given"
    if assignment.k != k:
        raise PipelineError("step1", ValueError(f"assignment has k={assignment.k}, config.k={k}"))
    partition1 = _stage("step1", ClusterPartition.from_assignment, assignment, ids)
    step1 = {
        "source": source,
        "assignment": {rid: assignment.cluster_of[rid] for rid in ids},
        "clusters": [list(m) for m in partition1.members],
        "energy": energy(assignment, j),
    }
    if step1_result is not None:
        step1.update({
            "converged": step1_result.converged,
            "t_c": asdict(step1_result.t_c),
            "trace": _trace_doc(step1_result.trace),
        })
    doc["step1"] = step1

    # Step 2: credibility and cores
    table = None
    if cores is None:
        table = _stage("step2", credibility_table, partition1, j)
        cores = _stage("step2", extract_cores, partition1, j, config.core_threshold, table)
    core_set = set(cores.core_map())
    doc["step2"] = {
        "threshold": cores.threshold,
        "credibility": None if table is None else [
            {"id": rec.report_id, "home": rec.home, "plausibilities": list(rec.plausibilities),
             "credibility": rec.credibility, "core": rec.report_id in core_set}
            for rec in table
        ],
        "cores": [list(c) for c in cores.cores],
        "non_cores": [list(c) for c in cores.non_cores],
        "empty_cores": cores.empty_cores,
    }

    # Step 3: template per core
    selected: list[tuple[Template, TemplateFit] | None] = []
    step3 = []
    for a in range(k):
        core_reports = [by_id[r] for r in cores.cores[a]]
        ranked = _stage("step3", rank_templates, core_reports, catalog, universe) if catalog else []
        best = ranked[0] if ranked and ranked[0][1].feasible else None
        selected.append(best)
        entry = {
            "cluster": a + 1,
            "template": None if best is None else best[0].name,
            "fit": None if best is None else best[1].to_dict(),
            "ranking": [f.to_dict() for _, f in ranked],
            "support": None,
            "flags": [],
        }
        if best is not None:
            sup = cluster_support(best[0], core_reports, [], universe)
            entry["support"] = [{k_: row[k_] for k_ in ("subset", "ST", "SC", "AC")} for row in sup.table()]
        if not core_reports:
            entry["flags"].append("empty core")
        if best is None:
            entry["flags"].append("no feasible template")
        step3.append(entry)
    doc["step3"] = {"clusters": step3}

    # Step 4: basic beliefs against the non-core and template interactions
    templates = [None if s is None else s[0] for s in selected]
    interactions, flags4 = _stage("step4", build_interactions, cores.cores, cores.non_cores, templates,
                                  by_id, ids, universe, config.penalty_mode)
    step4 = []
    for a in range(k):
        cand = [by_id[r] for r in _candidates(a, cores.non_cores, config.penalty_mode)]
        entry: dict = {"cluster": a + 1, "template": None if templates[a] is None else templates[a].name}
        if templates[a] is not None:
            sup = cluster_support(templates[a], [by_id[r] for r in cores.cores[a]], cand, universe)
            entry["feasible"] = sup.feasible
            entry["support"] = sup.table()
            beliefs = []
            for r in cand:
                m = basic_belief_not_in(r, sup.snc, sup.nac)
                beliefs.append({"id": r.id, "m": float(m), "m_exact": str(m),
                                "interaction": template_interaction(m, is_core=False)})
            entry["beliefs"] = beliefs
        step4.append(entry)
    doc["step4"] = {
        "penalty_mode": config.penalty_mode,
        "clusters": step4,
        "interactions": {rid: [float(x) for x in interactions[i]] for i, rid in enumerate(ids)},
        "flags": flags4,
    }

    # Step 5: refined clustering
    refined = _stage("step5", refined_cluster, reports, cores, templates, j, config.anneal,
                     config.refine_options)
    assign5 = refined.partition.to_assignment()
    doc["step5"] = {
        "assignment": {rid: assign5.cluster_of[rid] for rid in ids},
        "clusters": [list(m) for m in refined.partition.members],
        "energy": energy(assign5, j),
        "converged": refined.converged,
        "promotions": [asdict(p) for p in refined.promotions],
        "final_cores": [list(c) for c in refined.final_cores],
        "flags": refined.flags,
        "trace": _trace_doc(refined.trace),
    }

    # Step 6: rank all templates against the final membership
    ranking = []
    for members in refined.partition.members:
        ranking.append(_stage("step6", final_fit, [by_id[r] for r in members], catalog, universe)
                       if catalog else [])
    doc["step6"] = {"clusters": [{"cluster": a + 1, "ranking": [f.to_dict() for f in fits]}
                                 for a, fits in enumerate(ranking)]}

    # Step 7: aggregate
    elements = _stage("step7", aggregate, refined.partition, by_id, catalog, universe)
    doc["step7"] = {"force_elements": [e.to_dict() for e in elements]}

    return PipelineResult(assignment, step1_result, table, cores, selected, refined, ranking, elements, doc,
                          _stage.timings)
