"""Second clustering pass: cores clamped, templates penalizing non-core reports.

Core reports are fixed in their clusters.  Every non-core report is
re-annealed with an extra local-field term ``-log(1 - m)`` where ``m`` is
the basic belief that the report does not belong to a cluster given that
cluster's template and core.  A free report whose spin reaches the
promotion threshold joins the core of that cluster (clusters without a
template take no promotions); the beliefs of the
affected cluster are then recomputed from the enlarged core.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .annealer import AnnealConfig, SpinField, TraceRecord, clamp_vector, init_spin_field, run_schedule, _reset_free_rows
from .evidence import ConflictMatrix, HardAssignment, Report, TypeUniverse
from .specification import ClusterPartition, CorePartition
from .templates import (
    Template,
    admissible,
    basic_belief_not_in,
    evidence_support,
    inadmissible,
    template_interaction,
    template_support,
)

log = logging.getLogger(__name__)

PENALTY_MODES = ("home", "all")


@dataclass(frozen=True)
class RefineOptions:
    # "home": penalize a non-core report only in its own cluster's column;
    # "all": every cluster's template judges the whole non-core pool.
    penalty_mode: str = "home"
    restart_on_promotion: bool = False

    def __post_init__(self):
        if self.penalty_mode not in PENALTY_MODES:
            raise ValueError(f"penalty_mode must be one of {PENALTY_MODES}")


@dataclass(frozen=True)
class Promotion:
    report_id: str
    cluster: int
    step: int
    value: float
    feasible: bool


@dataclass
class RefineState:
    field: SpinField
    interactions: np.ndarray
    cores: list[list[str]]
    non_cores: list[list[str]]
    promotions: list[Promotion] = field(default_factory=list)
    pending_restart: bool = False


@dataclass
class RefineResult:
    partition: ClusterPartition
    promotions: list[Promotion]
    trace: list[TraceRecord]
    converged: bool
    initial_interactions: np.ndarray
    interactions: np.ndarray  # after all promotion refreshes
    final_cores: tuple[tuple[str, ...], ...]
    flags: list[str]


def _column(a: int, template: Template | None, core: Sequence[Report], candidates: Sequence[Report],
            universe: TypeUniverse, pos: Mapping[str, int], out: np.ndarray) -> bool:
    """Fill column ``a`` of ``out`` for ``candidates``; returns template feasibility."""
    out[:, a] = 0.0
    if template is None:
        return True
    ac, feasible = admissible(template_support(template, universe), evidence_support(core, universe))
    snc = evidence_support(candidates, universe)
    nac = inadmissible(snc, ac)
    for r in candidates:
        out[pos[r.id], a] = template_interaction(basic_belief_not_in(r, snc, nac), is_core=False)
    return feasible


def _candidates(a: int, non_cores: Sequence[Sequence[str]], mode: str) -> list[str]:
    if mode == "home":
        return list(non_cores[a])
    return [rid for group in non_cores for rid in group]


def build_interactions(cores: Sequence[Sequence[str]], non_cores: Sequence[Sequence[str]],
                       selected: Sequence[Template | None], reports: Mapping[str, Report],
                       ids: Sequence[str], universe: TypeUniverse,
                       penalty_mode: str = "home") -> tuple[np.ndarray, list[str]]:
    """Template-to-report interaction table, N x K (rows in ``ids`` order).

    Core reports and clusters without a selected template get zeros.
    """
    k = len(cores)
    if len(selected) != k or len(non_cores) != k:
        raise ValueError("need one core, non-core and template entry per cluster")
    pos = {rid: i for i, rid in enumerate(ids)}
    out = np.zeros((len(ids), k))
    flags = []
    for a in range(k):
        if selected[a] is None:
            flags.append(f"cluster {a + 1}: no feasible template, zero interactions")
            continue
        cand = [reports[r] for r in _candidates(a, non_cores, penalty_mode)]
        if not _column(a, selected[a], [reports[r] for r in cores[a]], cand, universe, pos, out):
            flags.append(f"cluster {a + 1}: template {selected[a].name} overcrowded by core")
    return out, flags


def restart_policy(state: RefineState, options: RefineOptions, config: AnnealConfig,
                   rng: np.random.Generator) -> bool:
    """Reinitialize free rows after a promotion when ``restart_on_promotion`` is set.

    Returns True when the caller must also reset the temperature to T_c.
    """
    pending, state.pending_restart = state.pending_restart, False
    if not (options.restart_on_promotion and pending):
        return False
    _reset_free_rows(state.field.v, state.field.clamp, config.epsilon, rng)
    return True


def refined_cluster(reports: Sequence[Report], cores: CorePartition, selected: Sequence[Template | None],
                    j: ConflictMatrix, config: AnnealConfig,
                    options: RefineOptions = RefineOptions()) -> RefineResult:
    if config.k != cores.k:
        raise ValueError(f"config.k={config.k} but {cores.k} clusters given")
    by_id = {r.id: r for r in reports}
    ids = j.ids
    if set(ids) != set(by_id):
        raise ValueError("conflict matrix and reports disagree on ids")
    covered = [r for group in cores.cores + cores.non_cores for r in group]
    if sorted(covered) != sorted(ids):
        raise ValueError("cores and non-cores must partition the reports")
    universe = reports[0].universe
    k = config.k
    pos = {rid: i for i, rid in enumerate(ids)}

    coupling, flags = build_interactions(cores.cores, cores.non_cores, selected, by_id, ids, universe,
                                         options.penalty_mode)
    initial = coupling.copy()
    rng = np.random.default_rng(config.seed)
    field = init_spin_field(len(ids), config, clamp_vector(ids, cores.core_map(), k), rng)
    state = RefineState(field, coupling, [list(c) for c in cores.cores], [list(c) for c in cores.non_cores])

    def refresh(a: int) -> bool:
        cand = [by_id[r] for r in _candidates(a, state.non_cores, options.penalty_mode)]
        return _column(a, selected[a], [by_id[r] for r in state.cores[a]], cand, universe, pos, coupling)

    def after_sweep(f: SpinField, step: int) -> bool:
        v, clamp = f.v, f.clamp
        for i in np.flatnonzero(clamp < 0):
            a = int(v[i].argmax())
            val = float(v[i, a])
            # a cluster without a template has no penalties to refresh, so nothing to promote into
            if selected[a] is None or not config.promote_threshold <= val < 1.0:
                continue
            rid = ids[i]
            v[i] = 0.0
            v[i, a] = 1.0
            clamp[i] = a
            coupling[i] = 0.0
            for group in state.non_cores:
                if rid in group:
                    group.remove(rid)
            state.cores[a].append(rid)
            if options.penalty_mode == "all":
                feasible = all([refresh(b) for b in range(k)])
            else:
                feasible = refresh(a)
            feasible = feasible and admissible(template_support(selected[a], universe),
                                  evidence_support([by_id[r] for r in state.cores[a]], universe))[1]
            if not feasible:
                flags.append(f"step {step}: promoting {rid} overcrowds template of cluster {a + 1}")
            state.promotions.append(Promotion(rid, a + 1, step, val, feasible))
            state.pending_restart = True
            log.debug("promoted %s into cluster %d at step %d (V=%.4f)", rid, a + 1, step, val)
        return restart_policy(state, options, config, rng)

    trace, converged, _ = run_schedule(field, j.values, config, rng, coupling, after_sweep)
    labels = field.v.argmax(axis=1)
    partition = ClusterPartition.from_assignment(HardAssignment.from_labels(ids, labels, k), ids)
    return RefineResult(partition, state.promotions, trace, converged, initial, coupling,
                        tuple(tuple(c) for c in state.cores), flags)
