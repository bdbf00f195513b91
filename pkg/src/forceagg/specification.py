"""Credibility of cluster membership and the core/non-core split."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .evidence import ConflictMatrix, HardAssignment, Report

DEFAULT_CORE_THRESHOLD = 0.5


@dataclass(frozen=True)
class ClusterPartition:
    """``members[a]`` lists the report ids of cluster ``a + 1``."""

    k: int
    members: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        if len(self.members) != self.k:
            raise ValueError(f"expected {self.k} member lists, got {len(self.members)}")
        seen: set[str] = set()
        for group in self.members:
            dup = seen.intersection(group)
            if dup or len(set(group)) != len(group):
                raise ValueError(f"report(s) {sorted(dup) or group} placed in more than one cluster")
            seen.update(group)

    @classmethod
    def from_assignment(cls, assign: HardAssignment, ids: Sequence[str]) -> ClusterPartition:
        groups: list[list[str]] = [[] for _ in range(assign.k)]
        for rid in ids:
            groups[assign.cluster_of[rid] - 1].append(rid)
        return cls(assign.k, tuple(tuple(g) for g in groups))

    def home_of(self) -> dict[str, int]:
        """Report id -> 1-based cluster."""
        return {rid: a + 1 for a, group in enumerate(self.members) for rid in group}

    def to_assignment(self) -> HardAssignment:
        return HardAssignment(self.home_of(), self.k)


@dataclass(frozen=True)
class CredibilityRecord:
    report_id: str
    home: int
    plausibilities: tuple[float, ...]
    credibility: float


@dataclass(frozen=True)
class CorePartition:
    cores: tuple[tuple[str, ...], ...]
    non_cores: tuple[tuple[str, ...], ...]
    threshold: float

    @property
    def k(self) -> int:
        return len(self.cores)

    @property
    def empty_cores(self) -> list[int]:
        return [a + 1 for a, c in enumerate(self.cores) if not c]

    def core_map(self) -> dict[str, int]:
        return {rid: a + 1 for a, c in enumerate(self.cores) for rid in c}


def _member_index(partition: ClusterPartition, ids: Sequence[str]) -> list[np.ndarray]:
    pos = {rid: i for i, rid in enumerate(ids)}
    return [np.array([pos[r] for r in group], dtype=np.int64) for group in partition.members]


def plausibility(i: str, b: int, partition: ClusterPartition, j: ConflictMatrix) -> float:
    """Plausibility that report ``i`` belongs to cluster ``b`` (1-based).

    One minus the pairwise-approximated conflict with the cluster's other
    members: ``exp(-sum_j J_ij)``.
    """
    pos = {rid: idx for idx, rid in enumerate(j.ids)}
    row = pos[i]
    others = [pos[r] for r in partition.members[b - 1] if r != i]
    return math.exp(-float(j.values[row, others].sum()))


def _plausibility_rows(partition: ClusterPartition, j: ConflictMatrix) -> np.ndarray:
    # self-conflict is zero, so including i in its own cluster's sum is harmless
    idx = _member_index(partition, j.ids)
    totals = np.stack([j.values[:, cols].sum(axis=1) for cols in idx], axis=1)
    return np.exp(-totals)


def credibility(i: str, home: int, partition: ClusterPartition, j: ConflictMatrix) -> float:
    """Squared home plausibility over the sum of plausibilities across all clusters."""
    pls = [plausibility(i, b, partition, j) for b in range(1, partition.k + 1)]
    return pls[home - 1] ** 2 / sum(pls)


def credibility_table(partition: ClusterPartition, j: ConflictMatrix) -> list[CredibilityRecord]:
    pls = _plausibility_rows(partition, j)
    home = partition.home_of()
    out = []
    for row, rid in enumerate(j.ids):
        a = home[rid]
        p = pls[row]
        out.append(CredibilityRecord(rid, a, tuple(float(x) for x in p), float(p[a - 1] ** 2 / p.sum())))
    return out


def extract_cores(partition: ClusterPartition, j: ConflictMatrix,
                  threshold: float = DEFAULT_CORE_THRESHOLD,
                  table: list[CredibilityRecord] | None = None) -> CorePartition:
    if not 0.0 < threshold <= 1.0:
        raise ValueError("core threshold must lie in (0, 1]")
    if table is None:
        table = credibility_table(partition, j)
    cred = {rec.report_id: rec.credibility for rec in table}
    cores, non_cores = [], []
    for group in partition.members:
        # strictly above: a report split evenly between two clusters (0.5) stays out
        cores.append(tuple(r for r in group if cred[r] > threshold))
        non_cores.append(tuple(r for r in group if cred[r] <= threshold))
    return CorePartition(tuple(cores), tuple(non_cores), threshold)


def reports_by_id(reports: Sequence[Report]) -> dict[str, Report]:
    out = {r.id: r for r in reports}
    if len(out) != len(reports):
        raise ValueError("report ids must be unique")
    return out
