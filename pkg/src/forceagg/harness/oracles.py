"""Exhaustive reference computations used to check the heuristics."""

from __future__ import annotations

from typing import Iterator, Sequence

import numpy as np

from ..evidence import ConflictMatrix, HardAssignment, Report, build_conflict_matrix

MAX_ASSIGNMENTS = 10**7
MAX_EXACT_REPORTS = 20


class GuardRefused(RuntimeError):
    """Instance exceeds an exhaustive-search bound."""


def restricted_growth(n: int, k: int) -> Iterator[list[int]]:
    """All labelings of n items into at most k blocks, one per set partition."""
    labels = [0] * n

    def rec(i: int, used: int):
        if i == n:
            yield labels
            return
        for c in range(min(used + 1, k)):
            labels[i] = c
            yield from rec(i + 1, max(used, c + 1))

    if n == 0:
        yield []
        return
    yield from rec(1, 1)


def oracle_min_energy(reports: Sequence[Report] | ConflictMatrix, k: int) -> tuple[HardAssignment, float]:
    j = reports if isinstance(reports, ConflictMatrix) else build_conflict_matrix(reports)
    n = j.n
    if k**n > MAX_ASSIGNMENTS:
        raise GuardRefused(f"K^N = {k}^{n} exceeds the exhaustive bound {MAX_ASSIGNMENTS:.0e}")
    jv = j.values
    iu, ju = np.triu_indices(n, 1)
    w = jv[iu, ju]
    best, best_labels = np.inf, None
    for labels in restricted_growth(n, k):
        lab = np.asarray(labels)
        e = float(w[lab[iu] == lab[ju]].sum())
        if e < best - 1e-15:
            best, best_labels = e, lab.copy()
    return HardAssignment.from_labels(j.ids, best_labels, k), best


def oracle_exact_conflict(reports: Sequence[Report]) -> float:
    """Conflict mass of the unnormalized conjunctive combination of all reports.

    Each report contributes mass ``s`` on its focal set and ``1 - s`` on the
    universe; the mass left on the empty set is the conflict of iterated
    Dempster combination.
    """
    if len(reports) > MAX_EXACT_REPORTS:
        raise GuardRefused(f"{len(reports)} reports exceed the exact-combination bound {MAX_EXACT_REPORTS}")
    if not reports:
        return 0.0
    full = reports[0].universe.full_mask
    focal = {full: 1.0}
    for r in reports:
        nxt: dict[int, float] = {}
        for a, ma in focal.items():
            inter = a & r.proposition.mask
            nxt[inter] = nxt.get(inter, 0.0) + ma * r.mass
            nxt[a] = nxt.get(a, 0.0) + ma * (1.0 - r.mass)
        focal = nxt
    return focal.get(0, 0.0)
