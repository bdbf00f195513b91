"""Partition quality against ground truth."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from sklearn.metrics import adjusted_rand_score

from ..specification import ClusterPartition


@dataclass
class EvalReport:
    misplacements: int
    agreement: float
    matching: dict[int, int | None]  # cluster (1-based) -> ground-truth unit (0-based) or None
    template_correct: dict[int, bool] = field(default_factory=dict)
    runtimes: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "misplacements": self.misplacements,
            "agreement": self.agreement,
            "matching": {str(c): u for c, u in self.matching.items()},
            "template_correct": {str(c): ok for c, ok in self.template_correct.items()},
            "runtimes": dict(self.runtimes),
        }


def evaluate(partition: ClusterPartition, ground_truth: Sequence[tuple[str, Sequence[str]]],
             templates: Mapping[int, str | None] | None = None) -> EvalReport:
    """Misplacements under the best one-to-one matching of clusters to true units.

    ``templates`` optionally maps each cluster (1-based) to the template
    name chosen for it; correctness is judged against its matched unit.
    """
    truth = {rid: u for u, (_, ids) in enumerate(ground_truth) for rid in ids}
    ours = partition.home_of()
    if set(truth) != set(ours):
        raise ValueError("partition and ground truth cover different report ids")
    ids = sorted(truth)
    overlap = np.zeros((partition.k, len(ground_truth)), dtype=np.int64)
    for rid in ids:
        overlap[ours[rid] - 1, truth[rid]] += 1
    rows, cols = linear_sum_assignment(overlap, maximize=True)
    matched = int(overlap[rows, cols].sum())
    matching: dict[int, int | None] = {c + 1: None for c in range(partition.k)}
    for r, c in zip(rows, cols):
        matching[int(r) + 1] = int(c)
    agreement = float(adjusted_rand_score([truth[r] for r in ids], [ours[r] for r in ids]))
    correct = {}
    if templates is not None:
        for c, name in templates.items():
            u = matching.get(c)
            correct[c] = u is not None and name == ground_truth[u][0]
    return EvalReport(len(ids) - matched, agreement, matching, correct)
