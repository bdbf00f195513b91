"""Type universe, propositions, reports and the pairwise conflict energy.

Propositions are bitmasks over an ordered type universe, so subset and
intersection tests never touch floating point.  Each report is a simple
support function: mass ``s`` on one focal set, the rest on the universe.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

MAX_UNIVERSE = 16
MASS_CAP = 0.999


class UniverseMismatch(ValueError):
    pass


@dataclass(frozen=True)
class TypeUniverse:
    labels: tuple[str, ...]
    _index: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        labels = tuple(self.labels)
        object.__setattr__(self, "labels", labels)
        if not labels:
            raise ValueError("type universe must be nonempty")
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate type labels in {labels}")
        if len(labels) > MAX_UNIVERSE:
            raise ValueError(
                f"type universe has {len(labels)} labels; at most {MAX_UNIVERSE} supported"
            )
        object.__setattr__(self, "_index", {lab: i for i, lab in enumerate(labels)})

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def full_mask(self) -> int:
        return (1 << len(self.labels)) - 1

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise ValueError(f"unknown type label {label!r}") from None

    def mask_of(self, labels: Iterable[str]) -> int:
        mask = 0
        for lab in labels:
            mask |= 1 << self.index(lab)
        return mask

    def labels_of(self, mask: int) -> tuple[str, ...]:
        return tuple(lab for i, lab in enumerate(self.labels) if mask >> i & 1)

    def proposition(self, labels: Iterable[str] | str) -> "Proposition":
        if isinstance(labels, str):
            labels = [labels]
        return Proposition(self.mask_of(labels), self)


@dataclass(frozen=True)
class Proposition:
    mask: int
    universe: TypeUniverse

    def __post_init__(self):
        if self.mask <= 0:
            raise ValueError("proposition must be a nonempty set of types")
        if self.mask & ~self.universe.full_mask:
            raise ValueError(f"proposition mask {self.mask:#x} outside the universe")

    @property
    def members(self) -> tuple[str, ...]:
        return self.universe.labels_of(self.mask)

    @property
    def is_singleton(self) -> bool:
        return self.mask & (self.mask - 1) == 0

    def issubset(self, other: Proposition) -> bool:
        _same_universe(self, other)
        return self.mask & ~other.mask == 0

    def __str__(self) -> str:
        return "{" + ",".join(self.members) + "}"


def _same_universe(a: Proposition, b: Proposition) -> None:
    if a.universe != b.universe:
        raise UniverseMismatch("propositions belong to different type universes")


@dataclass(frozen=True)
class Report:
    id: str
    proposition: Proposition
    mass: float
    count: int = 1

    def __post_init__(self):
        if not 0.0 < self.mass <= MASS_CAP:
            raise ValueError(
                f"report {self.id}: mass {self.mass} outside (0, {MASS_CAP}]; use make_report to clamp"
            )
        if int(self.count) != self.count or self.count < 1:
            raise ValueError(f"report {self.id}: count must be a positive integer")

    @property
    def universe(self) -> TypeUniverse:
        return self.proposition.universe


def make_report(
    id: str,
    universe: TypeUniverse,
    labels: Iterable[str] | str,
    mass: float,
    count: int = 1,
    mass_cap: float = MASS_CAP,
) -> Report:
    """Build a report, clamping a mass above ``mass_cap`` with a warning."""
    if mass > mass_cap:
        warnings.warn(f"report {id}: mass {mass} clamped to {mass_cap}", stacklevel=2)
        mass = mass_cap
    return Report(str(id), universe.proposition(labels), float(mass), int(count))


def conflict_indicator(a: Proposition, b: Proposition) -> int:
    """1 when the two propositions are disjoint, else 0."""
    _same_universe(a, b)
    return int(a.mask & b.mask == 0)


def pairwise_interaction(r_i: Report, r_j: Report) -> float:
    if conflict_indicator(r_i.proposition, r_j.proposition) == 0:
        return 0.0
    return -math.log1p(-r_i.mass * r_j.mass)


@dataclass(frozen=True)
class ConflictMatrix:
    ids: tuple[str, ...]
    values: np.ndarray

    @property
    def n(self) -> int:
        return len(self.ids)

    def __getitem__(self, key):
        return self.values[key]


def build_conflict_matrix(reports: Sequence[Report]) -> ConflictMatrix:
    if not reports:
        raise ValueError("need at least one report")
    universe = reports[0].universe
    for r in reports:
        if r.universe != universe:
            raise UniverseMismatch(f"report {r.id} uses a different type universe")
    masks = np.array([r.proposition.mask for r in reports], dtype=np.int64)
    mass = np.array([r.mass for r in reports])
    disjoint = (masks[:, None] & masks[None, :]) == 0
    j = np.where(disjoint, -np.log1p(-np.outer(mass, mass)), 0.0)
    np.fill_diagonal(j, 0.0)
    j.setflags(write=False)
    return ConflictMatrix(tuple(r.id for r in reports), j)


def cluster_conflict(r: Report, members: Iterable[Report]) -> float:
    """Pairwise-product approximation of the conflict between ``r`` and a cluster.

    Returns ``1 - prod(1 - s_r s_j)`` over disjoint members, i.e.
    ``1 - exp(-sum J)``.  ``r`` itself is skipped if present.
    """
    total = sum(pairwise_interaction(r, m) for m in members if m.id != r.id)
    return -math.expm1(-total)


@dataclass(frozen=True)
class HardAssignment:
    """Discrete spins: ``cluster_of[id]`` is the report's cluster in ``1..k``."""

    cluster_of: Mapping[str, int]
    k: int

    def __post_init__(self):
        for rid, c in self.cluster_of.items():
            if not 1 <= c <= self.k:
                raise ValueError(f"report {rid} assigned to cluster {c} outside 1..{self.k}")

    def labels(self, ids: Sequence[str]) -> np.ndarray:
        """0-based label vector in the given id order."""
        try:
            return np.array([self.cluster_of[i] - 1 for i in ids], dtype=np.int64)
        except KeyError as exc:
            raise ValueError(f"assignment does not cover report {exc.args[0]}") from None

    @classmethod
    def from_labels(cls, ids: Sequence[str], labels: Sequence[int], k: int) -> HardAssignment:
        return cls({rid: int(c) + 1 for rid, c in zip(ids, labels)}, k)


def energy(assign: HardAssignment, j: ConflictMatrix) -> float:
    """Sum of J over unordered same-cluster pairs."""
    labels = assign.labels(j.ids)
    return labels_energy(labels, j.values)


def labels_energy(labels: np.ndarray, jvals: np.ndarray) -> float:
    same = labels[:, None] == labels[None, :]
    return float(np.triu(np.where(same, jvals, 0.0), 1).sum())
