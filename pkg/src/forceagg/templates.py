"""Templates and the integer support algebra used to match them to evidence.

A support function assigns to every nonempty subset ``X`` of the type
universe the total count of items whose type set lies inside ``X``.
Template support, core support and non-core support are all of this
form; admissible and inadmissible support are pointwise differences.
All support arithmetic is exact (Python ints and Fractions).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .evidence import Proposition, Report, TypeUniverse

M_CLAMP = 0.999999


@dataclass(frozen=True)
class TemplateSlot:
    slot_type: str
    count: int

    def __post_init__(self):
        if int(self.count) != self.count or self.count < 1:
            raise ValueError(f"slot {self.slot_type}: count must be a positive integer")


@dataclass(frozen=True)
class Template:
    name: str
    slots: tuple[TemplateSlot, ...]

    def __post_init__(self):
        merged: dict[str, int] = {}
        for s in self.slots:
            merged[s.slot_type] = merged.get(s.slot_type, 0) + s.count
        object.__setattr__(self, "slots", tuple(TemplateSlot(t, n) for t, n in merged.items()))

    @property
    def total(self) -> int:
        return sum(s.count for s in self.slots)

    def required(self) -> dict[str, int]:
        return {s.slot_type: s.count for s in self.slots}


def make_template(name: str, slots: dict[str, int] | Iterable[tuple[str, int]]) -> Template:
    items = slots.items() if isinstance(slots, dict) else slots
    return Template(name, tuple(TemplateSlot(t, int(n)) for t, n in items))


class SupportFunction:
    """Integer support on every nonempty subset, indexed by bitmask."""

    __slots__ = ("universe", "values")

    def __init__(self, universe: TypeUniverse, values: np.ndarray):
        self.universe = universe
        self.values = values  # length 2**|TY|; slot 0 (empty set) unused

    def __getitem__(self, x: int | Proposition | Iterable[str] | str) -> int:
        return int(self.values[self._mask(x)])

    def _mask(self, x) -> int:
        if isinstance(x, (int, np.integer)):
            mask = int(x)
        elif isinstance(x, Proposition):
            mask = x.mask
        elif isinstance(x, str):
            mask = self.universe.mask_of([x])
        else:
            mask = self.universe.mask_of(x)
        if mask <= 0 or mask > self.universe.full_mask:
            raise KeyError(f"no support value for subset mask {mask}")
        return mask

    def __eq__(self, other) -> bool:
        return (isinstance(other, SupportFunction) and self.universe == other.universe
                and np.array_equal(self.values, other.values))

    def __sub__(self, other: SupportFunction) -> SupportFunction:
        return SupportFunction(self.universe, self.values - other.values)

    def __add__(self, other: SupportFunction) -> SupportFunction:
        return SupportFunction(self.universe, self.values + other.values)

    def items(self) -> list[tuple[tuple[str, ...], int]]:
        """Subset -> value pairs ordered by cardinality, then label order."""
        return [(self.universe.labels_of(m), int(self.values[m])) for m in subset_order(self.universe)]

    def row(self) -> tuple[int, ...]:
        return tuple(int(self.values[m]) for m in subset_order(self.universe))

    def nonneg(self) -> bool:
        return bool((self.values[1:] >= 0).all())

    def __repr__(self) -> str:
        body = ", ".join("{" + ",".join(k) + "}:" + str(v) for k, v in self.items())
        return f"SupportFunction({body})"


def subset_order(universe: TypeUniverse) -> list[int]:
    n = len(universe)
    return [sum(1 << i for i in combo) for size in range(1, n + 1) for combo in combinations(range(n), size)]


def _support(universe: TypeUniverse, items: Iterable[tuple[int, int]]) -> SupportFunction:
    size = 1 << len(universe)
    direct = np.zeros(size, dtype=np.int64)
    for mask, count in items:
        direct[mask] += count
    # subset-sum (zeta) transform: value(X) = sum over masks contained in X
    vals = direct.copy()
    for bit in range(len(universe)):
        b = 1 << bit
        idx = np.arange(size)
        has = (idx & b) != 0
        vals[has] += vals[idx[has] ^ b]
    return SupportFunction(universe, vals)


def template_support(t: Template, universe: TypeUniverse) -> SupportFunction:
    return _support(universe, ((universe.mask_of([s.slot_type]), s.count) for s in t.slots))


def evidence_support(reports: Iterable[Report], universe: TypeUniverse) -> SupportFunction:
    return _support(universe, ((r.proposition.mask, r.count) for r in reports))


def admissible(st: SupportFunction, sc: SupportFunction) -> tuple[SupportFunction, bool]:
    ac = st - sc
    return ac, ac.nonneg()


def inadmissible(snc: SupportFunction, ac: SupportFunction) -> SupportFunction:
    """Non-core support the template and core cannot take: ``max(0, SNC - AC)``.

    Negative admissible support (an overcrowded template) counts as zero
    room, which keeps the result bounded by SNC.
    """
    return SupportFunction(snc.universe, np.maximum(0, snc.values - np.maximum(ac.values, 0)))


@dataclass(frozen=True)
class TemplateFit:
    template: str
    mu1: Fraction
    mu2: Fraction
    mu: Fraction
    feasible: bool

    def to_dict(self) -> dict:
        return {
            "template": self.template,
            "mu1": float(self.mu1), "mu2": float(self.mu2), "mu": float(self.mu),
            "mu_exact": str(self.mu),
            "feasible": self.feasible,
        }


def fit(t: Template, sc: SupportFunction, st: SupportFunction | None = None) -> TemplateFit:
    """Degree of fit: mean of the worst per-slot fill and the overall fill, gated by feasibility."""
    if st is None:
        st = template_support(t, sc.universe)
    if t.total == 0:
        return TemplateFit(t.name, Fraction(0), Fraction(0), Fraction(0), False)
    _, feasible = admissible(st, sc)
    u = sc.universe
    mu1 = min(Fraction(sc[s.slot_type], st[s.slot_type]) for s in t.slots)
    mu2 = Fraction(sc[u.full_mask], st[u.full_mask])
    mu = (mu1 + mu2) / 2 if feasible else Fraction(0)
    return TemplateFit(t.name, mu1, mu2, mu, feasible)


def rank_templates(core: Sequence[Report], catalog: Sequence[Template],
                   universe: TypeUniverse) -> list[tuple[Template, TemplateFit]]:
    """All catalog templates, best fit first; ties keep catalog order."""
    sc = evidence_support(core, universe)
    scored = [(t, fit(t, sc, template_support(t, universe))) for t in catalog]
    return sorted(scored, key=lambda tf: (not tf[1].feasible, -tf[1].mu))


def select_template(core: Sequence[Report], catalog: Sequence[Template],
                    universe: TypeUniverse) -> tuple[Template, TemplateFit] | None:
    if not catalog:
        raise ValueError("template catalog is empty")
    best = rank_templates(core, catalog, universe)[0]
    return best if best[1].feasible else None


def basic_belief_not_in(r: Report, snc: SupportFunction, nac: SupportFunction) -> Fraction:
    """Belief that non-core report ``r`` does not belong to the cluster.

    Share of the direct-and-indirect non-core support at the report's own
    proposition that the template and core cannot absorb.
    """
    denom = snc[r.proposition]
    if denom <= 0:
        raise ValueError(f"report {r.id} contributes no non-core support at {r.proposition}")
    return Fraction(nac[r.proposition], denom)


def template_interaction(m: float | Fraction, is_core: bool) -> float:
    if is_core:
        return 0.0
    m = float(m)
    if not 0.0 <= m <= 1.0:
        raise ValueError(f"basic belief {m} outside [0, 1]")
    return -math.log1p(-min(m, M_CLAMP))


@dataclass(frozen=True)
class ClusterSupport:
    """Support tables of one cluster against its selected template."""

    st: SupportFunction
    sc: SupportFunction
    ac: SupportFunction
    snc: SupportFunction
    nac: SupportFunction
    feasible: bool

    def table(self) -> list[dict]:
        rows = []
        for (subset, st), (_, sc), (_, ac), (_, snc), (_, nac) in zip(
                self.st.items(), self.sc.items(), self.ac.items(), self.snc.items(), self.nac.items()):
            rows.append({"subset": list(subset), "ST": st, "SC": sc, "AC": ac, "SNC": snc, "NAC": nac})
        return rows


def cluster_support(t: Template, core: Sequence[Report], non_core: Sequence[Report],
                    universe: TypeUniverse) -> ClusterSupport:
    st = template_support(t, universe)
    sc = evidence_support(core, universe)
    ac, feasible = admissible(st, sc)
    snc = evidence_support(non_core, universe)
    return ClusterSupport(st, sc, ac, snc, inadmissible(snc, ac), feasible)
