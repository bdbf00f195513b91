"""Synthetic scenarios with known ground truth."""

from __future__ import annotations

from dataclasses import dataclass


import numpy as np

from ..evidence import Report, TypeUniverse, make_report
from ..templates import Template
from .io import InputError, catalog_doc, parse_catalog, reports_doc


@dataclass(frozen=True)
class ScenarioSpec:
    """What to generate.

    ``units`` names catalog templates; each becomes one ground-truth unit
    with one count-1 report per template member.  ``nonspecific_prob``
    widens a report's proposition by one random extra type.  Decoys are
    reports widened to also cover a type of a different unit; a unit that
    receives decoys never donates any, so templates still pin down the
    true membership.
    """

    universe: tuple[str, ...]
    catalog: tuple[Template, ...]
    units: tuple[str, ...]
    mass_range: tuple[float, float] = (0.6, 0.95)
    nonspecific_prob: float = 0.0
    decoy_count: int = 0

    def __post_init__(self):
        names = {t.name for t in self.catalog}
        unknown = [u for u in self.units if u not in names]
        if unknown:
            raise ValueError(f"units name unknown templates {unknown}")
        lo, hi = self.mass_range
        if not 0 < lo <= hi < 1:
            raise ValueError("mass_range must satisfy 0 < lo <= hi < 1")
        if not 0 <= self.nonspecific_prob <= 1:
            raise ValueError("nonspecific_prob must lie in [0, 1]")
        if self.decoy_count < 0:
            raise ValueError("decoy_count must be nonnegative")


@dataclass
class Scenario:
    universe: TypeUniverse
    catalog: list[Template]
    reports: list[Report]
    ground_truth: list[tuple[str, tuple[str, ...]]]  # (template name, member ids)
    true_type: dict[str, str]
    decoys: list[str]
    spec: ScenarioSpec
    seed: int

    @property
    def truth_labels(self) -> dict[str, int]:
        return {rid: u for u, (_, ids) in enumerate(self.ground_truth) for rid in ids}

    def to_dict(self) -> dict:
        s = self.spec
        return {
            **reports_doc(self.universe, self.reports),
            **catalog_doc(self.catalog),
            "ground_truth": [{"template": name, "members": list(ids)} for name, ids in self.ground_truth],
            "true_type": dict(self.true_type),
            "decoys": list(self.decoys),
            "params": {
                "units": list(s.units),
                "mass_range": list(s.mass_range),
                "nonspecific_prob": s.nonspecific_prob,
                "decoy_count": s.decoy_count,
            },
            "seed": self.seed,
        }


def generate_scenario(spec: ScenarioSpec, seed: int) -> Scenario:
    rng = np.random.default_rng(seed)
    universe = TypeUniverse(spec.universe)
    by_name = {t.name: t for t in spec.catalog}
    lo, hi = spec.mass_range

    # (unit index, true type, proposition labels)
    draft: list[tuple[int, str, set[str]]] = []
    for u, name in enumerate(spec.units):
        for slot in by_name[name].slots:
            for _ in range(slot.count):
                draft.append((u, slot.slot_type, {slot.slot_type}))

    labels = list(universe.labels)
    if spec.nonspecific_prob > 0 and len(labels) > 1:
        for _, true, props in draft:
            if rng.random() < spec.nonspecific_prob:
                extra = [lab for lab in labels if lab not in props]
                props.add(extra[rng.integers(len(extra))])

    unit_types = [set(by_name[name].required()) for name in spec.units]
    donors: set[int] = set()
    recipients: set[int] = set()
    decoy_idx: list[int] = []
    for _ in range(spec.decoy_count):
        cands = [i for i, (u, _, props) in enumerate(draft)
                 if u not in recipients and i not in decoy_idx and len(props) == 1]
        rng.shuffle(cands)
        placed = False
        for i in cands:
            u, _, props = draft[i]
            targets = [w for w in range(len(spec.units))
                       if w != u and w not in donors and unit_types[w] - props]
            if not targets:
                continue
            w = targets[rng.integers(len(targets))]
            extra = sorted(unit_types[w] - props, key=universe.index)
            props.add(extra[rng.integers(len(extra))])
            donors.add(u)
            recipients.add(w)
            decoy_idx.append(i)
            placed = True
            break
        if not placed:
            break

    order = rng.permutation(len(draft))
    width = len(str(len(draft)))
    reports: list[Report] = []
    members: list[list[str]] = [[] for _ in spec.units]
    true_type: dict[str, str] = {}
    decoys: list[str] = []
    for new, old in enumerate(order):
        u, true, props = draft[old]
        rid = f"r{new + 1:0{width}d}"
        mass = float(rng.uniform(lo, hi))
        reports.append(make_report(rid, universe, sorted(props, key=universe.index), mass))
        members[u].append(rid)
        true_type[rid] = true
        if old in decoy_idx:
            decoys.append(rid)
    truth = [(name, tuple(m)) for name, m in zip(spec.units, members)]
    return Scenario(universe, list(spec.catalog), reports, truth, true_type, decoys, spec, seed)


def spec_from_dict(doc: dict) -> ScenarioSpec:
    try:
        universe = tuple(doc["universe"])
        catalog = parse_catalog(doc, TypeUniverse(universe))
        return ScenarioSpec(
            universe=universe,
            catalog=tuple(catalog),
            units=tuple(doc["units"]),
            mass_range=tuple(doc.get("mass_range", (0.6, 0.95))),
            nonspecific_prob=float(doc.get("nonspecific_prob", 0.0)),
            decoy_count=int(doc.get("decoy_count", 0)),
        )
    except KeyError as exc:
        raise InputError(f"scenario spec missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc)) from None


def scenario_from_dict(doc: dict) -> tuple[list[tuple[str, tuple[str, ...]]], dict]:
    """Ground truth from a scenario document (the reports/templates are parsed separately)."""
    try:
        return [(g["template"], tuple(g["members"])) for g in doc["ground_truth"]], doc
    except KeyError as exc:
        raise InputError(f"scenario document missing field {exc.args[0]!r}") from None
