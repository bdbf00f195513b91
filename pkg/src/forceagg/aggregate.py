"""Final template ranking per cluster and emission of force elements."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .evidence import Report, TypeUniverse
from .specification import ClusterPartition
from .templates import Template, TemplateFit, evidence_support, rank_templates, subset_order, template_support


@dataclass(frozen=True)
class ForceElement:
    cluster: int
    template: str | None
    fit: TemplateFit | None
    slot_fill: dict[str, tuple[int, int]]  # type -> (filled, required)
    surplus: dict[tuple[str, ...], int]
    unfilled: dict[str, int]
    members: tuple[str, ...]
    flags: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "cluster": self.cluster,
            "template": self.template,
            "fit": None if self.fit is None else self.fit.to_dict(),
            "slot_fill": {t: {"filled": f, "required": r} for t, (f, r) in self.slot_fill.items()},
            "surplus": [{"subset": list(s), "count": n} for s, n in self.surplus.items()],
            "unfilled": dict(self.unfilled),
            "members": list(self.members),
            "flags": list(self.flags),
        }


def final_fit(members: Sequence[Report], catalog: Sequence[Template],
              universe: TypeUniverse) -> list[TemplateFit]:
    """Rank every catalog template against the whole final membership taken as core."""
    return [f for _, f in rank_templates(members, catalog, universe)]


def fill_slots(template: Template, members: Sequence[Report]) -> dict[str, int]:
    """Greedy slot allocation: specific reports first, then nonspecific ones in slot order."""
    required = template.required()
    filled = dict.fromkeys(required, 0)
    vague = []
    for r in members:
        if r.proposition.is_singleton:
            t = r.proposition.members[0]
            if t in filled:
                filled[t] = min(required[t], filled[t] + r.count)
        else:
            vague.append(r)
    for r in vague:
        allowed = set(r.proposition.members)
        left = r.count
        for t in required:
            if not left:
                break
            if t in allowed:
                take = min(left, required[t] - filled[t])
                filled[t] += take
                left -= take
    return filled


def aggregate(partition: ClusterPartition, reports: Mapping[str, Report], catalog: Sequence[Template],
              universe: TypeUniverse) -> list[ForceElement]:
    out = []
    for a, ids in enumerate(partition.members, start=1):
        members = [reports[r] for r in ids]
        if not members:
            out.append(ForceElement(a, None, None, {}, {}, {}, (), ("empty cluster",)))
            continue
        if not catalog:
            out.append(ForceElement(a, None, None, {}, {}, {}, tuple(ids), ("empty template catalog",)))
            continue
        ranked = rank_templates(members, catalog, universe)
        template, tfit = ranked[0]
        flags = [] if tfit.feasible else ["no feasible template; membership overcrowds every candidate"]
        st = template_support(template, universe)
        sc = evidence_support(members, universe)
        surplus = {}
        for m in subset_order(universe):
            extra = sc[m] - st[m]
            if extra > 0:
                surplus[universe.labels_of(m)] = extra
        filled = fill_slots(template, members)
        required = template.required()
        out.append(ForceElement(
            cluster=a,
            template=template.name,
            fit=tfit,
            slot_fill={t: (filled[t], required[t]) for t in required},
            surplus=surplus,
            unfilled={t: required[t] - filled[t] for t in required if required[t] > filled[t]},
            members=tuple(ids),
            flags=tuple(flags),
        ))
    return out
