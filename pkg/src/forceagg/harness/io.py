"""JSON file formats.

Reports file::

    {"universe": ["X", "Y"], "reports": [{"id": "r1", "proposition": ["X"], "mass": 0.8, "count": 1}]}

Templates file::

    {"templates": [{"name": "T1", "slots": [{"type": "X", "count": 4}]}]}

Assignment file::

    {"k": 2, "assignment": {"r1": 1, "r2": 2}}

A scenario file carries all three sections plus ``ground_truth``, so it
can be passed wherever a reports or templates file is expected.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Sequence

from ..evidence import MASS_CAP, HardAssignment, Report, TypeUniverse, make_report
from ..templates import Template, make_template


class InputError(ValueError):
    """Malformed or inconsistent input document."""


def read_json(path: str | Path) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None


def dumps(doc: Any) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def write_json(doc: Any, path: str | Path | None) -> None:
    text = dumps(doc)
    if path is None or str(path) == "-":
        print(text, end="")
    else:
        Path(path).write_text(text, encoding="utf-8")


def parse_reports(doc: dict, mass_cap: float = MASS_CAP) -> tuple[TypeUniverse, list[Report]]:
    try:
        universe = TypeUniverse(tuple(doc["universe"]))
        reports = [
            make_report(str(r["id"]), universe, r["proposition"], float(r["mass"]), int(r.get("count", 1)),
                        mass_cap=mass_cap)
            for r in doc["reports"]
        ]
    except KeyError as exc:
        raise InputError(f"reports document missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc)) from None
    if not reports:
        raise InputError("reports document has no reports")
    if len({r.id for r in reports}) != len(reports):
        raise InputError("report ids must be unique")
    return universe, reports


def parse_catalog(doc: dict, universe: TypeUniverse | None = None) -> list[Template]:
    try:
        catalog = [
            make_template(str(t["name"]), [(str(s["type"]), int(s["count"])) for s in t["slots"]])
            for t in doc["templates"]
        ]
    except KeyError as exc:
        raise InputError(f"templates document missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc)) from None
    if len({t.name for t in catalog}) != len(catalog):
        raise InputError("template names must be unique")
    if universe is not None:
        for t in catalog:
            for s in t.slots:
                if s.slot_type not in universe.labels:
                    raise InputError(f"template {t.name}: slot type {s.slot_type!r} not in the universe")
    return catalog


def parse_assignment(doc: dict, ids: Sequence[str]) -> HardAssignment:
    try:
        raw = {str(k): int(v) for k, v in doc["assignment"].items()}
        k = int(doc.get("k", max(raw.values())))
        assign = HardAssignment(raw, k)
    except KeyError as exc:
        raise InputError(f"assignment document missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc)) from None
    missing = set(ids) - set(raw)
    if missing:
        raise InputError(f"assignment does not cover reports {sorted(missing)}")
    return assign


def reports_doc(universe: TypeUniverse, reports: Sequence[Report]) -> dict:
    return {
        "universe": list(universe.labels),
        "reports": [
            {"id": r.id, "proposition": list(r.proposition.members), "mass": r.mass, "count": r.count}
            for r in reports
        ],
    }


def catalog_doc(catalog: Sequence[Template]) -> dict:
    return {"templates": [
        {"name": t.name, "slots": [{"type": s.slot_type, "count": s.count} for s in t.slots]} for t in catalog
    ]}
