import numpy as np
import pytest

from forceagg.evidence import TypeUniverse, make_report
from forceagg.templates import make_template

LABELS = ("X", "Y", "Z")
TEMPLATE_SLOTS = {"X": 4, "Y": 2, "Z": 2}
CORE = [({"X"}, 2), ({"X", "Z"}, 1), ({"Y"}, 1), ({"Y"}, 1), ({"Z"}, 1)]
NON_CORE = [({"Y"}, 1), ({"X"}, 1), ({"X", "Y"}, 1), ({"Z"}, 2)]


def to_reports(universe, items, prefix, start=1, mass=0.8):
    return [make_report(f"{prefix}{start + i}", universe, sorted(types), mass, count)
            for i, (types, count) in enumerate(items)]


@pytest.fixture
def xyz():
    return TypeUniverse(LABELS)


@pytest.fixture
def t1():
    return make_template("T1", TEMPLATE_SLOTS)


@pytest.fixture
def core_reports(xyz):
    return to_reports(xyz, CORE, "c")


@pytest.fixture
def non_core_reports(xyz):
    return to_reports(xyz, NON_CORE, "n", start=6, mass=0.7)


def random_instance(rng, n_range=(2, 10), k_range=(1, 3), labels="ABCD", singleton_prob=0.7,
                    mass_range=(0.3, 0.95)):
    """Random reports over 2-4 labels; returns (reports, k)."""
    u = TypeUniverse(tuple(labels[: int(rng.integers(2, len(labels) + 1))]))
    k = int(rng.integers(k_range[0], k_range[1] + 1))
    n = int(rng.integers(max(k, n_range[0]), n_range[1] + 1))
    reports = []
    for i in range(n):
        if rng.random() < singleton_prob:
            props = [u.labels[int(rng.integers(len(u)))]]
        else:
            props = list(u.labels_of(int(rng.integers(1, u.full_mask + 1))))
        reports.append(make_report(f"r{i:02d}", u, props, float(rng.uniform(*mass_range))))
    return reports, k


@pytest.fixture
def instance_rng():
    return np.random.default_rng(12345)


_ACCEPTANCE: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or not mark.args:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        n, title = mark.args
        _ACCEPTANCE[n] = (title, "PASS" if rep.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        title, verdict = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d} {verdict}: {title}")
