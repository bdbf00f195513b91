import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from forceagg.annealer import (
    AnnealConfig,
    alpha_for_k,
    anneal,
    clamp_vector,
    critical_temperature,
    init_spin_field,
    local_field,
    mean_field_update,
    normalization,
    run_schedule,
)
from forceagg.evidence import TypeUniverse, build_conflict_matrix, energy, make_report
from forceagg.harness.oracles import oracle_min_energy

from conftest import random_instance

XY = TypeUniverse(("X", "Y"))


class TestConfig:
    def test_defaults(self):
        c = AnnealConfig()
        assert (c.epsilon, c.tau, c.gamma, c.inner_tol, c.freeze_tol, c.promote_threshold) == \
            (0.001, 0.9, 0.5, 0.01, 0.99, 0.99)
        assert c.max_outer_steps == 500

    @pytest.mark.parametrize("k,alpha", [(1, 0), (7, 0), (8, 1e-6), (9, 0), (10, 3e-7), (11, 3e-8), (12, 0)])
    def test_alpha_table(self, k, alpha):
        assert alpha_for_k(k) == alpha
        assert AnnealConfig(k=k).resolved_alpha == alpha

    def test_alpha_override(self):
        assert AnnealConfig(k=8, alpha=0.5).resolved_alpha == 0.5

    @pytest.mark.parametrize("bad", [dict(k=0), dict(tau=1.0), dict(tau=0.0), dict(epsilon=-1),
                                     dict(inner_tol=0), dict(freeze_tol=1.5), dict(max_outer_steps=0)])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            AnnealConfig(**bad)


class TestCriticalTemperature:
    def test_zero_coupling(self):
        est = critical_temperature(np.zeros((3, 3)), 0.0, 0.5, 2)
        assert est.lambda_min == pytest.approx(-0.5) and est.lambda_max == pytest.approx(-0.5)
        assert est.t_c == pytest.approx(0.25)

    def test_two_by_two(self):
        est = critical_temperature(np.array([[0.0, 1.0], [1.0, 0.0]]), 0.0, 0.5, 2)
        assert (est.lambda_min, est.lambda_max) == pytest.approx((-1.5, 0.5), rel=1e-6)
        assert est.t_c == pytest.approx(0.75)

    def test_gamma_zero_k_one_matches_plain_eigensolve(self):
        rng = np.random.default_rng(3)
        a = rng.random((6, 6))
        j = (a + a.T) / 2
        np.fill_diagonal(j, 0)
        eig = np.linalg.eigvals(j).real
        est = critical_temperature(j, 0.0, 0.0, 1)
        assert est.t_c == pytest.approx(max(-eig.min(), eig.max()), rel=1e-6)

    def test_floor(self):
        assert critical_temperature(np.zeros((2, 2)), 0.0, 0.0, 2).t_c == 1e-6


class TestInit:
    def test_no_noise_uniform(self):
        f = init_spin_field(5, AnnealConfig(k=4, epsilon=0.0))
        assert np.all(f.v == 0.25)

    def test_clamped_row(self):
        clamps = clamp_vector(["a", "b"], {"b": 2}, 3)
        f = init_spin_field(2, AnnealConfig(k=3), clamps)
        assert f.v[1].tolist() == [0.0, 1.0, 0.0]
        assert f.v[0].sum() == pytest.approx(1.0, abs=1e-12)

    def test_seeded(self):
        cfg = AnnealConfig(k=3, seed=11)
        assert np.array_equal(init_spin_field(4, cfg).v, init_spin_field(4, cfg).v)

    def test_bad_clamp(self):
        with pytest.raises(ValueError):
            clamp_vector(["a"], {"a": 4}, 3)
        with pytest.raises(ValueError):
            clamp_vector(["a"], {"zz": 1}, 3)


class TestNormalization:
    def test_uniform(self):
        assert np.allclose(normalization(np.full((6, 3), 1 / 3)), 1.0)

    def test_all_in_first(self):
        v = np.zeros((5, 3))
        v[:, 0] = 1
        assert normalization(v).tolist() == [3.0, 1e-6, 1e-6]


class TestLocalField:
    def test_uniform_no_coupling(self):
        cfg = AnnealConfig(k=4)
        v = np.full((3, 4), 0.25)
        h = local_field(v, np.zeros((3, 3)), None, 0, cfg)
        assert np.allclose(h, -0.5 / 4)

    def test_coupling_shift(self):
        cfg = AnnealConfig(k=2)
        rng = np.random.default_rng(0)
        v = rng.dirichlet([1, 1], size=4)
        j = np.zeros((4, 4))
        j[0, 1] = j[1, 0] = 0.7
        c = np.zeros((4, 2))
        c[2] = [0.3, 1.1]
        g = normalization(v)
        h0 = local_field(v, j, None, 2, cfg)
        h1 = local_field(v, j, c, 2, cfg)
        assert np.allclose(h1 - h0, c[2] / g)

    def test_alpha_term(self):
        cfg = AnnealConfig(k=2, alpha=0.01)
        v = np.array([[0.9, 0.1], [0.2, 0.8], [0.5, 0.5]])
        g = normalization(v)
        h = local_field(v, np.zeros((3, 3)), None, 1, cfg)
        expected = (0.01 * v.sum(axis=0) + 0.01 - 0.5 * v[1]) / g
        assert np.allclose(h, expected)


class TestUpdate:
    def test_equal_fields_uniform(self):
        row = mean_field_update(np.full(3, 2.0), 0.1, AnnealConfig(k=3, epsilon=0.0))
        assert np.allclose(row, 1 / 3)

    def test_low_temperature_limit(self):
        row = mean_field_update(np.array([-5.0, 5.0]), 0.01, AnnealConfig(k=2, epsilon=0.0))
        assert row[0] == pytest.approx(1.0) and row[1] == pytest.approx(0.0, abs=1e-12)

    def test_seeded_noise_reproducible(self):
        cfg = AnnealConfig(k=3)
        h = np.array([0.1, 0.2, 0.3])
        a = mean_field_update(h, 0.5, cfg, np.random.default_rng(4).random(3))
        b = mean_field_update(h, 0.5, cfg, np.random.default_rng(4).random(3))
        assert np.array_equal(a, b)

    def test_no_overflow_at_tiny_t(self):
        row = mean_field_update(np.array([1e3, -1e3]), 1e-9, AnnealConfig(k=2))
        assert np.isfinite(row).all()

    def test_rejects_nonpositive_temperature(self):
        with pytest.raises(ValueError):
            mean_field_update(np.zeros(2), 0.0, AnnealConfig())


@settings(max_examples=200)
@given(arrays(np.float64, st.integers(1, 8), elements=st.floats(-1e6, 1e6)),
       st.floats(1e-8, 1e4), st.floats(0, 0.5), st.integers(0, 2**32 - 1))
def test_update_row_is_stochastic(h, t, eps, seed):
    cfg = AnnealConfig(k=len(h), epsilon=eps)
    row = mean_field_update(h, t, cfg, np.random.default_rng(seed).random(len(h)))
    assert abs(row.sum() - 1.0) <= 1e-9
    assert ((row >= 0) & (row <= 1)).all()


def rep(rid, labels, mass=0.8):
    return make_report(rid, XY, labels, mass)


class TestAnneal:
    def test_two_disjoint(self):
        res = anneal([rep("a", "X"), rep("b", "Y")], AnnealConfig(k=2))
        assert res.assignment.cluster_of["a"] != res.assignment.cluster_of["b"]
        assert energy(res.assignment, build_conflict_matrix([rep("a", "X"), rep("b", "Y")])) == 0
        assert res.converged

    def test_two_groups_recovered(self):
        reps = [rep(f"x{i}", "X", 0.6 + 0.1 * i) for i in range(3)] + \
               [rep(f"y{i}", "Y", 0.9 - 0.1 * i) for i in range(3)]
        for seed in range(5):
            res = anneal(reps, AnnealConfig(k=2, seed=seed))
            c = res.assignment.cluster_of
            assert len({c[f"x{i}"] for i in range(3)}) == 1
            assert len({c[f"y{i}"] for i in range(3)}) == 1
            assert c["x0"] != c["y0"]
            j = build_conflict_matrix(reps)
            assert energy(res.assignment, j) == 0.0 == oracle_min_energy(j, 2)[1]

    def test_all_clamped(self):
        reps = [rep("a", "X"), rep("b", "Y"), rep("c", "X")]
        clamps = {"a": 2, "b": 1, "c": 1}
        res = anneal(reps, AnnealConfig(k=2), clamps=clamps)
        assert dict(res.assignment.cluster_of) == clamps
        assert len(res.trace) == 1

    def test_too_few_reports(self):
        with pytest.raises(ValueError):
            anneal([rep("a", "X")], AnnealConfig(k=2))

    def test_bad_coupling_shape(self):
        with pytest.raises(ValueError):
            anneal([rep("a", "X"), rep("b", "Y")], AnnealConfig(k=2), coupling=np.zeros((3, 2)))

    def test_unconverged_flag(self):
        reps = [rep("a", "X"), rep("b", "Y"), rep("c", "X")]
        res = anneal(reps, AnnealConfig(k=2, max_outer_steps=1))
        assert not res.converged and len(res.trace) == 1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_clamp_preservation_and_determinism(seed):
    reports, k = random_instance(np.random.default_rng(seed), k_range=(2, 3))
    ids = [r.id for r in reports]
    clamps = {ids[0]: 1, ids[-1]: k}
    cfg = AnnealConfig(k=k, seed=seed)
    a = anneal(reports, cfg, clamps=clamps)
    b = anneal(reports, cfg, clamps=clamps)
    assert a.trace == b.trace
    assert a.assignment == b.assignment
    assert np.array_equal(a.field.v, b.field.v)
    expected = np.zeros(k)
    expected[0] = 1
    assert np.array_equal(a.field.v[0], expected)
    expected = np.zeros(k)
    expected[k - 1] = 1
    assert np.array_equal(a.field.v[-1], expected)
    free = a.field.v[1:-1]
    assert np.allclose(free.sum(axis=1), 1.0, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_schedule_identity(seed):
    """Geometric cooling: T_s = T_c * tau**s and the step count follows from the final temperature."""
    reports, k = random_instance(np.random.default_rng(seed))
    cfg = AnnealConfig(k=k, seed=seed)
    res = anneal(reports, cfg)
    temps = np.array([r.temperature for r in res.trace])
    steps = np.arange(len(temps))
    assert [r.step for r in res.trace] == steps.tolist()
    assert np.allclose(temps, res.t_c.t_c * cfg.tau ** steps, rtol=1e-12)
    if res.converged:
        assert res.trace[-1].saturation >= cfg.freeze_tol
        assert all(r.saturation < cfg.freeze_tol for r in res.trace[:-1])
    t_final = temps[-1]
    expected = math.ceil(math.log(t_final / res.t_c.t_c) / math.log(cfg.tau) - 1e-9)
    assert len(temps) - 1 == expected


def test_sweeps_stop_at_inner_tolerance():
    reps = [rep("a", "X"), rep("b", "Y"), rep("c", "X"), rep("d", ["X", "Y"])]
    j = build_conflict_matrix(reps)
    cfg = AnnealConfig(k=2, seed=1)
    f = init_spin_field(4, cfg, rng=np.random.default_rng(1))
    seen = []

    def hook(field, step):
        seen.append((step, field.v.copy()))
        return False

    trace, converged, _ = run_schedule(f, j.values, cfg, np.random.default_rng(1), after_sweep=hook)
    assert converged
    assert sum(r.sweeps for r in trace) == len(seen)

