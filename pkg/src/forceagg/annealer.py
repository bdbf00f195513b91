"""Potts spin mean-field annealing for conflict-minimizing clustering.

The schedule is a two-loop relaxation: at each temperature, rows of the
spin field are updated one report at a time until the mean absolute
change per report drops below ``inner_tol``; then the temperature is
multiplied by ``tau``.  Annealing stops once the field has frozen, i.e.
the mean squared spin per report reaches ``freeze_tol``.

Rows may be clamped (one-hot, never updated) and an extra per-report,
per-cluster coupling column may be added to the local field; the
refined clustering uses both, the standard clustering neither.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .evidence import ConflictMatrix, HardAssignment, Report, build_conflict_matrix, labels_energy

log = logging.getLogger(__name__)

# Global inhibition per cluster count; K <= 7 and K = 9 use zero.
ALPHA_BY_K: dict[int, float] = {8: 1e-6, 10: 3e-7, 11: 3e-8}
G_FLOOR = 1e-6
TC_FLOOR = 1e-6


def alpha_for_k(k: int) -> float:
    return ALPHA_BY_K.get(k, 0.0)


@dataclass(frozen=True)
class AnnealConfig:
    k: int = 2
    epsilon: float = 0.001
    tau: float = 0.9
    gamma: float = 0.5
    alpha: float | None = None  # None -> ALPHA_BY_K lookup
    inner_tol: float = 0.01
    freeze_tol: float = 0.99
    promote_threshold: float = 0.99
    seed: int = 0
    max_outer_steps: int = 500
    max_inner_sweeps: int = 1000

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if not 0.0 < self.tau < 1.0:
            raise ValueError("tau must lie in (0, 1)")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        for name in ("inner_tol", "freeze_tol", "promote_threshold"):
            val = getattr(self, name)
            if not 0.0 < val <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1], got {val}")
        if self.max_outer_steps < 1 or self.max_inner_sweeps < 1:
            raise ValueError("step bounds must be positive")

    @property
    def resolved_alpha(self) -> float:
        return alpha_for_k(self.k) if self.alpha is None else self.alpha

    def to_dict(self) -> dict:
        d = asdict(self)
        d["alpha"] = self.resolved_alpha
        d["alpha_by_k"] = {"k<=7": 0.0, **{str(k): v for k, v in sorted({**ALPHA_BY_K, 9: 0.0}.items())}, "k>11": 0.0}
        return d

    def with_(self, **changes) -> AnnealConfig:
        return replace(self, **changes)


@dataclass
class SpinField:
    """Mean-field spins ``v`` (N x K) plus per-row clamp (0-based cluster or -1)."""

    v: np.ndarray
    clamp: np.ndarray

    @property
    def n(self) -> int:
        return self.v.shape[0]

    @property
    def k(self) -> int:
        return self.v.shape[1]

    @property
    def free(self) -> np.ndarray:
        return self.clamp < 0

    def saturation(self) -> float:
        return float((self.v**2).sum() / self.n)

    def copy(self) -> SpinField:
        return SpinField(self.v.copy(), self.clamp.copy())


@dataclass(frozen=True)
class TemperatureEstimate:
    t_c: float
    lambda_min: float
    lambda_max: float


@dataclass(frozen=True)
class TraceRecord:
    step: int
    temperature: float
    energy: float
    saturation: float
    sweeps: int


@dataclass
class AnnealResult:
    assignment: HardAssignment
    field: SpinField
    trace: list[TraceRecord]
    converged: bool
    t_c: TemperatureEstimate


def critical_temperature(j: ConflictMatrix | np.ndarray, alpha: float, gamma: float, k: int) -> TemperatureEstimate:
    jv = j.values if isinstance(j, ConflictMatrix) else np.asarray(j, dtype=float)
    n = jv.shape[0]
    m = jv + alpha - gamma * np.eye(n)
    eig = np.linalg.eigvalsh(m)
    lo, hi = float(eig[0]), float(eig[-1])
    t_c = max(-lo, hi) / k
    if t_c <= 0:
        t_c = TC_FLOOR
    return TemperatureEstimate(t_c, lo, hi)


def clamp_vector(ids: Sequence[str], clamps: Mapping[str, int] | None, k: int) -> np.ndarray:
    """Translate a 1-based ``{report id: cluster}`` core map into a 0-based clamp vector."""
    out = np.full(len(ids), -1, dtype=np.int64)
    if not clamps:
        return out
    pos = {rid: i for i, rid in enumerate(ids)}
    for rid, c in clamps.items():
        if rid not in pos:
            raise ValueError(f"clamp names unknown report {rid!r}")
        if not 1 <= c <= k:
            raise ValueError(f"report {rid!r} clamped to cluster {c} outside 1..{k}")
        out[pos[rid]] = c - 1
    return out


def _one_hot_rows(v: np.ndarray, clamp: np.ndarray) -> None:
    rows = np.flatnonzero(clamp >= 0)
    v[rows] = 0.0
    v[rows, clamp[rows]] = 1.0


def _reset_free_rows(v: np.ndarray, clamp: np.ndarray, epsilon: float, rng: np.random.Generator) -> None:
    n, k = v.shape
    noise = rng.random((n, k))
    free = clamp < 0
    rows = 1.0 / k + epsilon * noise[free]
    v[free] = rows / rows.sum(axis=1, keepdims=True)


def init_spin_field(n: int, config: AnnealConfig, clamps: np.ndarray | None = None,
                    rng: np.random.Generator | None = None) -> SpinField:
    """Uniform rows ``1/K`` plus epsilon noise (renormalized); clamped rows one-hot.

    ``clamps`` is a 0-based clamp vector (-1 = free).  The noise matrix is
    drawn for every row so the random stream does not depend on clamping.
    """
    k = config.k
    if rng is None:
        rng = np.random.default_rng(config.seed)
    clamp = np.full(n, -1, dtype=np.int64) if clamps is None else np.asarray(clamps, dtype=np.int64).copy()
    if clamp.shape != (n,) or (clamp >= k).any():
        raise ValueError("clamp vector inconsistent with n or k")
    v = np.zeros((n, k))
    _reset_free_rows(v, clamp, config.epsilon, rng)
    _one_hot_rows(v, clamp)
    return SpinField(v, clamp)


def normalization(v: SpinField | np.ndarray) -> np.ndarray:
    """Per-cluster occupancy ``G_a = (K/N) sum_i V_ia``, floored at 1e-6."""
    vv = v.v if isinstance(v, SpinField) else v
    n, k = vv.shape
    return np.maximum(vv.sum(axis=0) * (k / n), G_FLOOR)


def local_field(v: SpinField | np.ndarray, j: ConflictMatrix | np.ndarray, coupling: np.ndarray | None,
                i: int, config: AnnealConfig, g: np.ndarray | None = None) -> np.ndarray:
    """Local field of report ``i`` over all K clusters.

    ``H_ia = [sum_j (J_ij + alpha) V_ja + C_ia + alpha - gamma V_ia] / G_a``
    with ``C`` the template coupling (zero for standard clustering).
    """
    vv = v.v if isinstance(v, SpinField) else v
    jv = j.values if isinstance(j, ConflictMatrix) else j
    alpha = config.resolved_alpha
    if g is None:
        g = normalization(vv)
    return _field_row(vv, jv[i] + alpha, None if coupling is None else coupling[i], alpha, config.gamma, i, g)


def _field_row(v, jrow_alpha, crow, alpha, gamma, i, g):
    h = jrow_alpha @ v + alpha - gamma * v[i]
    if crow is not None:
        h = h + crow
    return h / g


def mean_field_update(h: np.ndarray, t: float, config: AnnealConfig, noise: np.ndarray | None = None) -> np.ndarray:
    """Boltzmann row ``exp(-H/T) / F`` plus epsilon noise, renormalized to sum 1."""
    if t <= 0:
        raise ValueError("temperature must be positive")
    z = -np.asarray(h, dtype=float) / t
    z -= z.max()
    p = np.exp(z)
    p /= p.sum()
    if noise is not None and config.epsilon > 0:
        p = p + config.epsilon * noise
        p /= p.sum()
    return p


# Called after every sweep with (field, step).  Returning True restarts the
# temperature at T_c; the hook is responsible for reinitializing rows.
SweepHook = Callable[[SpinField, int], bool]


def run_schedule(field: SpinField, jvals: np.ndarray, config: AnnealConfig, rng: np.random.Generator,
                 coupling: np.ndarray | None = None, after_sweep: SweepHook | None = None,
                 t_c: TemperatureEstimate | None = None) -> tuple[list[TraceRecord], bool, TemperatureEstimate]:
    """Run the cooling schedule in place on ``field``; returns (trace, converged, T_c)."""
    n, k = field.v.shape
    alpha = config.resolved_alpha
    gamma = config.gamma
    eps = config.epsilon
    if t_c is None:
        t_c = critical_temperature(jvals, alpha, gamma, k)
    a_mat = jvals + alpha
    v = field.v
    clamp = field.clamp
    trace: list[TraceRecord] = []
    t = t_c.t_c
    step = 0
    budget = config.max_outer_steps
    while True:
        sweeps = 0
        restarted = False
        while True:
            g = normalization(v)
            noise = rng.random((n, k))
            prev = v.copy()
            free = np.flatnonzero(clamp < 0)
            for i in free:
                h = _field_row(v, a_mat[i], None if coupling is None else coupling[i], alpha, gamma, i, g)
                v[i] = mean_field_update(h, t, config, noise[i] if eps > 0 else None)
            sweeps += 1
            delta = np.abs(v - prev).sum() / n
            if after_sweep is not None and after_sweep(field, step):
                restarted = True
                break
            if delta <= config.inner_tol or sweeps >= config.max_inner_sweeps:
                break
        labels = field.v.argmax(axis=1)
        sat = field.saturation()
        trace.append(TraceRecord(step, t, labels_energy(labels, jvals), sat, sweeps))
        if restarted:
            log.debug("schedule restarted at step %d", step)
            t = t_c.t_c
            budget = step + 1 + config.max_outer_steps
            step += 1
            continue
        if sat >= config.freeze_tol:
            return trace, True, t_c
        step += 1
        if step >= budget:
            log.warning("annealing did not freeze within %d outer steps (saturation %.4f)",
                        config.max_outer_steps, sat)
            return trace, False, t_c
        t *= config.tau


def anneal(reports: Sequence[Report] | ConflictMatrix, config: AnnealConfig,
           clamps: Mapping[str, int] | None = None, coupling: np.ndarray | None = None) -> AnnealResult:
    """Cluster reports into ``config.k`` groups by mean-field annealing.

    ``clamps`` maps report id to a fixed 1-based cluster; ``coupling`` is an
    optional N x K array added to the numerator of the local field.
    """
    j = reports if isinstance(reports, ConflictMatrix) else build_conflict_matrix(reports)
    k = config.k
    if clamps is None and j.n < k:
        raise ValueError(f"need at least k={k} reports, got {j.n}")
    if coupling is not None and np.shape(coupling) != (j.n, k):
        raise ValueError("coupling must be an N x K array")
    rng = np.random.default_rng(config.seed)
    field = init_spin_field(j.n, config, clamp_vector(j.ids, clamps, k), rng)
    trace, converged, t_c = run_schedule(field, j.values, config, rng, coupling)
    assignment = HardAssignment.from_labels(j.ids, field.v.argmax(axis=1), k)
    return AnnealResult(assignment, field, trace, converged, t_c)
