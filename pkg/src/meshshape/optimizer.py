"""Steepest descent on the mesh manifold with Armijo backtracking.

Per iteration: solve state and adjoint, form the derivative of the penalized
reduced objective, convert it to the negative gradient of the chosen metric,
line-search along the retraction and update.  Runs end when the objective
stalls over a trailing window, the iteration cap is reached, or a trial step
size falls below the failure floor.
"""

from __future__ import annotations

import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    FixedPointDivergence,
    NonDescentDirection,
    NonpositiveArea,
    SingularSystem,
    StepFloorFailure,
)
from .fem import (
    RhsField,
    assemble,
    objective_value,
    shape_derivative,
    solve_adjoint,
    solve_state,
)
from .geodesic import GeodesicConfig, retract_geodesic
from .mesh import ConnectivityComplex, edge_lengths, signed_areas
from .metrics import MetricOperator, MetricSpec, retract_euclidean
from .penalty import PenaltyParams, mesh_quality, penalty_gradient, penalty_value

logger = logging.getLogger(__name__)

VARIANTS = ("EucEuc", "ElasEuc", "CompEuc", "CompComp")

CONVERGED = "Converged"
MAX_ITER = "MaxIter"
STEP_FLOOR_FAILURE = "StepFloorFailure"

PHASES = (
    "state",
    "dObjective",
    "dPenalization",
    "backtracking",
    "assemblyG",
    "gradient",
    "retraction",
)


class PhaseTimer:
    """Accumulates wall time per algorithm phase."""

    def __init__(self):
        self.seconds = {name: 0.0 for name in PHASES}

    @contextmanager
    def phase(self, name):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.seconds[name] += time.perf_counter() - start


class _NullTimer:
    @contextmanager
    def phase(self, name):
        yield


@dataclass
class OptimizerConfig:
    variant: str
    penalty: PenaltyParams
    metric_penalty: PenaltyParams | None = None
    young_E: float = 1.0
    poisson_nu: float = 0.4
    sigma: float = 1e-4
    tau: float = 0.5
    max_iter: int = 100
    stop_tol: float = 1e-6
    step_floor: float = 1e-6
    window: int = 5
    fixed_vertex_mask: np.ndarray | None = None
    geodesic: GeodesicConfig = field(default_factory=GeodesicConfig)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if not (0.0 < self.sigma < 1.0):
            raise ValueError("sigma must lie in (0, 1)")
        if not (0.0 < self.tau < 1.0):
            raise ValueError("tau must lie in (0, 1)")
        if self.step_floor <= 0.0:
            raise ValueError("step_floor must be positive")
        if self.variant in ("CompEuc", "CompComp") and self.metric_penalty is None:
            raise ValueError(f"{self.variant} requires metric penalty parameters")


@dataclass
class IterationRecord:
    iter: int
    objective: float
    penalty: float
    total: float
    theta: float
    step: float
    backtracks: int
    grad_deriv_pairing: float


@dataclass
class RunResult:
    final_coords: np.ndarray
    status: str
    history: list


def initial_step(n, prev_step, prev_pairing, cur_pairing, grad_norm_metric):
    """Initial trial step: carry over the previous first-order decrease,
    resetting to ``1 / |d|`` on the first iteration or when the carried-over
    step becomes tiny relative to the direction norm."""
    if cur_pairing >= 0.0:
        raise NonDescentDirection(f"pairing {cur_pairing} is not negative")
    if grad_norm_metric <= 0.0:
        raise ValueError("direction norm must be positive")
    if n == 0:
        return 1.0 / grad_norm_metric
    candidate = prev_step * prev_pairing / cur_pairing
    if candidate * grad_norm_metric < 1e-4:
        return 1.0 / grad_norm_metric
    return candidate


def euclidean_safeguard(coords, complex: ConnectivityComplex, d, s) -> bool:
    """True if some vertex would travel at least half an incident height."""
    return s >= safeguard_critical_step(coords, complex, d)


def safeguard_critical_step(coords, complex: ConnectivityComplex, d) -> float:
    """Smallest step at which the vertex-travel safeguard trips (inf if never)."""
    moves = np.linalg.norm(np.asarray(d, dtype=float).reshape(-1, 2), axis=1)
    tri_moves = moves[complex.triangles]  # (N_T, 3)
    areas = signed_areas(coords, complex.triangles)
    h = 2.0 * areas[:, None] / edge_lengths(coords, complex.triangles)
    active = tri_moves > 0.0
    if not np.any(active):
        return np.inf
    return float(np.min(0.5 * h[active] / tri_moves[active]))


def stopping_check(totals, window: int, tol: float) -> bool:
    """True when the best decrease over the trailing window drops below tol."""
    if len(totals) <= window:
        return False
    current = totals[-1]
    past = totals[-1 - window : -1]
    return max(t - current for t in past) < tol


def armijo_search(
    evaluate,
    coords,
    complex,
    d,
    s_init,
    pairing,
    total0,
    *,
    sigma=1e-4,
    tau=0.5,
    step_floor=1e-6,
    use_safeguard=True,
    trial_point=None,
):
    """Backtracking line search with admissibility and travel safeguards.

    ``evaluate(candidate_coords) -> float`` returns the merit value (may be
    non-finite, which counts as failure).  ``trial_point(s, m)`` maps the
    m-th trial step to candidate coordinates; the default is the straight
    line ``coords + s d``.  Returns ``(accepted step, new coords, number of
    rejected trials)``.
    """
    d = np.asarray(d, dtype=float)
    if trial_point is None:
        def trial_point(s, m):
            return retract_euclidean(coords, d, s)

    s_crit = np.inf
    if use_safeguard and complex is not None:
        s_crit = safeguard_critical_step(coords, complex, d)

    s = s_init
    backtracks = 0
    while True:
        if s < step_floor:
            raise StepFloorFailure(f"trial step {s:.3e} below floor {step_floor:.3e}")
        ok = s < s_crit
        if ok:
            try:
                candidate = trial_point(s, backtracks)
            except FixedPointDivergence:
                ok = False  # retraction not computable at this scale
            else:
                if complex is not None and not np.all(
                    signed_areas(candidate, complex.triangles) > 0.0
                ):
                    ok = False
        if ok:
            value = evaluate(candidate)
            if np.isfinite(value) and value <= total0 + sigma * s * pairing:
                return s, candidate, backtracks
        s *= tau
        backtracks += 1


def _metric_spec(config: OptimizerConfig, qref) -> MetricSpec:
    if config.variant == "EucEuc":
        return MetricSpec.euclidean()
    if config.variant == "ElasEuc":
        return MetricSpec.elasticity(config.young_E, config.poisson_nu)
    return MetricSpec.complete(config.metric_penalty, qref)


def steepest_descent(
    complex: ConnectivityComplex,
    qref: np.ndarray,
    rhs: RhsField,
    config: OptimizerConfig,
    timer: PhaseTimer | None = None,
    on_iterate=None,
) -> RunResult:
    """Run the descent from the reference configuration.

    Records one row per visited iterate; the terminal iterate carries a zero
    step.  All accepted iterates have strictly positive signed areas.
    """
    timer = timer if timer is not None else _NullTimer()
    spec = _metric_spec(config, qref)
    mask = config.fixed_vertex_mask
    free = None
    if mask is not None:
        free = ~np.repeat(np.asarray(mask, dtype=bool), 2)

    coords = np.array(qref, dtype=float)
    history: list[IterationRecord] = []
    totals: list[float] = []
    status = MAX_ITER
    prev_step = None
    prev_pairing = None
    use_geodesic = config.variant == "CompComp"

    def merit(candidate):
        try:
            with timer.phase("state"):
                system = assemble(candidate, complex, rhs)
                y = solve_state(system)
            with timer.phase("backtracking"):
                j = objective_value(candidate, complex, y)
                phi = penalty_value(candidate, qref, complex, config.penalty)
        except SingularSystem:
            return float("inf")
        return j + phi

    n = 0
    while True:
        if on_iterate is not None:
            on_iterate(n, coords)
        theta = mesh_quality(coords, complex)
        try:
            with timer.phase("state"):
                system = assemble(coords, complex, rhs)
                y = solve_state(system)
        except SingularSystem as exc:
            # accepted iterate too close to degeneracy for the solver
            logger.warning("terminating: %s", exc)
            history.append(
                IterationRecord(n, float("nan"), float("nan"), float("nan"), theta, 0.0, 0, float("nan"))
            )
            status = STEP_FLOOR_FAILURE
            break
        j = objective_value(coords, complex, y)
        phi = penalty_value(coords, qref, complex, config.penalty)
        total = j + phi
        totals.append(total)

        if stopping_check(totals, config.window, config.stop_tol):
            history.append(
                IterationRecord(n, j, phi, total, theta, 0.0, 0, float("nan"))
            )
            status = CONVERGED
            break
        if n >= config.max_iter:
            history.append(
                IterationRecord(n, j, phi, total, theta, 0.0, 0, float("nan"))
            )
            status = MAX_ITER
            break

        try:
            with timer.phase("state"):
                p = solve_adjoint(system)
        except SingularSystem as exc:
            logger.warning("terminating: %s", exc)
            history.append(IterationRecord(n, j, phi, total, theta, 0.0, 0, float("nan")))
            status = STEP_FLOOR_FAILURE
            break
        with timer.phase("dObjective"):
            derivative = shape_derivative(coords, complex, y, p, rhs)
        if not config.penalty.is_zero:
            with timer.phase("dPenalization"):
                derivative = derivative + penalty_gradient(
                    coords, qref, complex, config.penalty
                )
        if free is not None:
            derivative = np.where(free, derivative, 0.0)

        if np.linalg.norm(derivative) < 1e-12:
            history.append(
                IterationRecord(n, j, phi, total, theta, 0.0, 0, float("nan"))
            )
            status = CONVERGED
            break

        with timer.phase("assemblyG"):
            operator = MetricOperator(spec, coords, complex, fixed_mask=mask)
        with timer.phase("gradient"):
            d = -operator.solve(derivative)
        pairing = float(derivative @ d)
        dnorm = operator.norm(d)
        if pairing >= 0.0:
            raise NonDescentDirection(f"pairing {pairing} at iteration {n}")

        s_init = initial_step(n, prev_step, prev_pairing, pairing, dnorm)

        trial_point = None
        if use_geodesic:
            trial_point = _geodesic_ladder(
                coords, d, s_init, spec, config, complex, mask, timer
            )
        try:
            s, new_coords, backtracks = armijo_search(
                merit,
                coords,
                complex,
                d,
                s_init,
                pairing,
                total,
                sigma=config.sigma,
                tau=config.tau,
                step_floor=config.step_floor,
                use_safeguard=not use_geodesic,
                trial_point=trial_point,
            )
        except StepFloorFailure:
            history.append(
                IterationRecord(n, j, phi, total, theta, 0.0, 0, pairing)
            )
            status = STEP_FLOOR_FAILURE
            break
        except (NonpositiveArea, SingularSystem) as exc:
            # Defensive: trial gating should prevent this.
            logger.warning("line search aborted: %s", exc)
            history.append(IterationRecord(n, j, phi, total, theta, 0.0, 0, pairing))
            status = STEP_FLOOR_FAILURE
            break

        assert np.all(signed_areas(new_coords, complex.triangles) > 0.0)
        history.append(
            IterationRecord(n, j, phi, total, theta, s, backtracks, pairing)
        )
        coords = new_coords
        prev_step, prev_pairing = s, pairing
        n += 1

    return RunResult(final_coords=coords, status=status, history=history)


def _geodesic_ladder(coords, d, s_init, spec, config, complex, mask, timer):
    """Trial-point source for the geodesic retraction.

    One integration with velocity ``s_init * d`` yields snapshots at the
    dyadic times matching the backtracking ladder (tau = 1/2); if those are
    exhausted a fresh integration is started from the smallest stored scale.
    """
    if config.tau != 0.5:
        raise ValueError("the geodesic trial ladder requires tau = 1/2")
    cache = {}

    def ensure_path(base_scale):
        if base_scale not in cache:
            with timer.phase("retraction"):
                try:
                    cache[base_scale] = retract_geodesic(
                        coords,
                        base_scale * np.asarray(d, dtype=float),
                        spec,
                        config.geodesic,
                        complex,
                        fixed_mask=mask,
                    )
                except FixedPointDivergence:
                    cache[base_scale] = None
        if cache[base_scale] is None:
            raise FixedPointDivergence(f"geodesic at scale {base_scale} diverged")
        return cache[base_scale]

    max_level = int(np.log2(config.geodesic.num_steps))

    def trial_point(s, m):
        level = int(round(np.log2(s_init / s)))
        base_level = (level // max_level) * max_level
        base_scale = s_init * 0.5**base_level
        path = ensure_path(base_scale)
        return path.at_time(0.5 ** (level - base_level))

    return trial_point
