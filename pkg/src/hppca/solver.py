"""Power-method solver for the grouped quadratic subspace program.

One iteration maps the current frame through the problem's column-wise
quadratic map plus an alpha-weighted copy of itself, then projects back
onto the orthonormal frames:

    X_next = polar(alpha * X + [M_1 x_1, ..., M_K x_K]).

The thin SVD computed for the projection is reused for two per-iteration
certificates:

* the fixed-point residual ||X V Sigma V.T - A||_F, which vanishes
  exactly at fixed points of the update and doubles as the stopping rule;
* the nuclear gap ||A||_* - trace(X.T A), nonnegative for every frame
  and zero precisely at fixed points.

Every iteration is recorded; traces export to CSV at full precision.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .linalg import ThinSvd, check_symmetric, sym_eig_topk, thin_svd
from .model import GroupedDataset, sample_covariance
from .problem import PopulationProblem, gpm_map
from .stiefel import RANK_TOL, StiefelPoint, frame_distance

# Eigengap below which the top-k eigenvector frame is not well determined.
EIGENGAP_TOL = 1e-12

TRACE_HEADER = "iter,f,g,dist_f,step_norm,rho_alpha,fixed_point_gap,wall_time_ms"


class Termination(str, Enum):
    RESIDUAL = "residual-converged"
    STEP = "step-converged"
    MAX_ITERS = "max-iters"
    PROJECTION_NONUNIQUE = "projection-nonunique"


@dataclass(frozen=True)
class SolverConfig:
    """Step weight, iteration budget and stopping tolerances.

    With ascent_safeguard on, solving a finite-sample problem lifts the
    effective step weight to at least the problem's ascent floor so the
    objective is monotone; the population problem ascends for any
    positive alpha already.
    """

    alpha: float = 0.05
    max_iters: int = 5000
    tol_step: float = 1e-12
    tol_residual: float = 1e-10
    ascent_safeguard: bool = False

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if not (self.tol_step > 0 and self.tol_residual > 0):
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class IterationRecord:
    """Metrics of one iterate; step_norm is the step taken from it."""

    iteration: int
    objective: float
    population_objective: float | None
    dist_to_truth: float | None
    step_norm: float
    residual: float
    fixed_point_gap: float
    map_norm: float
    wall_time: float

    def __post_init__(self):
        if self.residual < 0 or self.fixed_point_gap < -1e-9 or self.wall_time < 0:
            raise ValueError("iteration certificates out of range")


@dataclass(eq=False)
class SolveResult:
    """Final frame, full per-iteration trace and why the loop stopped."""

    x_final: StiefelPoint
    trace: list[IterationRecord]
    termination: Termination
    alpha: float
    nonunique_steps: int = 0

    @property
    def iterations(self) -> int:
        return len(self.trace) - 1

    def objective_trace(self) -> np.ndarray:
        return np.array([r.objective for r in self.trace])

    def population_trace(self) -> np.ndarray:
        return np.array([math.nan if r.population_objective is None else r.population_objective
                         for r in self.trace])

    def distance_trace(self) -> np.ndarray:
        return np.array([math.nan if r.dist_to_truth is None else r.dist_to_truth
                         for r in self.trace])


def _fixed_point_stats(f: ThinSvd, xa: np.ndarray, mapped: np.ndarray) -> tuple[float, float]:
    """(residual, nuclear gap) of the frame against its mapped matrix."""
    core = f.v @ (f.sigma[:, None] * f.v.T)
    residual = float(np.linalg.norm(xa @ core - mapped))
    gap = float(np.sum(f.sigma) - np.sum(xa * mapped))
    return residual, gap


def gpm_step(problem, x: StiefelPoint, alpha: float) -> StiefelPoint:
    """One update: project the mapped frame back onto orthonormal frames."""
    f = thin_svd(gpm_map(problem, x, alpha))
    return StiefelPoint(f.polar_factor(), nonunique=bool(f.sigma[-1] <= RANK_TOL))


def fixed_point_residual(problem, x: StiefelPoint, alpha: float) -> float:
    """||X V Sigma V.T - A(X)||_F from the thin SVD of the mapped frame.

    Zero exactly at fixed points of the update; used as the optimality
    residual for stopping and for empirical error-bound ratios.
    """
    mapped = gpm_map(problem, x, alpha)
    residual, _ = _fixed_point_stats(thin_svd(mapped), x.x, mapped)
    return residual


def fixed_point_gap(problem, x: StiefelPoint, alpha: float) -> float:
    """Nuclear norm of the mapped frame minus its trace alignment with X.

    Nonnegative for every frame by the trace inequality for singular
    values, and zero exactly when X is a fixed point of the update.
    """
    mapped = gpm_map(problem, x, alpha)
    _, gap = _fixed_point_stats(thin_svd(mapped), x.x, mapped)
    return gap


def pca_init(data, k: int | None = None) -> StiefelPoint:
    """Top-k eigenvector frame of the (pooled) sample covariance.

    Accepts a grouped dataset or a covariance matrix directly. If the
    eigengap separating the kept eigenvalues from the rest is numerically
    zero the frame is not well determined and the result is flagged
    nonunique.
    """
    if isinstance(data, GroupedDataset):
        cov = sample_covariance(data)
        k = data.k if k is None else k
    else:
        cov = check_symmetric(data, "covariance")
        if k is None:
            raise ValueError("k is required when initializing from a raw covariance")
    d = cov.shape[0]
    if not 1 <= k < d:
        raise ValueError(f"k must be in [1, {d}), got {k}")
    values, vectors = sym_eig_topk(cov, min(k + 1, d))
    degenerate = values[k - 1] - values[k] <= EIGENGAP_TOL if k < d else False
    return StiefelPoint(vectors[:, :k], nonunique=bool(degenerate))


def gpm_solve(problem, init: StiefelPoint, config: SolverConfig,
              truth: PopulationProblem | None = None) -> SolveResult:
    """Iterate the power-method update from ``init`` until a stopping rule fires.

    Stops when the fixed-point residual or the step norm drops below its
    tolerance, or after max_iters updates. Non-convergence is reported in
    the termination field, never raised. When ``truth`` is supplied each
    record also carries the infinite-sample objective and the
    sign-invariant distance to the ground truth.
    """
    alpha = config.alpha
    if config.ascent_safeguard:
        alpha = max(alpha, problem.ascent_alpha_floor())
    x = init
    records: list[IterationRecord] = []
    termination = Termination.MAX_ITERS
    nonunique_steps = 0
    last_step_nonunique = False

    for t in range(config.max_iters):
        tic = time.perf_counter()
        mapped = gpm_map(problem, x, alpha)
        f = thin_svd(mapped)
        x_next = StiefelPoint(f.polar_factor(), nonunique=bool(f.sigma[-1] <= RANK_TOL))
        residual, gap = _fixed_point_stats(f, x.x, mapped)
        step = float(np.linalg.norm(x_next.x - x.x))
        records.append(_record(truth, x, t, step, residual, gap,
                               float(f.sigma[0]), time.perf_counter() - tic,
                               _objective_from_map(x, mapped, alpha)))
        last_step_nonunique = x_next.nonunique
        if x_next.nonunique:
            nonunique_steps += 1
        x = x_next
        if residual <= config.tol_residual:
            termination = Termination.RESIDUAL
            break
        if step <= config.tol_step:
            termination = Termination.STEP
            break

    tic = time.perf_counter()
    mapped = gpm_map(problem, x, alpha)
    f = thin_svd(mapped)
    residual, gap = _fixed_point_stats(f, x.x, mapped)
    records.append(_record(truth, x, len(records), 0.0, residual, gap,
                           float(f.sigma[0]), time.perf_counter() - tic,
                           _objective_from_map(x, mapped, alpha)))
    if last_step_nonunique:
        termination = Termination.PROJECTION_NONUNIQUE
    return SolveResult(x_final=x, trace=records, termination=termination,
                       alpha=alpha, nonunique_steps=nonunique_steps)


def _objective_from_map(x: StiefelPoint, mapped: np.ndarray, alpha: float) -> float:
    """Objective recovered from the already-computed map: the quadratic part
    of trace(X.T A(X)) after removing the alpha * ||X||_F^2 term."""
    return float(np.sum(x.x * mapped)) - alpha * x.k


def _record(truth, x: StiefelPoint, iteration: int, step: float, residual: float,
            gap: float, map_norm: float, elapsed: float, objective: float) -> IterationRecord:
    pop_value = None
    dist = None
    if truth is not None:
        pop_value = truth.objective(x)
        dist = frame_distance(x, truth.q_truth)
    return IterationRecord(
        iteration=iteration,
        objective=objective,
        population_objective=pop_value,
        dist_to_truth=dist,
        step_norm=step,
        residual=max(residual, 0.0),
        fixed_point_gap=gap,
        map_norm=map_norm,
        wall_time=max(elapsed, 0.0),
    )


def trace_csv(trace: list[IterationRecord]) -> str:
    """Render a trace as CSV, 17 significant digits so floats round-trip."""
    def cell(value) -> str:
        return "" if value is None else f"{value:.17g}"

    lines = [TRACE_HEADER]
    for r in trace:
        lines.append(",".join([
            str(r.iteration), cell(r.objective), cell(r.population_objective),
            cell(r.dist_to_truth), cell(r.step_norm), cell(r.residual),
            cell(r.fixed_point_gap), cell(r.wall_time * 1e3),
        ]))
    return "\n".join(lines) + "\n"


def write_trace_csv(trace: list[IterationRecord], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(trace_csv(trace))
    return path


def read_trace_csv(path) -> list[IterationRecord]:
    """Parse a trace CSV back into records (the map norm is not stored)."""
    lines = Path(path).read_text().strip().splitlines()
    if not lines or lines[0] != TRACE_HEADER:
        raise OSError(f"{path} is not a solver trace (unexpected header)")

    def parse(cellval: str) -> float | None:
        return None if cellval == "" else float(cellval)

    records = []
    for line in lines[1:]:
        cells = line.split(",")
        records.append(IterationRecord(
            iteration=int(cells[0]), objective=parse(cells[1]),
            population_objective=parse(cells[2]), dist_to_truth=parse(cells[3]),
            step_norm=parse(cells[4]), residual=parse(cells[5]),
            fixed_point_gap=parse(cells[6]), map_norm=math.nan,
            wall_time=parse(cells[7]) / 1e3,
        ))
    return records
