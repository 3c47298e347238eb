"""Empirical verification aids for the population problem and its solver.

The infinite-sample objective has a fully known critical-point structure:
every critical frame consists of eigenvectors of the signal covariance,
i.e. signed selections of columns from the orthogonal completion of the
ground-truth frame, and only the identity selection attains the optimum.
This module generates such frames, estimates the constants appearing in
the growth and error-bound inequalities by sampling, bounds the distance
from a maximizer to the truth via the residual operator norms, and
checks the eigengap condition that certifies the spectral
initialization. Results are gathered in a flat report that exports as
key=value text plus a CSV of the raw sampled ratios.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .linalg import RngStream, check_symmetric, operator_norm, symmetrize
from .model import (GroupedDataset, NoiseGroups, SignalModel, expected_covariance,
                    sample_covariance)
from .problem import (HppcaProblem, PopulationProblem, ResidualSet, build_problem,
                      build_residuals)
from .solver import pca_init
from .stiefel import StiefelPoint, frame_distance, project_stiefel

# Distances below this are treated as "at the optimum" when forming ratios.
ZERO_DIST = 1e-6
# Residuals below this are treated as exact fixed points.
ZERO_RESIDUAL = 1e-12


def orthogonal_completion(q: StiefelPoint, rng: RngStream) -> np.ndarray:
    """Deterministic orthonormal basis of the complement of span(q).

    Seeded Gaussian columns are projected against q and orthonormalized
    twice, so the completion is reproducible per stream and orthogonal to
    q to machine precision.
    """
    d, k = q.d, q.k
    if d <= k:
        raise ValueError("the frame already spans the whole space")
    raw = rng.generator().standard_normal((d, d - k))
    proj = raw - q.x @ (q.x.T @ raw)
    basis, _ = np.linalg.qr(proj)
    basis = basis - q.x @ (q.x.T @ basis)
    basis, _ = np.linalg.qr(basis)
    return basis


def critical_point(population: PopulationProblem, columns, signs,
                   rng: RngStream) -> StiefelPoint:
    """A critical frame of the population objective.

    Picks the given columns (0-based, distinct) from [Q, Q_perp] and
    applies the given per-column signs. Column indices below k select
    ground-truth directions; the rest come from the seeded completion.
    The identity selection (0..k-1) with any signs is a global maximizer;
    every other selection is critical but strictly suboptimal.
    """
    cols = list(columns)
    if len(cols) != population.k:
        raise ValueError(f"need exactly {population.k} column indices")
    if len(set(cols)) != len(cols):
        raise ValueError("column indices must be distinct")
    if any(not 0 <= c < population.d for c in cols):
        raise ValueError(f"column indices must lie in [0, {population.d})")
    sgn = np.asarray(signs, dtype=np.float64)
    if sgn.shape != (population.k,) or not np.all(np.abs(sgn) == 1.0):
        raise ValueError("signs must be a vector of +1/-1, one per column")
    completion = orthogonal_completion(population.q_truth, rng)
    qbar = np.column_stack([population.q_truth.x, completion])
    return StiefelPoint(qbar[:, cols] * sgn[None, :])


def sample_near(q: StiefelPoint, radius: float, gen: np.random.Generator,
                max_tries: int = 200) -> StiefelPoint:
    """Random frame within ``radius`` of q (in sign-invariant distance).

    Perturb-and-project: q plus a Gaussian direction of Frobenius norm
    ``radius``, projected back to the manifold, rejected if it lands
    outside the ball.
    """
    for _ in range(max_tries):
        direction = gen.standard_normal((q.d, q.k))
        direction *= radius / np.linalg.norm(direction)
        candidate = project_stiefel(q.x + direction)
        if frame_distance(candidate, q) <= radius:
            return candidate
    raise RuntimeError(f"could not sample within radius {radius} after {max_tries} tries")


def growth_ratio_samples(population: PopulationProblem, n_samples: int,
                         radius: float, rng: RngStream) -> tuple[np.ndarray, np.ndarray]:
    """Sampled (distance, gap / distance^2) pairs near the optimum and globally.

    The gap is optimal value minus objective; the ratio is the quantity
    whose infimum is the quadratic growth constant. Points closer than
    ZERO_DIST to the optimum set are skipped.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    gen = rng.generator()
    top = population.optimal_value()

    def ratio_rows(points):
        rows = []
        for point in points:
            dist = frame_distance(point, population.q_truth)
            if dist < ZERO_DIST:
                continue
            rows.append((dist, (top - population.objective(point)) / dist**2))
        return np.array(rows) if rows else np.empty((0, 2))

    near = ratio_rows(sample_near(population.q_truth, radius, gen)
                      for _ in range(n_samples))
    far = ratio_rows(
        project_stiefel(gen.standard_normal((population.d, population.k)))
        for _ in range(n_samples)
    )
    return near, far


def estimate_quadratic_growth(population: PopulationProblem, n_samples: int,
                              radius: float, rng: RngStream) -> float:
    """Empirical quadratic growth constant: min sampled gap / distance^2."""
    near, far = growth_ratio_samples(population, n_samples, radius, rng)
    ratios = np.concatenate([near[:, 1], far[:, 1]])
    if ratios.size == 0:
        raise RuntimeError("no usable growth samples (all points hit the optimum set)")
    return float(np.min(ratios))


def error_bound_samples(population: PopulationProblem, alpha: float, n_samples: int,
                        radius: float, rng: RngStream) -> np.ndarray:
    """Sampled (distance, distance / fixed-point residual) pairs near the optimum.

    The ratio's supremum over a neighborhood is the local error-bound
    constant tying distance to the solver's optimality residual. Points
    with numerically zero residual are skipped.
    """
    if not 0 < radius < np.sqrt(2) / 2:
        raise ValueError("radius must lie in (0, sqrt(2)/2) for the local bound")
    from .solver import fixed_point_residual

    gen = rng.generator()
    rows = []
    for _ in range(n_samples):
        point = sample_near(population.q_truth, radius, gen)
        dist = frame_distance(point, population.q_truth)
        residual = fixed_point_residual(population, point, alpha)
        if residual < ZERO_RESIDUAL:
            continue
        rows.append((dist, dist / residual))
    return np.array(rows) if rows else np.empty((0, 2))


def estimate_error_bound_factor(population: PopulationProblem, alpha: float,
                                n_samples: int, radius: float, rng: RngStream) -> float:
    """Empirical error-bound constant: max sampled distance / residual."""
    rows = error_bound_samples(population, alpha, n_samples, radius, rng)
    if rows.size == 0:
        raise RuntimeError("no usable error-bound samples")
    return float(np.max(rows[:, 1]))


def residual_norms(residuals: ResidualSet, tol: float = 1e-9) -> np.ndarray:
    """Operator norm of each residual matrix.

    The matrices are symmetric but possibly indefinite, so the norm is the
    square root of the largest eigenvalue of the square.
    """
    out = []
    for delta in residuals.deltas:
        squared = symmetrize(delta @ delta)
        out.append(float(np.sqrt(max(operator_norm(squared, tol), 0.0))))
    return np.array(out)


def optimum_distance_bound(max_residual_norm: float, growth_rate: float, k: int) -> float:
    """Distance bound for any global maximizer of the sampled objective:
    2 sqrt(k) * max residual norm / quadratic growth constant."""
    if growth_rate <= 0:
        raise ValueError("growth constant must be positive")
    if max_residual_norm < 0:
        raise ValueError("residual norm must be nonnegative")
    return 2.0 * np.sqrt(k) * max_residual_norm / growth_rate


class DavisKahanCheck(NamedTuple):
    """Eigengap certificate for the spectral initialization.

    lhs is the squared sign-invariant distance of the top-k eigenvector
    frame from the ground truth; rhs the aggregate Davis-Kahan bound
    8 * ||C - E[C]||^2 * sum_j gap_j^(-2); holds records lhs <= rhs.
    """

    lhs: float
    rhs: float
    per_column_bounds: np.ndarray
    covariance_deviation: float
    holds: bool


def davis_kahan_check(model: SignalModel, groups: NoiseGroups, data,
                      eigengaps=None, tol: float = 1e-9) -> DavisKahanCheck:
    """Check the spectral initialization against its eigengap bound.

    ``data`` is a grouped dataset or a covariance matrix. Eigengaps
    default to min(lambda_{j-1} - lambda_j, lambda_j - lambda_{j+1}) with
    the strengths extended by +inf above and 0 below.
    """
    if isinstance(data, GroupedDataset):
        cov = sample_covariance(data)
    else:
        cov = check_symmetric(data, "covariance")
    expected = expected_covariance(model, groups)
    diff = cov - expected
    deviation = float(np.sqrt(max(operator_norm(symmetrize(diff @ diff), tol), 0.0)))
    if eigengaps is None:
        padded = np.concatenate([[np.inf], model.lambdas, [0.0]])
        eigengaps = np.minimum(padded[:-2] - padded[1:-1], padded[1:-1] - padded[2:])
    gaps = np.asarray(eigengaps, dtype=np.float64)
    if gaps.shape != (model.k,) or np.any(gaps <= 0):
        raise ValueError("need one positive eigengap per column")
    per_column = 2.0**1.5 * deviation / gaps
    rhs = float(np.sum(per_column**2))
    init = pca_init(cov, k=model.k)
    lhs = frame_distance(init, model.q_truth) ** 2
    # Absolute slack covers the degenerate case where both sides are zero
    # up to eigensolver rounding.
    return DavisKahanCheck(lhs=lhs, rhs=rhs, per_column_bounds=per_column,
                           covariance_deviation=deviation,
                           holds=bool(lhs <= rhs + 1e-12))


@dataclass(frozen=True, eq=False)
class DiagnosticsReport:
    """Flat summary of every estimated constant and checked bound."""

    quadratic_growth_rate: float
    error_bound_factor: float
    residual_operator_norms: tuple[float, ...]
    max_residual_norm: float
    optimum_distance_bound: float
    init_distance_sq: float
    init_distance_bound: float
    init_bound_holds: bool
    sample_count: int

    def __post_init__(self):
        if self.quadratic_growth_rate <= 0 or self.error_bound_factor <= 0:
            raise ValueError("estimated constants must be positive")
        if any(v < 0 for v in self.residual_operator_norms):
            raise ValueError("residual norms must be nonnegative")


@dataclass(frozen=True, eq=False)
class RatioSamples:
    """Raw sampled ratios backing the report's estimated constants."""

    growth_near: np.ndarray
    growth_global: np.ndarray
    error_bound: np.ndarray

    def to_csv(self) -> str:
        lines = ["family,dist_f,ratio"]
        for family, rows in (("growth-near", self.growth_near),
                             ("growth-global", self.growth_global),
                             ("error-bound", self.error_bound)):
            for dist, ratio in rows:
                lines.append(f"{family},{dist:.17g},{ratio:.17g}")
        return "\n".join(lines) + "\n"


def run_diagnostics(model: SignalModel, groups: NoiseGroups, dataset: GroupedDataset,
                    alpha: float = 0.05, n_samples: int = 500, radius: float = 0.3,
                    rng: RngStream = RngStream(0, 0), zero_residual: bool = False,
                    problem: HppcaProblem | None = None,
                    ) -> tuple[DiagnosticsReport, RatioSamples]:
    """Assemble the full report for one model setting and dataset.

    ``zero_residual`` replaces the sampled residual matrices by zero, the
    exact infinite-sample limit, which zeroes the distance bound.
    """
    population = PopulationProblem.from_model(model, groups)
    near, far = growth_ratio_samples(population, n_samples, radius, rng)
    growth = float(np.min(np.concatenate([near[:, 1], far[:, 1]])))
    eb_rows = error_bound_samples(population, alpha, n_samples, radius,
                                  RngStream(rng.seed, rng.stream + 1))
    factor = float(np.max(eb_rows[:, 1]))
    if zero_residual:
        norms = np.zeros(model.k)
    else:
        if problem is None:
            problem = build_problem(dataset, model.lambdas)
        norms = residual_norms(build_residuals(problem, population))
    bound = optimum_distance_bound(float(np.max(norms)), growth, model.k) \
        if np.max(norms) > 0 else 0.0
    dk = davis_kahan_check(model, groups, dataset)
    report = DiagnosticsReport(
        quadratic_growth_rate=growth,
        error_bound_factor=factor,
        residual_operator_norms=tuple(float(v) for v in norms),
        max_residual_norm=float(np.max(norms)),
        optimum_distance_bound=bound,
        init_distance_sq=dk.lhs,
        init_distance_bound=dk.rhs,
        init_bound_holds=dk.holds,
        sample_count=n_samples,
    )
    return report, RatioSamples(growth_near=near, growth_global=far, error_bound=eb_rows)


def report_text(report: DiagnosticsReport) -> str:
    """Flat key=value rendering of the report."""
    lines = [
        f"quadratic_growth_rate={report.quadratic_growth_rate:.17g}",
        f"error_bound_factor={report.error_bound_factor:.17g}",
        "residual_operator_norms=" + ",".join(f"{v:.17g}" for v in report.residual_operator_norms),
        f"max_residual_norm={report.max_residual_norm:.17g}",
        f"optimum_distance_bound={report.optimum_distance_bound:.17g}",
        f"init_distance_sq={report.init_distance_sq:.17g}",
        f"init_distance_bound={report.init_distance_bound:.17g}",
        f"init_bound_holds={str(report.init_bound_holds).lower()}",
        f"sample_count={report.sample_count}",
    ]
    return "\n".join(lines) + "\n"


def write_report(report: DiagnosticsReport, samples: RatioSamples, directory) -> Path:
    """Write report.txt and ratio_samples.csv into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "report.txt").write_text(report_text(report))
    (directory / "ratio_samples.csv").write_text(samples.to_csv())
    return directory
