"""Dense linear-algebra kernels and reproducible random streams.

Everything here operates on plain float64 numpy arrays and is sized for
dense problems: up to a few thousand rows with a small number of columns.
The singular value and symmetric eigenvalue routines are thin wrappers
around LAPACK that enforce the contracts the rest of the package relies
on (orthonormal factors, sorted spectra, exact reconstruction bounds).
The operator norm is an explicit power iteration so it stays independent
of the eigendecomposition path and can be cross-checked against it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

# Deviation allowed for orthonormal factors and reconstruction residuals.
FACTOR_TOL = 1e-10

# Internal entropy for the deterministic power-iteration start vector.
_POWER_START_ENTROPY = 0x5D2C0F1A


class PowerIterationError(RuntimeError):
    """Raised when power iteration does not reach its tolerance in time."""


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Validate ``m`` as a dense 2-d float64 matrix with finite entries."""
    out = np.asarray(m, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {out.shape}")
    if out.shape[0] == 0 or out.shape[1] == 0:
        raise ValueError(f"{name} must have positive dimensions, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} has non-finite entries")
    return out


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Return the symmetric part (m + m.T) / 2."""
    return (m + m.T) / 2.0


def check_symmetric(m, name: str = "matrix", tol: float = FACTOR_TOL) -> np.ndarray:
    """Validate that ``m`` is symmetric within an entrywise tolerance."""
    out = as_matrix(m, name)
    if out.shape[0] != out.shape[1]:
        raise ValueError(f"{name} must be square, got shape {out.shape}")
    scale = max(1.0, float(np.max(np.abs(out))))
    dev = float(np.max(np.abs(out - out.T)))
    if dev > tol * scale:
        raise ValueError(f"{name} is not symmetric (max asymmetry {dev:.3e})")
    return out


@dataclass(frozen=True)
class RngStream:
    """Stateless handle for one reproducible random stream.

    The same (seed, stream) pair always yields the same draw sequence, on
    any platform, because the generator is a PCG64 keyed by a SeedSequence
    built from exactly these two integers. Distinct stream ids give
    statistically independent streams, which is how parallel trials are
    seeded.
    """

    seed: int
    stream: int = 0

    def __post_init__(self):
        for label in ("seed", "stream"):
            value = getattr(self, label)
            if not isinstance(value, (int, np.integer)) or not 0 <= int(value) < 2**64:
                raise ValueError(f"{label} must be an unsigned 64-bit integer, got {value!r}")

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        root = np.random.SeedSequence(entropy=int(self.seed), spawn_key=(int(self.stream),))
        return np.random.Generator(np.random.PCG64(root))


def random_gaussian(rows: int, cols: int, rng: RngStream) -> np.ndarray:
    """Matrix of iid standard normal draws, deterministic per stream."""
    _check_dims(rows, cols)
    return rng.generator().standard_normal((rows, cols))


def random_uniform_sym(rows: int, cols: int, half_width: float, rng: RngStream) -> np.ndarray:
    """Matrix of iid uniform draws on the symmetric interval [-half_width, half_width]."""
    _check_dims(rows, cols)
    if not half_width > 0:
        raise ValueError(f"half_width must be positive, got {half_width}")
    return rng.generator().uniform(-half_width, half_width, size=(rows, cols))


def _check_dims(rows: int, cols: int) -> None:
    if rows < 1 or cols < 1:
        raise ValueError(f"dimensions must be positive, got ({rows}, {cols})")


class ThinSvd(NamedTuple):
    """Thin SVD m = u @ diag(sigma) @ v.T of a tall d-by-k matrix.

    u has orthonormal columns (d-by-k), v is k-by-k orthogonal and sigma
    is nonnegative and nonincreasing.
    """

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return self.u @ (self.sigma[:, None] * self.v.T)

    def polar_factor(self) -> np.ndarray:
        """Orthonormal polar factor u @ v.T, the closest orthonormal frame."""
        return self.u @ self.v.T


def thin_svd(m) -> ThinSvd:
    """Thin SVD of a d-by-k matrix with d >= k.

    The returned factors are validated against the reconstruction and
    orthonormality tolerances before being handed back.
    """
    mat = as_matrix(m)
    d, k = mat.shape
    if d < k:
        raise ValueError(f"need at least as many rows as columns, got shape {mat.shape}")
    u, sigma, vt = np.linalg.svd(mat, full_matrices=False)
    out = ThinSvd(u=u, sigma=sigma, v=vt.T)
    _validate_svd(out, mat)
    return out


def _validate_svd(f: ThinSvd, mat: np.ndarray) -> None:
    k = f.v.shape[0]
    eye = np.eye(k)
    if np.linalg.norm(f.u.T @ f.u - eye) > FACTOR_TOL:
        raise RuntimeError("svd left factor lost orthonormality")
    if np.linalg.norm(f.v.T @ f.v - eye) > FACTOR_TOL:
        raise RuntimeError("svd right factor lost orthogonality")
    if np.any(np.diff(f.sigma) > 0) or np.any(f.sigma < 0):
        raise RuntimeError("singular values are not sorted nonnegative")
    resid = np.linalg.norm(f.reconstruct() - mat)
    if resid > FACTOR_TOL * max(1.0, float(np.linalg.norm(mat))):
        raise RuntimeError(f"svd reconstruction residual too large ({resid:.3e})")


def sym_eig_topk(s, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Largest k eigenvalues and eigenvectors of a symmetric matrix.

    Returns (values, vectors) with values nonincreasing and vectors a
    d-by-k matrix of orthonormal columns satisfying s @ vectors ~=
    vectors @ diag(values).
    """
    mat = check_symmetric(s)
    d = mat.shape[0]
    if not 1 <= k <= d:
        raise ValueError(f"k must be in [1, {d}], got {k}")
    values, vectors = np.linalg.eigh(mat)
    order = slice(d - 1, d - 1 - k, -1)
    return values[order].copy(), vectors[:, order].copy()


def operator_norm(s, tol: float = 1e-9, max_iters: int = 20000) -> float:
    """Largest eigenvalue of a symmetric positive semidefinite matrix.

    Power iteration from a deterministic seeded start vector. Convergence
    is declared when the eigenpair residual ||s v - lam v|| drops below
    tol * lam; if that never happens within max_iters a
    PowerIterationError is raised. For an indefinite symmetric matrix,
    apply this to its square and take a square root.
    """
    mat = check_symmetric(s)
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    d = mat.shape[0]
    start = np.random.SeedSequence(entropy=_POWER_START_ENTROPY, spawn_key=(d,))
    v = np.random.Generator(np.random.PCG64(start)).standard_normal(d)
    v /= np.linalg.norm(v)
    for iteration in range(max_iters):
        w = mat @ v
        norm_w = float(np.linalg.norm(w))
        if norm_w == 0.0:
            return 0.0
        lam = float(v @ w)
        # Require one full power step before trusting the residual test,
        # so the seeded start cannot satisfy it by accident.
        if iteration >= 1 and np.linalg.norm(w - lam * v) <= tol * max(abs(lam), 1e-30):
            return max(lam, 0.0)
        v = w / norm_w
    raise PowerIterationError(
        f"power iteration did not converge in {max_iters} iterations (tol {tol:g})"
    )
