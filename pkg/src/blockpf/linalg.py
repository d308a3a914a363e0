"""Dense symmetric linear algebra and Gaussian sampling helpers.

Matrices are plain float64 numpy arrays.  Symmetric inputs are validated,
not trusted.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, NoConvergence, NotPositiveSemidefinite
from .rng import RngStream

__all__ = ["check_symmetric", "cholesky_psd", "sym_eigen", "sample_mvn"]

_SYM_TOL = 1e-9


def check_symmetric(s: np.ndarray, name: str = "matrix") -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise NotPositiveSemidefinite(f"{name} has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(s))))
    if np.max(np.abs(s - s.T)) > _SYM_TOL * scale:
        raise DimensionMismatch(f"{name} is not symmetric")
    return 0.5 * (s + s.T)


def cholesky_psd(s: np.ndarray) -> np.ndarray:
    """Lower-triangular factor L with L @ L.T == s.

    PSD-but-singular inputs (exactly singular block structures, round-off
    negative pivots) are handled by adding a small diagonal jitter before
    giving up.  Genuinely indefinite input raises NotPositiveSemidefinite.
    """
    s = check_symmetric(s)
    dim = s.shape[0]
    max_diag = max(float(np.max(np.abs(np.diag(s)))), 1.0)
    base = 1e-10 * float(np.trace(s)) / dim if np.trace(s) > 0 else 1e-12
    for jitter in (0.0, base, 100.0 * base, 1e-8 * max_diag):
        try:
            return np.linalg.cholesky(s + jitter * np.eye(dim))
        except np.linalg.LinAlgError:
            continue
    # pivot below -1e-8 * max diagonal: indefinite beyond tolerance
    raise NotPositiveSemidefinite(
        f"matrix of dim {dim} is not PSD within tolerance (min eig "
        f"{np.linalg.eigvalsh(s).min():.3e})"
    )


def sym_eigen(s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvector columns of s."""
    s = check_symmetric(s)
    try:
        vals, vecs = np.linalg.eigh(s)
    except np.linalg.LinAlgError as exc:
        res = f"dim={s.shape[0]}"
        raise NoConvergence(f"symmetric eigensolver failed to converge ({res})") from exc
    return vals, vecs


def sample_mvn(mean: np.ndarray, chol_cov: np.ndarray, rng: RngStream,
               size: int | None = None) -> np.ndarray:
    """Draw mean + L @ z with z standard normal.

    With ``size`` given, returns a (dim, size) matrix of independent draws.
    """
    mean = np.asarray(mean, dtype=float)
    chol_cov = np.asarray(chol_cov, dtype=float)
    if mean.ndim != 1 or chol_cov.shape != (mean.size, mean.size):
        raise DimensionMismatch(
            f"mean has dim {mean.shape}, factor has shape {chol_cov.shape}"
        )
    if size is None:
        z = rng.standard_normal(mean.size)
        return mean + chol_cov @ z
    z = rng.standard_normal((mean.size, size))
    return mean[:, None] + chol_cov @ z
