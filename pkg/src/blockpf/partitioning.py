"""Adaptive state-space partitioning.

Pipeline: sample covariance of predicted particles -> correlation matrix ->
similarity (its absolute value) -> normalized symmetric Laplacian -> spectral
embedding -> size-constrained k-means whose assignment step is an exact
min-cost-flow solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import mcf
from .errors import (
    InfeasibleConstraints,
    InvalidPartition,
    IsolatedVertex,
    TooFewSamples,
    ZeroVariance,
)
from .linalg import check_symmetric, sym_eigen
from .rng import RngStream

__all__ = [
    "Partition",
    "sample_covariance",
    "correlation_from_cov",
    "laplacian_sym",
    "spectral_embed",
    "constrained_kmeans",
    "csc",
]


@dataclass(frozen=True)
class Partition:
    """Ordered disjoint blocks of 0-based state indices covering {0..d_x-1}."""

    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        blocks = tuple(tuple(int(i) for i in b) for b in self.blocks)
        object.__setattr__(self, "blocks", blocks)
        flat = [i for b in blocks for i in b]
        if not blocks or any(len(b) == 0 for b in blocks):
            raise InvalidPartition("every block must be nonempty")
        if sorted(flat) != list(range(len(flat))):
            raise InvalidPartition("blocks must disjointly cover 0..d_x-1")

    @property
    def d_x(self) -> int:
        return sum(len(b) for b in self.blocks)

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    def labels(self) -> np.ndarray:
        lab = np.empty(self.d_x, dtype=np.int64)
        for k, b in enumerate(self.blocks):
            lab[list(b)] = k
        return lab

    @staticmethod
    def from_labels(labels: np.ndarray) -> "Partition":
        """Blocks ordered by their smallest member; indices ascending inside."""
        labels = np.asarray(labels)
        groups = [np.flatnonzero(labels == k) for k in np.unique(labels)]
        groups.sort(key=lambda g: g[0])
        return Partition(tuple(tuple(int(i) for i in g) for g in groups))

    def max_block_size(self) -> int:
        return max(len(b) for b in self.blocks)


def sample_covariance(particles: np.ndarray) -> np.ndarray:
    """Unbiased (1/(N-1)) sample covariance of column-vector particles."""
    x = np.asarray(particles, dtype=float)
    if x.ndim != 2 or x.shape[1] < 2:
        raise TooFewSamples("need a (d_x, N_p) matrix with N_p >= 2")
    centered = x - x.mean(axis=1, keepdims=True)
    cov = centered @ centered.T / (x.shape[1] - 1)
    return 0.5 * (cov + cov.T)


def correlation_from_cov(cov: np.ndarray, floor_policy: str = "raise") -> np.ndarray:
    """Normalize a covariance matrix to a correlation matrix.

    Components whose variance falls below 1e-12 * max variance are either
    rejected (``floor_policy="raise"``, the default) or treated as
    uncorrelated with everything (``"isolate"``), which keeps a collapsed
    particle component from crashing the filter.
    """
    cov = check_symmetric(cov, "covariance")
    diag = np.diag(cov).copy()
    floor = 1e-12 * max(float(diag.max()), 0.0)
    low = np.flatnonzero(diag <= floor)
    if len(low) and floor_policy == "raise":
        raise ZeroVariance(int(low[0]))
    safe = diag.copy()
    safe[low] = 1.0
    inv_a = 1.0 / np.sqrt(safe)
    corr = cov * inv_a[:, None] * inv_a[None, :]
    corr[low, :] = 0.0
    corr[:, low] = 0.0
    np.fill_diagonal(corr, 1.0)
    return np.clip(0.5 * (corr + corr.T), -1.0, 1.0)


def laplacian_sym(omega: np.ndarray) -> np.ndarray:
    """Normalized symmetric graph Laplacian I - D^{-1/2} Omega D^{-1/2}."""
    omega = check_symmetric(omega, "similarity")
    if np.any(omega < 0):
        raise ValueError("similarity entries must be nonnegative")
    deg = omega.sum(axis=1)
    bad = np.flatnonzero(deg <= 1e-12)
    if len(bad):
        raise IsolatedVertex(int(bad[0]))
    inv_sqrt = 1.0 / np.sqrt(deg)
    lap = -omega * inv_sqrt[:, None] * inv_sqrt[None, :]
    lap[np.diag_indices_from(lap)] += 1.0
    return 0.5 * (lap + lap.T)


def spectral_embed(omega: np.ndarray, k: int) -> np.ndarray:
    """Rows: each state index embedded via the k lowest Laplacian eigenvectors.

    Column signs follow a fixed convention (first nonzero entry positive) and
    rows are normalized to unit Euclidean norm; exactly-zero rows are left
    untouched rather than given an arbitrary direction.
    """
    d_x = omega.shape[0]
    if not (1 <= k <= d_x):
        raise ValueError(f"need 1 <= k <= d_x, got k={k}, d_x={d_x}")
    lap = laplacian_sym(omega)
    _vals, vecs = sym_eigen(lap)
    u = vecs[:, :k].copy()
    for j in range(k):
        nz = np.flatnonzero(np.abs(u[:, j]) > 1e-12)
        if len(nz) and u[nz[0], j] < 0:
            u[:, j] = -u[:, j]
    norms = np.linalg.norm(u, axis=1)
    keep = norms > 1e-12
    u[keep] /= norms[keep, None]
    return u


def _seed_centers(points: np.ndarray, k: int, rng: RngStream | None,
                  deterministic: bool) -> np.ndarray:
    """Distance-weighted seeding: deterministic maximin or probabilistic (k-means++)."""
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    if deterministic:
        d0 = np.linalg.norm(points - points.mean(axis=0), axis=1)
        idx = int(np.argmax(d0))
    else:
        idx = int(rng.integers(n))
    centers[0] = points[idx]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        if deterministic:
            idx = int(np.argmax(d2))
        else:
            tot = d2.sum()
            if tot <= 0:
                idx = int(rng.integers(n))
            else:
                idx = int(rng.choice(n, p=d2 / tot))
        centers[j] = points[idx]
        d2 = np.minimum(d2, np.sum((points - centers[j]) ** 2, axis=1))
    return centers


def _sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = (
        np.sum(points**2, axis=1)[:, None]
        - 2.0 * points @ centers.T
        + np.sum(centers**2, axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def _kmeans_once(points, k, xi, zeta, centers, max_iter):
    n = points.shape[0]
    labels = np.full(n, -1, dtype=np.int64)
    obj = np.inf
    converged = False
    for _ in range(max_iter):
        d2 = _sq_dists(points, centers)
        nearest = np.argmin(d2, axis=1)
        counts = np.bincount(nearest, minlength=k)
        if np.all(counts >= xi) and np.all(counts <= zeta):
            new_labels = nearest  # unconstrained optimum is feasible, hence optimal
        else:
            new_labels = mcf.solve_assignment(d2, xi, zeta)
        obj = float(d2[np.arange(n), new_labels].sum())
        if np.array_equal(new_labels, labels):
            converged = True
            break
        labels = new_labels
        for j in range(k):
            members = points[labels == j]
            if len(members):
                centers[j] = members.mean(axis=0)
    return labels, obj, converged


def constrained_kmeans(points: np.ndarray, k: int, xi: int, zeta: int,
                       rng: RngStream | None = None, restarts: int = 1,
                       max_iter: int = 100) -> Partition:
    """k-means with cluster sizes forced into [xi, zeta] via exact MCF assignment.

    The first restart uses deterministic maximin seeding, further restarts use
    probabilistic distance-weighted seeding from ``rng``; the lowest-objective
    result wins.  A run that hits ``max_iter`` contributes its best-so-far.
    """
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    if zeta * k < n:
        raise InfeasibleConstraints(f"zeta*K = {zeta * k} < {n} points")
    if xi * k > n:
        raise InfeasibleConstraints(f"xi*K = {xi * k} > {n} points")
    if restarts > 1 and rng is None:
        raise ValueError("probabilistic restarts require an rng")
    best = None
    for r in range(restarts):
        centers = _seed_centers(points, k, rng, deterministic=(r == 0))
        labels, obj, _conv = _kmeans_once(points, k, xi, zeta, centers, max_iter)
        if best is None or obj < best[1]:
            best = (labels, obj)
    return Partition.from_labels(best[0])


def csc(omega: np.ndarray, k: int, zeta: int, rng: RngStream | None = None,
        restarts: int = 10) -> Partition:
    """Constrained spectral clustering of state indices.

    Spectral embedding into the k lowest Laplacian eigenvectors, then
    size-constrained k-means (minimum size 1, maximum size zeta).
    """
    points = spectral_embed(omega, k)
    return constrained_kmeans(points, k, 1, zeta, rng, restarts=restarts)
