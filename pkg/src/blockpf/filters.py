"""Bayesian filters: Kalman oracle, bootstrap PF, block PF, adaptive block PF.

All particle weights are handled in log space with per-block log-sum-exp
normalization; a block whose weights all underflow is reset to uniform and
the event is counted rather than aborting the run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BlockPFError,
    DegenerateWeights,
    DimensionMismatch,
    InvalidK,
    SingularInnovationCovariance,
)
from .models import StateSpaceModel
from .partitioning import Partition, correlation_from_cov, csc, sample_covariance
from .rng import RngStream

__all__ = [
    "GaussianBelief",
    "kalman_step",
    "run_kalman",
    "systematic_resample",
    "make_partition",
    "bootstrap_pf_step",
    "bpf_step",
    "adaptive_bpf_step",
    "BootstrapPF",
    "BlockPF",
    "AdaptiveBlockPF",
    "FilterOutput",
]


@dataclass
class GaussianBelief:
    mean: np.ndarray
    cov: np.ndarray


def kalman_step(belief: GaussianBelief, y: np.ndarray, f_mat, h_mat, q, r) -> GaussianBelief:
    """One predict/update cycle of the Kalman filter."""
    m = f_mat @ belief.mean
    p = f_mat @ belief.cov @ f_mat.T + q
    s = h_mat @ p @ h_mat.T + r
    try:
        gain = np.linalg.solve(s, h_mat @ p).T
    except np.linalg.LinAlgError as exc:
        raise SingularInnovationCovariance(str(exc)) from exc
    if not np.all(np.isfinite(gain)):
        raise SingularInnovationCovariance("non-finite Kalman gain")
    m_new = m + gain @ (y - h_mat @ m)
    p_new = p - gain @ h_mat @ p
    return GaussianBelief(mean=m_new, cov=0.5 * (p_new + p_new.T))


def run_kalman(model, ys: np.ndarray) -> np.ndarray:
    """Posterior means of the exact filter on a linear Gaussian model."""
    belief = GaussianBelief(np.zeros(model.d_x), model.Sigma0.copy())
    means = np.empty((len(ys), model.d_x))
    for t, y in enumerate(ys, start=1):
        belief = kalman_step(belief, y, model.F, model.H, model.q_matrix(t), model.R)
        means[t - 1] = belief.mean
    return means


def systematic_resample(weights: np.ndarray, rng: RngStream) -> np.ndarray:
    """Stratified index draw at positions (u + i)/N against the weight CDF."""
    w = np.asarray(weights, dtype=float)
    n = w.size
    if not np.all(np.isfinite(w)) or np.all(w == 0):
        raise DegenerateWeights("weights are all zero or non-finite")
    if abs(w.sum() - 1.0) > 1e-9:
        raise DegenerateWeights(f"weights sum to {w.sum()!r}, not 1")
    positions = (rng.random() + np.arange(n)) / n
    idx = np.searchsorted(np.cumsum(w), positions, side="right")
    return np.minimum(idx, n - 1)


def make_partition(scheme: str, d_x: int, k: int, rng: RngStream | None = None) -> Partition:
    """Fixed partition schemes: contiguous_known, random, strided_bad."""
    if not (1 <= k <= d_x):
        raise InvalidK(f"need 1 <= K <= d_x, got K={k}, d_x={d_x}")
    if d_x % k != 0:
        raise InvalidK(f"K={k} must divide d_x={d_x} for equal-size blocks")
    size = d_x // k
    if scheme == "contiguous_known":
        blocks = tuple(tuple(range(j * size, (j + 1) * size)) for j in range(k))
    elif scheme == "strided_bad":
        blocks = tuple(tuple(range(j, d_x, k)) for j in range(k))
    elif scheme == "random":
        if rng is None:
            raise InvalidK("random scheme needs an rng")
        perm = rng.permutation(d_x)
        blocks = tuple(tuple(sorted(int(i) for i in perm[j * size : (j + 1) * size]))
                       for j in range(k))
    else:
        raise InvalidK(f"unknown partition scheme {scheme!r}")
    return Partition(blocks)


def _correct_resample(x_pred, partition: Partition, y, model, rng):
    """Per-block correction, estimation and independent systematic resampling."""
    logf = model.log_factors(np.asarray(y, dtype=float), x_pred)
    n_p = x_pred.shape[1]
    estimate = np.empty(model.d_x)
    x_new = np.empty_like(x_pred)
    degenerate = 0
    for block in partition.blocks:
        idx = list(block)
        lw = logf[idx].sum(axis=0)
        m = lw.max()
        if np.isfinite(m):
            w = np.exp(lw - m)
            s = w.sum()
        else:
            s = 0.0
        if s > 0 and np.isfinite(s):
            w = w / s
        else:
            w = np.full(n_p, 1.0 / n_p)  # all factors underflowed; least-biased reset
            degenerate += 1
        estimate[idx] = x_pred[idx] @ w
        keep = systematic_resample(w, rng)
        x_new[idx] = x_pred[np.ix_(idx, keep)]
    return x_new, estimate, degenerate


def bpf_step(x_prev, partition: Partition, y, model: StateSpaceModel, rng: RngStream,
             t: int = 1):
    """One block-PF cycle: joint prediction, then per-block correct/resample."""
    if partition.d_x != model.d_x:
        raise DimensionMismatch("partition does not cover the state space")
    x_pred = model.sample_transition(x_prev, rng, t)
    return _correct_resample(x_pred, partition, y, model, rng)


def bootstrap_pf_step(x_prev, y, model, rng, t: int = 1):
    """Bootstrap PF step; the single-block special case of the block PF."""
    return bpf_step(x_prev, Partition((tuple(range(model.d_x)),)), y, model, rng, t)


def adaptive_bpf_step(x_prev, y, model, k: int, zeta: int, rng: RngStream, t: int = 1,
                      partition: Partition | None = None, repartition: bool = True,
                      restarts: int = 3):
    """Block-PF step that learns its partition from the predicted particles.

    Estimates the predicted-particle correlation matrix, clusters its absolute
    value with size-constrained spectral clustering, then corrects and
    resamples per block.  Returns (particles, estimate, partition_used,
    degenerate_block_count).
    """
    if not (1 <= k <= model.d_x):
        raise InvalidK(f"need 1 <= K <= d_x, got K={k}")
    if zeta * k < model.d_x:
        raise InvalidK(f"zeta*K = {zeta * k} cannot cover d_x = {model.d_x}")
    x_pred = model.sample_transition(x_prev, rng, t)
    if repartition or partition is None:
        try:
            corr = correlation_from_cov(sample_covariance(x_pred), floor_policy="isolate")
            new_partition = csc(np.abs(corr), k, zeta, rng, restarts=restarts)
            partition = new_partition
        except BlockPFError:
            if partition is None:
                raise
            # clustering failed this step; keep filtering with the last partition
    x_new, estimate, degenerate = _correct_resample(x_pred, partition, y, model, rng)
    return x_new, estimate, partition, degenerate


@dataclass
class FilterOutput:
    """Trajectory-level result of one filter run."""

    estimates: np.ndarray  # (T, d_x)
    partitions: list = field(default_factory=list)  # Partition per step, or empty
    deg_per_step: list = field(default_factory=list)  # degenerate blocks per step
    degenerate_blocks: int = 0
    block_steps: int = 0  # total number of (block, step) weight normalizations

    @property
    def degenerate_rate(self) -> float:
        return self.degenerate_blocks / self.block_steps if self.block_steps else 0.0


class BootstrapPF:
    def __init__(self, model: StateSpaceModel, n_particles: int):
        self.model = model
        self.n_particles = n_particles

    def run(self, ys, rng) -> FilterOutput:
        x = self.model.sample_initial(rng, self.n_particles)
        out = FilterOutput(np.empty((len(ys), self.model.d_x)))
        for t, y in enumerate(ys, start=1):
            x, est, deg = bootstrap_pf_step(x, y, self.model, rng, t)
            out.estimates[t - 1] = est
            out.deg_per_step.append(deg)
            out.degenerate_blocks += deg
            out.block_steps += 1
        return out


class BlockPF:
    """Block PF driven by a fixed or per-step partition rule.

    ``partition_fn(t, rng)`` returns the partition for step t; time-invariant
    schemes simply ignore t.
    """

    def __init__(self, model: StateSpaceModel, n_particles: int, partition_fn):
        self.model = model
        self.n_particles = n_particles
        self.partition_fn = partition_fn

    def run(self, ys, rng) -> FilterOutput:
        x = self.model.sample_initial(rng, self.n_particles)
        out = FilterOutput(np.empty((len(ys), self.model.d_x)))
        for t, y in enumerate(ys, start=1):
            part = self.partition_fn(t, rng)
            x, est, deg = bpf_step(x, part, y, self.model, rng, t)
            out.estimates[t - 1] = est
            out.partitions.append(part)
            out.deg_per_step.append(deg)
            out.degenerate_blocks += deg
            out.block_steps += part.n_blocks
        return out


class AdaptiveBlockPF:
    def __init__(self, model: StateSpaceModel, n_particles: int, k: int, zeta: int,
                 repartition: bool = True, restarts: int = 3):
        self.model = model
        self.n_particles = n_particles
        self.k = k
        self.zeta = zeta
        self.repartition = repartition
        self.restarts = restarts

    def run(self, ys, rng) -> FilterOutput:
        x = self.model.sample_initial(rng, self.n_particles)
        out = FilterOutput(np.empty((len(ys), self.model.d_x)))
        part = None
        for t, y in enumerate(ys, start=1):
            repart = self.repartition or part is None
            x, est, part, deg = adaptive_bpf_step(
                x, y, self.model, self.k, self.zeta, rng, t,
                partition=part, repartition=repart, restarts=self.restarts,
            )
            out.estimates[t - 1] = est
            out.partitions.append(part)
            out.deg_per_step.append(deg)
            out.degenerate_blocks += deg
            out.block_steps += part.n_blocks
        return out
