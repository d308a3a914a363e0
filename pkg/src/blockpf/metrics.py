"""Scoring: mean squared error, Adjusted Rand Index, bias/variance split."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, IndexSetMismatch, TooFewReplicates
from .partitioning import Partition

__all__ = ["RunRecord", "mse", "mse_arrays", "ari", "bias_variance"]


@dataclass
class RunRecord:
    """One filter step of one run."""

    run_id: int
    t: int
    filter_name: str
    k: int
    zeta: int
    estimate: np.ndarray
    truth: np.ndarray
    partition_used: Partition | None = None
    wall_time_ms: float = 0.0


def mse_arrays(estimates: np.ndarray, truths: np.ndarray) -> float:
    """Mean over steps and components of the squared estimation error."""
    estimates = np.asarray(estimates, dtype=float)
    truths = np.asarray(truths, dtype=float)
    if estimates.size == 0:
        raise EmptyInput("no estimates")
    if estimates.shape != truths.shape:
        raise IndexSetMismatch(f"shapes differ: {estimates.shape} vs {truths.shape}")
    return float(np.mean((estimates - truths) ** 2))


def mse(records: list[RunRecord]) -> float:
    """MSE over runs, time steps and state components."""
    if not records:
        raise EmptyInput("no records")
    d_x = records[0].estimate.size
    for rec in records:
        if rec.estimate.size != d_x or rec.truth.size != d_x:
            raise IndexSetMismatch("records have inconsistent state dimension")
    est = np.stack([r.estimate for r in records])
    tru = np.stack([r.truth for r in records])
    return mse_arrays(est, tru)


def _comb2(x: np.ndarray) -> float:
    return float((x * (x - 1) / 2).sum())


def ari(p1: Partition, p2: Partition) -> float:
    """Hubert-Arabie Adjusted Rand Index between two partitions.

    1 means identical partitions; values can be slightly negative for
    worse-than-chance agreement.
    """
    if p1.d_x != p2.d_x:
        raise IndexSetMismatch(f"partitions cover {p1.d_x} vs {p2.d_x} indices")
    l1, l2 = p1.labels(), p2.labels()
    contingency = np.zeros((p1.n_blocks, p2.n_blocks), dtype=np.int64)
    np.add.at(contingency, (l1, l2), 1)
    n = p1.d_x
    index = _comb2(contingency)
    sum_a = _comb2(contingency.sum(axis=1))
    sum_b = _comb2(contingency.sum(axis=0))
    total = n * (n - 1) / 2
    expected = sum_a * sum_b / total
    maximum = 0.5 * (sum_a + sum_b)
    if maximum == expected:  # both partitions trivial (all singletons or one block)
        return 1.0 if index == maximum else 0.0
    return float((index - expected) / (maximum - expected))


def bias_variance(replicate_estimates: np.ndarray, reference: np.ndarray):
    """Squared bias and variance of replicate estimates against a reference.

    ``replicate_estimates`` is (M, T, d_x) from M filter replicates on the
    same data; ``reference`` is (T, d_x).  Both outputs are averaged over
    steps and components.
    """
    est = np.asarray(replicate_estimates, dtype=float)
    ref = np.asarray(reference, dtype=float)
    if est.ndim != 3 or est.shape[0] < 2:
        raise TooFewReplicates("need at least 2 replicates of shape (M, T, d_x)")
    if est.shape[1:] != ref.shape:
        raise IndexSetMismatch(f"shapes differ: {est.shape[1:]} vs {ref.shape}")
    bias = est.mean(axis=0) - ref
    variance = est.var(axis=0, ddof=1)
    return float(np.mean(bias**2)), float(np.mean(variance))
