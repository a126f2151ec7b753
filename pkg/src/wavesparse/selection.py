"""Permutation gap statistic for the sparsity bound, and the adjusted Rand index."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from .cluster import _values, derive_seed, feasibility_floor, sparse_kmeans
from .signals import GroupPartition

logger = logging.getLogger(__name__)


class TrivialPartitionWarning(UserWarning):
    pass


@dataclass
class GapProfile:
    """Observed and permuted objectives per candidate ``s``.

    ``gap = observed - perm_mean``; ``best_s`` maximises the gap with ties
    going to the smaller ``s``. ``no_structure`` is set when the best gap is
    within two permutation standard deviations of zero.
    """

    grid: np.ndarray
    observed: np.ndarray
    perm_mean: np.ndarray
    perm_std: np.ndarray
    n_permutations: int
    best_s: float
    no_structure: bool
    skipped: list = field(default_factory=list)

    @property
    def gap(self):
        return self.observed - self.perm_mean

    @property
    def best_index(self):
        return int(np.flatnonzero(self.grid == self.best_s)[0])

    def to_dict(self):
        return {
            "grid": self.grid.tolist(),
            "observed": self.observed.tolist(),
            "perm_mean": self.perm_mean.tolist(),
            "perm_std": self.perm_std.tolist(),
            "gap": self.gap.tolist(),
            "n_permutations": self.n_permutations,
            "best_s": self.best_s,
            "no_structure": self.no_structure,
            "skipped": list(self.skipped),
        }


def default_grid(p, groups=None, size=8):
    """Log-spaced candidates from the feasibility floor to the unconstrained norm."""
    lo = feasibility_floor(groups)
    hi = np.sqrt(p) if groups is None else float(np.sqrt(groups.sizes).sum())
    if hi <= lo:
        return np.array([lo])
    return np.geomspace(lo, hi, size)


def _objective(X, n_clusters, s, groups, restarts, max_iter, tol, seed, permute_seed):
    if permute_seed is not None:
        X = np.random.default_rng(permute_seed).permuted(X, axis=0)
    res = sparse_kmeans(X, n_clusters, s, groups, restarts, max_iter, seed, tol)
    return res.objective_trace[-1]


def gap_select(
    features,
    n_clusters,
    groups=None,
    grid=None,
    n_permutations=10,
    restarts=10,
    max_iter=15,
    tol=1e-4,
    seed=None,
    n_jobs=None,
):
    """Choose ``s`` by the permutation gap statistic.

    For every candidate the objective ``w @ B`` of sparse K-means on the data
    is compared with its mean over ``n_permutations`` copies in which each
    column is permuted independently. Each ``(s, b)`` pair owns its own
    permutation stream, so the result does not depend on ``n_jobs``.
    """
    X = np.asarray(_values(features), dtype=float)
    if n_permutations < 2:
        raise ValueError("need at least 2 permutations")
    if groups is not None and not isinstance(groups, GroupPartition):
        groups = GroupPartition.from_labels(groups)
    grid = default_grid(X.shape[1], groups) if grid is None else np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty s grid")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("s grid must be strictly increasing")
    floor = feasibility_floor(groups)
    ok = grid >= floor - 1e-12
    skipped = grid[~ok].tolist()
    for s in skipped:
        warnings.warn(f"skipping infeasible s={s:.6g} (floor {floor:.6g})", stacklevel=2)
    grid = grid[ok]
    if grid.size == 0:
        raise ValueError(f"every candidate s is below the feasibility floor {floor:.6g}")

    tasks = []
    for i, s in enumerate(grid):
        tasks.append((s, seed, None))
        for b in range(n_permutations):
            tasks.append((s, derive_seed(seed, 1, i, b, 0), derive_seed(seed, 1, i, b, 1)))
    run = delayed(_objective)
    values = Parallel(n_jobs=n_jobs)(
        run(X, n_clusters, s, groups, restarts, max_iter, tol, ks, ps) for s, ks, ps in tasks
    )
    values = np.asarray(values).reshape(grid.size, n_permutations + 1)
    observed = values[:, 0]
    perm = values[:, 1:]
    mean = perm.mean(axis=1)
    std = perm.std(axis=1, ddof=1)
    gap = observed - mean
    best = int(np.argmax(gap))  # first maximum -> smallest s
    no_structure = bool(abs(gap[best]) < 2.0 * std[best])
    logger.debug("gap profile: %s", dict(zip(grid.round(4).tolist(), gap.round(4).tolist())))
    return GapProfile(
        grid=grid,
        observed=observed,
        perm_mean=mean,
        perm_std=std,
        n_permutations=n_permutations,
        best_s=float(grid[best]),
        no_structure=no_structure,
        skipped=skipped,
    )


def _comb2(x):
    x = np.asarray(x, dtype=float)
    return x * (x - 1.0) / 2.0


def contingency_table(truth, predicted):
    truth = np.asarray(truth)
    predicted = np.asarray(getattr(predicted, "labels", predicted))
    if truth.shape != predicted.shape or truth.ndim != 1:
        raise ValueError(f"label vectors differ in shape: {truth.shape} vs {predicted.shape}")
    _, ti = np.unique(truth, return_inverse=True)
    _, pi = np.unique(predicted, return_inverse=True)
    table = np.zeros((ti.max() + 1, pi.max() + 1), dtype=np.int64)
    np.add.at(table, (ti, pi), 1)
    return table


def adjusted_rand_index(truth, predicted):
    """Adjusted Rand index between two labelings of the same instances.

    When the chance-corrected denominator vanishes (both partitions trivial)
    the index is 1 for identical partitions and 0 otherwise.
    """
    table = contingency_table(truth, predicted)
    n = table.sum()
    if n == 0:
        raise ValueError("empty labelings")
    index = _comb2(table).sum()
    sum_a = _comb2(table.sum(axis=1)).sum()
    sum_b = _comb2(table.sum(axis=0)).sum()
    pairs = _comb2(n)
    expected = sum_a * sum_b / pairs if pairs > 0 else 0.0
    max_index = 0.5 * (sum_a + sum_b)
    denom = max_index - expected
    if denom == 0:
        warnings.warn("ARI undefined for trivial partitions", TrivialPartitionWarning, stacklevel=2)
        same = table.shape[0] == table.shape[1] and np.count_nonzero(table) == table.shape[0]
        return 1.0 if same else 0.0
    return float((index - expected) / denom)
