"""K-means, per-feature BCSS, and (group-)sparse K-means.

Sparse K-means alternates between K-means on the feature-weighted data and a
closed-form update of the weight vector ``w``, which maximises ``w @ B``
subject to ``||w||_2 <= 1``, ``w >= 0`` and either ``||w||_1 <= s`` or the
group norm ``sum_g sqrt(|g|) ||w_g||_2 <= s``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_features, check_n_clusters
from .signals import ClusteringResult, GroupPartition

logger = logging.getLogger(__name__)


class DegenerateWeightsWarning(UserWarning):
    """No feature has positive between-cluster dispersion."""


# ---------------------------------------------------------------------------
# seeding


def as_seed_sequence(seed, *key):
    """Turn an int / None / SeedSequence into a SeedSequence, optionally keyed."""
    if isinstance(seed, np.random.SeedSequence):
        base = seed
        if key:
            return np.random.SeedSequence(base.entropy, spawn_key=base.spawn_key + tuple(key))
        return base
    return np.random.SeedSequence(seed, spawn_key=tuple(key))


def derive_seed(seed, *key):
    """A 63-bit integer seed for the stream identified by ``key``."""
    return int(as_seed_sequence(seed, *key).generate_state(2, dtype=np.uint64)[0] >> 1)


# ---------------------------------------------------------------------------
# K-means


@dataclass
class KMeansFit:
    labels: np.ndarray
    centers: np.ndarray
    inertia: float
    n_iter: int
    restart: int = 0


def _sq_distances(X, x_sq, C):
    d = x_sq[:, None] - 2.0 * (X @ C.T) + np.einsum("ij,ij->i", C, C)[None, :]
    np.maximum(d, 0.0, out=d)
    return d


def _centers(X, labels, K):
    onehot = (labels[None, :] == np.arange(K)[:, None]).astype(float)
    counts = onehot.sum(axis=1)
    return (onehot @ X) / np.maximum(counts, 1.0)[:, None]


def _repair_empty(labels, d, K):
    # move the point farthest from its centroid into each empty cluster
    labels = labels.copy()
    counts = np.bincount(labels, minlength=K)
    own = d[np.arange(labels.size), labels]
    for k in np.flatnonzero(counts == 0):
        movable = counts[labels] > 1
        cand = np.where(movable, own, -np.inf)
        i = int(np.argmax(cand))
        counts[labels[i]] -= 1
        labels[i] = k
        counts[k] = 1
        own[i] = 0.0
    return labels


def _inertia(X, labels, K):
    C = _centers(X, labels, K)
    return float(((X - C[labels]) ** 2).sum())


def lloyd(X, init_centers, max_iter=300, labels=None):
    """Lloyd iterations from given centers until the assignment is stable.

    Exact distance ties go to the lowest cluster index.
    """
    X = np.asarray(X, dtype=float)
    K = init_centers.shape[0]
    x_sq = np.einsum("ij,ij->i", X, X)
    C = np.asarray(init_centers, dtype=float)
    it = 0
    for it in range(1, max_iter + 1):
        d = _sq_distances(X, x_sq, C)
        new = _repair_empty(np.argmin(d, axis=1), d, K)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        C = _centers(X, labels, K)
    return KMeansFit(labels, _centers(X, labels, K), _inertia(X, labels, K), it)


def kmeans_plus_plus(X, K, rng):
    n = X.shape[0]
    x_sq = np.einsum("ij,ij->i", X, X)
    idx = [int(rng.integers(n))]
    d = _sq_distances(X, x_sq, X[idx])[:, 0]
    for _ in range(1, K):
        total = d.sum()
        if total <= 0.0:
            i = int(rng.integers(n))
        else:
            i = int(np.searchsorted(np.cumsum(d), rng.random() * total, side="right"))
            i = min(i, n - 1)
        idx.append(i)
        d = np.minimum(d, _sq_distances(X, x_sq, X[[i]])[:, 0])
    return X[idx].copy()


def kmeans_fit(X, n_clusters, restarts=10, seed=None, max_iter=300):
    """Best of ``restarts`` k-means++/Lloyd runs by within-cluster sum of squares.

    Restart ``r`` draws from its own stream keyed by ``(seed, r)``, so adding
    restarts never changes the earlier ones. Ties in inertia go to the lower
    restart index.
    """
    X = check_features(X, min_samples=1)
    K = check_n_clusters(n_clusters, X.shape[0])
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    best = None
    for r in range(restarts):
        rng = np.random.default_rng(as_seed_sequence(seed, r))
        fit = lloyd(X, kmeans_plus_plus(X, K, rng), max_iter=max_iter)
        fit.restart = r
        if best is None or fit.inertia < best.inertia:
            best = fit
    return best


def kmeans(features, n_clusters, restarts=10, seed=None):
    """Cluster labels (0-based) of the best k-means restart."""
    return kmeans_fit(_values(features), n_clusters, restarts, seed).labels


def _values(features):
    return getattr(features, "values", features)


# ---------------------------------------------------------------------------
# BCSS and weight subproblems


def bcss(features, labels):
    """Per-feature between-cluster sum of squares.

    Equals ``(1/n) sum_{i,i'} d_{ii'j} - sum_k (1/n_k) sum_{i,i' in C_k} d_{ii'j}``
    over ordered pairs, computed as twice total minus within dispersion.
    """
    X = np.asarray(_values(features), dtype=float)
    labels = np.asarray(labels)
    if labels.shape != (X.shape[0],):
        raise ValueError("assignment must label every instance")
    _, inv = np.unique(labels, return_inverse=True)
    K = inv.max() + 1
    total = ((X - X.mean(axis=0)) ** 2).sum(axis=0)
    within = ((X - _centers(X, inv, K)[inv]) ** 2).sum(axis=0)
    return 2.0 * (total - within)


def group_norm(w, groups):
    """``sum_g sqrt(|g|) * ||w_g||_2``."""
    w = np.asarray(w, dtype=float)
    if groups.n_features != w.size:
        raise ValueError("partition does not match the weight vector")
    norms = np.sqrt(np.bincount(groups.labels, weights=w * w, minlength=len(groups)))
    return float(np.sqrt(groups.sizes) @ norms)


def _degenerate(p):
    warnings.warn(
        "no feature has positive BCSS; returning uniform weights",
        DegenerateWeightsWarning,
        stacklevel=3,
    )
    return np.full(p, 1.0 / np.sqrt(p))


def _bisect(norm_of, target, hi, n_iter=200):
    """Smallest-found threshold in [0, hi] with norm_of(t) <= target."""
    lo = 0.0
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if norm_of(mid) > target:
            lo = mid
        else:
            hi = mid
    return hi


def solve_weights_l1(B, s):
    """Maximise ``w @ B`` over the unit L2 ball, L1 ball of radius ``s`` and ``w >= 0``.

    ``w`` is the normalised soft-threshold of ``max(B, 0)`` with the threshold
    chosen by bisection so that ``||w||_1 = s`` whenever the L1 constraint
    binds.
    """
    b = np.maximum(np.asarray(B, dtype=float), 0.0)
    p = b.size
    if s < 1.0:
        raise ValueError(f"s={s} is below the L1 feasibility floor of 1")
    if not np.any(b > 0):
        return _degenerate(p)
    w = b / np.linalg.norm(b)
    if w.sum() <= s:
        return w
    top = b.max()
    tied = b == top
    m = int(tied.sum())
    if s <= np.sqrt(m):
        # constraint set cannot be reached by thresholding; spread s over the ties
        return np.where(tied, s / m, 0.0)

    def l1_of(delta):
        u = np.maximum(b - delta, 0.0)
        return u.sum() / np.linalg.norm(u)

    delta = _bisect(l1_of, s, top)
    u = np.maximum(b - delta, 0.0)
    return u / np.linalg.norm(u)


def solve_weights_group(B, s, groups):
    """Maximise ``w @ B`` over the unit L2 ball, group-norm ball of radius ``s`` and ``w >= 0``.

    Each group is shrunk as a block: ``w_g`` is proportional to
    ``(||b_g|| - mu * sqrt(|g|))_+ * b_g / ||b_g||``, with ``mu`` found by
    bisection. Below the point where the L2 constraint can be active the
    solution is the best group(s) scaled onto the group-norm sphere.
    """
    b = np.maximum(np.asarray(B, dtype=float), 0.0)
    if not isinstance(groups, GroupPartition):
        raise ValueError("groups must be a GroupPartition")
    if groups.n_features != b.size:
        raise ValueError(f"partition covers {groups.n_features} features, B has {b.size}")
    sizes = groups.sizes.astype(float)
    roots = np.sqrt(sizes)
    floor = roots.min()
    if s < floor - 1e-12:
        raise ValueError(f"s={s} is below the group-norm feasibility floor {floor:.6g}")
    if not np.any(b > 0):
        return _degenerate(b.size)
    lab = groups.labels
    gn = np.sqrt(np.bincount(lab, weights=b * b, minlength=len(groups)))
    w = b / np.linalg.norm(b)
    if roots @ (gn / np.linalg.norm(gn)) <= s:
        return w
    ratio = gn / roots
    top = ratio.max()
    tied = ratio >= top * (1 - 1e-14)
    tied_size = sizes[tied].sum()
    if s <= np.sqrt(tied_size):
        scale = np.where(tied, s * roots / tied_size, 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(gn[lab] > 0, b / gn[lab], 0.0)
        return scale[lab] * unit

    def shrunk(mu):
        keep = np.maximum(gn - mu * roots, 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            factor = np.where(gn > 0, keep / gn, 0.0)
        return b * factor[lab]

    def gnorm_of(mu):
        u = shrunk(mu)
        un = np.sqrt(np.bincount(lab, weights=u * u, minlength=len(groups)))
        return (roots @ un) / np.linalg.norm(un)

    mu = _bisect(gnorm_of, s, top)
    u = shrunk(mu)
    return u / np.linalg.norm(u)


def feasibility_floor(groups=None):
    """Smallest admissible ``s``: 1 for the L1 problem, ``min sqrt(|g|)`` for groups."""
    if groups is None:
        return 1.0
    return float(np.sqrt(groups.sizes.min()))


def solve_weights(B, s, groups=None):
    if groups is None:
        return solve_weights_l1(B, s)
    return solve_weights_group(B, s, groups)


def multivariate_groups(n_variables, length):
    """Vertical slices ``{t, t+T, ..., t+(G-1)T}`` of a variable-major flattening."""
    G, T = int(n_variables), int(length)
    if G < 1 or T < 1:
        raise ValueError("G and T must be positive")
    return GroupPartition([[t + g * T for g in range(G)] for t in range(T)], n_features=G * T)


# ---------------------------------------------------------------------------
# Sparse K-means


def sparse_kmeans(
    features,
    n_clusters,
    s,
    groups=None,
    restarts=10,
    max_iter=15,
    seed=None,
    tol=1e-4,
    fresh_starts=True,
):
    """Alternate weighted K-means and the weight update.

    The first K-means uses ``restarts`` k-means++ starts on uniformly weighted
    data. Later iterations warm-start Lloyd from the previous partition and,
    with ``fresh_starts``, also run ``restarts`` new k-means++ starts; a fresh
    partition replaces the warm one only if its weighted inertia is lower.
    Keeping the warm start as a candidate keeps ``w @ B`` non-decreasing from
    one iteration to the next. Stops after
    ``max_iter`` iterations or once the relative L1 change in ``w`` drops
    below ``tol``.

    Returns a :class:`~wavesparse.signals.ClusteringResult`.
    """
    X = check_features(_values(features))
    n, p = X.shape
    K = check_n_clusters(n_clusters, n)
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if groups is not None and groups.n_features != p:
        raise ValueError(f"partition covers {groups.n_features} features, data has {p}")
    floor = feasibility_floor(groups)
    if s < floor - 1e-12:
        raise ValueError(f"s={s} is below the feasibility floor {floor:.6g}")

    w = np.full(p, 1.0 / np.sqrt(p))
    labels = None
    trace = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        active = w > 0
        Xw = X[:, active] * np.sqrt(w[active])
        if labels is None:
            labels = kmeans_fit(Xw, K, restarts, seed).labels
        else:
            fit = lloyd(Xw, _centers(Xw, labels, K), labels=labels)
            if fresh_starts:
                alt = kmeans_fit(Xw, K, restarts, as_seed_sequence(seed, 0, n_iter))
                if alt.inertia < fit.inertia:
                    fit = alt
            labels = fit.labels
        B = bcss(X, labels)
        w_new = solve_weights(B, s, groups)
        trace.append(float(w_new @ B))
        change = np.abs(w_new - w).sum() / np.abs(w).sum()
        w = w_new
        if change < tol:
            break
    tag = getattr(features, "transform_tag", "raw")
    return ClusteringResult(
        labels=labels,
        weights=w,
        objective_trace=tuple(trace),
        s=float(s),
        n_iter=n_iter,
        transform_tag=tag,
        seed=seed if isinstance(seed, (int, type(None))) else None,
        method="sparse" if groups is None else "group-sparse",
    )


def refit_on_selected(features, weights, threshold, n_clusters, restarts=10, seed=None):
    """Plain K-means restricted to the features with ``w_j > threshold``."""
    X = check_features(_values(features))
    w = np.asarray(getattr(weights, "weights", weights), dtype=float)
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    keep = w > threshold
    if not keep.any():
        raise ValueError(
            f"no weight exceeds threshold {threshold}; the largest is {w.max():.3g}, "
            "use a lower threshold"
        )
    return kmeans(X[:, keep], n_clusters, restarts, seed)


class SparseKMeans(ClusterMixin, BaseEstimator):
    """Sparse K-means with optional group structure on the feature weights.

    Parameters
    ----------
    n_clusters : int
    s : float or "auto"
        Bound on ``||w||_1`` (or the group norm). ``"auto"`` selects it with
        the permutation gap statistic over ``s_grid``.
    groups : GroupPartition, array-like of per-feature group labels, or None
        ``None`` gives the L1 problem.
    restarts : int
        k-means++ starts for the first K-means.
    max_iter : int
        Outer iterations.
    s_grid : array-like, optional
        Candidate values for ``s="auto"``; defaults to 8 log-spaced values
        between the feasibility floor and the unconstrained norm.
    n_permutations : int
        Permuted data sets per candidate for the gap statistic.
    refit_threshold : float, optional
        If set, ``labels_`` come from plain K-means on the features whose
        weight exceeds this threshold; the sparse labels stay in
        ``sparse_labels_``.
    random_state : int or None
    n_jobs : int or None
        Workers for the gap statistic; results do not depend on it.

    Attributes
    ----------
    labels_, weights_, s_, objective_trace_, n_iter_, cluster_centers_,
    gap_profile_ (None unless ``s="auto"``), result_
    """

    def __init__(
        self,
        n_clusters=2,
        s="auto",
        groups=None,
        restarts=10,
        max_iter=15,
        tol=1e-4,
        s_grid=None,
        n_permutations=10,
        refit_threshold=None,
        random_state=None,
        n_jobs=None,
    ):
        self.n_clusters = n_clusters
        self.s = s
        self.groups = groups
        self.restarts = restarts
        self.max_iter = max_iter
        self.tol = tol
        self.s_grid = s_grid
        self.n_permutations = n_permutations
        self.refit_threshold = refit_threshold
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _partition(self, p):
        g = self.groups
        if g is None or isinstance(g, GroupPartition):
            return g
        g = np.asarray(g)
        if g.shape != (p,):
            raise ValueError("groups must give one label per feature")
        return GroupPartition.from_labels(g)

    def fit(self, X, y=None):
        tag = getattr(X, "transform_tag", "raw")
        if self.groups is None and getattr(X, "groups", None) is not None:
            logger.debug("ignoring partition attached to features; groups=None means L1")
        X = check_features(_values(X))
        groups = self._partition(X.shape[1])
        self.gap_profile_ = None
        if isinstance(self.s, str):
            if self.s != "auto":
                raise ValueError(f"s must be a number or 'auto', got {self.s!r}")
            from .selection import gap_select

            profile = gap_select(
                X,
                self.n_clusters,
                groups=groups,
                grid=self.s_grid,
                n_permutations=self.n_permutations,
                restarts=self.restarts,
                max_iter=self.max_iter,
                tol=self.tol,
                seed=self.random_state,
                n_jobs=self.n_jobs,
            )
            self.gap_profile_ = profile
            s = profile.best_s
        else:
            s = float(self.s)
        res = sparse_kmeans(
            X,
            self.n_clusters,
            s,
            groups=groups,
            restarts=self.restarts,
            max_iter=self.max_iter,
            seed=self.random_state,
            tol=self.tol,
        )
        self.s_ = s
        self.weights_ = res.weights
        self.objective_trace_ = res.objective_trace
        self.n_iter_ = res.n_iter
        self.sparse_labels_ = res.labels
        labels = res.labels
        if self.refit_threshold is not None:
            labels = refit_on_selected(
                X, res.weights, self.refit_threshold, self.n_clusters, self.restarts,
                self.random_state,
            )
        self.labels_ = labels
        self.cluster_centers_ = _centers(X, labels, self.n_clusters)
        self.result_ = ClusteringResult(
            labels=labels if self.refit_threshold is None else res.labels,
            weights=res.weights,
            objective_trace=res.objective_trace,
            s=s,
            n_iter=res.n_iter,
            transform_tag=tag,
            seed=self.random_state,
            method=res.method,
            gap_profile=None if self.gap_profile_ is None else self.gap_profile_.to_dict(),
            refit_labels=None if self.refit_threshold is None else labels,
        )
        return self

    def predict(self, X):
        """Nearest cluster center under the fitted feature weights."""
        check_is_fitted(self, "weights_")
        X = check_features(_values(X), min_samples=1)
        sw = np.sqrt(self.weights_)
        d = _sq_distances(X * sw, np.einsum("ij,ij->i", X * sw, X * sw), self.cluster_centers_ * sw)
        return np.argmin(d, axis=1)
