import warnings

import numpy as np
import pytest

from oracles import bcss_double_sum, brute_force_wcss, feasible, projected_gradient_weights
from wavesparse.cluster import (
    DegenerateWeightsWarning,
    SparseKMeans,
    bcss,
    derive_seed,
    feasibility_floor,
    group_norm,
    kmeans,
    kmeans_fit,
    lloyd,
    multivariate_groups,
    refit_on_selected,
    solve_weights_group,
    solve_weights_l1,
    sparse_kmeans,
)
from wavesparse.selection import adjusted_rand_index
from wavesparse.signals import FeatureMatrix, GroupPartition

# ---------------------------------------------------------------------------
# K-means


def test_kmeans_matches_exhaustive_optimum(rng):
    for _ in range(5):
        X = rng.normal(size=(10, 2))
        fit = kmeans_fit(X, 3, restarts=20, seed=1)
        assert fit.inertia == pytest.approx(brute_force_wcss(X, 3), rel=1e-12)


def test_kmeans_on_thirty_points_reaches_local_optimum(rng):
    X = rng.normal(size=(30, 2))
    fit = kmeans_fit(X, 3, restarts=10, seed=0)
    # a Lloyd step from the solution changes nothing
    again = lloyd(X, fit.centers, labels=fit.labels)
    assert np.array_equal(again.labels, fit.labels)


def test_kmeans_is_seeded():
    X = np.random.default_rng(3).normal(size=(40, 5))
    a = kmeans(X, 4, 5, seed=11)
    assert np.array_equal(a, kmeans(X, 4, 5, seed=11))


def test_kmeans_restart_streams_are_prefix_stable():
    X = np.random.default_rng(4).normal(size=(40, 5))
    few = kmeans_fit(X, 4, 3, seed=2)
    many = kmeans_fit(X, 4, 8, seed=2)
    assert many.inertia <= few.inertia


def test_kmeans_no_empty_clusters_with_duplicates():
    X = np.vstack([np.zeros((6, 2)), np.ones((2, 2))])
    labels = kmeans(X, 3, restarts=3, seed=0)
    assert sorted(set(labels.tolist())) == [0, 1, 2]


def test_kmeans_rejects_too_many_clusters():
    with pytest.raises(ValueError, match="exceeds"):
        kmeans(np.zeros((3, 2)), 4)


def test_derive_seed_is_stable():
    assert derive_seed(5, 1, 2) == derive_seed(5, 1, 2)
    assert derive_seed(5, 1, 2) != derive_seed(5, 2, 1)


# ---------------------------------------------------------------------------
# BCSS


def test_bcss_two_points():
    # ordered-pair sum 8, divided by n = 2, no within-cluster spread
    np.testing.assert_allclose(bcss([[0.0], [2.0]], [0, 1]), [4.0])


def test_bcss_matches_double_sum(rng):
    for _ in range(10):
        n = int(rng.integers(2, 21))
        X = rng.normal(size=(n, 3))
        lab = rng.integers(0, 3, n)
        np.testing.assert_allclose(bcss(X, lab), bcss_double_sum(X, lab), rtol=1e-9, atol=1e-9)


def test_bcss_single_cluster_is_zero(rng):
    np.testing.assert_allclose(bcss(rng.normal(size=(5, 2)), np.zeros(5)), 0.0, atol=1e-12)


# ---------------------------------------------------------------------------
# weight subproblems


def test_l1_example_against_oracle():
    B = np.array([3.0, 2.0, 1.0])
    w = solve_weights_l1(B, 1.4)
    o = projected_gradient_weights(B, 1.4)
    assert abs(w @ B - o @ B) <= 1e-6 * abs(o @ B)
    # frozen from the independent oracle
    np.testing.assert_allclose(w, [0.88299987, 0.46666667, 0.05033347], atol=1e-8)
    assert w.sum() == pytest.approx(1.4, abs=1e-10)


def test_group_example_against_oracle(rng):
    B = rng.exponential(size=8)
    groups = GroupPartition([range(4), range(4, 8)])
    w = solve_weights_group(B, 2.0, groups)
    o = projected_gradient_weights(B, 2.0, groups.to_list())
    assert feasible(w, 2.0, groups.to_list())
    assert abs(w @ B - o @ B) <= 1e-6 * abs(o @ B)


def test_slack_constraint_gives_normalised_b():
    B = np.array([1.0, 1.0, 1.0])
    np.testing.assert_allclose(solve_weights_l1(B, 10.0), B / np.sqrt(3))


def test_l1_ties_at_the_floor():
    w = solve_weights_l1(np.array([2.0, 2.0, 1.0]), 1.0)
    np.testing.assert_allclose(w, [0.5, 0.5, 0.0])


def test_group_floor_picks_best_group():
    groups = GroupPartition([[0], [1, 2]])
    w = solve_weights_group(np.array([5.0, 1.0, 1.0]), 1.0, groups)
    np.testing.assert_allclose(w, [1.0, 0.0, 0.0])


def test_infeasible_s():
    with pytest.raises(ValueError, match="floor"):
        solve_weights_l1(np.ones(3), 0.5)
    groups = GroupPartition([[0, 1], [2, 3]])
    assert feasibility_floor(groups) == pytest.approx(np.sqrt(2))
    with pytest.raises(ValueError, match="floor"):
        solve_weights_group(np.ones(4), 1.2, groups)


def test_negative_bcss_entries_get_zero_weight():
    w = solve_weights_l1(np.array([-1.0, 2.0, 1.0]), 1.2)
    assert w[0] == 0.0


def test_all_nonpositive_bcss_warns_and_returns_uniform():
    with pytest.warns(DegenerateWeightsWarning):
        w = solve_weights_l1(np.array([0.0, -1.0]), 1.2)
    np.testing.assert_allclose(w, 2**-0.5)


def test_singleton_groups_reduce_to_l1(rng):
    for _ in range(20):
        p = int(rng.integers(2, 30))
        B = rng.exponential(size=p)
        s = float(rng.uniform(1.0, np.sqrt(p)))
        np.testing.assert_allclose(
            solve_weights_group(B, s, GroupPartition.singletons(p)), solve_weights_l1(B, s), atol=1e-8
        )


def test_group_norm_example():
    assert group_norm([1.0, 1.0, 1.0], GroupPartition([[0], [1, 2]])) == pytest.approx(3.0)


def test_multivariate_groups_example():
    # 1-based {1,3,5},{2,4,6}
    assert multivariate_groups(3, 2).to_list() == [[0, 2, 4], [1, 3, 5]]


def test_weights_cross_checked_with_conic_solver(rng):
    cp = pytest.importorskip("cvxpy")
    B = rng.exponential(size=10)
    groups = GroupPartition([range(3), range(3, 7), range(7, 10)])
    w = cp.Variable(10, nonneg=True)
    s = 2.5
    norm = sum(np.sqrt(g.size) * cp.norm(w[g], 2) for g in groups)
    prob = cp.Problem(cp.Maximize(B @ w), [cp.norm(w, 2) <= 1, norm <= s])
    prob.solve()
    ours = solve_weights_group(B, s, groups) @ B
    assert ours == pytest.approx(prob.value, rel=1e-6)
    prob = cp.Problem(cp.Maximize(B @ w), [cp.norm(w, 2) <= 1, cp.sum(w) <= s])
    prob.solve()
    assert solve_weights_l1(B, s) @ B == pytest.approx(prob.value, rel=1e-6)


# ---------------------------------------------------------------------------
# sparse K-means


def separable_fixture(rng, noise=0.0):
    n = 20
    X = np.zeros((n, 10))
    X[:, 0] = np.repeat([-3.0, 3.0], n // 2)
    X[:, 1:] = noise * rng.normal(size=(n, 9))
    return X, np.repeat([0, 1], n // 2)


def test_sparse_kmeans_concentrates_on_informative_feature(rng):
    X, truth = separable_fixture(rng)
    res = sparse_kmeans(X, 2, 1.1, seed=0)
    assert res.weights[0] > 0.95
    assert adjusted_rand_index(truth, res.labels) == 1.0


def test_sparse_kmeans_objective_never_decreases(rng):
    X = rng.normal(size=(40, 30))
    X[:20, :3] += 2.0
    for s in [1.2, 2.0, 4.0]:
        trace = np.array(sparse_kmeans(X, 3, s, seed=1, tol=0.0, max_iter=10).objective_trace)
        assert np.all(np.diff(trace) >= -1e-8 * np.abs(trace[:-1]))


def test_singleton_group_mode_reproduces_l1_mode(rng):
    X = rng.normal(size=(30, 12))
    X[:15, :2] += 2.5
    a = sparse_kmeans(X, 2, 1.7, seed=3)
    b = sparse_kmeans(X, 2, 1.7, groups=GroupPartition.singletons(12), seed=3)
    assert np.array_equal(a.labels, b.labels)
    np.testing.assert_allclose(a.objective_trace, b.objective_trace, rtol=1e-10)
    np.testing.assert_allclose(a.weights, b.weights, atol=1e-8)


def test_large_s_first_iteration_is_plain_kmeans(rng):
    X = rng.normal(size=(30, 6))
    res = sparse_kmeans(X, 3, 100.0, seed=4, max_iter=1)
    assert adjusted_rand_index(kmeans(X, 3, 10, seed=4), res.labels) == 1.0


def test_sparse_kmeans_errors(rng):
    X = rng.normal(size=(5, 4))
    with pytest.raises(ValueError, match="floor"):
        sparse_kmeans(X, 2, 0.9)
    with pytest.raises(ValueError, match="exceeds"):
        sparse_kmeans(X, 6, 1.5)


def test_refit_on_selected(rng):
    X, truth = separable_fixture(rng, noise=1.0)
    w = np.zeros(10)
    w[0] = 1.0
    assert adjusted_rand_index(truth, refit_on_selected(X, w, 0.5, 2, seed=0)) == 1.0
    with pytest.raises(ValueError, match="threshold"):
        refit_on_selected(X, w, 2.0, 2)


def test_estimator_api(rng):
    X, truth = separable_fixture(rng, noise=0.3)
    est = SparseKMeans(n_clusters=2, s=1.5, random_state=0)
    assert est.get_params()["s"] == 1.5
    labels = est.fit_predict(X)
    assert adjusted_rand_index(truth, labels) == 1.0
    assert np.array_equal(est.predict(X), est.labels_)
    assert est.result_.s == 1.5 and est.gap_profile_ is None


def test_estimator_accepts_feature_matrix_and_refit(rng):
    X, truth = separable_fixture(rng, noise=0.3)
    fm = FeatureMatrix(X, "raw")
    est = SparseKMeans(2, s=1.2, refit_threshold=0.1, random_state=0).fit(fm)
    assert adjusted_rand_index(truth, est.labels_) == 1.0
    assert est.result_.refit_labels is not None


def test_estimator_auto_s(rng):
    X, _ = separable_fixture(rng, noise=0.3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        est = SparseKMeans(2, s="auto", n_permutations=3, restarts=3, random_state=0).fit(X)
    assert est.gap_profile_ is not None
    assert est.s_ == est.gap_profile_.best_s
    with pytest.raises(ValueError):
        SparseKMeans(2, s="big").fit(X)
