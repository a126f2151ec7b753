import warnings

import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

from oracles import ari_binomial, ari_pair_counting
from wavesparse.cluster import sparse_kmeans
from wavesparse.selection import (
    TrivialPartitionWarning,
    adjusted_rand_index,
    contingency_table,
    default_grid,
    gap_select,
)
from wavesparse.signals import GroupPartition


def one_informative_feature(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(20, 10))
    X[:, 0] = np.repeat([-3.0, 3.0], 10) + 0.3 * rng.normal(size=20)
    return X


# ---------------------------------------------------------------------------
# ARI


def test_ari_hand_example():
    # every n_ij is 1, so the index term is 0; marginal terms 2 and 2 over C(4,2)=6
    assert adjusted_rand_index([1, 1, 2, 2], [1, 2, 1, 2]) == pytest.approx(-0.5, abs=1e-15)


def test_ari_identity_and_relabeling():
    t = [0, 0, 1, 1, 2]
    assert adjusted_rand_index(t, t) == 1.0
    assert adjusted_rand_index(t, [5, 5, 3, 3, 9]) == 1.0


def test_ari_matches_pair_counting(rng):
    for _ in range(50):
        n = int(rng.integers(2, 31))
        a = rng.integers(0, rng.integers(1, 6), n).tolist()
        b = rng.integers(0, rng.integers(1, 6), n).tolist()
        if ari_pair_counting(a, b) is None:
            continue
        ours = adjusted_rand_index(a, b)
        assert ours == pytest.approx(ari_pair_counting(a, b), rel=1e-12, abs=1e-12)
        assert ours == pytest.approx(ari_binomial(a, b), rel=1e-12, abs=1e-12)
        assert ours == pytest.approx(adjusted_rand_score(a, b), rel=1e-12, abs=1e-12)


def test_ari_trivial_partitions():
    with pytest.warns(TrivialPartitionWarning):
        assert adjusted_rand_index([0, 0, 0], [1, 1, 1]) == 1.0
    with pytest.warns(TrivialPartitionWarning):
        assert adjusted_rand_index([0], [0]) == 1.0


def test_ari_shape_mismatch():
    with pytest.raises(ValueError):
        adjusted_rand_index([0, 1], [0, 1, 1])


def test_contingency_table():
    table = contingency_table([0, 0, 1, 1], [1, 0, 0, 0])
    assert table.tolist() == [[1, 1], [2, 0]]


# ---------------------------------------------------------------------------
# gap statistic


def test_default_grid():
    g = default_grid(100)
    assert g[0] == 1.0 and g[-1] == pytest.approx(10.0) and g.size == 8
    groups = GroupPartition([range(4), range(4, 13)])
    g = default_grid(13, groups)
    assert g[0] == pytest.approx(2.0) and g[-1] == pytest.approx(5.0)


def test_gap_profile_matches_direct_evaluation():
    X = one_informative_feature(1)
    prof = gap_select(X, 2, n_permutations=4, seed=0)
    for s, obs in zip(prof.grid, prof.observed):
        assert obs == sparse_kmeans(X, 2, s, seed=0).objective_trace[-1]
    assert prof.best_s == prof.grid[np.argmax(prof.gap)]
    assert np.all(prof.gap <= prof.gap[prof.best_index])


def test_gap_picks_small_s_on_one_informative_feature():
    X = one_informative_feature(1)
    prof = gap_select(X, 2, n_permutations=20, seed=1)
    # permuting a single column keeps its marginal, so the gap at the floor is exactly 0
    assert prof.best_s == 1.0
    w = sparse_kmeans(X, 2, prof.best_s, seed=1).weights
    assert w[0] / w.sum() >= 0.9


@pytest.mark.parametrize("draw", [1, 2])
def test_gap_argmax_stable_in_permutation_count(draw):
    X = one_informative_feature(draw)
    few = gap_select(X, 2, n_permutations=2, seed=draw)
    many = gap_select(X, 2, n_permutations=20, seed=draw)
    assert few.best_s == many.best_s


def test_gap_independent_of_workers():
    X = one_informative_feature(2)
    a = gap_select(X, 2, n_permutations=3, seed=5, n_jobs=1)
    b = gap_select(X, 2, n_permutations=3, seed=5, n_jobs=2)
    assert a.to_dict() == b.to_dict()


def test_gap_flags_pure_noise():
    X = np.random.default_rng(9).normal(size=(30, 8))
    prof = gap_select(X, 3, n_permutations=10, seed=0)
    assert prof.no_structure


def test_gap_skips_infeasible_candidates():
    X = one_informative_feature(3)
    groups = GroupPartition([range(5), range(5, 10)])
    with pytest.warns(UserWarning, match="infeasible"):
        prof = gap_select(X, 2, groups, grid=[1.0, 2.5, 3.0], n_permutations=2, seed=0)
    assert prof.skipped == [1.0]
    assert prof.grid.tolist() == [2.5, 3.0]
    with pytest.raises(ValueError, match="floor"), warnings.catch_warnings():
        warnings.simplefilter("ignore")
        gap_select(X, 2, groups, grid=[1.0], n_permutations=2)


def test_gap_input_checks():
    X = one_informative_feature(3)
    with pytest.raises(ValueError):
        gap_select(X, 2, n_permutations=1)
    with pytest.raises(ValueError):
        gap_select(X, 2, grid=[2.0, 1.5])
