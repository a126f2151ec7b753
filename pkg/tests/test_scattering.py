import numpy as np
import pytest

from wavesparse.scattering import (
    ScatteringConfig,
    ScatteringConfigError,
    ScatteringTransformer,
    averaging_cutoff,
    build_filter_bank,
    enumerate_paths,
    log_frequency_input,
    lowpass_window,
    sample_times,
    scatter,
    scattering_groups,
)
from wavesparse.signals import ShapeError


def test_octave_count_by_enumeration():
    # a = 2: highest center 0.35 cycles/sample, halving down to the cutoff of a
    # Gaussian window with standard deviation 32 samples
    cutoff = 2.0 / (2.0 * np.pi * 32.0)
    expected = sum(1 for j in range(64) if 0.35 * 2.0**-j >= cutoff)
    bank = build_filter_bank(256, ScatteringConfig(layers=1, a=(2.0,), t_scat=32))
    assert expected == 6
    assert bank.xi[0].size == expected
    assert averaging_cutoff(bank.config) == pytest.approx(cutoff)


def test_filters_have_no_dc_and_bounded_littlewood_paley():
    bank = build_filter_bank(256, ScatteringConfig())
    for layer in (1, 2):
        assert np.abs(bank.psi_hat[layer - 1][:, 0]).max() < 1e-6
        lp = bank.littlewood_paley(layer)
        assert lp.size == 256
        assert lp.max() <= 1.0 + 0.05


def test_lowpass_unit_dc_gain():
    for window in ("gaussian", "boxcar"):
        cfg = ScatteringConfig(window=window)
        assert lowpass_window(256, cfg).sum() == pytest.approx(1.0)
        assert build_filter_bank(256, cfg).phi_hat[0] == pytest.approx(1.0)


def test_config_errors():
    with pytest.raises(ScatteringConfigError):
        ScatteringConfig(a=(1.0,))
    with pytest.raises(ScatteringConfigError):
        ScatteringConfig(layers=-1)
    with pytest.raises(ScatteringConfigError, match="no room"):
        build_filter_bank(64, ScatteringConfig(t_scat=2, phi_len=0.2))
    with pytest.raises(ShapeError):
        build_filter_bank(100, ScatteringConfig())
    assert ScatteringConfig(layers=3).a == (2**0.5, 2.0, 2.0)


def test_paths_are_frequency_decreasing():
    bank = build_filter_bank(256, ScatteringConfig())
    paths = enumerate_paths(bank)
    assert paths[0] == ()
    for p in paths:
        if len(p) == 2:
            assert bank.xi[1][p[1]] < bank.xi[0][p[0]]


def test_path_count_against_independent_enumeration():
    bank = build_filter_bank(256, ScatteringConfig())
    xi1, xi2 = bank.xi
    count = 1 + xi1.size + sum(1 for a in xi1 for b in xi2 if b < a)
    feats = scatter(np.random.default_rng(0).normal(size=256), bank)
    groups = scattering_groups(feats)
    assert len(groups) == count == len(feats.paths)
    m = int(np.ceil(2 * 256 / 32)) + 1
    assert set(groups.sizes.tolist()) == {m}
    assert feats.values.size == count * m


def test_sample_times():
    assert sample_times(256, 32).tolist() == [min(16 * k, 255) for k in range(17)]


def test_zero_and_constant_signals():
    bank = build_filter_bank(128, ScatteringConfig())
    assert not np.any(scatter(np.zeros(128), bank).values)
    feats = scatter(np.full(128, 3.0), bank)
    np.testing.assert_allclose(feats.block(()), 3.0, atol=1e-12)
    deeper = feats.values[feats.n_samples :]
    assert np.abs(deeper).max() < 1e-6


def test_m0_single_group():
    bank = build_filter_bank(64, ScatteringConfig(layers=0))
    feats = scatter(np.ones(64), bank)
    assert len(scattering_groups(feats)) == 1


def test_contraction_on_random_pairs(rng):
    bank = build_filter_bank(256, ScatteringConfig())
    for _ in range(100):
        x, y = rng.normal(size=(2, 256))
        d = np.linalg.norm(scatter(x, bank).values - scatter(y, bank).values)
        assert d <= 1.2 * np.linalg.norm(x - y)


def test_stack_matches_single(rng):
    bank = build_filter_bank(64, ScatteringConfig(t_scat=16))
    X = rng.normal(size=(3, 64))
    np.testing.assert_array_equal(scatter(X, bank).values[1], scatter(X[1], bank).values)


def test_shape_mismatch():
    bank = build_filter_bank(64, ScatteringConfig(t_scat=16))
    with pytest.raises(ShapeError):
        scatter(np.zeros(32), bank)


def test_transformer_pads_and_maps_columns(rng):
    X = rng.normal(size=(4, 30))
    tr = ScatteringTransformer().fit(X)
    fm = tr.to_feature_matrix(X)
    assert tr.bank_.length == 32
    assert fm.shape == (4, len(tr.paths_) * tr.times_.size)
    assert fm.column_map[0] == (0, (), 0)
    assert fm.groups == tr.groups_
    assert fm.transform_tag.startswith("scattering(M=2,a=(1.41421,2),t_scat=32")
    np.testing.assert_array_equal(tr.transform(X), fm.values)
    assert ScatteringTransformer(window="boxcar").get_params()["window"] == "boxcar"


def test_log_frequency_identity():
    f = np.geomspace(1.0, 100.0, 64)
    x = np.sin(np.log(f))
    np.testing.assert_allclose(log_frequency_input(x, f), x, atol=1e-12)


def test_log_frequency_keeps_monotone(rng):
    x = np.cumsum(rng.random(50))
    assert np.all(np.diff(log_frequency_input(x)) >= 0)


def test_log_frequency_scaling_becomes_shift():
    f = np.geomspace(1.0, 1024.0, 1024)
    spectrum = lambda freq: np.exp(-0.5 * ((np.log(freq) - np.log(30.0)) / 0.4) ** 2)  # noqa: E731
    # 8 octaves on 129 points: 16 samples per octave
    grid = dict(length=129, f_min=2.0, f_max=512.0)
    a = log_frequency_input(spectrum(f), f, **grid)
    b = log_frequency_input(spectrum(2.0 * f), f, **grid)
    np.testing.assert_allclose(b[: 129 - 16], a[16:], atol=1e-3)
    assert np.argmax(a) - np.argmax(b) == 16


def test_log_frequency_errors():
    with pytest.raises(ValueError):
        log_frequency_input(np.ones(4), [0.0, 1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        log_frequency_input(np.ones(3), [1.0, 3.0, 2.0])
