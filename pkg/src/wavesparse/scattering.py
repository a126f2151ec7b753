"""One-dimensional scattering transform with Morlet filter banks.

Layer 0 is the signal averaged by the lowpass ``phi``; layer ``l`` takes the
modulus of a bandpass filtering of the layer ``l-1`` envelope and averages it
again. Every scattering function is sampled on the half-overlapping grid
``t = k * t_scat / 2``. All convolutions are circular and done with the FFT.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_signals
from .dwt import pad_to_power_of_two
from .signals import FeatureMatrix, GroupPartition, ShapeError


class ScatteringConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScatteringConfig:
    """Network layout.

    ``a`` holds the per-layer frequency resolution (filters per octave is
    ``1 / log2(a)``); if it is shorter than ``layers`` the last entry is
    reused. ``phi_len`` is the averaging scale in samples (defaults to
    ``t_scat``). With ``window="gaussian"`` it is the standard deviation of
    the Gaussian-weighted moving average; with ``window="boxcar"`` it is the
    length of a plain moving average.
    """

    layers: int = 2
    a: tuple = (2**0.5, 2.0)
    t_scat: int = 32
    phi_len: float | None = None
    window: str = "gaussian"

    def __post_init__(self):
        if int(self.layers) != self.layers or self.layers < 0:
            raise ScatteringConfigError("layers must be a nonnegative integer")
        a = tuple(float(v) for v in np.atleast_1d(self.a))
        if self.layers and not a:
            raise ScatteringConfigError("need a frequency resolution per layer")
        if any(v <= 1.0 for v in a):
            raise ScatteringConfigError(f"frequency resolutions must exceed 1, got {a}")
        if a and len(a) < self.layers:
            a = a + (a[-1],) * (self.layers - len(a))
        object.__setattr__(self, "a", a[: self.layers] if self.layers else a[:0])
        if int(self.t_scat) != self.t_scat or self.t_scat < 1:
            raise ScatteringConfigError("t_scat must be a positive integer")
        if self.phi_len is None:
            object.__setattr__(self, "phi_len", float(self.t_scat))
        if self.phi_len <= 0:
            raise ScatteringConfigError("phi_len must be positive")
        if self.window not in ("gaussian", "boxcar"):
            raise ScatteringConfigError(f"unknown averaging window {self.window!r}")

    def to_dict(self):
        return {
            "layers": self.layers,
            "a": list(self.a),
            "t_scat": self.t_scat,
            "phi_len": self.phi_len,
            "window": self.window,
        }


def _xi_max(a):
    return max(1.0 / (1.0 + a**3), 0.35)


def _bandwidth(xi, a):
    # neighbouring filters cross at half power
    return xi * (a - 1.0) / (a + 1.0) / np.sqrt(np.log(2.0))


def lowpass_window(T, config):
    """Time-domain averaging window of length ``T`` (circular, unit sum, centred at 0)."""
    t = np.arange(T)
    t = np.minimum(t, T - t).astype(float)  # circular distance to 0
    if config.window == "gaussian":
        h = np.exp(-0.5 * (t / config.phi_len) ** 2)
    else:
        L = int(round(config.phi_len))
        if L < 1 or L > T:
            raise ScatteringConfigError(f"boxcar length {L} must lie in [1, {T}]")
        h = np.zeros(T)
        idx = (np.arange(L) - (L - 1) // 2) % T
        h[idx] = 1.0
    return h / h.sum()


def averaging_cutoff(config):
    """Frequency (cycles/sample) below which content is left to ``phi``.

    Twice the frequency-domain standard deviation of the averaging window.
    """
    if config.window == "gaussian":
        sd = config.phi_len
    else:
        sd = config.phi_len / np.sqrt(12.0)
    return 2.0 / (2.0 * np.pi * sd)


def center_frequencies(a, cutoff):
    """Geometric ladder ``xi_max * a**-j`` down to ``cutoff`` (inclusive)."""
    xis = []
    xi = _xi_max(a)
    while xi >= cutoff:
        xis.append(xi)
        xi /= a
    return np.array(xis)


def morlet_hat(omega, xi, sigma):
    """Frequency response of a Morlet wavelet with the zero-mean correction."""
    kappa = np.exp(-(xi**2) / (2 * sigma**2))
    return np.exp(-((omega - xi) ** 2) / (2 * sigma**2)) - kappa * np.exp(-(omega**2) / (2 * sigma**2))


@dataclass(frozen=True)
class MorletFilterBank:
    """Frequency responses on the ``np.fft.fftfreq(T)`` grid."""

    length: int
    config: ScatteringConfig
    phi_hat: np.ndarray
    psi_hat: tuple  # per layer: (n_filters, T) real arrays
    xi: tuple  # per layer: center frequencies, decreasing
    sigma: tuple

    def littlewood_paley(self, layer=1):
        """``|phi_hat|**2 + sum_j |psi_hat_j|**2`` at every frequency bin."""
        return np.abs(self.phi_hat) ** 2 + (np.abs(self.psi_hat[layer - 1]) ** 2).sum(axis=0)


def build_filter_bank(T, config=None):
    config = config or ScatteringConfig()
    T = int(T)
    if T < 2 or T & (T - 1):
        raise ShapeError(f"filter bank length {T} is not a power of two")
    if config.t_scat > 2 * T:
        raise ScatteringConfigError(f"t_scat={config.t_scat} exceeds twice the length {T}")
    omega = np.fft.fftfreq(T)
    phi_hat = np.fft.fft(lowpass_window(T, config)).real
    cutoff = averaging_cutoff(config)
    psis, xis, sigmas = [], [], []
    for layer, a in enumerate(config.a, start=1):
        xi = center_frequencies(a, cutoff)
        if xi.size == 0:
            raise ScatteringConfigError(
                f"layer {layer}: averaging cutoff {cutoff:.3g} leaves no room for bandpass "
                f"filters below Nyquist; use a longer phi_len"
            )
        sig = _bandwidth(xi, a)
        bank = np.stack([morlet_hat(omega, x, s) for x, s in zip(xi, sig)])
        bank /= np.sqrt((bank**2).sum(axis=0).max())
        bank[:, 0] = 0.0
        psis.append(bank)
        xis.append(xi)
        sigmas.append(sig)
    return MorletFilterBank(T, config, phi_hat, tuple(psis), tuple(xis), tuple(sigmas))


def enumerate_paths(bank):
    """Scale paths in output order; deeper layers keep decreasing frequencies."""
    paths = [()]
    frontier = [()]
    for layer in range(1, bank.config.layers + 1):
        xi = bank.xi[layer - 1]
        nxt = []
        for path in frontier:
            for j in range(xi.size):
                if path and not xi[j] < bank.xi[layer - 2][path[-1]]:
                    continue
                nxt.append(path + (j,))
        paths.extend(nxt)
        frontier = nxt
    return paths


def sample_times(T, t_scat):
    """``k * t_scat / 2`` for ``k = 0..ceil(2T / t_scat)``, clamped to the signal."""
    k = np.arange(int(np.ceil(2 * T / t_scat)) + 1)
    return np.minimum((k * t_scat) // 2, T - 1)


@dataclass
class ScatteringFeatures:
    values: np.ndarray  # (n, n_paths * n_samples)
    paths: list
    times: np.ndarray
    config: ScatteringConfig
    column_map: list = field(default_factory=list)

    @property
    def n_samples(self):
        return self.times.size

    def block(self, path):
        i = self.paths.index(tuple(path))
        m = self.n_samples
        return self.values[..., i * m : (i + 1) * m]

    def to_feature_matrix(self):
        return FeatureMatrix(
            self.values,
            transform_tag=f"scattering({_tag(self.config)})",
            groups=scattering_groups(self),
            column_map=self.column_map,
        )


def _tag(config):
    a = ",".join(f"{v:.6g}" for v in config.a)
    return f"M={config.layers},a=({a}),t_scat={config.t_scat},phi_len={config.phi_len:g},window={config.window}"


def scatter(x, bank, config=None):
    """Scattering coefficients of one signal ``(T,)`` or a stack ``(n, T)``."""
    config = config or bank.config
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.shape[-1] != bank.length:
        raise ShapeError(f"signal length {X.shape[-1]} does not match filter bank length {bank.length}")
    times = sample_times(bank.length, config.t_scat)
    paths = enumerate_paths(bank)

    def average(U_hat):
        return np.fft.ifft(U_hat * bank.phi_hat, axis=-1).real[..., times]

    blocks = {(): average(np.fft.fft(X, axis=-1))}
    envelopes = {(): np.fft.fft(X, axis=-1)}
    for layer in range(1, config.layers + 1):
        psi = bank.psi_hat[layer - 1]
        for path in [p for p in paths if len(p) == layer]:
            U = np.abs(np.fft.ifft(envelopes[path[:-1]] * psi[path[-1]], axis=-1))
            U_hat = np.fft.fft(U, axis=-1)
            blocks[path] = average(U_hat)
            if layer < config.layers:
                envelopes[path] = U_hat
        for path in [p for p in paths if len(p) == layer - 1]:
            envelopes.pop(path, None)
    values = np.concatenate([blocks[p] for p in paths], axis=-1)
    column_map = [(len(p), p, int(k)) for p in paths for k in range(times.size)]
    feats = ScatteringFeatures(values[0] if single else values, paths, times, config, column_map)
    return feats


def scattering_groups(features):
    """One group per scattering path, holding that path's samples."""
    m = features.n_samples
    return GroupPartition(
        [range(i * m, (i + 1) * m) for i in range(len(features.paths))],
        n_features=m * len(features.paths),
    )


def log_frequency_input(x, freqs=None, length=None, f_min=None, f_max=None):
    """Resample a spectrum-like vector onto a uniform log-frequency grid.

    ``freqs`` are the (positive, increasing) frequencies of the samples of
    ``x``; they default to ``1..len(x)``. The output has ``length`` samples
    (default: the next power of two) spaced uniformly in ``log f`` between
    ``f_min`` and ``f_max`` (default: the range of ``freqs``), by linear
    interpolation in ``log f``. Scaling all frequencies by a constant becomes
    a shift of the output.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ShapeError("expected a single spectrum")
    freqs = np.arange(1, x.size + 1, dtype=float) if freqs is None else np.asarray(freqs, dtype=float)
    if freqs.shape != x.shape:
        raise ShapeError("freqs and x differ in length")
    f_min = freqs[0] if f_min is None else float(f_min)
    f_max = freqs[-1] if f_max is None else float(f_max)
    if freqs.min() <= 0 or f_min <= 0 or f_max <= 0:
        raise ValueError("log-frequency resampling needs positive frequencies")
    if np.any(np.diff(freqs) <= 0):
        raise ValueError("freqs must be strictly increasing")
    if f_max <= f_min:
        raise ValueError("f_max must exceed f_min")
    if length is None:
        length = 1 << max(1, (x.size - 1).bit_length())
    grid = np.linspace(np.log(f_min), np.log(f_max), int(length))
    return np.interp(grid, np.log(freqs), x)


class ScatteringTransformer(TransformerMixin, BaseEstimator):
    """Scattering coefficients as a flat feature vector per instance.

    Signals whose length is not a power of two are zero-padded
    symmetrically.

    Attributes
    ----------
    bank_ : MorletFilterBank
    paths_ : list of tuple
    groups_ : GroupPartition, one group per path
    column_map_ : list of ``(layer, path, sample_index)``
    """

    def __init__(self, layers=2, a=(2**0.5, 2.0), t_scat=32, phi_len=None, window="gaussian"):
        self.layers = layers
        self.a = a
        self.t_scat = t_scat
        self.phi_len = phi_len
        self.window = window

    def _config(self):
        return ScatteringConfig(self.layers, tuple(np.atleast_1d(self.a)), self.t_scat, self.phi_len, self.window)

    def fit(self, X, y=None):
        X = check_signals(X)
        if X.ndim != 2:
            raise ShapeError("scattering expects univariate signals (n, T)")
        self.config_ = self._config()
        self.input_length_ = X.shape[1]
        T = 1 << max(1, (X.shape[1] - 1).bit_length())
        self.bank_ = build_filter_bank(T, self.config_)
        self.paths_ = enumerate_paths(self.bank_)
        self.times_ = sample_times(T, self.config_.t_scat)
        m = self.times_.size
        self.groups_ = GroupPartition(
            [range(i * m, (i + 1) * m) for i in range(len(self.paths_))], n_features=m * len(self.paths_)
        )
        self.column_map_ = [(len(p), p, k) for p in self.paths_ for k in range(m)]
        return self

    def scatter(self, X):
        X = check_signals(X)
        if X.shape[1] != self.input_length_:
            raise ShapeError(f"fitted on length {self.input_length_}, got {X.shape[1]}")
        if X.shape[1] != self.bank_.length:
            X = pad_to_power_of_two(X)
        return scatter(X, self.bank_, self.config_)

    def transform(self, X):
        return self.scatter(X).values

    def to_feature_matrix(self, X):
        return self.scatter(X).to_feature_matrix()
