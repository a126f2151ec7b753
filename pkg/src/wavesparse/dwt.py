"""Orthogonal discrete wavelet transform with periodic boundaries.

Coefficients are stored coarsest first: ``[c0, d_0, d_1 (2), d_2 (4), ...]``
where ``d_j`` holds the ``2**j`` detail coefficients of scale ``j``. With
periodic convolution the transform matrix is exactly orthogonal for every
power-of-two length, including lengths shorter than the filter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_signals
from .cluster import multivariate_groups
from .signals import FeatureMatrix, GroupPartition, ShapeError, flatten_multivariate

# Least-asymmetric Daubechies, 8 vanishing moments (16 taps), analysis lowpass.
SYM8_LOWPASS = (
    -0.0033824159510061256,
    -0.0005421323317911481,
    0.03169508781149298,
    0.007607487324917605,
    -0.1432942383508097,
    -0.061273359067658524,
    0.4813596512583722,
    0.7771857517005235,
    0.3644418948353314,
    -0.05194583810770904,
    -0.027219029917056003,
    0.049137179673607506,
    0.003808752013890615,
    -0.01495225833704823,
    -0.0003029205147213668,
    0.0018899503327594609,
)

HAAR_LOWPASS = (2**-0.5, 2**-0.5)


@dataclass(frozen=True)
class WaveletFilter:
    """Orthonormal two-channel filter bank; highpass is the quadrature mirror."""

    name: str
    lowpass: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.lowpass, dtype=float).copy()
        if h.size % 2:
            raise ValueError("orthogonal filters have even length")
        if abs(h @ h - 1.0) > 1e-12:
            raise ValueError(f"{self.name}: lowpass taps are not unit norm")
        for k in range(1, h.size // 2):
            if abs(h[: -2 * k] @ h[2 * k :]) > 1e-12:
                raise ValueError(f"{self.name}: lowpass is not orthogonal to its shift by {2 * k}")
        h.flags.writeable = False
        object.__setattr__(self, "lowpass", h)

    @property
    def highpass(self):
        h = self.lowpass
        L = h.size
        return np.array([(-1) ** n * h[L - 1 - n] for n in range(L)])

    def __len__(self):
        return self.lowpass.size


_FILTERS = {
    "haar": WaveletFilter("haar", HAAR_LOWPASS),
    "sym8": WaveletFilter("sym8", SYM8_LOWPASS),
}


def get_filter(name):
    if isinstance(name, WaveletFilter):
        return name
    try:
        return _FILTERS[str(name).lower()]
    except KeyError:
        raise ValueError(f"unknown wavelet {name!r}; choose from {sorted(_FILTERS)}") from None


def _log2_length(T):
    T = int(T)
    J = T.bit_length() - 1
    if T < 2 or (1 << J) != T:
        nxt = 1 << max(1, (T - 1).bit_length())
        raise ShapeError(
            f"length {T} is not a power of two >= 2; pad with {nxt - T} samples "
            f"(e.g. pad_signal) to reach {nxt}"
        )
    return J


def _analysis_step(a, h, g):
    # a: (..., N) -> approximation and detail, each (..., N/2)
    N = a.shape[-1]
    idx = (2 * np.arange(N // 2)[:, None] + np.arange(h.size)[None, :]) % N
    blocks = a[..., idx]
    return blocks @ h, blocks @ g


def _synthesis_step(approx, detail, h, g):
    M = approx.shape[-1]
    N = 2 * M
    out = np.zeros(approx.shape[:-1] + (N,))
    k = np.arange(M)
    for n in range(h.size):
        pos = (2 * k + n) % N
        # pos has no repeats for fixed n, so fancy-index accumulation is safe
        out[..., pos] += h[n] * approx + g[n] * detail
    return out


def dwt_forward(x, wavelet="sym8"):
    """Full-depth periodic DWT along the last axis.

    Works on a single signal or any stack of signals. The constant signal
    ``[1, 1, 1, 1]`` under Haar gives ``[2, 0, 0, 0]``.
    """
    f = get_filter(wavelet)
    x = np.asarray(x, dtype=float)
    J = _log2_length(x.shape[-1])
    h, g = f.lowpass, f.highpass
    details = []
    a = x
    for _ in range(J):
        a, d = _analysis_step(a, h, g)
        details.append(d)
    return np.concatenate([a] + details[::-1], axis=-1)


def dwt_inverse(v, wavelet="sym8"):
    f = get_filter(wavelet)
    v = np.asarray(v, dtype=float)
    J = _log2_length(v.shape[-1])
    h, g = f.lowpass, f.highpass
    a = v[..., :1]
    for j in range(J):
        d = v[..., 2**j : 2 ** (j + 1)]
        a = _synthesis_step(a, d, h, g)
    return a


def soft_threshold(v, lam):
    """Elementwise ``sign(v) * max(|v| - lam, 0)``."""
    if lam < 0:
        raise ValueError(f"threshold must be nonnegative, got {lam}")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - lam, 0.0)


def denoise(x, wavelet="sym8", lam=0.0):
    """Shrink detail coefficients and invert; the scaling coefficient is kept."""
    v = dwt_forward(x, wavelet)
    shrunk = soft_threshold(v, lam)
    shrunk[..., 0] = v[..., 0]
    return dwt_inverse(shrunk, wavelet)


def pad_signal(x, left, right, mode="zero"):
    if mode != "zero":
        raise ValueError(f"unsupported padding mode {mode!r}")
    if left < 0 or right < 0:
        raise ValueError("padding counts must be nonnegative")
    x = np.asarray(x, dtype=float)
    widths = [(0, 0)] * (x.ndim - 1) + [(int(left), int(right))]
    return np.pad(x, widths)


def pad_to_power_of_two(x):
    """Zero-pad symmetrically (extra sample on the right) to the next power of two."""
    x = np.asarray(x, dtype=float)
    T = x.shape[-1]
    target = 1 << max(1, (T - 1).bit_length())
    extra = target - T
    return pad_signal(x, extra // 2, extra - extra // 2)


def wavelet_scale_groups(T):
    """Partition ``[c0 | d_0 | d_1 | ...]``: sizes ``[1, 1, 2, 4, ..., T/2]``."""
    J = _log2_length(T)
    groups = [[0]] + [list(range(2**j, 2 ** (j + 1))) for j in range(J)]
    return GroupPartition(groups, n_features=T)


def scale_of_coefficient(T):
    """Scale index per coefficient; ``-1`` marks the scaling coefficient."""
    J = _log2_length(T)
    out = np.empty(T, dtype=int)
    out[0] = -1
    for j in range(J):
        out[2**j : 2 ** (j + 1)] = j
    return out


class DWTTransformer(TransformerMixin, BaseEstimator):
    """Map signals to their wavelet coefficients.

    Accepts ``(n, T)`` univariate or ``(n, G, T)`` multivariate arrays. For
    multivariate input each row is transformed and the rows are concatenated
    (variable-major), so column ``g * T + k`` is coefficient ``k`` of variable
    ``g``.

    Parameters
    ----------
    wavelet : {"sym8", "haar"}
    pad : bool
        Zero-pad non-power-of-two signals instead of raising.

    Attributes
    ----------
    groups_ : GroupPartition
        Wavelet-scale groups (univariate) or vertical time-frequency slices
        across variables (multivariate).
    """

    def __init__(self, wavelet="sym8", pad=False):
        self.wavelet = wavelet
        self.pad = pad

    def fit(self, X, y=None):
        X = check_signals(X)
        get_filter(self.wavelet)
        T = X.shape[-1]
        if self.pad:
            T = 1 << max(1, (T - 1).bit_length())
        _log2_length(T)
        self.n_variables_ = X.shape[1] if X.ndim == 3 else 1
        self.length_ = T
        self.n_features_out_ = self.n_variables_ * T
        if X.ndim == 3:
            self.groups_ = multivariate_groups(self.n_variables_, T)
        else:
            self.groups_ = wavelet_scale_groups(T)
        return self

    def transform(self, X):
        X = check_signals(X)
        if X.ndim == 3 and X.shape[1] != self.n_variables_:
            raise ShapeError(f"fitted on G={self.n_variables_} variables, got {X.shape[1]}")
        if self.pad and X.shape[-1] != self.length_:
            X = pad_to_power_of_two(X)
        if X.shape[-1] != self.length_:
            raise ShapeError(f"fitted on length {self.length_}, got {X.shape[-1]}")
        V = dwt_forward(X, self.wavelet)
        return flatten_multivariate(V) if V.ndim == 3 else V

    def inverse_transform(self, V):
        V = np.asarray(V, dtype=float)
        if self.n_variables_ > 1:
            V = V.reshape(V.shape[0], self.n_variables_, self.length_)
        return dwt_inverse(V, self.wavelet)

    def to_feature_matrix(self, X):
        return FeatureMatrix(
            self.transform(X), transform_tag=f"dwt({self.wavelet})", groups=self.groups_
        )
