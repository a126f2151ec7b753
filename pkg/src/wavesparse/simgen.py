"""Synthetic clustering benchmarks built from the Donoho-Johnstone test curves.

Random numbers come from numpy's ``PCG64`` bit generator seeded through
``SeedSequence``; Gaussian draws use ``Generator.standard_normal``. Numpy
keeps these streams stable across platforms, so a seed pins the data set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dwt import pad_signal
from .signals import Dataset

KINDS = ("flat", "heavisine", "blocks", "bumps", "doppler", "piecewise_poly")

_KNOTS = np.array([0.10, 0.13, 0.15, 0.23, 0.25, 0.40, 0.44, 0.65, 0.76, 0.78, 0.81])
_BLOCK_HEIGHTS = np.array([4.0, -5.0, 3.0, -4.0, 5.0, -4.2, 2.1, 4.3, -3.1, 2.1, -4.2])
_BUMP_HEIGHTS = np.array([4.0, 5.0, 3.0, 4.0, 5.0, 4.2, 2.1, 4.3, 3.1, 5.1, 4.2])
_BUMP_WIDTHS = np.array([0.005, 0.005, 0.006, 0.01, 0.01, 0.03, 0.01, 0.01, 0.005, 0.008, 0.005])

# rows are variables, one tuple per cluster; a Latin square, so any two
# clusters differ in every variable and their differences line up in time
MULTIVARIATE_CENTERS = (
    ("blocks", "bumps", "heavisine"),
    ("bumps", "heavisine", "doppler"),
    ("heavisine", "doppler", "piecewise_poly"),
    ("doppler", "piecewise_poly", "blocks"),
    ("piecewise_poly", "blocks", "bumps"),
)


def grid(length):
    """Uniform grid ``i / length`` for ``i = 1..length`` on (0, 1]."""
    return np.arange(1, length + 1) / length


def raw_curve(kind, t):
    """The unnormalised test function evaluated at ``t``."""
    t = np.asarray(t, dtype=float)
    if kind == "flat":
        return np.zeros_like(t)
    if kind == "heavisine":
        return 4.0 * np.sin(4.0 * np.pi * t) - np.sign(t - 0.3) - np.sign(0.72 - t)
    if kind == "blocks":
        # right-continuous steps: the jump lands on the sample at the knot
        return (_BLOCK_HEIGHTS * np.heaviside(t[:, None] - _KNOTS, 1.0)).sum(axis=1)
    if kind == "bumps":
        u = np.abs((t[:, None] - _KNOTS) / _BUMP_WIDTHS)
        return (_BUMP_HEIGHTS * (1.0 + u) ** -4).sum(axis=1)
    if kind == "doppler":
        return np.sqrt(t * (1.0 - t)) * np.sin(2.0 * np.pi * 1.05 / (t + 0.05))
    if kind == "piecewise_poly":
        return np.piecewise(
            t,
            [t < 0.5, (t >= 0.5) & (t < 0.75), t >= 0.75],
            [
                lambda u: 4.0 * u**2 * (3.0 - 4.0 * u),
                lambda u: 4.0 / 3.0 * u * (4.0 * u**2 - 10.0 * u + 7.0) - 1.5,
                lambda u: 16.0 / 3.0 * u * (u - 1.0) ** 2,
            ],
        )
    raise ValueError(f"unknown curve kind {kind!r}; choose from {KINDS}")


def donoho_curve(kind, length, scale=1.0):
    """Test curve on ``length`` grid points, rescaled to sample std ``scale``.

    The flat curve stays identically zero.
    """
    if length < 8:
        raise ValueError("curve length must be at least 8")
    y = raw_curve(kind, grid(length))
    sd = y.std()
    if sd > 0:
        y = y / sd * scale
    return y


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    ``scale`` is the sample standard deviation each non-flat curve is given
    over its unpadded grid. It defaults to 1 for univariate curves and to
    ``1 / sqrt(G)`` for the rows of a multivariate center, so one instance
    carries the same signal energy per base sample in both benchmarks.
    """

    bench: str = "univariate"
    sigma: float = 2.5
    n_per_cluster: int = 30
    base_length: int | None = None
    pad: int | None = None
    scale: float | None = None
    seed: int | None = 0

    def __post_init__(self):
        if self.bench not in ("univariate", "multivariate"):
            raise ValueError(f"unknown bench {self.bench!r}")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.n_per_cluster < 1:
            raise ValueError("n_per_cluster must be positive")
        defaults = {"univariate": (256, 128), "multivariate": (128, 64)}[self.bench]
        if self.base_length is None:
            object.__setattr__(self, "base_length", defaults[0])
        if self.pad is None:
            object.__setattr__(self, "pad", defaults[1])
        if self.scale is None:
            G = 1 if self.bench == "univariate" else len(MULTIVARIATE_CENTERS[0])
            object.__setattr__(self, "scale", 1.0 / np.sqrt(G))
        total = self.base_length + 2 * self.pad
        if total & (total - 1):
            raise ValueError(f"padded length {total} is not a power of two")

    @property
    def length(self):
        return self.base_length + 2 * self.pad

    @property
    def n_clusters(self):
        return len(KINDS) if self.bench == "univariate" else len(MULTIVARIATE_CENTERS)

    def to_dict(self):
        return {
            "bench": self.bench,
            "sigma": self.sigma,
            "n_per_cluster": self.n_per_cluster,
            "base_length": self.base_length,
            "pad": self.pad,
            "scale": self.scale,
            "seed": self.seed,
        }


def univariate_centers(config):
    """Six padded centers, one per curve kind, shape ``(6, T)``."""
    return np.stack(
        [
            pad_signal(donoho_curve(k, config.base_length, config.scale), config.pad, config.pad)
            for k in KINDS
        ]
    )


def multivariate_centers(config):
    """Five padded ``(G=3, T)`` centers from ``MULTIVARIATE_CENTERS``."""
    return np.stack(
        [
            np.stack(
                [
                    pad_signal(donoho_curve(k, config.base_length, config.scale), config.pad, config.pad)
                    for k in row
                ]
            )
            for row in MULTIVARIATE_CENTERS
        ]
    )


def _assemble(centers, config):
    K = centers.shape[0]
    labels = np.repeat(np.arange(K), config.n_per_cluster)
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    noise = rng.standard_normal((labels.size,) + centers.shape[1:])
    return Dataset(centers[labels] + config.sigma * noise, labels)


def make_univariate_benchmark(config=None, **kw):
    config = config or SimConfig(bench="univariate", **kw)
    return _assemble(univariate_centers(config), config)


def make_multivariate_benchmark(config=None, **kw):
    config = config or SimConfig(bench="multivariate", **kw)
    return _assemble(multivariate_centers(config), config)


def make_benchmark(config):
    if config.bench == "univariate":
        return make_univariate_benchmark(config)
    return make_multivariate_benchmark(config)
