"""Simulation benchmark harness: simulate, transform, cluster and score in a grid.

A cell is one ``(method, n_per_cluster, replicate)`` run. The data for a
given ``(n_per_cluster, replicate)`` is shared by every method, and every
random stream is derived from ``(seed, n_per_cluster, replicate)``, so cells
can run in any order on any number of workers.
"""

from __future__ import annotations

import csv
import io
import logging
import traceback
from dataclasses import asdict, dataclass, field

import numpy as np
from joblib import Parallel, delayed

from .cluster import derive_seed, kmeans, sparse_kmeans
from .dwt import DWTTransformer
from .selection import adjusted_rand_index, gap_select
from .simgen import SimConfig, make_benchmark

logger = logging.getLogger(__name__)

METHODS = ("kmeans", "sparse", "group-sparse", "sparse-raw")


@dataclass(frozen=True)
class BenchConfig:
    """Grid and solver settings for :func:`run_bench`.

    ``kmeans`` runs on the raw signals with ``kmeans_restarts`` starts;
    ``sparse`` and ``group-sparse`` run on DWT coefficients with ``s`` chosen
    by the gap statistic (``group-sparse`` uses wavelet-scale groups for the
    univariate bench and time slices across variables for the multivariate
    one); ``sparse-raw`` is sparse K-means on the raw signals.
    """

    bench: str = "univariate"
    methods: tuple = ("kmeans", "sparse", "group-sparse")
    n_grid: tuple = (5, 10, 20, 30)
    sigma: float = 2.75
    replicates: int = 20
    seed: int = 0
    wavelet: str = "sym8"
    restarts: int = 10
    kmeans_restarts: int = 100
    n_permutations: int = 10
    max_iter: int = 15
    scale: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown bench method(s) {unknown}; choose from {list(METHODS)}")
        if not self.methods:
            raise ValueError("no methods given")
        if not self.n_grid or min(self.n_grid) < 1:
            raise ValueError("n grid must hold positive integers")
        if self.replicates < 1:
            raise ValueError("replicates must be positive")
        SimConfig(bench=self.bench, sigma=self.sigma, scale=self.scale)

    def to_dict(self):
        d = asdict(self)
        d["methods"] = list(self.methods)
        d["n_grid"] = list(self.n_grid)
        return d


@dataclass
class CellResult:
    method: str
    n_per_cluster: int
    replicate: int
    ari: float | None = None
    s: float | None = None
    n_iter: int | None = None
    max_decrease: float | None = None
    error: str | None = None

    @property
    def ok(self):
        return self.error is None


@dataclass
class BenchReport:
    config: BenchConfig
    cells: list = field(default_factory=list)

    @property
    def failed(self):
        return [c for c in self.cells if not c.ok]

    def summary(self):
        """One row per ``(method, n)``: mean and sd of ARI over successful replicates."""
        rows = []
        for m in self.config.methods:
            for n in self.config.n_grid:
                cell = [c for c in self.cells if c.method == m and c.n_per_cluster == n]
                vals = np.array([c.ari for c in cell if c.ok], dtype=float)
                rows.append(
                    {
                        "method": m,
                        "n_per_cluster": n,
                        "mean_ari": float(vals.mean()) if vals.size else None,
                        "sd_ari": float(vals.std(ddof=1)) if vals.size > 1 else None,
                        "n_ok": int(vals.size),
                        "n_failed": len(cell) - int(vals.size),
                    }
                )
        return rows

    def max_decrease(self):
        vals = [c.max_decrease for c in self.cells if c.max_decrease is not None]
        return max(vals) if vals else 0.0

    def to_dict(self):
        return {
            "config": self.config.to_dict(),
            "cells": [asdict(c) for c in self.cells],
            "summary": self.summary(),
            "max_objective_decrease": self.max_decrease(),
        }

    def summary_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "n_per_cluster", "mean_ari", "sd_ari", "n_ok", "n_failed"])
        for r in self.summary():
            w.writerow(
                [r["method"], r["n_per_cluster"], _fmt(r["mean_ari"]), _fmt(r["sd_ari"]), r["n_ok"], r["n_failed"]]
            )
        return buf.getvalue()

    def cells_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "n_per_cluster", "replicate", "ari", "s", "n_iter", "max_decrease", "error"])
        for c in self.cells:
            w.writerow(
                [c.method, c.n_per_cluster, c.replicate, _fmt(c.ari), _fmt(c.s), _fmt(c.n_iter),
                 _fmt(c.max_decrease), c.error or ""]
            )
        return buf.getvalue()

    def summary_text(self):
        cfg = self.config
        lines = [
            f"{cfg.bench} bench, sigma={cfg.sigma}, {cfg.replicates} replicates, seed={cfg.seed}",
            "",
            "mean ARI by n per cluster",
        ]
        head = f"{'method':<14}" + "".join(f"{n:>10d}" for n in cfg.n_grid)
        lines += [head, "-" * len(head)]
        table = {(r["method"], r["n_per_cluster"]): r["mean_ari"] for r in self.summary()}
        for m in cfg.methods:
            vals = [table[(m, n)] for n in cfg.n_grid]
            lines.append(f"{m:<14}" + "".join(f"{v:>10.4f}" if v is not None else f"{'n/a':>10}" for v in vals))
        lines.append("")
        lines.append(f"largest relative objective decrease: {self.max_decrease():.3e}")
        if self.failed:
            lines.append(f"{len(self.failed)} cell(s) failed:")
            lines += [f"  {c.method} n={c.n_per_cluster} rep={c.replicate}: {c.error}" for c in self.failed]
        return "\n".join(lines) + "\n"


def _fmt(v):
    if v is None:
        return ""
    return repr(float(v)) if isinstance(v, float) else str(v)


def _max_decrease(trace):
    t = np.asarray(trace, dtype=float)
    if t.size < 2:
        return 0.0
    drops = (t[:-1] - t[1:]) / np.maximum(1.0, np.abs(t[:-1]))
    return float(max(0.0, drops.max()))


def _run_replicate(config, n_per, rep):
    sim = SimConfig(
        bench=config.bench,
        sigma=config.sigma,
        n_per_cluster=n_per,
        scale=config.scale,
        seed=derive_seed(config.seed, 0, n_per, rep),
    )
    data = make_benchmark(sim)
    truth = data.labels
    K = sim.n_clusters
    seed = derive_seed(config.seed, 1, n_per, rep)
    raw = data.instances.reshape(data.n, -1)
    coeffs = groups = None
    if {"sparse", "group-sparse"} & set(config.methods):
        tr = DWTTransformer(config.wavelet).fit(data.instances)
        coeffs, groups = tr.transform(data.instances), tr.groups_

    out = []
    for method in config.methods:
        cell = CellResult(method, n_per, rep)
        try:
            if method == "kmeans":
                pred = kmeans(raw, K, config.kmeans_restarts, seed)
            else:
                X = raw if method == "sparse-raw" else coeffs
                g = groups if method == "group-sparse" else None
                profile = gap_select(
                    X, K, g, n_permutations=config.n_permutations, restarts=config.restarts,
                    max_iter=config.max_iter, seed=seed, n_jobs=1,
                )
                res = sparse_kmeans(X, K, profile.best_s, g, config.restarts, config.max_iter, seed)
                pred = res.labels
                cell.s = profile.best_s
                cell.n_iter = res.n_iter
                cell.max_decrease = _max_decrease(res.objective_trace)
            cell.ari = adjusted_rand_index(truth, pred)
        except Exception as exc:  # a failed cell is recorded and the bench goes on
            logger.debug("cell failed:\n%s", traceback.format_exc())
            cell.error = f"{type(exc).__name__}: {exc}"
        out.append(cell)
    return out


def run_bench(config, workers=1):
    """Run every cell of ``config``; ``workers`` only changes wall time."""
    jobs = [(n, r) for n in config.n_grid for r in range(config.replicates)]
    per_job = Parallel(n_jobs=workers)(delayed(_run_replicate)(config, n, r) for n, r in jobs)
    order = {m: i for i, m in enumerate(config.methods)}
    cells = [c for batch in per_job for c in batch]
    cells.sort(key=lambda c: (order[c.method], c.n_per_cluster, c.replicate))
    return BenchReport(config, cells)


def plot_summary(report, path):
    """Mean ARI against n per method, as a static image (needs matplotlib)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.5))
    rows = report.summary()
    for m in report.config.methods:
        pts = [(r["n_per_cluster"], r["mean_ari"]) for r in rows if r["method"] == m and r["mean_ari"] is not None]
        if pts:
            x, y = zip(*pts)
            ax.plot(x, y, marker="o", label=m)
    ax.set_xlabel("signals per cluster")
    ax.set_ylabel("mean ARI")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
