"""Command-line front end.

Subcommands: ``simulate``, ``transform``, ``cluster``, ``evaluate``, ``bench``.
Every subcommand accepts ``--seed``, ``--workers``, ``--out`` and
``--config FILE`` (YAML or JSON mapping of option names to values; flags given
on the command line take precedence). Output documents embed the resolved
options, minus ``--workers`` and ``--out``, which never affect results.

Exit codes: 0 success, 2 usage error, 3 invalid input or configuration,
4 runtime failure (I/O, or a bench cell that failed).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .bench import BenchConfig, plot_summary, run_bench
from .cluster import kmeans, multivariate_groups, refit_on_selected, sparse_kmeans
from .dwt import DWTTransformer, get_filter, wavelet_scale_groups
from .scattering import ScatteringTransformer, log_frequency_input
from .selection import adjusted_rand_index, gap_select
from .signals import (
    ClusteringResult,
    FeatureMatrix,
    GroupPartition,
    dump_json,
    flatten_multivariate,
    load_dataset,
    load_features,
    load_labels,
    load_result,
    save_dataset,
    save_features,
    save_result,
)
from .simgen import SimConfig, make_benchmark

logger = logging.getLogger("wavesparse")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_RUNTIME = 4

# options that never change a result and so stay out of the config echo
_NOT_ECHOED = {"config", "workers", "out", "verbose", "handler", "command"}


class UsageError(Exception):
    pass


class BenchFailure(RuntimeError):
    pass


def _float_list(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _int_list(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def _str_list(text):
    return [v.strip() for v in str(text).split(",") if v.strip()]


def _s_value(text):
    if str(text) == "auto":
        return "auto"
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'auto', got {text!r}") from None


def _common(parser):
    g = parser.add_argument_group("common options")
    g.add_argument("--seed", type=int, default=0, help="master random seed (default 0)")
    g.add_argument("--workers", type=int, default=1, help="parallel workers; results do not depend on it")
    g.add_argument("--out", help="output path (file or directory, per subcommand)")
    g.add_argument("--config", help="YAML/JSON file of option values; command-line flags win")
    g.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="wavesparse", description="Structured sparse K-means for signals."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    subs = {}

    p = sub.add_parser("simulate", help="generate a benchmark data set")
    p.add_argument("--bench", choices=["univariate", "multivariate"])
    p.add_argument("--sigma", type=float)
    p.add_argument("--n-per-cluster", type=int, default=30)
    p.add_argument("--base-length", type=int)
    p.add_argument("--pad", type=int)
    p.add_argument("--scale", type=float, help="curve standard deviation (default per bench)")
    p.set_defaults(handler=cmd_simulate, _required=("bench", "sigma", "out"))
    subs["simulate"] = p

    p = sub.add_parser("transform", help="map signals to a feature matrix")
    p.add_argument("--input", help="signal CSV")
    p.add_argument("--layout", default="auto", choices=["auto", "univariate", "multivariate"])
    p.add_argument("--n-variables", type=int)
    p.add_argument("--method", default="dwt", choices=["raw", "dwt", "scattering"])
    p.add_argument("--wavelet", default="sym8")
    p.add_argument("--pad", action="store_true", help="zero-pad to the next power of two")
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--a1", type=float, default=2**0.5)
    p.add_argument("--a2", type=float, default=2.0)
    p.add_argument("--t-scat", type=int, default=32)
    p.add_argument("--phi-len", type=int)
    p.add_argument("--window", default="gaussian", choices=["gaussian", "boxcar"])
    p.add_argument(
        "--log-frequency", action="store_true",
        help="resample each row onto a log-frequency grid before scattering",
    )
    p.set_defaults(handler=cmd_transform, _required=("input", "out"))
    subs["transform"] = p

    p = sub.add_parser("cluster", help="cluster a feature matrix")
    p.add_argument("--features", help="feature CSV written by transform (or any numeric CSV)")
    p.add_argument("--method", default="sparse", choices=["kmeans", "sparse", "group-sparse"])
    p.add_argument("--k", type=int)
    p.add_argument("--s", type=_s_value, default="auto")
    p.add_argument(
        "--groups", default="auto",
        choices=["auto", "none", "wavelet-scales", "multivariate", "scattering-paths"],
        help="group structure for group-sparse; auto uses the partition stored with the features",
    )
    p.add_argument("--n-variables", type=int, help="G for --groups multivariate")
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--max-iter", type=int, default=15)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--permutations", type=int, default=10)
    p.add_argument("--s-grid", type=_float_list, help="comma-separated candidates for --s auto")
    p.add_argument("--refit-threshold", type=float)
    p.add_argument("--weights-csv", help="also write per-feature weights with their column labels")
    p.set_defaults(handler=cmd_cluster, _required=("features", "k", "out"))
    subs["cluster"] = p

    p = sub.add_parser("evaluate", help="ARI of one or more predictions against truth")
    p.add_argument("--truth", help="label file")
    p.add_argument("--pred", nargs="+", help="result JSON or label files")
    p.add_argument("--names", type=_str_list, help="comma-separated row names")
    p.set_defaults(handler=cmd_evaluate, _required=("truth", "pred"))
    subs["evaluate"] = p

    p = sub.add_parser("bench", help="run the simulation benchmark grid")
    p.add_argument("--bench", default="univariate", choices=["univariate", "multivariate"])
    p.add_argument("--methods", type=_str_list, default=["kmeans", "sparse", "group-sparse"])
    p.add_argument("--n-grid", type=_int_list, default=[5, 10, 20, 30])
    p.add_argument("--sigma", type=float)
    p.add_argument("--replicates", type=int, default=20)
    p.add_argument("--wavelet", default="sym8")
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--kmeans-restarts", type=int, default=100)
    p.add_argument("--permutations", type=int, default=10)
    p.add_argument("--max-iter", type=int, default=15)
    p.add_argument("--scale", type=float)
    p.add_argument("--plot", action="store_true", help="also render mean_ari.png (needs matplotlib)")
    p.set_defaults(handler=cmd_bench, _required=("out",))
    subs["bench"] = p

    for p in subs.values():
        _common(p)
    return parser, subs


def _load_config_file(path):
    text = Path(path).read_text(encoding="utf-8")
    data = yaml.safe_load(text) if text.strip() else {}
    if not isinstance(data, dict):
        raise UsageError(f"{path}: config file must hold a mapping of option names to values")
    return {str(k).replace("-", "_"): v for k, v in data.items()}


def parse(argv):
    """Parse ``argv``; options from ``--config`` fill in anything not given as a flag."""
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)
    sp = subs[args.command]
    if args.config:
        try:
            cfg = _load_config_file(args.config)
        except OSError as exc:
            sp.error(f"cannot read config file: {exc}")
        except yaml.YAMLError as exc:
            sp.error(f"cannot parse config file: {exc}")
        except UsageError as exc:
            sp.error(str(exc))
        known = {a.dest for a in sp._actions}
        unknown = sorted(set(cfg) - known - {"command"})
        if unknown:
            sp.error(f"unknown option(s) in config file: {', '.join(unknown)}")
        # values from the file are run through the same converters as flags
        for a in sp._actions:
            if a.dest in cfg and a.type is not None and isinstance(cfg[a.dest], str):
                try:
                    cfg[a.dest] = a.type(cfg[a.dest])
                except (ValueError, argparse.ArgumentTypeError) as exc:
                    sp.error(f"config option {a.dest}: {exc}")
        cfg.pop("command", None)
        cfg.pop("config", None)
        sp.set_defaults(**cfg)
        args = parser.parse_args(argv)
    missing = [d for d in args._required if getattr(args, d, None) is None]
    if missing:
        sp.error("missing required option(s): " + ", ".join("--" + d.replace("_", "-") for d in missing))
    return args


def resolved_config(args):
    cfg = {k: v for k, v in vars(args).items() if k not in _NOT_ECHOED and not k.startswith("_")}
    cfg["command"] = args.command
    return cfg


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args):
    sim = SimConfig(
        bench=args.bench,
        sigma=args.sigma,
        n_per_cluster=args.n_per_cluster,
        base_length=args.base_length,
        pad=args.pad,
        scale=args.scale,
        seed=args.seed,
    )
    data = make_benchmark(sim)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(data, out / "signals.csv", out / "labels.csv")
    dump_json({"config": resolved_config(args), "simulation": sim.to_dict(), "n_clusters": sim.n_clusters},
              out / "simulate.json")
    shape = "x".join(str(d) for d in data.instances.shape)
    print(f"wrote {data.n} instances ({shape}) to {out}")


def _prepare_scattering_input(X, args):
    if not args.log_frequency:
        return X
    return np.stack([log_frequency_input(row) for row in X])


def cmd_transform(args):
    data = load_dataset(args.input, layout=args.layout, n_variables=args.n_variables)
    X = data.instances
    extra = {"config": resolved_config(args), "n_variables": data.n_variables, "length": data.length}
    if args.method == "raw":
        values = flatten_multivariate(X) if X.ndim == 3 else X
        groups = multivariate_groups(data.n_variables, data.length) if X.ndim == 3 else None
        fm = FeatureMatrix(values, "raw", groups)
    elif args.method == "dwt":
        get_filter(args.wavelet)
        fm = DWTTransformer(args.wavelet, pad=args.pad).fit(X).to_feature_matrix(X)
        extra["length"] = int(fm.shape[1] // data.n_variables)
    else:
        if X.ndim == 3:
            raise ValueError("scattering expects univariate signals")
        X = _prepare_scattering_input(X, args)
        tr = ScatteringTransformer(args.layers, (args.a1, args.a2), args.t_scat, args.phi_len, args.window)
        fm = tr.fit(X).to_feature_matrix(X)
        extra["scattering"] = tr.config_.to_dict()
    save_features(fm, args.out, extra)
    print(f"wrote {fm.shape[0]}x{fm.shape[1]} {fm.transform_tag} features to {args.out}")


def _partition(args, fm, meta):
    sel = args.groups
    p = fm.shape[1]
    if sel == "auto":
        if fm.groups is None:
            raise ValueError("the feature file carries no partition; pick one with --groups")
        return fm.groups
    if sel == "none":
        return None
    if sel == "wavelet-scales":
        if not fm.transform_tag.startswith("dwt"):
            raise ValueError(f"wavelet-scale groups need DWT features, got {fm.transform_tag}")
        G = int(meta.get("n_variables", 1))
        T = p // G
        base = wavelet_scale_groups(T)
        return GroupPartition([np.concatenate([g + v * T for v in range(G)]) for g in base], n_features=p)
    if sel == "multivariate":
        G = args.n_variables or meta.get("n_variables")
        if not G or p % int(G):
            raise ValueError("multivariate groups need --n-variables dividing the feature count")
        return multivariate_groups(int(G), p // int(G))
    if not fm.transform_tag.startswith("scattering") or fm.groups is None:
        raise ValueError("scattering-path groups need features written by transform --method scattering")
    return fm.groups


def _weights_table(path, weights, fm):
    rows = ["index,weight,group,label"]
    labels = fm.groups.labels if fm.groups is not None else None
    for j, w in enumerate(weights):
        lab = "" if fm.column_map is None else json.dumps(fm.column_map[j]).replace(",", ";")
        grp = "" if labels is None else str(int(labels[j]))
        rows.append(f"{j},{float(w)!r},{grp},{lab}")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


def cmd_cluster(args):
    fm, meta = load_features(args.features)
    X = fm.values
    cfg = resolved_config(args)
    if args.method == "kmeans":
        labels = kmeans(X, args.k, args.restarts, args.seed)
        res = ClusteringResult(
            labels=labels,
            weights=np.ones(X.shape[1]),
            transform_tag=fm.transform_tag,
            seed=args.seed,
            method="kmeans",
            config=cfg,
        )
        save_result(res, args.out)
        print(f"kmeans: wrote {args.out}")
        return
    groups = _partition(args, fm, meta) if args.method == "group-sparse" else None
    if groups is not None:
        cfg["group_sizes"] = groups.sizes.tolist()
    profile = None
    s = args.s
    if s == "auto":
        profile = gap_select(
            X, args.k, groups, grid=args.s_grid, n_permutations=args.permutations,
            restarts=args.restarts, max_iter=args.max_iter, tol=args.tol, seed=args.seed,
            n_jobs=args.workers,
        )
        s = profile.best_s
        if profile.no_structure:
            logger.warning("gap statistic found no structure above permutation noise")
    res = sparse_kmeans(X, args.k, s, groups, args.restarts, args.max_iter, args.seed, args.tol)
    refit = None
    if args.refit_threshold is not None:
        refit = refit_on_selected(X, res.weights, args.refit_threshold, args.k, args.restarts, args.seed)
    res = ClusteringResult(
        labels=res.labels,
        weights=res.weights,
        objective_trace=res.objective_trace,
        s=res.s,
        n_iter=res.n_iter,
        transform_tag=fm.transform_tag,
        seed=args.seed,
        method=args.method,
        gap_profile=None if profile is None else profile.to_dict(),
        refit_labels=refit,
        config=cfg,
    )
    save_result(res, args.out)
    if args.weights_csv:
        _weights_table(args.weights_csv, res.weights, fm)
    nz = int(np.count_nonzero(res.weights))
    print(f"{args.method}: s={res.s:.6g}, {nz}/{X.shape[1]} features weighted, wrote {args.out}")


def _load_prediction(path):
    path = Path(path)
    if path.suffix.lower() == ".json":
        return load_result(path)
    return load_labels(path)


def evaluation_rows(truth, preds, names=None):
    """Rows ``(name, ari)``; a result with refit labels adds a ``+ refit`` row."""
    names = list(names or [])
    rows = []
    for i, pred in enumerate(preds):
        name = names[i] if i < len(names) else None
        if isinstance(pred, ClusteringResult):
            name = name or pred.method
            rows.append((name, adjusted_rand_index(truth, pred.labels)))
            if pred.refit_labels is not None:
                rows.append((f"{name} + refit", adjusted_rand_index(truth, pred.refit_labels)))
        else:
            rows.append((name or f"prediction {i + 1}", adjusted_rand_index(truth, pred)))
    return rows


def format_table(rows):
    width = max(12, *(len(r[0]) for r in rows))
    lines = [f"{'method':<{width}}  {'ARI':>7}", f"{'-' * width}  {'-' * 7}"]
    lines += [f"{name:<{width}}  {ari:>7.4f}" for name, ari in rows]
    return "\n".join(lines) + "\n"


def cmd_evaluate(args):
    truth = load_labels(args.truth)
    paths = args.pred
    if args.names and len(args.names) != len(paths):
        raise ValueError(f"{len(args.names)} names given for {len(paths)} prediction files")
    rows = evaluation_rows(truth, [_load_prediction(p) for p in paths], args.names)
    text = format_table(rows)
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        dump_json(
            {"config": resolved_config(args), "rows": [{"method": n, "ari": a} for n, a in rows]},
            out,
        )
        out.with_suffix(".txt").write_text(text, encoding="utf-8")


def cmd_bench(args):
    sigma = args.sigma if args.sigma is not None else {"univariate": 2.75, "multivariate": 1.75}[args.bench]
    config = BenchConfig(
        bench=args.bench,
        methods=tuple(args.methods),
        n_grid=tuple(args.n_grid),
        sigma=sigma,
        replicates=args.replicates,
        seed=args.seed,
        wavelet=args.wavelet,
        restarts=args.restarts,
        kmeans_restarts=args.kmeans_restarts,
        n_permutations=args.permutations,
        max_iter=args.max_iter,
        scale=args.scale,
    )
    get_filter(config.wavelet)
    report = run_bench(config, workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.csv").write_text(report.summary_csv(), encoding="utf-8")
    (out / "cells.csv").write_text(report.cells_csv(), encoding="utf-8")
    (out / "summary.txt").write_text(report.summary_text(), encoding="utf-8")
    doc = report.to_dict()
    doc["cli_config"] = resolved_config(args)
    dump_json(doc, out / "bench.json")
    if args.plot:
        plot_summary(report, out / "mean_ari.png")
    sys.stdout.write(report.summary_text())
    if report.failed:
        raise BenchFailure(f"{len(report.failed)} bench cell(s) failed")


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )
    try:
        args.handler(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, BenchFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
