"""Command-line entry point wiring the pipeline stages together.

Subcommands: sample, encode, reduce, cluster, calibrate, extract-init,
search, stats, report, pipeline.  Stdout carries progress lines and a final
summary JSON; artifacts go to files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .bgm import bgm_fit
from .clustering import DbscanParams, dbscan_fit, kmeans_fit
from .dimred import fit_pca, fit_tsvd, save_model, transform
from .evo import default_search_config, run_search
from .initpop import centroids_to_population, init_lhs, init_random
from .bench import encode_matrix
from .pipeline import (
    PipelineConfig,
    centroids_from_model_json,
    load_config,
    open_benchmark,
    read_matrix_csv,
    read_population,
    read_samples,
    render_report,
    run_pipeline,
    write_labels_csv,
    write_matrix_csv,
    write_model_json,
    write_population,
    write_samples,
    write_trace_csv,
)
from .sampling import sample_lhs, sample_uniform
from .stats import calibration_sweep, quartile_summary, wilcoxon_rank_sum, write_calibration_csv
from .util import run_seed


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


def _seed(args) -> int:
    return 0 if args.seed is None else args.seed


def _workdir(args) -> str:
    return "artifacts" if args.workdir is None else args.workdir


def _add_bench_args(parser) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--bench", help="path to a JSON-lines benchmark table")
    group.add_argument(
        "--surrogate", action="store_true", help="use the deterministic surrogate"
    )


def _bench_spec(args) -> str:
    return args.bench if args.bench else "surrogate"


def cmd_sample(args) -> int:
    sampler = sample_uniform if args.method == "uniform" else sample_lhs
    samples = sampler(args.n, _seed(args))
    write_samples(args.out, samples)
    _emit({"command": "sample", "method": args.method, "n": len(samples), "out": args.out})
    return 0


def cmd_encode(args) -> int:
    samples = read_samples(args.samples)
    bench = open_benchmark(_bench_spec(args))
    features = encode_matrix(samples.cells, bench, args.encoding)
    write_matrix_csv(args.out, features, "f")
    _emit({"command": "encode", "rows": features.shape[0], "dim": features.shape[1], "out": args.out})
    return 0


def cmd_reduce(args) -> int:
    features = read_matrix_csv(args.features)
    fit = fit_pca if args.method == "pca" else fit_tsvd
    model = fit(features, args.components)
    save_model(args.out_model, model)
    reduced = transform(model, features)
    write_matrix_csv(args.out, reduced, "c")
    _emit(
        {
            "command": "reduce",
            "method": args.method,
            "components": args.components,
            "singular_values": model.singular_values.tolist(),
            "out": args.out,
        }
    )
    return 0


def cmd_cluster(args) -> int:
    reduced = read_matrix_csv(args.reduced)
    if args.method == "kmeans":
        model, assignment = kmeans_fit(
            reduced, args.k, n_init=args.n_init, max_iter=args.max_iter, rng=_seed(args)
        )
        labels = assignment.labels
        write_model_json(args.out_model, model)
        info = {"inertia": model.inertia}
    elif args.method == "bgm":
        model = bgm_fit(reduced, args.truncation, max_iter=args.max_iter, rng=_seed(args))
        labels = model.assignment().labels
        write_model_json(args.out_model, model)
        info = {
            "effective_components": len(model.effective_components),
            "elbo": model.elbo_trace[-1],
        }
    else:
        assignment = dbscan_fit(reduced, DbscanParams(args.eps, args.min_samples))
        labels = assignment.labels
        with open(args.out_model, "w", encoding="utf-8") as handle:
            json.dump(
                {"kind": "dbscan", "eps": args.eps, "min_samples": args.min_samples},
                handle,
                sort_keys=True,
                indent=2,
            )
            handle.write("\n")
        info = {"n_clusters": assignment.n_clusters, "noise": int((labels == -1).sum())}
    write_labels_csv(args.out_labels, labels)
    _emit({"command": "cluster", "method": args.method, **info, "out_labels": args.out_labels})
    return 0


def cmd_calibrate(args) -> int:
    bench = open_benchmark(_bench_spec(args))
    rows = calibration_sweep(
        bench,
        _seed(args),
        encodings=tuple(args.encodings.split(",")),
        reducers=tuple(args.reducers.split(",")),
        components=tuple(int(v) for v in args.components.split(",")),
        sample_sizes=tuple(int(v) for v in args.sample_sizes.split(",")),
        cluster_counts=tuple(int(v) for v in args.clusters.split(",")),
        n_init=args.n_init,
    )
    write_calibration_csv(args.out, rows)
    _emit({"command": "calibrate", "rows": len(rows), "out": args.out})
    return 0


def cmd_extract_init(args) -> int:
    with open(args.model, "r", encoding="utf-8") as handle:
        centroids = centroids_from_model_json(json.load(handle))
    samples = read_samples(args.samples)
    reduced = read_matrix_csv(args.reduced)
    population = centroids_to_population(centroids, samples, reduced)
    write_population(args.out, population)
    _emit({"command": "extract-init", "population": len(population), "out": args.out})
    return 0


def cmd_search(args) -> int:
    bench = open_benchmark(_bench_spec(args))
    centroid_pop = read_population(args.centroids) if args.centroids else None
    if args.init == "centroids" and centroid_pop is None:
        raise SystemExit("--init centroids requires --centroids POP.jsonl")
    pop_size = args.pop_size or (len(centroid_pop) if centroid_pop else 19)
    if centroid_pop is not None and pop_size != len(centroid_pop):
        raise SystemExit(
            f"--pop-size {pop_size} conflicts with centroid population of {len(centroid_pop)}"
        )
    os.makedirs(args.outdir, exist_ok=True)
    runs_summary = []
    for run in range(args.runs):
        seed = run_seed(_seed(args), args.algo, args.init, args.budget, run)
        config = default_search_config(
            args.algo,
            budget=args.budget,
            pop_size=pop_size,
            max_evaluations=args.max_evals,
            seed=seed,
            init=args.init,
        )
        if args.algo == "rs":
            init_pop = None
        elif args.init == "rand":
            init_pop = init_random(pop_size, seed)
        elif args.init == "lhs":
            init_pop = init_lhs(pop_size, seed)
        else:
            init_pop = centroid_pop
        trace = run_search(config, bench, init_pop)
        write_trace_csv(os.path.join(args.outdir, f"trace_run{run:03d}.csv"), [trace])
        runs_summary.append(
            {
                "run": run,
                "seed": seed,
                "best_cell": trace.best_cell.to_json_dict() if trace.best_cell else None,
                "valid_acc": trace.best_valid_acc,
                "test_acc": trace.best_test_acc,
                "evaluations": trace.evaluations,
            }
        )
        print(
            f"run {run}: evaluations={trace.evaluations} "
            f"valid={trace.best_valid_acc:.6f} test={trace.best_test_acc:.6f}",
            file=sys.stderr,
        )
    summary = {
        "algo": args.algo,
        "init": args.init,
        "budget": args.budget,
        "runs": runs_summary,
        "final_test": quartile_summary([r["test_acc"] for r in runs_summary]),
    }
    with open(os.path.join(args.outdir, "summary.json"), "w", encoding="utf-8") as handle:
        json.dump(summary, handle, sort_keys=True, indent=2)
        handle.write("\n")
    _emit(summary)
    return 0


def cmd_stats(args) -> int:
    def read_values(path):
        with open(path, "r", encoding="utf-8") as handle:
            return [float(line) for line in handle if line.strip()]

    result = wilcoxon_rank_sum(read_values(args.a), read_values(args.b))
    _emit({"statistic": result.statistic, "p": result.two_sided_p, "method": result.method})
    return 0


def cmd_report(args) -> int:
    written = render_report(_workdir(args))
    _emit({"command": "report", "figures": [os.path.basename(p) for p in written]})
    return 0


def cmd_pipeline(args) -> int:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.workdir is not None:
        overrides["workdir"] = args.workdir
    if args.config:
        config = load_config(args.config, **overrides)
    else:
        config = PipelineConfig(**overrides)
    manifest = run_pipeline(config)
    _emit(
        {
            "command": "pipeline",
            "workdir": config.workdir,
            "artifacts": len(manifest["artifacts"]),
            "runs": len(manifest["run_seeds"]),
        }
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nasinit",
        description="Cluster-based population initialization for cell search spaces",
    )
    parser.add_argument("--seed", type=int, default=None, help="global seed")
    parser.add_argument("--workdir", default=None, help="artifact directory")
    parser.add_argument("--config", default=None, help="pipeline config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw architecture samples")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--method", choices=("uniform", "lhs"), default="uniform")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("encode", help="encode samples into feature vectors")
    p.add_argument("--samples", required=True)
    p.add_argument("--encoding", choices=("short", "long"), default="short")
    _add_bench_args(p)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("reduce", help="fit a dimension reduction")
    p.add_argument("--features", required=True)
    p.add_argument("--method", choices=("pca", "tsvd"), default="tsvd")
    p.add_argument("--components", type=int, default=2)
    p.add_argument("-o", "--out", required=True, help="reduced points CSV")
    p.add_argument("--out-model", required=True, help="model JSON")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("cluster", help="cluster reduced points")
    p.add_argument("--reduced", required=True)
    p.add_argument("--method", choices=("kmeans", "dbscan", "bgm"), required=True)
    p.add_argument("--k", type=int, default=19, help="k-means cluster count")
    p.add_argument("--eps", type=float, default=0.30, help="DBSCAN radius")
    p.add_argument("--min-samples", type=int, default=5, help="DBSCAN core threshold")
    p.add_argument("--truncation", type=int, default=30, help="BGM truncation")
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--n-init", type=int, default=50, help="k-means restarts")
    p.add_argument("--out-model", required=True)
    p.add_argument("--out-labels", required=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("calibrate", help="grid sweep of clustering quality")
    _add_bench_args(p)
    p.add_argument("--encodings", default="short")
    p.add_argument("--reducers", default="tsvd")
    p.add_argument("--components", default="2")
    p.add_argument("--sample-sizes", default="100,500,1000")
    p.add_argument("--clusters", default="5,10,20,30")
    p.add_argument("--n-init", type=int, default=10)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("extract-init", help="centroid medoids as a population")
    p.add_argument("--model", required=True, help="cluster model JSON")
    p.add_argument("--samples", required=True)
    p.add_argument("--reduced", required=True)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_extract_init)

    p = sub.add_parser("search", help="run seeded searches")
    p.add_argument("--algo", choices=("ga", "ea", "ae", "rs"), required=True)
    p.add_argument("--init", choices=("rand", "lhs", "centroids"), default="rand")
    p.add_argument("--budget", type=int, choices=(4, 12, 36, 108), default=36)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--max-evals", type=int, default=1995)
    p.add_argument("--pop-size", type=int, default=0)
    p.add_argument("--centroids", help="population JSONL for --init centroids")
    _add_bench_args(p)
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("stats", help="rank-sum test of two samples")
    p.add_argument("--a", required=True, help="file with one value per line")
    p.add_argument("--b", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("report", help="render figures from pipeline artifacts")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("pipeline", help="run every stage under the workdir")
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
