"""End-to-end orchestration: sample, encode, reduce, cluster, extract the
centroid population, run the search matrix, test significance, and report.

Every artifact lands under the workdir and is listed in manifest.json; given
the same config the whole tree is byte-identical across reruns (seeds derive
from the global seed, JSON keys are sorted, and nothing records wall-clock).
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .bench import SurrogateBenchmark, encode_matrix, load_table
from .bgm import bgm_fit
from .cells import cell_from_json_dict, embed_genome, genome_frame_cell, genome_to_cell
from .clustering import kmeans_fit
from .dimred import fit_pca, fit_tsvd, save_model, transform
from .evo import SearchTrace, default_search_config, run_search
from .figures import boxplot_figure, convergence_figure, occurrence_figure
from .initpop import (
    CENTROIDS,
    InitialPopulation,
    centroids_to_population,
    extract_centroids,
    init_lhs,
    init_random,
)
from .sampling import SampleSet, sample_uniform
from .stats import export_traces, occurrence_matrix, wilcoxon_rank_sum, write_trace_csv
from .util import run_seed


@dataclass(frozen=True)
class PipelineConfig:
    benchmark: str = "surrogate"  # path to a JSON-lines table, or "surrogate"
    workdir: str = "artifacts"
    encoding: str = "short"
    reducer: str = "pca"
    components: int = 2
    cluster_method: str = "bgm"  # "bgm" | "kmeans"
    clusters: int = 19  # k-means cluster count
    truncation: int = 0  # BGM truncation; 0 -> 30 (short) / 40 (long)
    kmeans_n_init: int = 50
    sample_size: int = 300
    algos: tuple[str, ...] = ("ga", "ea", "ae", "rs")
    inits: tuple[str, ...] = ("rand", "lhs", "centroids")
    budgets: tuple[int, ...] = (36, 108)
    runs: int = 3
    pop_size: int = 0  # 0 -> number of extracted centroids
    max_evals: int = 300
    seed: int = 0
    workers: int = 1
    figures: bool = True

    def effective_truncation(self) -> int:
        if self.truncation:
            return self.truncation
        return 40 if self.encoding == "long" else 30


_LIST_KEYS = {"algos": str, "inits": str, "budgets": int}
_BOOL_KEYS = {"figures"}
_INT_KEYS = {
    "components",
    "clusters",
    "truncation",
    "kmeans_n_init",
    "sample_size",
    "runs",
    "pop_size",
    "max_evals",
    "seed",
    "workers",
}


def parse_config_text(text: str) -> dict:
    """Flat `key = value` lines; lists are comma-separated, # starts a comment."""
    values: dict = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in _LIST_KEYS:
            cast = _LIST_KEYS[key]
            values[key] = tuple(cast(part.strip()) for part in value.split(",") if part.strip())
        elif key in _BOOL_KEYS:
            values[key] = value.lower() in ("1", "true", "yes", "on")
        elif key in _INT_KEYS:
            values[key] = int(value)
        else:
            values[key] = value
    return values


def load_config(path, **overrides) -> PipelineConfig:
    with open(path, "r", encoding="utf-8") as handle:
        values = parse_config_text(handle.read())
    values.update({k: v for k, v in overrides.items() if v is not None})
    return PipelineConfig(**values)


def open_benchmark(spec: str):
    return SurrogateBenchmark() if spec == "surrogate" else load_table(spec)


# --- JSON-lines serialization of samples and populations -------------------


def write_samples(path, samples: SampleSet) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        header = {"kind": "sample_set", "method": samples.method, "seed": samples.seed, "n": len(samples)}
        handle.write(json.dumps(header, sort_keys=True) + "\n")
        for genome in samples.genomes:
            handle.write(json.dumps(genome_frame_cell(genome).to_json_dict(), sort_keys=True) + "\n")


def read_samples(path) -> SampleSet:
    method, seed = "uniform", 0
    genomes, cells = [], []
    for obj in _iter_jsonl(path):
        if "adjacency" not in obj:
            method = obj.get("method", method)
            seed = obj.get("seed", seed)
            continue
        genome = embed_genome(cell_from_json_dict(obj))
        genomes.append(genome)
        cells.append(genome_to_cell(genome))
    return SampleSet(tuple(genomes), tuple(cells), seed, method)


def write_population(path, pop: InitialPopulation) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        header = {"kind": "initial_population", "method": pop.method, "size": len(pop)}
        handle.write(json.dumps(header, sort_keys=True) + "\n")
        for idx, genome in enumerate(pop.genomes):
            obj = genome_frame_cell(genome).to_json_dict()
            if pop.provenance is not None:
                component, distance = pop.provenance[idx]
                obj["component"] = component
                obj["distance"] = distance
            handle.write(json.dumps(obj, sort_keys=True) + "\n")


def read_population(path) -> InitialPopulation:
    method = CENTROIDS
    genomes, cells, provenance = [], [], []
    for obj in _iter_jsonl(path):
        if "adjacency" not in obj:
            method = obj.get("method", method)
            continue
        genome = embed_genome(cell_from_json_dict(obj))
        genomes.append(genome)
        cells.append(genome_to_cell(genome))
        if "component" in obj:
            provenance.append((int(obj["component"]), float(obj["distance"])))
    return InitialPopulation(
        tuple(cells),
        tuple(genomes),
        method,
        tuple(provenance) if len(provenance) == len(genomes) else None,
    )


def _iter_jsonl(path):
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                yield json.loads(line)


def write_matrix_csv(path, matrix, prefix: str) -> None:
    matrix = np.asarray(matrix)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow([f"{prefix}{i}" for i in range(matrix.shape[1])])
        writer.writerows(matrix.tolist())


def read_matrix_csv(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        next(reader)
        return np.array([[float(v) for v in row] for row in reader])


def write_labels_csv(path, labels) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["index", "label"])
        for i, label in enumerate(labels):
            writer.writerow([i, int(label)])


def read_labels_csv(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        next(reader)
        return np.array([int(row[1]) for row in reader])


def write_model_json(path, model) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(model.to_json_dict(), handle, sort_keys=True, indent=2)
        handle.write("\n")


def centroids_from_model_json(obj: dict) -> np.ndarray:
    """Reduced-space centroids from a serialized cluster model."""
    if obj["kind"] == "kmeans":
        return np.asarray(obj["centers"], dtype=float)
    if obj["kind"] == "bgm":
        weights = np.asarray(obj["weights"], dtype=float)
        means = np.asarray(obj["means"], dtype=float)
        effective = obj["effective_components"]
        order = sorted(effective, key=lambda c: (-weights[c], c))
        return means[list(order)]
    raise ValueError(f"unknown model kind {obj['kind']!r}")


def write_occurrence_csv(path, matrix) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["source", "target", "count", "frequency"])
        for i in range(matrix.counts.shape[0]):
            for j in range(matrix.counts.shape[1]):
                writer.writerow([i, j, int(matrix.counts[i, j]), float(matrix.normalized[i, j])])


# --- search-stage workers ---------------------------------------------------

_WORKER_BENCH = None


def _init_worker(benchmark_spec: str) -> None:
    global _WORKER_BENCH
    _WORKER_BENCH = open_benchmark(benchmark_spec)


def _run_job(job) -> SearchTrace:
    config, init_pop = job
    return run_search(config, _WORKER_BENCH, init_pop)


class PipelineError(RuntimeError):
    """A stage failed; the message names the stage and the cause."""


def _build_init(init: str, pop_size: int, seed: int, centroid_pop: InitialPopulation | None):
    if init == "rand":
        return init_random(pop_size, seed)
    if init == "lhs":
        return init_lhs(pop_size, seed)
    if init == CENTROIDS:
        if centroid_pop is None:
            raise ValueError("no centroid population available")
        return centroid_pop
    raise ValueError(f"unknown init {init!r}")


def run_pipeline(config: PipelineConfig) -> dict:
    """Execute all stages under config.workdir and return the manifest."""
    work = config.workdir
    os.makedirs(work, exist_ok=True)
    manifest = {
        "config": asdict(config),
        "versions": {"nasinit": __version__, "numpy": np.__version__},
        "artifacts": [],
        "run_seeds": {},
    }

    def track(relpath: str) -> str:
        manifest["artifacts"].append(relpath)
        return os.path.join(work, relpath)

    stage = "sample"
    try:
        bench = open_benchmark(config.benchmark)
        samples = sample_uniform(config.sample_size, config.seed)
        write_samples(track("samples.jsonl"), samples)

        stage = "encode"
        features = encode_matrix(samples.cells, bench, config.encoding)
        write_matrix_csv(track("features.csv"), features, "f")

        stage = "reduce"
        fit = fit_pca if config.reducer == "pca" else fit_tsvd
        reduction = fit(features, config.components)
        save_model(track("reduction.json"), reduction)
        reduced = transform(reduction, features)
        write_matrix_csv(track("reduced.csv"), reduced, "c")

        stage = "cluster"
        if config.cluster_method == "kmeans":
            model, assignment = kmeans_fit(
                reduced, config.clusters, n_init=config.kmeans_n_init, rng=config.seed
            )
            labels = assignment.labels
        elif config.cluster_method == "bgm":
            model = bgm_fit(reduced, config.effective_truncation(), rng=config.seed)
            labels = model.assignment().labels
        else:
            raise ValueError(
                f"cluster_method must be 'kmeans' or 'bgm' for centroid extraction, got {config.cluster_method!r}"
            )
        write_model_json(track("cluster.json"), model)
        write_labels_csv(track("labels.csv"), labels)

        stage = "extract-init"
        centroid_pop = None
        if CENTROIDS in config.inits:
            centroids = extract_centroids(model)
            centroid_pop = centroids_to_population(centroids, samples, reduced)
            write_population(track("population_centroids.jsonl"), centroid_pop)

        stage = "search"
        pop_size = config.pop_size or (len(centroid_pop) if centroid_pop else 19)
        if centroid_pop is not None and len(centroid_pop) != pop_size:
            raise ValueError(
                f"pop_size {pop_size} != centroid population size {len(centroid_pop)}"
            )
        os.makedirs(os.path.join(work, "traces"), exist_ok=True)
        os.makedirs(os.path.join(work, "groups"), exist_ok=True)
        jobs, job_keys = [], []
        for algo in config.algos:
            for init in config.inits if algo != "rs" else ("none",):
                for budget in config.budgets:
                    for run in range(config.runs):
                        seed = run_seed(config.seed, algo, init, budget, run)
                        manifest["run_seeds"][f"{algo}/{init}/{budget}/{run}"] = seed
                        search_config = default_search_config(
                            algo,
                            encoding=config.encoding,
                            budget=budget,
                            pop_size=pop_size,
                            max_evaluations=config.max_evals,
                            seed=seed,
                            init=init,
                        )
                        init_pop = (
                            None
                            if algo == "rs"
                            else _build_init(init, pop_size, seed, centroid_pop)
                        )
                        jobs.append((search_config, init_pop))
                        job_keys.append((algo, init, budget, run))
        if config.workers > 1:
            with ProcessPoolExecutor(
                max_workers=config.workers,
                initializer=_init_worker,
                initargs=(config.benchmark,),
            ) as pool:
                traces = list(pool.map(_run_job, jobs))
        else:
            traces = [run_search(cfg, bench, pop) for cfg, pop in jobs]

        groups: dict[tuple, list[SearchTrace]] = {}
        for key, trace in zip(job_keys, traces):
            algo, init, budget, run = key
            write_trace_csv(
                track(f"traces/{algo}_{init}_{budget}_run{run:03d}.csv"), [trace]
            )
            groups.setdefault((algo, init, budget), []).append(trace)
        summaries = {}
        for (algo, init, budget), runs_list in sorted(groups.items()):
            name = f"{algo}_{init}_{budget}"
            summaries[name] = export_traces(runs_list, os.path.join(work, "groups"), name)
            manifest["artifacts"].append(f"groups/{name}_convergence.csv")
            manifest["artifacts"].append(f"groups/{name}_summary.json")

        stage = "stats"
        comparisons = []
        for algo in config.algos:
            if algo == "rs":
                continue
            for budget in config.budgets:
                base = groups.get((algo, CENTROIDS, budget))
                if base is None:
                    continue
                base_finals = [t.best_test_acc for t in base]
                for other in config.inits:
                    if other == CENTROIDS:
                        continue
                    rival = groups.get((algo, other, budget))
                    if rival is None:
                        continue
                    rival_finals = [t.best_test_acc for t in rival]
                    result = wilcoxon_rank_sum(base_finals, rival_finals)
                    comparisons.append(
                        {
                            "algo": algo,
                            "budget": budget,
                            "comparison": f"centroids_vs_{other}",
                            "statistic": result.statistic,
                            "p": result.two_sided_p,
                            "method": result.method,
                            "mean_centroids": float(np.mean(base_finals)),
                            "mean_other": float(np.mean(rival_finals)),
                        }
                    )
        with open(track("stats.json"), "w", encoding="utf-8") as handle:
            json.dump(comparisons, handle, sort_keys=True, indent=2)
            handle.write("\n")

        stage = "occurrence"
        os.makedirs(os.path.join(work, "occurrence"), exist_ok=True)
        occurrences = {}
        for (algo, init, budget), runs_list in sorted(groups.items()):
            solutions = [t.best_cell for t in runs_list if t.best_cell is not None]
            matrix = occurrence_matrix(solutions)
            occurrences[(algo, init, budget)] = matrix
            write_occurrence_csv(track(f"occurrence/{algo}_{init}_{budget}.csv"), matrix)

        stage = "report"
        report_dir = os.path.join(work, "report")
        os.makedirs(report_dir, exist_ok=True)
        with open(track("report/final_test.csv"), "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["algo", "init", "budget", "run", "test_acc", "valid_acc"])
            for (algo, init, budget), runs_list in sorted(groups.items()):
                for run, trace in enumerate(runs_list):
                    writer.writerow(
                        [algo, init, budget, run, trace.best_test_acc, trace.best_valid_acc]
                    )
        if config.figures:
            for budget in config.budgets:
                for algo in config.algos:
                    if algo == "rs":
                        continue
                    by_init = {
                        init: groups[(algo, init, budget)]
                        for init in config.inits
                        if (algo, init, budget) in groups
                    }
                    if by_init:
                        convergence_figure(
                            by_init,
                            f"{algo} at budget {budget}",
                            track(f"report/convergence_{algo}_{budget}.png"),
                        )
                finals = {
                    f"{algo}/{init}": [t.best_test_acc for t in runs_list]
                    for (algo, init, b), runs_list in sorted(groups.items())
                    if b == budget
                }
                boxplot_figure(
                    finals,
                    f"final test accuracy at budget {budget}",
                    track(f"report/final_test_{budget}.png"),
                )
            for (algo, init, budget), matrix in sorted(occurrences.items()):
                occurrence_figure(
                    matrix,
                    f"{algo}/{init} at budget {budget}",
                    track(f"report/occurrence_{algo}_{init}_{budget}.png"),
                )
    except Exception as exc:
        raise PipelineError(f"stage {stage!r} failed: {exc}") from exc

    manifest["artifacts"].append("manifest.json")
    manifest["artifacts"] = sorted(manifest["artifacts"])
    with open(os.path.join(work, "manifest.json"), "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, sort_keys=True, indent=2)
        handle.write("\n")
    return manifest


# --- standalone report rendering from an existing artifact tree ------------


@dataclass(frozen=True)
class _TraceView:
    """Just enough of a SearchTrace to drive the report renderers."""

    rows: tuple
    best_test_acc: float


def _load_group(work, name: str) -> list[_TraceView]:
    from .evo import TraceRow

    path = os.path.join(work, "groups", f"{name}_convergence.csv")
    per_run: dict[int, list] = {}
    with open(path, "r", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        for row in reader:
            per_run.setdefault(int(row["run_id"]), []).append(
                TraceRow(
                    generation=int(row["generation"]),
                    evaluations=int(row["evaluations"]),
                    mean_fit=float(row["mean_fit"]),
                    min_fit=float(row["min_fit"]),
                    max_fit=float(row["max_fit"]),
                    best_so_far=float(row["best_so_far"]),
                )
            )
    with open(os.path.join(work, "groups", f"{name}_summary.json"), "r", encoding="utf-8") as handle:
        summary = json.load(handle)
    finals = summary["final_test"]["values"]
    return [
        _TraceView(tuple(per_run[run]), finals[run]) for run in sorted(per_run)
    ]


def _load_occurrence(work, name: str):
    from .stats import OccurrenceMatrix

    counts = np.zeros((7, 7), dtype=int)
    freq = np.zeros((7, 7))
    with open(os.path.join(work, "occurrence", f"{name}.csv"), "r", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        for row in reader:
            i, j = int(row["source"]), int(row["target"])
            counts[i, j] = int(row["count"])
            freq[i, j] = float(row["frequency"])
    nonzero = counts > 0
    n = int(round(counts[nonzero][0] / freq[nonzero][0])) if nonzero.any() else 0
    return OccurrenceMatrix(counts, n, freq)


def render_report(workdir) -> list[str]:
    """Re-render the report figures and final-test table from the artifacts
    already on disk (the inverse of the pipeline's in-memory report stage)."""
    with open(os.path.join(workdir, "manifest.json"), "r", encoding="utf-8") as handle:
        manifest = json.load(handle)
    config = manifest["config"]
    groups: dict[tuple, list[_TraceView]] = {}
    for algo in config["algos"]:
        for init in config["inits"] if algo != "rs" else ("none",):
            for budget in config["budgets"]:
                name = f"{algo}_{init}_{budget}"
                if os.path.exists(os.path.join(workdir, "groups", f"{name}_convergence.csv")):
                    groups[(algo, init, budget)] = _load_group(workdir, name)
    report_dir = os.path.join(workdir, "report")
    os.makedirs(report_dir, exist_ok=True)
    written = []
    for budget in config["budgets"]:
        for algo in config["algos"]:
            if algo == "rs":
                continue
            by_init = {
                init: groups[(algo, init, budget)]
                for init in config["inits"]
                if (algo, init, budget) in groups
            }
            if by_init:
                path = os.path.join(report_dir, f"convergence_{algo}_{budget}.png")
                convergence_figure(by_init, f"{algo} at budget {budget}", path)
                written.append(path)
        finals = {
            f"{algo}/{init}": [t.best_test_acc for t in runs_list]
            for (algo, init, b), runs_list in sorted(groups.items())
            if b == budget
        }
        if finals:
            path = os.path.join(report_dir, f"final_test_{budget}.png")
            boxplot_figure(finals, f"final test accuracy at budget {budget}", path)
            written.append(path)
    for (algo, init, budget) in sorted(groups):
        name = f"{algo}_{init}_{budget}"
        if os.path.exists(os.path.join(workdir, "occurrence", f"{name}.csv")):
            matrix = _load_occurrence(workdir, name)
            path = os.path.join(report_dir, f"occurrence_{name}.png")
            occurrence_figure(matrix, f"{algo}/{init} at budget {budget}", path)
            written.append(path)
    return written
