"""Seeded experiment batteries over generated overlays.

A battery sweeps one parameter (population size or minimum degree) and, for
every point, solves a fixed number of independently seeded instances with
each configured algorithm, recording the ratio of allocated resources:
flow / total demand for the stationary solver and score / (K * (n - 1))
for the tree builders.  Everything is a pure function of the base seed, so
reruns reproduce the same ratios; wall-clock runtimes are informational.
"""

from __future__ import annotations

import dataclasses
import time
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dcda, heuristics, overlay, sra

BATTERIES = ("large-n", "density", "small-n")
KNOWN_ALGORITHMS = ("sra", "greedy", "random", "prefixed", "ga", "bb")

_TAG_MATRIX = 101
_TAG_INSTANCE = 102
_TAG_ALGO = 103


def derive_seed(*parts: int) -> int:
    """Deterministic child seed from a tuple of integers."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


@dataclass(frozen=True)
class ExperimentConfig:
    battery: str
    n_values: tuple[int, ...]
    kappa_values: tuple[int, ...]
    cap_low: int
    cap_high: int
    k: int
    demand: int
    reps: int
    seed: int
    algorithms: tuple[str, ...]
    budget_sec: float = 60.0
    matrix_size: int = 2500
    ga_population: int = 150
    ga_generations: int = 300
    # per-algorithm smaller rep counts (e.g. an expensive GA); other
    # algorithms keep the full `reps`, which must stay >= 20
    reps_overrides: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        if self.battery not in BATTERIES:
            raise ValueError(f"unknown battery {self.battery!r}")
        if self.reps < 20:
            raise ValueError("at least 20 instances per point are required")
        if not self.n_values or not self.kappa_values:
            raise ValueError("n_values and kappa_values must be non-empty")
        for algo in self.algorithms:
            if algo not in KNOWN_ALGORITHMS:
                raise ValueError(f"unknown algorithm {algo!r}")
        for algo, reps in self.reps_overrides:
            if algo not in self.algorithms or reps < 1:
                raise ValueError(f"bad reps override {algo!r}={reps}")

    def points(self) -> tuple[int, ...]:
        """The swept parameter: kappa for the density battery, n otherwise."""
        return self.kappa_values if self.battery == "density" else self.n_values

    def reps_for(self, algo: str) -> int:
        return dict(self.reps_overrides).get(algo, self.reps)


def large_n_config(**overrides) -> ExperimentConfig:
    base = dict(
        battery="large-n",
        n_values=tuple(range(100, 1001, 100)),
        kappa_values=(6,),
        cap_low=2,
        cap_high=4,
        k=3,
        demand=3,
        reps=20,
        seed=1,
        algorithms=("sra", "greedy", "random", "prefixed"),
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def density_config(**overrides) -> ExperimentConfig:
    base = dict(
        battery="density",
        n_values=(200,),
        kappa_values=tuple(range(3, 16)),
        cap_low=2,
        cap_high=4,
        k=3,
        demand=3,
        reps=20,
        seed=1,
        algorithms=("sra", "greedy", "random", "prefixed"),
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def small_n_config(**overrides) -> ExperimentConfig:
    base = dict(
        battery="small-n",
        n_values=tuple(range(6, 16)),
        kappa_values=(3,),
        cap_low=0,
        cap_high=6,
        k=3,
        demand=3,
        reps=20,
        seed=1,
        algorithms=("bb", "greedy", "ga"),
    )
    base.update(overrides)
    return ExperimentConfig(**base)


_CONFIG_KEYS = {
    "battery": str,
    "n_list": "int_list",
    "kappa_list": "int_list",
    "cap_lo": int,
    "cap_hi": int,
    "K": int,
    "demand": int,
    "reps": int,
    "seed": int,
    "algos": "str_list",
    "budget_sec": float,
    "matrix_size": int,
    "ga_pop": int,
    "ga_gens": int,
    "ga_reps": int,
}


def parse_config_file(path: str | Path) -> ExperimentConfig:
    """Line-oriented `key value` config; lists are comma-separated."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(None, 1)
        if len(parts) != 2:
            raise overlay.InstanceFormatError("expected 'key value'", lineno)
        key, value = parts
        if key not in _CONFIG_KEYS:
            raise overlay.InstanceFormatError(f"unknown config key {key!r}", lineno)
        kind = _CONFIG_KEYS[key]
        try:
            if kind == "int_list":
                values[key] = tuple(int(x) for x in value.split(","))
            elif kind == "str_list":
                values[key] = tuple(x.strip() for x in value.split(","))
            else:
                values[key] = kind(value)
        except ValueError:
            raise overlay.InstanceFormatError(f"bad value for {key}", lineno) from None
    required = ["battery", "n_list", "kappa_list", "cap_lo", "cap_hi", "K", "demand", "reps", "seed", "algos"]
    missing = [key for key in required if key not in values]
    if missing:
        raise overlay.InstanceFormatError(f"missing config keys: {', '.join(missing)}")
    kwargs = dict(
        battery=values["battery"],
        n_values=values["n_list"],
        kappa_values=values["kappa_list"],
        cap_low=values["cap_lo"],
        cap_high=values["cap_hi"],
        k=values["K"],
        demand=values["demand"],
        reps=values["reps"],
        seed=values["seed"],
        algorithms=values["algos"],
    )
    if "budget_sec" in values:
        kwargs["budget_sec"] = values["budget_sec"]
    if "matrix_size" in values:
        kwargs["matrix_size"] = values["matrix_size"]
    if "ga_pop" in values:
        kwargs["ga_population"] = values["ga_pop"]
    if "ga_gens" in values:
        kwargs["ga_generations"] = values["ga_gens"]
    if "ga_reps" in values:
        kwargs["reps_overrides"] = (("ga", values["ga_reps"]),)
    try:
        return ExperimentConfig(**kwargs)
    except ValueError as exc:
        raise overlay.InstanceFormatError(str(exc)) from None


@dataclass(frozen=True)
class ResultRow:
    battery: str
    point: int
    algo: str
    seed: int
    ratio: float
    runtime_ms: float
    proven_optimal: bool | None = None  # exact solver only; None elsewhere


@dataclass(frozen=True)
class AggregateRow:
    point: int
    algo: str
    mean: float
    std: float
    min: float
    max: float
    count: int


@dataclass(frozen=True)
class ExperimentReport:
    config: ExperimentConfig
    rows: tuple[ResultRow, ...]

    def aggregates(self) -> list[AggregateRow]:
        out = []
        for point in self.config.points():
            for algo in self.config.algorithms:
                ratios = [r.ratio for r in self.rows if r.point == point and r.algo == algo]
                if not ratios:
                    continue
                arr = np.array(ratios)
                out.append(
                    AggregateRow(
                        point, algo,
                        float(arr.mean()), float(arr.std()),
                        float(arr.min()), float(arr.max()), len(ratios),
                    )
                )
        return out

    def mean_ratio(self, point: int, algo: str) -> float:
        ratios = [r.ratio for r in self.rows if r.point == point and r.algo == algo]
        if not ratios:
            raise KeyError(f"no rows for point={point} algo={algo}")
        return float(np.mean(ratios))


def build_instance(
    matrix: np.ndarray,
    n: int,
    kappa: int,
    cap_low: int,
    cap_high: int,
    demand: int,
    k: int,
    seed: int,
) -> dcda.DcdaInstance:
    """One seeded instance: sample nodes, connect nearest neighbors, draw
    capacities, set demands, pick a source uniformly."""
    rng = np.random.default_rng(seed)
    sample = rng.choice(matrix.shape[0], size=n, replace=False)
    graph = overlay.build_knn_overlay(matrix, [int(x) for x in sample], kappa)
    graph = overlay.assign_capacities(graph, cap_low, cap_high, derive_seed(seed, 1))
    graph = overlay.assign_demands(graph, demand)
    source = int(rng.integers(n))
    return dcda.DcdaInstance(graph, source, k)


def _solve_one(config: ExperimentConfig, matrix: np.ndarray, point: int,
               point_index: int, rep: int, algo: str) -> ResultRow:
    if config.battery == "density":
        n, kappa = config.n_values[0], point
    else:
        n, kappa = point, config.kappa_values[0]
    instance_seed = derive_seed(config.seed, _TAG_INSTANCE, point_index, rep)
    instance = build_instance(
        matrix, n, kappa, config.cap_low, config.cap_high, config.demand, config.k, instance_seed
    )
    algo_seed = derive_seed(instance_seed, _TAG_ALGO, KNOWN_ALGORITHMS.index(algo))
    proven: bool | None = None
    start = time.perf_counter()
    if algo == "sra":
        ratio = sra.sra_decide(instance.graph).ratio
    elif algo == "bb":
        result = dcda.branch_and_bound(instance, time_budget=config.budget_sec)
        ratio = dcda.allocation_ratio(instance, result.score)
        proven = result.proven_optimal
    else:
        if algo == "greedy":
            forest = heuristics.greedy(instance, algo_seed)
        elif algo == "random":
            forest = heuristics.random_variant(instance, algo_seed)
        elif algo == "prefixed":
            forest = heuristics.prefixed_variant(instance, algo_seed)
        elif algo == "ga":
            forest = heuristics.genetic(
                instance, config.ga_population, config.ga_generations, seed=algo_seed
            )
        else:  # pragma: no cover - guarded by config validation
            raise ValueError(f"unknown algorithm {algo!r}")
        ratio = dcda.allocation_ratio(instance, forest.total_members())
    runtime_ms = (time.perf_counter() - start) * 1000.0
    return ResultRow(config.battery, point, algo, instance_seed, ratio, runtime_ms, proven)


def run_battery(
    config: ExperimentConfig,
    matrix: np.ndarray | None = None,
    jobs: int = 1,
) -> ExperimentReport:
    """Run every (point, algorithm, rep) cell; rows come back in a fixed
    (point, algorithm, rep) order regardless of worker scheduling."""
    if matrix is None:
        matrix = overlay.synth_latency_matrix(
            config.matrix_size, derive_seed(config.seed, _TAG_MATRIX)
        )
    else:
        matrix = overlay.validate_latency_matrix(matrix)
    tasks = [
        (config, matrix, point, point_index, rep, algo)
        for point_index, point in enumerate(config.points())
        for algo in config.algorithms
        for rep in range(config.reps_for(algo))
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_solve_one_star, tasks, chunksize=1))
    else:
        rows = [_solve_one(*task) for task in tasks]
    return ExperimentReport(config, tuple(rows))


def _solve_one_star(task) -> ResultRow:
    return _solve_one(*task)


def emit_csv(report: ExperimentReport, rows_path: str | Path, aggregates_path: str | Path) -> None:
    """Per-solve rows and per-(point, algorithm) aggregates.

    Ratios are deterministic for a given config; the runtime column is
    wall-clock and varies between runs.
    """
    with open(rows_path, "w") as fh:
        fh.write("battery,point,algo,seed,ratio,runtime_ms\n")
        for r in report.rows:
            fh.write(
                f"{r.battery},{r.point},{r.algo},{r.seed},{r.ratio:.9f},{r.runtime_ms:.3f}\n"
            )
    with open(aggregates_path, "w") as fh:
        fh.write("point,algo,mean,std,min,max,count\n")
        for a in report.aggregates():
            fh.write(
                f"{a.point},{a.algo},{a.mean:.9f},{a.std:.9f},{a.min:.9f},{a.max:.9f},{a.count}\n"
            )
