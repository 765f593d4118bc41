"""Overlay graph model, topology generation, and instance file formats.

The overlay is an undirected graph whose nodes carry two integer labels:
``capacity`` (units of a rival resource the node can hand out, e.g. upload
slots) and ``demand`` (units the node wants to receive).  Graphs are
immutable; generators and the ``assign_*`` helpers return new instances.

Two text formats are supported:

* instance files::

      p2p <n> <m_edges>
      node <id> <capacity> <demand>     (n lines)
      edge <u> <v>                      (m_edges lines)

  with ``#`` starting a comment.

* latency matrix files: a line with the size ``m`` followed by ``m`` rows
  of ``m`` whitespace-separated reals (milliseconds, zero diagonal).
"""

from __future__ import annotations

import dataclasses
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class InstanceFormatError(ValueError):
    """A malformed instance or matrix file; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class OverlayGraph:
    """Undirected node-capacitated, demand-labeled overlay.

    ``adjacency[u]`` is the sorted tuple of u's neighbors.  The relation is
    stored symmetrically and contains no self-loops or duplicates.
    """

    adjacency: tuple[tuple[int, ...], ...]
    capacity: tuple[int, ...]
    demand: tuple[int, ...]

    def __post_init__(self):
        n = len(self.adjacency)
        if len(self.capacity) != n or len(self.demand) != n:
            raise ValueError("capacity and demand must have one entry per node")
        if any(c < 0 for c in self.capacity):
            raise ValueError("capacities must be non-negative")
        if any(d < 0 for d in self.demand):
            raise ValueError("demands must be non-negative")
        for u, nbrs in enumerate(self.adjacency):
            if list(nbrs) != sorted(set(nbrs)):
                raise ValueError(f"adjacency of node {u} must be sorted and duplicate-free")
            for v in nbrs:
                if v == u:
                    raise ValueError(f"self-loop at node {u}")
                if not 0 <= v < n:
                    raise ValueError(f"neighbor {v} of node {u} out of range")
                if u not in self.adjacency[v]:
                    raise ValueError(f"edge {u}-{v} is not symmetric")

    @property
    def n(self) -> int:
        return len(self.adjacency)

    @property
    def num_edges(self) -> int:
        return sum(len(nbrs) for nbrs in self.adjacency) // 2

    def neighbors(self, u: int) -> tuple[int, ...]:
        return self.adjacency[u]

    def degree(self, u: int) -> int:
        return len(self.adjacency[u])

    def edges(self) -> Iterator[tuple[int, int]]:
        """Undirected edges as (u, v) pairs with u < v, lexicographic order."""
        for u, nbrs in enumerate(self.adjacency):
            for v in nbrs:
                if u < v:
                    yield (u, v)

    def total_demand(self) -> int:
        return sum(self.demand)


def overlay_from_edges(
    n: int,
    edges: Iterable[tuple[int, int]],
    capacity: Sequence[int] | None = None,
    demand: Sequence[int] | None = None,
) -> OverlayGraph:
    """Build a graph from an edge list, deduplicating repeated pairs."""
    nbrs: list[set[int]] = [set() for _ in range(n)]
    for u, v in edges:
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError(f"edge ({u}, {v}) out of range for n={n}")
        if u == v:
            raise ValueError(f"self-loop at node {u}")
        nbrs[u].add(v)
        nbrs[v].add(u)
    cap = tuple(capacity) if capacity is not None else (0,) * n
    dem = tuple(demand) if demand is not None else (0,) * n
    return OverlayGraph(tuple(tuple(sorted(s)) for s in nbrs), cap, dem)


# ---------------------------------------------------------------------------
# latency matrices


def synth_latency_matrix(m: int, seed: int) -> np.ndarray:
    """Synthetic latency matrix: m points uniform in a unit square, pairwise
    Euclidean distances scaled to milliseconds (100 ms per unit)."""
    if m < 2:
        raise ValueError("matrix size must be at least 2")
    rng = np.random.default_rng(seed)
    pts = rng.random((m, 2))
    delta = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((delta * delta).sum(axis=2)) * 100.0
    np.fill_diagonal(dist, 0.0)
    return dist


def validate_latency_matrix(matrix: np.ndarray) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError("latency matrix must be square")
    if not np.all(np.isfinite(matrix)) or np.any(matrix < 0):
        raise ValueError("latency entries must be finite and non-negative")
    if np.any(np.diagonal(matrix) != 0):
        raise ValueError("latency matrix diagonal must be zero")
    return matrix


def write_latency_matrix(matrix: np.ndarray, path: str | Path) -> None:
    matrix = validate_latency_matrix(matrix)
    with open(path, "w") as fh:
        fh.write(f"{matrix.shape[0]}\n")
        for row in matrix:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def read_latency_matrix(path: str | Path) -> np.ndarray:
    with open(path) as fh:
        lines = fh.readlines()
    if not lines:
        raise InstanceFormatError("empty latency matrix file", 1)
    try:
        m = int(lines[0])
    except ValueError:
        raise InstanceFormatError("expected matrix size on first line", 1) from None
    if len(lines) < m + 1:
        raise InstanceFormatError(f"expected {m} matrix rows", len(lines))
    rows = []
    for i in range(m):
        parts = lines[i + 1].split()
        if len(parts) != m:
            raise InstanceFormatError(f"expected {m} entries in matrix row", i + 2)
        try:
            rows.append([float(x) for x in parts])
        except ValueError:
            raise InstanceFormatError("non-numeric matrix entry", i + 2) from None
    try:
        return validate_latency_matrix(np.array(rows))
    except ValueError as exc:
        raise InstanceFormatError(str(exc)) from None


# ---------------------------------------------------------------------------
# topology generation


def build_knn_overlay(matrix: np.ndarray, sample: Sequence[int], kappa: int) -> OverlayGraph:
    """Connect each sampled node to its ``kappa`` lowest-latency sampled peers.

    Node ids of the result are positions in ``sample``.  Latency ties are
    broken toward the lower node id, so construction is fully deterministic.
    Every node ends up with degree at least ``kappa`` (a node may also be
    selected by more than ``kappa`` peers).  Capacities and demands are left
    at zero for later assignment.
    """
    matrix = validate_latency_matrix(matrix)
    sample = [int(i) for i in sample]
    if len(set(sample)) != len(sample):
        raise ValueError("sample indices must be distinct")
    if any(not 0 <= i < matrix.shape[0] for i in sample):
        raise ValueError("sample index out of range for matrix")
    if kappa < 1:
        raise ValueError("kappa must be positive")
    if kappa >= len(sample):
        raise ValueError("kappa must be smaller than the sample size")

    sub = matrix[np.ix_(sample, sample)]
    # stable argsort on each row: equal latencies resolve to the lower id
    order = np.argsort(sub, axis=1, kind="stable")
    edges = set()
    for u in range(len(sample)):
        picked = 0
        for v in order[u]:
            if v == u:
                continue
            a, b = (u, int(v)) if u < v else (int(v), u)
            edges.add((a, b))
            picked += 1
            if picked == kappa:
                break
    return overlay_from_edges(len(sample), edges)


def assign_capacities(graph: OverlayGraph, low: int, high: int, seed: int) -> OverlayGraph:
    """Draw each node's capacity uniformly from {low, ..., high}.

    ``low == high`` assigns the constant value to every node.
    """
    if low < 0 or high < low:
        raise ValueError("require 0 <= low <= high")
    rng = np.random.default_rng(seed)
    values = rng.integers(low, high + 1, size=graph.n)
    return dataclasses.replace(graph, capacity=tuple(int(x) for x in values))


def assign_demands(graph: OverlayGraph, value: int) -> OverlayGraph:
    """Set every node's demand to the same value."""
    if value < 0:
        raise ValueError("demand must be non-negative")
    return dataclasses.replace(graph, demand=(value,) * graph.n)


# ---------------------------------------------------------------------------
# instance files


def format_instance(graph: OverlayGraph) -> str:
    lines = [f"p2p {graph.n} {graph.num_edges}"]
    for u in range(graph.n):
        lines.append(f"node {u} {graph.capacity[u]} {graph.demand[u]}")
    for u, v in graph.edges():
        lines.append(f"edge {u} {v}")
    return "\n".join(lines) + "\n"


def write_instance(graph: OverlayGraph, path: str | Path) -> None:
    Path(path).write_text(format_instance(graph))


def parse_instance(text: str) -> OverlayGraph:
    header: tuple[int, int] | None = None
    caps: dict[int, int] = {}
    dems: dict[int, int] = {}
    edges: list[tuple[int, int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kind = parts[0]
        if kind == "p2p":
            if header is not None:
                raise InstanceFormatError("duplicate header", lineno)
            if len(parts) != 3:
                raise InstanceFormatError("header must be 'p2p <n> <m_edges>'", lineno)
            try:
                header = (int(parts[1]), int(parts[2]))
            except ValueError:
                raise InstanceFormatError("non-integer header field", lineno) from None
            if header[0] < 0 or header[1] < 0:
                raise InstanceFormatError("negative count in header", lineno)
        elif kind == "node":
            if header is None:
                raise InstanceFormatError("node line before header", lineno)
            if len(parts) != 4:
                raise InstanceFormatError("node line must be 'node <id> <capacity> <demand>'", lineno)
            try:
                u, c, d = int(parts[1]), int(parts[2]), int(parts[3])
            except ValueError:
                raise InstanceFormatError("non-integer node field", lineno) from None
            if not 0 <= u < header[0]:
                raise InstanceFormatError(f"node id {u} out of range", lineno)
            if u in caps:
                raise InstanceFormatError(f"duplicate node line for {u}", lineno)
            if c < 0:
                raise InstanceFormatError("negative capacity", lineno)
            if d < 0:
                raise InstanceFormatError("negative demand", lineno)
            caps[u], dems[u] = c, d
        elif kind == "edge":
            if header is None:
                raise InstanceFormatError("edge line before header", lineno)
            if len(parts) != 3:
                raise InstanceFormatError("edge line must be 'edge <u> <v>'", lineno)
            try:
                u, v = int(parts[1]), int(parts[2])
            except ValueError:
                raise InstanceFormatError("non-integer edge endpoint", lineno) from None
            if not 0 <= u < header[0] or not 0 <= v < header[0]:
                raise InstanceFormatError(f"edge endpoint out of range: {u} {v}", lineno)
            if u == v:
                raise InstanceFormatError(f"self-loop at node {u}", lineno)
            edges.append((u, v))
        else:
            raise InstanceFormatError(f"unknown record '{kind}'", lineno)
    if header is None:
        raise InstanceFormatError("missing 'p2p' header")
    n, m = header
    if len(caps) != n:
        raise InstanceFormatError(f"expected {n} node lines, found {len(caps)}")
    if len(edges) != m:
        raise InstanceFormatError(f"expected {m} edge lines, found {len(edges)}")
    capacity = [caps[u] for u in range(n)]
    demand = [dems[u] for u in range(n)]
    try:
        return overlay_from_edges(n, edges, capacity, demand)
    except ValueError as exc:
        raise InstanceFormatError(str(exc)) from None


def read_instance(path: str | Path) -> OverlayGraph:
    return parse_instance(Path(path).read_text())
