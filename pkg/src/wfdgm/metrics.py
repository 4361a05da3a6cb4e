"""Connectivity graph, reachability, epidemic diffusion and battery statistics."""

from __future__ import annotations

import itertools
import statistics
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _cc


def _pair(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


@dataclass
class ConnectivityGraph:
    """Undirected contact graph weighted by total co-membership seconds."""

    nodes: list[int]
    edges: dict[tuple[int, int], float] = field(default_factory=dict)

    def weight(self, a: int, b: int) -> float:
        return self.edges.get(_pair(a, b), 0.0)


def accumulate_contact(cg: ConnectivityGraph, a: int, b: int, dt: float) -> ConnectivityGraph:
    if a == b:
        raise ValueError("a contact needs two distinct nodes")
    key = _pair(a, b)
    cg.edges[key] = cg.edges.get(key, 0.0) + dt
    return cg


def accumulate_group(cg: ConnectivityGraph, members: Iterable[int], dt: float) -> ConnectivityGraph:
    """Every pair of a group (owner included) gains ``dt``."""
    if dt <= 0:
        return cg
    for a, b in itertools.combinations(sorted(members), 2):
        key = (a, b)
        cg.edges[key] = cg.edges.get(key, 0.0) + dt
    return cg


def _components(n: int, pairs: Sequence[tuple[int, int]]) -> np.ndarray:
    if pairs:
        rows, cols = zip(*pairs)
    else:
        rows, cols = (), ()
    adj = coo_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n))
    _, labels = _cc(adj, directed=False)
    return labels


@dataclass(frozen=True)
class ComponentReport:
    components: list[tuple[int, list[int]]]  # (size, members), largest first

    @property
    def count(self) -> int:
        return len(self.components)

    @property
    def largest_fraction(self) -> float:
        total = sum(size for size, _ in self.components)
        return self.components[0][0] / total if total else 0.0


def connected_components(cg: ConnectivityGraph, restrict_to: Iterable[int] | None = None) -> ComponentReport:
    """Components over positive-weight edges, optionally on an induced subgraph."""
    nodes = sorted(cg.nodes if restrict_to is None else set(restrict_to))
    index = {v: i for i, v in enumerate(nodes)}
    pairs = [
        (index[a], index[b])
        for (a, b), w in cg.edges.items()
        if w > 0 and a in index and b in index
    ]
    labels = _components(len(nodes), pairs)
    groups: dict[int, list[int]] = {}
    for v, lab in zip(nodes, labels):
        groups.setdefault(int(lab), []).append(v)
    comps = sorted(((len(m), m) for m in groups.values()), key=lambda c: (-c[0], c[1][0]))
    return ComponentReport(comps)


@dataclass
class ReachabilitySamples:
    """Per-pair count of samples in which two nodes shared an instantaneous component."""

    n: int
    sample_period: float = 30.0
    counts: np.ndarray = None
    total_samples: int = 0

    def __post_init__(self):
        if self.counts is None:
            self.counts = np.zeros((self.n, self.n), dtype=np.int32)

    def probabilities(self) -> np.ndarray:
        """Upper-triangle pair probabilities, one entry per unordered pair."""
        iu = np.triu_indices(self.n, k=1)
        if self.total_samples == 0:
            return np.zeros(len(iu[0]))
        return self.counts[iu] / self.total_samples

    def probability(self, a: int, b: int) -> float:
        if a == b:
            raise ValueError("pairs must be distinct")
        if self.total_samples == 0:
            return 0.0
        return float(self.counts[min(a, b), max(a, b)]) / self.total_samples


def sample_reachability(rs: ReachabilitySamples, groups: Iterable[Iterable[int]]) -> ReachabilitySamples:
    """``groups`` are instantaneous memberships (owner + clients); co-members are linked."""
    pairs = []
    for g in groups:
        g = sorted(g)
        pairs.extend((g[0], m) for m in g[1:])
    labels = _components(rs.n, pairs)
    order = np.argsort(labels, kind="stable")
    sorted_labels = labels[order]
    cuts = np.flatnonzero(np.diff(sorted_labels)) + 1
    for comp in np.split(order, cuts):
        if len(comp) > 1:
            comp = np.sort(comp)
            rs.counts[np.ix_(comp, comp)] += 1
    # only the upper triangle is read; the diagonal is never a pair
    rs.total_samples += 1
    return rs


def ccdf(values: Sequence[float]) -> list[tuple[float, float]]:
    """(threshold, fraction of values >= threshold) at each distinct value."""
    v = np.sort(np.asarray(values, dtype=float))
    if len(v) == 0:
        return []
    thresholds = np.unique(v)
    first = np.searchsorted(v, thresholds, side="left")
    fractions = (len(v) - first) / len(v)
    return [(float(t), float(f)) for t, f in zip(thresholds, fractions)]


def ccdf_at(values: Sequence[float], x: float) -> float:
    v = np.asarray(values, dtype=float)
    return float(np.count_nonzero(v >= x)) / len(v) if len(v) else 0.0


class DiffusionState:
    """Epidemic caches. Each cache is a bitmask over message ids (= creator ordinals)."""

    def __init__(self, n: int):
        self.n = n
        self.caches = [1 << i for i in range(n)]
        self.samples: list[tuple[float, float]] = []

    def cache(self, node: int) -> set[int]:
        mask = self.caches[node]
        return {i for i in range(self.n) if mask >> i & 1}

    def mean_fraction(self) -> float:
        return sum(c.bit_count() for c in self.caches) / (self.n * self.n)


def diffusion_on_join(ds: DiffusionState, joiner: int, group_members: Iterable[int]) -> DiffusionState:
    """Bidirectional sync: the joiner and every member end up with the union."""
    nodes = [joiner, *group_members]
    union = 0
    for v in nodes:
        union |= ds.caches[v]
    for v in nodes:
        ds.caches[v] = union
    return ds


def sample_diffusion(ds: DiffusionState, now: float) -> DiffusionState:
    ds.samples.append((now, ds.mean_fraction()))
    return ds


@dataclass(frozen=True)
class BatteryStats:
    mean: float
    median: float
    variance: float


def battery_stats(values: Sequence[float]) -> BatteryStats:
    if not values:
        raise ValueError("battery statistics need at least one value")
    vals = [float(v) for v in values]
    return BatteryStats(statistics.fmean(vals), statistics.median(vals), statistics.pvariance(vals))
