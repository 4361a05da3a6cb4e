"""Suitability and stability indices used to rank group-owner candidates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .domain import Blacklist, ServiceRecord

WEIGHT_TOLERANCE = 1e-9


@dataclass(frozen=True)
class SuitabilityWeights:
    resources: float = 0.25
    peers: float = 0.25
    capacity: float = 0.25
    stability: float = 0.25

    def __post_init__(self):
        ws = self.as_tuple()
        if any(w < 0 for w in ws):
            raise ValueError("suitability weights must be non-negative")
        if abs(sum(ws) - 1.0) > WEIGHT_TOLERANCE:
            raise ValueError(f"suitability weights must sum to 1, got {sum(ws)!r}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.resources, self.peers, self.capacity, self.stability)


@dataclass(frozen=True)
class NormalizationParams:
    pp_max: float = 15.0
    c_max: float = 15.0

    def __post_init__(self):
        if self.pp_max <= 0 or self.c_max <= 0:
            raise ValueError("normalization maxima must be positive")


@dataclass(frozen=True)
class ContextSnapshot:
    r: float  # battery fraction
    pp: int  # peers in proximity
    c: int  # remaining acceptable connections
    st: float


def suitability(cs: ContextSnapshot, w: SuitabilityWeights, norm: NormalizationParams) -> float:
    value = (
        w.resources * cs.r
        + w.peers * min(cs.pp / norm.pp_max, 1.0)
        + w.capacity * min(cs.c / norm.c_max, 1.0)
        + w.stability * cs.st
    )
    # guards against 1.0000000000000002 from the weighted sum
    return min(max(value, 0.0), 1.0)


def jaccard(a: Iterable[int], b: Iterable[int]) -> float:
    a, b = set(a), set(b)
    union = a | b
    if not union:
        return 1.0
    return len(a & b) / len(union)


@dataclass
class StabilityState:
    st_prev: float = 1.0
    jaccard_sum: float = 0.0
    jaccard_count: int = 0
    prev_neighbors: frozenset[int] = field(default_factory=frozenset)
    w_prev: float = 0.4
    w_jaccard: float = 0.6

    def __post_init__(self):
        if self.w_prev < 0 or self.w_jaccard < 0 or abs(self.w_prev + self.w_jaccard - 1.0) > WEIGHT_TOLERANCE:
            raise ValueError("stability weights must be non-negative and sum to 1")

    @property
    def mean_jaccard(self) -> float:
        if self.jaccard_count == 0:
            return 1.0
        return self.jaccard_sum / self.jaccard_count

    def fold(self, j: float, current: Iterable[int] | None = None) -> None:
        self.jaccard_sum += j
        self.jaccard_count += 1
        if current is not None:
            self.prev_neighbors = frozenset(current)


def on_neighbors_changed(ss: StabilityState, current: Iterable[int]) -> StabilityState:
    current = frozenset(current)
    ss.fold(jaccard(ss.prev_neighbors, current), current)
    return ss


def update_stability(ss: StabilityState) -> tuple[StabilityState, float]:
    st = ss.st_prev * ss.w_prev + ss.mean_jaccard * ss.w_jaccard
    st = min(max(st, 0.0), 1.0)
    ss.st_prev = st
    ss.jaccard_sum = 0.0
    ss.jaccard_count = 0
    return ss, st


def best_candidate(
    records: Sequence[ServiceRecord], me: ServiceRecord, bl: Blacklist, now: float
) -> int:
    """Most suitable non-blacklisted owner among ``records`` and ``me``.

    Ties go to the higher ordinal so the answer does not depend on input order.
    """
    best = (me.suitability, me.node)
    for rec in records:
        if rec.node == me.node or rec.credentials is None or bl.is_blocked(rec.node, now):
            continue
        key = (rec.suitability, rec.node)
        if key > best:
            best = key
    return best[1]


def majority(n_members: int) -> int:
    """Positive visibility answers needed to merge a group with ``n_members`` clients."""
    return math.ceil((n_members + 1) / 2)
