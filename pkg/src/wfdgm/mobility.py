"""Node position generators: static seating grid, POI walk over a lattice
map, and a three-phase working-day schedule."""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class MobilityConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# static grid
# --------------------------------------------------------------------------


def static_grid(n: int, rows: int, cols: int, spacing: float) -> np.ndarray:
    """Node ``k`` sits at ``(k mod cols, k div cols) * spacing``."""
    if rows * cols < n:
        raise MobilityConfigError(f"grid {rows}x{cols} cannot seat {n} nodes")
    k = np.arange(n)
    return np.column_stack([(k % cols) * spacing, (k // cols) * spacing]).astype(float)


class StaticModel:
    is_static = True
    max_speed = 0.0

    def __init__(self, positions: np.ndarray):
        self.positions = np.asarray(positions, dtype=float)
        lo = self.positions.min(axis=0) if len(self.positions) else np.zeros(2)
        hi = self.positions.max(axis=0) if len(self.positions) else np.zeros(2)
        self.bbox = (float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))

    def step(self, now: float, dt: float) -> np.ndarray:
        return self.positions


# --------------------------------------------------------------------------
# map-based POI walk
# --------------------------------------------------------------------------


@dataclass
class GridMap:
    width: float
    height: float
    vertices: np.ndarray  # (V, 2)
    adjacency: list[list[tuple[int, float]]]
    pois: list[int]
    _paths: dict = field(default_factory=dict, repr=False)

    @classmethod
    def lattice(
        cls,
        width: float,
        height: float,
        spacing: float,
        n_pois: int,
        rng: np.random.Generator,
        drop_fraction: float = 0.0,
    ) -> "GridMap":
        """Uniform lattice; POIs sampled without replacement over its vertices.

        ``drop_fraction`` removes that share of segments at random, skipping
        any removal that would disconnect the lattice.
        """
        nx = int(math.floor(width / spacing)) + 1
        ny = int(math.floor(height / spacing)) + 1
        if nx * ny < n_pois:
            raise MobilityConfigError(f"{n_pois} POIs do not fit on a {nx}x{ny} lattice")
        xs, ys = np.meshgrid(np.arange(nx) * spacing, np.arange(ny) * spacing)
        vertices = np.column_stack([xs.ravel(), ys.ravel()]).astype(float)
        edges = []
        for j in range(ny):
            for i in range(nx):
                v = j * nx + i
                if i + 1 < nx:
                    edges.append((v, v + 1))
                if j + 1 < ny:
                    edges.append((v, v + nx))
        adjacency: list[list[tuple[int, float]]] = [[] for _ in range(len(vertices))]
        for a, b in edges:
            adjacency[a].append((b, spacing))
            adjacency[b].append((a, spacing))
        gmap = cls(width, height, vertices, adjacency, [])
        if drop_fraction > 0:
            order = rng.permutation(len(edges))
            for idx in order[: int(len(edges) * drop_fraction)]:
                a, b = edges[idx]
                gmap._unlink(a, b)
                if not gmap._reachable(a, b):
                    gmap._link(a, b, spacing)
        gmap.pois = sorted(int(v) for v in rng.choice(len(vertices), size=n_pois, replace=False))
        gmap.check_connected()
        return gmap

    def _unlink(self, a, b):
        self.adjacency[a] = [e for e in self.adjacency[a] if e[0] != b]
        self.adjacency[b] = [e for e in self.adjacency[b] if e[0] != a]

    def _link(self, a, b, length):
        self.adjacency[a].append((b, length))
        self.adjacency[b].append((a, length))

    def _reachable(self, a, b) -> bool:
        seen = {a}
        queue = deque([a])
        while queue:
            v = queue.popleft()
            if v == b:
                return True
            for w, _ in self.adjacency[v]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        return False

    def check_connected(self) -> None:
        if not self.pois:
            return
        start = self.pois[0]
        seen = {start}
        queue = deque([start])
        while queue:
            v = queue.popleft()
            for w, _ in self.adjacency[v]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        missing = [p for p in self.pois if p not in seen]
        if missing:
            raise MobilityConfigError(f"POIs unreachable from POI {start}: {missing[:5]}")

    def shortest_path(self, src: int, dst: int) -> tuple[float, list[int]]:
        """Dijkstra over walkable segments; returns (length, vertex sequence)."""
        key = (src, dst)
        if key in self._paths:
            return self._paths[key]
        dist = {src: 0.0}
        prev: dict[int, int] = {}
        heap = [(0.0, src)]
        done = set()
        while heap:
            d, v = heapq.heappop(heap)
            if v in done:
                continue
            if v == dst:
                break
            done.add(v)
            for w, length in self.adjacency[v]:
                nd = d + length
                if nd < dist.get(w, math.inf):
                    dist[w] = nd
                    prev[w] = v
                    heapq.heappush(heap, (nd, w))
        if dst not in dist:
            raise MobilityConfigError(f"no path from {src} to {dst}")
        path = [dst]
        while path[-1] != src:
            path.append(prev[path[-1]])
        path.reverse()
        result = (dist[dst], path)
        self._paths[key] = result
        return result


@dataclass
class WaypointState:
    x: float
    y: float
    vertex: int  # last POI reached
    speed: float = 0.0
    wait_until: float = 0.0
    path: list[tuple[float, float]] = field(default_factory=list)
    target: Optional[int] = None


@dataclass(frozen=True)
class PoiWalkParams:
    speed_min: float = 0.0
    speed_max: float = 1.5
    wait_min: float = 600.0
    wait_max: float = 3600.0


def _advance(ws, budget: float) -> float:
    """Move along ``ws.path`` by at most ``budget`` meters; returns leftover."""
    while ws.path and budget > 0:
        tx, ty = ws.path[0]
        dx, dy = tx - ws.x, ty - ws.y
        d = math.hypot(dx, dy)
        if d <= budget:
            ws.x, ws.y = tx, ty
            ws.path.pop(0)
            budget -= d
        else:
            f = budget / d
            ws.x += dx * f
            ws.y += dy * f
            budget = 0.0
    return budget


def poi_walk_step(
    ws: WaypointState,
    gmap: GridMap,
    now: float,
    dt: float,
    rng: np.random.Generator,
    params: PoiWalkParams = PoiWalkParams(),
) -> WaypointState:
    if now < ws.wait_until:
        return ws
    if not ws.path:
        choices = [p for p in gmap.pois if p != ws.vertex]
        if not choices:
            return ws
        target = choices[int(rng.integers(len(choices)))]
        _, vpath = gmap.shortest_path(ws.vertex, target)
        ws.path = [tuple(gmap.vertices[v]) for v in vpath[1:]]
        ws.target = target
        ws.speed = float(rng.uniform(params.speed_min, params.speed_max))
    _advance(ws, ws.speed * dt)
    if not ws.path and ws.target is not None:
        ws.vertex = ws.target
        ws.target = None
        ws.wait_until = now + dt + float(rng.uniform(params.wait_min, params.wait_max))
    return ws


class PoiWalkModel:
    is_static = False

    def __init__(self, n: int, gmap: GridMap, rng: np.random.Generator, params: PoiWalkParams = PoiWalkParams()):
        self.gmap = gmap
        self.rng = rng
        self.params = params
        self.max_speed = params.speed_max
        self.bbox = (0.0, 0.0, gmap.width, gmap.height)
        self.states = []
        for _ in range(n):
            v = gmap.pois[int(rng.integers(len(gmap.pois)))]
            x, y = gmap.vertices[v]
            # staggered first departure so the crowd does not move in lockstep
            wait = float(rng.uniform(0.0, params.wait_max))
            self.states.append(WaypointState(float(x), float(y), v, wait_until=wait))
        self.positions = np.array([[s.x, s.y] for s in self.states], dtype=float).reshape(n, 2)

    def step(self, now: float, dt: float) -> np.ndarray:
        for i, s in enumerate(self.states):
            if now < s.wait_until:
                continue
            poi_walk_step(s, self.gmap, now, dt, self.rng, self.params)
            self.positions[i, 0] = s.x
            self.positions[i, 1] = s.y
        return self.positions


# --------------------------------------------------------------------------
# simplified working day
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Schedule:
    home: tuple[float, float]
    office: tuple[float, float]
    evening: tuple[float, float]
    leave_home: float  # seconds into the day
    leave_work: float
    leave_evening: float
    speed: float
    day_length: float = 86400.0

    def target(self, now: float) -> tuple[float, float]:
        t = now % self.day_length
        if t < self.leave_home:
            return self.home
        if t < self.leave_work:
            return self.office
        if t < self.leave_evening:
            return self.evening
        return self.home


@dataclass
class DayState:
    x: float
    y: float


def working_day_step(ws: DayState, schedule: Schedule, now: float, dt: float, rng=None) -> DayState:
    """Straight-line travel toward the current phase's anchor, snapping on arrival."""
    tx, ty = schedule.target(now)
    dx, dy = tx - ws.x, ty - ws.y
    d = math.hypot(dx, dy)
    step = schedule.speed * dt
    if d <= step:
        ws.x, ws.y = tx, ty
    else:
        ws.x += dx * step / d
        ws.y += dy * step / d
    return ws


@dataclass(frozen=True)
class WorkingDayParams:
    width: float = 2000.0
    height: float = 2000.0
    n_offices: int = 8
    n_evening_spots: int = 6
    spot_radius: float = 20.0
    phase_hours: tuple[float, float, float] = (1.0, 4.5, 6.5)
    jitter_minutes: float = 30.0
    day_hours: float = 8.0
    walk_speed: tuple[float, float] = (0.8, 1.5)
    transport_speed: tuple[float, float] = (7.0, 12.0)
    transport_share: float = 0.5


class WorkingDayModel:
    is_static = False

    def __init__(self, n: int, rng: np.random.Generator, params: WorkingDayParams = WorkingDayParams()):
        p = params
        self.params = p
        self.bbox = (0.0, 0.0, p.width, p.height)
        self.max_speed = max(p.walk_speed[1], p.transport_speed[1])
        size = np.array([p.width, p.height])
        offices = rng.uniform(0, 1, size=(p.n_offices, 2)) * size
        spots = rng.uniform(0, 1, size=(p.n_evening_spots, 2)) * size
        day = p.day_hours * 3600.0
        jitter = p.jitter_minutes * 60.0
        self.schedules: list[Schedule] = []
        for _ in range(n):
            home = tuple(rng.uniform(0, 1, size=2) * size)
            office = self._scatter(offices[rng.integers(p.n_offices)], rng, size)
            evening = self._scatter(spots[rng.integers(p.n_evening_spots)], rng, size)
            h1, h2, h3 = (h * 3600.0 + rng.uniform(-jitter, jitter) for h in p.phase_hours)
            if rng.uniform() < p.transport_share:
                speed = rng.uniform(*p.transport_speed)
            else:
                speed = rng.uniform(*p.walk_speed)
            self.schedules.append(
                Schedule(
                    home=(float(home[0]), float(home[1])),
                    office=office,
                    evening=evening,
                    leave_home=float(np.clip(h1, 0.0, day)),
                    leave_work=float(np.clip(h2, 0.0, day)),
                    leave_evening=float(np.clip(h3, 0.0, day)),
                    speed=float(speed),
                    day_length=day,
                )
            )
        self.day_length = day
        # column views of the schedules so step() runs vectorised
        sc = self.schedules
        self._home = np.array([s.home for s in sc], dtype=float).reshape(n, 2)
        self._office = np.array([s.office for s in sc], dtype=float).reshape(n, 2)
        self._evening = np.array([s.evening for s in sc], dtype=float).reshape(n, 2)
        self._bounds = np.array([(s.leave_home, s.leave_work, s.leave_evening) for s in sc], dtype=float).reshape(n, 3)
        self._speed = np.array([s.speed for s in sc], dtype=float)
        self.positions = self._home.copy()

    def _scatter(self, anchor, rng, size):
        r = self.params.spot_radius * math.sqrt(rng.uniform())
        a = rng.uniform(0, 2 * math.pi)
        x = float(np.clip(anchor[0] + r * math.cos(a), 0, size[0]))
        y = float(np.clip(anchor[1] + r * math.sin(a), 0, size[1]))
        return (x, y)

    def targets(self, now: float) -> np.ndarray:
        t = now % self.day_length
        b = self._bounds
        return np.where(
            (t < b[:, 0])[:, None],
            self._home,
            np.where((t < b[:, 1])[:, None], self._office, np.where((t < b[:, 2])[:, None], self._evening, self._home)),
        )

    def step(self, now: float, dt: float) -> np.ndarray:
        """Vectorised :func:`working_day_step` over all nodes."""
        tgt = self.targets(now)
        delta = tgt - self.positions
        d = np.hypot(delta[:, 0], delta[:, 1])
        step = self._speed * dt
        arrive = d <= step
        with np.errstate(divide="ignore", invalid="ignore"):
            moved = self.positions + delta * step[:, None] / d[:, None]
        self.positions = np.where(arrive[:, None], tgt, moved)
        return self.positions
