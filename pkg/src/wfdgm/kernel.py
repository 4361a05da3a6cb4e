"""Deterministic tick-driven simulation kernel.

Each tick runs, in order: mobility, proximity and link-loss detection,
stability bookkeeping, due protocol ticks (node ``k`` acts when
``tick_index % t_d == k % t_d``), battery drain, metric sampling.

Link-layer effects (joins, leaves, message delivery) are applied as soon
as a protocol issues them. Protocol ticks run in ascending ordinal order,
so the effect order is a pure function of the tick index and the ordinals.
"""

from __future__ import annotations

import gc
import logging
from contextlib import contextmanager
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional

import numpy as np
from scipy.spatial.distance import cdist

from .baseline import boot_baseline
from .battery import ROLE_CLIENT, ROLE_FREE, ROLE_GO, BatteryModelParams, slopes
from .context import NormalizationParams, SuitabilityWeights, update_stability
from .domain import GO_ONLY, MAX_CAPACITY, MIN_CAPACITY, ControlMessage, GroupRecord, MessageKind, Role, ServiceRecord
from .metrics import (
    ConnectivityGraph,
    DiffusionState,
    ReachabilitySamples,
    accumulate_group,
    diffusion_on_join,
    sample_diffusion,
    sample_reachability,
)
from .protocol import MemberEvent, ProtocolParams, boot

log = logging.getLogger(__name__)

PROTOCOLS = ("wfdgm", "baseline")
_ROLE_NAMES = {ROLE_FREE: "free", ROLE_GO: "go", ROLE_CLIENT: "client"}
_ROLE_ENUM = {ROLE_FREE: Role.FREE, ROLE_GO: Role.GROUP_OWNER, ROLE_CLIENT: Role.CLIENT}


@contextmanager
def _gc_paused():
    # long runs allocate millions of acyclic trace records; cyclic GC passes over them dominate runtime
    enabled = gc.isenabled()
    gc.disable()
    try:
        yield
    finally:
        if enabled:
            gc.enable()


class SimConfigError(ValueError):
    pass


class ProtocolViolation(RuntimeError):
    pass


class JoinResult(Enum):
    OK = "ok"
    CAPACITY_FULL = "capacity_full"
    OUT_OF_RANGE = "out_of_range"
    TARGET_NOT_GO = "target_not_go"

    @property
    def ok(self) -> bool:
        return self is JoinResult.OK


@dataclass(frozen=True)
class SimConfig:
    duration: float
    node_count: int
    tick: float = 1.0
    t_d: float = 30.0
    radio_range: float = 100.0
    seed: int = 0
    capacity_range: tuple[int, int] = (MIN_CAPACITY, MAX_CAPACITY)
    reach_period: float = 30.0
    diffusion_period: float = 1800.0
    trace: bool = False
    check_invariants: bool = False

    def validate(self) -> None:
        def multiple(x, of):
            return abs(x / of - round(x / of)) < 1e-9

        if self.tick <= 0:
            raise SimConfigError("tick must be positive")
        if self.duration < 0:
            raise SimConfigError("duration must be non-negative")
        if self.tick > self.t_d:
            raise SimConfigError("tick must not exceed t_d")
        for name in ("duration", "t_d", "reach_period", "diffusion_period"):
            if not multiple(getattr(self, name), self.tick):
                raise SimConfigError(f"{name} must be a multiple of tick")
        if self.node_count < 0:
            raise SimConfigError("node_count must be non-negative")
        if self.radio_range <= 0:
            raise SimConfigError("radio_range must be positive")
        lo, hi = self.capacity_range
        if not MIN_CAPACITY <= lo <= hi <= MAX_CAPACITY:
            raise SimConfigError(f"capacity_range must lie within [{MIN_CAPACITY}, {MAX_CAPACITY}]")


def _fmt(v) -> str:
    if isinstance(v, (list, tuple, set, frozenset)):
        return " ".join(str(x) for x in sorted(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


class TraceEvent(NamedTuple):
    """One trace record. ``data`` keeps raw values; text is rendered on demand."""

    time: float
    node: int
    kind: str
    data: dict

    @property
    def payload(self) -> str:
        parts = []
        for k, v in self.data.items():
            if isinstance(v, ControlMessage):
                body = v.payload()
                if body:
                    parts.append(body)
            else:
                parts.append(f"{k}={_fmt(v)}")
        return ";".join(parts)

    def row(self) -> list[str]:
        return [f"{self.time:g}", str(self.node), self.kind, self.payload]


@dataclass
class RunResult:
    config: SimConfig
    protocol: str
    capacities: np.ndarray
    diffusion: list[tuple[float, float]]
    graph: ConnectivityGraph
    reach: ReachabilitySamples
    battery: np.ndarray
    death_time: np.ndarray
    trace: list[TraceEvent]
    violations: list[str]
    counters: dict[str, int]

    @property
    def alive(self) -> np.ndarray:
        return np.isnan(self.death_time)


class Link:
    """Handle through which one node's protocol touches the world."""

    __slots__ = ("sim", "me")

    def __init__(self, sim: "Simulator", me: int):
        self.sim = sim
        self.me = me

    @property
    def now(self) -> float:
        return self.sim.now

    @property
    def rng(self) -> np.random.Generator:
        return self.sim.proto_rng

    def neighbors(self) -> list[ServiceRecord]:
        return self.sim.neighbors_of(self.me)

    def in_range(self, other: Optional[int]) -> bool:
        return other is not None and bool(self.sim.adj[self.me, other])

    def connect(self, target: int, cause: str = "") -> JoinResult:
        return self.sim.connect(self.me, target, cause)

    def leave(self, cause: str = "") -> None:
        self.sim.leave(self.me, cause)

    def disband(self, notified, cause: str = "") -> None:
        self.sim.disband(self.me, notified, cause)

    def send(self, dest: int, msg: ControlMessage) -> None:
        self.sim.send(self.me, dest, msg)

    def trace(self, kind: str, **payload) -> None:
        if self.sim.tracing:
            self.sim.emit(self.me, kind, **payload)


class Simulator:
    def __init__(
        self,
        cfg: SimConfig,
        protocol: str,
        scenario,
        params: ProtocolParams | None = None,
        battery_params: BatteryModelParams | None = None,
    ):
        cfg.validate()
        if protocol not in PROTOCOLS:
            raise SimConfigError(f"unknown protocol {protocol!r}")
        self.cfg = cfg
        self.protocol = protocol
        self.params = params or ProtocolParams(t_d=cfg.t_d)
        if abs(self.params.t_d - cfg.t_d) > 1e-9:
            raise SimConfigError("protocol t_d and simulation t_d disagree")
        self.battery_params = battery_params or BatteryModelParams()
        self.tracing = cfg.trace

        n = cfg.node_count
        self.n = n
        mob_ss, cap_ss, proto_ss = np.random.SeedSequence(cfg.seed).spawn(3)
        self.model = scenario.build(n, np.random.default_rng(mob_ss))
        lo, hi = cfg.capacity_range
        self.capacities = np.random.default_rng(cap_ss).integers(lo, hi + 1, size=n)
        self.proto_rng = np.random.default_rng(proto_ss)

        if protocol == "wfdgm":
            self.nodes = [boot(i, self.params, int(self.capacities[i])) for i in range(n)]
        else:
            self.nodes = [boot_baseline(i, int(self.capacities[i])) for i in range(n)]
        self.links = [Link(self, i) for i in range(n)]

        self.now = 0.0
        self.alive = np.ones(n, dtype=bool)
        self.battery = np.ones(n, dtype=float)
        self.death_time = np.full(n, np.nan)
        self.role_code = np.full(n, ROLE_FREE, dtype=np.int8)
        self.n_members = np.zeros(n, dtype=np.int64)
        self.go_of = np.full(n, -1, dtype=np.int64)
        self.st = np.ones(n, dtype=float)
        self.adj = np.zeros((n, n), dtype=bool)
        self._prev_adj: Optional[np.ndarray] = None
        self._static_adj: Optional[np.ndarray] = None
        self._snap = None
        self._records: Optional[list] = None

        self.graph = ConnectivityGraph(nodes=list(range(n)))
        self._since = {i: 0.0 for i in range(n)}
        self.diffusion = DiffusionState(n)
        self.reach = ReachabilitySamples(n, sample_period=cfg.reach_period)
        self.trace_events: list[TraceEvent] = []
        self.violations: list[str] = []
        self.counters = {"joins": 0, "rejects": 0, "leaves": 0, "disbands": 0, "link_losses": 0, "deaths": 0}

    # ------------------------------------------------------------------
    # tracing

    def emit(self, node: int, kind: str, **data) -> None:
        self.trace_events.append(TraceEvent(self.now, node, kind, data))

    def _role_of(self, i: int) -> int:
        if self.go_of[i] >= 0:
            return ROLE_CLIENT
        return ROLE_GO if self.n_members[i] > 0 else ROLE_FREE

    def _set_role(self, i: int, cause: str) -> None:
        new = self._role_of(i)
        old = int(self.role_code[i])
        self.role_code[i] = new
        if self.tracing and new != old:
            self.emit(i, "role", old=_ROLE_NAMES[old], new=_ROLE_NAMES[new], cause=cause)

    # ------------------------------------------------------------------
    # discovery

    def _compute_adjacency(self, positions: np.ndarray) -> np.ndarray:
        if self.model.is_static and self._static_adj is not None:
            adj = self._static_adj.copy()
        else:
            # closed ball: distance == range counts as in range
            adj = cdist(positions, positions, "sqeuclidean") <= self.cfg.radio_range**2
            np.fill_diagonal(adj, False)
            if self.model.is_static:
                self._static_adj = adj.copy()
        dead = ~self.alive
        if dead.any():
            adj[dead, :] = False
            adj[:, dead] = False
        return adj

    def _update_proximity(self, positions: np.ndarray) -> None:
        adj = self._compute_adjacency(positions)
        self.adj = adj
        clients = np.flatnonzero(self.go_of >= 0)
        if clients.size:
            lost = clients[~adj[clients, self.go_of[clients]]]
            for c in lost:
                if self.go_of[c] >= 0:
                    self._release(int(c), "out_of_range", notify_go=True)
        if self.protocol == "wfdgm":
            self._fold_neighbor_changes(adj)

    def _fold_neighbor_changes(self, adj: np.ndarray) -> None:
        prev = self._prev_adj
        self._prev_adj = adj
        if prev is None:
            # first discovery round seeds the reference set, it is not a change
            for i in range(self.n):
                self.nodes[i].stability.prev_neighbors = frozenset(np.flatnonzero(adj[i]).tolist())
            return
        changed = np.flatnonzero((adj != prev).any(axis=1) & self.alive)
        if not changed.size:
            return
        inter = (adj[changed] & prev[changed]).sum(axis=1)
        union = (adj[changed] | prev[changed]).sum(axis=1)
        for i, a, u in zip(changed.tolist(), inter.tolist(), union.tolist()):
            ss = self.nodes[i].stability
            ss.fold(a / u if u else 1.0)
            ss.prev_neighbors = frozenset(np.flatnonzero(adj[i]).tolist())

    def _stability_updates(self, k: int) -> None:
        period = int(round(self.params.stability_period / self.cfg.tick))
        due = np.flatnonzero(self.alive & ((k - np.arange(self.n)) % period == 0))
        for i in due.tolist():
            _, st = update_stability(self.nodes[i].stability)
            self.st[i] = st

    def _snapshot(self) -> None:
        """Freeze what discovery reports this tick: state as of the previous tick's end."""
        w: SuitabilityWeights = self.params.weights
        norm: NormalizationParams = self.params.norm
        pp = self.adj.sum(axis=1)
        c = np.where(self.go_of >= 0, self.capacities, self.capacities - self.n_members)
        s = (
            w.resources * self.battery
            + w.peers * np.minimum(pp / norm.pp_max, 1.0)
            + w.capacity * np.minimum(c / norm.c_max, 1.0)
            + w.stability * self.st
        )
        s = np.clip(s, 0.0, 1.0)
        self._snap = (self.role_code.copy(), s.tolist(), [node.group for node in self.nodes], self.n_members.tolist())
        self._records = None

    def neighbors_of(self, i: int) -> list[ServiceRecord]:
        recs = self._records
        if recs is None:
            recs = self._records = [None] * self.n
        out = []
        for j in np.flatnonzero(self.adj[i]).tolist():
            rec = recs[j]
            if rec is None:
                rec = recs[j] = self._make_record(j)
            out.append(rec)
        return out

    def _make_record(self, j: int) -> ServiceRecord:
        roles, s, groups, members = self._snap
        g = groups[j]
        return ServiceRecord(
            node=j,
            role=_ROLE_ENUM[int(roles[j])],
            suitability=s[j],
            group_id=g.group_id if g is not None else None,
            credentials=g.credentials if g is not None else None,
            group_size=members[j],
        )

    # ------------------------------------------------------------------
    # link layer

    def _flush(self, g: int) -> None:
        since = self._since.get(g, self.now)
        group = self.nodes[g].group
        if group is not None and group.members and self.now > since:
            accumulate_group(self.graph, [g, *group.members], self.now - since)
        self._since[g] = self.now

    def _new_group(self, i: int) -> None:
        node = self.nodes[i]
        node.group = GroupRecord.create(i, int(self.capacities[i]))
        self._since[i] = self.now

    def connect(self, i: int, g: int, cause: str = "") -> JoinResult:
        node = self.nodes[i]
        if node.current_go is not None or (node.group is not None and node.group.members):
            raise ProtocolViolation(f"node {i} must be a free owner to connect")
        target = self.nodes[g]
        if g == i or not self.alive[g] or not self.adj[i, g]:
            result = JoinResult.OUT_OF_RANGE
        elif target.current_go is not None or target.group is None:
            result = JoinResult.TARGET_NOT_GO
        elif target.group.is_full:
            result = JoinResult.CAPACITY_FULL
        else:
            result = JoinResult.OK
        if not result.ok:
            self.counters["rejects"] += 1
            if self.tracing:
                self.emit(i, "reject", target=g, reason=result.value, cause=cause)
            return result

        self._flush(g)
        existing = [g, *sorted(target.group.members)]
        node.group = None
        target.group.add(i)
        node.current_go = g
        self.go_of[i] = g
        self.n_members[i] = 0
        self.n_members[g] += 1
        diffusion_on_join(self.diffusion, i, existing)
        self.counters["joins"] += 1
        if self.tracing:
            self.emit(
                i, "join", target=g, size=len(target.group.members), capacity=target.group.capacity, cause=cause
            )
        self._set_role(i, cause)
        self._set_role(g, "client_joined")
        node.on_joined(g)
        target.on_member_event(MemberEvent.JOINED, i, self.now, self.links[g])
        return result

    def _release(self, i: int, cause: str, notify_go: bool, new_group: bool = True) -> None:
        """Detach client ``i`` from its owner."""
        node = self.nodes[i]
        g = node.current_go
        owner = self.nodes[g]
        self._flush(g)
        owner.group.remove(i)
        self.n_members[g] -= 1
        node.current_go = None
        self.go_of[i] = -1
        if new_group:
            self._new_group(i)
        if self.tracing:
            self.emit(i, "leave", go=g, cause=cause)
        self._set_role(i, cause)
        self._set_role(g, "client_left")
        if cause in ("out_of_range", "owner_dead", "disband"):
            self.counters["link_losses"] += 1
            node.on_link_lost(self.now, self.links[i])
        else:
            self.counters["leaves"] += 1
            node.on_left()
        if notify_go and self.alive[g]:
            owner.on_member_event(MemberEvent.LEFT, i, self.now, self.links[g])

    def leave(self, i: int, cause: str = "") -> None:
        if self.nodes[i].current_go is None:
            raise ProtocolViolation(f"node {i} is not a client")
        self._release(i, cause, notify_go=True)

    def disband(self, i: int, notified, cause: str = "") -> None:
        node = self.nodes[i]
        if node.current_go is not None or node.group is None:
            raise ProtocolViolation(f"node {i} owns no group")
        self._flush(i)
        for m in sorted(node.group.members):
            self._release(m, "disband", notify_go=False)
        self.counters["disbands"] += 1
        if self.tracing:
            self.emit(i, "disband", members=tuple(notified), cause=cause)
        self._new_group(i)
        self._set_role(i, cause)

    def send(self, src: int, dest: int, msg: ControlMessage) -> None:
        sender = self.nodes[src]
        if msg.kind in GO_ONLY and sender.current_go is not None:
            raise ProtocolViolation(f"{msg.kind.value} sent by client {src}")
        if msg.kind is MessageKind.VISIBILITY_RESP and sender.current_go is None:
            raise ProtocolViolation(f"VISIBILITY_RESP sent by owner {src}")
        if self.tracing:
            self.emit(src, "send", dest=dest, msg=msg.kind.value, body=msg)
        if self.alive[dest]:
            self.nodes[dest].on_message(msg, self.now, self.links[dest])

    def _kill(self, i: int) -> None:
        node = self.nodes[i]
        self.counters["deaths"] += 1
        self.death_time[i] = self.now
        if node.current_go is not None:
            self._release(i, "death", notify_go=True, new_group=False)
        elif node.group is not None:
            self._flush(i)
            for m in sorted(node.group.members):
                self._release(m, "owner_dead", notify_go=False)
        node.group = None
        if self.tracing:
            self.emit(i, "death")
        self.alive[i] = False
        self.role_code[i] = ROLE_FREE
        self.adj[i, :] = False
        self.adj[:, i] = False

    # ------------------------------------------------------------------
    # main loop

    def _drain(self, dt: float) -> None:
        client_size = np.where(self.go_of >= 0, self.n_members[np.maximum(self.go_of, 0)], 0)
        rate = slopes(self.role_code, self.n_members, client_size, self.battery_params)
        live = self.alive
        self.battery[live] = np.maximum(0.0, self.battery[live] + rate[live] * dt / 3600.0)
        for i in np.flatnonzero(live & (self.battery <= 0.0)).tolist():
            self._kill(i)

    def _groups(self) -> list[list[int]]:
        out = []
        for g in np.flatnonzero(self.alive & (self.n_members > 0)).tolist():
            out.append([g, *sorted(self.nodes[g].group.members)])
        return out

    def _check(self) -> None:
        clients = 0
        for i, node in enumerate(self.nodes):
            if not self.alive[i]:
                continue
            if node.current_go is not None:
                clients += 1
                if node.group is not None:
                    self.violations.append(f"t={self.now:g} node {i} is client and owner")
                go = self.nodes[node.current_go].group
                if go is None or i not in go.members:
                    self.violations.append(f"t={self.now:g} node {i} missing from its owner's group")
            elif node.group is None:
                self.violations.append(f"t={self.now:g} node {i} has no group")
            elif len(node.group.members) > node.group.capacity:
                self.violations.append(f"t={self.now:g} group of {i} over capacity")
        total = int(self.n_members[self.alive].sum())
        if total != clients:
            self.violations.append(f"t={self.now:g} membership not conserved: {total} != {clients}")

    def run(self) -> RunResult:
        with _gc_paused():
            return self._run()

    def _run(self) -> RunResult:
        cfg = self.cfg
        steps = int(round(cfg.duration / cfg.tick))
        td = int(round(cfg.t_d / cfg.tick))
        reach_every = int(round(cfg.reach_period / cfg.tick))
        diff_every = int(round(cfg.diffusion_period / cfg.tick))
        phase = np.arange(self.n) % td
        positions = self.model.positions
        for k in range(steps):
            self.now = k * cfg.tick
            if k > 0 and not self.model.is_static:
                positions = self.model.step(self.now - cfg.tick, cfg.tick)
            self._update_proximity(positions)
            if self.protocol == "wfdgm":
                self._stability_updates(k)
            self._snapshot()
            for i in np.flatnonzero(self.alive & (phase == k % td)).tolist():
                if not self.alive[i]:
                    continue
                node = self.nodes[i]
                node.battery.level = float(self.battery[i])
                node.tick(self.now, self.links[i])
            self.now = (k + 1) * cfg.tick
            self._drain(cfg.tick)
            if (k + 1) % reach_every == 0:
                sample_reachability(self.reach, self._groups())
            if (k + 1) % diff_every == 0:
                sample_diffusion(self.diffusion, self.now)
            if cfg.check_invariants:
                self._check()
        self.now = steps * cfg.tick
        for g in range(self.n):
            if self.nodes[g].group is not None:
                self._flush(g)
        return RunResult(
            config=cfg,
            protocol=self.protocol,
            capacities=self.capacities.copy(),
            diffusion=list(self.diffusion.samples),
            graph=self.graph,
            reach=self.reach,
            battery=self.battery.copy(),
            death_time=self.death_time.copy(),
            trace=self.trace_events,
            violations=self.violations,
            counters=dict(self.counters),
        )


def run(cfg: SimConfig, protocol: str, scenario, params=None, battery_params=None) -> RunResult:
    return Simulator(cfg, protocol, scenario, params, battery_params).run()
