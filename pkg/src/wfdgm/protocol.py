"""Per-node WFD-GM state machine.

Every node boots as the owner of an empty group and, every ``t_d`` seconds,
classifies itself into one of four situations:

* ``GO1`` owner without clients: elect the best owner around and join it;
* ``GO2`` owner with clients and battery below ``res_th``: say goodbye and disband;
* ``GO3`` owner with clients that sees other owners: try to merge into the best one;
* ``C1``  client: leave the group with probability ``p0 / |G_M|`` (traveling).

All side effects go through the link-layer handle supplied by the kernel.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .battery import BatteryState
from .context import (
    ContextSnapshot,
    NormalizationParams,
    StabilityState,
    SuitabilityWeights,
    best_candidate,
    majority,
    suitability,
)
from .domain import Blacklist, ControlMessage, GroupRecord, MessageKind, Role, ServiceRecord


class State(Enum):
    GO1 = "GO1"
    GO2 = "GO2"
    GO3 = "GO3"
    C1 = "C1"


class MemberEvent(Enum):
    JOINED = "joined"
    LEFT = "left"


@dataclass(frozen=True)
class ProtocolParams:
    t_d: float = 30.0
    res_th: float = 0.1
    t_b: float = 60.0
    t_b_travel: float = 60.0
    p0: float = 0.5
    weights: SuitabilityWeights = SuitabilityWeights()
    norm: NormalizationParams = NormalizationParams()
    w_st: tuple[float, float] = (0.4, 0.6)
    t_st: Optional[float] = None  # defaults to t_d

    def __post_init__(self):
        if self.t_d <= 0:
            raise ValueError("t_d must be positive")
        if not 0 < self.res_th < 1:
            raise ValueError("res_th must lie in (0, 1)")
        if not 0 < self.p0 <= 1:
            raise ValueError("p0 must lie in (0, 1]")
        if self.t_b <= 0 or self.t_b_travel <= 0:
            raise ValueError("blacklist holds must be positive")
        if self.t_st is not None and self.t_st <= 0:
            raise ValueError("t_st must be positive")

    @property
    def stability_period(self) -> float:
        return self.t_st if self.t_st is not None else self.t_d


def travel_probability(p0: float, group_size: int) -> float:
    """Inverse proportionality to group cardinality; a stale empty view counts as 1."""
    return min(1.0, p0 / max(1, group_size))


@dataclass
class WfdgmNode:
    me: int
    capacity: int
    params: ProtocolParams = field(default_factory=ProtocolParams)
    group: Optional[GroupRecord] = None
    current_go: Optional[int] = None
    members_view: set[int] = field(default_factory=set)
    bl: Blacklist = field(default_factory=Blacklist)
    neighbors: list[ServiceRecord] = field(default_factory=list)
    go_neighbors: list[ServiceRecord] = field(default_factory=list)
    stability: StabilityState = field(default_factory=StabilityState)
    battery: BatteryState = field(default_factory=BatteryState)
    _votes: Optional[dict[int, bool]] = field(default=None, repr=False)
    _disbanding: bool = field(default=False, repr=False)

    # -- derived views -------------------------------------------------

    @property
    def role(self) -> Role:
        if self.current_go is not None:
            return Role.CLIENT
        if self.group is not None and self.group.members:
            return Role.GROUP_OWNER
        return Role.FREE

    @property
    def state(self) -> Optional[State]:
        return classify_state(self)

    def context(self) -> ContextSnapshot:
        used = len(self.group.members) if self.group is not None else 0
        return ContextSnapshot(
            r=self.battery.level,
            pp=len(self.neighbors),
            c=max(0, self.capacity - used),
            st=self.stability.st_prev,
        )

    def record(self) -> ServiceRecord:
        owns = self.group is not None
        return ServiceRecord(
            node=self.me,
            role=self.role,
            suitability=suitability(self.context(), self.params.weights, self.params.norm),
            group_id=self.group.group_id if owns else None,
            credentials=self.group.credentials if owns else None,
            group_size=len(self.group.members) if owns else 0,
        )

    # -- main loop -----------------------------------------------------

    def tick(self, now: float, env) -> None:
        self.neighbors = env.neighbors()
        self.go_neighbors = [r for r in self.neighbors if r.credentials is not None]
        state = classify_state(self)
        env.trace(
            "decide",
            state=state.value if state else "none",
            battery=self.battery.level,
            members=len(self.group.members) if self.group is not None else 0,
        )
        if state is State.GO1:
            self.go_election(now, env)
        elif state is State.GO2:
            self.disband_group(now, env)
        elif state is State.GO3:
            self.eval_merge(now, env)
        elif state is State.C1:
            self.eval_traveling(now, env)

    def go_election(self, now: float, env) -> None:
        winner = best_candidate(self.go_neighbors, self.record(), self.bl, now)
        if winner == self.me:
            return
        env.connect(winner, cause="election")

    def disband_group(self, now: float, env) -> None:
        members = sorted(self.group.members)
        self._disbanding = True
        try:
            for m in members:
                env.send(m, ControlMessage.group_bye(self.me))
            env.disband(members, cause="low_battery")
        finally:
            self._disbanding = False

    def eval_merge(self, now: float, env) -> None:
        g_best = best_candidate(self.go_neighbors, self.record(), self.bl, now)
        if g_best == self.me:
            return
        members = sorted(self.group.members)
        self._votes = {}
        try:
            for m in members:
                env.send(m, ControlMessage.visibility_req(self.me, g_best))
            positive = sum(1 for m in members if self._votes.get(m))
        finally:
            self._votes = None
        if positive < majority(len(members)):
            return
        self._disbanding = True
        try:
            for m in members:
                env.send(m, ControlMessage.merge_warning(self.me, g_best))
            env.disband(members, cause="merge")
        finally:
            self._disbanding = False
        env.connect(g_best, cause="merge")

    def eval_traveling(self, now: float, env) -> None:
        p_t = travel_probability(self.params.p0, len(self.members_view))
        if env.rng.random() <= p_t:
            go = self.current_go
            self._blacklist(go, now, self.params.t_b_travel, env)
            env.leave(cause="travel")

    # -- receivers -----------------------------------------------------

    def on_message(self, msg: ControlMessage, now: float, env) -> None:
        if msg.kind is MessageKind.VISIBILITY_RESP:
            if self._votes is not None and self.group is not None and msg.sender in self.group.members:
                self._votes[msg.sender] = bool(msg.visible)
            return
        if self.current_go is None or msg.sender != self.current_go:
            return  # stale: not from our owner
        if msg.kind is MessageKind.GROUP_INFO:
            self.members_view = set(msg.members)
        elif msg.kind is MessageKind.GROUP_BYE:
            self._blacklist(msg.sender, now, self.params.t_b, env)
            env.leave(cause="group_bye")
        elif msg.kind is MessageKind.VISIBILITY_REQ:
            env.send(msg.sender, ControlMessage.visibility_resp(self.me, env.in_range(msg.target)))
        elif msg.kind is MessageKind.MERGE_WARNING:
            self._blacklist(msg.sender, now, self.params.t_b, env)
            env.leave(cause="merge_warning")
            target = msg.target
            if env.in_range(target) and not self.bl.is_blocked(target, now):
                env.connect(target, cause="merge_follow")

    def on_member_event(self, event: MemberEvent, who: int, now: float, env) -> None:
        if self._disbanding or self.group is None:
            return
        members = frozenset(self.group.members)
        for m in sorted(members):
            env.send(m, ControlMessage.group_info(self.me, members))

    def on_link_lost(self, now: float, env) -> None:
        self.members_view = set()

    def on_joined(self, go: int) -> None:
        self.members_view = set()

    def on_left(self) -> None:
        self.members_view = set()

    def _blacklist(self, who: int, now: float, hold: float, env) -> None:
        self.bl.add(who, now, hold)
        env.trace("blacklist", who=who, until=self.bl.expiry(who))


def boot(me: int, params: ProtocolParams, capacity: int) -> WfdgmNode:
    """Fresh node: owner of an empty group, empty blacklist, stability 1."""
    w1, w2 = params.w_st
    node = WfdgmNode(me=me, capacity=capacity, params=params, stability=StabilityState(w_prev=w1, w_jaccard=w2))
    node.group = GroupRecord.create(me, capacity)
    return node


def classify_state(s: WfdgmNode) -> Optional[State]:
    """``None`` means an owner with clients, enough battery and no other owner around."""
    if s.current_go is not None:
        return State.C1
    members = s.group.members if s.group is not None else ()
    if not members:
        return State.GO1
    if s.battery.level < s.params.res_th:
        return State.GO2
    if s.go_neighbors:
        return State.GO3
    return None
