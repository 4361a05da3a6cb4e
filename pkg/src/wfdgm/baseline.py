"""Comparator: highest-ordinal owner election, no merge, no traveling.

A free node joins the highest-ordinal owner (free or not) in range whose
ordinal exceeds its own. Once an owner has clients it keeps the role until
its battery runs out or its clients drift out of range.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .battery import BatteryState
from .domain import ControlMessage, GroupRecord, Role


@dataclass
class BaselineNode:
    me: int
    capacity: int
    group: Optional[GroupRecord] = None
    current_go: Optional[int] = None
    battery: BatteryState = field(default_factory=BatteryState)
    rejected: set[int] = field(default_factory=set)

    @property
    def role(self) -> Role:
        if self.current_go is not None:
            return Role.CLIENT
        if self.group is not None and self.group.members:
            return Role.GROUP_OWNER
        return Role.FREE

    def tick(self, now: float, env) -> None:
        role = self.role
        env.trace(
            "decide",
            state=role.value,
            battery=self.battery.level,
            members=len(self.group.members) if self.group is not None else 0,
        )
        if role is not Role.FREE:
            return
        candidates = [
            r.node
            for r in env.neighbors()
            if r.credentials is not None and r.node > self.me and r.node not in self.rejected
        ]
        if not candidates:
            # every higher owner refused once; start over next period
            self.rejected.clear()
            return
        target = max(candidates)
        if env.connect(target, cause="election").ok:
            self.rejected.clear()
        else:
            self.rejected.add(target)

    def on_message(self, msg: ControlMessage, now: float, env) -> None:
        # group info is the only traffic a baseline owner produces; nothing to act on
        pass

    def on_member_event(self, event, who: int, now: float, env) -> None:
        pass

    def on_link_lost(self, now: float, env) -> None:
        pass

    def on_joined(self, go: int) -> None:
        pass

    def on_left(self) -> None:
        pass


def boot_baseline(me: int, capacity: int) -> BaselineNode:
    node = BaselineNode(me=me, capacity=capacity)
    node.group = GroupRecord.create(me, capacity)
    return node


def baseline_tick(s: BaselineNode, now: float, env) -> BaselineNode:
    s.tick(now, env)
    return s
