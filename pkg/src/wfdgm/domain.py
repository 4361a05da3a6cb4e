"""Identities, roles, group records, control messages and the blacklist."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import NewType, Optional

# Ordinal doubles as the MAC-address stand-in used by the Baseline ordering.
NodeId = NewType("NodeId", int)

MIN_CAPACITY = 4
MAX_CAPACITY = 15


class Role(Enum):
    GROUP_OWNER = "go"
    CLIENT = "client"
    FREE = "free"  # owner of an empty group, waiting for the election outcome

    @property
    def owns_group(self) -> bool:
        return self is not Role.CLIENT


class GroupFull(Exception):
    pass


_tokens = itertools.count()


def fresh_token(prefix: str, owner: int) -> str:
    """Opaque SSID/passkey stand-in. Unique within the process."""
    return f"{prefix}{owner}-{next(_tokens)}"


@dataclass
class GroupRecord:
    group_id: str
    owner: int
    capacity: int
    credentials: str
    members: set[int] = field(default_factory=set)

    def __post_init__(self):
        if not MIN_CAPACITY <= self.capacity <= MAX_CAPACITY:
            raise ValueError(f"capacity {self.capacity} outside [{MIN_CAPACITY}, {MAX_CAPACITY}]")
        if not self.credentials:
            raise ValueError("credentials must be non-empty")

    @classmethod
    def create(cls, owner: int, capacity: int) -> "GroupRecord":
        return cls(
            group_id=fresh_token("DIRECT-", owner),
            owner=owner,
            capacity=capacity,
            credentials=fresh_token("psk", owner),
        )

    @property
    def is_full(self) -> bool:
        return len(self.members) >= self.capacity

    def add(self, who: int) -> None:
        if who == self.owner:
            raise ValueError("the owner cannot join its own group")
        if who in self.members:
            return
        if self.is_full:
            raise GroupFull(self.group_id)
        self.members.add(who)

    def remove(self, who: int) -> None:
        self.members.discard(who)


class MessageKind(Enum):
    GROUP_INFO = "GROUP_INFO"
    GROUP_BYE = "GROUP_BYE"
    VISIBILITY_REQ = "VISIBILITY_REQ"
    VISIBILITY_RESP = "VISIBILITY_RESP"
    MERGE_WARNING = "MERGE_WARNING"


GO_ONLY = frozenset(
    {MessageKind.GROUP_INFO, MessageKind.GROUP_BYE, MessageKind.VISIBILITY_REQ, MessageKind.MERGE_WARNING}
)


@dataclass(frozen=True)
class ControlMessage:
    kind: MessageKind
    sender: int
    members: frozenset[int] = frozenset()  # GROUP_INFO
    target: Optional[int] = None  # VISIBILITY_REQ, MERGE_WARNING
    visible: Optional[bool] = None  # VISIBILITY_RESP

    @classmethod
    def group_info(cls, sender, members):
        return cls(MessageKind.GROUP_INFO, sender, members=frozenset(members))

    @classmethod
    def group_bye(cls, sender):
        return cls(MessageKind.GROUP_BYE, sender)

    @classmethod
    def visibility_req(cls, sender, target):
        return cls(MessageKind.VISIBILITY_REQ, sender, target=target)

    @classmethod
    def visibility_resp(cls, sender, visible):
        return cls(MessageKind.VISIBILITY_RESP, sender, visible=bool(visible))

    @classmethod
    def merge_warning(cls, sender, target):
        return cls(MessageKind.MERGE_WARNING, sender, target=target)

    def payload(self) -> str:
        if self.kind is MessageKind.GROUP_INFO:
            return "members=" + " ".join(str(m) for m in sorted(self.members))
        if self.target is not None:
            return f"target={self.target}"
        if self.visible is not None:
            return f"visible={int(self.visible)}"
        return ""


@dataclass
class Blacklist:
    """Timed exclusion list. Expiry is exclusive: blocked while ``now < expiry``."""

    entries: dict[int, float] = field(default_factory=dict)

    def add(self, who: int, now: float, hold: float) -> None:
        if hold <= 0:
            raise ValueError("hold must be positive")
        expiry = now + hold
        self.entries[who] = max(expiry, self.entries.get(who, expiry))

    def is_blocked(self, who: int, now: float) -> bool:
        expiry = self.entries.get(who)
        return expiry is not None and now < expiry

    def expiry(self, who: int) -> Optional[float]:
        return self.entries.get(who)


def blacklist_add(bl: Blacklist, who: int, now: float, hold: float) -> Blacklist:
    bl.add(who, now, hold)
    return bl


def is_blocked(bl: Blacklist, who: int, now: float) -> bool:
    return bl.is_blocked(who, now)


@dataclass(frozen=True)
class ServiceRecord:
    """What a node advertises through service discovery."""

    node: int
    role: Role
    suitability: float
    group_id: Optional[str] = None
    credentials: Optional[str] = None
    group_size: int = 0

    def __post_init__(self):
        if not 0.0 <= self.suitability <= 1.0:
            raise ValueError(f"suitability {self.suitability} outside [0, 1]")
        if (self.credentials is not None) != self.role.owns_group:
            raise ValueError("credentials are advertised iff the node owns a group")
