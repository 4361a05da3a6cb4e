"""Trace monitor: replays a run's event trace and reports state-machine violations.

Works on in-memory :class:`~wfdgm.kernel.TraceEvent` records as well as on
rows read back from ``trace.csv`` (payload values are then strings).
"""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable

from .kernel import TraceEvent

RULES = (
    "single_group",
    "capacity",
    "blacklist",
    "go2_timing",
    "disband_notification",
    "baseline_messages",
    "dead_silent",
)

_NOTICE = {"low_battery": "GROUP_BYE", "merge": "MERGE_WARNING"}


@dataclass(frozen=True)
class Violation:
    rule: str
    time: float
    node: int
    detail: str

    def __str__(self) -> str:
        return f"[{self.rule}] t={self.time:g} node={self.node}: {self.detail}"


def _ints(v) -> list[int]:
    if isinstance(v, str):
        return [int(x) for x in v.split()]
    return [int(x) for x in v]


def parse_payload(text: str) -> dict[str, str]:
    out = {}
    for part in text.split(";"):
        if part:
            k, _, v = part.partition("=")
            out[k] = v
    return out


def read_trace(path) -> list[TraceEvent]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["time", "node", "kind", "payload"]:
            raise ValueError(f"{path}: unexpected trace header {header}")
        return [TraceEvent(float(t), int(n), k, parse_payload(p)) for t, n, k, p in reader]


def check_trace(
    events: Iterable[TraceEvent],
    protocol: str,
    t_d: float,
    res_th: float = 0.1,
) -> list[Violation]:
    out: list[Violation] = []
    go_of: dict[int, int] = {}
    members: dict[int, set[int]] = defaultdict(set)
    blacklist: dict[int, dict[int, float]] = defaultdict(dict)
    last_decide: dict[int, float] = {}
    sends_at: dict[int, tuple[float, set]] = {}
    dead: set[int] = set()

    def bad(rule, ev, detail):
        out.append(Violation(rule, ev.time, ev.node, detail))

    for ev in events:
        d = ev.data
        i = ev.node
        if i in dead:
            bad("dead_silent", ev, f"{ev.kind} after death")
        kind = ev.kind
        if kind == "join":
            target = int(d["target"])
            if i in go_of:
                bad("single_group", ev, f"joins {target} while client of {go_of[i]}")
            if members[i]:
                bad("single_group", ev, f"joins {target} while owning {sorted(members[i])}")
            if target in go_of:
                bad("single_group", ev, f"target {target} is a client")
            go_of[i] = target
            members[target].add(i)
            if int(d["size"]) != len(members[target]):
                bad("single_group", ev, f"group of {target} reports size {d['size']}")
            if int(d["size"]) > int(d["capacity"]):
                bad("capacity", ev, f"group of {target} holds {d['size']} > {d['capacity']}")
            until = blacklist[i].get(target)
            if until is not None and ev.time < until:
                bad("blacklist", ev, f"joins {target} blacklisted until {until:g}")
        elif kind == "leave":
            go = int(d["go"])
            if go_of.get(i) != go:
                bad("single_group", ev, f"leaves {go} but is client of {go_of.get(i)}")
            go_of.pop(i, None)
            members[go].discard(i)
        elif kind == "blacklist":
            blacklist[i][int(d["who"])] = float(d["until"])
        elif kind == "decide":
            prev = last_decide.get(i)
            if prev is not None and abs(ev.time - prev - t_d) > 1e-9:
                bad("go2_timing", ev, f"decision {ev.time - prev:g} s after the previous one")
            last_decide[i] = ev.time
            if protocol == "wfdgm":
                state = d["state"]
                low = float(d["battery"]) < res_th
                has_members = int(d["members"]) > 0
                if state == "GO2" and not (low and has_members):
                    bad("go2_timing", ev, f"GO2 with battery {d['battery']} and {d['members']} members")
                if state not in ("GO2", "C1") and low and has_members:
                    bad("go2_timing", ev, f"{state} with battery {d['battery']} below threshold")
        elif kind == "send":
            msg = d["msg"]
            if protocol == "baseline" and msg in ("VISIBILITY_REQ", "MERGE_WARNING"):
                bad("baseline_messages", ev, f"baseline sent {msg}")
            t, seen = sends_at.get(i, (None, None))
            if t != ev.time:
                seen = set()
                sends_at[i] = (ev.time, seen)
            seen.add((int(d["dest"]), msg))
        elif kind == "disband":
            notice = _NOTICE.get(d["cause"])
            t, seen = sends_at.get(i, (None, set()))
            for m in _ints(d["members"]):
                if notice is None or t != ev.time or (m, notice) not in seen:
                    bad("disband_notification", ev, f"member {m} not warned before disband ({d['cause']})")
            if members[i]:
                bad("single_group", ev, f"disband leaves members {sorted(members[i])} attached")
        elif kind == "death":
            dead.add(i)
            if i in go_of or members[i]:
                bad("single_group", ev, "dead node still attached")
    return out
