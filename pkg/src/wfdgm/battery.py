"""Linear battery depletion fitted on Nexus 5/6 measurements.

Slopes are fractions of full charge per hour. Group owners pay
``p1_go * n + p2_go`` with ``n`` attached clients, clients pay
``p1_client * n + p2_client`` with ``n = 1`` unless
``client_uses_group_size`` is set, and a node with no link pays
``idle_rate`` (about 20% every 5 hours).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import Role

SECONDS_PER_HOUR = 3600.0


@dataclass(frozen=True)
class BatteryModelParams:
    p1_go: float = -0.006802
    p2_go: float = -0.03356
    p1_client: float = -0.003365
    p2_client: float = -0.04075
    idle_rate: float = 0.04
    client_uses_group_size: bool = False

    def __post_init__(self):
        if self.idle_rate < 0:
            raise ValueError("idle_rate must be non-negative")
        if self.p1_go > 0 or self.p2_go > 0 or self.p1_client > 0 or self.p2_client > 0:
            raise ValueError("battery slopes must be non-positive (p1 and p2 are listed as negative)")


@dataclass
class BatteryState:
    level: float = 1.0

    @property
    def dead(self) -> bool:
        return self.level <= 0.0


def slope(role: Role, n: int, params: BatteryModelParams) -> float:
    """Signed depletion rate per hour (always <= 0)."""
    if role is Role.CLIENT:
        k = n if params.client_uses_group_size else 1
        return params.p1_client * k + params.p2_client
    if n <= 0:
        return -params.idle_rate
    return params.p1_go * n + params.p2_go


def update_battery(b: BatteryState, role: Role, n: int, dt: float, params: BatteryModelParams) -> BatteryState:
    if dt <= 0:
        raise ValueError("dt must be positive")
    b.level = max(0.0, b.level + slope(role, n, params) * dt / SECONDS_PER_HOUR)
    return b


def battery_level(hours: float, role: Role, n: int, params: BatteryModelParams) -> float:
    """Closed form of the fit, clamped at zero."""
    return max(0.0, 1.0 + hours * slope(role, n, params))


ROLE_FREE, ROLE_GO, ROLE_CLIENT = 0, 1, 2


def slopes(role_codes, n_members, client_group_size, params: BatteryModelParams):
    """Vectorised :func:`slope` over role codes (0 free, 1 owner, 2 client)."""
    role_codes = np.asarray(role_codes)
    n = np.asarray(n_members, dtype=float)
    k = np.asarray(client_group_size, dtype=float) if params.client_uses_group_size else 1.0
    owner = np.where(n > 0, params.p1_go * n + params.p2_go, -params.idle_rate)
    client = params.p1_client * k + params.p2_client
    return np.where(role_codes == ROLE_CLIENT, client, owner)
