"""Scenario geometry: each builder turns a node count and an RNG into a mobility model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mobility import (
    GridMap,
    MobilityConfigError,
    PoiWalkModel,
    PoiWalkParams,
    StaticModel,
    WorkingDayModel,
    WorkingDayParams,
    static_grid,
)


@dataclass(frozen=True)
class GridScenario:
    rows: int = 10
    cols: int = 20
    spacing: float = 1.0

    kind = "grid"

    def build(self, n: int, rng: np.random.Generator) -> StaticModel:
        return StaticModel(static_grid(n, self.rows, self.cols, self.spacing))


@dataclass(frozen=True)
class PoiScenario:
    width: float = 800.0
    height: float = 400.0
    n_pois: int = 60
    lattice_spacing: float = 20.0
    drop_fraction: float = 0.0
    speed_min: float = 0.0
    speed_max: float = 1.5
    wait_min: float = 600.0
    wait_max: float = 3600.0

    kind = "poi_walk"

    def build(self, n: int, rng: np.random.Generator) -> PoiWalkModel:
        if not 0 <= self.speed_min <= self.speed_max or self.speed_max <= 0:
            raise MobilityConfigError("speed range must satisfy 0 <= min <= max, max > 0")
        if not 0 <= self.wait_min <= self.wait_max:
            raise MobilityConfigError("wait range must satisfy 0 <= min <= max")
        gmap = GridMap.lattice(self.width, self.height, self.lattice_spacing, self.n_pois, rng, self.drop_fraction)
        gmap.check_connected()
        params = PoiWalkParams(self.speed_min, self.speed_max, self.wait_min, self.wait_max)
        return PoiWalkModel(n, gmap, rng, params)


@dataclass(frozen=True)
class WorkingDayScenario:
    params: WorkingDayParams = field(default_factory=WorkingDayParams)

    kind = "working_day"

    def build(self, n: int, rng: np.random.Generator) -> WorkingDayModel:
        return WorkingDayModel(n, rng, self.params)


SCENARIO_KINDS = {"grid": GridScenario, "poi_walk": PoiScenario, "working_day": WorkingDayScenario}
