"""Hand-placed scenarios for kernel-level tests."""

import numpy as np

from wfdgm.mobility import StaticModel

FAR = 10_000.0


class Fixed:
    """Nodes pinned at given coordinates; unlisted nodes are spread far apart."""

    def __init__(self, placed: dict[int, tuple[float, float]]):
        self.placed = placed

    def positions(self, n):
        pos = np.array([[FAR * (i + 1), FAR] for i in range(n)], dtype=float)
        for i, xy in self.placed.items():
            pos[i] = xy
        return pos

    def build(self, n, rng):
        return StaticModel(self.positions(n))


class ScriptedModel:
    is_static = False
    max_speed = 1e9

    def __init__(self, start, moves):
        self.positions = np.array(start, dtype=float)
        self.moves = moves

    def step(self, now, dt):
        for i, (when, xy) in self.moves.items():
            if now + dt >= when:
                self.positions[i] = xy
        return self.positions


class Scripted(Fixed):
    """Like :class:`Fixed`, but ``moves[i] = (time, xy)`` teleports node i once."""

    def __init__(self, placed, moves):
        super().__init__(placed)
        self.moves = moves

    def build(self, n, rng):
        return ScriptedModel(self.positions(n), self.moves)
