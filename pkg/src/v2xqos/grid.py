"""Discrete hyperparameter grids."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Any, Iterator, Sequence

ParamPoint = dict  # name -> value, one entry per grid dimension


@dataclass(frozen=True)
class ParamGrid:
    dimensions: tuple[tuple[str, tuple], ...]

    def __init__(self, dimensions: Sequence[tuple[str, Sequence[Any]]]):
        dims = tuple((str(name), tuple(values)) for name, values in dimensions)
        names = [name for name, _ in dims]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate grid dimension names in {names}")
        for name, values in dims:
            if not values:
                raise ValueError(f"grid dimension {name!r} has no values")
        object.__setattr__(self, "dimensions", dims)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.dimensions)

    def __len__(self) -> int:
        return math.prod(len(values) for _, values in self.dimensions)

    def __iter__(self) -> Iterator[ParamPoint]:
        return iter(enumerate_grid(self))

    def values(self, name: str) -> tuple:
        return dict(self.dimensions)[name]

    def contains(self, point: ParamPoint) -> bool:
        return set(point) == set(self.names) and all(point[n] in v for n, v in self.dimensions)

    def as_dict(self) -> dict[str, list]:
        return {name: list(values) for name, values in self.dimensions}


def enumerate_grid(grid: ParamGrid) -> list[ParamPoint]:
    """All assignments, first dimension varying slowest."""
    names = grid.names
    return [dict(zip(names, combo)) for combo in itertools.product(*(v for _, v in grid.dimensions))]
