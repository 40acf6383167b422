"""Uniform 1-d grids and functions sampled on them."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class GridSpec1D:
    """Uniform grid x_j = x_min + j*dx, j = 0..n_points-1."""

    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError(f"need x_min < x_max, got [{self.x_min}, {self.x_max}]")
        if self.n_points < 2:
            raise ValueError(f"need n_points >= 2, got {self.n_points}")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    def points(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_points)

    def nearest_index(self, x) -> np.ndarray:
        """Index of the grid node nearest to x (clipped to the grid)."""
        idx = np.rint((np.asarray(x) - self.x_min) / self.dx).astype(int)
        return np.clip(idx, 0, self.n_points - 1)


@dataclass
class GridFn:
    """Real-valued function sampled on a grid; values must be finite."""

    grid: GridSpec1D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_points,):
            raise ValueError(
                f"values shape {self.values.shape} does not match grid "
                f"({self.grid.n_points} points)"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("GridFn values must be finite")

    def copy(self) -> "GridFn":
        return GridFn(self.grid, self.values.copy())
