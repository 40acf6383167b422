"""Measures on the line: atoms plus a sampled density, with sampling and CDFs.

A Measure may carry mass < 1 (sub-probability target); the deficit is the
probability that the embedding never stops.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .grids import GridSpec1D
from .special import gamma


@dataclass
class Measure:
    """Finite atoms and/or a piecewise-linear density sampled on its own grid."""

    atoms: list[tuple[float, float]] = field(default_factory=list)
    density_grid: GridSpec1D | None = None
    density: np.ndarray | None = None

    def __post_init__(self):
        for loc, w in self.atoms:
            if not w > 0:
                raise ValueError(f"atom weight must be positive, got {w} at {loc}")
        if (self.density is None) != (self.density_grid is None):
            raise ValueError("density and density_grid must be given together")
        if self.density is not None:
            self.density = np.asarray(self.density, dtype=float)
            if self.density.shape != (self.density_grid.n_points,):
                raise ValueError("density shape does not match its grid")
            if np.any(self.density < 0):
                raise ValueError("density values must be nonnegative")
        m = self.total_mass
        if not 0 < m <= 1 + 1e-12:
            raise ValueError(f"total mass must lie in (0, 1], got {m}")

    @property
    def total_mass(self) -> float:
        m = sum(w for _, w in self.atoms)
        if self.density is not None:
            m += float(np.trapezoid(self.density, self.density_grid.points()))
        return m

    @property
    def is_atomic(self) -> bool:
        return self.density is None

    def support_bounds(self) -> tuple[float, float]:
        lo, hi = math.inf, -math.inf
        for loc, _ in self.atoms:
            lo, hi = min(lo, loc), max(hi, loc)
        if self.density is not None:
            xs = self.density_grid.points()
            nz = np.nonzero(self.density > 0)[0]
            if nz.size:
                lo = min(lo, xs[max(nz[0] - 1, 0)])
                hi = max(hi, xs[min(nz[-1] + 1, xs.size - 1)])
        return lo, hi

    def cdf(self, x) -> np.ndarray:
        """CDF of the mass-normalised (conditional) law."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for loc, w in self.atoms:
            out = out + w * (x >= loc)
        if self.density is not None:
            xs = self.density_grid.points()
            cum = np.concatenate(
                [[0.0], np.cumsum(np.diff(xs) * (self.density[1:] + self.density[:-1]) / 2)]
            )
            out = out + np.interp(x, xs, cum, left=0.0, right=cum[-1])
        return out / self.total_mass

    def quantile(self, q) -> np.ndarray:
        """Quantile of the mass-normalised law (smallest x with CDF >= q)."""
        q = np.asarray(q, dtype=float)
        if self.atoms and self.density is None:
            locs, ws = zip(*sorted(self.atoms))
            cum = np.cumsum(ws) / self.total_mass
            idx = np.searchsorted(cum, q - 1e-12, side="left")
            return np.asarray(locs)[np.clip(idx, 0, len(locs) - 1)]
        lo, hi = self.support_bounds()
        xs = np.linspace(lo, hi, 4001)
        return np.interp(q, self.cdf(xs), xs)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw n points from the mass-normalised law (inverse CDF on the grid)."""
        u = rng.random(n) * self.total_mass
        out = np.empty(n)
        # atoms first, in location order, then the density via its quantile table
        acc = 0.0
        assigned = np.zeros(n, dtype=bool)
        for loc, w in sorted(self.atoms):
            pick = (~assigned) & (u < acc + w)
            out[pick] = loc
            assigned |= pick
            acc += w
        if self.density is not None:
            xs = self.density_grid.points()
            cum = np.concatenate(
                [[0.0], np.cumsum(np.diff(xs) * (self.density[1:] + self.density[:-1]) / 2)]
            )
            rest = ~assigned
            out[rest] = np.interp(u[rest] - acc, cum, xs)
            assigned |= rest
        if not assigned.all():  # u landed beyond all mass by rounding
            out[~assigned] = sorted(self.atoms)[-1][0] if self.atoms else xs[-1]
        return out

    # -- serialisation ------------------------------------------------------

    def to_json(self) -> dict:
        doc = {"atoms": [[loc, w] for loc, w in self.atoms], "total_mass": self.total_mass}
        if self.density is not None:
            doc["density"] = {
                "x_min": self.density_grid.x_min,
                "x_max": self.density_grid.x_max,
                "n_points": self.density_grid.n_points,
                "values": self.density.tolist(),
            }
        return doc

    def to_csv(self, path) -> None:
        """Columns: x, value.  Atoms are written as rows with kind=atom."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kind", "x", "value"])
            for loc, wt in self.atoms:
                w.writerow(["atom", f"{loc:.17g}", f"{wt:.17g}"])
            if self.density is not None:
                for x, v in zip(self.density_grid.points(), self.density):
                    w.writerow(["density", f"{x:.17g}", f"{v:.17g}"])

    @staticmethod
    def from_json(doc: dict) -> "Measure":
        atoms = [(float(a), float(w)) for a, w in doc.get("atoms", [])]
        grid = vals = None
        if "density" in doc:
            d = doc["density"]
            grid = GridSpec1D(d["x_min"], d["x_max"], d["n_points"])
            vals = np.asarray(d["values"], dtype=float)
        return Measure(atoms, grid, vals)


def dirac(loc: float) -> Measure:
    return Measure(atoms=[(loc, 1.0)])


def uniform_measure(a: float, b: float, mass: float = 1.0, n_points: int = 401) -> Measure:
    grid = GridSpec1D(a, b, n_points)
    dens = np.full(n_points, mass / (b - a))
    return Measure(density_grid=grid, density=dens)


def beta_density(a: float, b: float, x) -> np.ndarray:
    """Density of Beta(a,b) rescaled to [-1, 1]; zero outside."""
    if a <= 0 or b <= 0:
        raise ValueError(f"need a, b > 0, got ({a}, {b})")
    x = np.asarray(x, dtype=float)
    norm = gamma(a + b) / (gamma(a) * gamma(b)) * 2.0 ** (1.0 - a - b)
    inside = np.abs(x) <= 1.0
    xc = np.clip(x, -1.0, 1.0)
    with np.errstate(invalid="ignore"):
        vals = norm * (xc + 1.0) ** (a - 1.0) * (1.0 - xc) ** (b - 1.0)
    return np.where(inside, np.nan_to_num(vals, posinf=0.0), 0.0)


def beta_measure(a: float, b: float, mass: float = 1.0, n_points: int = 401) -> Measure:
    grid = GridSpec1D(-1.0, 1.0, n_points)
    return Measure(density_grid=grid, density=mass * beta_density(a, b, grid.points()))


def beta_cdf(a: float, b: float, x) -> np.ndarray:
    """CDF of Beta(a,b) on [-1,1], by quadrature of the density (vectorised)."""
    xs = np.linspace(-1.0, 1.0, 4001)
    dens = beta_density(a, b, xs)
    cum = np.concatenate([[0.0], np.cumsum(np.diff(xs) * (dens[1:] + dens[:-1]) / 2)])
    cum /= cum[-1]
    return np.interp(np.asarray(x, dtype=float), xs, cum, left=0.0, right=1.0)


# -- the anisotropic 2-d target density ------------------------------------

_BM2D_ROT = (math.cos(math.pi / 4), math.sin(math.pi / 4))
_BM2D_SHIFT = 0.15


def _bm2d_unnormalised(x1, x2):
    a, b = _BM2D_ROT
    xt = _BM2D_SHIFT
    u = a * (x1 - xt) - b * (x2 - xt) - xt
    v = b * (x1 - xt) + a * (x2 - xt) - xt
    return np.exp(-2.5 * u**2 - 6.0 * v**2)


@lru_cache(maxsize=1)
def _bm2d_norm_const() -> float:
    # one-off 2-d trapezoid quadrature; the box [-4,4]^2 captures the tails
    g = np.linspace(-4.0, 4.0, 1601)
    x1, x2 = np.meshgrid(g, g, indexing="ij")
    total = np.trapezoid(np.trapezoid(_bm2d_unnormalised(x1, x2), g, axis=1), g)
    return 1.0 / float(total)


def bm2d_target_density(x1, x2) -> np.ndarray:
    """Rotated anisotropic Gaussian bump used as the planar target law."""
    return _bm2d_norm_const() * _bm2d_unnormalised(np.asarray(x1, float), np.asarray(x2, float))
