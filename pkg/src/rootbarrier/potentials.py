"""Potential kernels u(x, y) and potential functions of measures.

Kernels are closed-form for every supported process.  Potentials of measures
integrate the kernel against the measure exactly: atom sums plus per-cell
closed-form integration of the kernel against the piecewise-linear density
(so the only approximation is the density sampling itself).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .grids import GridSpec1D
from .measures import Measure
from .processes import (
    BmInterval,
    BmLine,
    CtmcRandomWalk,
    ProcessSpec,
    Stable,
    TimeChanged,
    base_process,
)
from .special import stable_kernel_constant


@dataclass
class PotentialFn:
    """Potential function sampled on a grid; +inf entries flag kernel poles."""

    grid: GridSpec1D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_points,):
            raise ValueError("values shape does not match grid")
        if np.any(np.isnan(self.values)) or np.any(self.values == -math.inf):
            raise ValueError("potential values must be > -inf and not NaN")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "value"])
            for x, v in zip(self.grid.points(), self.values):
                w.writerow([f"{x:.17g}", "inf" if math.isinf(v) else f"{v:.17g}"])

    def to_json(self) -> dict:
        return {
            "x_min": self.grid.x_min,
            "x_max": self.grid.x_max,
            "n_points": self.grid.n_points,
            "values": ["inf" if math.isinf(v) else v for v in self.values],
        }


def potential_kernel(spec: ProcessSpec, x: float, y):
    """Kernel u(x, y); y may be an array.  Not defined for TimeChanged specs

    (the time change leaves potential functions unchanged, so callers evaluate
    the base kernel instead).
    """
    if isinstance(spec, TimeChanged):
        raise ValueError("potential_kernel is undefined for TimeChanged; use spec.base")
    y = np.asarray(y, dtype=float)
    if isinstance(spec, CtmcRandomWalk):
        scale = 1.0 / (spec.p - spec.q)
        ratio = spec.p / spec.q
        return np.where(y >= x, scale, scale * ratio ** (y - x))
    if isinstance(spec, BmLine):
        return -np.abs(x - y)
    if isinstance(spec, BmInterval):
        a, b = spec.a, spec.b
        if not (a < x < b) or np.any(y <= a) or np.any(y >= b):
            raise ValueError(f"BmInterval kernel needs x, y in ({a}, {b})")
        lo = np.minimum(x, y)
        hi = np.maximum(x, y)
        return 2.0 * (lo - a) * (b - hi) / (b - a)
    if isinstance(spec, Stable):
        c = stable_kernel_constant(spec.alpha)
        d = np.abs(x - y)
        with np.errstate(divide="ignore"):
            return np.where(d > 0.0, c * d ** (spec.alpha - 1.0), math.inf)
    raise ValueError(f"unknown process spec {spec!r}")


def ctmc_potential_closed(walk: CtmcRandomWalk, atoms: list[tuple[float, float]], y):
    """Closed piecewise form of the potential of an atomic measure for the walk.

    For atoms a_l at x_1 < ... < x_N the potential at y sums 1/(p-q) over atoms
    at or below y and the geometric tail (p/q)^(y-x_l) over atoms above y.
    """
    y = np.asarray(y, dtype=float)
    scale = 1.0 / (walk.p - walk.q)
    ratio = walk.p / walk.q
    out = np.zeros_like(y)
    for loc, w in sorted(atoms):
        out = out + np.where(y >= loc, w * scale, w * scale * ratio ** (y - loc))
    return out


def _abs_power_cell(zl, zr, c0, s, beta):
    """Exact integral of (c0 + s*z)|z|^beta over [zl, zr] (may straddle 0)."""
    f1 = lambda z: np.sign(z) * np.abs(z) ** (beta + 1.0) / (beta + 1.0)
    f2 = lambda z: np.abs(z) ** (beta + 2.0) / (beta + 2.0)
    return c0 * (f1(zr) - f1(zl)) + s * (f2(zr) - f2(zl))


def _density_potential_abs_kernel(xs, dens, targets, beta, prefactor):
    """Potential of the sampled density under the kernel prefactor*|x-y|^beta."""
    out = np.zeros_like(targets)
    for i in range(xs.size - 1):
        if dens[i] == 0.0 and dens[i + 1] == 0.0:
            continue
        h = xs[i + 1] - xs[i]
        s = (dens[i + 1] - dens[i]) / h
        zl = xs[i] - targets
        zr = xs[i + 1] - targets
        # density in z-coordinates around each target: d(z) = dens_i + s*(z - zl)
        c0 = dens[i] - s * zl
        out += _abs_power_cell(zl, zr, c0, s, beta)
    return prefactor * out


def _density_potential_interval(xs, dens, targets, a, b):
    """Exact potential of the sampled density under the killed-interval kernel."""
    out = np.zeros_like(targets)
    scale = 2.0 / (b - a)

    def quad_int(lo, hi, c, s, x0, A, B):
        # integral of (c + s*(x - x0)) * (A + B*x) over [lo, hi]
        c0 = c - s * x0
        p0 = c0 * A
        p1 = c0 * B + s * A
        p2 = s * B
        F = lambda x: p0 * x + p1 * x**2 / 2.0 + p2 * x**3 / 3.0
        return F(hi) - F(lo)

    y = targets
    A_lo, B_lo = -scale * a * (b - y), scale * (b - y)  # kernel for x < y
    A_hi, B_hi = scale * b * (y - a), -scale * (y - a)  # kernel for x > y
    for i in range(xs.size - 1):
        if dens[i] == 0.0 and dens[i + 1] == 0.0:
            continue
        l, r = xs[i], xs[i + 1]
        s = (dens[i + 1] - dens[i]) / (r - l)
        split = np.clip(y, l, r)
        out += quad_int(l, split, dens[i], s, l, A_lo, B_lo)
        out += quad_int(split, r, dens[i], s, l, A_hi, B_hi)
    return out


def potential_values(
    spec: ProcessSpec, mu: Measure, targets: np.ndarray, cell_width: float | None = None
) -> np.ndarray:
    """Potential of mu at arbitrary target points.

    A stable atom sitting exactly on a target would contribute an infinite
    kernel value there; when cell_width is given it is replaced by the kernel's
    average over a cell of that width, which is what representing the atom as a
    one-cell density gives.
    """
    proc = base_process(spec)
    ys = np.asarray(targets, dtype=float)
    vals = np.zeros_like(ys)

    for loc, w in mu.atoms:
        contrib = np.asarray(potential_kernel(proc, loc, ys), dtype=float)
        if isinstance(proc, Stable) and cell_width is not None:
            hit = ~np.isfinite(contrib)
            if hit.any():
                alpha = proc.alpha
                c = stable_kernel_constant(alpha)
                cell_avg = c * 2.0 ** (1.0 - alpha) / alpha * cell_width ** (alpha - 1.0)
                contrib[hit] = cell_avg
        vals += w * contrib

    if mu.density is not None:
        if isinstance(proc, CtmcRandomWalk):
            raise ValueError("CtmcRandomWalk measures must be atomic")
        xs = mu.density_grid.points()
        dens = mu.density
        if isinstance(proc, Stable):
            vals += _density_potential_abs_kernel(
                xs, dens, ys, proc.alpha - 1.0, stable_kernel_constant(proc.alpha)
            )
        elif isinstance(proc, BmLine):
            vals += _density_potential_abs_kernel(xs, dens, ys, 1.0, -1.0)
        elif isinstance(proc, BmInterval):
            lo, hi = mu.support_bounds()
            if lo <= proc.a or hi >= proc.b:
                raise ValueError("measure support must lie inside the interval")
            vals += _density_potential_interval(xs, dens, ys, proc.a, proc.b)
        else:
            raise ValueError(f"unsupported process {proc!r}")

    return vals


def potential_of_measure(spec: ProcessSpec, mu: Measure, grid: GridSpec1D) -> PotentialFn:
    """Potential function of mu sampled on the target grid."""
    return PotentialFn(grid, potential_values(spec, mu, grid.points(), cell_width=grid.dx))


def stable_uniform_potential_closed(alpha: float, y):
    """Potential of Uniform[-1,1] for the symmetric stable process, closed form."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0,1), got {alpha}")
    c = stable_kernel_constant(alpha) / (2.0 * alpha)
    y = np.abs(np.asarray(y, dtype=float))
    inside = c * ((1.0 - y.clip(max=1.0)) ** alpha + (1.0 + y) ** alpha)
    outside = c * ((y + 1.0) ** alpha - np.maximum(y - 1.0, 0.0) ** alpha)
    return np.where(y < 1.0, inside, outside)


@dataclass(frozen=True)
class BalayageReport:
    ok: bool
    min_margin: float
    argmin: float

    def to_json(self) -> dict:
        return {"ok": self.ok, "min_margin": self.min_margin, "argmin": self.argmin}


def check_balayage(muU: PotentialFn, nuU: PotentialFn, tol: float) -> BalayageReport:
    """Verify muU >= nuU - tol on the common grid and report the worst margin."""
    if muU.grid != nuU.grid:
        raise ValueError("potentials live on different grids")
    margin = muU.values - nuU.values
    finite = np.isfinite(margin)
    if not finite.any():
        raise ValueError("no finite margins to compare")
    idx_f = np.argmin(margin[finite])
    xs = muU.grid.points()
    min_margin = float(margin[finite][idx_f])
    argmin = float(xs[finite][idx_f])
    return BalayageReport(ok=bool(min_margin >= -tol), min_margin=min_margin, argmin=argmin)
