"""Dynamic-programming construction of the smallest excessive majorant.

The recursion starts from the initial potential and alternates one dual
semigroup step with a pointwise maximum against the target potential.  An
independent backward-induction optimal-stopping solver for the chain case
cross-validates the recursion.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .generators import StabilityError, StepOperator, dual_step
from .grids import GridFn, GridSpec1D
from .potentials import PotentialFn, check_balayage
from .processes import CtmcRandomWalk

DEFAULT_CONTACT_SCALE = 1e-8


class BalayageError(RuntimeError):
    """Raised when the initial potential does not dominate the target."""


def contact_tolerance(target: PotentialFn) -> float:
    finite = target.values[np.isfinite(target.values)]
    scale = float(np.max(np.abs(finite))) if finite.size else 1.0
    return DEFAULT_CONTACT_SCALE * max(scale, 1.0)


def _cap_infinities(values: np.ndarray) -> tuple[np.ndarray, int]:
    """Replace +inf entries by the largest finite neighbouring value."""
    out = values.copy()
    bad = ~np.isfinite(out)
    n_capped = int(bad.sum())
    if n_capped:
        finite_idx = np.nonzero(~bad)[0]
        if finite_idx.size == 0:
            raise ValueError("potential has no finite values to cap with")
        for i in np.nonzero(bad)[0]:
            left = finite_idx[finite_idx < i]
            right = finite_idx[finite_idx > i]
            cands = []
            if left.size:
                cands.append(out[left[-1]])
            if right.size:
                cands.append(out[right[0]])
            out[i] = max(cands)
    return out, n_capped


@dataclass
class Obstacle:
    """Initial and target potentials on a common grid."""

    initial: PotentialFn
    target: PotentialFn

    def __post_init__(self):
        if self.initial.grid != self.target.grid:
            raise ValueError("initial and target potentials live on different grids")


@dataclass
class ValueSurface:
    """DP iterates on the space-time grid; values[k] is the slice at t = k*dt."""

    grid: GridSpec1D
    dt: float
    n_steps: int
    values: np.ndarray = field(repr=False)
    n_capped: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.n_steps + 1, self.grid.n_points):
            raise ValueError("surface shape does not match grid/steps")

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)

    def to_csv(self, path, time_stride: int = 1) -> None:
        xs = self.grid.points()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "value"])
            rows = list(range(0, self.n_steps + 1, time_stride))
            if rows[-1] != self.n_steps:
                rows.append(self.n_steps)
            for k in rows:
                t = k * self.dt
                for x, v in zip(xs, self.values[k]):
                    w.writerow([f"{t:.17g}", f"{x:.17g}", f"{v:.17g}"])

    def to_binary(self, path_bin, path_header) -> None:
        """Row-major float64 dump plus a JSON header describing the layout."""
        with open(path_bin, "wb") as fh:
            fh.write(self.values.astype("<f8").tobytes(order="C"))
        header = {
            "dtype": "<f8",
            "order": "C",
            "shape": [self.n_steps + 1, self.grid.n_points],
            "dt": self.dt,
            "grid": {
                "x_min": self.grid.x_min,
                "x_max": self.grid.x_max,
                "n_points": self.grid.n_points,
            },
            "n_capped": self.n_capped,
        }
        with open(path_header, "w") as fh:
            json.dump(header, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @staticmethod
    def from_binary(path_bin, path_header) -> "ValueSurface":
        with open(path_header) as fh:
            header = json.load(fh)
        g = header["grid"]
        grid = GridSpec1D(g["x_min"], g["x_max"], g["n_points"])
        shape = tuple(header["shape"])
        raw = np.fromfile(path_bin, dtype=header["dtype"]).reshape(shape)
        return ValueSurface(grid, header["dt"], shape[0] - 1, raw, header["n_capped"])


def dp_reduite(
    obstacle: Obstacle,
    step: StepOperator,
    n_steps: int,
    balayage_tol: float | None = None,
    enforce_monotone: bool = True,
) -> ValueSurface:
    """Iterate values(k+1) = max(step(values(k)), target) from the initial slice.

    Refuses to run when the balayage order fails beyond tolerance.  With
    enforce_monotone the stepped slice is additionally clipped at the previous
    one; the quadrature-based stable step otherwise lets far-field noise of
    order dt * (quadrature error) accumulate above the initial potential.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if obstacle.initial.grid != step.grid:
        raise ValueError("obstacle grid does not match the step operator grid")
    tol = balayage_tol if balayage_tol is not None else contact_tolerance(obstacle.target)
    report = check_balayage(obstacle.initial, obstacle.target, tol)
    if not report.ok:
        raise BalayageError(
            f"initial potential fails to dominate the target: margin "
            f"{report.min_margin:.3e} at x={report.argmin}"
        )

    init_vals, n_capped_i = _cap_infinities(obstacle.initial.values)
    target_vals, n_capped_t = _cap_infinities(obstacle.target.values)
    freeze = GridFn(step.grid, init_vals)

    out = np.empty((n_steps + 1, step.grid.n_points))
    out[0] = init_vals
    f = GridFn(step.grid, init_vals)
    for k in range(n_steps):
        stepped = dual_step(f, step, muU_freeze=freeze)
        vals = stepped.values
        if enforce_monotone:
            vals = np.minimum(vals, f.values)
        vals = np.maximum(vals, target_vals)
        out[k + 1] = vals
        f = GridFn(step.grid, vals)
    return ValueSurface(step.grid, step.dt, n_steps, out, n_capped_i + n_capped_t)


def contact_mask(surface: ValueSurface, target: PotentialFn, tol: float) -> np.ndarray:
    """Boolean (n_steps+1, n_points) array of nodes in contact with the target."""
    target_vals, _ = _cap_infinities(target.values)
    return surface.values - target_vals[None, :] <= tol


def ost_value_oracle(
    obstacle: Obstacle, spec: CtmcRandomWalk, t: float, n: int
) -> GridFn:
    """Backward-induction value of stopping the uniformised dual chain by time t.

    Independent of the forward recursion: builds the explicit one-slice
    transition matrix of the dual walk (steps down with probability p, up with
    q) and inducts V_{k-1} = max(target, E[V_k]) from V_n = initial.
    """
    if not isinstance(spec, CtmcRandomWalk):
        raise ValueError("the stopping oracle is only available for the chain")
    grid = obstacle.initial.grid
    if abs(grid.dx - 1.0) > 1e-9:
        raise ValueError("the chain oracle needs an integer grid")
    if n < 1:
        raise ValueError("need at least one time slice")
    delta = t / n
    if spec.lam * delta >= 1.0:
        raise StabilityError(f"oracle slices too coarse: lam*dt = {spec.lam * delta} >= 1")

    m = grid.n_points
    init, _ = _cap_infinities(obstacle.initial.values)
    target, _ = _cap_infinities(obstacle.target.values)

    jump = spec.lam * delta
    P = np.zeros((m, m))
    for i in range(m):
        P[i, i] = 1.0 - jump
        if i - 1 >= 0:
            P[i, i - 1] = jump * spec.p
        if i + 1 < m:
            P[i, i + 1] = jump * spec.q
    # mass leaving the grid lands in frozen states carrying the initial potential:
    # geometric decay one step below the grid, constant one step above (the
    # closed kernel form for measures supported inside the grid)
    boundary = np.zeros(m)
    boundary[0] = jump * spec.p * init[0] * (spec.q / spec.p)
    boundary[-1] += jump * spec.q * init[-1]

    v = init.copy()
    for _ in range(n):
        v = np.maximum(target, P @ v + boundary)
    return GridFn(grid, v)


def grid_refinement_check(surface_n: ValueSurface, surface_2n: ValueSurface) -> float:
    """Sup-norm discrepancy on the common space-time nodes of a dyadic pair."""
    if surface_n.grid != surface_2n.grid:
        raise ValueError("surfaces live on different spatial grids")
    if not math.isclose(surface_2n.dt * 2.0, surface_n.dt, rel_tol=1e-12):
        raise ValueError("second surface must have exactly half the time step")
    k_max = min(surface_n.n_steps, surface_2n.n_steps // 2)
    if k_max < 1:
        raise ValueError("surfaces share no comparable slices")
    coarse = surface_n.values[: k_max + 1]
    fine = surface_2n.values[: 2 * k_max + 1 : 2]
    return float(np.max(np.abs(coarse - fine)))
