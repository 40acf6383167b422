"""One-step actions of the dual semigroup on grid functions.

Each supported process gets an explicit step: the uniformised chain step for
the random walk, an exact (normalised, truncated) Gaussian convolution for
Brownian motion, and an explicit Euler step with a quadrature-discretised
fractional Laplacian for the stable process.  Time-changed steps scale the
base generator by 1/a.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from scipy import sparse

from .grids import GridFn, GridSpec1D
from .processes import (
    BmInterval,
    BmLine,
    CtmcRandomWalk,
    ProcessSpec,
    Stable,
    TimeChanged,
)
from .special import fractional_laplacian_constant


class StabilityError(RuntimeError):
    """Raised when dt violates the monotonicity bound of an explicit step."""


class AccuracyWarning(UserWarning):
    pass


BoundaryPolicy = Literal["freeze_to_initial", "absorb_to_zero"]

# 15-point Gauss-Kronrod rule on [-1, 1] (QUADPACK abscissae/weights).
_GK15_NODES = np.array(
    [
        -0.9914553711208126,
        -0.9491079123427585,
        -0.8648644233597691,
        -0.7415311855993944,
        -0.5860872354676911,
        -0.4058451513773972,
        -0.2077849550078985,
        0.0,
        0.2077849550078985,
        0.4058451513773972,
        0.5860872354676911,
        0.7415311855993944,
        0.8648644233597691,
        0.9491079123427585,
        0.9914553711208126,
    ]
)
_GK15_WEIGHTS = np.array(
    [
        0.0229353220105292,
        0.0630920926299786,
        0.1047900103222502,
        0.1406532597155259,
        0.1690047266392679,
        0.1903505780647854,
        0.2044329400752989,
        0.2094821410847278,
        0.2044329400752989,
        0.1903505780647854,
        0.1690047266392679,
        0.1406532597155259,
        0.1047900103222502,
        0.0630920926299786,
        0.0229353220105292,
    ]
)


# GK15 panels wider than this under-resolve oscillatory fields (symbol test)
_MAX_PANEL_WIDTH = 2.0


def _pv_quadrature(alpha: float, dx: float, K: float):
    """Offsets/weights discretising the principal-value integral.

    The symmetric-difference integrand is integrated over [0, dx] by a local
    second-difference Taylor cell, over [dx, K] by 15-point Gauss-Kronrod on
    dyadic panels (width-capped so oscillations stay resolved), and over
    (K, inf) by the asymptotic tail 2(f(y) - far limit) * z^(-1-alpha).
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0,1), got {alpha}")
    if K <= dx:
        raise ValueError(f"truncation radius K={K} must exceed the mesh {dx}")
    c2 = fractional_laplacian_constant(alpha)
    near_coef = c2 * dx ** (-alpha) / (2.0 - alpha)
    offsets, weights = [], []
    lo = dx
    while lo < K:
        hi = min(2.0 * lo, lo + _MAX_PANEL_WIDTH, K)
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        z = mid + half * _GK15_NODES
        offsets.append(z)
        weights.append(half * _GK15_WEIGHTS * c2 * z ** (-1.0 - alpha))
        lo = hi
    tail_coef = c2 * K ** (-alpha) / alpha
    return np.concatenate(offsets), np.concatenate(weights), near_coef, tail_coef


def frac_laplacian_apply(
    f: GridFn, alpha: float, K: float, far_limit: float | None = None
) -> GridFn:
    """Discrete fractional Laplacian of order alpha on the grid.

    f is extended beyond the grid by its boundary values; far_limit is the
    value f settles at beyond the truncation radius K (defaults to the mean of
    the boundary values, so constants map to zero exactly; pass 0 for fields
    that decay or oscillate around zero).
    """
    offs, wts, near, tail = _pv_quadrature(alpha, f.grid.dx, K)
    xs = f.grid.points()
    v = f.values
    left, right = v[0], v[-1]
    if far_limit is None:
        far_limit = 0.5 * (left + right)
    padded = np.pad(v, 1, mode="edge")
    out = near * (2.0 * v - padded[2:] - padded[:-2])
    for z, w in zip(offs, wts):
        vp = np.interp(xs + z, xs, v, left=left, right=right)
        vm = np.interp(xs - z, xs, v, left=left, right=right)
        out += w * (2.0 * v - vp - vm)
    out += tail * 2.0 * (v - far_limit)
    return GridFn(f.grid, out)


def frac_tail_field(
    grid: GridSpec1D, alpha: float, K: float, freeze_fn: Callable
) -> np.ndarray:
    """Analytic tail b(y) = c2 * int_K^inf (frz(y+z) + frz(y-z)) z^(-1-alpha) dz.

    Evaluates the frozen field (the initial potential, available in closed form
    at arbitrary points) on Gauss-Kronrod panels out to 1024 K; the remainder
    beyond that is negligible for decaying potentials.
    """
    c2 = fractional_laplacian_constant(alpha)
    ys = grid.points()
    out = np.zeros_like(ys)
    lo = K
    while lo < 1024.0 * K:
        hi = 2.0 * lo
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        z = mid + half * _GK15_NODES
        w = half * _GK15_WEIGHTS * c2 * z ** (-1.0 - alpha)
        for zq, wq in zip(z, w):
            out += wq * (
                np.asarray(freeze_fn(ys + zq), dtype=float)
                + np.asarray(freeze_fn(ys - zq), dtype=float)
            )
        lo = hi
    return out


def frac_laplacian_matrix(grid: GridSpec1D, alpha: float, K: float):
    """Sparse A and tail coefficient with
    frac_laplacian_apply(f, alpha, K, far) == A f - 2 * tail_coef * far."""
    offs, wts, near, tail = _pv_quadrature(alpha, grid.dx, K)
    n = grid.n_points
    xs = grid.points()
    dx = grid.dx
    rows, cols, vals = [], [], []
    j = np.arange(n)

    def add(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    def add_interp(weight, z):
        # contribution weight * f(x_j + z) with linear interpolation / edge clamp
        p = (xs + z - grid.x_min) / dx
        i0 = np.clip(np.floor(p).astype(int), 0, n - 1)
        i1 = np.clip(i0 + 1, 0, n - 1)
        frac = np.clip(p - i0, 0.0, 1.0)
        frac = np.where(p < 0, 0.0, np.where(p > n - 1, 1.0, frac))
        i0 = np.where(p > n - 1, n - 1, i0)
        i1 = np.where(p < 0, 0, i1)
        add(j, i0, weight * (1.0 - frac) * np.ones(n))
        add(j, i1, weight * frac * np.ones(n))

    # near cell: near * (2 f_j - f_{j+1} - f_{j-1}); edges clamp to the boundary
    add(j, j, np.full(n, 2.0 * near))
    add(j, np.clip(j + 1, 0, n - 1), np.full(n, -near))
    add(j, np.clip(j - 1, 0, n - 1), np.full(n, -near))
    for z, w in zip(offs, wts):
        add(j, j, np.full(n, 2.0 * w))
        add_interp(-w, z)
        add_interp(-w, -z)
    add(j, j, np.full(n, 2.0 * tail))

    A = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    return A.tocsr(), tail


@dataclass
class StepOperator:
    """One dual-semigroup step P_dt on a fixed grid.

    freeze_fn gives the initial-potential value at off-grid points under the
    freeze_to_initial policy; absorb_to_zero uses 0 instead.  For the stable
    process, truncation_radius is the integration cutoff K (defaults to the
    grid half-width) and nodes beyond it are frozen.
    """

    spec: ProcessSpec
    grid: GridSpec1D
    dt: float
    boundary_policy: BoundaryPolicy = "freeze_to_initial"
    freeze_fn: Callable | None = None
    truncation_radius: float | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.boundary_policy not in ("freeze_to_initial", "absorb_to_zero"):
            raise ValueError(f"unknown boundary policy {self.boundary_policy!r}")
        base = self.spec.base if isinstance(self.spec, TimeChanged) else self.spec
        if isinstance(base, BmInterval):
            self.boundary_policy = "absorb_to_zero"
        if isinstance(base, Stable) and self.truncation_radius is None:
            self.truncation_radius = max(abs(self.grid.x_min), abs(self.grid.x_max))
        self._validate_stability()

    # -- plumbing -----------------------------------------------------------

    def _a_values(self) -> np.ndarray | None:
        if not isinstance(self.spec, TimeChanged):
            return None
        if "a_vals" not in self._cache:
            a = np.asarray([self.spec.a(x) for x in self.grid.points()], dtype=float)
            if np.any(a <= 0):
                raise ValueError("time-change rate a must be positive on the grid")
            self._cache["a_vals"] = a
        return self._cache["a_vals"]

    def _frac_matrix(self):
        base = self.spec.base if isinstance(self.spec, TimeChanged) else self.spec
        if "frac" not in self._cache:
            self._cache["frac"] = frac_laplacian_matrix(
                self.grid, base.alpha, self.truncation_radius
            )
        return self._cache["frac"]

    def _frac_apply(self, values: np.ndarray, freeze_values: np.ndarray) -> np.ndarray:
        """(-Lap)^(alpha/2)_h values, with the tail beyond the truncation radius
        integrated against the frozen field (analytically when freeze_fn is
        available, else against its boundary level)."""
        A, tail_coef = self._frac_matrix()
        base = self.spec.base if isinstance(self.spec, TimeChanged) else self.spec
        if self.freeze_fn is not None:
            if "tail_field" not in self._cache:
                self._cache["tail_field"] = frac_tail_field(
                    self.grid, base.alpha, self.truncation_radius, self.freeze_fn
                )
            b = self._cache["tail_field"]
        else:
            b = 2.0 * tail_coef * 0.5 * (freeze_values[0] + freeze_values[-1])
        return A @ values - b

    def _off_grid_freeze(self, x: np.ndarray) -> np.ndarray:
        if self.boundary_policy == "absorb_to_zero" or self.freeze_fn is None:
            return np.zeros_like(x)
        key = ("freeze", x.tobytes())
        if key not in self._cache:
            self._cache[key] = np.asarray(self.freeze_fn(x), dtype=float)
        return self._cache[key]

    def _validate_stability(self):
        base = self.spec.base if isinstance(self.spec, TimeChanged) else self.spec
        a_min = self.spec.c1 if isinstance(self.spec, TimeChanged) else 1.0
        if isinstance(base, CtmcRandomWalk):
            if base.lam * self.dt / a_min >= 1.0:
                raise StabilityError(
                    f"explicit chain step needs lam*dt/a < 1, got {base.lam * self.dt / a_min}"
                )
        elif isinstance(base, Stable):
            diag = float(self._frac_matrix()[0].diagonal().max())
            if self.dt * diag / a_min > 1.0:
                raise StabilityError(
                    f"stable step needs dt <= {a_min / diag:.3e} for monotonicity, got {self.dt}"
                )
        elif isinstance(base, (BmLine, BmInterval)):
            if isinstance(self.spec, TimeChanged):
                if self.dt / (a_min * self.grid.dx**2) > 1.0:
                    raise StabilityError(
                        "time-changed Brownian step needs dt <= a_min*dx^2 "
                        f"= {a_min * self.grid.dx**2:.3e}, got {self.dt}"
                    )
            elif np.sqrt(self.dt) < self.grid.dx / 2.0:
                warnings.warn(
                    "Gaussian step kernel is sub-grid (sqrt(dt) < dx/2); "
                    "results lose accuracy",
                    AccuracyWarning,
                    stacklevel=3,
                )

    # -- generator application ----------------------------------------------

    def apply_generator(self, f: GridFn) -> GridFn:
        """L_h f for the base process (freeze handling included)."""
        base = self.spec.base if isinstance(self.spec, TimeChanged) else self.spec
        xs = self.grid.points()
        v = f.values
        if isinstance(base, CtmcRandomWalk):
            if abs(self.grid.dx - 1.0) > 1e-9:
                raise ValueError("chain steps need an integer grid (dx = 1)")
            below = np.empty_like(v)
            above = np.empty_like(v)
            below[1:] = v[:-1]
            above[:-1] = v[1:]
            below[0] = self._off_grid_freeze(np.array([xs[0] - 1.0]))[0]
            above[-1] = self._off_grid_freeze(np.array([xs[-1] + 1.0]))[0]
            return GridFn(self.grid, base.lam * (base.p * below + base.q * above - v))
        if isinstance(base, (BmLine, BmInterval)):
            dx = self.grid.dx
            ext = self._off_grid_freeze(np.array([xs[0] - dx, xs[-1] + dx]))
            padded = np.concatenate([[ext[0]], v, [ext[1]]])
            return GridFn(self.grid, 0.5 * (padded[2:] - 2.0 * v + padded[:-2]) / dx**2)
        if isinstance(base, Stable):
            return GridFn(self.grid, -self._frac_apply(v, v))
        raise ValueError(f"unknown process {base!r}")


def ctmc_dual_step(f: GridFn, op: StepOperator) -> GridFn:
    """(P f)(y) = (1 - lam dt) f(y) + lam dt (p f(y-1) + q f(y+1))."""
    base = op.spec.base if isinstance(op.spec, TimeChanged) else op.spec
    if not isinstance(base, CtmcRandomWalk):
        raise ValueError("ctmc_dual_step needs a CtmcRandomWalk operator")
    gen = op.apply_generator(f)
    return GridFn(op.grid, f.values + op.dt * gen.values)


def bm1d_dual_step(f: GridFn, op: StepOperator) -> GridFn:
    """Normalised Gaussian-kernel convolution, truncated at 6 sqrt(dt)."""
    base = op.spec.base if isinstance(op.spec, TimeChanged) else op.spec
    if not isinstance(base, (BmLine, BmInterval)):
        raise ValueError("bm1d_dual_step needs a Brownian operator")
    dx = op.grid.dx
    m = max(1, int(np.ceil(6.0 * np.sqrt(op.dt) / dx)))
    k = np.arange(-m, m + 1)
    w = np.exp(-((k * dx) ** 2) / (2.0 * op.dt))
    w /= w.sum()
    xs = op.grid.points()
    ext_left = xs[0] + dx * np.arange(-m, 0)
    ext_right = xs[-1] + dx * np.arange(1, m + 1)
    padded = np.concatenate(
        [op._off_grid_freeze(ext_left), f.values, op._off_grid_freeze(ext_right)]
    )
    out = np.convolve(padded, w[::-1], mode="valid")
    if isinstance(base, BmInterval):
        inside = (xs > base.a) & (xs < base.b)
        out = np.where(inside, out, 0.0)
    return GridFn(op.grid, out)


def stable_dual_step(f: GridFn, op: StepOperator, muU_freeze: GridFn) -> GridFn:
    """Explicit Euler step f - dt * (-Lap)^(alpha/2)_h f inside [-K, K].

    Nodes beyond the truncation radius are frozen to muU_freeze.  The sign is
    the dissipative one (the generator is minus the fractional Laplacian), so
    value surfaces decrease in time.
    """
    base = op.spec.base if isinstance(op.spec, TimeChanged) else op.spec
    if not isinstance(base, Stable):
        raise ValueError("stable_dual_step needs a Stable operator")
    out = f.values - op.dt * op._frac_apply(f.values, muU_freeze.values)
    xs = op.grid.points()
    outside = np.abs(xs) > op.truncation_radius + 1e-12
    if outside.any():
        out = np.where(outside, muU_freeze.values, out)
    return GridFn(op.grid, out)


def timechange_dual_step(
    f: GridFn, base_apply_generator: Callable[[GridFn], GridFn], a: Callable, dt: float
) -> GridFn:
    """One explicit step f + dt * (1/a) L_h f of the time-changed dual process."""
    a_vals = np.asarray([a(x) for x in f.grid.points()], dtype=float)
    if np.any(a_vals <= 0):
        raise ValueError("time-change rate a must be positive on the grid")
    gen = base_apply_generator(f)
    return GridFn(f.grid, f.values + dt * gen.values / a_vals)


def dual_step(f: GridFn, op: StepOperator, muU_freeze: GridFn | None = None) -> GridFn:
    """Dispatch one dual-semigroup step for any supported spec."""
    if isinstance(op.spec, TimeChanged):
        a_vals = op._a_values()
        base = op.spec.base
        if isinstance(base, Stable):
            freeze = f if muU_freeze is None else muU_freeze
            gen = -op._frac_apply(f.values, freeze.values)
            out = f.values + op.dt * gen / a_vals
            outside = np.abs(op.grid.points()) > op.truncation_radius + 1e-12
            if outside.any():
                out = np.where(outside, freeze.values, out)
            return GridFn(op.grid, out)
        gen = op.apply_generator(f)
        return GridFn(op.grid, f.values + op.dt * gen.values / a_vals)
    base = op.spec
    if isinstance(base, CtmcRandomWalk):
        return ctmc_dual_step(f, op)
    if isinstance(base, (BmLine, BmInterval)):
        return bm1d_dual_step(f, op)
    if isinstance(base, Stable):
        if muU_freeze is None:
            muU_freeze = f
        return stable_dual_step(f, op, muU_freeze)
    raise ValueError(f"unknown process {base!r}")
