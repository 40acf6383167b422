"""Trajectory sampling, additive clocks, barrier hitting, and the Monte Carlo
verification that the stopped law matches the target.

Paths are independent given per-path seeds spawned from the master seed with
numpy's SeedSequence; the Monte Carlo loop is embarrassingly parallel and the
optional thread pool only changes wall time, never results.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from .barrier import Barrier, barrier_entry_at
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
from .special import gamma

_EVENT_BLOCK = 256
_GRID_BLOCK = 4096


@dataclass
class PathSample:
    """Sampled trajectory; piecewise_constant marks event-driven chain paths
    (the state holds between samples, so barriers can be entered mid-interval).
    """

    times: np.ndarray
    states: np.ndarray
    additive: np.ndarray | None = None
    piecewise_constant: bool = False

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.times.shape != self.states.shape:
            raise ValueError("times and states must have equal length")
        if self.times[0] != 0.0 or np.any(np.diff(self.times) <= 0):
            raise ValueError("times must start at 0 and increase strictly")
        if self.additive is not None:
            self.additive = np.asarray(self.additive, dtype=float)
            if self.additive.shape != self.times.shape:
                raise ValueError("additive length mismatch")
            if self.additive[0] != 0.0 or np.any(np.diff(self.additive) < 0):
                raise ValueError("additive clock must start at 0 and be non-decreasing")


@dataclass
class HittingResult:
    hit: bool
    t_hit: float = math.nan
    x_hit: float = math.nan
    a_hit: float = math.nan


@dataclass
class EmpiricalStats:
    n_paths: int
    hit_fraction: float
    stopped_values: np.ndarray
    mean_hit_time: float
    ks_stat: float
    quantile_table: list[tuple[float, float, float]]
    n_absorbed: int = 0
    live_fraction: float = 0.0
    unresolved_return_mass: float = 0.0

    def to_json(self) -> dict:
        return {
            "n_paths": self.n_paths,
            "hit_fraction": self.hit_fraction,
            "mean_hit_time": self.mean_hit_time,
            "ks_stat": self.ks_stat,
            "quantile_table": [
                {"q": q, "empirical": e, "target": t} for q, e, t in self.quantile_table
            ],
            "n_absorbed": self.n_absorbed,
            "live_fraction": self.live_fraction,
            "unresolved_return_mass": self.unresolved_return_mass,
        }


# -- increment sampling ------------------------------------------------------


def stable_standard(rng: np.random.Generator, n: int, alpha: float) -> np.ndarray:
    """Standard symmetric alpha-stable variates by the CMS transform."""
    v = rng.uniform(-math.pi / 2.0, math.pi / 2.0, n)
    w = rng.exponential(1.0, n)
    return (
        np.sin(alpha * v)
        / np.cos(v) ** (1.0 / alpha)
        * (np.cos((1.0 - alpha) * v) / w) ** ((1.0 - alpha) / alpha)
    )


def _grid_increments(proc, rng: np.random.Generator, dt: float, n: int) -> np.ndarray:
    if isinstance(proc, (BmLine, BmInterval)):
        return math.sqrt(dt) * rng.standard_normal(n)
    if isinstance(proc, Stable):
        return dt ** (1.0 / proc.alpha) * stable_standard(rng, n, proc.alpha)
    raise ValueError(f"no grid increments for {proc!r}")


def sample_path(
    spec: ProcessSpec, x0: float, dt: float, t_max: float, seed: int
) -> PathSample:
    """One trajectory on [0, t_max]; bit-reproducible for a given seed.

    Chain paths are exact event-driven simulations; Brownian and stable paths
    are exact-increment samples on the dt grid.  Time-changed specs return the
    base path with the additive clock filled in.
    """
    if dt <= 0 or t_max <= 0:
        raise ValueError("dt and t_max must be positive")
    rng = np.random.default_rng(seed)
    proc = base_process(spec)

    if isinstance(proc, CtmcRandomWalk):
        times = [0.0]
        states = [float(x0)]
        t = 0.0
        x = float(x0)
        while True:
            waits = rng.exponential(1.0 / proc.lam, _EVENT_BLOCK)
            steps = np.where(rng.random(_EVENT_BLOCK) < proc.p, 1.0, -1.0)
            for wgap, s in zip(waits, steps):
                t += wgap
                if t >= t_max:
                    break
                x += s
                times.append(t)
                states.append(x)
            if t >= t_max:
                break
        times.append(t_max)
        states.append(states[-1])
        path = PathSample(np.array(times), np.array(states), piecewise_constant=True)
    else:
        n = int(math.ceil(t_max / dt))
        incs = _grid_increments(proc, rng, dt, n)
        states = np.concatenate([[x0], x0 + np.cumsum(incs)])
        times = np.concatenate([[0.0], dt * np.arange(1, n + 1)])
        path = PathSample(times, states)

    if isinstance(spec, TimeChanged):
        path = accumulate_additive(path, spec.a)
    return path


def accumulate_additive(path: PathSample, a) -> PathSample:
    """Fill the additive clock by left-endpoint Riemann sums of a along the path."""
    a_vals = np.asarray(a(path.states[:-1]), dtype=float)
    if np.any(a_vals <= 0):
        raise ValueError("additive rate a must be positive along the path")
    additive = np.concatenate([[0.0], np.cumsum(a_vals * np.diff(path.times))])
    return PathSample(path.times, path.states, additive, path.piecewise_constant)


# -- hitting ------------------------------------------------------------------


def first_hitting(path: PathSample, b: Barrier, clock: str = "physical") -> HittingResult:
    """First index (or holding interval, for chain paths) inside the barrier."""
    if clock not in ("physical", "additive"):
        raise ValueError(f"unknown clock {clock!r}")
    if clock == "additive" and path.additive is None:
        raise ValueError("additive clock requested but the path carries none")
    cvals = path.times if clock == "physical" else path.additive

    if path.piecewise_constant:
        entries = barrier_entry_at(b, path.states[:-1])
        c0, c1 = cvals[:-1], cvals[1:]
        hit_clock = np.maximum(c0, entries)
        ok = hit_clock <= c1
        if not ok.any():
            return HittingResult(hit=False)
        i = int(np.argmax(ok))
        x_hit = float(path.states[i])
        if clock == "physical":
            t_hit = float(hit_clock[i])
            a_hit = (
                float(_interp_additive(path, i, t_hit))
                if path.additive is not None
                else math.nan
            )
        else:
            # convert the additive hit level back to physical time within the hold
            a_hit = float(hit_clock[i])
            rate = (path.additive[i + 1] - path.additive[i]) / (
                path.times[i + 1] - path.times[i]
            )
            t_hit = float(path.times[i] + (a_hit - path.additive[i]) / rate)
        return HittingResult(True, t_hit, x_hit, a_hit)

    entries = barrier_entry_at(b, path.states)
    mask = cvals >= entries
    mask[0] = False
    if not mask.any():
        return HittingResult(hit=False)
    i = int(np.argmax(mask))
    a_hit = math.nan if path.additive is None else float(path.additive[i])
    return HittingResult(True, float(path.times[i]), float(path.states[i]), a_hit)


def _interp_additive(path: PathSample, i: int, t_hit: float) -> float:
    rate = (path.additive[i + 1] - path.additive[i]) / (path.times[i + 1] - path.times[i])
    return path.additive[i] + rate * (t_hit - path.times[i])


# -- no-return probability ----------------------------------------------------


@lru_cache(maxsize=None)
def _no_return_prefactor(alpha: float) -> float:
    return gamma(1.0 - alpha / 2.0) / (gamma(alpha / 2.0) * gamma(1.0 - alpha))


def stable_no_return_prob(alpha: float, x: float) -> float:
    """Probability that the stable process started at x > 1 never returns to
    (-1, 1), by adaptive quadrature after removing the endpoint singularity
    with the substitution u = v^(2/alpha)."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0,1), got {alpha}")
    if x <= 1.0:
        return 0.0
    w = (x - 1.0) / (x + 1.0)
    if w >= 1.0 - 1e-14:
        return 1.0
    upper = w ** (alpha / 2.0)
    integrand = lambda v: (1.0 - v ** (2.0 / alpha)) ** (-alpha)
    val, _ = integrate.quad(integrand, 0.0, upper, limit=200)
    prob = _no_return_prefactor(alpha) * (2.0 / alpha) * val
    return min(prob, 1.0)


# -- goodness of fit ----------------------------------------------------------


def ks_statistic(samples, target_cdf) -> float:
    """One-sample Kolmogorov-Smirnov sup distance."""
    s = np.sort(np.asarray(samples, dtype=float))
    n = s.size
    if n == 0:
        raise ValueError("no samples")
    f = np.asarray(target_cdf(s), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def quantile_table(samples, target_quantile, qs) -> list[tuple[float, float, float]]:
    s = np.asarray(samples, dtype=float)
    if s.size == 0:
        raise ValueError("no samples")
    return [
        (float(q), float(np.quantile(s, q)), float(target_quantile(q))) for q in qs
    ]


# -- the Monte Carlo embedding loop -------------------------------------------


@dataclass
class _PathOutcome:
    hit: bool
    t_hit: float = math.nan
    x_hit: float = math.nan
    a_hit: float = math.nan
    absorbed: bool = False
    x_end: float = math.nan


def _run_single_path(
    spec, x0, dt, t_max, rng, b: Barrier, clock: str, policy: str, x_far: float
) -> _PathOutcome:
    proc = base_process(spec)
    a_fn = spec.a if isinstance(spec, TimeChanged) else None

    if isinstance(proc, CtmcRandomWalk):
        t, x, acc = 0.0, float(x0), 0.0
        while t < t_max:
            waits = rng.exponential(1.0 / proc.lam, _EVENT_BLOCK)
            steps = np.where(rng.random(_EVENT_BLOCK) < proc.p, 1.0, -1.0)
            times = np.concatenate([[t], t + np.cumsum(waits)])
            states = np.concatenate([[x], x + np.cumsum(steps)])
            keep = times[:-1] < t_max
            times = np.concatenate([times[:-1][keep], [min(times[-1], t_max)]])
            states = states[: times.size]
            if a_fn is None:
                add = None
                cvals = times
            else:
                a_vals = np.asarray(a_fn(states[:-1]), dtype=float)
                add = acc + np.concatenate([[0.0], np.cumsum(a_vals * np.diff(times))])
                cvals = times if clock == "physical" else add
            entries = barrier_entry_at(b, states[:-1])
            hit_clock = np.maximum(cvals[:-1], entries)
            ok = hit_clock <= cvals[1:]
            if ok.any():
                i = int(np.argmax(ok))
                if clock == "physical" or a_fn is None:
                    t_hit, a_hit = float(hit_clock[i]), math.nan
                    if add is not None:
                        rate = (add[i + 1] - add[i]) / (times[i + 1] - times[i])
                        a_hit = float(add[i] + rate * (t_hit - times[i]))
                else:
                    rate = (add[i + 1] - add[i]) / (times[i + 1] - times[i])
                    t_hit = float(times[i] + (hit_clock[i] - add[i]) / rate)
                    a_hit = float(hit_clock[i])
                return _PathOutcome(True, t_hit, float(states[i]), a_hit)
            t, x = float(times[-1]), float(states[-1])
            if add is not None:
                acc = float(add[-1])
        return _PathOutcome(False, x_end=x)

    # dt-grid processes
    t, x, acc = 0.0, float(x0), 0.0
    pending_return = False
    while t < t_max:
        n = min(_GRID_BLOCK, int(math.ceil((t_max - t) / dt)))
        incs = _grid_increments(proc, rng, dt, n)
        states = np.concatenate([[x], x + np.cumsum(incs)])
        times = t + dt * np.arange(n + 1)
        if a_fn is None:
            cvals = times
            add = None
        else:
            a_vals = np.asarray(a_fn(states[:-1]), dtype=float)
            add = acc + np.concatenate([[0.0], np.cumsum(a_vals * dt)])
            cvals = times if clock == "physical" else add
        entries = barrier_entry_at(b, states)
        mask = cvals >= entries
        mask[0] = False

        far_idx = None
        if policy == "absorb" and isinstance(proc, Stable):
            far = np.abs(states) > x_far
            far[0] = far[0] and not pending_return
            if pending_return:
                back = np.abs(states) <= x_far
                back[0] = False
                first_back = int(np.argmax(back)) if back.any() else states.size
                far[:first_back] = False
                if back.any():
                    pending_return = False
            if far.any():
                far_idx = int(np.argmax(far))

        if mask.any():
            i = int(np.argmax(mask))
            if far_idx is None or i <= far_idx:
                a_hit = math.nan if add is None else float(add[i])
                return _PathOutcome(True, float(times[i]), float(states[i]), a_hit)
        if far_idx is not None:
            x_at = float(abs(states[far_idx]))
            if rng.random() < stable_no_return_prob(proc.alpha, x_at):
                return _PathOutcome(False, absorbed=True, x_end=x_at)
            pending_return = True
        t = float(times[-1])
        x = float(states[-1])
        if add is not None:
            acc = float(add[-1])
    return _PathOutcome(False, x_end=x)


def run_embedding(
    spec: ProcessSpec,
    mu: Measure,
    b: Barrier,
    n_paths: int,
    dt: float,
    t_max: float,
    seed: int,
    clock: str = "physical",
    target: Measure | None = None,
    stable_policy: str = "horizon",
    x_far: float = 5.0,
    threads: int = 1,
    quantiles=(0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9),
) -> EmpiricalStats:
    """Sample starting points from mu, run paths to the barrier, and compare the
    stopped values against the target law."""
    if n_paths <= 0:
        raise ValueError("n_paths must be positive")
    if stable_policy not in ("horizon", "absorb"):
        raise ValueError(f"unknown stable policy {stable_policy!r}")
    if isinstance(spec, TimeChanged) and clock != "additive":
        raise ValueError("time-changed embeddings must use the additive clock")

    ss = np.random.SeedSequence(seed)
    children = ss.spawn(n_paths + 1)
    x0s = mu.sample(n_paths, np.random.default_rng(children[-1]))

    def simulate(i):
        rng = np.random.default_rng(children[i])
        return _run_single_path(
            spec, x0s[i], dt, t_max, rng, b, clock, stable_policy, x_far
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(simulate, range(n_paths)))
    else:
        outcomes = [simulate(i) for i in range(n_paths)]

    hits = [o for o in outcomes if o.hit]
    stopped = np.array([o.x_hit for o in hits])
    hit_fraction = len(hits) / n_paths
    mean_t = float(np.mean([o.t_hit for o in hits])) if hits else math.nan
    n_absorbed = sum(o.absorbed for o in outcomes)
    live = [o for o in outcomes if not o.hit and not o.absorbed]

    unresolved = 0.0
    proc = base_process(spec)
    if live and isinstance(proc, Stable):
        probs = [
            1.0 - stable_no_return_prob(proc.alpha, abs(o.x_end))
            if abs(o.x_end) > 1.0
            else 1.0
            for o in live
        ]
        unresolved = float(np.sum(probs)) / n_paths

    ks = math.nan
    table = []
    if target is not None and stopped.size:
        ks = ks_statistic(stopped, target.cdf)
        table = quantile_table(stopped, target.quantile, quantiles)

    return EmpiricalStats(
        n_paths=n_paths,
        hit_fraction=hit_fraction,
        stopped_values=stopped,
        mean_hit_time=mean_t,
        ks_stat=ks,
        quantile_table=table,
        n_absorbed=n_absorbed,
        live_fraction=len(live) / n_paths,
        unresolved_return_mass=unresolved,
    )
