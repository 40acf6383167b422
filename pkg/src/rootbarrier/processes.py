"""Process descriptors: the Markov models the library knows how to handle."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union


@dataclass(frozen=True)
class CtmcRandomWalk:
    """Continuous-time asymmetric random walk on the integers.

    Jumps +1 with probability p > 1/2 (transience to the right), -1 with
    probability q = 1 - p, at exponential rate lam.
    """

    p: float
    lam: float = 1.0

    def __post_init__(self):
        if not 0.5 < self.p <= 1.0:
            raise ValueError(f"need p in (1/2, 1], got p={self.p}")
        if not self.lam > 0:
            raise ValueError(f"need lam > 0, got {self.lam}")

    @property
    def q(self) -> float:
        return 1.0 - self.p


@dataclass(frozen=True)
class BmLine:
    """Standard Brownian motion on the line (compensated kernel -|x-y|)."""


@dataclass(frozen=True)
class BmInterval:
    """Brownian motion killed on exiting the open interval (a, b)."""

    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"need a < b, got ({self.a}, {self.b})")


@dataclass(frozen=True)
class Stable:
    """Symmetric alpha-stable process, alpha in (0,1) so the process is transient."""

    alpha: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"need alpha in (0,1), got {self.alpha}")


BaseProcess = Union[CtmcRandomWalk, BmLine, BmInterval, Stable]


@dataclass(frozen=True)
class TimeChanged:
    """Base process run against the clock A_t = int_0^t a(X_s) ds.

    a must be positive and bounded between c1 and c2 on the region the
    computation touches; c1, c2 feed validation and stability bounds.
    """

    base: BaseProcess
    a: Callable[[float], float]
    c1: float
    c2: float

    def __post_init__(self):
        if isinstance(self.base, TimeChanged):
            raise ValueError("TimeChanged must wrap a plain process")
        if not 0 < self.c1 <= self.c2:
            raise ValueError(f"need 0 < c1 <= c2, got ({self.c1}, {self.c2})")


ProcessSpec = Union[BaseProcess, TimeChanged]


def base_process(spec: ProcessSpec) -> BaseProcess:
    """Unwrap a TimeChanged spec; identity otherwise."""
    return spec.base if isinstance(spec, TimeChanged) else spec
