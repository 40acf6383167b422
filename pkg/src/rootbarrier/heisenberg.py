"""Heisenberg-group helpers: homogeneous norm, group product, potential, and
the explicit balayage-pair density on the unit gauge ball.

Points live in exponential coordinates (x, y, a) on the step-2 free nilpotent
group with two generators.  The potential's multiplicative constant is not
pinned down here; it is set to 1, so only scale-free quantities (ratios,
inequalities, the normalised density) are meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class HeisenbergPoint:
    x: float
    y: float
    a: float


def heisenberg_mul(g: HeisenbergPoint, h: HeisenbergPoint) -> HeisenbergPoint:
    return HeisenbergPoint(
        g.x + h.x,
        g.y + h.y,
        g.a + h.a + 0.5 * (g.x * h.y - g.y * h.x),
    )


def heisenberg_inverse(g: HeisenbergPoint) -> HeisenbergPoint:
    return HeisenbergPoint(-g.x, -g.y, -g.a)


def heisenberg_norm(g: HeisenbergPoint) -> float:
    """Homogeneous gauge N(x,y,a) = ((x^2+y^2)^2 + 16 a^2)^(1/4)."""
    r2 = g.x * g.x + g.y * g.y
    return (r2 * r2 + 16.0 * g.a * g.a) ** 0.25


def heisenberg_potential(g: HeisenbergPoint, h: HeisenbergPoint) -> float:
    """Potential kernel N(g^{-1} h)^{-2} (homogeneous dimension 4), constant 1."""
    n = heisenberg_norm(heisenberg_mul(heisenberg_inverse(g), h))
    if n == 0.0:
        return math.inf
    return n**-2


def heisenberg_nu_density(g: HeisenbergPoint) -> float:
    """Density of the explicit measure in balayage order after a point mass at
    the identity: (4/pi) (x^2+y^2)/sqrt((x^2+y^2)^2+16a^2) on the unit gauge ball.
    """
    r2 = g.x * g.x + g.y * g.y
    n4 = r2 * r2 + 16.0 * g.a * g.a
    if n4 >= 1.0 or n4 == 0.0:
        return 0.0
    return 4.0 / math.pi * r2 / math.sqrt(n4)
