"""Compliant normal contact and regularized Coulomb friction.

The normal law is a Hunt-Crossley model whose stiffness-damping factor is
extended exponentially for separating contacts, so the force stays
continuous at contact establishment and never turns adhesive during
detachment.  Friction is a smooth arctan approximation of Coulomb's law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class ContactParams:
    stiffness: float = 1.0e5    # N/m^c
    damping: float = 1.0e3      # N.s/m^(c+1)
    exponent: float = 1.0       # geometry exponent c
    mu: float = 0.6             # friction coefficient
    smoothing: float = 100.0    # arctan slope shaping (s/m)

    def __post_init__(self):
        if self.stiffness <= 0.0 or self.damping <= 0.0 or self.smoothing <= 0.0:
            raise ValueError("stiffness, damping and smoothing must be positive")
        if self.exponent <= 0.0:
            raise ValueError("exponent must be positive")
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError("mu must lie in [0, 1]")


@dataclass
class ContactPoint:
    """Resolved state of one candidate contact point."""

    gap: float
    gap_rate: float
    slip_rate: float
    normal_force: float
    tangential_force: float

    @property
    def in_contact(self) -> bool:
        return self.gap <= 0.0


def stiffness_factor(gap_rate: float, params: ContactParams) -> float:
    """Velocity-dependent factor K(gap_rate); continuous and C1 at zero."""
    if gap_rate <= 0.0:
        return params.stiffness - params.damping * gap_rate
    return params.stiffness * math.exp(-(params.damping / params.stiffness) * gap_rate)


def normal_force(gap: float, gap_rate: float, params: ContactParams) -> float:
    """Nonnegative normal force; zero for open contacts (gap > 0)."""
    if gap > 0.0:
        return 0.0
    return stiffness_factor(gap_rate, params) * (-gap) ** params.exponent


def tangential_force(lam_n: float, slip_rate: float, params: ContactParams) -> float:
    """Smoothed Coulomb force magnitude, odd in the slip rate.

    Returned with the sign of the slip rate; the simulator applies it with
    the orientation that opposes the robot-side slip under the contact
    Jacobian convention of :mod:`impactgrasp.dynamics`.
    """
    return lam_n * params.mu * (2.0 / math.pi) * math.atan(params.smoothing * slip_rate)


def resolve_contact(gap: float, gap_rate: float, slip_rate: float, params: ContactParams) -> ContactPoint:
    lam_n = normal_force(gap, gap_rate, params)
    lam_t = tangential_force(lam_n, slip_rate, params)
    return ContactPoint(gap, gap_rate, slip_rate, lam_n, lam_t)
