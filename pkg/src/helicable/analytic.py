"""Closed-form references used to validate the finite-element results."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .geometry import MU0


@dataclass(frozen=True)
class RoundWire:
    ratio: float  # R_AC / R_DC
    r_dc: float  # ohm/m
    r_ac: float  # ohm/m
    skin_depth: float  # m

    def loss(self, current_amplitude: float) -> float:
        """Time-averaged loss per length in W/m for a current amplitude."""
        return 0.5 * abs(current_amplitude) ** 2 * self.r_ac


def skin_depth(rho: float, mu: float, f: float) -> float:
    return float(np.sqrt(2 * rho / (2 * np.pi * f * mu)))


def kelvin_ratio(x: float) -> float:
    """R_AC/R_DC of a solid round wire with ``x = sqrt(2) r_c / delta``."""
    if x < 1e-2:
        return 1.0 + x**4 / 192.0
    ber, bei = special.ber(x), special.bei(x)
    berp, beip = special.berp(x), special.beip(x)
    return float(0.5 * x * (ber * beip - bei * berp) / (berp**2 + beip**2))


def bessel_ratio(x: float) -> float:
    """Same quantity through ``J0/J1`` of a complex argument."""
    if x < 1e-2:
        return 1.0 + x**4 / 192.0
    ka = x * np.exp(-0.25j * np.pi)  # (1 - j) r_c / delta
    return float((ka * special.jv(0, ka) / (2 * special.jv(1, ka))).real)


def low_frequency_ratio(x: float) -> float:
    return 1.0 + x**4 / 192.0


def analytic_round_wire(r_c: float, rho: float, mu: float = MU0, f: float = 50.0) -> RoundWire:
    if not (r_c > 0 and rho > 0 and mu > 0):
        raise ValueError("radius, resistivity and permeability must be positive")
    if f < 0:
        raise ValueError("frequency must be non-negative")
    r_dc = rho / (np.pi * r_c**2)
    if f == 0:
        return RoundWire(1.0, r_dc, r_dc, np.inf)
    delta = skin_depth(rho, mu, f)
    ratio = kelvin_ratio(np.sqrt(2) * r_c / delta)
    return RoundWire(ratio, r_dc, ratio * r_dc, delta)


def dc_helix_loss(currents, rho: float, r_c: float, layer_radii, helix) -> float:
    """DC loss per unit length of helical round wires.

    Each wire is longer than the cable by the arc-length factor
    ``sqrt(1 + (alpha r / beta)^2)`` of its helix.
    """
    currents = np.abs(np.asarray(currents, dtype=complex))
    stretch = np.sqrt(1 + (helix.alpha * np.asarray(layer_radii) / helix.beta) ** 2)
    return float(np.sum(0.5 * currents**2 * rho * stretch / (np.pi * r_c**2)))
