"""UAV movement and hover energy accounting.

Flight legs blend horizontal and vertical per-meter rates by the elevation
angle of the leg; hovering burns a fixed power for a fixed sampling dwell.
Both directional energies are computed over the full 3D leg length, which
keeps the blend continuous in the elevation angle with the right limits at
level flight and pure climbs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .scene import GridSpec, VoxelIndex

__all__ = ["EnergyParams", "Leg", "leg_energy", "trajectory_energy", "route_energies_from"]


@dataclass(frozen=True)
class EnergyParams:
    """Per-meter flight rates (J/m), hover power (W) and dwell (s)."""

    e_horizontal_j_per_m: float = 100.0
    e_up_j_per_m: float = 150.0
    e_down_j_per_m: float = 80.0
    hover_power_w: float = 200.0
    hover_time_s: float = 5.0
    speed_mps: float = 1.0

    def __post_init__(self):
        for name in ("e_horizontal_j_per_m", "e_up_j_per_m", "e_down_j_per_m",
                     "hover_power_w", "hover_time_s", "speed_mps"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")

    @property
    def hover_energy_j(self) -> float:
        return self.hover_power_w * self.hover_time_s


@dataclass(frozen=True)
class Leg:
    """One flight segment plus the hover-to-sample at its destination."""

    from_index: VoxelIndex
    to_index: VoxelIndex
    distance_m: float
    theta_rad: float
    route_energy_j: float
    hover_energy_j: float

    @property
    def total_j(self) -> float:
        return self.route_energy_j + self.hover_energy_j


def leg_energy(from_index: VoxelIndex, to_index: VoxelIndex, grid: GridSpec,
               params: EnergyParams) -> Leg:
    """Energy for flying one leg and hovering to sample at its end.

    route = (1 - cos(theta)) * E_vertical + cos(theta) * E_horizontal, where
    theta is the absolute elevation angle and both directional energies use
    the full leg distance. Ascent and descent use separate vertical rates.
    """
    a = grid.voxel_center(from_index)
    b = grid.voxel_center(to_index)
    dx, dy, dz = (float(d) for d in b - a)
    dist = math.sqrt(dx * dx + dy * dy + dz * dz)
    horiz = math.hypot(dx, dy)
    theta = math.atan2(abs(dz), horiz)
    vertical_rate = params.e_up_j_per_m if dz >= 0 else params.e_down_j_per_m
    # explicit limit branches keep level flight and pure climbs exact
    if dist == 0.0:
        route = 0.0
    elif dz == 0.0:
        route = params.e_horizontal_j_per_m * dist
    elif horiz == 0.0:
        route = vertical_rate * dist
    else:
        cos_t = horiz / dist
        route = (1.0 - cos_t) * vertical_rate * dist + cos_t * params.e_horizontal_j_per_m * dist
    return Leg(
        from_index=VoxelIndex(*from_index),
        to_index=VoxelIndex(*to_index),
        distance_m=dist,
        theta_rad=theta,
        route_energy_j=route,
        hover_energy_j=params.hover_energy_j,
    )


def trajectory_energy(visits: Sequence[VoxelIndex], start: VoxelIndex, grid: GridSpec,
                      params: EnergyParams) -> tuple[float, list[Leg]]:
    """Total energy of a visit sequence flown from ``start``.

    Hover energy counts once per sampled visit; no hover at the start
    position itself. An empty visit list costs nothing.
    """
    grid.require(start)
    legs = []
    total = 0.0
    current = start
    for v in visits:
        leg = leg_energy(current, v, grid, params)
        legs.append(leg)
        total += leg.total_j
        current = v
    return total, legs


def route_energies_from(origin_m: np.ndarray, targets_m: np.ndarray,
                        params: EnergyParams) -> np.ndarray:
    """Vectorized route energies from one point to many (no hover term).

    Same arithmetic as ``leg_energy``, including the exact limit branches.
    """
    delta = np.atleast_2d(targets_m) - np.asarray(origin_m, dtype=float)
    dx, dy, dz = delta[:, 0], delta[:, 1], delta[:, 2]
    dist = np.sqrt(dx * dx + dy * dy + dz * dz)
    horiz = np.hypot(dx, dy)
    vertical_rate = np.where(dz >= 0, params.e_up_j_per_m, params.e_down_j_per_m)
    safe = np.where(dist > 0, dist, 1.0)
    cos_t = horiz / safe
    blend = (1.0 - cos_t) * vertical_rate * dist + cos_t * params.e_horizontal_j_per_m * dist
    route = np.where(dz == 0.0, params.e_horizontal_j_per_m * dist,
                     np.where(horiz == 0.0, vertical_rate * dist, blend))
    return np.where(dist > 0, route, 0.0)
