"""Sampling-sequence planners.

Three strategies produce a mission of measured voxels:

* random: uniform membership over the grid, flown in greedy min-energy order;
* roi_driven: random pre-sample, then batches that greedily maximize
  estimated-interest per unit flight-plus-hover energy;
* roi_only: same loop but ranking by estimated interest alone.

Planners only ever see the measurements they have taken; the ground-truth
interest regions are never consulted. Interest estimates are frozen for the
duration of one batch and refreshed between batches.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import estimate as _estimate
from .energy import EnergyParams, Leg, leg_energy, route_energies_from
from .errors import ConfigError, PlannerError
from .estimate import IdwParams
from .scene import (GridSpec, PropagationParams, RoiSet, SpectrumTensor,
                    VoxelIndex, measure, sparse_tensor)

__all__ = [
    "Strategy",
    "DeployConfig",
    "Visit",
    "MissionLog",
    "round_half_up",
    "greedy_energy_order",
    "presample",
    "select_next",
    "run_mission",
    "write_mission_csv",
    "read_mission_csv",
]


class Strategy(str, Enum):
    RANDOM = "random"
    ROI_DRIVEN = "roi_driven"
    ROI_ONLY = "roi_only"


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class DeployConfig:
    """Mission shape: how much to sample and in what rhythm.

    sampling_ratio is the final fraction of voxels measured; presample_ratio
    is the random warm-up fraction and step_ratio the fraction added per
    adaptive batch (both ignored by the random strategy).
    """

    strategy: Strategy
    sampling_ratio: float
    presample_ratio: float = 0.05
    step_ratio: float = 0.05
    start: VoxelIndex = VoxelIndex(1, 1, 1)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        object.__setattr__(self, "start", VoxelIndex(*self.start))

    def plan(self, grid: GridSpec) -> "MissionPlan":
        """Resolve ratios to integer visit counts, validating the invariants."""
        n = grid.n_voxels
        if not 0 < self.sampling_ratio <= 1:
            raise ConfigError(f"sampling ratio must be in (0, 1], got {self.sampling_ratio}")
        n_total = round_half_up(self.sampling_ratio * n)
        if n_total < 1:
            raise ConfigError("sampling ratio rounds to zero samples")
        if not grid.contains(self.start):
            raise ConfigError(f"start voxel {tuple(self.start)} outside grid")
        if self.strategy is Strategy.RANDOM:
            return MissionPlan(n_total=n_total, n_presample=n_total, step_counts=[])
        if not 0 < self.presample_ratio <= self.sampling_ratio:
            raise ConfigError(
                f"presample ratio must be in (0, r], got {self.presample_ratio}")
        n_pre = round_half_up(self.presample_ratio * n)
        if n_pre < 1:
            raise ConfigError("presample ratio rounds to zero samples")
        span = self.sampling_ratio - self.presample_ratio
        if span <= 1e-12:
            return MissionPlan(n_total=n_pre, n_presample=n_pre, step_counts=[])
        if not 0 < self.step_ratio <= span + 1e-12:
            raise ConfigError(f"step ratio must be in (0, r - r0], got {self.step_ratio}")
        steps_f = span / self.step_ratio
        steps = round(steps_f)
        if steps < 1 or abs(steps_f - steps) > 1e-9:
            raise ConfigError(
                f"(r - r0)/rp = {steps_f} is not a whole number of steps")
        per_step = round_half_up(self.step_ratio * n)
        counts = [per_step] * steps
        counts[-1] = n_total - n_pre - per_step * (steps - 1)
        if counts[-1] < 1:
            raise ConfigError("step/presample ratios round inconsistently with r")
        return MissionPlan(n_total=n_total, n_presample=n_pre, step_counts=counts)


@dataclass(frozen=True)
class MissionPlan:
    n_total: int
    n_presample: int
    step_counts: list[int]


class Visit(NamedTuple):
    index: VoxelIndex
    measured_dbm: float
    leg: Leg


@dataclass
class MissionLog:
    """Ordered trajectory of sampled voxels with per-leg and total energy.

    per_step_boundaries holds the visit count at the end of each planning
    phase (pre-sample first, then one entry per adaptive batch).
    """

    visits: list[Visit]
    cumulative_energy_j: float
    per_step_boundaries: list[int] = field(default_factory=list)

    def voxels(self) -> list[VoxelIndex]:
        return [v.index for v in self.visits]

    def mask(self, grid: GridSpec) -> np.ndarray:
        m = np.zeros(grid.shape, dtype=bool)
        for v in self.visits:
            x, y, z = v.index
            m[x - 1, y - 1, z - 1] = True
        return m

    def to_sparse(self, grid: GridSpec) -> SpectrumTensor:
        return sparse_tensor(grid, self.voxels(), [v.measured_dbm for v in self.visits])

    def step_of(self, visit_pos: int) -> int:
        """0 for the pre-sample phase, k for the k-th adaptive batch."""
        for phase, end in enumerate(self.per_step_boundaries):
            if visit_pos < end:
                return phase
        return len(self.per_step_boundaries)


def _unique_sorted_linear(grid: GridSpec, voxels: Iterable[VoxelIndex]) -> np.ndarray:
    lin = np.array(sorted({grid.linear_index(v) for v in voxels}), dtype=int)
    return lin


def greedy_energy_order(voxels: Sequence[VoxelIndex], start: VoxelIndex, grid: GridSpec,
                        params: EnergyParams) -> list[VoxelIndex]:
    """Order a visit set by repeatedly taking the cheapest next leg.

    Ties break toward the smallest scan-order index. Duplicate voxels
    collapse to one visit.
    """
    remaining = _unique_sorted_linear(grid, voxels)
    centers = grid.centers()
    current = centers[grid.linear_index(grid.require(start))]
    alive = np.ones(remaining.size, dtype=bool)
    order: list[VoxelIndex] = []
    for _ in range(remaining.size):
        idx = np.flatnonzero(alive)
        energies = route_energies_from(current, centers[remaining[idx]], params) \
            + params.hover_energy_j
        pick = idx[int(np.argmin(energies))]
        alive[pick] = False
        lin = int(remaining[pick])
        order.append(grid.voxel_of(lin))
        current = centers[lin]
    return order


def _visits_from_order(order: Sequence[VoxelIndex], start: VoxelIndex, grid: GridSpec,
                       truth: SpectrumTensor, params: EnergyParams) -> tuple[list[Visit], float]:
    visits = []
    total = 0.0
    current = start
    for v in order:
        leg = leg_energy(current, v, grid, params)
        visits.append(Visit(v, measure(truth, v), leg))
        total += leg.total_j
        current = v
    return visits, total


def presample(cfg: DeployConfig, grid: GridSpec, truth: SpectrumTensor,
              params: EnergyParams) -> MissionLog:
    """Uniformly random membership of the warm-up set, flown greedily.

    Randomness decides which voxels are measured; the visit order within the
    set is the greedy min-energy order from the start voxel.
    """
    plan = cfg.plan(grid)
    rng = np.random.default_rng(cfg.seed)
    members = rng.choice(grid.n_voxels, size=plan.n_presample, replace=False)
    order = greedy_energy_order([grid.voxel_of(int(m)) for m in members], cfg.start, grid, params)
    visits, total = _visits_from_order(order, cfg.start, grid, truth, params)
    return MissionLog(visits, total, [len(visits)])


def _select_linear(current_lin: int, est_flat: np.ndarray, cand_lin: np.ndarray,
                   centers: np.ndarray, params: EnergyParams, mode: Strategy) -> int:
    if cand_lin.size == 0:
        raise PlannerError("no unsampled voxels left to select")
    if mode is Strategy.ROI_ONLY:
        scores = est_flat[cand_lin]
    else:
        total_energy = route_energies_from(centers[current_lin], centers[cand_lin], params) \
            + params.hover_energy_j
        scores = est_flat[cand_lin] / total_energy
    # argmax takes the first maximum; cand_lin ascending = smallest index wins ties
    return int(cand_lin[int(np.argmax(scores))])


def select_next(current: VoxelIndex, est_poi: np.ndarray, unsampled: Iterable[VoxelIndex],
                grid: GridSpec, params: EnergyParams,
                mode: Strategy = Strategy.ROI_DRIVEN) -> VoxelIndex:
    """Pick the next voxel to sample.

    roi_driven maximizes estimated interest divided by the total energy of
    flying there and hovering; roi_only maximizes estimated interest alone.
    """
    est_poi = np.asarray(est_poi, dtype=float)
    if est_poi.shape != grid.shape:
        raise ValueError(f"est_poi shape {est_poi.shape} != grid {grid.shape}")
    if np.any(est_poi < 0):
        raise ValueError("est_poi must be nonnegative")
    if mode is Strategy.RANDOM:
        raise ValueError("select_next is defined for roi_driven/roi_only only")
    cand = _unique_sorted_linear(grid, unsampled)
    lin = _select_linear(grid.linear_index(grid.require(current)),
                         est_poi.ravel(order="F"), cand, grid.centers(), params, mode)
    return grid.voxel_of(lin)


def run_mission(cfg: DeployConfig, grid: GridSpec, truth: SpectrumTensor, roi: RoiSet,
                prop: PropagationParams, idw: IdwParams, energy: EnergyParams) -> MissionLog:
    """Execute a full sampling mission and return its log.

    Adaptive strategies alternate between a whole-grid interest estimate
    (frozen, then read-only for the batch) and a batch of greedy selections
    during which only the UAV position advances. ``roi`` is part of the
    scenario contract but is never read: planners act on estimates alone.
    """
    plan = cfg.plan(grid)
    if cfg.strategy is Strategy.RANDOM:
        rng = np.random.default_rng(cfg.seed)
        members = rng.choice(grid.n_voxels, size=plan.n_total, replace=False)
        order = greedy_energy_order([grid.voxel_of(int(m)) for m in members],
                                    cfg.start, grid, energy)
        visits, total = _visits_from_order(order, cfg.start, grid, truth, energy)
        return MissionLog(visits, total, [len(visits)])

    log = presample(cfg, grid, truth, energy)
    sampled_mask = np.zeros(grid.n_voxels, dtype=bool)
    for v in log.visits:
        sampled_mask[grid.linear_index(v.index)] = True
    centers = grid.centers()
    current = grid.linear_index(log.visits[-1].index) if log.visits \
        else grid.linear_index(cfg.start)
    total = log.cumulative_energy_j
    for count in plan.step_counts:
        est = _estimate.estimate_field(log.to_sparse(grid), prop, idw)
        est.setflags(write=False)  # frozen for the whole batch
        est_flat = est.ravel(order="F")
        new_visits: list[Visit] = []
        for _ in range(count):
            cand = np.flatnonzero(~sampled_mask)
            lin = _select_linear(current, est_flat, cand, centers, energy, cfg.strategy)
            vox = grid.voxel_of(lin)
            leg = leg_energy(grid.voxel_of(current), vox, grid, energy)
            new_visits.append(Visit(vox, measure(truth, vox), leg))
            total += leg.total_j
            sampled_mask[lin] = True
            current = lin
        log.visits.extend(new_visits)
        log.per_step_boundaries.append(len(log.visits))
    log.cumulative_energy_j = total
    if len(log.visits) != plan.n_total:
        raise PlannerError(
            f"mission produced {len(log.visits)} visits, expected {plan.n_total}")
    return log


MISSION_CSV_HEADER = ["order", "x", "y", "z", "measured_dbm",
                      "leg_energy_j", "cumulative_energy_j", "step"]


def write_mission_csv(log: MissionLog, path) -> None:
    """One row per visit, in visit order, 1-based ``order`` column."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MISSION_CSV_HEADER)
        running = 0.0
        for pos, v in enumerate(log.visits):
            running += v.leg.total_j
            writer.writerow([pos + 1, v.index.x, v.index.y, v.index.z,
                             repr(v.measured_dbm), repr(v.leg.total_j),
                             repr(running), log.step_of(pos)])


def read_mission_csv(path) -> tuple[list[VoxelIndex], list[float]]:
    """Read back the visited voxels and their measured dBm values."""
    voxels: list[VoxelIndex] = []
    measured: list[float] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != MISSION_CSV_HEADER:
            raise ConfigError(f"unexpected mission CSV header {header!r} in {path}")
        for rec in reader:
            if not rec:
                continue
            voxels.append(VoxelIndex(int(rec[1]), int(rec[2]), int(rec[3])))
            measured.append(float(rec[4]))
    return voxels, measured
