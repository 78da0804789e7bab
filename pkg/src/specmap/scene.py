"""Scenario synthesis: voxel grid, signal sources, ground-truth power tensor,
regions of interest, and per-voxel interest scores.

Power values are kept in linear milliwatts during generation (superposition is
linear) and converted to dBm wherever interpolation or recovery happens; the
dynamic range between a voxel next to a source and the noise floor is around
twelve orders of magnitude, which makes linear-domain smoothing useless.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, GridBoundsError

__all__ = [
    "Domain",
    "VoxelIndex",
    "GridSpec",
    "Source",
    "PropagationParams",
    "SpectrumTensor",
    "Sphere",
    "RoiSet",
    "dbm_from_mw",
    "mw_from_dbm",
    "build_truth",
    "build_roi_mask",
    "poi_truth",
    "measure",
    "sparse_tensor",
    "write_tensor_csv",
    "read_tensor_csv",
    "write_roi_csv",
]


def dbm_from_mw(power_mw):
    """Convert linear milliwatts to dBm. Accepts scalars or arrays."""
    return 10.0 * np.log10(power_mw)


def mw_from_dbm(power_dbm):
    """Convert dBm to linear milliwatts. Accepts scalars or arrays."""
    return np.power(10.0, np.asarray(power_dbm, dtype=float) / 10.0)


class Domain(str, Enum):
    """Value domain of a spectrum tensor."""

    LINEAR_MW = "linear_mw"
    DBM = "dbm"


class VoxelIndex(NamedTuple):
    """1-based voxel coordinates."""

    x: int
    y: int
    z: int


@dataclass(frozen=True)
class GridSpec:
    """Voxelization of the 3D block.

    Indices are 1-based; voxel (x, y, z) is centered at
    ``origin + ((x - 0.5), (y - 0.5), (z - 0.5)) * cell_size_m``.

    The canonical scan order used for CSV files and deterministic
    tie-breaking iterates x fastest and z slowest.
    """

    n1: int
    n2: int
    n3: int
    cell_size_m: float = 1.0
    origin_m: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if min(self.n1, self.n2, self.n3) < 1:
            raise ConfigError(f"grid dims must be >= 1, got {(self.n1, self.n2, self.n3)}")
        if not self.cell_size_m > 0:
            raise ConfigError(f"cell_size_m must be positive, got {self.cell_size_m}")
        if len(self.origin_m) != 3:
            raise ConfigError("origin_m must be a 3-vector")
        object.__setattr__(self, "origin_m", tuple(float(v) for v in self.origin_m))

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n1, self.n2, self.n3)

    @property
    def n_voxels(self) -> int:
        return self.n1 * self.n2 * self.n3

    def contains(self, v: VoxelIndex) -> bool:
        x, y, z = v
        return 1 <= x <= self.n1 and 1 <= y <= self.n2 and 1 <= z <= self.n3

    def require(self, v: VoxelIndex) -> VoxelIndex:
        if not self.contains(v):
            raise GridBoundsError(f"voxel {tuple(v)} outside grid {self.shape}")
        return VoxelIndex(*v)

    def voxel_center(self, v: VoxelIndex) -> np.ndarray:
        self.require(v)
        off = (np.asarray(v, dtype=float) - 0.5) * self.cell_size_m
        return np.asarray(self.origin_m) + off

    def linear_index(self, v: VoxelIndex) -> int:
        """Scan-order position of a voxel (x fastest, z slowest)."""
        x, y, z = self.require(v)
        return (x - 1) + self.n1 * ((y - 1) + self.n2 * (z - 1))

    def voxel_of(self, linear: int) -> VoxelIndex:
        if not 0 <= linear < self.n_voxels:
            raise GridBoundsError(f"linear index {linear} outside grid of {self.n_voxels}")
        x = linear % self.n1
        y = (linear // self.n1) % self.n2
        z = linear // (self.n1 * self.n2)
        return VoxelIndex(x + 1, y + 1, z + 1)

    def centers(self) -> np.ndarray:
        """(N, 3) voxel centers in meters, scan order. Read-only array."""
        return _grid_centers(self)

    def all_voxels(self) -> list[VoxelIndex]:
        return [self.voxel_of(i) for i in range(self.n_voxels)]


@lru_cache(maxsize=32)
def _grid_centers(grid: GridSpec) -> np.ndarray:
    xs = np.arange(1, grid.n1 + 1, dtype=float)
    ys = np.arange(1, grid.n2 + 1, dtype=float)
    zs = np.arange(1, grid.n3 + 1, dtype=float)
    gz, gy, gx = np.meshgrid(zs, ys, xs, indexing="ij")
    idx = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    pts = np.asarray(grid.origin_m) + (idx - 0.5) * grid.cell_size_m
    pts.setflags(write=False)
    return pts


@dataclass(frozen=True)
class Source:
    """Point emitter with isotropic transmit power in milliwatts."""

    position_m: tuple[float, float, float]
    power_mw: float

    def __post_init__(self):
        if not self.power_mw > 0:
            raise ConfigError(f"source power must be positive, got {self.power_mw}")
        object.__setattr__(self, "position_m", tuple(float(v) for v in self.position_m))


@dataclass(frozen=True)
class PropagationParams:
    """Log-distance path loss plus additive Gaussian noise at the floor level.

    The per-voxel noise draw is baked into the ground truth once (seeded), so
    repeated measurements at a voxel are deterministic.
    """

    path_loss_exponent: float = 2.0
    reference_distance_m: float = 1.0
    noise_density_dbm_per_hz: float = -174.0
    bandwidth_hz: float = 200e3
    noise_sigma_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.path_loss_exponent < 1:
            raise ConfigError("path_loss_exponent must be >= 1")
        if not self.reference_distance_m > 0:
            raise ConfigError("reference_distance_m must be positive")
        if not self.bandwidth_hz > 0:
            raise ConfigError("bandwidth_hz must be positive")
        if self.noise_sigma_scale < 0:
            raise ConfigError("noise_sigma_scale must be nonnegative")

    @property
    def noise_floor_mw(self) -> float:
        return float(10.0 ** ((self.noise_density_dbm_per_hz + 10.0 * np.log10(self.bandwidth_hz)) / 10.0))

    @property
    def noise_floor_dbm(self) -> float:
        return float(dbm_from_mw(self.noise_floor_mw))


@dataclass
class SpectrumTensor:
    """Per-voxel received power on a grid.

    ``mask`` present means a sparse sampled tensor: values are meaningful only
    where mask is True. Arrays are treated as read-only after construction.
    """

    grid: GridSpec
    values: np.ndarray
    domain: Domain
    mask: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ConfigError(f"values shape {self.values.shape} != grid {self.grid.shape}")
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=bool)
            if self.mask.shape != self.grid.shape:
                raise ConfigError(f"mask shape {self.mask.shape} != grid {self.grid.shape}")

    @property
    def is_complete(self) -> bool:
        return self.mask is None or bool(self.mask.all())

    def value_at(self, v: VoxelIndex) -> float:
        x, y, z = self.grid.require(v)
        return float(self.values[x - 1, y - 1, z - 1])

    def to_dbm(self) -> "SpectrumTensor":
        if self.domain is Domain.DBM:
            return self
        return SpectrumTensor(self.grid, dbm_from_mw(self.values), Domain.DBM, self.mask)

    def to_linear_mw(self) -> "SpectrumTensor":
        if self.domain is Domain.LINEAR_MW:
            return self
        return SpectrumTensor(self.grid, mw_from_dbm(self.values), Domain.LINEAR_MW, self.mask)


@dataclass(frozen=True)
class Sphere:
    """Interest region: all voxels whose center lies within radius of center."""

    center_m: tuple[float, float, float]
    radius_m: float

    def __post_init__(self):
        if not self.radius_m > 0:
            raise ConfigError(f"sphere radius must be positive, got {self.radius_m}")
        object.__setattr__(self, "center_m", tuple(float(v) for v in self.center_m))


@dataclass
class RoiSet:
    """Union of interest spheres resolved to a voxel mask."""

    spheres: list[Sphere]
    mask: np.ndarray
    n_roi: int = field(init=False)

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        self.n_roi = int(self.mask.sum())


def build_truth(grid: GridSpec, sources: Sequence[Source], prop: PropagationParams) -> SpectrumTensor:
    """Ground-truth received power: path-loss superposition of all sources
    plus the noise floor plus one seeded Gaussian draw per voxel.

    Deterministic given the seed; values are clamped to half the noise floor
    so the linear-mW tensor stays positive.
    """
    if not sources:
        raise ConfigError("at least one source is required")
    centers = grid.centers()
    total = np.zeros(grid.n_voxels)
    d0 = prop.reference_distance_m
    for src in sources:
        d = np.linalg.norm(centers - np.asarray(src.position_m), axis=1)
        d = np.maximum(d, d0)
        total += src.power_mw * (d0 / d) ** prop.path_loss_exponent
    floor = prop.noise_floor_mw
    total += floor
    if prop.noise_sigma_scale > 0:
        rng = np.random.default_rng(prop.seed)
        total += rng.normal(0.0, prop.noise_sigma_scale * floor, size=total.shape)
    total = np.maximum(total, floor / 2.0)
    values = total.reshape(grid.shape, order="F")
    return SpectrumTensor(grid, values, Domain.LINEAR_MW)


def build_roi_mask(grid: GridSpec, spheres: Iterable[Sphere]) -> RoiSet:
    """Resolve interest spheres to the voxel mask and POI count."""
    spheres = list(spheres)
    centers = grid.centers()
    flat = np.zeros(grid.n_voxels, dtype=bool)
    for sph in spheres:
        d2 = np.sum((centers - np.asarray(sph.center_m)) ** 2, axis=1)
        flat |= d2 <= sph.radius_m**2
    return RoiSet(spheres, flat.reshape(grid.shape, order="F"))


def poi_truth(truth: SpectrumTensor, prop: PropagationParams) -> np.ndarray:
    """Per-voxel interest score: dB excess of received power over the noise
    floor, clamped at zero."""
    if truth.domain is not Domain.LINEAR_MW:
        raise ValueError("poi_truth expects a linear-mW tensor")
    if not truth.is_complete:
        raise ValueError("poi_truth expects a complete tensor")
    return np.maximum(0.0, dbm_from_mw(truth.values) - prop.noise_floor_dbm)


def measure(truth: SpectrumTensor, v: VoxelIndex) -> float:
    """Sample the ground truth at a voxel, in dBm. Deterministic: the noise
    realization lives in the truth tensor, not in the readout."""
    val = truth.value_at(v)
    if truth.domain is Domain.DBM:
        return val
    return float(dbm_from_mw(val))


def sparse_tensor(grid: GridSpec, voxels: Sequence[VoxelIndex], values_dbm: Sequence[float]) -> SpectrumTensor:
    """Assemble a sparse dBm tensor from per-voxel measurements."""
    if len(voxels) != len(values_dbm):
        raise ValueError("voxels and values length mismatch")
    vals = np.zeros(grid.shape)
    mask = np.zeros(grid.shape, dtype=bool)
    for v, val in zip(voxels, values_dbm):
        x, y, z = grid.require(v)
        vals[x - 1, y - 1, z - 1] = val
        mask[x - 1, y - 1, z - 1] = True
    return SpectrumTensor(grid, vals, Domain.DBM, mask)


TENSOR_CSV_HEADER = ["x", "y", "z", "value_dbm"]


def write_tensor_csv(tensor: SpectrumTensor, path) -> None:
    """Write a complete tensor as CSV rows ``x,y,z,value_dbm`` in scan order
    (x fastest, z slowest), LF line endings."""
    if not tensor.is_complete:
        raise ValueError("tensor CSV stores complete tensors only")
    dbm = tensor.to_dbm().values
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TENSOR_CSV_HEADER)
        for z in range(tensor.grid.n3):
            for y in range(tensor.grid.n2):
                for x in range(tensor.grid.n1):
                    writer.writerow([x + 1, y + 1, z + 1, repr(float(dbm[x, y, z]))])


def read_tensor_csv(path, cell_size_m: float = 1.0,
                    origin_m: tuple[float, float, float] = (0.0, 0.0, 0.0)) -> SpectrumTensor:
    """Read a tensor CSV back into a complete dBm tensor.

    The CSV does not carry grid geometry; pass cell size and origin when the
    downstream use needs real distances (recovery methods only need ratios).
    """
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TENSOR_CSV_HEADER:
            raise ConfigError(f"unexpected tensor CSV header {header!r} in {path}")
        for rec in reader:
            if not rec:
                continue
            x, y, z = int(rec[0]), int(rec[1]), int(rec[2])
            rows.append((x, y, z, float(rec[3])))
    if not rows:
        raise ConfigError(f"empty tensor CSV {path}")
    n1 = max(r[0] for r in rows)
    n2 = max(r[1] for r in rows)
    n3 = max(r[2] for r in rows)
    grid = GridSpec(n1, n2, n3, cell_size_m, origin_m)
    values = np.full(grid.shape, np.nan)
    for x, y, z, val in rows:
        values[x - 1, y - 1, z - 1] = val
    if np.isnan(values).any():
        raise ConfigError(f"tensor CSV {path} does not cover the full grid")
    return SpectrumTensor(grid, values, Domain.DBM)


def write_roi_csv(roi: RoiSet, grid: GridSpec, path) -> None:
    """Write the ROI mask as CSV rows ``x,y,z,in_roi`` (0/1), scan order."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x", "y", "z", "in_roi"])
        for z in range(grid.n3):
            for y in range(grid.n2):
                for x in range(grid.n1):
                    writer.writerow([x + 1, y + 1, z + 1, int(roi.mask[x, y, z])])
