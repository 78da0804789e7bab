"""Spectrum situation estimation: inverse-distance-weighted interpolation of
interest scores from sampled voxels to the rest of the grid.

Every sample participates in every estimate (no neighborhood cutoff); the
grids this library targets are small enough that the full weight matrix is
cheap, and a cutoff would change the estimator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, EstimationError
from .scene import Domain, GridSpec, PropagationParams, SpectrumTensor, VoxelIndex

__all__ = ["IdwParams", "idw_weights", "idw_estimate", "estimate_field", "interpolate_values"]

_CHUNK = 1024  # target rows per distance-matrix block, bounds memory


@dataclass(frozen=True)
class IdwParams:
    """Inverse-distance weighting knobs.

    power: exponent on distance (2 is the usual choice).
    epsilon_m: substituted for exactly-zero distances so weights stay finite;
    callers are expected to never estimate at a sampled location.
    """

    power: float = 2.0
    epsilon_m: float = 1e-9

    def __post_init__(self):
        if not self.power > 0:
            raise ConfigError(f"idw power must be positive, got {self.power}")
        if not self.epsilon_m > 0:
            raise ConfigError(f"epsilon_m must be positive, got {self.epsilon_m}")


def idw_weights(target_pts: np.ndarray, sample_pts: np.ndarray, params: IdwParams) -> np.ndarray:
    """(T, S) matrix of normalized weights; each row sums to 1."""
    target_pts = np.atleast_2d(np.asarray(target_pts, dtype=float))
    sample_pts = np.atleast_2d(np.asarray(sample_pts, dtype=float))
    if sample_pts.shape[0] == 0:
        raise EstimationError("cannot interpolate from an empty sample set")
    diff = target_pts[:, None, :] - sample_pts[None, :, :]
    d = np.sqrt(np.sum(diff * diff, axis=2))
    d[d == 0.0] = params.epsilon_m
    inv = d ** (-params.power)
    return inv / inv.sum(axis=1, keepdims=True)


def interpolate_values(target_pts: np.ndarray, sample_pts: np.ndarray,
                       sample_values: np.ndarray, params: IdwParams) -> np.ndarray:
    """IDW interpolation of arbitrary per-sample values at target points.

    Chunked over targets so the (T, S) distance matrix never materializes
    whole on large grids.
    """
    target_pts = np.atleast_2d(np.asarray(target_pts, dtype=float))
    sample_values = np.asarray(sample_values, dtype=float)
    out = np.empty(target_pts.shape[0])
    for lo in range(0, target_pts.shape[0], _CHUNK):
        hi = min(lo + _CHUNK, target_pts.shape[0])
        w = idw_weights(target_pts[lo:hi], sample_pts, params)
        out[lo:hi] = w @ sample_values
    return out


def idw_estimate(samples: Sequence[tuple[VoxelIndex, float]], targets: Sequence[VoxelIndex],
                 grid: GridSpec, params: IdwParams = IdwParams()) -> list[float]:
    """Estimate interest scores at target voxels from sampled voxels.

    Weights are 1/d^power between voxel centers, normalized per target;
    targets must be disjoint from the sample set.
    """
    if not samples:
        raise EstimationError("cannot estimate from an empty sample set")
    sample_set = {grid.linear_index(v) for v, _ in samples}
    for t in targets:
        if grid.linear_index(t) in sample_set:
            raise ValueError(f"target {tuple(t)} coincides with a sample")
    sample_pts = np.array([grid.voxel_center(v) for v, _ in samples])
    sample_vals = np.array([val for _, val in samples], dtype=float)
    if not targets:
        return []
    target_pts = np.array([grid.voxel_center(t) for t in targets])
    return list(interpolate_values(target_pts, sample_pts, sample_vals, params))


def estimate_field(sampled: SpectrumTensor, prop: PropagationParams,
                   params: IdwParams = IdwParams()) -> np.ndarray:
    """Whole-grid interest estimate from a sparse sampled tensor (dBm).

    Sampled voxels keep their exact measured interest score; unsampled voxels
    get the IDW estimate. Returns an (n1, n2, n3) array of nonnegative scores.
    """
    if sampled.mask is None or not sampled.mask.any():
        raise EstimationError("estimate_field needs at least one sampled voxel")
    if sampled.domain is not Domain.DBM:
        raise ValueError("estimate_field expects a dBm tensor")
    grid = sampled.grid
    flat_mask = sampled.mask.ravel(order="F")
    flat_vals = sampled.values.ravel(order="F")
    poi = np.zeros(grid.n_voxels)
    sampled_poi = np.maximum(0.0, flat_vals[flat_mask] - prop.noise_floor_dbm)
    poi[flat_mask] = sampled_poi
    unsampled = ~flat_mask
    if unsampled.any():
        centers = grid.centers()
        poi[unsampled] = interpolate_values(
            centers[unsampled], centers[flat_mask], sampled_poi, params
        )
    return poi.reshape(grid.shape, order="F")
