"""Scoring: ROI-restricted relative mean-square error, the combined
error/energy objective, interest accumulation, and the score card row."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, MetricError
from .scene import Domain, RoiSet, SpectrumTensor
from .deploy import MissionLog

__all__ = ["ObjectiveParams", "ScoreCard", "roi_relative_mse", "objective", "poi_sum"]


@dataclass(frozen=True)
class ObjectiveParams:
    """Weights of the exponential error/energy correction functions."""

    alpha: float = 1.0
    beta: float = 1.0
    correction: str = "exp"

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ConfigError("alpha and beta must be positive")
        if self.correction != "exp":
            raise ConfigError(f"unsupported correction {self.correction!r}")


@dataclass
class ScoreCard:
    """One mission's scores, as written to the results CSV."""

    w_roi: float
    energy_j: float
    objective: float
    sampling_ratio: float
    poi_sum: float


def roi_relative_mse(recovered: SpectrumTensor, truth: SpectrumTensor, roi: RoiSet) -> float:
    """Mean over ROI voxels of the squared relative error, in linear mW.

    Truth must be a complete linear-mW tensor (positive by construction);
    the recovered tensor is converted from dBm if needed.
    """
    if truth.grid != recovered.grid:
        raise ValueError("recovered and truth tensors live on different grids")
    if truth.domain is not Domain.LINEAR_MW:
        raise ValueError("truth tensor must be in linear mW")
    if not (truth.is_complete and recovered.is_complete):
        raise ValueError("roi_relative_mse expects complete tensors")
    if roi.n_roi < 1:
        raise MetricError("ROI mask selects no voxels")
    rec_mw = recovered.to_linear_mw().values[roi.mask]
    tru_mw = truth.values[roi.mask]
    rel = np.abs(rec_mw - tru_mw) / tru_mw
    return float(np.mean(rel * rel))


def objective(w: float, energy_j: float, params: ObjectiveParams,
              energy_norm_j: float) -> float:
    """exp(alpha * w) * exp(beta * energy / energy_norm).

    Raw joules would overflow the exponential, so the energy term is
    normalized by a caller-supplied scale (the harness uses hover energy
    times the number of samples).
    """
    if not energy_norm_j > 0:
        raise ConfigError("energy_norm_j must be positive")
    return math.exp(params.alpha * w) * math.exp(params.beta * energy_j / energy_norm_j)


def poi_sum(mission: MissionLog, poi_truth_array: np.ndarray) -> float:
    """Ground-truth interest accumulated over the visited voxels."""
    poi_truth_array = np.asarray(poi_truth_array, dtype=float)
    total = 0.0
    for v in mission.visits:
        x, y, z = v.index
        total += float(poi_truth_array[x - 1, y - 1, z - 1])
    return total
