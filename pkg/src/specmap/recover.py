"""Spectrum map recovery from a sparse sampled tensor.

The tensor (in dBm) is sliced into 2D matrices along one axis and each slice
is treated as a damaged image: unknown pixels are filled by minimizing a
smoothed isotropic total-variation objective while sampled pixels stay
pinned to their measured values. Slicing along all three axes and averaging
the results recovers correlation in every direction. A k-nearest-neighbor
average and whole-grid IDW are available as baselines.

Solver notes: the per-slice problem is solved by projected gradient descent
with backtracking. Each accepted step cannot increase the objective, and the
iterates are clipped to the known-value range of the slice, so the monotone
descent and boundedness guarantees hold by construction rather than by luck
with the step size.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError, RecoveryError
from .estimate import IdwParams, interpolate_values
from .scene import Domain, GridSpec, SpectrumTensor, write_tensor_csv

__all__ = [
    "TvParams",
    "SliceAxis",
    "RecoveryMethod",
    "RecoveryResult",
    "tv_objective",
    "tv_inpaint_slice",
    "tv_smr",
    "tv3d_smr",
    "knn_recover",
    "idw_recover",
    "run_recovery",
    "fuse_mean",
    "write_recovery",
]

_BACKTRACK_LIMIT = 60  # halvings before declaring the slice converged


@dataclass(frozen=True)
class TvParams:
    """Knobs of the smoothed-TV slice solver."""

    epsilon: float = 1e-3
    step_size: float = 0.2
    max_iters: int = 2000
    tol: float = 1e-6

    def __post_init__(self):
        for name in ("epsilon", "step_size", "tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")


class SliceAxis(str, Enum):
    """Slicing orientation: the plane each extracted matrix lives in."""

    XY = "xy"
    YZ = "yz"
    ZX = "zx"


class RecoveryMethod(str, Enum):
    TV_XY = "tv_xy"
    TV_YZ = "tv_yz"
    TV_ZX = "tv_zx"
    TV3D = "tv3d"
    KNN = "knn"
    IDW = "idw"


_AXIS_METHOD = {SliceAxis.XY: RecoveryMethod.TV_XY,
                SliceAxis.YZ: RecoveryMethod.TV_YZ,
                SliceAxis.ZX: RecoveryMethod.TV_ZX}


@dataclass
class RecoveryResult:
    """A completed tensor plus solver diagnostics."""

    tensor: SpectrumTensor
    method: RecoveryMethod
    iterations_per_slice: list[int] = field(default_factory=list)
    final_objectives: list[float] = field(default_factory=list)


def _batch_fields(u: np.ndarray, eps: float):
    """Forward differences with replicate boundary over a (S, M, K) stack."""
    gx = np.zeros_like(u)
    gy = np.zeros_like(u)
    gx[:, :, :-1] = u[:, :, 1:] - u[:, :, :-1]
    gy[:, :-1, :] = u[:, 1:, :] - u[:, :-1, :]
    phi = np.sqrt(gx * gx + gy * gy + eps * eps)
    return gx, gy, phi


def _batch_objective(u: np.ndarray, eps: float) -> np.ndarray:
    return _batch_fields(u, eps)[2].sum(axis=(1, 2))


def _batch_gradient(u: np.ndarray, eps: float) -> np.ndarray:
    gx, gy, phi = _batch_fields(u, eps)
    fx = gx / phi
    fy = gy / phi
    div = fx.copy()
    div[:, :, 1:] -= fx[:, :, :-1]
    div += fy
    div[:, 1:, :] -= fy[:, :-1, :]
    return -div


def _batch_gradient_scaled(u: np.ndarray, eps: float) -> np.ndarray:
    """Gradient divided by the diagonal of the lagged-diffusivity majorant.

    The smoothed TV objective is badly conditioned (curvature spans
    ~1/epsilon in flat regions to ~1/|grad| on edges); this Jacobi scaling
    equalizes it. Scaling by a positive diagonal keeps it a descent
    direction, used by the safeguard step when a majorant solve fails.
    """
    gx, gy, phi = _batch_fields(u, eps)
    w = 1.0 / phi
    fx = gx * w
    fy = gy * w
    div = fx.copy()
    div[:, :, 1:] -= fx[:, :, :-1]
    div += fy
    div[:, 1:, :] -= fy[:, :-1, :]
    diag = np.zeros_like(u)
    diag[:, :, :-1] += w[:, :, :-1]
    diag[:, :-1, :] += w[:, :-1, :]
    diag[:, :, 1:] += w[:, :, :-1]
    diag[:, 1:, :] += w[:, :-1, :]
    return -div / np.maximum(diag, 1e-30)


def _weighted_laplacian(v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """-div(w * grad(v)) with forward differences and replicate boundary."""
    gx = np.zeros_like(v)
    gy = np.zeros_like(v)
    gx[:, :, :-1] = v[:, :, 1:] - v[:, :, :-1]
    gy[:, :-1, :] = v[:, 1:, :] - v[:, :-1, :]
    fx = w * gx
    fy = w * gy
    div = fx.copy()
    div[:, :, 1:] -= fx[:, :, :-1]
    div += fy
    div[:, 1:, :] -= fy[:, :-1, :]
    return -div


def _solve_majorant(u: np.ndarray, known: np.ndarray, w: np.ndarray,
                    solve: np.ndarray, cg_iters: int) -> np.ndarray:
    """Minimize the frozen-weight quadratic majorant over the unknowns.

    Conjugate gradients on the weighted-Laplacian system with the known
    pixels as Dirichlet data, warm-started at the current unknowns so a
    nearly-converged slice costs almost nothing. CG descends the quadratic
    monotonically from the start point, so any truncation still yields a
    majorant value no worse than the current iterate's.
    """
    unknown = ~known
    fixed = np.where(known, u, 0.0)
    b = -_weighted_laplacian(fixed, w)
    b[known] = 0.0
    sel = solve[:, None, None] & unknown

    def apply_a(vec):
        out = _weighted_laplacian(vec, w)
        return np.where(sel, out, 0.0)

    x = np.where(sel, u, 0.0)
    r = np.where(sel, b, 0.0) - apply_a(x)
    p = r.copy()
    rs = (r * r).sum(axis=(1, 2))
    tiny = 1e-24 * np.maximum((b * b).sum(axis=(1, 2)), 1e-300)
    live = solve & (rs > tiny)
    for _ in range(cg_iters):
        if not live.any():
            break
        q = apply_a(p)
        pq = (p * q).sum(axis=(1, 2))
        ok = live & (pq > 0)
        alpha = np.where(ok, rs / np.where(pq > 0, pq, 1.0), 0.0)
        x += alpha[:, None, None] * p
        r -= alpha[:, None, None] * q
        rs_new = (r * r).sum(axis=(1, 2))
        live = ok & (rs_new > tiny)
        beta = np.where(live, rs_new / np.where(rs > 0, rs, 1.0), 0.0)
        p = r + beta[:, None, None] * p
        p = np.where(live[:, None, None], p, 0.0)
        rs = rs_new
    return np.where(sel, x, u)


def tv_objective(u: np.ndarray, eps: float) -> float:
    """Smoothed isotropic TV of a matrix: sum of sqrt(gx^2 + gy^2 + eps^2)."""
    return float(_batch_objective(np.asarray(u, dtype=float)[None, :, :], eps)[0])


def _tv_batch_inpaint(values: np.ndarray, known: np.ndarray,
                      params: TvParams) -> tuple[np.ndarray, list[np.ndarray]]:
    """Inpaint a stack of same-shaped slices simultaneously.

    Majorization-minimization: each iteration freezes the TV weights at the
    current iterate and minimizes the resulting quadratic (the classic
    lagged-diffusivity majorant) over the unknowns with warm-started
    conjugate gradients. The majorant touches the objective at the current
    point and dominates it everywhere, so every solve, even truncated,
    yields a non-increasing objective; iterates are additionally clipped to
    the slice's known-value range (the minimizer satisfies a maximum
    principle, so the box is inactive at convergence). If clipping ever
    breaks the descent, that slice falls back to a backtracked
    diagonally-scaled gradient step seeded at the configured step size.

    Every slice must contain at least one known entry. Returns the filled
    stack and one accepted-objective sequence per slice (first entry is the
    objective at initialization; a slice with no unknowns keeps length 1).
    """
    u = np.array(values, dtype=float)
    known = np.asarray(known, dtype=bool)
    n_slices = u.shape[0]
    eps = params.epsilon
    unknown = ~known
    masked = np.where(known, u, np.nan)
    lo = np.nanmin(masked, axis=(1, 2))[:, None, None]
    hi = np.nanmax(masked, axis=(1, 2))[:, None, None]
    init = np.nanmean(masked, axis=(1, 2))[:, None, None]
    u = np.where(unknown, np.broadcast_to(init, u.shape), u)
    # converged once an accepted majorant step stops moving the iterate:
    # objective flatness alone is a weak certificate on TV landscapes
    settle = 1e-10 * (1.0 + np.abs(lo) + np.abs(hi)).reshape(n_slices)
    cg_cap = 4 * u.shape[1] * u.shape[2]
    obj = _batch_objective(u, eps)
    seqs = [[float(o)] for o in obj]
    active = unknown.any(axis=(1, 2))
    step = np.full(n_slices, params.step_size)
    for _ in range(params.max_iters):
        if not active.any():
            break
        w = 1.0 / _batch_fields(u, eps)[2]
        cand = _solve_majorant(u, known, w, active, cg_cap)
        np.clip(cand, lo, hi, out=cand)
        cand = np.where(unknown, cand, u)
        j = _batch_objective(cand, eps)
        smooth_ok = active & (j <= obj)
        u_prev = u
        u = np.where(smooth_ok[:, None, None], cand, u)
        new_obj = np.where(smooth_ok, j, obj)
        accepted = smooth_ok.copy()
        fallback = active & ~smooth_ok
        if fallback.any():
            g = _batch_gradient_scaled(u, eps)
            g[known] = 0.0
            t = step.copy()
            pending = fallback & (np.abs(g).max(axis=(1, 2)) > 0.0)
            for _ in range(_BACKTRACK_LIMIT):
                if not pending.any():
                    break
                trial = u - t[:, None, None] * g
                np.clip(trial, lo, hi, out=trial)
                trial = np.where(unknown, trial, u)
                jt = _batch_objective(trial, eps)
                ok = pending & (jt <= obj)
                if ok.any():
                    u = np.where(ok[:, None, None], trial, u)
                    new_obj = np.where(ok, jt, new_obj)
                    accepted |= ok
                    pending &= ~ok
                t[pending] *= 0.5
            step = np.where(fallback & accepted, t, step)
        active &= accepted  # slices with no descent left are done
        rel = np.abs(obj - new_obj) / np.maximum(np.abs(obj), 1e-30)
        moved = np.abs(u - u_prev).max(axis=(1, 2))
        obj = np.where(accepted, new_obj, obj)
        for s in np.flatnonzero(accepted):
            seqs[s].append(float(obj[s]))
        active &= ~(smooth_ok & (rel < params.tol) & (moved <= settle))
    return u, [np.asarray(s) for s in seqs]


def tv_inpaint_slice(values: np.ndarray, known: np.ndarray,
                     params: TvParams = TvParams()) -> tuple[np.ndarray, np.ndarray]:
    """Fill the unknown entries of one slice.

    Unknowns start at the mean of the known entries and descend the smoothed
    TV objective; known entries never move. Returns the filled slice and the
    sequence of accepted objective values (first entry is the initial
    objective, so ``len(seq) - 1`` is the iteration count).
    """
    u = np.asarray(values, dtype=float)
    known = np.asarray(known, dtype=bool)
    if u.shape != known.shape:
        raise ValueError("slice and mask shapes differ")
    if not known.any():
        raise RecoveryError("slice has no known entries to anchor the fill")
    filled, seqs = _tv_batch_inpaint(u[None, :, :], known[None, :, :], params)
    return filled[0], seqs[0]


def _to_batch(values: np.ndarray, axis: SliceAxis) -> np.ndarray:
    """Stack a tensor into (slices, M, K) matrices: XY slices are (n1, n2)
    indexed by z, YZ slices (n2, n3) indexed by x, ZX slices (n3, n1)
    indexed by y."""
    if axis is SliceAxis.XY:
        return np.ascontiguousarray(np.transpose(values, (2, 0, 1)))
    if axis is SliceAxis.YZ:
        return np.array(values)
    return np.ascontiguousarray(np.transpose(values, (1, 2, 0)))


def _from_batch(batch: np.ndarray, axis: SliceAxis) -> np.ndarray:
    if axis is SliceAxis.XY:
        return np.ascontiguousarray(np.transpose(batch, (1, 2, 0)))
    if axis is SliceAxis.YZ:
        return np.array(batch)
    return np.ascontiguousarray(np.transpose(batch, (2, 0, 1)))


def _require_sparse_dbm(sampled: SpectrumTensor) -> None:
    if sampled.domain is not Domain.DBM:
        raise RecoveryError("recovery operates on dBm tensors")
    if sampled.mask is None:
        raise RecoveryError("recovery needs a sampled tensor with a mask")
    if not sampled.mask.any():
        raise RecoveryError("recovery needs at least one sample")


def _global_idw_fill(sampled: SpectrumTensor, idw_params: IdwParams) -> np.ndarray:
    """Whole-grid IDW interpolation of the measured dBm values."""
    grid = sampled.grid
    flat_mask = sampled.mask.ravel(order="F")
    flat_vals = sampled.values.ravel(order="F")
    centers = grid.centers()
    out = flat_vals.copy()
    unknown = ~flat_mask
    if unknown.any():
        out[unknown] = interpolate_values(
            centers[unknown], centers[flat_mask], flat_vals[flat_mask], idw_params
        )
    return out.reshape(grid.shape, order="F")


def tv_smr(sampled: SpectrumTensor, axis: SliceAxis, params: TvParams = TvParams(),
           idw_params: IdwParams = IdwParams()) -> RecoveryResult:
    """Slice the sparse tensor perpendicular to one axis pair, TV-inpaint each
    slice, and merge.

    Slices that contain no samples at all carry no anchoring data for TV, so
    they are pre-filled from the whole-grid IDW interpolation and pass through
    unchanged (0 iterations for that slice).
    """
    _require_sparse_dbm(sampled)
    axis = SliceAxis(axis)
    mask = sampled.mask
    batch_vals = _to_batch(sampled.values.astype(float), axis)
    batch_known = _to_batch(mask, axis)
    empty = ~batch_known.any(axis=(1, 2))
    if empty.any():
        fill_batch = _to_batch(_global_idw_fill(sampled, idw_params), axis)
        batch_vals[empty] = fill_batch[empty]
        batch_known[empty] = True  # pre-filled slices pass through the solver untouched
    filled, seqs = _tv_batch_inpaint(batch_vals, batch_known, params)
    out = _from_batch(filled, axis)
    out[mask] = sampled.values[mask]
    iterations = [len(s) - 1 for s in seqs]
    finals = [float(s[-1]) for s in seqs]
    tensor = SpectrumTensor(sampled.grid, out, Domain.DBM)
    return RecoveryResult(tensor, _AXIS_METHOD[axis], iterations, finals)


def fuse_mean(axis_results: list[RecoveryResult], sampled: SpectrumTensor) -> RecoveryResult:
    """Elementwise mean of per-axis recoveries, samples re-imposed exactly."""
    _require_sparse_dbm(sampled)
    if not axis_results:
        raise RecoveryError("nothing to fuse")
    stacked = np.stack([r.tensor.values for r in axis_results])
    fused = stacked.mean(axis=0)
    fused[sampled.mask] = sampled.values[sampled.mask]
    iterations = [it for r in axis_results for it in r.iterations_per_slice]
    finals = [f for r in axis_results for f in r.final_objectives]
    tensor = SpectrumTensor(sampled.grid, fused, Domain.DBM)
    return RecoveryResult(tensor, RecoveryMethod.TV3D, iterations, finals)


def tv3d_smr(sampled: SpectrumTensor, params: TvParams = TvParams(),
             idw_params: IdwParams = IdwParams()) -> RecoveryResult:
    """Run the slice recovery along all three axes and average the results."""
    results = [tv_smr(sampled, axis, params, idw_params) for axis in SliceAxis]
    return fuse_mean(results, sampled)


def knn_recover(sampled: SpectrumTensor, k: int = 1) -> RecoveryResult:
    """Fill each unknown voxel with the unweighted mean of its k nearest
    sampled voxels (3D center distance, ties by scan order). Falls back to
    all samples when fewer than k exist.

    The default k=1 is plain nearest-neighbor fill, the naive baseline the
    slice-based recoveries are judged against."""
    _require_sparse_dbm(sampled)
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    grid = sampled.grid
    flat_mask = sampled.mask.ravel(order="F")
    flat_vals = sampled.values.ravel(order="F")
    centers = grid.centers()
    sample_pts = centers[flat_mask]
    sample_vals = flat_vals[flat_mask]
    k_eff = min(k, sample_pts.shape[0])
    out = flat_vals.copy()
    unknown_idx = np.flatnonzero(~flat_mask)
    chunk = 1024
    for lo in range(0, unknown_idx.size, chunk):
        sel = unknown_idx[lo:lo + chunk]
        diff = centers[sel][:, None, :] - sample_pts[None, :, :]
        d2 = np.sum(diff * diff, axis=2)
        # stable sort keeps sample scan order on ties
        nearest = np.argsort(d2, axis=1, kind="stable")[:, :k_eff]
        out[sel] = sample_vals[nearest].mean(axis=1)
    tensor = SpectrumTensor(grid, out.reshape(grid.shape, order="F"), Domain.DBM)
    return RecoveryResult(tensor, RecoveryMethod.KNN)


def idw_recover(sampled: SpectrumTensor, params: IdwParams = IdwParams()) -> RecoveryResult:
    """Fill unknown voxels with the IDW interpolation of the measured dBm."""
    _require_sparse_dbm(sampled)
    filled = _global_idw_fill(sampled, params)
    tensor = SpectrumTensor(sampled.grid, filled, Domain.DBM)
    return RecoveryResult(tensor, RecoveryMethod.IDW)


def run_recovery(sampled: SpectrumTensor, method: RecoveryMethod,
                 tv_params: TvParams = TvParams(), knn_k: int = 1,
                 idw_params: IdwParams = IdwParams()) -> RecoveryResult:
    """Dispatch a recovery method by name."""
    method = RecoveryMethod(method)
    if method is RecoveryMethod.TV3D:
        return tv3d_smr(sampled, tv_params, idw_params)
    if method in (RecoveryMethod.TV_XY, RecoveryMethod.TV_YZ, RecoveryMethod.TV_ZX):
        axis = {RecoveryMethod.TV_XY: SliceAxis.XY,
                RecoveryMethod.TV_YZ: SliceAxis.YZ,
                RecoveryMethod.TV_ZX: SliceAxis.ZX}[method]
        return tv_smr(sampled, axis, tv_params, idw_params)
    if method is RecoveryMethod.KNN:
        return knn_recover(sampled, knn_k)
    return idw_recover(sampled, idw_params)


def write_recovery(result: RecoveryResult, csv_path, json_path) -> None:
    """Persist the recovered tensor (CSV) and a diagnostics sidecar (JSON)."""
    write_tensor_csv(result.tensor, csv_path)
    sidecar = {
        "method": result.method.value,
        "iterations": result.iterations_per_slice,
        "objectives": result.final_objectives,
    }
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")
