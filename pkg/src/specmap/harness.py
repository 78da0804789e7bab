"""Experiment orchestration: config loading, single pipeline runs, and
multi-seed sweeps emitting plot-ready CSV files.

A sweep is the Cartesian product of strategies x methods x r x r0 x rp x
seeds. Jobs are grouped by mission (one flight serves every recovery
method), rows land in the raw CSV in deterministic job order regardless of
worker count, and the aggregate CSV of per-curve seed statistics is
recomputed from the raw file so it stays a pure function of it.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from . import deploy, metrics, recover, scene
from .deploy import DeployConfig, MissionLog, Strategy
from .energy import EnergyParams
from .errors import ConfigError, SpecmapError, StageError
from .estimate import IdwParams
from .metrics import ObjectiveParams
from .recover import RecoveryMethod, RecoveryResult, SliceAxis, TvParams
from .scene import (GridSpec, PropagationParams, RoiSet, Source, SpectrumTensor,
                    Sphere, VoxelIndex)

__all__ = [
    "ExperimentConfig",
    "Scenario",
    "ResultRow",
    "load_config",
    "default_config",
    "build_scenario",
    "run_single",
    "run_methods",
    "run_sweep",
    "aggregate_rows",
    "RAW_CSV_HEADER",
]

log = logging.getLogger("specmap")

CONFIG_VERSION = 1

RAW_CSV_HEADER = ["strategy", "method", "r", "r0", "rp", "seed",
                  "w_roi", "energy_j", "poi_sum", "objective", "wall_ms"]

AGG_CSV_HEADER = ["strategy", "method", "r", "r0", "rp", "n_seeds",
                  "w_roi_mean", "w_roi_std", "energy_j_mean", "energy_j_std",
                  "poi_sum_mean", "poi_sum_std", "objective_mean", "objective_std"]


@dataclass
class ExperimentConfig:
    """Everything a sweep needs: scenario, planners, recovery, scoring, axes."""

    grid: GridSpec
    sources: list[Source]
    prop: PropagationParams
    roi_spheres: list[Sphere]
    energy: EnergyParams = EnergyParams()
    idw: IdwParams = IdwParams()
    tv: TvParams = TvParams()
    knn_k: int = 1
    objective: ObjectiveParams = ObjectiveParams()
    strategies: list[Strategy] = field(default_factory=lambda: [Strategy.RANDOM])
    methods: list[RecoveryMethod] = field(default_factory=lambda: [RecoveryMethod.TV3D])
    start: VoxelIndex = VoxelIndex(1, 1, 1)
    sweep_r: list[float] = field(default_factory=lambda: [0.3])
    sweep_r0: list[float] = field(default_factory=lambda: [0.05])
    sweep_rp: list[float] = field(default_factory=lambda: [0.05])
    seeds: list[int] = field(default_factory=lambda: [0])

    def validate(self) -> "ExperimentConfig":
        if not self.sources:
            raise ConfigError("config needs at least one source")
        for name in ("strategies", "methods", "sweep_r", "sweep_r0", "sweep_rp", "seeds"):
            if not getattr(self, name):
                raise ConfigError(f"config field {name} must be a nonempty list")
        if self.knn_k < 1:
            raise ConfigError("knn_k must be >= 1")
        for strategy in self.strategies:
            for r in self.sweep_r:
                for r0 in self.sweep_r0:
                    for rp in self.sweep_rp:
                        self.deploy_config(strategy, r, r0, rp, 0).plan(self.grid)
        return self

    def deploy_config(self, strategy, r, r0, rp, seed) -> DeployConfig:
        return DeployConfig(Strategy(strategy), r, r0, rp, self.start, seed)


def _vec3(value, what: str) -> tuple[float, float, float]:
    if not (isinstance(value, (list, tuple)) and len(value) == 3):
        raise ConfigError(f"{what} must be a 3-element list, got {value!r}")
    return tuple(float(v) for v in value)


def _parse_config(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    version = doc.get("version")
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {version!r} (expected {CONFIG_VERSION})")
    try:
        sc = doc["scenario"]
        g = sc["grid"]
        grid = GridSpec(int(g["n1"]), int(g["n2"]), int(g["n3"]),
                        float(g["cell_size_m"]),
                        _vec3(g.get("origin_m", [0.0, 0.0, 0.0]), "grid.origin_m"))
        sources = [Source(_vec3(s["position_m"], "source.position_m"),
                          float(s["power_mw"])) for s in sc["sources"]]
        pr = sc.get("propagation", {})
        prop = PropagationParams(
            path_loss_exponent=float(pr.get("path_loss_exponent", 2.0)),
            reference_distance_m=float(pr.get("reference_distance_m", 1.0)),
            noise_density_dbm_per_hz=float(pr.get("noise_density_dbm_per_hz", -174.0)),
            bandwidth_hz=float(pr.get("bandwidth_hz", 200e3)),
            noise_sigma_scale=float(pr.get("noise_sigma_scale", 1.0)),
            seed=int(pr.get("seed", 0)),
        )
        spheres = [Sphere(_vec3(s["center_m"], "roi.center_m"), float(s["radius_m"]))
                   for s in sc["roi"]["spheres"]]
        en = doc.get("energy", {})
        energy = EnergyParams(
            e_horizontal_j_per_m=float(en.get("e_horizontal_j_per_m", 100.0)),
            e_up_j_per_m=float(en.get("e_up_j_per_m", 150.0)),
            e_down_j_per_m=float(en.get("e_down_j_per_m", 80.0)),
            hover_power_w=float(en.get("hover_power_w", 200.0)),
            hover_time_s=float(en.get("hover_time_s", 5.0)),
            speed_mps=float(en.get("speed_mps", 1.0)),
        )
        dp = doc.get("deploy", {})
        strategies = [Strategy(s) for s in dp.get("strategies", ["random"])]
        start = VoxelIndex(*[int(v) for v in dp.get("start", [1, 1, 1])])
        rc = doc.get("recovery", {})
        methods = [RecoveryMethod(m) for m in rc.get("methods", ["tv3d"])]
        tvp = rc.get("tv", {})
        tv = TvParams(epsilon=float(tvp.get("epsilon", 1e-3)),
                      step_size=float(tvp.get("step_size", 0.2)),
                      max_iters=int(tvp.get("max_iters", 2000)),
                      tol=float(tvp.get("tol", 1e-6)))
        knn_k = int(rc.get("knn_k", 1))
        iw = rc.get("idw", {})
        idw = IdwParams(power=float(iw.get("power", 2.0)),
                        epsilon_m=float(iw.get("epsilon_m", 1e-9)))
        mt = doc.get("metrics", {})
        obj = ObjectiveParams(alpha=float(mt.get("alpha", 1.0)),
                              beta=float(mt.get("beta", 1.0)))
        sw = doc.get("sweep", {})
        cfg = ExperimentConfig(
            grid=grid, sources=sources, prop=prop, roi_spheres=spheres,
            energy=energy, idw=idw, tv=tv, knn_k=knn_k, objective=obj,
            strategies=strategies, methods=methods, start=start,
            sweep_r=[float(v) for v in sw.get("r", [0.3])],
            sweep_r0=[float(v) for v in sw.get("r0", [0.05])],
            sweep_rp=[float(v) for v in sw.get("rp", [0.05])],
            seeds=[int(v) for v in sw.get("seeds", [0])],
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed config: {exc!r}") from exc
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return _parse_config(doc)


def default_config() -> ExperimentConfig:
    """The shipped city-block scenario: 100 m cube at 10 m granularity, three
    30 mW ground sources on the diagonal, 30 m interest spheres."""
    sources = [Source((0.0, 0.0, 0.0), 30.0),
               Source((50.0, 50.0, 0.0), 30.0),
               Source((100.0, 100.0, 0.0), 30.0)]
    return ExperimentConfig(
        grid=GridSpec(10, 10, 10, cell_size_m=10.0),
        sources=sources,
        prop=PropagationParams(seed=2026),
        roi_spheres=[Sphere(s.position_m, 30.0) for s in sources],
        strategies=[Strategy.RANDOM],
        methods=[RecoveryMethod.TV3D, RecoveryMethod.KNN],
        sweep_r=[0.2, 0.3, 0.4],
        seeds=[1, 2, 3],
    )


@dataclass
class Scenario:
    """Built world: ground truth, interest regions, per-voxel interest."""

    grid: GridSpec
    truth: SpectrumTensor
    roi: RoiSet
    poi: np.ndarray
    prop: PropagationParams


def build_scenario(cfg: ExperimentConfig) -> Scenario:
    truth = scene.build_truth(cfg.grid, cfg.sources, cfg.prop)
    roi = scene.build_roi_mask(cfg.grid, cfg.roi_spheres)
    poi = scene.poi_truth(truth, cfg.prop)
    return Scenario(cfg.grid, truth, roi, poi, cfg.prop)


@dataclass
class ResultRow:
    strategy: str
    method: str
    r: float
    r0: float
    rp: float
    seed: int
    w_roi: float
    energy_j: float
    poi_sum: float
    objective: float
    wall_ms: float

    def csv_row(self) -> list[str]:
        return [self.strategy, self.method, repr(self.r), repr(self.r0),
                repr(self.rp), str(self.seed), repr(self.w_roi),
                repr(self.energy_j), repr(self.poi_sum), repr(self.objective),
                repr(self.wall_ms)]


_TV_AXES = {RecoveryMethod.TV_XY: SliceAxis.XY,
            RecoveryMethod.TV_YZ: SliceAxis.YZ,
            RecoveryMethod.TV_ZX: SliceAxis.ZX}


def _recoveries_for(sampled: SpectrumTensor, methods: Sequence[RecoveryMethod],
                    cfg: ExperimentConfig) -> dict[RecoveryMethod, RecoveryResult]:
    """Run the requested methods, computing each TV axis at most once."""
    methods = [RecoveryMethod(m) for m in methods]
    axis_cache: dict[SliceAxis, RecoveryResult] = {}

    def axis_result(axis: SliceAxis) -> RecoveryResult:
        if axis not in axis_cache:
            axis_cache[axis] = recover.tv_smr(sampled, axis, cfg.tv, cfg.idw)
        return axis_cache[axis]

    out: dict[RecoveryMethod, RecoveryResult] = {}
    for method in methods:
        if method in _TV_AXES:
            out[method] = axis_result(_TV_AXES[method])
        elif method is RecoveryMethod.TV3D:
            parts = [axis_result(a) for a in SliceAxis]
            out[method] = recover.fuse_mean(parts, sampled)
        elif method is RecoveryMethod.KNN:
            out[method] = recover.knn_recover(sampled, cfg.knn_k)
        else:
            out[method] = recover.idw_recover(sampled, cfg.idw)
    return out


def run_methods(cfg: ExperimentConfig, strategy, r: float, r0: float, rp: float,
                seed: int, methods: Sequence[RecoveryMethod] | None = None,
                scenario: Scenario | None = None,
                ) -> tuple[MissionLog, dict[RecoveryMethod, ResultRow],
                           dict[RecoveryMethod, RecoveryResult]]:
    """One mission scored under every requested recovery method.

    TV axis recoveries are shared between the single-axis methods and the
    fused one. Stage failures surface as StageError naming the stage.
    """
    methods = list(cfg.methods if methods is None else methods)
    t0 = time.perf_counter()
    try:
        sc = scenario or build_scenario(cfg)
    except SpecmapError as exc:
        raise StageError("scene", exc) from exc
    try:
        dcfg = cfg.deploy_config(strategy, r, r0, rp, seed)
        mission = deploy.run_mission(dcfg, sc.grid, sc.truth, sc.roi, sc.prop,
                                     cfg.idw, cfg.energy)
        plan = dcfg.plan(sc.grid)
    except SpecmapError as exc:
        raise StageError("deploy", exc) from exc
    try:
        sampled = mission.to_sparse(sc.grid)
        recovered = _recoveries_for(sampled, methods, cfg)
    except SpecmapError as exc:
        raise StageError("recover", exc) from exc
    try:
        accum = metrics.poi_sum(mission, sc.poi)
        energy_norm = cfg.energy.hover_energy_j * plan.n_total
        rows: dict[RecoveryMethod, ResultRow] = {}
        for method, result in recovered.items():
            w = metrics.roi_relative_mse(result.tensor, sc.truth, sc.roi)
            obj = metrics.objective(w, mission.cumulative_energy_j, cfg.objective,
                                    energy_norm)
            wall_ms = (time.perf_counter() - t0) * 1e3
            rows[method] = ResultRow(
                strategy=Strategy(strategy).value, method=method.value,
                r=r, r0=r0, rp=rp, seed=seed, w_roi=w,
                energy_j=mission.cumulative_energy_j, poi_sum=accum,
                objective=obj, wall_ms=wall_ms)
    except SpecmapError as exc:
        raise StageError("metrics", exc) from exc
    return mission, rows, recovered


def run_single(cfg: ExperimentConfig, strategy, method, r: float, r0: float,
               rp: float, seed: int, scenario: Scenario | None = None) -> ResultRow:
    """Build scenario, fly the mission, recover with one method, score."""
    method = RecoveryMethod(method)
    _, rows, _ = run_methods(cfg, strategy, r, r0, rp, seed, [method], scenario)
    return rows[method]


def _job_specs(cfg: ExperimentConfig) -> Iterator[tuple[Strategy, float, float, float, int]]:
    """Mission-level jobs in deterministic order; methods fan out per job."""
    for strategy in cfg.strategies:
        for r in cfg.sweep_r:
            for r0 in cfg.sweep_r0:
                for rp in cfg.sweep_rp:
                    for seed in cfg.seeds:
                        yield (strategy, r, r0, rp, seed)


def _run_job(args) -> list[ResultRow]:
    cfg, spec = args
    strategy, r, r0, rp, seed = spec
    try:
        _, rows, _ = run_methods(cfg, strategy, r, r0, rp, seed)
        return [rows[m] for m in cfg.methods]
    except StageError as exc:
        log.error("job %s failed: %s", spec, exc)
        return []


def run_sweep(cfg: ExperimentConfig, out_dir, jobs: int = 1) -> tuple[Path, Path]:
    """Run the full product, appending raw rows incrementally (a partial file
    is valid CSV), then write the per-curve aggregate. Returns both paths."""
    cfg.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    raw_path = out_dir / "results.csv"
    agg_path = out_dir / "results_aggregate.csv"
    specs = list(_job_specs(cfg))
    log.info("sweep: %d missions x %d methods", len(specs), len(cfg.methods))
    with open(raw_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RAW_CSV_HEADER)
        fh.flush()
        if jobs <= 1:
            produced = map(_run_job, ((cfg, s) for s in specs))
            for rows in produced:
                for row in rows:
                    writer.writerow(row.csv_row())
                fh.flush()
        else:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                # executor.map yields in submission order: deterministic layout
                for rows in pool.map(_run_job, ((cfg, s) for s in specs)):
                    for row in rows:
                        writer.writerow(row.csv_row())
                    fh.flush()
    write_aggregate(raw_path, agg_path)
    return raw_path, agg_path


def aggregate_rows(raw_path) -> list[dict]:
    """Seed-mean and seed-stddev per (strategy, method, r, r0, rp) curve,
    computed from the raw CSV alone."""
    groups: dict[tuple, list[dict]] = {}
    order: list[tuple] = []
    with open(raw_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RAW_CSV_HEADER:
            raise ConfigError(f"unexpected results header in {raw_path}")
        for rec in reader:
            key = (rec["strategy"], rec["method"], rec["r"], rec["r0"], rec["rp"])
            if key not in groups:
                groups[key] = []
                order.append(key)
            groups[key].append(rec)
    out = []
    for key in order:
        rows = groups[key]
        agg = {"strategy": key[0], "method": key[1], "r": key[2], "r0": key[3],
               "rp": key[4], "n_seeds": len(rows)}
        for col in ("w_roi", "energy_j", "poi_sum", "objective"):
            vals = np.array([float(r[col]) for r in rows])
            agg[f"{col}_mean"] = float(vals.mean())
            agg[f"{col}_std"] = float(vals.std())
        out.append(agg)
    return out


def write_aggregate(raw_path, agg_path) -> None:
    rows = aggregate_rows(raw_path)
    with open(agg_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(AGG_CSV_HEADER)
        for agg in rows:
            writer.writerow([agg["strategy"], agg["method"], agg["r"], agg["r0"],
                             agg["rp"], str(agg["n_seeds"]),
                             repr(agg["w_roi_mean"]), repr(agg["w_roi_std"]),
                             repr(agg["energy_j_mean"]), repr(agg["energy_j_std"]),
                             repr(agg["poi_sum_mean"]), repr(agg["poi_sum_std"]),
                             repr(agg["objective_mean"]), repr(agg["objective_std"])])
