"""Acceptance suite: the ordering and property gates on the default
city-block scenario, seed-averaged, plus the invariant battery and the
byte-level determinism check.

The experiment blocks run once per session through the production sweep
engine; each criterion then reads the aggregate rows and prints one
PASS/FAIL line.
"""

import csv
import itertools
import math
from pathlib import Path

import numpy as np
import pytest

from specmap import (DeployConfig, Domain, EnergyParams, GridSpec, IdwParams,
                     SpectrumTensor, Strategy, VoxelIndex, dbm_from_mw,
                     leg_energy, run_recovery, select_next, sparse_tensor,
                     tv_inpaint_slice, tv_smr)
from specmap.estimate import idw_weights
from specmap.harness import (ExperimentConfig, aggregate_rows, build_scenario,
                             default_config, run_methods, run_sweep)
from specmap.metrics import roi_relative_mse
from specmap.recover import RecoveryMethod, SliceAxis

SEEDS_10 = list(range(1, 11))
SEEDS_40 = list(range(1, 41))
JOBS = 2


def report(criterion: int, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")


def sweep_means(cfg: ExperimentConfig, out_dir) -> dict[tuple, dict]:
    raw, _ = run_sweep(cfg, out_dir, jobs=JOBS)
    means = {}
    for agg in aggregate_rows(raw):
        key = (agg["strategy"], agg["method"], float(agg["r"]), float(agg["r0"]))
        means[key] = agg
    return means


@pytest.fixture(scope="session")
def random_block(tmp_path_factory):
    """Random deployment across r with every recovery method (criteria 1, 2, 6)."""
    cfg = default_config()
    cfg.strategies = [Strategy.RANDOM]
    cfg.methods = [RecoveryMethod.TV3D, RecoveryMethod.TV_XY, RecoveryMethod.TV_YZ,
                   RecoveryMethod.TV_ZX, RecoveryMethod.KNN]
    cfg.sweep_r = [0.1, 0.2, 0.3, 0.4, 0.5]
    cfg.seeds = SEEDS_10
    return sweep_means(cfg, tmp_path_factory.mktemp("random_block"))


@pytest.fixture(scope="session")
def presample_block(tmp_path_factory):
    """ROI-driven deployment across r0 (criterion 3). The r0 effect at these
    budgets is small against seed noise, so this block averages 40 seeds."""
    cfg = default_config()
    cfg.strategies = [Strategy.ROI_DRIVEN]
    cfg.methods = [RecoveryMethod.TV3D]
    cfg.sweep_r = [0.35]
    cfg.sweep_r0 = [0.05, 0.10, 0.20]
    cfg.seeds = SEEDS_40
    return sweep_means(cfg, tmp_path_factory.mktemp("presample_block"))


@pytest.fixture(scope="session")
def strategy_block(tmp_path_factory):
    """ROI-driven vs ROI-only at the reference operating point (criteria 4, 5)."""
    cfg = default_config()
    cfg.strategies = [Strategy.ROI_DRIVEN, Strategy.ROI_ONLY]
    cfg.methods = [RecoveryMethod.TV3D]
    cfg.sweep_r = [0.3]
    cfg.seeds = SEEDS_10
    return sweep_means(cfg, tmp_path_factory.mktemp("strategy_block"))


class TestCriterion1:
    def test_tv_beats_knn(self, random_block):
        oks, parts = [], []
        for r in (0.2, 0.3, 0.4):
            knn = random_block[("random", "knn", r, 0.05)]["w_roi_mean"]
            tv3d = random_block[("random", "tv3d", r, 0.05)]["w_roi_mean"]
            tvxy = random_block[("random", "tv_xy", r, 0.05)]["w_roi_mean"]
            oks.append(tv3d < knn and tvxy < knn)
            parts.append(f"r={r}: tv3d={tv3d:.4f} tv_xy={tvxy:.4f} knn={knn:.4f}")
        ok = all(oks)
        report(1, ok, "tv3d and tv_xy below knn at every r | " + "; ".join(parts))
        assert ok


class TestCriterion2:
    def test_slicing_asymmetry(self, random_block):
        oks, parts = [], []
        for r in (0.2, 0.3, 0.4):
            yz = random_block[("random", "tv_yz", r, 0.05)]["w_roi_mean"]
            zx = random_block[("random", "tv_zx", r, 0.05)]["w_roi_mean"]
            xy = random_block[("random", "tv_xy", r, 0.05)]["w_roi_mean"]
            close = abs(yz - zx) <= 0.15 * min(yz, zx)
            above = yz > xy and zx > xy
            oks.append(close and above)
            parts.append(f"r={r}: yz={yz:.4f} zx={zx:.4f} xy={xy:.4f}")
        ok = all(oks)
        report(2, ok, "tv_yz ~ tv_zx (15%) and both above tv_xy | " + "; ".join(parts))
        assert ok


class TestCriterion3:
    def test_presample_ratio_trend(self, presample_block):
        means = [presample_block[("roi_driven", "tv3d", 0.35, r0)]["w_roi_mean"]
                 for r0 in (0.05, 0.10, 0.20)]
        violations = []
        for a, b in zip(means, means[1:]):
            if b < a:
                violations.append((a - b) / a)
        ok = len(violations) == 0 or (len(violations) == 1 and violations[0] <= 0.05)
        report(3, ok, f"w_roi vs r0 {{0.05,0.10,0.20}} = "
                      f"{[round(m, 5) for m in means]} (40 seeds)")
        assert ok


class TestCriterion4:
    def test_roi_only_spends_most_energy(self, strategy_block):
        only = strategy_block[("roi_only", "tv3d", 0.3, 0.05)]["energy_j_mean"]
        driven = strategy_block[("roi_driven", "tv3d", 0.3, 0.05)]["energy_j_mean"]
        ok = only > driven
        report(4, ok, f"energy roi_only={only:.0f} J > roi_driven={driven:.0f} J")
        assert ok


class TestCriterion5:
    def test_roi_driven_beats_random_in_roi(self, strategy_block, random_block):
        driven = strategy_block[("roi_driven", "tv3d", 0.3, 0.05)]["w_roi_mean"]
        rand = random_block[("random", "tv3d", 0.3, 0.05)]["w_roi_mean"]
        ok = driven < rand
        report(5, ok, f"w_roi roi_driven={driven:.4f} < random={rand:.4f} (tv3d, r=0.3)")
        assert ok


class TestCriterion6:
    def test_more_sampling_less_error(self, random_block):
        m = {r: random_block[("random", "tv3d", r, 0.05)]["w_roi_mean"]
             for r in (0.1, 0.3, 0.5)}
        ok = m[0.5] < m[0.3] < m[0.1]
        report(6, ok, f"w_roi tv3d r=0.5 {m[0.5]:.4f} < r=0.3 {m[0.3]:.4f} "
                      f"< r=0.1 {m[0.1]:.4f}")
        assert ok


class TestCriterion7:
    """Invariant battery, compact re-assertions of the module invariants."""

    GRID = GridSpec(6, 6, 6, cell_size_m=10.0)

    def _sparse(self, seed=0, ratio=0.3):
        rng = np.random.default_rng(seed)
        vals = rng.uniform(-60.0, -5.0, size=self.GRID.shape)
        mask = np.zeros(self.GRID.n_voxels, dtype=bool)
        mask[rng.choice(self.GRID.n_voxels, int(ratio * self.GRID.n_voxels),
                        replace=False)] = True
        mask = mask.reshape(self.GRID.shape, order="F")
        return SpectrumTensor(self.GRID, np.where(mask, vals, 0.0), Domain.DBM, mask)

    def test_invariants(self):
        checks = []

        # IDW weights: normalized and convex
        rng = np.random.default_rng(3)
        w = idw_weights(rng.uniform(0, 60, (30, 3)), rng.uniform(0, 60, (7, 3)),
                        IdwParams())
        checks.append(("idw weight normalization",
                       bool(np.allclose(w.sum(axis=1), 1.0, atol=1e-9))))
        vals = rng.uniform(-10, 10, 7)
        est = w @ vals
        checks.append(("idw convexity",
                       bool(np.all(est >= vals.min() - 1e-12)
                            and np.all(est <= vals.max() + 1e-12))))

        # TV descent: non-increasing objective sequences
        descent = True
        for seed in range(3):
            r2 = np.random.default_rng(seed)
            sl = r2.uniform(-40, -5, (10, 10))
            kn = r2.random((10, 10)) < 0.3
            kn.flat[0] = True
            _, objs = tv_inpaint_slice(sl, kn)
            descent &= bool(np.all(np.diff(objs) <= 1e-12))
        checks.append(("tv monotone descent", descent))

        # data fidelity for every method
        sampled = self._sparse(seed=5)
        fidelity = all(
            np.array_equal(run_recovery(sampled, m).tensor.values[sampled.mask],
                           sampled.values[sampled.mask])
            for m in RecoveryMethod)
        checks.append(("data fidelity all methods", fidelity))

        # shift equivariance within 1e-6, on a spectrum-like smooth field
        rng_s = np.random.default_rng(2)
        centers = self.GRID.centers()
        bump = -70.0 + 55.0 / (1.0 + np.linalg.norm(centers, axis=1) / 25.0)
        bump = bump.reshape(self.GRID.shape, order="F")
        smask = np.zeros(self.GRID.n_voxels, dtype=bool)
        smask[rng_s.choice(self.GRID.n_voxels, 65, replace=False)] = True
        smask = smask.reshape(self.GRID.shape, order="F")
        smooth = SpectrumTensor(self.GRID, np.where(smask, bump, 0.0),
                                Domain.DBM, smask)
        shifted = SpectrumTensor(self.GRID, np.where(smask, bump + 3.5, 0.0),
                                 Domain.DBM, smask)
        shift_ok = True
        for m in RecoveryMethod:
            base = run_recovery(smooth, m).tensor.values
            moved = run_recovery(shifted, m).tensor.values
            shift_ok &= bool(np.allclose(moved, base + 3.5, atol=1e-6))
        checks.append(("shift equivariance", shift_ok))

        # axis-permutation equivariance of the slice recovery
        grid_p = GridSpec(6, 6, 6, cell_size_m=10.0)
        yz = tv_smr(sampled, SliceAxis.YZ)
        perm = SpectrumTensor(grid_p, np.transpose(sampled.values, (1, 2, 0)),
                              Domain.DBM, np.transpose(sampled.mask, (1, 2, 0)))
        xy = tv_smr(perm, SliceAxis.XY)
        checks.append(("axis permutation equivariance",
                       bool(np.array_equal(np.transpose(xy.tensor.values, (2, 0, 1)),
                                           yz.tensor.values))))

        # leg energy limits
        params = EnergyParams()
        level = leg_energy(VoxelIndex(1, 1, 2), VoxelIndex(4, 5, 2), self.GRID, params)
        climb = leg_energy(VoxelIndex(2, 2, 1), VoxelIndex(2, 2, 6), self.GRID, params)
        fall = leg_energy(VoxelIndex(2, 2, 6), VoxelIndex(2, 2, 1), self.GRID, params)
        checks.append(("leg energy limits",
                       level.route_energy_j == params.e_horizontal_j_per_m * level.distance_m
                       and climb.route_energy_j == params.e_up_j_per_m * 50.0
                       and fall.route_energy_j == params.e_down_j_per_m * 50.0))

        # select_next against a python-loop oracle, 50 candidates
        r3 = np.random.default_rng(11)
        est = r3.uniform(0, 40, self.GRID.shape)
        cands = [self.GRID.voxel_of(int(l))
                 for l in r3.choice(self.GRID.n_voxels, 50, replace=False)]
        current = VoxelIndex(3, 3, 3)
        oracle_ok = True
        for mode in (Strategy.ROI_DRIVEN, Strategy.ROI_ONLY):
            pick = select_next(current, est, cands, self.GRID, params, mode)
            best, best_score = None, -math.inf
            for c in sorted(cands, key=self.GRID.linear_index):
                s = est[c.x - 1, c.y - 1, c.z - 1]
                if mode is Strategy.ROI_DRIVEN:
                    s /= leg_energy(current, c, self.GRID, params).total_j
                if s > best_score:
                    best, best_score = c, s
            oracle_ok &= pick == best
        checks.append(("select_next oracle", oracle_ok))

        # w_roi scale invariance
        from specmap import build_roi_mask, Sphere
        roi = build_roi_mask(self.GRID, [Sphere((30.0, 30.0, 30.0), 25.0)])
        r4 = np.random.default_rng(9)
        tru = r4.uniform(0.5, 3.0, self.GRID.shape)
        rec = tru * r4.uniform(0.9, 1.1, self.GRID.shape)
        a = roi_relative_mse(SpectrumTensor(self.GRID, rec, Domain.LINEAR_MW),
                             SpectrumTensor(self.GRID, tru, Domain.LINEAR_MW), roi)
        b = roi_relative_mse(SpectrumTensor(self.GRID, rec * 83.0, Domain.LINEAR_MW),
                             SpectrumTensor(self.GRID, tru * 83.0, Domain.LINEAR_MW), roi)
        checks.append(("w_roi scale invariance", bool(abs(a - b) <= 1e-12 * a)))

        # full sampling -> zero recovery error
        cfg = default_config()
        sc = build_scenario(cfg)
        _, rows, recs = run_methods(cfg, Strategy.RANDOM, 1.0, 0.05, 0.05, 1,
                                    [RecoveryMethod.TV3D], scenario=sc)
        full = recs[RecoveryMethod.TV3D].tensor.values
        checks.append(("full sampling zero error",
                       bool(np.array_equal(full, dbm_from_mw(sc.truth.values))
                            and rows[RecoveryMethod.TV3D].w_roi < 1e-30)))

        ok = all(flag for _, flag in checks)
        failed = [name for name, flag in checks if not flag]
        report(7, ok, "invariant suite: " + ("all passed" if ok else f"failed: {failed}"))
        assert ok, failed


class TestCriterion8:
    def test_sweep_determinism(self, tmp_path):
        cfg_path = Path(__file__).resolve().parents[1] / "configs" / "default.json"
        from specmap.harness import load_config
        cfg = load_config(cfg_path)

        def normalized(raw_path):
            with open(raw_path, newline="") as fh:
                reader = csv.reader(fh)
                return b"\n".join(
                    ",".join(rec[:-1]).encode() for rec in reader)

        raw1, _ = run_sweep(cfg, tmp_path / "a", jobs=JOBS)
        raw2, _ = run_sweep(cfg, tmp_path / "b", jobs=JOBS)
        ok = normalized(raw1) == normalized(raw2)
        report(8, ok, "raw results byte-identical across two runs (wall_ms excluded)")
        assert ok
