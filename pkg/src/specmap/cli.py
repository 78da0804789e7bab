"""Command-line front end.

Subcommands: generate (truth + ROI CSVs), run (one pipeline run), sweep
(full experiment product), recover (offline recovery from CSV files).
Exit status 0 on success; failures print a stage-tagged diagnostic to
stderr and exit nonzero. SPECMAP_LOG={error|info|debug} controls verbosity.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from . import deploy, harness, recover, scene
from .errors import ConfigError, SpecmapError, StageError


def _setup_logging() -> None:
    level = os.environ.get("SPECMAP_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if level not in levels:
        print(f"warning: unknown SPECMAP_LOG={level!r}, using error", file=sys.stderr)
    logging.basicConfig(level=levels.get(level, logging.ERROR),
                        format="%(levelname)s %(name)s: %(message)s")


def _cmd_generate(args) -> int:
    cfg = harness.load_config(args.config)
    sc = harness.build_scenario(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    truth_path = out / "truth.csv"
    roi_path = out / "roi.csv"
    scene.write_tensor_csv(sc.truth, truth_path)
    scene.write_roi_csv(sc.roi, sc.grid, roi_path)
    print(f"wrote {truth_path} and {roi_path} "
          f"({sc.grid.n_voxels} voxels, {sc.roi.n_roi} in ROI)")
    return 0


def _cmd_run(args) -> int:
    cfg = harness.load_config(args.config)
    r0 = args.r0 if args.r0 is not None else cfg.sweep_r0[0]
    rp = args.rp if args.rp is not None else cfg.sweep_rp[0]
    method = recover.RecoveryMethod(args.method)
    mission, rows, recovered = harness.run_methods(
        cfg, args.strategy, args.r, r0, rp, args.seed, [method])
    row = rows[method]
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        deploy.write_mission_csv(mission, out / "mission.csv")
        recover.write_recovery(recovered[method],
                               out / f"recovered_{row.method}.csv",
                               out / f"recovered_{row.method}.json")
    print(json.dumps(dataclasses.asdict(row)))
    return 0


def _cmd_sweep(args) -> int:
    cfg = harness.load_config(args.config)
    raw, agg = harness.run_sweep(cfg, args.out, jobs=args.jobs)
    print(f"wrote {raw} and {agg}")
    return 0


def _cmd_recover(args) -> int:
    tensor = scene.read_tensor_csv(args.tensor)
    voxels, _ = deploy.read_mission_csv(args.mask_from)
    values = [scene.measure(tensor, v) for v in voxels]
    sampled = scene.sparse_tensor(tensor.grid, voxels, values)
    result = recover.run_recovery(sampled, args.method)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"recovered_{result.method.value}.csv"
    json_path = out / f"recovered_{result.method.value}.json"
    recover.write_recovery(result, csv_path, json_path)
    print(f"wrote {csv_path} and {json_path}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="specmap",
                                     description="3D spectrum-map simulation pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write ground-truth tensor and ROI mask CSVs")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("run", help="one mission + recovery + score")
    p.add_argument("--config", required=True)
    p.add_argument("--strategy", required=True,
                   choices=[s.value for s in deploy.Strategy])
    p.add_argument("--method", required=True,
                   choices=[m.value for m in recover.RecoveryMethod])
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--r0", type=float, default=None)
    p.add_argument("--rp", type=float, default=None)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default=None, help="also persist mission/recovery files")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="full experiment sweep to CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("recover", help="recover a map from tensor + mission CSVs")
    p.add_argument("--tensor", required=True, help="complete tensor CSV")
    p.add_argument("--mask-from", required=True, dest="mask_from",
                   help="mission CSV naming the sampled voxels")
    p.add_argument("--method", required=True,
                   choices=[m.value for m in recover.RecoveryMethod])
    p.add_argument("--out", default=".")
    p.set_defaults(func=_cmd_recover)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error {exc}", file=sys.stderr)
        return 3
    except ConfigError as exc:
        print(f"error [config] {exc}", file=sys.stderr)
        return 2
    except SpecmapError as exc:
        print(f"error [pipeline] {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error [io] {exc}", file=sys.stderr)
        return 4


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
