"""specmap: seeded 3D spectrum-map simulation at desk scale.

Pipeline: synthesize a voxelized scenario with point sources and interest
regions, fly a (possibly adaptive) sampling mission with an energy-aware
planner, recover the full map from the sparse samples, and score recovery
error against energy spent. The harness module sweeps the whole pipeline
over parameter grids and seeds into plot-ready CSV files.
"""

from .scene import (Domain, GridSpec, PropagationParams, RoiSet, Source,
                    SpectrumTensor, Sphere, VoxelIndex, build_roi_mask,
                    build_truth, dbm_from_mw, measure, mw_from_dbm, poi_truth,
                    read_tensor_csv, sparse_tensor, write_tensor_csv)
from .estimate import IdwParams, estimate_field, idw_estimate
from .energy import EnergyParams, Leg, leg_energy, trajectory_energy
from .deploy import (DeployConfig, MissionLog, Strategy, presample,
                     read_mission_csv, run_mission, select_next,
                     write_mission_csv)
from .recover import (RecoveryMethod, RecoveryResult, SliceAxis, TvParams,
                      idw_recover, knn_recover, run_recovery, tv3d_smr,
                      tv_inpaint_slice, tv_smr)
from .metrics import ObjectiveParams, ScoreCard, objective, poi_sum, roi_relative_mse
from .harness import (ExperimentConfig, ResultRow, Scenario, build_scenario,
                      default_config, load_config, run_methods, run_single,
                      run_sweep)
from .errors import (ConfigError, EstimationError, GridBoundsError,
                     MetricError, PlannerError, RecoveryError, SpecmapError,
                     StageError)

__version__ = "0.1.0"
