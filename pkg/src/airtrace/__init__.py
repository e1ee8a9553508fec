"""airtrace: simulate a moving wave emitter and trace it back from
limited-aperture receiver data.

The forward half synthesizes what a small patch of receivers hears from a
point emitter moving through a homogeneous or weakly inhomogeneous medium;
the inverse half recovers the emitter's path by correlation imaging on a
search lattice, then segments and Fourier-smooths it.  A small service
streams reconstructions live while a stroke is being drawn.
"""
from .bench import (
    ExperimentConfig,
    ExperimentReport,
    PRESETS,
    compare_media,
    config_hash,
    export_plot_data,
    load_config,
    preset,
    run_experiment,
    save_config,
)
from .estimators import FourierTrajectorySmoother, TrajectoryReconstructor
from .forward import (
    ConvergenceError,
    PotentialMode,
    RetardedSolveParams,
    SourceSignal,
    WaveRecord,
    add_noise,
    approx_field,
    noise_column,
    retarded_potential,
    retarded_time,
    synthesize_approx_record,
    synthesize_record,
)
from .geometry import (
    Cuboid,
    MediumSpec,
    ReceiverArray,
    SamplingMesh,
    TimeGrid,
    make_receiver_array,
)
from .imaging import (
    EmptyBallError,
    IndicatorParams,
    LatticeEvaluator,
    ReconResult,
    TuningSchedule,
    UndefinedIndicatorError,
    grid_argmax,
    indicator,
    parallel_schedule,
    reconstruct_global,
    reconstruct_parallel,
    reconstruct_sequential,
    valid_steps,
)
from .scattering import (
    HelmholtzSolution,
    VoxelGrid,
    contrast_scale,
    eval_total_field,
    helmholtz_fundamental,
    make_voxel_grid,
    operator_norm_bound,
    solve_lippmann_schwinger,
    synthesize_record_inhomogeneous,
)
from .smoothing import (
    FourierCurve,
    SmoothedPath,
    fourier_fit,
    segment_gaps,
    smooth,
    smoothing_order,
    trajectory_error,
)
from .trajectories import (
    SCENARIO_IDS,
    Trajectory,
    builtin_trajectory,
    eval_trajectory,
    hello_segment_count,
    trajectory_to_csv,
)

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "PRESETS",
    "compare_media",
    "config_hash",
    "export_plot_data",
    "load_config",
    "preset",
    "run_experiment",
    "save_config",
    "FourierTrajectorySmoother",
    "TrajectoryReconstructor",
    "ConvergenceError",
    "PotentialMode",
    "RetardedSolveParams",
    "SourceSignal",
    "WaveRecord",
    "add_noise",
    "approx_field",
    "noise_column",
    "retarded_potential",
    "retarded_time",
    "synthesize_approx_record",
    "synthesize_record",
    "Cuboid",
    "MediumSpec",
    "ReceiverArray",
    "SamplingMesh",
    "TimeGrid",
    "make_receiver_array",
    "EmptyBallError",
    "IndicatorParams",
    "LatticeEvaluator",
    "ReconResult",
    "TuningSchedule",
    "UndefinedIndicatorError",
    "grid_argmax",
    "indicator",
    "parallel_schedule",
    "reconstruct_global",
    "reconstruct_parallel",
    "reconstruct_sequential",
    "valid_steps",
    "HelmholtzSolution",
    "VoxelGrid",
    "contrast_scale",
    "eval_total_field",
    "helmholtz_fundamental",
    "make_voxel_grid",
    "operator_norm_bound",
    "solve_lippmann_schwinger",
    "synthesize_record_inhomogeneous",
    "FourierCurve",
    "SmoothedPath",
    "fourier_fit",
    "segment_gaps",
    "smooth",
    "smoothing_order",
    "trajectory_error",
    "SCENARIO_IDS",
    "Trajectory",
    "builtin_trajectory",
    "eval_trajectory",
    "hello_segment_count",
    "trajectory_to_csv",
    "__version__",
]
