"""Process monitoring via correlation-graph snapshots and a small GCN.

Pipeline: multivariate process data -> standardized label-pure windows ->
graph snapshots (window statistics as node features, thresholded pairwise
associations as edges) -> graph classification -> per-class accuracy
reports.  A built-in VAR(1) simulator with fault injection provides
verifiable synthetic benchmarks.
"""

__version__ = "0.1.0"

from .timeseries import (
    DataError,
    NormalizationStats,
    TimeSeriesDataset,
    WindowSegment,
    apply_standardizer,
    fit_standardizer,
    invert_standardizer,
    load_dataset,
    save_csv,
    segment_windows,
    write_manifest,
)
from .snapshot import (
    GraphSnapshot,
    SnapshotConfig,
    association_matrix,
    build_snapshot,
    build_snapshots,
    load_snapshot_batch,
    node_features,
    normalize_adjacency,
    save_snapshot_batch,
    threshold_adjacency,
)
from .gcn import (
    GcnModel,
    TrainingConfig,
    TrainingDivergedError,
    backward,
    cross_entropy,
    fit,
    forward,
    init_model,
    load_checkpoint,
    predict,
    save_checkpoint,
    softmax,
)
from .evaluation import (
    EvaluationReport,
    class_scaling_experiment,
    evaluate,
    format_report,
    report_to_json,
)
from .simulator import (
    FaultSpec,
    RegimeSpec,
    SimulationError,
    make_benchmark_suite,
    separability_report,
    simulate,
    simulate_regime_runs,
    simulate_suite,
    write_benchmark_data,
)

__all__ = [
    "__version__",
    "DataError",
    "NormalizationStats",
    "TimeSeriesDataset",
    "WindowSegment",
    "apply_standardizer",
    "fit_standardizer",
    "invert_standardizer",
    "load_dataset",
    "save_csv",
    "segment_windows",
    "write_manifest",
    "GraphSnapshot",
    "SnapshotConfig",
    "association_matrix",
    "build_snapshot",
    "build_snapshots",
    "load_snapshot_batch",
    "node_features",
    "normalize_adjacency",
    "save_snapshot_batch",
    "threshold_adjacency",
    "GcnModel",
    "TrainingConfig",
    "TrainingDivergedError",
    "backward",
    "cross_entropy",
    "fit",
    "forward",
    "init_model",
    "load_checkpoint",
    "predict",
    "save_checkpoint",
    "softmax",
    "EvaluationReport",
    "class_scaling_experiment",
    "evaluate",
    "format_report",
    "report_to_json",
    "FaultSpec",
    "RegimeSpec",
    "SimulationError",
    "make_benchmark_suite",
    "separability_report",
    "simulate",
    "simulate_regime_runs",
    "simulate_suite",
    "write_benchmark_data",
]
