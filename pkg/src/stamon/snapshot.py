"""Graph snapshots: per-variable window statistics plus a thresholded
association graph, normalized for graph convolution.

Each time window becomes one static graph.  Nodes are the monitoring
variables; node features summarize each variable's in-window distribution
(mean, std, lag-1 autocorrelation); edges connect variable pairs whose
association magnitude reaches a threshold; the adjacency (with self-loops)
is symmetrically degree-normalized so its spectrum stays inside [-1, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .blockfile import read_blockfile, write_blockfile

FEATURE_NAMES = ("mean", "std", "lag1_autocorr")
NUM_FEATURES = len(FEATURE_NAMES)

SNAPSHOT_BATCH_FORMAT = "snapshot-batch"


@dataclass(frozen=True)
class SnapshotConfig:
    """Knobs for graph construction.

    threshold  edge rule |association| >= threshold, in (0, 1]
    weighted   keep |association| as edge weight instead of binarizing
    measure    association measure name (see ASSOCIATION_MEASURES)
    """

    threshold: float = 0.6
    weighted: bool = False
    measure: str = "pearson"

    def __post_init__(self):
        if not 0.0 < self.threshold <= 1.0:
            raise ValueError(f"threshold must be in (0, 1], got {self.threshold}")
        if self.measure not in ASSOCIATION_MEASURES:
            raise ValueError(
                f"unknown association measure {self.measure!r}; "
                f"available: {sorted(ASSOCIATION_MEASURES)}"
            )

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "weighted": self.weighted,
            "measure": self.measure,
        }


@dataclass
class GraphSnapshot:
    """One window rendered as a labeled graph.

    features        (V, F) node feature matrix
    adjacency_norm  (V, V) symmetric-normalized adjacency with self-loops
    """

    features: np.ndarray
    adjacency_norm: np.ndarray
    label: int
    start_index: int = 0

    @property
    def num_nodes(self) -> int:
        return self.features.shape[0]

    @property
    def num_features(self) -> int:
        return self.features.shape[1]


def _window_array(window) -> np.ndarray:
    samples = np.asarray(getattr(window, "samples", window), dtype=np.float64)
    if samples.ndim != 2:
        raise ValueError(f"window samples must be 2-D, got shape {samples.shape}")
    if samples.shape[0] < 2:
        raise ValueError("window needs at least 2 samples")
    return samples


def node_features(window) -> np.ndarray:
    """Per-variable (mean, std, lag-1 autocorrelation) over the window.

    std uses divisor L-1 (small-sample estimate).  The autocorrelation is
    sum_t (x_t - m)(x_{t+1} - m) / sum_t (x_t - m)^2.  Exactly constant
    variables get std 0 and autocorrelation 0, so the matrix never holds
    non-finite entries.  Row v depends only on column v of the window.
    """
    x = _window_array(window)
    n = x.shape[0]
    mean = x.mean(axis=0)
    centered = x - mean
    ss = (centered ** 2).sum(axis=0)
    constant = np.ptp(x, axis=0) == 0.0
    std = np.where(constant, 0.0, np.sqrt(ss / (n - 1)))
    lag_products = (centered[:-1] * centered[1:]).sum(axis=0)
    autocorr = np.where(constant, 0.0, lag_products / np.where(constant, 1.0, ss))
    return np.column_stack([mean, std, autocorr])


def _pearson(x: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    centered = x - x.mean(axis=0)
    # a repeated value can leave round-off residue after demeaning; constant
    # columns must come out with sd exactly 0 so their pairs get r = 0
    centered[:, np.ptp(x, axis=0) == 0.0] = 0.0
    cov = centered.T @ centered / (n - 1)
    sd = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    denom = np.outer(sd, sd)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(denom > 0.0, cov / denom, 0.0)
    r = (r + r.T) / 2.0
    np.fill_diagonal(r, 1.0)
    return r


def _spearman(x: np.ndarray) -> np.ndarray:
    return _pearson(rankdata(x, axis=0).astype(np.float64))


# Pluggable so rank-based measures can be swapped in without touching callers.
ASSOCIATION_MEASURES = {
    "pearson": _pearson,
    "spearman": _spearman,
}


def association_matrix(window, measure: str = "pearson") -> np.ndarray:
    """Pairwise association of the window's variables (V x V, symmetric).

    The default is Pearson correlation with sample covariance (divisor
    L-1).  Pairs involving a zero-variance variable get 0 off-diagonal;
    the diagonal is exactly 1 everywhere.
    """
    try:
        fn = ASSOCIATION_MEASURES[measure]
    except KeyError:
        raise ValueError(
            f"unknown association measure {measure!r}; "
            f"available: {sorted(ASSOCIATION_MEASURES)}"
        ) from None
    return fn(_window_array(window))


def threshold_adjacency(assoc: np.ndarray, threshold: float, weighted: bool = False) -> np.ndarray:
    """Adjacency from an association matrix: edge iff |r_ij| >= threshold.

    Self-loops are always present (diagonal 1), so every node keeps a
    positive degree even when fully isolated.  With ``weighted`` the
    surviving off-diagonal entries keep |r_ij| instead of 1.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    assoc = np.asarray(assoc, dtype=np.float64)
    if assoc.ndim != 2 or assoc.shape[0] != assoc.shape[1]:
        raise ValueError(f"association matrix must be square, got shape {assoc.shape}")
    magnitude = np.abs(assoc)
    if weighted:
        adjacency = np.where(magnitude >= threshold, magnitude, 0.0)
    else:
        adjacency = (magnitude >= threshold).astype(np.float64)
    np.fill_diagonal(adjacency, 1.0)
    return adjacency


def normalize_adjacency(adjacency: np.ndarray) -> np.ndarray:
    """Symmetric degree normalization D^{-1/2} A D^{-1/2}.

    Requires a symmetric adjacency with unit diagonal (self-loops), which
    guarantees positive degrees; the result is symmetric with eigenvalues
    in [-1, 1].
    """
    a = np.asarray(adjacency, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"adjacency must be square, got shape {a.shape}")
    if not (np.diag(a) == 1.0).all():
        raise ValueError("adjacency diagonal must be all ones (self-loops)")
    if np.abs(a - a.T).max(initial=0.0) > 1e-12:
        raise ValueError("adjacency must be symmetric")
    degrees = a.sum(axis=1)
    assert (degrees > 0.0).all(), "self-loops make zero rows impossible"
    inv_sqrt = 1.0 / np.sqrt(degrees)
    # outer() keeps the scaling factor bitwise symmetric
    return a * np.outer(inv_sqrt, inv_sqrt)


def build_snapshot(window, config: SnapshotConfig | None = None) -> GraphSnapshot:
    """Window -> GraphSnapshot (features + normalized thresholded adjacency)."""
    if config is None:
        config = SnapshotConfig()
    features = node_features(window)
    assoc = association_matrix(window, config.measure)
    adjacency = threshold_adjacency(assoc, config.threshold, weighted=config.weighted)
    return GraphSnapshot(
        features=features,
        adjacency_norm=normalize_adjacency(adjacency),
        label=int(getattr(window, "label", 0)),
        start_index=int(getattr(window, "start_index", 0)),
    )


def build_snapshots(windows, config: SnapshotConfig | None = None) -> list[GraphSnapshot]:
    if config is None:
        config = SnapshotConfig()
    return [build_snapshot(w, config) for w in windows]


def save_snapshot_batch(path, snapshots: list[GraphSnapshot], meta: dict | None = None) -> None:
    """Store snapshots losslessly in one container file.

    All snapshots in a batch must share the node count V and feature count
    F (one pipeline run always does; the classifier itself has no such
    restriction).
    """
    if not snapshots:
        raise ValueError("cannot save an empty snapshot batch")
    shapes = {(s.num_nodes, s.num_features) for s in snapshots}
    if len(shapes) != 1:
        raise ValueError(f"batch mixes node/feature shapes: {sorted(shapes)}")
    (num_nodes, num_features), = shapes
    features = np.stack([s.features for s in snapshots]).astype(np.float64)
    adjacency = np.stack([s.adjacency_norm for s in snapshots]).astype(np.float64)
    labels = np.array([s.label for s in snapshots], dtype=np.int64)
    starts = np.array([s.start_index for s in snapshots], dtype=np.int64)
    combined_meta = {
        "count": len(snapshots),
        "num_nodes": num_nodes,
        "num_features": num_features,
    }
    if meta:
        combined_meta.update(meta)
    write_blockfile(
        path,
        SNAPSHOT_BATCH_FORMAT,
        combined_meta,
        [
            ("features", features),
            ("adjacency_norm", adjacency),
            ("labels", labels),
            ("start_indices", starts),
        ],
    )


def load_snapshot_batch(path) -> tuple[list[GraphSnapshot], dict]:
    """Inverse of :func:`save_snapshot_batch`; returns (snapshots, meta)."""
    arrays, meta = read_blockfile(path, SNAPSHOT_BATCH_FORMAT)
    for name in ("features", "adjacency_norm", "labels", "start_indices"):
        if name not in arrays:
            raise ValueError(f"{path}: snapshot batch is missing block '{name}'")
    snapshots = [
        GraphSnapshot(
            features=arrays["features"][i],
            adjacency_norm=arrays["adjacency_norm"][i],
            label=int(arrays["labels"][i]),
            start_index=int(arrays["start_indices"][i]),
        )
        for i in range(arrays["features"].shape[0])
    ]
    return snapshots, meta
