"""Labeled multivariate process data: ingestion, standardization, windowing.

A dataset is a dense (samples x variables) float64 matrix with one integer
class label per row.  Raw values live in plain CSV files (header row of
variable names, then numeric rows); a JSON manifest maps each file to a
class name and a train/test split.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEFAULT_SAMPLING_PERIOD_MINUTES = 3.0
MANIFEST_FORMAT = "dataset-manifest"
MANIFEST_VERSION = 1
# %.17g round-trips float64 exactly; the CSV contract asks for >= 12
# significant digits.
CSV_FLOAT_FORMAT = "%.17g"

CONSTANT_STD_TOLERANCE = 1e-12


class DataError(ValueError):
    """A data file or manifest failed validation."""


@dataclass
class TimeSeriesDataset:
    """Multivariate samples with one class label per row."""

    variable_names: list[str]
    samples: np.ndarray   # (N, V) float64
    labels: np.ndarray    # (N,) int64, values in [0, C)
    class_names: list[str]
    sampling_period: float = DEFAULT_SAMPLING_PERIOD_MINUTES  # minutes per sample

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.samples.ndim != 2:
            raise DataError(f"samples must be 2-D, got shape {self.samples.shape}")
        n, v = self.samples.shape
        if len(self.variable_names) != v:
            raise DataError(
                f"{len(self.variable_names)} variable names for {v} columns"
            )
        if len(set(self.variable_names)) != len(self.variable_names):
            raise DataError("variable names must be unique")
        if self.labels.shape != (n,):
            raise DataError(f"labels shape {self.labels.shape} does not match {n} rows")
        if n > 0:
            if self.labels.min() < 0 or self.labels.max() >= len(self.class_names):
                raise DataError("labels must lie in [0, number of classes)")
        if not np.isfinite(self.samples).all():
            raise DataError("samples contain non-finite values")

    @property
    def num_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def num_variables(self) -> int:
        return self.samples.shape[1]

    @property
    def num_classes(self) -> int:
        return len(self.class_names)


@dataclass
class NormalizationStats:
    """Per-variable location/scale fitted on training rows only.

    Variables whose population std falls below ``CONSTANT_STD_TOLERANCE``
    are flagged constant and get std 1, so standardizing maps them to 0.
    """

    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray  # bool per variable

    @property
    def num_variables(self) -> int:
        return self.mean.shape[0]


@dataclass
class WindowSegment:
    """A contiguous, label-pure block of rows from one dataset."""

    samples: np.ndarray  # (L, V)
    label: int
    start_index: int

    @property
    def window_length(self) -> int:
        return self.samples.shape[0]

    @property
    def num_variables(self) -> int:
        return self.samples.shape[1]


def _read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    if not path.is_file():
        raise DataError(f"data file not found: {path}")
    rows: list[list[float]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        names = [h.strip() for h in header]
        if len(set(names)) != len(names):
            raise DataError(f"{path}: duplicate variable names in header")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(names):
                raise DataError(
                    f"{path}, line {lineno}: expected {len(names)} values, got {len(row)}"
                )
            try:
                values = [float(cell) for cell in row]
            except ValueError:
                raise DataError(f"{path}, line {lineno}: non-numeric cell") from None
            if not all(math.isfinite(v) for v in values):
                raise DataError(f"{path}, line {lineno}: non-finite value")
            rows.append(values)
    if rows:
        samples = np.array(rows, dtype=np.float64)
    else:
        samples = np.zeros((0, len(names)), dtype=np.float64)
    return names, samples


def _parse_manifest(manifest_path: Path) -> tuple[dict, list[dict], list[str]]:
    if not manifest_path.is_file():
        raise DataError(f"manifest not found: {manifest_path}")
    try:
        doc = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{manifest_path}: invalid JSON: {exc}") from exc
    entries = doc.get("entries")
    if not isinstance(entries, list) or not entries:
        raise DataError(f"{manifest_path}: manifest references no data files")
    declared = doc.get("classes")
    if declared is not None and (
        not isinstance(declared, list) or not all(isinstance(c, str) for c in declared)
    ):
        raise DataError(f"{manifest_path}: 'classes' must be a list of names")
    class_names: list[str] = list(declared) if declared else []
    for idx, entry in enumerate(entries, start=1):
        for key in ("path", "class_name", "split"):
            if not isinstance(entry, dict) or key not in entry:
                raise DataError(f"{manifest_path}: entry {idx} is missing '{key}'")
        if entry["split"] not in ("train", "test"):
            raise DataError(
                f"{manifest_path}: entry {idx}: split must be 'train' or 'test', "
                f"got {entry['split']!r}"
            )
        name = entry["class_name"]
        if declared:
            if name not in class_names:
                raise DataError(
                    f"{manifest_path}: entry {idx}: unknown class name {name!r}"
                )
        elif name not in class_names:
            class_names.append(name)
    return doc, entries, class_names


def load_dataset(manifest_path, split: str | None = None) -> TimeSeriesDataset:
    """Load and concatenate the CSV files referenced by a manifest.

    Class ids follow the manifest's explicit ``classes`` list when present,
    otherwise first-appearance order of ``class_name`` over all entries, so
    train and test splits of one manifest always agree on ids.  ``split``
    restricts loading to entries of that split.
    """
    manifest_path = Path(manifest_path)
    doc, entries, class_names = _parse_manifest(manifest_path)
    if split is not None:
        entries = [e for e in entries if e["split"] == split]
        if not entries:
            raise DataError(f"{manifest_path}: no entries with split {split!r}")
    header: list[str] | None = None
    first_path: Path | None = None
    blocks: list[np.ndarray] = []
    labels: list[np.ndarray] = []
    for entry in entries:
        path = manifest_path.parent / entry["path"]
        names, samples = _read_csv(path)
        if header is None:
            header = names
            first_path = path
        elif names != header:
            raise DataError(
                f"{path}: header does not match the variable names of {first_path}"
            )
        class_id = class_names.index(entry["class_name"])
        blocks.append(samples)
        labels.append(np.full(samples.shape[0], class_id, dtype=np.int64))
    sampling_period = float(
        doc.get("sampling_period_minutes", DEFAULT_SAMPLING_PERIOD_MINUTES)
    )
    return TimeSeriesDataset(
        variable_names=list(header),
        samples=np.vstack(blocks),
        labels=np.concatenate(labels),
        class_names=class_names,
        sampling_period=sampling_period,
    )


def save_csv(path, variable_names: list[str], samples: np.ndarray) -> None:
    """Write one data CSV (header row + values at full float64 precision)."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2 or samples.shape[1] != len(variable_names):
        raise DataError("samples shape does not match variable names")
    if not np.isfinite(samples).all():
        raise DataError("refusing to write non-finite values")
    for name in variable_names:
        if any(ch in name for ch in ',"\n\r'):
            raise DataError(f"variable name {name!r} is not CSV-safe")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(variable_names) + "\n")
        for row in samples:
            fh.write(",".join(CSV_FLOAT_FORMAT % v for v in row) + "\n")


def write_manifest(
    path,
    entries: list[dict],
    class_names: list[str],
    sampling_period: float = DEFAULT_SAMPLING_PERIOD_MINUTES,
    extra: dict | None = None,
) -> None:
    """Write a dataset manifest; entry paths must be relative to the manifest."""
    doc = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "sampling_period_minutes": float(sampling_period),
        "classes": list(class_names),
        "entries": entries,
    }
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def fit_standardizer(dataset: TimeSeriesDataset, train_rows) -> NormalizationStats:
    """Fit per-variable mean/std (population, divisor n) on ``train_rows`` only."""
    rows = np.asarray(sorted(train_rows), dtype=np.int64)
    if rows.size == 0:
        raise DataError("train_rows is empty")
    if rows.min() < 0 or rows.max() >= dataset.num_samples:
        raise DataError("train_rows contains out-of-range indices")
    sub = dataset.samples[rows]
    mean = sub.mean(axis=0)
    std = sub.std(axis=0)
    constant = std < CONSTANT_STD_TOLERANCE
    std = np.where(constant, 1.0, std)
    return NormalizationStats(mean=mean, std=std, constant=constant)


def apply_standardizer(dataset: TimeSeriesDataset, stats: NormalizationStats) -> TimeSeriesDataset:
    """Return a standardized copy: x -> (x - mean) / std per variable."""
    if stats.num_variables != dataset.num_variables:
        raise DataError(
            f"standardizer has {stats.num_variables} variables, dataset has "
            f"{dataset.num_variables}"
        )
    return TimeSeriesDataset(
        variable_names=list(dataset.variable_names),
        samples=(dataset.samples - stats.mean) / stats.std,
        labels=dataset.labels.copy(),
        class_names=list(dataset.class_names),
        sampling_period=dataset.sampling_period,
    )


def invert_standardizer(dataset: TimeSeriesDataset, stats: NormalizationStats) -> TimeSeriesDataset:
    """Undo :func:`apply_standardizer`: x -> x * std + mean per variable."""
    if stats.num_variables != dataset.num_variables:
        raise DataError(
            f"standardizer has {stats.num_variables} variables, dataset has "
            f"{dataset.num_variables}"
        )
    return TimeSeriesDataset(
        variable_names=list(dataset.variable_names),
        samples=dataset.samples * stats.std + stats.mean,
        labels=dataset.labels.copy(),
        class_names=list(dataset.class_names),
        sampling_period=dataset.sampling_period,
    )


def segment_windows(dataset: TimeSeriesDataset, window_length: int, stride: int) -> list[WindowSegment]:
    """Cut the dataset into label-pure windows.

    Candidate starts are 0, stride, 2*stride, ...; a window is emitted only
    when all of its rows carry the same label (windows straddling a label
    change are discarded).  ``window_length`` larger than the dataset yields
    an empty list.
    """
    if window_length < 2:
        raise ValueError(f"window_length must be >= 2, got {window_length}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    windows: list[WindowSegment] = []
    for start in range(0, dataset.num_samples - window_length + 1, stride):
        block_labels = dataset.labels[start : start + window_length]
        if (block_labels == block_labels[0]).all():
            windows.append(
                WindowSegment(
                    samples=dataset.samples[start : start + window_length].copy(),
                    label=int(block_labels[0]),
                    start_index=start,
                )
            )
    return windows
