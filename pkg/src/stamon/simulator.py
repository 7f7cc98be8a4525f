"""Synthetic multivariate process generator with fault injection.

The generative family is a stable VAR(1): x_t = A x_{t-1} + eps_t with
independent Gaussian noise, which gives controllable coupling between
variables (space) on top of autocorrelated dynamics (time).  Fault kinds
mirror the classic step / random-variation / sticking trio:

    step_bias       adds a constant input to the target from onset on
    variance_shift  multiplies the target's noise std by the magnitude
    stuck_sensor    freezes the target at its onset value

Benchmark suites are built so that classes differ in their coupling
structure (edge sets at the default 0.6 threshold), not just in node
statistics, which keeps the graph-construction stage load-bearing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .snapshot import association_matrix, threshold_adjacency
from .timeseries import (
    DEFAULT_SAMPLING_PERIOD_MINUTES,
    TimeSeriesDataset,
    save_csv,
    write_manifest,
)

FAULT_KINDS = ("step_bias", "variance_shift", "stuck_sensor")

# order in which benchmark suites assign kinds to fault classes; the two
# window-statistic-crisp kinds come first so small suites stay separable
FAULT_CYCLE = ("stuck_sensor", "variance_shift", "step_bias")

GENERATION_RECORD_FORMAT = "generation-record"

# baseline pair dynamics: leader AR coefficient, leader->follower coupling,
# follower noise scale; chosen for a stationary pair correlation near 0.87
LEADER_AR = 0.9
FOLLOWER_COUPLING = 0.9
FOLLOWER_NOISE = 0.5
DECOUPLED_AR = 0.3

# benchmark regimes are emitted as independent runs of this many samples
DEFAULT_RUN_LENGTH = 500


class SimulationError(ValueError):
    """A regime spec is invalid or a generated suite failed validation."""


@dataclass(frozen=True)
class FaultSpec:
    kind: str
    target: int
    magnitude: float
    onset: int

    def __post_init__(self):
        if self.kind not in FAULT_KINDS:
            raise SimulationError(f"unknown fault kind {self.kind!r}; expected one of {FAULT_KINDS}")
        if self.target < 0:
            raise SimulationError(f"fault target must be >= 0, got {self.target}")
        if self.onset < 0:
            raise SimulationError(f"fault onset must be >= 0, got {self.onset}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "target": self.target,
                "magnitude": self.magnitude, "onset": self.onset}


@dataclass
class RegimeSpec:
    """One operating regime: stable VAR(1) coupling plus optional faults."""

    name: str
    coupling: np.ndarray   # (V, V)
    noise_std: np.ndarray  # (V,)
    faults: list[FaultSpec] = field(default_factory=list)
    duration: int = 5000
    seed: int = 0

    def __post_init__(self):
        self.coupling = np.asarray(self.coupling, dtype=np.float64)
        self.noise_std = np.asarray(self.noise_std, dtype=np.float64)
        if self.coupling.ndim != 2 or self.coupling.shape[0] != self.coupling.shape[1]:
            raise SimulationError(f"coupling must be square, got shape {self.coupling.shape}")
        v = self.coupling.shape[0]
        if self.noise_std.shape != (v,):
            raise SimulationError("noise_std length must match coupling size")
        if (self.noise_std < 0).any():
            raise SimulationError("noise_std must be non-negative")
        if self.duration < 1:
            raise SimulationError("duration must be >= 1")
        radius = float(np.abs(np.linalg.eigvals(self.coupling)).max())
        if radius >= 1.0:
            raise SimulationError(
                f"coupling is unstable: spectral radius {radius:.6f} >= 1"
            )
        for fault in self.faults:
            if fault.target >= v:
                raise SimulationError(
                    f"fault target {fault.target} out of range for {v} variables"
                )
            if fault.onset >= self.duration:
                raise SimulationError(
                    f"fault onset {fault.onset} >= duration {self.duration}"
                )

    @property
    def num_variables(self) -> int:
        return self.coupling.shape[0]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "num_variables": self.num_variables,
            "coupling": self.coupling.tolist(),
            "noise_std": self.noise_std.tolist(),
            "faults": [f.to_dict() for f in self.faults],
            "duration": self.duration,
            "seed": self.seed,
        }


def variable_names(num_variables: int) -> list[str]:
    return [f"v{i:02d}" for i in range(num_variables)]


def simulate(spec: RegimeSpec,
             sampling_period: float = DEFAULT_SAMPLING_PERIOD_MINUTES) -> TimeSeriesDataset:
    """Run one regime; deterministic for a fixed spec (seed included).

    The base noise draws do not depend on the fault list, so a faulty run
    and its fault-free twin are identical sample-for-sample before the
    earliest onset.
    """
    v = spec.num_variables
    rng = np.random.default_rng(spec.seed)
    noise = rng.standard_normal((spec.duration, v)) * spec.noise_std
    for fault in spec.faults:
        if fault.kind == "variance_shift":
            noise[fault.onset :, fault.target] *= fault.magnitude
    samples = np.zeros((spec.duration, v))
    state = np.zeros(v)
    frozen: dict[int, float] = {}
    for t in range(spec.duration):
        state = spec.coupling @ state + noise[t]
        for fault in spec.faults:
            if t < fault.onset:
                continue
            if fault.kind == "step_bias":
                state[fault.target] += fault.magnitude
            elif fault.kind == "stuck_sensor":
                if fault.target not in frozen or t == fault.onset:
                    frozen[fault.target] = state[fault.target]
                state[fault.target] = frozen[fault.target]
        samples[t] = state
    return TimeSeriesDataset(
        variable_names=variable_names(v),
        samples=samples,
        labels=np.zeros(spec.duration, dtype=np.int64),
        class_names=[spec.name],
        sampling_period=sampling_period,
    )


def simulate_regime_runs(spec: RegimeSpec, run_length: int = DEFAULT_RUN_LENGTH,
                         sampling_period: float = DEFAULT_SAMPLING_PERIOD_MINUTES
                         ) -> TimeSeriesDataset:
    """Simulate a regime as several independent runs and concatenate them.

    One long trajectory per regime would make run-specific accidents (the
    level a sensor froze at, a particular drift excursion) look like class
    features.  Splitting the duration into independent runs with derived
    seeds gives within-class diversity; fault onsets are relative to each
    run.  Deterministic for a fixed spec.
    """
    if run_length < 2:
        raise SimulationError("run_length must be >= 2")
    blocks = []
    remaining = spec.duration
    index = 0
    while remaining > 0:
        length = min(run_length, remaining)
        chunk = RegimeSpec(
            name=spec.name,
            coupling=spec.coupling,
            noise_std=spec.noise_std,
            faults=[f for f in spec.faults if f.onset < length],
            duration=length,
            seed=(spec.seed * 100_003 + index) % (2 ** 63),
        )
        blocks.append(simulate(chunk, sampling_period).samples)
        remaining -= length
        index += 1
    return TimeSeriesDataset(
        variable_names=variable_names(spec.num_variables),
        samples=np.vstack(blocks),
        labels=np.zeros(spec.duration, dtype=np.int64),
        class_names=[spec.name],
        sampling_period=sampling_period,
    )


def simulate_suite(specs: list[RegimeSpec],
                   sampling_period: float = DEFAULT_SAMPLING_PERIOD_MINUTES,
                   run_length: int | None = DEFAULT_RUN_LENGTH) -> TimeSeriesDataset:
    """Simulate every regime and concatenate; class id = position in list.

    ``run_length`` splits each regime into independent runs (see
    :func:`simulate_regime_runs`); pass None for one run per regime.
    """
    if not specs:
        raise SimulationError("no regime specs given")
    blocks = []
    labels = []
    for class_id, spec in enumerate(specs):
        if run_length is None:
            run = simulate(spec, sampling_period)
        else:
            run = simulate_regime_runs(spec, run_length, sampling_period)
        blocks.append(run.samples)
        labels.append(np.full(run.num_samples, class_id, dtype=np.int64))
    return TimeSeriesDataset(
        variable_names=variable_names(specs[0].num_variables),
        samples=np.vstack(blocks),
        labels=np.concatenate(labels),
        class_names=[spec.name for spec in specs],
        sampling_period=sampling_period,
    )


def _class_seed(seed: int, class_index: int) -> int:
    # documented derivation so suites are reproducible from one root seed
    return (seed * 1_000_003 + class_index) % (2 ** 63)


def make_benchmark_suite(class_count: int, num_variables: int, duration: int,
                         seed: int) -> list[RegimeSpec]:
    """Benchmark regimes: a coupled-pairs baseline plus fault classes.

    Variables form leader/follower pairs; at baseline every follower tracks
    its leader, putting one strong edge per pair above the default 0.6
    threshold.  Fault class k disturbs pair k-1 with one fault, cycling
    through FAULT_CYCLE:

        stuck_sensor    freezes one pair member (zero in-window std, all of
                        its edges die)
        variance_shift  decouples the pair and inflates the leader's noise
                        (one node with outsized in-window std, the freed
                        follower turns fast and small)
        step_bias       decouples the pair and shifts the follower's level

    Every class therefore differs from every other both in its edge set at
    the default threshold and in node-level window statistics, keeping the
    graph-construction and the feature stage load-bearing at once.
    Separability is checked empirically on a preview run and a failure
    raises (see :func:`separability_report`).
    """
    if class_count < 2:
        raise SimulationError(f"class_count must be >= 2, got {class_count}")
    if num_variables < 2:
        raise SimulationError(f"num_variables must be >= 2, got {num_variables}")
    pairs = num_variables // 2
    if class_count - 1 > pairs:
        raise SimulationError(
            f"{class_count} classes need {class_count - 1} variable pairs, but "
            f"{num_variables} variables only provide {pairs}"
        )

    def baseline_coupling() -> tuple[np.ndarray, np.ndarray]:
        coupling = np.zeros((num_variables, num_variables))
        noise = np.ones(num_variables)
        for p in range(pairs):
            leader, follower = 2 * p, 2 * p + 1
            coupling[leader, leader] = LEADER_AR
            coupling[follower, leader] = FOLLOWER_COUPLING
            noise[follower] = FOLLOWER_NOISE
        if num_variables % 2 == 1:
            coupling[-1, -1] = DECOUPLED_AR
        return coupling, noise

    def decouple(coupling: np.ndarray, pair: int) -> None:
        leader, follower = 2 * pair, 2 * pair + 1
        coupling[follower, leader] = 0.0
        coupling[follower, follower] = DECOUPLED_AR

    specs: list[RegimeSpec] = []
    coupling, noise = baseline_coupling()
    specs.append(RegimeSpec(name="normal", coupling=coupling, noise_std=noise,
                            faults=[], duration=duration,
                            seed=_class_seed(seed, 0)))
    for k in range(1, class_count):
        coupling, noise = baseline_coupling()
        pair = k - 1
        leader, follower = 2 * pair, 2 * pair + 1
        kind = FAULT_CYCLE[(k - 1) % len(FAULT_CYCLE)]
        cycle_round = (k - 1) // len(FAULT_CYCLE)
        boost = 2.0 ** cycle_round  # later rounds reuse a kind; separate by scale
        if kind == "stuck_sensor":
            # freezing the follower alone kills the pair's edge
            target = follower if cycle_round % 2 == 0 else leader
            fault = FaultSpec(kind=kind, target=target, magnitude=0.0, onset=0)
        elif kind == "variance_shift":
            decouple(coupling, pair)
            # fast leader keeps the inflated in-window std concentrated
            coupling[leader, leader] = DECOUPLED_AR
            fault = FaultSpec(kind=kind, target=leader, magnitude=12.0 * boost, onset=0)
        else:  # step_bias
            decouple(coupling, pair)
            fault = FaultSpec(kind=kind, target=follower, magnitude=15.0 * boost, onset=0)
        specs.append(RegimeSpec(name=f"fault{k:02d}_{kind}", coupling=coupling,
                                noise_std=noise, faults=[fault], duration=duration,
                                seed=_class_seed(seed, k)))
    report = separability_report(specs)
    if not report["pairwise_distinct"]:
        raise SimulationError(
            "generated suite is not separable at the default threshold: "
            + json.dumps(report["indistinct_pairs"])
        )
    return specs


def separability_report(specs: list[RegimeSpec], threshold: float = 0.6,
                        preview_duration: int = 5000) -> dict:
    """Empirical edge sets of each regime on a preview run.

    Simulates every spec for ``preview_duration`` samples, thresholds the
    full-run association magnitudes at ``threshold``, and reports whether
    all class pairs have distinct edge sets (at least one association
    crossing the threshold between them).
    """
    edge_sets: dict[str, list[list[int]]] = {}
    sets: list[set[tuple[int, int]]] = []
    for spec in specs:
        preview = RegimeSpec(name=spec.name, coupling=spec.coupling,
                             noise_std=spec.noise_std, faults=spec.faults,
                             duration=preview_duration, seed=spec.seed)
        run = simulate(preview)
        assoc = association_matrix(run.samples)
        adjacency = threshold_adjacency(assoc, threshold)
        i_idx, j_idx = np.nonzero(np.triu(adjacency, k=1))
        edges = {(int(i), int(j)) for i, j in zip(i_idx, j_idx)}
        sets.append(edges)
        edge_sets[spec.name] = sorted([i, j] for i, j in edges)
    indistinct = []
    min_difference = None
    for a in range(len(specs)):
        for b in range(a + 1, len(specs)):
            difference = len(sets[a] ^ sets[b])
            if min_difference is None or difference < min_difference:
                min_difference = difference
            if difference == 0:
                indistinct.append([specs[a].name, specs[b].name])
    return {
        "threshold": threshold,
        "preview_duration": preview_duration,
        "edge_sets": edge_sets,
        "pairwise_distinct": not indistinct,
        "indistinct_pairs": indistinct,
        "min_edge_difference": min_difference,
    }


def write_benchmark_data(out_dir, class_count: int, num_variables: int,
                         train_samples: int, test_samples: int, seed: int,
                         sampling_period: float = DEFAULT_SAMPLING_PERIOD_MINUTES,
                         run_length: int = DEFAULT_RUN_LENGTH,
                         run_config: dict | None = None) -> dict:
    """Emit a full benchmark: per-class train/test CSVs, manifest, record.

    Train regimes use the root seed, test regimes seed+1, so the two splits
    are independent draws of the same dynamics.  Returns a summary with the
    file names and the separability reports.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_specs = make_benchmark_suite(class_count, num_variables, train_samples, seed)
    test_specs = make_benchmark_suite(class_count, num_variables, test_samples, seed + 1)
    entries = []
    rows = {}
    for split, specs in (("train", train_specs), ("test", test_specs)):
        for spec in specs:
            run = simulate_regime_runs(spec, run_length, sampling_period)
            filename = f"{spec.name}_{split}.csv"
            save_csv(out_dir / filename, run.variable_names, run.samples)
            entries.append({"path": filename, "class_name": spec.name, "split": split})
            rows[filename] = run.num_samples
    class_names = [spec.name for spec in train_specs]
    extra = {"run_config": run_config} if run_config else None
    write_manifest(out_dir / "manifest.json", entries, class_names,
                   sampling_period=sampling_period, extra=extra)
    record = {
        "format": GENERATION_RECORD_FORMAT,
        "version": 1,
        "artifact_version": __version__,
        "run_config": run_config or {},
        "train_specs": [spec.to_dict() for spec in train_specs],
        "test_specs": [spec.to_dict() for spec in test_specs],
        "separability": {
            "train": separability_report(train_specs),
            "test": separability_report(test_specs),
        },
    }
    (out_dir / "generation_record.json").write_text(
        json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return {
        "manifest": "manifest.json",
        "generation_record": "generation_record.json",
        "class_names": class_names,
        "rows_per_file": rows,
    }
