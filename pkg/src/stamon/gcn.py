"""Graph convolutional classifier for whole-graph labels, from scratch.

Architecture (V nodes, F input features, hidden width H, C classes):

    H1 = relu(A X W1 + b1)        A: normalized adjacency (V, V)
    H2 = relu(A H1 W2 + b2)
    g  = mean over nodes of H2    (H,)  size-agnostic readout
    logits = g Wout + bout        (C,)

Training is plain minibatch gradient descent with momentum on a stable
log-sum-exp cross-entropy, using exact reverse-mode gradients (verified
against central finite differences in the test suite).  Everything is
float64 and deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt

import numpy as np

from .blockfile import read_blockfile, write_blockfile

PARAM_NAMES = ("w1", "b1", "w2", "b2", "w_out", "b_out")
CHECKPOINT_FORMAT = "gcn-checkpoint"


class TrainingDivergedError(FloatingPointError):
    """Loss or gradient became non-finite during fit()."""


@dataclass
class GcnModel:
    """Two graph-convolution layers, mean-pool readout, linear head."""

    w1: np.ndarray     # (F, H)
    b1: np.ndarray     # (H,)
    w2: np.ndarray     # (H, H)
    b2: np.ndarray     # (H,)
    w_out: np.ndarray  # (H, C)
    b_out: np.ndarray  # (C,)

    def __post_init__(self):
        for name in PARAM_NAMES:
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        f, h = self.w1.shape
        if self.b1.shape != (h,) or self.w2.shape != (h, h) or self.b2.shape != (h,):
            raise ValueError("hidden-layer parameter shapes are inconsistent")
        if self.w_out.shape[0] != h or self.b_out.shape != (self.w_out.shape[1],):
            raise ValueError("output-layer parameter shapes are inconsistent")

    @property
    def num_features(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden(self) -> int:
        return self.w1.shape[1]

    @property
    def num_classes(self) -> int:
        return self.b_out.shape[0]

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.num_features, self.hidden, self.num_classes)

    def parameters(self) -> dict[str, np.ndarray]:
        """Live parameter arrays, keyed by name, in fixed order."""
        return {name: getattr(self, name) for name in PARAM_NAMES}


@dataclass
class TrainingConfig:
    learning_rate: float = 1e-3
    epochs: int = 200
    batch_size: int = 32
    seed: int = 0
    hidden: int = 64
    momentum: float = 0.9

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.hidden < 1:
            raise ValueError("hidden must be >= 1")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "hidden": self.hidden,
            "momentum": self.momentum,
        }


@dataclass
class EpochLog:
    epoch: int
    mean_loss: float
    accuracy: float  # percent, on the training pass


@dataclass
class ForwardCache:
    """Intermediates from forward(), consumed by backward()."""

    x: np.ndarray
    a: np.ndarray
    z1: np.ndarray
    h1: np.ndarray
    z2: np.ndarray
    h2: np.ndarray
    pooled: np.ndarray
    logits: np.ndarray
    dims: tuple[int, int, int] = field(default=(0, 0, 0))


def init_model(num_features: int, hidden: int, num_classes: int, seed: int = 0) -> GcnModel:
    """Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases.

    Identical seeds give bit-identical parameters.
    """
    if min(num_features, hidden, num_classes) < 1:
        raise ValueError("num_features, hidden and num_classes must all be >= 1")
    rng = np.random.default_rng(seed)

    def glorot(fan_in: int, fan_out: int) -> np.ndarray:
        bound = sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=(fan_in, fan_out))

    return GcnModel(
        w1=glorot(num_features, hidden),
        b1=np.zeros(hidden),
        w2=glorot(hidden, hidden),
        b2=np.zeros(hidden),
        w_out=glorot(hidden, num_classes),
        b_out=np.zeros(num_classes),
    )


def forward(model: GcnModel, snapshot) -> tuple[np.ndarray, ForwardCache]:
    """Run the network on one graph; returns (logits, cache for backward)."""
    x = np.asarray(snapshot.features, dtype=np.float64)
    a = np.asarray(snapshot.adjacency_norm, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.num_features:
        raise ValueError(
            f"features shape {x.shape} does not match model input width "
            f"{model.num_features}"
        )
    if a.shape != (x.shape[0], x.shape[0]):
        raise ValueError(f"adjacency shape {a.shape} does not match {x.shape[0]} nodes")
    z1 = a @ (x @ model.w1) + model.b1
    h1 = np.maximum(z1, 0.0)
    z2 = a @ (h1 @ model.w2) + model.b2
    h2 = np.maximum(z2, 0.0)
    pooled = h2.mean(axis=0)
    logits = pooled @ model.w_out + model.b_out
    cache = ForwardCache(x=x, a=a, z1=z1, h1=h1, z2=z2, h2=h2,
                         pooled=pooled, logits=logits, dims=model.dims)
    return logits, cache


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax."""
    shifted = logits - logits.max()
    e = np.exp(shifted)
    return e / e.sum()


def cross_entropy(logits: np.ndarray, label: int) -> float:
    """log-sum-exp cross-entropy of one sample; stable for large logits."""
    logits = np.asarray(logits, dtype=np.float64)
    if not 0 <= label < logits.shape[0]:
        raise ValueError(f"label {label} out of range for {logits.shape[0]} classes")
    m = logits.max()
    return float(m + np.log(np.exp(logits - m).sum()) - logits[label])


def backward(model: GcnModel, cache: ForwardCache, label: int) -> dict[str, np.ndarray]:
    """Exact gradients of the cross-entropy loss w.r.t. every parameter.

    ReLU uses derivative 0 at exactly 0.  Raises if the cache was produced
    by a model of different dimensions.
    """
    if cache.dims != model.dims:
        raise ValueError(
            f"cache dims {cache.dims} do not match model dims {model.dims}; "
            "call backward with the cache from the matching forward pass"
        )
    num_classes = model.num_classes
    if not 0 <= label < num_classes:
        raise ValueError(f"label {label} out of range for {num_classes} classes")
    num_nodes = cache.x.shape[0]

    dlogits = softmax(cache.logits)
    dlogits[label] -= 1.0

    grad_b_out = dlogits
    grad_w_out = np.outer(cache.pooled, dlogits)
    dpooled = model.w_out @ dlogits

    # mean-pool spreads dpooled/V to every node row
    dz2 = np.where(cache.z2 > 0.0, dpooled / num_nodes, 0.0)
    grad_b2 = dz2.sum(axis=0)
    grad_w2 = (cache.a @ cache.h1).T @ dz2

    dh1 = cache.a.T @ (dz2 @ model.w2.T)
    dz1 = np.where(cache.z1 > 0.0, dh1, 0.0)
    grad_b1 = dz1.sum(axis=0)
    grad_w1 = (cache.a @ cache.x).T @ dz1

    return {
        "w1": grad_w1,
        "b1": grad_b1,
        "w2": grad_w2,
        "b2": grad_b2,
        "w_out": grad_w_out,
        "b_out": grad_b_out,
    }


def predict(model: GcnModel, snapshot) -> tuple[int, np.ndarray]:
    """Class id (argmax, ties to the lowest id) and softmax probabilities."""
    logits, _ = forward(model, snapshot)
    return int(np.argmax(logits)), softmax(logits)


def fit(model: GcnModel, snapshots, config: TrainingConfig) -> tuple[GcnModel, list[EpochLog]]:
    """Minibatch gradient descent with momentum over labeled snapshots.

    Snapshots only need to share the model's feature width (node counts may
    differ; the readout is size-agnostic).  Epoch order is shuffled
    deterministically from the seed; the returned log has one entry per
    epoch with the mean loss and training accuracy of that pass.  Aborts
    with TrainingDivergedError as soon as a loss or gradient goes
    non-finite.
    """
    snapshots = list(snapshots)
    if not snapshots:
        raise ValueError("training set is empty")
    for snap in snapshots:
        if not 0 <= snap.label < model.num_classes:
            raise ValueError(
                f"snapshot label {snap.label} out of range for "
                f"{model.num_classes} classes"
            )
    rng = np.random.default_rng(config.seed)
    velocity = {name: np.zeros_like(p) for name, p in model.parameters().items()}
    n = len(snapshots)
    log: list[EpochLog] = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        for batch_index, start in enumerate(range(0, n, config.batch_size), start=1):
            batch = order[start : start + config.batch_size]
            grad_sum = {name: np.zeros_like(p) for name, p in model.parameters().items()}
            batch_loss = 0.0
            for i in batch:
                snap = snapshots[i]
                logits, cache = forward(model, snap)
                batch_loss += cross_entropy(logits, snap.label)
                if int(np.argmax(logits)) == snap.label:
                    correct += 1
                for name, g in backward(model, cache, snap.label).items():
                    grad_sum[name] += g
            if not np.isfinite(batch_loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {batch_index}"
                )
            scale = 1.0 / len(batch)
            params = model.parameters()
            for name in PARAM_NAMES:
                grad = grad_sum[name] * scale
                if not np.isfinite(grad).all():
                    raise TrainingDivergedError(
                        f"non-finite gradient for {name} at epoch {epoch}, "
                        f"batch {batch_index}"
                    )
                velocity[name] = config.momentum * velocity[name] - config.learning_rate * grad
                params[name] += velocity[name]
            loss_sum += batch_loss
        log.append(EpochLog(epoch=epoch, mean_loss=loss_sum / n,
                            accuracy=100.0 * correct / n))
    return model, log


def save_checkpoint(path, model: GcnModel, config: TrainingConfig | None = None,
                    meta: dict | None = None) -> None:
    """Write a versioned checkpoint: dims, float64 parameters, config, seed."""
    f, h, c = model.dims
    combined_meta = {
        "num_features": f,
        "hidden": h,
        "num_classes": c,
        "training_config": config.to_dict() if config is not None else None,
        "seed": config.seed if config is not None else None,
    }
    if meta:
        combined_meta.update(meta)
    write_blockfile(path, CHECKPOINT_FORMAT, combined_meta,
                    list(model.parameters().items()))


def load_checkpoint(path) -> tuple[GcnModel, TrainingConfig | None, dict]:
    """Inverse of :func:`save_checkpoint`; round-trips bit-identically."""
    arrays, meta = read_blockfile(path, CHECKPOINT_FORMAT)
    missing = [name for name in PARAM_NAMES if name not in arrays]
    if missing:
        raise ValueError(f"{path}: checkpoint is missing parameters {missing}")
    model = GcnModel(**{name: arrays[name] for name in PARAM_NAMES})
    config = None
    if meta.get("training_config"):
        config = TrainingConfig(**meta["training_config"])
    return model, config, meta
