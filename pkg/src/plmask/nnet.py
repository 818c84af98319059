"""Minimal fully-connected network with hand-derived backpropagation.

Rectifier hidden layers, independent per-class sigmoid outputs (no
softmax: the targets are multi-label), SGD with classical momentum, and
an epoch-level learning-rate schedule with linear warmup and step decay.
All math is float64 numpy; runs are bitwise reproducible for a fixed
seed and thread count.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .losses import PROB_CEIL, PROB_FLOOR, loss_grad_wrt_prob

CHECKPOINT_MAGIC = b"MLPW"
CHECKPOINT_VERSION = 1


@dataclass
class MlpModel:
    """Weights/biases per layer; weights[i] has shape (dims[i+1], dims[i])."""

    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        if len(dims) < 2 or any(d <= 0 for d in dims):
            raise ValueError(f"need >= 2 positive layer dims, got {dims}")
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise ValueError("one weight matrix and bias vector per layer transition")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[i + 1], dims[i]):
                raise ValueError(f"weight {i} must be {(dims[i + 1], dims[i])}, got {w.shape}")
            if b.shape != (dims[i + 1],):
                raise ValueError(f"bias {i} must be ({dims[i + 1]},), got {b.shape}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"non-finite parameters in layer {i}")
        self.layer_dims = dims

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    @property
    def num_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "MlpModel":
        return MlpModel(
            layer_dims=self.layer_dims,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )

    def params_flat(self) -> np.ndarray:
        return np.concatenate(
            [w.ravel() for w in self.weights] + [b.ravel() for b in self.biases]
        )


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]


@dataclass
class OptimizerState:
    """Momentum coefficient plus velocity buffers shaped like the model."""

    momentum: float
    velocity_w: list[np.ndarray]
    velocity_b: list[np.ndarray]

    @classmethod
    def for_model(cls, model: MlpModel, momentum: float = 0.9) -> "OptimizerState":
        if not 0.0 <= momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {momentum}")
        return cls(
            momentum=momentum,
            velocity_w=[np.zeros_like(w) for w in model.weights],
            velocity_b=[np.zeros_like(b) for b in model.biases],
        )


def init_model(layer_dims, seed) -> MlpModel:
    """Fan-in-scaled zero-mean Gaussian weights, zero biases."""
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2 or any(d <= 0 for d in dims):
        raise ValueError(f"need >= 2 positive layer dims, got {dims}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(rng.standard_normal((fan_out, fan_in)) * np.sqrt(2.0 / fan_in))
        biases.append(np.zeros(fan_out))
    return MlpModel(layer_dims=dims, weights=weights, biases=biases)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # Split by sign so exp never overflows.
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _forward_cache(model: MlpModel, batch: np.ndarray):
    """Forward pass keeping pre-activations and hidden activations."""
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != model.layer_dims[0]:
        raise ValueError(
            f"batch must be (n, {model.layer_dims[0]}), got {batch.shape}"
        )
    acts = [batch]
    pre = []
    h = batch
    for i in range(model.num_layers):
        z = h @ model.weights[i].T + model.biases[i]
        pre.append(z)
        h = np.maximum(z, 0.0) if i < model.num_layers - 1 else _sigmoid(z)
        acts.append(h)
    return acts, pre


def forward(model: MlpModel, batch: np.ndarray) -> np.ndarray:
    """Per-class probabilities, clamped into (0, 1); shape (n, C)."""
    acts, _ = _forward_cache(model, batch)
    return np.clip(acts[-1], PROB_FLOOR, PROB_CEIL)


def backward(
    model: MlpModel,
    batch: np.ndarray,
    labels: np.ndarray,
    masks: np.ndarray,
    class_weights: np.ndarray | None = None,
    kind: str = "bce",
    gamma: float = 2.0,
) -> Gradients:
    """Exact gradients of the masked, class-weighted batch-mean loss.

    Masked (sample, class) entries contribute exactly zero gradient.
    """
    acts, pre = _forward_cache(model, batch)
    raw = acts[-1]
    if not np.all(np.isfinite(raw)):
        raise FloatingPointError("non-finite activations in forward pass")
    labels = np.asarray(labels, dtype=np.float64)
    masks = np.asarray(masks, dtype=np.float64)
    if labels.shape != raw.shape or masks.shape != raw.shape:
        raise ValueError(
            f"labels/masks must match output shape {raw.shape}, "
            f"got {labels.shape} and {masks.shape}"
        )
    n = batch.shape[0]
    probs = np.clip(raw, PROB_FLOOR, PROB_CEIL)
    dloss_dp = loss_grad_wrt_prob(labels, probs, kind, gamma)
    # Clamp is flat outside its window; sigmoid slope uses the raw output.
    in_window = (raw > PROB_FLOOR) & (raw < PROB_CEIL)
    delta = dloss_dp * in_window * raw * (1.0 - raw) * masks
    if class_weights is not None:
        delta = delta * np.asarray(class_weights, dtype=np.float64)
    delta = delta / n

    grad_w = [np.empty(0)] * model.num_layers
    grad_b = [np.empty(0)] * model.num_layers
    for i in range(model.num_layers - 1, -1, -1):
        grad_w[i] = delta.T @ acts[i]
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i]) * (pre[i - 1] > 0.0)
    return Gradients(weights=grad_w, biases=grad_b)


def sgd_step(
    model: MlpModel, grads: Gradients, opt: OptimizerState, lr: float
) -> None:
    """velocity <- momentum * velocity + grad; param <- param - lr * velocity."""
    for g in grads.weights + grads.biases:
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient")
    for i in range(model.num_layers):
        opt.velocity_w[i] = opt.momentum * opt.velocity_w[i] + grads.weights[i]
        opt.velocity_b[i] = opt.momentum * opt.velocity_b[i] + grads.biases[i]
        model.weights[i] = model.weights[i] - lr * opt.velocity_w[i]
        model.biases[i] = model.biases[i] - lr * opt.velocity_b[i]


@dataclass(frozen=True)
class LrSchedule:
    """Linear warmup to base_lr, then a step decay at fixed epochs."""

    base_lr: float
    warmup_epochs: int = 0
    decay_epochs: tuple[int, ...] = ()
    decay_factor: float = 0.1

    def __post_init__(self):
        if self.base_lr <= 0:
            raise ValueError(f"base_lr must be > 0, got {self.base_lr}")
        if self.warmup_epochs < 0:
            raise ValueError(f"warmup_epochs must be >= 0, got {self.warmup_epochs}")
        if not 0.0 < self.decay_factor <= 1.0:
            raise ValueError(f"decay_factor must be in (0, 1], got {self.decay_factor}")
        decay = tuple(int(e) for e in self.decay_epochs)
        if any(b <= a for a, b in zip(decay, decay[1:])):
            raise ValueError(f"decay epochs must be strictly increasing, got {decay}")
        object.__setattr__(self, "decay_epochs", decay)


def lr_at(schedule: LrSchedule, epoch: int) -> float:
    """Learning rate for a 1-based epoch index."""
    if epoch < 1:
        raise ValueError(f"epoch must be >= 1, got {epoch}")
    if epoch <= schedule.warmup_epochs:
        return schedule.base_lr * epoch / schedule.warmup_epochs
    n_decays = sum(1 for e in schedule.decay_epochs if epoch >= e)
    return schedule.base_lr * schedule.decay_factor**n_decays


def save_checkpoint(model: MlpModel, path) -> None:
    """Flat binary: magic, version, dim count, dims, then per layer the
    row-major float64 little-endian weight matrix and bias vector."""
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(model.layer_dims)))
        fh.write(struct.pack(f"<{len(model.layer_dims)}I", *model.layer_dims))
        for w, b in zip(model.weights, model.biases):
            fh.write(w.astype("<f8").tobytes(order="C"))
            fh.write(b.astype("<f8").tobytes())


def load_checkpoint(path) -> MlpModel:
    path = Path(path)
    blob = path.read_bytes()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a model checkpoint (bad magic)")
    version, n_dims = struct.unpack_from("<II", blob, 4)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    dims = struct.unpack_from(f"<{n_dims}I", blob, 12)
    offset = 12 + 4 * n_dims
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        w_bytes = 8 * fan_out * fan_in
        w = np.frombuffer(blob, dtype="<f8", count=fan_out * fan_in, offset=offset)
        weights.append(w.reshape(fan_out, fan_in).copy())
        offset += w_bytes
        b = np.frombuffer(blob, dtype="<f8", count=fan_out, offset=offset)
        biases.append(b.copy())
        offset += 8 * fan_out
    if offset != len(blob):
        raise ValueError(f"{path}: checkpoint payload length mismatch")
    return MlpModel(layer_dims=dims, weights=weights, biases=biases)
