"""Binary ID/OOD head: a 3-layer MLP trained from scratch.

The loss pushes ID logits up and synthetic-outlier logits down:

    L = mean_id[ softplus(-F(z)) ] + mean_ood[ softplus(F(z)) ]

Training is plain mini-batch gradient descent with classical (heavy-ball)
momentum, double precision throughout, and is bit-reproducible from the
config seed alone: batch composition, dropout masks, and initialization all
derive from it. Input order does not matter because samples are canonically
sorted before the seeded shuffles.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ArgumentError, DivergenceError, FormatError
from .seeds import derive_seed

CHECKPOINT_MAGIC = b"SYNM"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    momentum: float = 0.9
    dropout: float = 0.5
    batch_size: int = 32
    epochs: int = 30
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ArgumentError("learning_rate must be >= 0")
        if not (0.0 <= self.dropout < 1.0):
            raise ArgumentError("dropout must be in [0, 1)")
        if self.batch_size < 2:
            raise ArgumentError("batch_size must be >= 2 (half ID, half OOD)")
        if self.epochs < 1:
            raise ArgumentError("epochs must be >= 1")


@dataclass
class MlpModel:
    layer_dims: tuple          # (d, h1, h2, 1)
    weights: list              # [W1 (d,h1), W2 (h1,h2), W3 (h2,1)]
    biases: list               # [b1, b2, b3]
    dropout_rate: float = 0.5

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    def parameter_count(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def copy(self) -> "MlpModel":
        return MlpModel(
            layer_dims=self.layer_dims,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            dropout_rate=self.dropout_rate,
        )


def init_model(d: int, hidden, seed: int, dropout_rate: float = 0.5) -> MlpModel:
    """Glorot-uniform weights, zero biases, fully determined by seed."""
    hidden = list(hidden)
    if len(hidden) != 2:
        raise ArgumentError(f"expected two hidden widths, got {hidden}")
    dims = [int(d)] + [int(h) for h in hidden] + [1]
    if any(v < 1 for v in dims):
        raise ArgumentError(f"all layer dims must be >= 1, got {dims}")
    rng = np.random.default_rng(derive_seed(seed, "init"))
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(layer_dims=tuple(dims), weights=weights, biases=biases,
                    dropout_rate=dropout_rate)


def _dropout_mask(shape, rate, seed, step, layer) -> np.ndarray:
    rng = np.random.default_rng(derive_seed(seed, "dropout", step, layer))
    return (rng.random(shape) >= rate) / (1.0 - rate)


def _forward_batch(model: MlpModel, Z: np.ndarray, train: bool = False,
                   seed: int = 0, step: int = 0):
    """Returns (logits, activations, masks); activations[i] feeds weights[i]."""
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[1] != model.input_dim:
        raise ArgumentError(
            f"feature batch has shape {Z.shape}, model expects (*, {model.input_dim})"
        )
    activations = [Z]
    masks = []
    current = Z
    n_layers = len(model.weights)
    for layer in range(n_layers - 1):
        current = np.maximum(0.0, current @ model.weights[layer] + model.biases[layer])
        if train and model.dropout_rate > 0.0:
            mask = _dropout_mask(current.shape, model.dropout_rate, seed, step, layer)
            current = current * mask
            masks.append(mask)
        else:
            masks.append(None)
        activations.append(current)
    logits = (current @ model.weights[-1] + model.biases[-1])[:, 0]
    return logits, activations, masks


def forward(model: MlpModel, z, mode: str = "eval", seed: int = 0, step: int = 0) -> float:
    """Scalar logit for one feature vector.

    Eval mode is deterministic; train mode applies inverted dropout with a
    mask derived from (seed, step, layer).
    """
    if mode not in ("eval", "train"):
        raise ArgumentError(f"mode must be 'eval' or 'train', got {mode!r}")
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1 or z.shape[0] != model.input_dim:
        raise ArgumentError(f"feature has shape {z.shape}, model expects ({model.input_dim},)")
    logits, _, _ = _forward_batch(model, z[None, :], train=(mode == "train"),
                                  seed=seed, step=step)
    return float(logits[0])


def _softplus(x: np.ndarray) -> np.ndarray:
    # log(1 + exp(x)) without overflow.
    return np.logaddexp(0.0, x)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def logistic_loss(id_logits, ood_logits) -> float:
    """Two-class logistic loss: mean softplus(-F) over ID plus mean
    softplus(F) over OOD."""
    id_logits = np.asarray(id_logits, dtype=np.float64)
    ood_logits = np.asarray(ood_logits, dtype=np.float64)
    if id_logits.size == 0 or ood_logits.size == 0:
        raise ArgumentError("both logit lists must be non-empty")
    return float(_softplus(-id_logits).mean() + _softplus(ood_logits).mean())


def loss_and_gradients(model: MlpModel, id_batch, ood_batch, train: bool = False,
                       seed: int = 0, step: int = 0):
    """Loss plus exact gradients for every weight and bias.

    The batch is stacked ID-first so one forward pass serves both terms.
    """
    id_batch = np.asarray(id_batch, dtype=np.float64)
    ood_batch = np.asarray(ood_batch, dtype=np.float64)
    n_id, n_ood = len(id_batch), len(ood_batch)
    if n_id == 0 or n_ood == 0:
        raise ArgumentError("both batches must be non-empty")
    Z = np.vstack([id_batch, ood_batch])
    logits, activations, masks = _forward_batch(model, Z, train=train, seed=seed, step=step)
    id_logits, ood_logits = logits[:n_id], logits[n_id:]
    loss = logistic_loss(id_logits, ood_logits)

    # dL/dF: -(1 - sigmoid(F))/n_id on the ID half, sigmoid(F)/n_ood on the OOD half.
    dlogits = np.concatenate([
        (_sigmoid(id_logits) - 1.0) / n_id,
        _sigmoid(ood_logits) / n_ood,
    ])
    delta = dlogits[:, None]
    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.biases)
    for layer in range(len(model.weights) - 1, -1, -1):
        grads_w[layer] = activations[layer].T @ delta
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = delta @ model.weights[layer].T
            if masks[layer - 1] is not None:
                delta = delta * masks[layer - 1]
            delta = delta * (activations[layer] > 0)
    return loss, grads_w, grads_b


def _canonical_order(X: np.ndarray) -> np.ndarray:
    """Sort rows lexicographically so batch composition depends on the seed,
    not on the order samples were handed in."""
    return X[np.lexsort(X.T[::-1])]


def train(model: MlpModel, id_features, ood_features, config: TrainConfig):
    """Balanced-batch gradient descent; returns (trained model, loss curve).

    Each batch holds batch_size/2 ID and batch_size/2 OOD samples. The larger
    class is covered by a fresh seeded shuffle every epoch; the smaller class
    is drawn with replacement.
    """
    id_features = np.asarray(id_features, dtype=np.float64)
    ood_features = np.asarray(ood_features, dtype=np.float64)
    if id_features.size == 0 or ood_features.size == 0:
        raise ArgumentError("both feature sets must be non-empty")
    for name, X in (("id", id_features), ("ood", ood_features)):
        if X.ndim != 2 or X.shape[1] != model.input_dim:
            raise ArgumentError(f"{name} features have shape {X.shape}, "
                                f"model expects (*, {model.input_dim})")

    id_features = _canonical_order(id_features)
    ood_features = _canonical_order(ood_features)

    out = model.copy()
    out.dropout_rate = config.dropout
    vel_w = [np.zeros_like(w) for w in out.weights]
    vel_b = [np.zeros_like(b) for b in out.biases]
    half = config.batch_size // 2
    id_is_large = len(id_features) >= len(ood_features)
    large = id_features if id_is_large else ood_features
    small = ood_features if id_is_large else id_features
    batches_per_epoch = max(1, len(large) // half)

    curve = []
    step = 0
    for epoch in range(config.epochs):
        rng = np.random.default_rng(derive_seed(config.seed, "epoch", epoch))
        perm = rng.permutation(len(large))
        for b in range(batches_per_epoch):
            large_idx = perm[b * half:(b + 1) * half]
            if len(large_idx) < half:
                large_idx = rng.integers(0, len(large), size=half)
            small_idx = rng.integers(0, len(small), size=half)
            id_batch = large[large_idx] if id_is_large else small[small_idx]
            ood_batch = small[small_idx] if id_is_large else large[large_idx]
            loss, grads_w, grads_b = loss_and_gradients(
                out, id_batch, ood_batch, train=True, seed=config.seed, step=step
            )
            if not np.isfinite(loss):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch} (learning_rate={config.learning_rate})",
                    epoch=epoch, learning_rate=config.learning_rate,
                )
            for i in range(len(out.weights)):
                vel_w[i] = config.momentum * vel_w[i] + grads_w[i]
                vel_b[i] = config.momentum * vel_b[i] + grads_b[i]
                out.weights[i] -= config.learning_rate * vel_w[i]
                out.biases[i] -= config.learning_rate * vel_b[i]
            step += 1
        # The recorded curve is the eval-mode loss over the full data, so it
        # is a deterministic function of the epoch's parameters (flat when
        # the learning rate is zero) rather than of the batch draws.
        id_logits, _, _ = _forward_batch(out, id_features)
        ood_logits, _, _ = _forward_batch(out, ood_features)
        epoch_loss = logistic_loss(id_logits, ood_logits)
        if not np.isfinite(epoch_loss):
            raise DivergenceError(
                f"non-finite loss at epoch {epoch} (learning_rate={config.learning_rate})",
                epoch=epoch, learning_rate=config.learning_rate,
            )
        curve.append(epoch_loss)
    return out, curve


def score(model: MlpModel, z) -> float:
    """Sigmoid of the logit; higher means more ID. OOD flag at threshold t
    is score < t."""
    logit = forward(model, z, mode="eval")
    return float(_sigmoid(np.array([logit]))[0])


def score_batch(model: MlpModel, Z) -> np.ndarray:
    logits, _, _ = _forward_batch(model, np.asarray(Z, dtype=np.float64))
    return _sigmoid(logits)


# --- persistence ---------------------------------------------------------------


def save_checkpoint(path, model: MlpModel) -> None:
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(model.layer_dims)))
        fh.write(struct.pack(f"<{len(model.layer_dims)}I", *model.layer_dims))
        fh.write(struct.pack("<d", model.dropout_rate))
        for w, b in zip(model.weights, model.biases):
            fh.write(w.astype("<f8").tobytes())
            fh.write(b.astype("<f8").tobytes())


def load_checkpoint(path) -> MlpModel:
    data = Path(path).read_bytes()
    if data[:4] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad checkpoint magic {data[:4]!r}")
    version, n_dims = struct.unpack_from("<II", data, 4)
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    dims = struct.unpack_from(f"<{n_dims}I", data, 12)
    offset = 12 + 4 * n_dims
    (dropout_rate,) = struct.unpack_from("<d", data, offset)
    offset += 8
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        w = np.frombuffer(data, dtype="<f8", count=fan_in * fan_out, offset=offset)
        offset += 8 * fan_in * fan_out
        b = np.frombuffer(data, dtype="<f8", count=fan_out, offset=offset)
        offset += 8 * fan_out
        weights.append(w.reshape(fan_in, fan_out).copy())
        biases.append(b.copy())
    if offset != len(data):
        raise FormatError(f"{path}: {len(data) - offset} trailing bytes")
    return MlpModel(layer_dims=tuple(dims), weights=weights, biases=biases,
                    dropout_rate=dropout_rate)


def save_loss_curve(path, curve) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,mean_loss\n")
        for epoch, value in enumerate(curve):
            fh.write(f"{epoch},{value!r}\n")
