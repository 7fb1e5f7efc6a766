"""Numpy 1-D CNN: three same-padded linear conv layers, dense(500), dense(15) + softmax.

Activations are laid out length-major, ``(batch, length, channels)``, and the
flatten step keeps that order, so feature ``l * channels + c`` of the dense
input is channel ``c`` at position ``l``.  Conv weights are stored as
``(kernel, in_channels, out_channels)``.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import CorruptionError, FormatError, NumericError, SchemaError
from .segment import ScalerParams

CHECKPOINT_MAGIC = b"ADLM"
CHECKPOINT_VERSION = 1
ACTIVATIONS = ("linear", "relu")


@dataclass(frozen=True)
class Architecture:
    input_length: int = 128
    channels: tuple[int, ...] = (19, 20, 30)
    kernel: int = 5
    hidden: int = 500
    n_classes: int = 15
    dense_activation: str = "relu"

    def __post_init__(self):
        if self.dense_activation not in ACTIVATIONS:
            raise ValueError(f"dense_activation must be one of {ACTIVATIONS}")
        if min(self.input_length, self.kernel, self.hidden, self.n_classes, *self.channels) < 1:
            raise ValueError("all layer sizes must be positive")

    @property
    def flat_size(self) -> int:
        return self.input_length * self.channels[-1]

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        shapes = {}
        c_in = 1
        for i, c_out in enumerate(self.channels, start=1):
            shapes[f"conv{i}_w"] = (self.kernel, c_in, c_out)
            shapes[f"conv{i}_b"] = (c_out,)
            c_in = c_out
        shapes["dense1_w"] = (self.flat_size, self.hidden)
        shapes["dense1_b"] = (self.hidden,)
        shapes["dense2_w"] = (self.hidden, self.n_classes)
        shapes["dense2_b"] = (self.n_classes,)
        return shapes


PAPER_ARCHITECTURE = Architecture()


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    decay: float = 1e-6
    momentum: float = 0.9
    batch_size: int = 100
    max_epochs: int = 20
    patience: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("learning_rate, batch_size and max_epochs must be positive")
        if self.decay < 0 or not 0 <= self.momentum < 1 or self.patience < 1:
            raise ValueError("need decay >= 0, 0 <= momentum < 1, patience >= 1")


@dataclass(eq=False)
class CnnModel:
    arch: Architecture
    params: dict[str, np.ndarray]
    velocity: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    scaler: ScalerParams | None = None
    window: int = 10

    def __post_init__(self):
        shapes = self.arch.param_shapes()
        if set(self.params) != set(shapes):
            raise SchemaError(f"parameter names {sorted(self.params)} do not match architecture")
        for name, shape in shapes.items():
            if self.params[name].shape != shape:
                raise SchemaError(f"{name}: shape {self.params[name].shape}, expected {shape}")
        if not self.velocity:
            self.velocity = {k: np.zeros_like(v) for k, v in self.params.items()}

    def copy(self) -> "CnnModel":
        return replace(
            self,
            params={k: v.copy() for k, v in self.params.items()},
            velocity={k: v.copy() for k, v in self.velocity.items()},
        )

    def __eq__(self, other):
        if not isinstance(other, CnnModel):
            return NotImplemented
        return (
            self.arch == other.arch
            and self.step == other.step
            and self.window == other.window
            and self.scaler == other.scaler
            and all(np.array_equal(self.params[k], other.params[k]) for k in self.params)
            and all(np.array_equal(self.velocity[k], other.velocity[k]) for k in self.velocity)
        )

    @property
    def n_params(self) -> int:
        return sum(v.size for v in self.params.values())


def glorot_bound(shape) -> float:
    if len(shape) == 3:
        receptive = shape[0]
        fan_in, fan_out = shape[1] * receptive, shape[2] * receptive
    else:
        fan_in, fan_out = shape
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def init_model(arch: Architecture = PAPER_ARCHITECTURE, seed: int = 0) -> CnnModel:
    """Glorot-uniform weights drawn in layer order from one seeded stream; zero biases."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in arch.param_shapes().items():
        if name.endswith("_b"):
            params[name] = np.zeros(shape)
        else:
            bound = glorot_bound(shape)
            params[name] = rng.uniform(-bound, bound, size=shape)
    return CnnModel(arch, params)


# -- layers ---------------------------------------------------------------


def _pad_widths(kernel: int) -> tuple[int, int]:
    left = (kernel - 1) // 2
    return left, kernel - 1 - left


def _im2col(h: np.ndarray, kernel: int) -> np.ndarray:
    """(B, L, C) -> (B, L, kernel, C) zero-padded sliding windows."""
    left, right = _pad_widths(kernel)
    padded = np.pad(h, ((0, 0), (left, right), (0, 0)))
    view = np.lib.stride_tricks.sliding_window_view(padded, kernel, axis=1)
    return view.transpose(0, 1, 3, 2)


def conv1d_same(h: np.ndarray, weight: np.ndarray, bias: np.ndarray, layer: str = "conv") -> np.ndarray:
    """Same-padded stride-1 cross-correlation with identity activation.

    ``h`` is ``(L, C_in)`` or ``(B, L, C_in)``; ``weight`` is ``(kernel, C_in, C_out)``.
    """
    single = h.ndim == 2
    if single:
        h = h[None]
    kernel, c_in, c_out = weight.shape
    if h.shape[-1] != c_in or bias.shape != (c_out,):
        raise SchemaError(
            f"{layer}: input has {h.shape[-1]} channels, weights expect {c_in} "
            f"(bias {bias.shape}, expected ({c_out},))"
        )
    if h.shape[1] < 1:
        raise SchemaError(f"{layer}: empty input sequence")
    batch, length = h.shape[:2]
    cols = _im2col(h, kernel).reshape(batch * length, kernel * c_in)
    out = (cols @ weight.reshape(kernel * c_in, c_out)).reshape(batch, length, c_out) + bias
    return out[0] if single else out


def _conv_backward(h, weight, grad_out):
    kernel, c_in, c_out = weight.shape
    batch, length = h.shape[:2]
    cols = _im2col(h, kernel).reshape(batch * length, kernel * c_in)
    g = grad_out.reshape(batch * length, c_out)
    grad_w = (cols.T @ g).reshape(kernel, c_in, c_out)
    grad_b = g.sum(axis=0)
    grad_cols = (g @ weight.reshape(kernel * c_in, c_out).T).reshape(batch, length, kernel, c_in)
    left, right = _pad_widths(kernel)
    grad_padded = np.zeros((batch, length + kernel - 1, c_in))
    for j in range(kernel):
        grad_padded[:, j : j + length] += grad_cols[:, :, j]
    return grad_padded[:, left : left + length], grad_w, grad_b


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def _check_finite(x, index, what):
    if not np.all(np.isfinite(x)):
        raise NumericError(f"non-finite values after layer {index} ({what})")


def _forward(model: CnnModel, x: np.ndarray, keep: bool):
    arch, p = model.arch, model.params
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != arch.input_length:
        raise SchemaError(
            f"expected instances of length {arch.input_length}, got shape {x.shape}"
        )
    acts = [x[:, :, None]]
    for i in range(1, len(arch.channels) + 1):
        h = conv1d_same(acts[-1], p[f"conv{i}_w"], p[f"conv{i}_b"], layer=f"conv{i}")
        _check_finite(h, i, f"conv{i}")
        acts.append(h)
    flat = acts[-1].reshape(x.shape[0], -1)
    z1 = flat @ p["dense1_w"] + p["dense1_b"]
    a1 = np.maximum(z1, 0.0) if arch.dense_activation == "relu" else z1
    _check_finite(a1, len(arch.channels) + 1, "dense1")
    logits = a1 @ p["dense2_w"] + p["dense2_b"]
    _check_finite(logits, len(arch.channels) + 2, "dense2")
    cache = (acts, flat, z1, a1) if keep else None
    return logits, cache


def predict_logits(model: CnnModel, x: np.ndarray) -> np.ndarray:
    return _forward(model, x, keep=False)[0]


def predict_proba(model: CnnModel, x: np.ndarray, batch_size: int = 1000) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return predict_proba(model, x[None], batch_size)[0]
    out = np.empty((x.shape[0], model.arch.n_classes))
    for s in range(0, x.shape[0], batch_size):
        out[s : s + batch_size] = softmax(predict_logits(model, x[s : s + batch_size]))
    return out


def forward(model: CnnModel, instance: np.ndarray) -> np.ndarray:
    """Class probabilities for one instance."""
    return predict_proba(model, np.asarray(instance)[None])[0]


def loss_and_gradients(model: CnnModel, x: np.ndarray, y: np.ndarray):
    """Mean categorical cross-entropy and its gradient for every parameter.

    ``y`` holds integer class ids or one-hot rows.
    """
    y = np.asarray(y)
    if y.ndim == 2:
        y = y.argmax(axis=1)
    logits, (acts, flat, z1, a1) = _forward(model, x, keep=True)
    batch = logits.shape[0]
    logp = log_softmax(logits)
    loss = float(-logp[np.arange(batch), y].mean())
    p = model.params
    grads = {}
    g = np.exp(logp)
    g[np.arange(batch), y] -= 1.0
    g /= batch
    grads["dense2_w"] = a1.T @ g
    grads["dense2_b"] = g.sum(axis=0)
    g = g @ p["dense2_w"].T
    if model.arch.dense_activation == "relu":
        g = g * (z1 > 0)
    grads["dense1_w"] = flat.T @ g
    grads["dense1_b"] = g.sum(axis=0)
    g = (g @ p["dense1_w"].T).reshape(acts[-1].shape)
    for i in range(len(model.arch.channels), 0, -1):
        g, grads[f"conv{i}_w"], grads[f"conv{i}_b"] = _conv_backward(acts[i - 1], p[f"conv{i}_w"], g)
    return loss, grads


def sgd_nesterov_step(model: CnnModel, grads: dict, cfg: TrainConfig) -> CnnModel:
    """One in-place Nesterov update; the learning rate decays with the global step."""
    lr = cfg.learning_rate / (1.0 + cfg.decay * model.step)
    mu = cfg.momentum
    for name, w in model.params.items():
        v = model.velocity[name]
        v *= mu
        v -= lr * grads[name]
        w += mu * v - lr * grads[name]
    model.step += 1
    return model


# -- training -------------------------------------------------------------


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float


def accuracy(model: CnnModel, x, y) -> float:
    return float((predict_proba(model, x).argmax(axis=1) == np.asarray(y)).mean())


def mean_loss(model: CnnModel, x, y, batch_size: int = 1000) -> float:
    total = 0.0
    for s in range(0, len(y), batch_size):
        logp = log_softmax(predict_logits(model, x[s : s + batch_size]))
        total -= logp[np.arange(logp.shape[0]), y[s : s + batch_size]].sum()
    return float(total / len(y))


def train(
    train_x,
    train_y,
    val_x,
    val_y,
    cfg: TrainConfig = TrainConfig(),
    arch: Architecture | None = None,
    log=None,
):
    """Minibatch training with early stopping on validation accuracy.

    Returns the model from the best validation epoch and the per-epoch history.
    """
    train_x = np.asarray(train_x, dtype=np.float64)
    val_x = np.asarray(val_x, dtype=np.float64)
    train_y = np.asarray(train_y, dtype=np.int64)
    val_y = np.asarray(val_y, dtype=np.int64)
    if len(train_y) == 0 or len(val_y) == 0:
        raise ValueError("training and validation sets must be non-empty")
    if arch is None:
        arch = replace(PAPER_ARCHITECTURE, input_length=train_x.shape[1])
    init_seq, shuffle_seq = np.random.SeedSequence(cfg.seed).spawn(2)
    model = init_model(arch, seed=int(init_seq.generate_state(1)[0]))
    shuffle_rng = np.random.default_rng(shuffle_seq)
    history: list[EpochRecord] = []
    best, best_acc, stale = model.copy(), -1.0, 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = shuffle_rng.permutation(len(train_y))
        total = 0.0
        for b, start in enumerate(range(0, len(order), cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            try:
                loss, grads = loss_and_gradients(model, train_x[idx], train_y[idx])
            except NumericError as exc:
                raise NumericError(f"diverged at epoch {epoch}, batch {b}: {exc}") from exc
            if not np.isfinite(loss):
                raise NumericError(f"loss is {loss} at epoch {epoch}, batch {b}")
            total += loss * len(idx)
            sgd_nesterov_step(model, grads, cfg)
        try:
            record = EpochRecord(
                epoch,
                total / len(order),
                mean_loss(model, val_x, val_y),
                accuracy(model, val_x, val_y),
            )
        except NumericError as exc:
            raise NumericError(f"diverged at epoch {epoch}, validation: {exc}") from exc
        history.append(record)
        if log is not None:
            log(record)
        if record.val_accuracy > best_acc:
            best, best_acc, stale = model.copy(), record.val_accuracy, 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    return best, history


def write_history_csv(path, history) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "train_loss", "val_loss", "val_accuracy"])
        for r in history:
            writer.writerow([r.epoch, repr(r.train_loss), repr(r.val_loss), repr(r.val_accuracy)])


def predict_topk(probs: np.ndarray, k: int) -> np.ndarray:
    """Class ids by descending probability, ties to the lower id; works row-wise on 2-D input."""
    probs = np.asarray(probs)
    n_classes = probs.shape[-1]
    if not 1 <= k <= n_classes:
        raise ValueError(f"k must lie in 1..{n_classes}, got {k}")
    order = np.argsort(-probs, axis=-1, kind="stable")
    return order[..., :k]


# -- checkpoint -----------------------------------------------------------
#
# b"ADLM" u16 version
# u8 activation (0 linear, 1 relu), u32 input_length, u32 kernel,
# u32 n_conv, u32 channels[n_conv], u32 hidden, u32 n_classes
# u64 step, u32 window
# f64 params then f64 velocities, each in architecture order, row-major
# u8 has_scaler, [f64 min[input_length], f64 max[input_length]]


def encode_checkpoint(model: CnnModel) -> bytes:
    a = model.arch
    parts = [
        CHECKPOINT_MAGIC,
        struct.pack("<HBII", CHECKPOINT_VERSION, ACTIVATIONS.index(a.dense_activation), a.input_length, a.kernel),
        struct.pack(f"<I{len(a.channels)}I", len(a.channels), *a.channels),
        struct.pack("<IIQI", a.hidden, a.n_classes, model.step, model.window),
    ]
    for store in (model.params, model.velocity):
        for name in a.param_shapes():
            parts.append(np.ascontiguousarray(store[name], dtype="<f8").tobytes())
    if model.scaler is None:
        parts.append(b"\x00")
    else:
        parts.append(b"\x01")
        parts.append(np.asarray(model.scaler.minimum, dtype="<f8").tobytes())
        parts.append(np.asarray(model.scaler.maximum, dtype="<f8").tobytes())
    return b"".join(parts)


def decode_checkpoint(data: bytes) -> CnnModel:
    if data[:4] != CHECKPOINT_MAGIC:
        raise FormatError("not an ADLM checkpoint (bad magic)")
    pos = 4

    def take(fmt_or_n, what):
        nonlocal pos
        n = struct.calcsize(fmt_or_n) if isinstance(fmt_or_n, str) else fmt_or_n
        if pos + n > len(data):
            raise CorruptionError(f"truncated checkpoint while reading {what}", pos)
        chunk = data[pos : pos + n]
        pos += n
        return struct.unpack(fmt_or_n, chunk) if isinstance(fmt_or_n, str) else chunk

    version, act, length, kernel = take("<HBII", "header")
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    if act >= len(ACTIVATIONS):
        raise CorruptionError(f"unknown activation code {act}", 6)
    (n_conv,) = take("<I", "conv count")
    channels = take(f"<{n_conv}I", "channels")
    hidden, n_classes, step, window = take("<IIQI", "dense sizes")
    try:
        arch = Architecture(length, tuple(channels), kernel, hidden, n_classes, ACTIVATIONS[act])
    except ValueError as exc:
        raise CorruptionError(str(exc), pos) from exc
    stores = []
    for what in ("parameters", "optimizer state"):
        store = {}
        for name, shape in arch.param_shapes().items():
            raw = take(8 * int(np.prod(shape)), f"{what} {name}")
            store[name] = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)
        stores.append(store)
    (flag,) = take("<B", "scaler flag")
    scaler = None
    if flag == 1:
        lo = np.frombuffer(take(8 * length, "scaler min"), dtype="<f8").astype(np.float64)
        hi = np.frombuffer(take(8 * length, "scaler max"), dtype="<f8").astype(np.float64)
        scaler = ScalerParams(lo, hi)
    elif flag != 0:
        raise CorruptionError(f"bad scaler flag {flag}", pos - 1)
    if pos != len(data):
        raise CorruptionError(f"{len(data) - pos} trailing bytes", pos)
    return CnnModel(arch, stores[0], stores[1], step, scaler, window)


def save_checkpoint(model: CnnModel, path) -> None:
    Path(path).write_bytes(encode_checkpoint(model))


def load_checkpoint(path) -> CnnModel:
    return decode_checkpoint(Path(path).read_bytes())
