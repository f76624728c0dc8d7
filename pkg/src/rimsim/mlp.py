"""A small dense regression network in numpy.

Parameters are a list of :class:`Dense` layers, each holding an ``out x in``
weight matrix and a bias vector. Hidden layers use the configured
nonlinearity; the output layer is linear because the targets are signed.
Gradients are computed by hand-written reverse-mode accumulation.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from rimsim.features import ScalerStats
from rimsim.metrics import sign_accuracy

CHECKPOINT_FORMAT = "rimsim-checkpoint"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


class Dense(NamedTuple):
    weight: np.ndarray
    bias: np.ndarray


Params = list[Dense]


@dataclass(frozen=True)
class Architecture:
    input_dim: int = 7
    hidden: tuple[int, ...] = (64, 32, 16, 8, 4)
    output_dim: int = 2
    activation: str = "relu"
    split_index: int = 3

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden, self.output_dim)

    @property
    def layer_count(self) -> int:
        return len(self.hidden) + 1

    def validate(self) -> None:
        if any(w < 1 for w in self.widths):
            raise ValueError(f"layer widths must be positive, got {self.widths}")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if not 1 <= self.split_index <= self.layer_count - 1:
            raise ValueError(
                f"split_index must lie in [1, {self.layer_count - 1}], got {self.split_index}"
            )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Architecture":
        return cls(**{**d, "hidden": tuple(d["hidden"])})


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_grad(z):
    return (z > 0).astype(z.dtype)


def _tanh_grad(z):
    return 1.0 - np.tanh(z) ** 2


_ACTIVATIONS = {
    "relu": (_relu, _relu_grad),
    "tanh": (np.tanh, _tanh_grad),
    "identity": (lambda z: z, np.ones_like),
}


def init_model(arch: Architecture, seed: int) -> Params:
    """He-normal weights (variance 2 / fan_in), zero biases."""
    arch.validate()
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    widths = arch.widths
    return [
        Dense(rng.normal(0.0, math.sqrt(2.0 / n_in), size=(n_out, n_in)), np.zeros(n_out))
        for n_in, n_out in zip(widths[:-1], widths[1:])
    ]


def check_shapes(params: Params, arch: Architecture) -> None:
    widths = arch.widths
    if len(params) != len(widths) - 1:
        raise ValueError(f"expected {len(widths) - 1} layers, got {len(params)}")
    for i, (layer, n_in, n_out) in enumerate(zip(params, widths[:-1], widths[1:])):
        if layer.weight.shape != (n_out, n_in) or layer.bias.shape != (n_out,):
            raise ValueError(
                f"layer {i}: expected weight {(n_out, n_in)} and bias {(n_out,)}, "
                f"got {layer.weight.shape} and {layer.bias.shape}"
            )


def _as_batch(x: np.ndarray, n_in: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != n_in:
        raise ValueError(f"expected input with {n_in} features, got shape {x.shape}")
    return x


def _forward_cache(params: Params, x: np.ndarray, activation: str):
    act, _ = _ACTIVATIONS[activation]
    acts = [x]
    pre = []
    a = x
    last = len(params) - 1
    for i, layer in enumerate(params):
        z = a @ layer.weight.T + layer.bias
        pre.append(z)
        a = z if i == last else act(z)
        acts.append(a)
    return pre, acts


def forward(params: Params, x: np.ndarray, activation: str = "relu") -> np.ndarray:
    """Predicted ``[d_sleep, d_distance]`` for one standardized vector or a batch."""
    single = np.ndim(x) == 1
    xb = _as_batch(x, params[0].weight.shape[1])
    out = _forward_cache(params, xb, activation)[1][-1]
    return out[0] if single else out


def loss_and_grads(params: Params, x: np.ndarray, y: np.ndarray,
                   activation: str = "relu", loss: str = "mae") -> tuple[float, Params]:
    """Mean loss over all samples and outputs, and its gradient per layer.

    For MAE the subgradient of ``|r|`` at ``r == 0`` is taken as zero.
    """
    xb = _as_batch(x, params[0].weight.shape[1])
    yb = np.asarray(y, dtype=float).reshape(xb.shape[0], -1)
    if xb.shape[0] == 0:
        raise ValueError("empty batch")
    if not (np.all(np.isfinite(xb)) and np.all(np.isfinite(yb))):
        raise ValueError("non-finite values in batch")
    _, grad_act = _ACTIVATIONS[activation]
    pre, acts = _forward_cache(params, xb, activation)
    resid = acts[-1] - yb
    count = resid.size
    if loss == "mae":
        value = float(np.abs(resid).sum() / count)
        delta = np.sign(resid) / count
    elif loss == "mse":
        value = float((resid * resid).sum() / count)
        delta = 2.0 * resid / count
    else:
        raise ValueError(f"unknown loss {loss!r}")

    grads: list[Dense | None] = [None] * len(params)
    for i in range(len(params) - 1, -1, -1):
        grads[i] = Dense(delta.T @ acts[i], delta.sum(axis=0))
        if i:
            delta = (delta @ params[i].weight) * grad_act(pre[i - 1])
    return value, grads  # type: ignore[return-value]


def evaluate_loss(params: Params, x: np.ndarray, y: np.ndarray,
                  activation: str = "relu", loss: str = "mae") -> float:
    resid = forward(params, x, activation) - np.asarray(y, dtype=float)
    if loss == "mae":
        return float(np.abs(resid).mean())
    return float((resid * resid).mean())


# -- optimisation -----------------------------------------------------------

@dataclass
class AdamState:
    m: Params
    v: Params
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(params: Params, lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    zeros = [Dense(np.zeros_like(p.weight), np.zeros_like(p.bias)) for p in params]
    return AdamState(zeros, [Dense(z.weight.copy(), z.bias.copy()) for z in zeros],
                     0, lr, beta1, beta2, eps)


def adam_step(state: AdamState, params: Params, grads: Params) -> tuple[AdamState, Params]:
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    new_m, new_v, new_p = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        layer_m, layer_v, layer_p = [], [], []
        for pa, ga, ma, va in zip(p, g, m, v):
            ma = b1 * ma + (1.0 - b1) * ga
            va = b2 * va + (1.0 - b2) * ga * ga
            pa = pa - state.lr * (ma / c1) / (np.sqrt(va / c2) + state.eps)
            layer_m.append(ma)
            layer_v.append(va)
            layer_p.append(pa)
        new_m.append(Dense(*layer_m))
        new_v.append(Dense(*layer_v))
        new_p.append(Dense(*layer_p))
    new_state = AdamState(new_m, new_v, t, state.lr, b1, b2, state.eps)
    return new_state, new_p


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    epochs: int = 200
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    patience: int = 20
    min_delta: float = 1e-4
    val_fraction: float = 0.2
    loss: str = "mae"
    seed: int = 0

    def validate(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.patience < 0:
            raise ValueError("patience must be >= 0")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in (0, 1)")
        if self.loss not in ("mae", "mse"):
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.lr <= 0:
            raise ValueError("lr must be > 0")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float | None = None
    val_sign_accuracy: float | None = None


@dataclass
class History:
    epochs: list[EpochStats] = field(default_factory=list)
    best_epoch: int | None = None

    @property
    def train_loss(self) -> list[float]:
        return [e.train_loss for e in self.epochs]

    @property
    def val_loss(self) -> list[float | None]:
        return [e.val_loss for e in self.epochs]

    def to_dict(self) -> dict:
        return {"best_epoch": self.best_epoch, "epochs": [asdict(e) for e in self.epochs]}


def train(params: Params, train_set: tuple[np.ndarray, np.ndarray],
          val_set: tuple[np.ndarray, np.ndarray] | None, cfg: TrainConfig,
          activation: str = "relu", eps_zero: float = 0.0) -> tuple[Params, History]:
    """Mini-batch Adam with seeded shuffling.

    With a validation set, training stops once ``patience`` consecutive
    epochs fail to lower the validation loss by more than ``min_delta``, and
    the parameters from the best validation epoch are returned. Without one,
    all ``cfg.epochs`` run and the final parameters are returned.
    """
    cfg.validate()
    x, y = (np.asarray(a, dtype=float) for a in train_set)
    if x.shape[0] == 0:
        raise ValueError("empty training set")
    if val_set is not None:
        vx, vy = (np.asarray(a, dtype=float) for a in val_set)
        if vx.shape[0] == 0:
            raise ValueError("empty validation set")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed)))
    opt = adam_init(params, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    history = History()
    best = params
    best_loss = math.inf
    stale = 0
    n = x.shape[0]
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads = loss_and_grads(params, x[idx], y[idx], activation, cfg.loss)
            total += loss * len(idx)
            opt, params = adam_step(opt, params, grads)
        stats = EpochStats(epoch, total / n)
        history.epochs.append(stats)
        if val_set is None:
            continue
        pred = forward(params, vx, activation)
        stats.val_loss = evaluate_loss(params, vx, vy, activation, cfg.loss)
        stats.val_sign_accuracy = sign_accuracy(vy, pred, eps_zero)
        if stats.val_loss < best_loss - cfg.min_delta:
            best_loss = stats.val_loss
            best = params
            history.best_epoch = epoch
            stale = 0
        else:
            stale += 1
        if stale >= cfg.patience:
            break
    return (best if val_set is not None else params), history


def split_train_val(x: np.ndarray, y: np.ndarray, fraction: float,
                    seed: int) -> tuple[tuple[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    order = rng.permutation(len(x))
    n_val = max(1, int(round(len(x) * fraction)))
    val, tr = order[:n_val], order[n_val:]
    return (x[tr], y[tr]), (x[val], y[val])


def copy_params(params: Sequence[Dense]) -> Params:
    return [Dense(p.weight.copy(), p.bias.copy()) for p in params]


def params_norm(params: Sequence[Dense]) -> float:
    return math.sqrt(sum(float((p.weight ** 2).sum() + (p.bias ** 2).sum()) for p in params))


# -- checkpoints ------------------------------------------------------------

@dataclass
class Checkpoint:
    params: Params
    scaler: ScalerStats
    arch: Architecture


def _payload(params: Params, scaler: ScalerStats, arch: Architecture) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "arch": arch.to_dict(),
        "scaler": scaler.to_dict(),
        "layers": [
            {
                "shape": list(p.weight.shape),
                "weight": p.weight.ravel(order="C").tolist(),
                "bias": p.bias.tolist(),
            }
            for p in params
        ],
    }


def _digest(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def save_checkpoint(params: Params, scaler: ScalerStats, arch: Architecture,
                    path: str | Path) -> None:
    check_shapes(params, arch)
    payload = _payload(params, scaler, arch)
    payload["sha256"] = _digest(payload)
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=1), encoding="utf-8")


def load_checkpoint(path: str | Path, expect_arch: Architecture | None = None) -> Checkpoint:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path} is not a {CHECKPOINT_FORMAT} file")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"checkpoint version {doc.get('version')} unsupported (expected {CHECKPOINT_VERSION})"
        )
    stored = doc.pop("sha256", None)
    if stored != _digest(doc):
        raise CheckpointError(f"checksum mismatch in {path}")
    arch = Architecture.from_dict(doc["arch"])
    if expect_arch is not None and arch != expect_arch:
        raise CheckpointError(f"checkpoint architecture {arch} does not match {expect_arch}")
    params = [
        Dense(np.asarray(layer["weight"], dtype=float).reshape(layer["shape"]),
              np.asarray(layer["bias"], dtype=float))
        for layer in doc["layers"]
    ]
    check_shapes(params, arch)
    return Checkpoint(params, ScalerStats.from_dict(doc["scaler"]), arch)
