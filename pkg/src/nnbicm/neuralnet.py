"""Feedforward classifier with tanh hidden layers and a softmax output.

Weights of layer l are stored as a (d_{l-1} + 1, d_l) matrix whose row 0
holds the biases (the bias input is a constant 1).  Gradients are computed
by hand-derived backpropagation; training uses plain gradient descent or
scaled conjugate gradient on the mean cross-entropy.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .mathcore import RandomSource

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-30
MODEL_MAGIC = b"NNBM"
MODEL_VERSION = 1


class ModelFormatError(ValueError):
    """Unreadable or incompatible model file."""


class TrainingDivergence(RuntimeError):
    """Loss became non-finite during training."""


@dataclass(frozen=True, eq=False)
class NeuralNet:
    layer_dims: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    input_offset: np.ndarray | None = None
    input_scale: np.ndarray | None = None

    def __post_init__(self):
        dims = self.layer_dims
        if len(dims) < 2 or len(self.weights) != len(dims) - 1:
            raise ValueError("need one weight matrix per non-input layer")
        for l, W in enumerate(self.weights):
            if W.shape != (dims[l] + 1, dims[l + 1]):
                raise ValueError(f"layer {l + 1} weights have shape {W.shape}, "
                                 f"expected {(dims[l] + 1, dims[l + 1])}")

    @property
    def n_inputs(self) -> int:
        return self.layer_dims[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_dims[-1]

    @property
    def has_scaler(self) -> bool:
        return self.input_offset is not None

    def flat(self) -> np.ndarray:
        return np.concatenate([W.ravel() for W in self.weights])

    def with_flat(self, theta: np.ndarray) -> "NeuralNet":
        ws, i = [], 0
        for W in self.weights:
            ws.append(theta[i:i + W.size].reshape(W.shape).copy())
            i += W.size
        return replace(self, weights=tuple(ws))

    def with_scaler(self, offset, scale) -> "NeuralNet":
        return replace(self, input_offset=np.asarray(offset, float), input_scale=np.asarray(scale, float))


def init_network(layer_dims, scheme: str = "symmetric-uniform", rng: RandomSource | None = None) -> NeuralNet:
    """Random weights.

    ``paper-uniform01`` draws every weight and bias from U(0, 1);
    ``symmetric-uniform`` draws from U(-r, r) with r = 1/sqrt(fan-in).
    """
    dims = tuple(int(d) for d in layer_dims)
    rng = rng or RandomSource(0)
    ws = []
    for l in range(len(dims) - 1):
        shape = (dims[l] + 1, dims[l + 1])
        if scheme == "paper-uniform01":
            W = rng.uniform(0.0, 1.0, shape)
        elif scheme == "symmetric-uniform":
            r = 1.0 / np.sqrt(dims[l])
            W = rng.uniform(-r, r, shape)
        elif scheme == "zeros":
            W = np.zeros(shape)
        else:
            raise ValueError(f"unknown init scheme {scheme!r}")
        ws.append(W)
    return NeuralNet(dims, tuple(ws))


def tanh(x):
    return np.tanh(x)


def softmax(x):
    z = x - np.max(x, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _prepare(net: NeuralNet, inputs) -> np.ndarray:
    X = np.asarray(inputs, dtype=float)
    if X.shape[-1] != net.n_inputs:
        raise ValueError(f"input width {X.shape[-1]} != network input size {net.n_inputs}")
    if net.has_scaler:
        X = (X - net.input_offset) * net.input_scale
    return X


def forward(net: NeuralNet, inputs):
    """Return (activations, output); activations[0] is the (scaled) input."""
    a = _prepare(net, inputs)
    acts = [a]
    L = len(net.weights)
    for l, W in enumerate(net.weights, start=1):
        x = a @ W[1:] + W[0]
        a = tanh(x) if l < L else softmax(x)
        acts.append(a)
    return acts, a


def _target_indices(targets, n_out: int) -> np.ndarray:
    t = np.asarray(targets)
    if t.ndim >= 1 and t.shape[-1] == n_out and t.dtype.kind == "f":
        return np.argmax(t, axis=-1)
    return t.astype(np.int64)


def cross_entropy(output, target) -> float:
    """Mean over records of -log output[target]; target is an index or one-hot."""
    out = np.atleast_2d(output)
    idx = np.atleast_1d(_target_indices(target, out.shape[-1]))
    p = out[np.arange(len(idx)), idx]
    return float(-np.mean(np.log(np.maximum(p, PROB_FLOOR))))


def backprop(net: NeuralNet, inputs, targets, acts=None) -> list[np.ndarray]:
    """Gradients of the mean cross-entropy w.r.t. every weight matrix (bias rows included)."""
    if acts is None:
        acts, _ = forward(net, inputs)
    A = [np.atleast_2d(a) for a in acts]
    out = A[-1]
    B = out.shape[0]
    idx = np.atleast_1d(_target_indices(targets, out.shape[-1]))
    delta = out.copy()
    delta[np.arange(B), idx] -= 1.0
    delta /= B
    grads = [None] * len(net.weights)
    for l in range(len(net.weights) - 1, -1, -1):
        a_prev = A[l]
        grads[l] = np.vstack((delta.sum(axis=0), a_prev.T @ delta))
        if l > 0:
            delta = (delta @ net.weights[l][1:].T) * (1.0 - a_prev ** 2)
    return grads


def gd_step(net: NeuralNet, grads, eta: float) -> NeuralNet:
    return replace(net, weights=tuple(W - eta * G for W, G in zip(net.weights, grads)))


def loss_and_grad(net: NeuralNet, X, y):
    acts, out = forward(net, X)
    return cross_entropy(out, y), np.concatenate([g.ravel() for g in backprop(net, X, y, acts)])


# --------------------------------------------------------------------------
# datasets and training


@dataclass
class TrainingSet:
    """Network inputs (n, d0) with the index of the transmitted point per row."""

    inputs: np.ndarray
    targets: np.ndarray
    n_classes: int

    def __len__(self) -> int:
        return len(self.targets)

    @property
    def one_hot(self) -> np.ndarray:
        oh = np.zeros((len(self), self.n_classes))
        oh[np.arange(len(self)), self.targets] = 1.0
        return oh

    def split(self, fraction: float, rng: RandomSource):
        n_val = int(round(fraction * len(self)))
        perm = rng.permutation(len(self))
        v, t = perm[:n_val], perm[n_val:]
        return (TrainingSet(self.inputs[t], self.targets[t], self.n_classes),
                TrainingSet(self.inputs[v], self.targets[v], self.n_classes))

    def to_csv(self, path) -> None:
        d = self.inputs.shape[1]
        header = ",".join([f"x{i}" for i in range(d)] + ["target"])
        data = np.column_stack((self.inputs, self.targets))
        fmt = ["%.17g"] * d + ["%d"]
        np.savetxt(path, data, delimiter=",", header=header, comments="", fmt=fmt)


@dataclass
class TrainConfig:
    gamma_t_db: float = 13.0
    learning_rate: float = 0.5
    epochs: int = 200
    batch_size: int | None = None
    optimizer: str = "scg"
    seed: int = 1
    validation_fraction: float = 0.1
    patience: int = 20
    init_scheme: str = "symmetric-uniform"
    scale_inputs: bool = False

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.optimizer not in ("gd", "scg"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class TrainReport:
    initial_loss: float
    final_loss: float
    best_val_loss: float | None
    epochs_run: int
    stop_reason: str
    history: list = field(default_factory=list)


class _EarlyStop:
    def __init__(self, net, val: TrainingSet | None, patience: int):
        self.val = val
        self.patience = patience
        self.best = np.inf
        self.best_net = net
        self.bad = 0

    def update(self, net) -> bool:
        if self.val is None or len(self.val) == 0:
            self.best_net = net
            return False
        _, out = forward(net, self.val.inputs)
        v = cross_entropy(out, self.val.targets)
        if v < self.best - 1e-12:
            self.best, self.best_net, self.bad = v, net, 0
        else:
            self.bad += 1
        return self.bad >= self.patience


def _check_finite(loss: float, epoch: int) -> None:
    if not np.isfinite(loss):
        raise TrainingDivergence(f"loss became {loss} at epoch {epoch}")


def gd_train(net: NeuralNet, data: TrainingSet, cfg: TrainConfig, val: TrainingSet | None = None):
    rng = RandomSource(cfg.seed).stream("minibatch")
    bs = cfg.batch_size or 128
    stopper = _EarlyStop(net, val, cfg.patience)
    init = loss_and_grad(net, data.inputs, data.targets)[0]
    hist, reason, epoch = [], "epochs", 0
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(data))
        for s in range(0, len(data), bs):
            b = order[s:s + bs]
            net = gd_step(net, backprop(net, data.inputs[b], data.targets[b]), cfg.learning_rate)
        loss = cross_entropy(forward(net, data.inputs)[1], data.targets)
        _check_finite(loss, epoch)
        hist.append(loss)
        if stopper.update(net):
            reason = "early-stop"
            break
    best = stopper.best_net
    final = cross_entropy(forward(best, data.inputs)[1], data.targets)
    bv = stopper.best if np.isfinite(stopper.best) else None
    return best, TrainReport(init, final, bv, epoch, reason, hist)


def scg_train(net: NeuralNet, data: TrainingSet, cfg: TrainConfig, val: TrainingSet | None = None,
              grad_tol: float = 1e-6):
    """Full-batch scaled conjugate gradient (Moller), one iteration per epoch."""
    if cfg.optimizer == "gd":
        return gd_train(net, data, cfg, val)
    X, y = data.inputs, data.targets

    def fg(theta):
        return loss_and_grad(net.with_flat(theta), X, y)

    sigma0, beta, beta_min, beta_max = 1e-4, 1.0, 1e-15, 1e100
    w = net.flat()
    f_old, g_new = fg(w)
    init = f_old
    _check_finite(f_old, 0)
    stopper = _EarlyStop(net, val, cfg.patience)
    hist = []
    if np.linalg.norm(g_new) < grad_tol:
        return net, TrainReport(init, init, None, 0, "gradient", hist)

    d = -g_new
    success, n_success = True, 0
    mu = kappa = theta = 0.0
    reason, epoch = "epochs", 0
    for epoch in range(1, cfg.epochs + 1):
        if success:
            mu = d @ g_new
            if mu >= 0:
                d = -g_new
                mu = d @ g_new
            kappa = d @ d
            if kappa < 1e-300:
                reason = "gradient"
                break
            sigma = sigma0 / np.sqrt(kappa)
            g_plus = fg(w + sigma * d)[1]
            theta = d @ (g_plus - g_new) / sigma
        delta = theta + beta * kappa
        if delta <= 0:
            delta = beta * kappa
            beta = beta - theta / kappa
        step = -mu / delta
        w_new = w + step * d
        f_new, g_cand = fg(w_new)
        _check_finite(f_new, epoch)
        ratio = 2.0 * (f_new - f_old) / (step * mu)
        if ratio >= 0:
            success = True
            n_success += 1
            w = w_new
            g_old, g_new = g_new, g_cand
            f_old = f_new
        else:
            success = False
        hist.append(f_old)
        if success and stopper.update(net.with_flat(w)):
            reason = "early-stop"
            break
        if success and np.linalg.norm(g_new) < grad_tol:
            reason = "gradient"
            break
        if ratio < 0.25:
            beta = min(4.0 * beta, beta_max)
        if ratio > 0.75:
            beta = max(0.5 * beta, beta_min)
        if n_success == w.size:
            d = -g_new
            n_success = 0
        elif success:
            gamma = (g_new - g_old) @ g_new / mu
            d = gamma * d - g_new
    best = stopper.best_net if val is not None and len(val) else net.with_flat(w)
    final = cross_entropy(forward(best, X)[1], y)
    bv = stopper.best if np.isfinite(stopper.best) else None
    return best, TrainReport(init, final, bv, epoch, reason, hist)


def fit_scaler(inputs: np.ndarray):
    mean = inputs.mean(axis=0)
    std = inputs.std(axis=0)
    scale = np.where(std > 1e-12, 1.0 / np.where(std > 1e-12, std, 1.0), 1.0)
    return mean, scale


def train(net: NeuralNet, data: TrainingSet, cfg: TrainConfig):
    """Split off a validation set, optionally fit an input scaler, then optimize."""
    train_set, val = data.split(cfg.validation_fraction, RandomSource(cfg.seed).stream("split"))
    if cfg.scale_inputs:
        net = net.with_scaler(*fit_scaler(train_set.inputs))
    if cfg.optimizer == "scg":
        net, rep = scg_train(net, train_set, cfg, val)
    else:
        net, rep = gd_train(net, train_set, cfg, val)
    log.info("trained %s: loss %.4f -> %.4f (%s after %d epochs)",
             net.layer_dims, rep.initial_loss, rep.final_loss, rep.stop_reason, rep.epochs_run)
    return net, rep


# --------------------------------------------------------------------------
# inference


def observation_inputs(obs, with_prior: bool) -> np.ndarray:
    y = np.asarray(obs.y).ravel()
    cols = [y.real, y.imag, np.full(y.shape, float(obs.sigma_n2))]
    X = np.column_stack(cols)
    if with_prior:
        if obs.prior is None:
            raise ValueError("this network needs a prior PMF on every observation")
        X = np.hstack((X, np.asarray(obs.prior).reshape(len(y), -1)))
    return X


def infer_likelihoods(net: NeuralNet, obs) -> np.ndarray:
    """Softmax output for each observed subcarrier, used as p(Y|S) up to a constant.

    Networks wider than 3 inputs read ``obs.prior`` after [Re, Im, sigma^2].
    """
    with_prior = net.n_inputs > 3
    X = observation_inputs(obs, with_prior)
    if X.shape[1] != net.n_inputs:
        raise ValueError(f"observation gives {X.shape[1]} inputs, network expects {net.n_inputs}")
    out = forward(net, X)[1]
    return out.reshape(np.shape(obs.y) + (net.n_outputs,))


# --------------------------------------------------------------------------
# model files


def save_model(net: NeuralNet, path) -> None:
    """Write the versioned little-endian binary model format.

    Layout: magic 'NNBM', uint32 version, uint32 layer count, uint32 dims,
    uint32 scaler flag, [offset, scale as float64 d0 each], then every weight
    matrix row-major as float64 (bias row first).
    """
    dims = net.layer_dims
    buf = bytearray(MODEL_MAGIC)
    buf += struct.pack("<II", MODEL_VERSION, len(dims))
    buf += struct.pack(f"<{len(dims)}I", *dims)
    buf += struct.pack("<I", 1 if net.has_scaler else 0)
    if net.has_scaler:
        buf += np.asarray(net.input_offset, "<f8").tobytes()
        buf += np.asarray(net.input_scale, "<f8").tobytes()
    for W in net.weights:
        buf += np.ascontiguousarray(W, dtype="<f8").tobytes()
    Path(path).write_bytes(bytes(buf))


def load_model(path) -> NeuralNet:
    raw = Path(path).read_bytes()
    if raw[:4] != MODEL_MAGIC:
        raise ModelFormatError(f"{path}: bad magic {raw[:4]!r}")
    pos = 4

    def take(n):
        nonlocal pos
        if pos + n > len(raw):
            raise ModelFormatError(f"{path}: truncated at byte {pos}")
        chunk = raw[pos:pos + n]
        pos += n
        return chunk

    version, n_dims = struct.unpack("<II", take(8))
    if version != MODEL_VERSION:
        raise ModelFormatError(f"{path}: model version {version}, this build reads version {MODEL_VERSION}")
    if not 2 <= n_dims <= 64:
        raise ModelFormatError(f"{path}: implausible layer count {n_dims}")
    dims = struct.unpack(f"<{n_dims}I", take(4 * n_dims))
    if min(dims) < 1:
        raise ModelFormatError(f"{path}: zero-width layer in {dims}")
    (flag,) = struct.unpack("<I", take(4))
    offset = scale = None
    if flag:
        offset = np.frombuffer(take(8 * dims[0]), "<f8").astype(float)
        scale = np.frombuffer(take(8 * dims[0]), "<f8").astype(float)
    ws = []
    for l in range(n_dims - 1):
        shape = (dims[l] + 1, dims[l + 1])
        ws.append(np.frombuffer(take(8 * shape[0] * shape[1]), "<f8").astype(float).reshape(shape))
    if pos != len(raw):
        raise ModelFormatError(f"{path}: {len(raw) - pos} trailing bytes")
    return NeuralNet(tuple(dims), tuple(ws), offset, scale)
