"""Class-conditional forecasters trained from scratch on Huber loss.

Four direct multi-step architectures share one interface: an affine map
(LinearDMS), a one-hidden-layer MLP, a single-layer Elman recurrence, and
a two-layer dilated causal convolution net (TCNLite). Every forward pass
is wrapped in per-window mean centering: the context mean is subtracted
before the network and added back to its output, which makes the
zero-weight model an identity-like baseline and renders LinearDMS exactly
shift-equivariant.

Gradients are hand-derived and checked against central finite differences
in the test suite; training is mini-batch Adam with a fixed step budget.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import Adam, Layout, ParameterVector, batch_stream, init_uniform
from .seeding import stable_seed
from .signals import ClassLabel
from .windowing import WindowPair

ARCHITECTURE_NAMES = ("LinearDMS", "MLP", "ElmanRNN", "TCNLite")
DEFAULT_HIDDEN_WIDTH = {"LinearDMS": 1, "MLP": 256, "ElmanRNN": 64, "TCNLite": 32}


@dataclass(frozen=True)
class ForecasterSpec:
    architecture: str
    context_len: int
    horizon: int = 500
    hidden_width: int | None = None

    def __post_init__(self) -> None:
        if self.architecture not in ARCHITECTURE_NAMES:
            raise ValueError(f"unknown architecture {self.architecture!r}; "
                             f"choose from {ARCHITECTURE_NAMES}")
        if self.context_len < 1 or self.horizon < 1:
            raise ValueError("context_len and horizon must be >= 1")
        if self.hidden_width is not None and self.hidden_width < 1:
            raise ValueError("hidden_width must be >= 1")

    @property
    def width(self) -> int:
        if self.hidden_width is not None:
            return self.hidden_width
        return DEFAULT_HIDDEN_WIDTH[self.architecture]


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    max_steps: int = 1000
    learning_rate: float = 1e-3
    huber_delta: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.batch_size < 1 or self.max_steps < 1:
            raise ValueError("batch_size and max_steps must be >= 1")
        if self.learning_rate <= 0 or self.huber_delta <= 0:
            raise ValueError("learning_rate and huber_delta must be positive")


def huber_loss(pred: np.ndarray, target: np.ndarray, delta: float = 1.0) -> float:
    """Mean Huber penalty: quadratic for |r| <= delta, linear beyond."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    if delta <= 0:
        raise ValueError("delta must be positive")
    r = pred - target
    a = np.abs(r)
    vals = np.where(a <= delta, 0.5 * r * r, delta * (a - 0.5 * delta))
    return float(vals.mean())


def huber_gradient(pred: np.ndarray, target: np.ndarray, delta: float = 1.0) -> np.ndarray:
    """Elementwise d(mean Huber)/d(pred): r/n inside the quadratic zone,
    clipped to delta*sign(r)/n outside."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    if delta <= 0:
        raise ValueError("delta must be positive")
    r = pred - target
    return np.where(np.abs(r) <= delta, r, delta * np.sign(r)) / r.size


# --------------------------------------------------------------------------
# Architectures. Each exposes layout / fan_in / forward / backward on 2-D
# batches X: (B, L) -> Y: (B, H). backward accumulates parameter gradients
# only; input gradients are never needed (contexts are data, not weights).
# --------------------------------------------------------------------------


class _LinearDMS:
    @staticmethod
    def layout(spec: ForecasterSpec) -> Layout:
        return [("w", (spec.horizon, spec.context_len)), ("b", (spec.horizon,))]

    @staticmethod
    def fan_in(spec: ForecasterSpec) -> dict[str, int]:
        return {"w": spec.context_len}

    @staticmethod
    def forward(params: ParameterVector, X: np.ndarray):
        return X @ params["w"].T + params["b"], (X,)

    @staticmethod
    def backward(params: ParameterVector, cache, dY: np.ndarray,
                 grads: ParameterVector) -> None:
        (X,) = cache
        grads["w"] += dY.T @ X
        grads["b"] += dY.sum(axis=0)


class _MLP:
    @staticmethod
    def layout(spec: ForecasterSpec) -> Layout:
        w = spec.width
        return [("w1", (w, spec.context_len)), ("b1", (w,)),
                ("w2", (spec.horizon, w)), ("b2", (spec.horizon,))]

    @staticmethod
    def fan_in(spec: ForecasterSpec) -> dict[str, int]:
        return {"w1": spec.context_len, "w2": spec.width}

    @staticmethod
    def forward(params: ParameterVector, X: np.ndarray):
        pre = X @ params["w1"].T + params["b1"]
        hidden = np.maximum(pre, 0.0)
        return hidden @ params["w2"].T + params["b2"], (X, pre, hidden)

    @staticmethod
    def backward(params: ParameterVector, cache, dY: np.ndarray,
                 grads: ParameterVector) -> None:
        X, pre, hidden = cache
        grads["w2"] += dY.T @ hidden
        grads["b2"] += dY.sum(axis=0)
        d_pre = (dY @ params["w2"]) * (pre > 0.0)
        grads["w1"] += d_pre.T @ X
        grads["b1"] += d_pre.sum(axis=0)


class _ElmanRNN:
    @staticmethod
    def layout(spec: ForecasterSpec) -> Layout:
        w = spec.width
        return [("w_xh", (w,)), ("w_hh", (w, w)), ("b_h", (w,)),
                ("w_out", (spec.horizon, w)), ("b_out", (spec.horizon,))]

    @staticmethod
    def fan_in(spec: ForecasterSpec) -> dict[str, int]:
        return {"w_xh": 1, "w_hh": spec.width, "w_out": spec.width}

    @staticmethod
    def forward(params: ParameterVector, X: np.ndarray):
        B, L = X.shape
        width = params["b_h"].size
        states = np.zeros((L + 1, B, width), dtype=np.float64)
        w_xh, w_hh, b_h = params["w_xh"], params["w_hh"], params["b_h"]
        for t in range(L):
            pre = X[:, t : t + 1] * w_xh + states[t] @ w_hh.T + b_h
            states[t + 1] = np.tanh(pre)
        Y = states[L] @ params["w_out"].T + params["b_out"]
        return Y, (X, states)

    @staticmethod
    def backward(params: ParameterVector, cache, dY: np.ndarray,
                 grads: ParameterVector) -> None:
        X, states = cache
        L = X.shape[1]
        grads["w_out"] += dY.T @ states[L]
        grads["b_out"] += dY.sum(axis=0)
        dh = dY @ params["w_out"]
        for t in range(L, 0, -1):
            d_pre = dh * (1.0 - states[t] ** 2)
            grads["w_xh"] += (d_pre * X[:, t - 1 : t]).sum(axis=0)
            grads["w_hh"] += d_pre.T @ states[t - 1]
            grads["b_h"] += d_pre.sum(axis=0)
            dh = d_pre @ params["w_hh"]


def _causal_conv(x: np.ndarray, w: np.ndarray, b: np.ndarray,
                 dilation: int) -> np.ndarray:
    """Dilated causal 1-D convolution, kernel 3, zero padding on the left.

    x: (B, C_in, L), w: (C_out, C_in, 3); tap j reaches back (2-j)*dilation.
    """
    B, _, L = x.shape
    out = np.zeros((B, w.shape[0], L), dtype=np.float64)
    out += b[None, :, None]
    for j in range(3):
        shift = (2 - j) * dilation
        if shift >= L:
            continue
        out[:, :, shift:] += np.einsum("oc,bct->bot", w[:, :, j], x[:, :, : L - shift])
    return out


def _causal_conv_grads(x: np.ndarray, w: np.ndarray, d_out: np.ndarray,
                       dilation: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of _causal_conv w.r.t. weights, bias, and input."""
    L = x.shape[2]
    d_w = np.zeros_like(w)
    d_x = np.zeros_like(x)
    for j in range(3):
        shift = (2 - j) * dilation
        if shift >= L:
            continue
        d_slice = d_out[:, :, shift:]
        d_w[:, :, j] = np.einsum("bot,bct->oc", d_slice, x[:, :, : L - shift])
        d_x[:, :, : L - shift] += np.einsum("oc,bot->bct", w[:, :, j], d_slice)
    return d_w, d_out.sum(axis=(0, 2)), d_x


class _TCNLite:
    @staticmethod
    def layout(spec: ForecasterSpec) -> Layout:
        c = spec.width
        return [("conv1_w", (c, 1, 3)), ("conv1_b", (c,)),
                ("conv2_w", (c, c, 3)), ("conv2_b", (c,)),
                ("w_out", (spec.horizon, c)), ("b_out", (spec.horizon,))]

    @staticmethod
    def fan_in(spec: ForecasterSpec) -> dict[str, int]:
        return {"conv1_w": 3, "conv2_w": 3 * spec.width, "w_out": spec.width}

    @staticmethod
    def forward(params: ParameterVector, X: np.ndarray):
        x0 = X[:, None, :]
        pre1 = _causal_conv(x0, params["conv1_w"], params["conv1_b"], dilation=1)
        z1 = np.maximum(pre1, 0.0)
        pre2 = _causal_conv(z1, params["conv2_w"], params["conv2_b"], dilation=2)
        z2 = np.maximum(pre2, 0.0)
        feats = z2[:, :, -1]
        Y = feats @ params["w_out"].T + params["b_out"]
        return Y, (x0, pre1, z1, pre2, z2)

    @staticmethod
    def backward(params: ParameterVector, cache, dY: np.ndarray,
                 grads: ParameterVector) -> None:
        x0, pre1, z1, pre2, z2 = cache
        feats = z2[:, :, -1]
        grads["w_out"] += dY.T @ feats
        grads["b_out"] += dY.sum(axis=0)
        d_z2 = np.zeros_like(z2)
        d_z2[:, :, -1] = dY @ params["w_out"]
        d_pre2 = d_z2 * (pre2 > 0.0)
        d_w2, d_b2, d_z1 = _causal_conv_grads(z1, params["conv2_w"], d_pre2, dilation=2)
        grads["conv2_w"] += d_w2
        grads["conv2_b"] += d_b2
        d_pre1 = d_z1 * (pre1 > 0.0)
        d_w1, d_b1, _ = _causal_conv_grads(x0, params["conv1_w"], d_pre1, dilation=1)
        grads["conv1_w"] += d_w1
        grads["conv1_b"] += d_b1


ARCHITECTURES = {"LinearDMS": _LinearDMS, "MLP": _MLP,
                 "ElmanRNN": _ElmanRNN, "TCNLite": _TCNLite}


@dataclass(frozen=True, eq=False)
class ForecasterModel:
    """Trained parameters of one class-conditional forecaster."""

    spec: ForecasterSpec
    params: ParameterVector
    label: ClassLabel | None
    train_seed: int
    loss_curve: tuple[float, ...] = ()

    @property
    def model_id(self) -> str:
        label = self.label.value if self.label is not None else "unlabeled"
        return (f"{self.spec.architecture}_L{self.spec.context_len}"
                f"_H{self.spec.horizon}_{label}_seed{self.train_seed}")

    def predict(self, context: np.ndarray) -> np.ndarray:
        return predict(self, context)


def parameter_count(spec: ForecasterSpec) -> int:
    layout = ARCHITECTURES[spec.architecture].layout(spec)
    return int(sum(np.prod(shape) for _, shape in layout))


def _build_params(spec: ForecasterSpec, seed: int) -> ParameterVector:
    arch = ARCHITECTURES[spec.architecture]
    params = ParameterVector(arch.layout(spec))
    init_uniform(params, arch.fan_in(spec), np.random.default_rng(seed))
    return params


def init_model(spec: ForecasterSpec, seed: int,
               label: ClassLabel | None = None) -> ForecasterModel:
    """Seeded init: weights uniform in +/-1/sqrt(fan_in), biases zero."""
    return ForecasterModel(spec=spec, params=_build_params(spec, seed).freeze(),
                           label=label, train_seed=seed)


def forward_batch(spec: ForecasterSpec, params: ParameterVector,
                  X: np.ndarray) -> np.ndarray:
    """Mean-centered forward pass on a (B, L) batch of contexts."""
    m = X.mean(axis=1, keepdims=True)
    Y, _ = ARCHITECTURES[spec.architecture].forward(params, X - m)
    return Y + m


def predict(model: ForecasterModel, context: np.ndarray) -> np.ndarray:
    """One deterministic forecast of H future samples from L context samples."""
    ctx = np.asarray(context, dtype=np.float64)
    if ctx.shape != (model.spec.context_len,):
        raise ValueError(f"context must have length {model.spec.context_len}, "
                         f"got shape {ctx.shape}")
    if not np.all(np.isfinite(ctx)):
        raise ValueError("context contains non-finite values")
    return forward_batch(model.spec, model.params, ctx[None, :])[0]


def batch_loss_and_grads(spec: ForecasterSpec, params: ParameterVector,
                         grads: ParameterVector, X: np.ndarray, Y: np.ndarray,
                         delta: float) -> float:
    """Huber loss of a centered forward pass; accumulates parameter grads."""
    arch = ARCHITECTURES[spec.architecture]
    m = X.mean(axis=1, keepdims=True)
    Y_raw, cache = arch.forward(params, X - m)
    pred = Y_raw + m
    loss = huber_loss(pred, Y, delta)
    arch.backward(params, cache, huber_gradient(pred, Y, delta), grads)
    return loss


def train_class_forecaster(pairs: list[WindowPair], spec: ForecasterSpec,
                           config: TrainConfig,
                           label: ClassLabel | None = None) -> ForecasterModel:
    """Fit one forecaster on the pairs of a single class.

    Runs exactly max_steps mini-batch Adam steps, reshuffling the pair
    order whenever it is exhausted; init and shuffling both derive from
    config.seed, so the returned parameters are bit-reproducible.
    """
    name = label.value if label is not None else "unlabeled"
    if not pairs:
        raise ValueError(f"class {name}: no training pairs "
                         "(no contiguous run long enough for L+H)")
    L, H = spec.context_len, spec.horizon
    for p in pairs:
        if p.context.shape != (L,) or p.target.shape != (H,):
            raise ValueError(f"class {name}: pair shapes {p.context.shape}/{p.target.shape} "
                             f"do not match spec L={L}, H={H}")
    params = _build_params(spec, stable_seed(config.seed, "init"))
    grads = params.zeros_like()
    adam = Adam(params.size, lr=config.learning_rate)
    rng = np.random.default_rng(stable_seed(config.seed, "shuffle"))
    batches = batch_stream(len(pairs), config.batch_size, rng)
    losses = []
    for _ in range(config.max_steps):
        idx = next(batches)
        X = np.stack([pairs[i].context for i in idx])
        Y = np.stack([pairs[i].target for i in idx])
        grads.flat[:] = 0.0
        losses.append(batch_loss_and_grads(spec, params, grads, X, Y, config.huber_delta))
        adam.step(params.flat, grads.flat)
    if not np.all(np.isfinite(params.flat)):
        raise ValueError(f"class {name}: training diverged to non-finite parameters")
    return ForecasterModel(spec=spec, params=params.freeze(), label=label,
                           train_seed=config.seed, loss_curve=tuple(losses))
