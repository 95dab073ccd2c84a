"""Flat-parameter storage and optimizers for the from-scratch networks.

Model parameters live in one contiguous float64 vector with named,
reshaped views per layer; optimizers update the flat vector in place, so
checkpointing and finite-difference checks see one coherent array.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

Layout = Sequence[tuple[str, tuple[int, ...]]]


class ParameterVector:
    """A flat float64 vector with named views per layer tensor."""

    def __init__(self, layout: Layout, flat: np.ndarray | None = None):
        self._layout = tuple((name, tuple(shape)) for name, shape in layout)
        sizes = [int(np.prod(shape)) for _, shape in self._layout]
        total = int(sum(sizes))
        if flat is None:
            flat = np.zeros(total, dtype=np.float64)
        else:
            flat = np.array(flat, dtype=np.float64)
            if flat.shape != (total,):
                raise ValueError(f"flat vector has {flat.shape}, layout needs ({total},)")
        self.flat = flat
        self._views: dict[str, np.ndarray] = {}
        offset = 0
        for (name, shape), size in zip(self._layout, sizes):
            if name in self._views:
                raise ValueError(f"duplicate parameter name {name!r}")
            self._views[name] = self.flat[offset : offset + size].reshape(shape)
            offset += size

    @property
    def layout(self) -> Layout:
        return self._layout

    @property
    def size(self) -> int:
        return self.flat.size

    def __getitem__(self, name: str) -> np.ndarray:
        return self._views[name]

    def __setitem__(self, name: str, value) -> None:
        view = self._views[name]
        if value is not view:  # augmented assignment already wrote in place
            view[...] = value

    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self._layout)

    def copy(self) -> "ParameterVector":
        return ParameterVector(self._layout, self.flat.copy())

    def zeros_like(self) -> "ParameterVector":
        return ParameterVector(self._layout)

    def freeze(self) -> "ParameterVector":
        self.flat.setflags(write=False)
        return self


def init_uniform(params: ParameterVector, fan_in: Mapping[str, int],
                 rng: np.random.Generator) -> None:
    """Fill weight tensors with U(-1/sqrt(fan_in), +1/sqrt(fan_in)).

    Tensors absent from fan_in (biases) stay zero. Draw order follows the
    layout, so a given seed always produces the same parameters.
    """
    for name, _ in params.layout:
        if name not in fan_in:
            continue
        bound = 1.0 / np.sqrt(fan_in[name])
        view = params[name]
        view[...] = rng.uniform(-bound, bound, size=view.shape)


class Adam:
    """Adam with bias correction; state kept on the flat vector.

    Updates run through preallocated scratch buffers; a step makes no heap
    allocations, which matters at 1000 steps per model.
    """

    def __init__(self, n_params: int, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = np.zeros(n_params, dtype=np.float64)
        self.v = np.zeros(n_params, dtype=np.float64)
        self._scratch = np.empty(n_params, dtype=np.float64)
        self._denom = np.empty(n_params, dtype=np.float64)

    def step(self, flat_params: np.ndarray, flat_grads: np.ndarray) -> None:
        self.t += 1
        s, d = self._scratch, self._denom
        self.m *= self.beta1
        np.multiply(flat_grads, 1.0 - self.beta1, out=s)
        self.m += s
        self.v *= self.beta2
        np.multiply(flat_grads, flat_grads, out=s)
        s *= 1.0 - self.beta2
        self.v += s
        np.divide(self.v, 1.0 - self.beta2 ** self.t, out=d)
        np.sqrt(d, out=d)
        d += self.eps
        np.divide(self.m, d, out=s)
        s *= self.lr / (1.0 - self.beta1 ** self.t)
        flat_params -= s


class SGD:
    """Plain stochastic gradient descent, no momentum."""

    def __init__(self, lr: float):
        self.lr = lr

    def step(self, flat_params: np.ndarray, flat_grads: np.ndarray) -> None:
        flat_params -= self.lr * flat_grads


def batch_stream(n_items: int, batch_size: int, rng: np.random.Generator):
    """Yield index batches from an endless reshuffled permutation stream."""
    if n_items <= 0:
        raise ValueError("need at least one item to batch")
    pending: list[np.ndarray] = []
    have = 0
    while True:
        while have < batch_size:
            perm = rng.permutation(n_items)
            pending.append(perm)
            have += n_items
        chunk = np.concatenate(pending) if len(pending) > 1 else pending[0]
        yield chunk[:batch_size]
        rest = chunk[batch_size:]
        pending = [rest] if rest.size else []
        have = rest.size
