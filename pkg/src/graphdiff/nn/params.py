"""Named parameters, simple layers and gradient-descent optimizers."""

from __future__ import annotations

from collections import OrderedDict

import numpy as np

from . import tensor as T
from .tensor import Tensor


class ParamStore:
    """Ordered collection of trainable tensors plus optimizer state."""

    def __init__(self, seed: int = 0):
        self.params: OrderedDict[str, Tensor] = OrderedDict()
        self.rng = np.random.default_rng(seed)
        self.opt_state: dict[str, np.ndarray] = {}
        self.step_count = 0

    def __contains__(self, name):
        return name in self.params

    def __getitem__(self, name) -> Tensor:
        return self.params[name]

    def __iter__(self):
        return iter(self.params.items())

    def __len__(self):
        return len(self.params)

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self.params:
            raise KeyError(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(value, dtype=np.float64), requires_grad=True)
        self.params[name] = t
        return t

    def uniform(self, name: str, shape, fan_in: int) -> Tensor:
        bound = 1.0 / np.sqrt(fan_in)
        return self.add(name, self.rng.uniform(-bound, bound, size=shape))

    def zeros(self, name: str, shape) -> Tensor:
        return self.add(name, np.zeros(shape))

    def ones(self, name: str, shape) -> Tensor:
        return self.add(name, np.ones(shape))

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def num_parameters(self) -> int:
        return sum(p.data.size for p in self.params.values())

    def state_dict(self) -> OrderedDict:
        return OrderedDict((k, v.data.copy()) for k, v in self.params.items())

    def load_state_dict(self, state) -> None:
        missing = set(self.params) - set(state)
        extra = set(state) - set(self.params)
        if missing or extra:
            raise KeyError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for k, v in state.items():
            if v.shape != self.params[k].shape:
                raise ValueError(f"{k}: shape {v.shape} != {self.params[k].shape}")
            self.params[k].data = np.array(v, dtype=np.float64)

    def grads(self) -> OrderedDict:
        return OrderedDict(
            (k, v.grad if v.grad is not None else np.zeros_like(v.data)) for k, v in self.params.items()
        )

    def add_grads(self, grads) -> None:
        """Reduce step for data-parallel evaluation: sum foreign gradients in."""
        for k, g in grads.items():
            p = self.params[k]
            p.grad = g.copy() if p.grad is None else p.grad + g


class Linear:
    def __init__(self, store: ParamStore, name: str, fan_in: int, fan_out: int, bias: bool = True, zero: bool = False):
        if zero:
            self.W = store.zeros(f"{name}.W", (fan_in, fan_out))
        else:
            self.W = store.uniform(f"{name}.W", (fan_in, fan_out), fan_in)
        self.b = store.zeros(f"{name}.b", (fan_out,)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        out = T.matmul(x, self.W)
        return out if self.b is None else T.add(out, self.b)


class MLP:
    """Linear layers with ReLU between them (and optionally after the last)."""

    def __init__(self, store, name, sizes, final_act: bool = False):
        self.layers = [Linear(store, f"{name}.{i}", sizes[i], sizes[i + 1]) for i in range(len(sizes) - 1)]
        self.final_act = final_act

    def __call__(self, x):
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1 or self.final_act:
                x = T.relu(x)
        return x


class LayerNorm:
    def __init__(self, store: ParamStore, name: str, dim: int):
        self.gamma = store.ones(f"{name}.gamma", (dim,))
        self.beta = store.zeros(f"{name}.beta", (dim,))

    def __call__(self, x):
        return T.layernorm(x, self.gamma, self.beta)


def clip_grad_norm(store: ParamStore, max_norm: float) -> float:
    total = np.sqrt(sum(float((p.grad**2).sum()) for _, p in store if p.grad is not None))
    if max_norm and total > max_norm:
        for _, p in store:
            if p.grad is not None:
                p.grad = p.grad * (max_norm / total)
    return total


def sgd_step(store: ParamStore, lr: float) -> None:
    for _, p in store:
        if p.grad is not None:
            p.data = p.data - lr * p.grad
    store.step_count += 1


def adamlike_step(store: ParamStore, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """Adam with bias correction. Moment buffers live in ``store.opt_state``."""
    store.step_count += 1
    k = store.step_count
    for name, p in store:
        if p.grad is None:
            continue
        m = store.opt_state.get(f"{name}.m")
        v = store.opt_state.get(f"{name}.v")
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        m = beta1 * m + (1 - beta1) * p.grad
        v = beta2 * v + (1 - beta2) * p.grad**2
        store.opt_state[f"{name}.m"] = m
        store.opt_state[f"{name}.v"] = v
        m_hat = m / (1 - beta1**k)
        v_hat = v / (1 - beta2**k)
        p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + eps)
