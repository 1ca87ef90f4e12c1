"""Named trainable parameters, deterministic initialization, and Adam.

Initialization is keyed by ``(seed, parameter name)`` through a hash-seeded
counter-based generator, so the values a parameter receives do not depend
on the order parameters are created in. Renaming a parameter changes its
draw; adding one elsewhere does not.
"""

from __future__ import annotations

import hashlib
import math
from typing import Dict, Iterable, Iterator, Optional, Tuple

import numpy as np

from vyang.tensor import Tensor


def _rng_for(seed: int, name: str) -> np.random.Generator:
    digest = hashlib.blake2b(f"{seed}|{name}".encode(), digest_size=16).digest()
    key = int.from_bytes(digest, "little")
    return np.random.Generator(np.random.Philox(key=key))


def glorot_uniform(shape: Tuple[int, ...], fan_in: int, fan_out: int,
                   seed: int, name: str) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return _rng_for(seed, name).uniform(-limit, limit, size=shape)


class Parameter:
    """A named tensor that the optimizer updates."""

    __slots__ = ("name", "tensor")

    def __init__(self, name: str, data: np.ndarray):
        self.name = name
        self.tensor = Tensor(np.asarray(data, dtype=np.float64), requires_grad=True)

    @property
    def data(self) -> np.ndarray:
        return self.tensor.data

    @data.setter
    def data(self, value: np.ndarray) -> None:
        self.tensor.data = np.asarray(value, dtype=np.float64)

    @property
    def grad(self):
        return self.tensor.grad

    @property
    def shape(self) -> tuple:
        return self.tensor.shape

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


class ParameterStore:
    """Registry of a model's parameters, keyed by unique dotted names."""

    def __init__(self, seed: int):
        self.seed = seed
        self._params: Dict[str, Parameter] = {}

    def _register(self, name: str, data: np.ndarray) -> Parameter:
        if name in self._params:
            raise ValueError(f"parameter {name!r} already registered")
        p = Parameter(name, data)
        self._params[name] = p
        return p

    def weight(self, name: str, fan_in: int, fan_out: int,
               shape: Optional[Tuple[int, ...]] = None) -> Parameter:
        """Glorot-uniform weight; default shape is ``(fan_in, fan_out)``."""
        shape = shape if shape is not None else (fan_in, fan_out)
        return self._register(name, glorot_uniform(shape, fan_in, fan_out, self.seed, name))

    def zeros(self, name: str, shape: Tuple[int, ...]) -> Parameter:
        return self._register(name, np.zeros(shape))

    def ones(self, name: str, shape: Tuple[int, ...]) -> Parameter:
        return self._register(name, np.ones(shape))

    def conv_kernel(self, name: str, cout: int, cin: int, k: int) -> Parameter:
        fan_in = cin * k * k
        fan_out = cout * k * k
        return self._register(
            name, glorot_uniform((cout, cin, k, k), fan_in, fan_out, self.seed, name)
        )

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[Parameter]:
        for name in sorted(self._params):
            yield self._params[name]

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list:
        return sorted(self._params)

    def state_arrays(self) -> Dict[str, np.ndarray]:
        return {name: self._params[name].data for name in sorted(self._params)}

    def load_state_arrays(self, arrays: Dict[str, np.ndarray]) -> None:
        missing = sorted(set(self._params) - set(arrays))
        extra = sorted(set(arrays) - set(self._params))
        if missing or extra:
            raise ValueError(f"state mismatch: missing={missing}, unexpected={extra}")
        for name, value in arrays.items():
            p = self._params[name]
            value = np.asarray(value, dtype=np.float64)
            if value.shape != p.shape:
                raise ValueError(
                    f"parameter {name!r} expects shape {p.shape}, got {value.shape}"
                )
            p.data = value

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.tensor.zero_grad()


class Adam:
    """Adam with bias correction over a fixed parameter collection."""

    def __init__(self, params: Iterable[Parameter], lr: float = 0.001,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for i, p in enumerate(self.params):
            g = p.grad
            if g is None:
                continue
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            mhat = self.m[i] / b1t
            vhat = self.v[i] / b2t
            p.data = p.data - self.lr * mhat / (np.sqrt(vhat) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.tensor.zero_grad()
