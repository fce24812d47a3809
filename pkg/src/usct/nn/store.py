"""Named parameter store with optimizer state.

Iteration order is lexicographic by name so that training runs are
bit-reproducible regardless of registration order.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError, StateError
from .layers import Param


class ParamStore:
    def __init__(self):
        self._entries: dict[str, Param] = {}
        self.step_count: int = 0
        self._grads_ready = False

    def register(self, param: Param) -> None:
        if param.name in self._entries:
            raise ConfigurationError(f"duplicate parameter name {param.name!r}")
        self._entries[param.name] = param

    def register_all(self, params) -> None:
        for p in params:
            self.register(p)

    def names(self) -> list[str]:
        return sorted(self._entries)

    def __getitem__(self, name: str) -> Param:
        return self._entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        for name in self.names():
            yield self._entries[name]

    def zero_grads(self) -> None:
        for p in self:
            p.grad[...] = 0
        self._grads_ready = False

    def mark_grads_ready(self) -> None:
        self._grads_ready = True

    def param_count(self) -> int:
        return sum(p.value.size for p in self)


def adam_step(store: ParamStore, lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps_hat: float = 1e-8) -> None:
    """One bias-corrected moment update for every parameter in the store.

    Requires gradients populated since the last step (a backward pass or an
    explicit ``mark_grads_ready``); refuses to run on stale gradients.
    """
    if not store._grads_ready:
        raise StateError("adam_step called without freshly computed gradients")
    store.step_count += 1
    t = store.step_count
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for p in store:
        g = p.grad
        p.m[...] = beta1 * p.m + (1.0 - beta1) * g
        p.v[...] = beta2 * p.v + (1.0 - beta2) * (g * g)
        m_hat = p.m / bc1
        v_hat = p.v / bc2
        p.value[...] = p.value - lr * m_hat / (np.sqrt(v_hat) + eps_hat)
    store._grads_ready = False
