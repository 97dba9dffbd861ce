"""Adam optimizer over a ParamStore."""

from __future__ import annotations

import numpy as np

from .._kernels import kern
from .params import ParamStore


class NonFiniteGradient(RuntimeError):
    """Raised when a gradient goes NaN/inf; carries the parameter name."""

    def __init__(self, name: str):
        super().__init__(f"non-finite gradient in parameter {name!r}")
        self.param_name = name


class Adam:
    """Standard Adam with bias correction; grads are zeroed after each step."""

    def __init__(self, store: ParamStore, lr: float = 1e-3,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.store = store
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self) -> None:
        self.t += 1
        for name, p in self.store.items():
            g = p.grad
            if not np.isfinite(g).all():
                raise NonFiniteGradient(name)
            if name not in self._m:
                self._m[name] = np.zeros_like(p.data)
                self._v[name] = np.zeros_like(p.data)
            kern.adam_update(p.data.reshape(-1), g.reshape(-1),
                             self._m[name].reshape(-1), self._v[name].reshape(-1),
                             self.t, self.lr, self.beta1, self.beta2, self.eps)
        self.store.zero_grads()


def adam_step(opt: Adam) -> None:
    """In-place update of all parameters in the optimizer's store."""
    opt.step()
