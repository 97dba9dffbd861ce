"""Named parameter store with seeded initialization and exact checkpoints."""

from __future__ import annotations

import zlib

import numpy as np

from .tensor import Tensor

SEED_KEY = "__seed__"


def _init_rng(seed: int, name: str) -> np.random.Generator:
    # per-name stream: initialization is independent of creation order
    return np.random.default_rng([seed, zlib.crc32(name.encode("utf-8"))])


class ParamStore:
    """Map from parameter path to Tensor; init fully determined by the seed."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._params: dict[str, Tensor] = {}

    def param(self, name: str, shape: tuple[int, ...], init: str = "auto") -> Tensor:
        """Fetch ``name``, creating it on first use.

        ``init="auto"`` draws uniform(-r, r) with r = sqrt(6 / (fan_in + fan_out));
        ``init="zeros"`` is for biases and scalars.
        """
        if name in self._params:
            t = self._params[name]
            if t.data.shape != tuple(shape):
                raise ValueError(f"param {name!r}: shape {t.data.shape} already registered, requested {tuple(shape)}")
            return t
        shape = tuple(shape)
        if init == "zeros":
            data = np.zeros(shape, dtype=np.float64)
        elif init == "auto":
            if len(shape) == 2:
                fan_in, fan_out = shape[1], shape[0]
            elif len(shape) == 1:
                fan_in, fan_out = shape[0], 1
            else:
                fan_in = fan_out = 1
            r = np.sqrt(6.0 / (fan_in + fan_out))
            data = _init_rng(self.seed, name).uniform(-r, r, size=shape)
        else:
            raise ValueError(f"unknown init {init!r}")
        t = Tensor(data, op=f"param:{name}")
        self._params[name] = t
        return t

    def get(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def items(self):
        return self._params.items()

    def names(self) -> list[str]:
        return list(self._params)

    def zero_grads(self) -> None:
        for t in self._params.values():
            t.zero_grad()

    def save(self, path) -> None:
        """Write all parameters plus the seed; float64 values round-trip exactly."""
        arrays = {name: t.data for name, t in self._params.items()}
        arrays[SEED_KEY] = np.int64(self.seed)
        np.savez(path, **arrays)

    @classmethod
    def load(cls, path) -> "ParamStore":
        with np.load(path) as archive:
            seed = int(archive[SEED_KEY])
            store = cls(seed)
            for name in archive.files:
                if name == SEED_KEY:
                    continue
                data = np.asarray(archive[name], dtype=np.float64)
                store._params[name] = Tensor(data, op=f"param:{name}")
        return store
