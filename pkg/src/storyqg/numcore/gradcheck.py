"""Finite-difference gradient checking and the differentiable-op registry.

Each registered op contributes a builder producing randomized inputs and a
scalar-loss closure; :func:`grad_check` compares analytic gradients against
central finite differences. Composite cases (full GAT layer, full decoder
step) register themselves from their own modules.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from . import tensor as T
from .tensor import Tensor, backward

# builder(rng) -> (inputs: list[Tensor], fn: callable(inputs) -> scalar Tensor)
Builder = Callable[[np.random.Generator], tuple[list[Tensor], Callable]]


def grad_check(build: Builder, trials: int = 100, eps: float = 1e-5,
               seed: int = 0, max_coords: int | None = None) -> float:
    """Max over trials of |analytic - FD| / max(|FD|, 1e-8).

    ``max_coords`` caps the number of FD coordinates probed per input tensor
    (sampled per trial); composite cases use it to keep runtime bounded.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        inputs, fn = build(rng)
        loss = fn(inputs)
        backward(loss)
        analytic = [t.grad.copy() for t in inputs]
        for t, grad in zip(inputs, analytic):
            flat = t.data.reshape(-1)
            gflat = grad.reshape(-1)
            coords = np.arange(flat.size)
            if max_coords is not None and flat.size > max_coords:
                coords = rng.choice(flat.size, size=max_coords, replace=False)
            for i in coords:
                orig = flat[i]
                flat[i] = orig + eps
                up = float(fn(inputs).data)
                flat[i] = orig - eps
                down = float(fn(inputs).data)
                flat[i] = orig
                fd = (up - down) / (2.0 * eps)
                err = abs(gflat[i] - fd) / max(abs(fd), 1e-8)
                worst = max(worst, err)
    return worst


def _rand(rng, *shape):
    return Tensor(rng.normal(size=shape))


def _probe(rng, shape):
    """Fixed random probe direction, scaled small.

    The small scale keeps the loss magnitude (and with it the float
    cancellation noise of the FD quotient) well below the 1e-8 error floor
    at coordinates whose true gradient is zero.
    """
    w = Tensor(1e-3 * rng.normal(size=shape))
    return lambda t: T.sum_all(T.mul(t, w))


OP_CASES: dict[str, Builder] = {}


def register(name: str):
    def deco(fn: Builder) -> Builder:
        OP_CASES[name] = fn
        return fn

    return deco


@register("add")
def _case_add(rng):
    a, b = _rand(rng, 3, 4), _rand(rng, 3, 4)
    probe = _probe(rng, (3, 4))
    return [a, b], lambda ts: probe(T.add(ts[0], ts[1]))


@register("mul")
def _case_mul(rng):
    a, b = _rand(rng, 5), _rand(rng, 5)
    probe = _probe(rng, (5,))
    return [a, b], lambda ts: probe(T.mul(ts[0], ts[1]))


@register("mul_scalar_operand")
def _case_mul_scalar(rng):
    a, s = _rand(rng, 6), _rand(rng)
    probe = _probe(rng, (6,))
    return [a, s], lambda ts: probe(T.mul(ts[0], ts[1]))


@register("scale")
def _case_scale(rng):
    a = _rand(rng, 4)
    c = float(rng.normal())
    probe = _probe(rng, (4,))
    return [a], lambda ts: probe(T.scale(ts[0], c))


@register("matmul_mm")
def _case_matmul_mm(rng):
    a, b = _rand(rng, 3, 4), _rand(rng, 4, 2)
    probe = _probe(rng, (3, 2))
    return [a, b], lambda ts: probe(T.matmul(ts[0], ts[1]))


@register("matmul_mv")
def _case_matmul_mv(rng):
    a, b = _rand(rng, 3, 4), _rand(rng, 4)
    probe = _probe(rng, (3,))
    return [a, b], lambda ts: probe(T.matmul(ts[0], ts[1]))


@register("matmul_vm")
def _case_matmul_vm(rng):
    a, b = _rand(rng, 3), _rand(rng, 3, 4)
    probe = _probe(rng, (4,))
    return [a, b], lambda ts: probe(T.matmul(ts[0], ts[1]))


@register("matmul_vv")
def _case_matmul_vv(rng):
    a, b = _rand(rng, 5), _rand(rng, 5)
    probe = _probe(rng, ())
    return [a, b], lambda ts: probe(T.matmul(ts[0], ts[1]))


@register("transpose")
def _case_transpose(rng):
    a = _rand(rng, 3, 4)
    probe = _probe(rng, (4, 3))
    return [a], lambda ts: probe(T.transpose(ts[0]))


@register("reshape")
def _case_reshape(rng):
    a = _rand(rng, 3, 4)
    probe = _probe(rng, (2, 6))
    return [a], lambda ts: probe(T.reshape(ts[0], (2, 6)))


@register("concat")
def _case_concat(rng):
    a, b, c = _rand(rng, 2, 3), _rand(rng, 1, 3), _rand(rng, 2, 3)
    probe = _probe(rng, (5, 3))
    return [a, b, c], lambda ts: probe(T.concat(list(ts), axis=0))


@register("slice")
def _case_slice(rng):
    a = _rand(rng, 7)
    probe = _probe(rng, (3,))
    return [a], lambda ts: probe(T.slice_axis(ts[0], 2, 5))


@register("sum")
def _case_sum(rng):
    a = _rand(rng, 3, 4)
    return [a], lambda ts: T.sum_all(ts[0])


@register("sum_axis")
def _case_sum_axis(rng):
    a = _rand(rng, 3, 4)
    probe = _probe(rng, (4,))
    return [a], lambda ts: probe(T.sum_axis(ts[0], 0))


@register("sigmoid")
def _case_sigmoid(rng):
    a = _rand(rng, 6)
    probe = _probe(rng, (6,))
    return [a], lambda ts: probe(T.sigmoid(ts[0]))


@register("tanh")
def _case_tanh(rng):
    a = _rand(rng, 6)
    probe = _probe(rng, (6,))
    return [a], lambda ts: probe(T.tanh(ts[0]))


@register("leaky_relu")
def _case_leaky_relu(rng):
    # keep inputs away from the kink where FD straddles the slope change
    a = Tensor(rng.normal(size=6) + np.where(rng.normal(size=6) > 0, 0.5, -0.5))
    probe = _probe(rng, (6,))
    return [a], lambda ts: probe(T.leaky_relu(ts[0], 0.2))


@register("exp")
def _case_exp(rng):
    a = _rand(rng, 6)
    probe = _probe(rng, (6,))
    return [a], lambda ts: probe(T.exp(ts[0]))


@register("log")
def _case_log(rng):
    a = Tensor(rng.uniform(0.1, 2.0, size=6))
    probe = _probe(rng, (6,))
    return [a], lambda ts: probe(T.log(ts[0]))


@register("minimum")
def _case_minimum(rng):
    # separate the operands so FD never crosses the tie
    a = Tensor(rng.normal(size=6))
    b = Tensor(a.data + np.where(rng.normal(size=6) > 0, 0.3, -0.3))
    probe = _probe(rng, (6,))
    return [a, b], lambda ts: probe(T.minimum(ts[0], ts[1]))


@register("softmax")
def _case_softmax(rng):
    a = _rand(rng, 3, 5)
    probe = _probe(rng, (3, 5))
    return [a], lambda ts: probe(T.softmax(ts[0], axis=-1))


@register("softmax_masked")
def _case_softmax_masked(rng):
    a = _rand(rng, 3, 5)
    mask = (rng.uniform(size=(3, 5)) > 0.4).astype(np.float64)
    mask[:, 0] = 1.0  # keep every row alive
    probe = _probe(rng, (3, 5))
    return [a], lambda ts: probe(T.softmax(ts[0], axis=-1, mask=mask))


@register("embed_rows")
def _case_embed_rows(rng):
    table = _rand(rng, 6, 4)
    ids = rng.integers(0, 6, size=5)
    probe = _probe(rng, (5, 4))
    return [table], lambda ts: probe(T.embed_rows(ts[0], ids))


@register("scatter_add")
def _case_scatter_add(rng):
    vals = _rand(rng, 5)
    ids = rng.integers(0, 4, size=5)
    probe = _probe(rng, (4,))
    return [vals], lambda ts: probe(T.scatter_add(ts[0], ids, 4))


def run_registry(trials: int = 100, eps: float = 1e-5, seed: int = 0,
                 extra_cases: dict[str, Builder] | None = None,
                 max_coords: int | None = None) -> dict[str, float]:
    """grad_check every registered case; returns name -> max relative error."""
    cases = dict(OP_CASES)
    if extra_cases:
        cases.update(extra_cases)
    if not cases:
        raise ValueError("gradient-check registry is empty")
    return {
        name: grad_check(build, trials=trials, eps=eps, seed=seed, max_coords=max_coords)
        for name, build in cases.items()
    }
