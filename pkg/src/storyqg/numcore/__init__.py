"""Dense float64 arrays with reverse-mode autodiff, plus Adam and grad checks."""

from .gradcheck import OP_CASES, grad_check, run_registry
from .optim import Adam, NonFiniteGradient, adam_step
from .params import ParamStore
from .tensor import (
    LOG_EPS,
    Tensor,
    add,
    backward,
    concat,
    embed_rows,
    exp,
    leaky_relu,
    log,
    matmul,
    minimum,
    mul,
    reshape,
    scale,
    scatter_add,
    sigmoid,
    slice_axis,
    softmax,
    sum_all,
    sum_axis,
    tanh,
    transpose,
)

__all__ = [
    "LOG_EPS",
    "Tensor",
    "ParamStore",
    "Adam",
    "NonFiniteGradient",
    "adam_step",
    "add",
    "backward",
    "concat",
    "embed_rows",
    "exp",
    "grad_check",
    "leaky_relu",
    "log",
    "matmul",
    "minimum",
    "mul",
    "reshape",
    "run_registry",
    "scale",
    "scatter_add",
    "sigmoid",
    "slice_axis",
    "softmax",
    "sum_all",
    "sum_axis",
    "tanh",
    "transpose",
    "OP_CASES",
]
