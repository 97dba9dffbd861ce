"""Pure-numpy kernel implementations.

Fallback backend used when the compiled extension is unavailable (or when
``STORYQG_BACKEND=python`` forces it). Signatures mirror ``kernels_cy``:
forward kernels allocate and return, backward kernels accumulate into the
caller's gradient buffer.
"""

import numpy as np

BACKEND = "python"


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def sigmoid_bwd(y, gy, gx):
    gx += y * (1.0 - y) * gy


def tanh(x):
    return np.tanh(x)


def tanh_bwd(y, gy, gx):
    gx += (1.0 - y * y) * gy


def leaky_relu(x, slope):
    return np.where(x > 0.0, x, slope * x)


def leaky_relu_bwd(x, slope, gy, gx):
    gx += np.where(x > 0.0, 1.0, slope) * gy


def exp(x):
    return np.exp(x)


def exp_bwd(y, gy, gx):
    gx += y * gy


def log_guarded(x, eps):
    return np.log(np.maximum(x, eps))


def log_guarded_bwd(x, eps, gy, gx):
    # clamp region (x < eps) gets zero gradient
    gx += np.where(x >= eps, gy / np.maximum(x, eps), 0.0)


def minimum(a, b):
    return np.minimum(a, b)


def minimum_bwd(a, b, gy, ga, gb):
    # ties route the gradient to the first argument
    take_a = a <= b
    ga += np.where(take_a, gy, 0.0)
    gb += np.where(take_a, 0.0, gy)


def softmax_rows(x, mask):
    """Row softmax of a 2-D array; masked entries (mask == 0) are exactly 0."""
    if mask is None:
        shifted = x - x.max(axis=1, keepdims=True)
        e = np.exp(shifted)
    else:
        if not mask.any(axis=1).all():
            raise ValueError("softmax: fully masked row")
        neg = np.where(mask > 0.0, x, -np.inf)
        shifted = neg - neg.max(axis=1, keepdims=True)
        e = np.where(mask > 0.0, np.exp(shifted), 0.0)
    return e / e.sum(axis=1, keepdims=True)


def softmax_rows_bwd(y, gy, gx):
    dot = (y * gy).sum(axis=1, keepdims=True)
    gx += y * (gy - dot)


def adam_update(p, g, m, v, t, lr, beta1, beta2, eps):
    """One bias-corrected Adam step, in place on (p, m, v)."""
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    mhat = m / (1.0 - beta1**t)
    vhat = v / (1.0 - beta2**t)
    p -= lr * mhat / (np.sqrt(vhat) + eps)


def lcs_len(a, b):
    """Length of the longest common subsequence of two int64 id arrays."""
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        return 0
    prev = np.zeros(m + 1, dtype=np.int64)
    cur = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        ai = a[i - 1]
        # vectorized row update: match positions extend the diagonal,
        # the rest is a running max which needs the sequential pass
        for j in range(1, m + 1):
            if ai == b[j - 1]:
                cur[j] = prev[j - 1] + 1
            else:
                pj = prev[j]
                cj = cur[j - 1]
                cur[j] = pj if pj >= cj else cj
        prev, cur = cur, prev
    return int(prev[m])
