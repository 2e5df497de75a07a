"""Hot numeric kernels for the transformer, in two interchangeable flavors.

Matrix products stay in BLAS either way; what lives here are the fused
row-wise loops that dominate the remaining step time: masked softmax,
layer normalization (forward and backward), the Adam parameter update, and
the cross-entropy/gradient fusion.

Backend selection happens once at import:

* ``METAPHOR_FORGE_NUMBA=0`` (or ``off``/``false``/``no``) forces the pure
  numpy path,
* ``METAPHOR_FORGE_NUMBA=1`` (or ``on``/``true``/``force``) requires numba
  and fails loudly without it,
* unset/``auto`` uses numba when importable.

Both implementations are exported (``numpy_impl`` / ``numba_impl``) so the
equivalence tests and ``benchmarks/bench_kernels.py`` can compare them
directly.  All kernels take C-contiguous float64 arrays.
"""

from __future__ import annotations

import os
from typing import Callable, NamedTuple

import numpy as np

__all__ = [
    "BACKEND",
    "numpy_impl",
    "numba_impl",
    "softmax_rows",
    "softmax_rows_backward",
    "layernorm_forward",
    "layernorm_backward",
    "adam_update",
    "cross_entropy_rows",
]


class KernelImpl(NamedTuple):
    name: str
    softmax_rows: Callable
    softmax_rows_backward: Callable
    layernorm_forward: Callable
    layernorm_backward: Callable
    adam_update: Callable
    cross_entropy_rows: Callable


# ---------------------------------------------------------------------------
# numpy reference implementations
# ---------------------------------------------------------------------------


def _softmax_rows_np(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _softmax_rows_backward_np(p: np.ndarray, dp: np.ndarray) -> np.ndarray:
    inner = (dp * p).sum(axis=1, keepdims=True)
    return p * (dp - inner)


def _layernorm_forward_np(x, gain, bias, eps):
    mu = x.mean(axis=1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv_std
    return gain * xhat + bias, xhat, inv_std[:, 0]


def _layernorm_backward_np(dy, xhat, inv_std, gain):
    dgain = (dy * xhat).sum(axis=0)
    dbias = dy.sum(axis=0)
    dxhat = dy * gain
    m1 = dxhat.mean(axis=1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=1, keepdims=True)
    dx = inv_std[:, None] * (dxhat - m1 - xhat * m2)
    return dx, dgain, dbias


def _adam_update_np(param, grad, m, v, lr, beta1, beta2, eps, corr1, corr2):
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    param -= lr * (m * corr1) / (np.sqrt(v * corr2) + eps)


def _cross_entropy_rows_np(logits, targets, valid):
    mx = logits.max(axis=1, keepdims=True)
    e = np.exp(logits - mx)
    z = e.sum(axis=1, keepdims=True)
    probs = e / z
    rows = np.arange(logits.shape[0])
    lse = mx[:, 0] + np.log(z[:, 0])
    losses = (lse - logits[rows, targets]) * valid
    dlogits = probs
    dlogits[rows, targets] -= 1.0
    dlogits *= valid[:, None]
    return losses, dlogits


numpy_impl = KernelImpl(
    "numpy",
    _softmax_rows_np,
    _softmax_rows_backward_np,
    _layernorm_forward_np,
    _layernorm_backward_np,
    _adam_update_np,
    _cross_entropy_rows_np,
)


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None

numba_impl: KernelImpl | None = None

if njit is not None:

    @njit(cache=True)
    def _softmax_rows_nb(x):
        rows, cols = x.shape
        out = np.empty_like(x)
        for r in range(rows):
            mx = x[r, 0]
            for c in range(1, cols):
                if x[r, c] > mx:
                    mx = x[r, c]
            total = 0.0
            for c in range(cols):
                e = np.exp(x[r, c] - mx)
                out[r, c] = e
                total += e
            inv = 1.0 / total
            for c in range(cols):
                out[r, c] *= inv
        return out

    @njit(cache=True)
    def _softmax_rows_backward_nb(p, dp):
        rows, cols = p.shape
        out = np.empty_like(p)
        for r in range(rows):
            inner = 0.0
            for c in range(cols):
                inner += dp[r, c] * p[r, c]
            for c in range(cols):
                out[r, c] = p[r, c] * (dp[r, c] - inner)
        return out

    @njit(cache=True)
    def _layernorm_forward_nb(x, gain, bias, eps):
        rows, cols = x.shape
        y = np.empty_like(x)
        xhat = np.empty_like(x)
        inv_std = np.empty(rows, dtype=x.dtype)
        for r in range(rows):
            mu = 0.0
            for c in range(cols):
                mu += x[r, c]
            mu /= cols
            var = 0.0
            for c in range(cols):
                d = x[r, c] - mu
                var += d * d
            var /= cols
            istd = 1.0 / np.sqrt(var + eps)
            inv_std[r] = istd
            for c in range(cols):
                h = (x[r, c] - mu) * istd
                xhat[r, c] = h
                y[r, c] = gain[c] * h + bias[c]
        return y, xhat, inv_std

    @njit(cache=True)
    def _layernorm_backward_nb(dy, xhat, inv_std, gain):
        rows, cols = dy.shape
        dx = np.empty_like(dy)
        dgain = np.zeros(cols, dtype=dy.dtype)
        dbias = np.zeros(cols, dtype=dy.dtype)
        for r in range(rows):
            m1 = 0.0
            m2 = 0.0
            for c in range(cols):
                g = dy[r, c] * gain[c]
                m1 += g
                m2 += g * xhat[r, c]
                dgain[c] += dy[r, c] * xhat[r, c]
                dbias[c] += dy[r, c]
            m1 /= cols
            m2 /= cols
            for c in range(cols):
                dx[r, c] = inv_std[r] * (dy[r, c] * gain[c] - m1 - xhat[r, c] * m2)
        return dx, dgain, dbias

    @njit(cache=True)
    def _adam_update_nb(param, grad, m, v, lr, beta1, beta2, eps, corr1, corr2):
        for i in range(param.shape[0]):
            g = grad[i]
            m[i] = beta1 * m[i] + (1.0 - beta1) * g
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g
            param[i] -= lr * (m[i] * corr1) / (np.sqrt(v[i] * corr2) + eps)

    @njit(cache=True)
    def _cross_entropy_rows_nb(logits, targets, valid):
        rows, cols = logits.shape
        losses = np.zeros(rows, dtype=logits.dtype)
        dlogits = np.zeros_like(logits)
        for r in range(rows):
            if valid[r] == 0.0:
                continue
            mx = logits[r, 0]
            for c in range(1, cols):
                if logits[r, c] > mx:
                    mx = logits[r, c]
            total = 0.0
            for c in range(cols):
                e = np.exp(logits[r, c] - mx)
                dlogits[r, c] = e
                total += e
            inv = 1.0 / total
            for c in range(cols):
                dlogits[r, c] *= inv
            t = targets[r]
            losses[r] = mx + np.log(total) - logits[r, t]
            dlogits[r, t] -= 1.0
        return losses, dlogits

    numba_impl = KernelImpl(
        "numba",
        _softmax_rows_nb,
        _softmax_rows_backward_nb,
        _layernorm_forward_nb,
        _layernorm_backward_nb,
        _adam_update_nb,
        _cross_entropy_rows_nb,
    )


def _select_backend() -> KernelImpl:
    env = os.environ.get("METAPHOR_FORGE_NUMBA", "auto").strip().lower()
    if env in ("0", "off", "false", "no"):
        return numpy_impl
    if env in ("1", "on", "true", "yes", "force"):
        if numba_impl is None:
            raise RuntimeError(
                "METAPHOR_FORGE_NUMBA requests the numba backend but numba is not importable"
            )
        return numba_impl
    return numba_impl if numba_impl is not None else numpy_impl


_active = _select_backend()
BACKEND: str = _active.name

softmax_rows = _active.softmax_rows
softmax_rows_backward = _active.softmax_rows_backward
layernorm_forward = _active.layernorm_forward
layernorm_backward = _active.layernorm_backward
adam_update = _active.adam_update
cross_entropy_rows = _active.cross_entropy_rows
