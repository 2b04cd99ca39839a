"""Deterministic dense kernels and differentiable layer primitives.

All reductions (matrix products, column sums, batch statistics) run in
numba-compiled loops with a fixed ascending-index summation order, so a
given input produces bit-identical output on every run and on every
machine with the same float64 semantics.  BLAS is deliberately avoided:
its reduction order is unspecified and varies between builds.

Everything here is pure: identical inputs give bit-identical outputs,
and nothing is mutated except where an operation's contract says so
(train-mode batchnorm updates running statistics in place).
"""

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import DegenerateBatchError, NumericsError, ShapeError

__all__ = [
    "BatchNormState",
    "GradCheckReport",
    "matmul",
    "linear_forward",
    "linear_backward",
    "relu_forward",
    "relu_backward",
    "batchnorm_forward",
    "batchnorm_backward",
    "grad_check",
    "col_sum",
    "as_matrix",
]


# ---------------------------------------------------------------------------
# numba kernels


@njit(cache=True)
def _mm(a, b):
    # c[i, j] = sum over p ascending of a[i, p] * b[p, j].
    # The p-loop is hoisted outside j for locality; each c[i, j] still
    # accumulates in strictly ascending p order, so the result is
    # bit-identical to the naive triple loop.
    n, k = a.shape
    m = b.shape[1]
    out = np.zeros((n, m))
    for i in range(n):
        for p in range(k):
            aip = a[i, p]
            for j in range(m):
                out[i, j] += aip * b[p, j]
    return out


@njit(cache=True)
def _col_sum(x):
    n, q = x.shape
    out = np.zeros(q)
    for i in range(n):
        for j in range(q):
            out[j] += x[i, j]
    return out


@njit(cache=True)
def _bn_batch_stats(x):
    # Per-column mean and biased variance (divisor B), ascending rows.
    n, q = x.shape
    mean = np.zeros(q)
    var = np.zeros(q)
    for i in range(n):
        for j in range(q):
            mean[j] += x[i, j]
    for j in range(q):
        mean[j] /= n
    for i in range(n):
        for j in range(q):
            d = x[i, j] - mean[j]
            var[j] += d * d
    for j in range(q):
        var[j] /= n
    return mean, var


@njit(cache=True)
def _bn_backward_reductions(xhat, dxhat):
    # sum(dxhat) and sum(dxhat * xhat) per column, ascending rows.
    n, q = xhat.shape
    s1 = np.zeros(q)
    s2 = np.zeros(q)
    for i in range(n):
        for j in range(q):
            s1[j] += dxhat[i, j]
            s2[j] += dxhat[i, j] * xhat[i, j]
    return s1, s2


# ---------------------------------------------------------------------------
# public types


@dataclass
class BatchNormState:
    """Affine parameters plus running statistics for one BN layer."""

    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    eps: float = 1e-5
    bn_momentum: float = 0.1

    @classmethod
    def fresh(cls, q: int) -> "BatchNormState":
        return cls(np.ones(q), np.zeros(q), np.zeros(q), np.ones(q))

    def copy(self) -> "BatchNormState":
        return BatchNormState(
            self.gamma.copy(), self.beta.copy(),
            self.running_mean.copy(), self.running_var.copy(),
            self.eps, self.bn_momentum,
        )


@dataclass
class GradCheckReport:
    max_rel_error: float
    per_parameter_errors: list = field(default_factory=list)
    passed: bool = False


# ---------------------------------------------------------------------------
# helpers


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    """Coerce to a C-contiguous float64 2-D array, validating finiteness."""
    a = np.ascontiguousarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise NumericsError(f"{name} contains non-finite entries")
    return a


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """c = a @ b with ascending-index accumulation (bit-reproducible)."""
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    return _mm(np.ascontiguousarray(a, dtype=np.float64),
               np.ascontiguousarray(b, dtype=np.float64))


def col_sum(x: np.ndarray) -> np.ndarray:
    """Column sums with ascending-row accumulation."""
    return _col_sum(np.ascontiguousarray(x, dtype=np.float64))


# ---------------------------------------------------------------------------
# layer primitives


def linear_forward(x: np.ndarray, w: np.ndarray, bias: np.ndarray) -> np.ndarray:
    if x.shape[1] != w.shape[0]:
        raise ShapeError(f"linear: x {x.shape} incompatible with w {w.shape}")
    if bias.shape != (w.shape[1],):
        raise ShapeError(f"linear: bias {bias.shape} incompatible with w {w.shape}")
    return matmul(x, w) + bias


def linear_backward(x, w, grad_y):
    if grad_y.shape != (x.shape[0], w.shape[1]):
        raise ShapeError(f"linear backward: grad_y {grad_y.shape} vs x {x.shape}, w {w.shape}")
    grad_x = matmul(grad_y, np.ascontiguousarray(w.T))
    grad_w = matmul(np.ascontiguousarray(x.T), grad_y)
    grad_bias = col_sum(grad_y)
    return grad_x, grad_w, grad_bias


def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(x: np.ndarray, grad_y: np.ndarray) -> np.ndarray:
    # Subgradient at exactly 0 is defined as 0.
    return np.where(x > 0.0, grad_y, 0.0)


def batchnorm_forward(x: np.ndarray, st: BatchNormState, mode: str):
    """Normalize x per column; returns (y, cache).

    Train mode uses batch statistics (biased variance, divisor B) and
    updates the running statistics in place; eval mode reads the running
    statistics and mutates nothing.  cache is None in eval mode.
    """
    if x.shape[1] != st.gamma.shape[0]:
        raise ShapeError(f"batchnorm: x has {x.shape[1]} columns, state has {st.gamma.shape[0]}")
    if mode == "train":
        if x.shape[0] < 2:
            raise DegenerateBatchError(f"train-mode batchnorm needs B >= 2, got B={x.shape[0]}")
        mean, var = _bn_batch_stats(np.ascontiguousarray(x, dtype=np.float64))
        std = np.sqrt(var + st.eps)
        xhat = (x - mean) / std
        y = st.gamma * xhat + st.beta
        q = st.bn_momentum
        st.running_mean[:] = (1.0 - q) * st.running_mean + q * mean
        st.running_var[:] = (1.0 - q) * st.running_var + q * var
        cache = (xhat, std, st.gamma.copy())
        return y, cache
    if mode == "eval":
        xhat = (x - st.running_mean) / np.sqrt(st.running_var + st.eps)
        return st.gamma * xhat + st.beta, None
    raise ValueError(f"unknown batchnorm mode {mode!r}")


def batchnorm_backward(cache, grad_y):
    """Gradients through a train-mode batchnorm.

    With xhat = (x - mu) / std and the batch statistics as functions of
    x, the chain rule collapses to
        dx = (1/B) / std * (B*dxhat - sum(dxhat) - xhat * sum(dxhat*xhat))
    per column.
    """
    if cache is None:
        raise ShapeError("batchnorm backward needs a train-mode cache")
    xhat, std, gamma = cache
    if grad_y.shape != xhat.shape:
        raise ShapeError(f"batchnorm backward: grad_y {grad_y.shape} vs cache {xhat.shape}")
    B = xhat.shape[0]
    dxhat = grad_y * gamma
    s1, s2 = _bn_backward_reductions(
        np.ascontiguousarray(xhat), np.ascontiguousarray(dxhat))
    grad_x = (1.0 / B) / std * (B * dxhat - s1 - xhat * s2)
    grad_gamma = col_sum(grad_y * xhat)
    grad_beta = col_sum(grad_y)
    return grad_x, grad_gamma, grad_beta


# ---------------------------------------------------------------------------
# finite-difference gradient checking


def grad_check(eval_fn, params: dict, tol: float = 1e-5) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    eval_fn(params) must return (loss: float, grads: dict) with grads
    keyed like params.  The finite-difference step is scaled per entry
    as h = 1e-6 * max(1, |p|); relative error is
    |a - n| / max(1e-4, |a| + |n|).  The denominator floor acts as an
    absolute tolerance for near-zero gradients (a bias feeding a
    batchnorm has a mathematically zero gradient, and both sides are
    pure float noise there), exactly the atol+rtol convention of the
    usual autograd checkers.
    """
    loss0, grads = eval_fn(params)
    if not np.isfinite(loss0):
        raise NumericsError(f"grad_check aborted: loss is {loss0}")
    report = GradCheckReport(max_rel_error=0.0)
    for name, p in params.items():
        a = np.atleast_1d(np.asarray(grads[name], dtype=np.float64))
        flat = np.atleast_1d(p).reshape(-1)
        worst = 0.0
        for idx in range(flat.size):
            orig = flat[idx]
            h = 1e-6 * max(1.0, abs(orig))
            flat[idx] = orig + h
            lp, _ = eval_fn(params)
            flat[idx] = orig - h
            lm, _ = eval_fn(params)
            flat[idx] = orig
            if not (np.isfinite(lp) and np.isfinite(lm)):
                raise NumericsError(f"grad_check aborted: non-finite loss perturbing {name}[{idx}]")
            numeric = (lp - lm) / (2.0 * h)
            analytic = a.reshape(-1)[idx]
            rel = abs(analytic - numeric) / max(1e-4, abs(analytic) + abs(numeric))
            worst = max(worst, rel)
        report.per_parameter_errors.append((name, worst))
        report.max_rel_error = max(report.max_rel_error, worst)
    report.passed = report.max_rel_error < tol
    return report
