"""Composite distillation objective.

Two views of the same feature matrices:

* instance loss -- one minus the mean row-wise cosine between teacher
  and student features (each sample keeps its direction);
* space loss -- the same quantity computed on the transposed matrices
  (each latent dimension keeps its activation pattern across the batch).

Both are ``1 - mean cosine`` so they live in [0, 2], and both gradients
flow only into the student (the teacher is a constant target).  Rows or
columns whose norm falls below ``EPS`` contribute cosine 0 with zero
gradient and are tallied in a degeneracy counter rather than producing
NaNs.  Features enter raw: no L2 pre-normalization, since rescaling
carries the geometry these losses are meant to preserve.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ShapeError

EPS = 1e-12

__all__ = ["EPS", "LossValue", "cos_loss", "space_loss", "total_loss"]


@dataclass
class LossValue:
    total: float
    cos_component: float
    space_component: float
    lam: float


@njit(cache=True)
def _cos_core(t, s, eps):
    """Mean row cosine of t vs s and d(loss)/d(s); ascending-index sums.

    Returns (cos_sum, grad, n_degenerate).  Loss is 1 - cos_sum/B and the
    grad already includes the -1/B factor.
    """
    B, d = t.shape
    grad = np.zeros((B, d))
    cos_sum = 0.0
    ndegen = 0
    for i in range(B):
        dot = 0.0
        nt2 = 0.0
        ns2 = 0.0
        for j in range(d):
            tv = t[i, j]
            sv = s[i, j]
            dot += tv * sv
            nt2 += tv * tv
            ns2 += sv * sv
        nt = np.sqrt(nt2)
        ns = np.sqrt(ns2)
        if nt < eps or ns < eps:
            ndegen += 1
            continue
        den = nt * ns
        c = dot / den
        # rounding can push |c| a hair past 1; clamp the value (the true
        # gradient at a parallel pair is 0 anyway, no clamp needed there)
        if c > 1.0:
            c = 1.0
        elif c < -1.0:
            c = -1.0
        cos_sum += c
        for j in range(d):
            grad[i, j] = -(t[i, j] / den - (c / ns2) * s[i, j]) / B
    return cos_sum, grad, ndegen


def _check_shapes(f_teacher, f_student):
    if f_teacher.shape != f_student.shape:
        raise ShapeError(
            f"teacher features {f_teacher.shape} vs student features {f_student.shape}")
    if f_teacher.ndim != 2 or f_teacher.shape[0] < 1 or f_teacher.shape[1] < 1:
        raise ShapeError(f"features must be non-empty 2-D, got {f_teacher.shape}")


def cos_loss(f_teacher: np.ndarray, f_student: np.ndarray):
    """Instance-level loss: 1 - mean row cosine.

    Returns (loss, grad_student, n_degenerate).  grad is with respect to
    the student only; the teacher is treated as a constant.
    """
    _check_shapes(f_teacher, f_student)
    t = np.ascontiguousarray(f_teacher, dtype=np.float64)
    s = np.ascontiguousarray(f_student, dtype=np.float64)
    B = t.shape[0]
    cos_sum, grad, ndegen = _cos_core(t, s, EPS)
    return 1.0 - cos_sum / B, grad, ndegen


def space_loss(f_teacher: np.ndarray, f_student: np.ndarray):
    """Dimension-level loss: cos_loss on the transposed matrices.

    The cosine runs over each latent dimension's activation pattern
    across the batch; the duality space_loss(A, B) == cos_loss(A.T, B.T)
    holds bit-exactly by construction.
    """
    _check_shapes(f_teacher, f_student)
    t = np.ascontiguousarray(f_teacher.T, dtype=np.float64)
    s = np.ascontiguousarray(f_student.T, dtype=np.float64)
    d = t.shape[0]
    cos_sum, grad_t, ndegen = _cos_core(t, s, EPS)
    return 1.0 - cos_sum / d, np.ascontiguousarray(grad_t.T), ndegen


def total_loss(f_teacher: np.ndarray, f_student: np.ndarray, lam: float):
    """Weighted objective: cos + lam * space.

    Returns (LossValue, grad_student, n_degenerate); the counter sums the
    degenerate rows of the instance term and degenerate columns of the
    space term.  Both components are always evaluated (an ablation that
    weights one at zero still wants to see the other's value).
    """
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    cv, cg, cd = cos_loss(f_teacher, f_student)
    sv, sg, sd = space_loss(f_teacher, f_student)
    value = LossValue(
        total=cv + lam * sv,
        cos_component=cv,
        space_component=sv,
        lam=lam,
    )
    return value, cg + lam * sg, cd + sd
