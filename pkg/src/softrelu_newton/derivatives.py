"""Closed-form gradients of L and L_reg."""

from __future__ import annotations

import numpy as np

from .forward import EvalCache


def grad_L(inst, cache: EvalCache) -> np.ndarray:
    """Gradient of L as C^T (f*c - <c, f> f)."""
    f, c = cache.softmax, cache.residual
    return cache.c_matrix.T @ (f * c - float(c @ f) * f)


def grad_L_literal(inst, cache: EvalCache) -> np.ndarray:
    """Coordinate-by-coordinate gradient with the Hadamard products written out.

    dL/dx_i = <c, f o v_i> - <c, f> <f, v_i>,  v_i = A2 (1[A1 x] o A1[:, i]).
    Kept as an independent path for differential testing of :func:`grad_L`.
    """
    f, c, ind = cache.softmax, cache.residual, cache.indicator
    out = np.empty(inst.d)
    cf = float(c @ f)
    for i in range(inst.d):
        v = inst.a2 @ (ind * inst.a1[:, i])
        out[i] = float(c @ (f * v)) - cf * float(f @ v)
    return out


def grad_R(inst, cache: EvalCache) -> np.ndarray:
    cmat = cache.c_matrix
    return cmat.T @ (inst.w**2 * (cmat @ cache.x))


def grad_L_reg(inst, cache: EvalCache) -> np.ndarray:
    return grad_L(inst, cache) + grad_R(inst, cache)
