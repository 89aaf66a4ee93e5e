"""Finite-difference oracles, independent of every closed-form path."""

from __future__ import annotations

import numpy as np

FD_GRAD_STEP = 1e-5
FD_HESS_STEP = 1e-4


def fd_gradient(func, x, h: float = FD_GRAD_STEP) -> np.ndarray:
    """Central differences (func(x + h e_i) - func(x - h e_i)) / 2h."""
    if h <= 0:
        raise ValueError("step h must be positive")
    x = np.asarray(x, dtype=np.float64)
    out = np.empty(x.size)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (func(x + e) - func(x - e)) / (2 * h)
    return out


def fd_hessian(grad, x, h: float = FD_HESS_STEP) -> np.ndarray:
    """Central differences of a gradient map, symmetrized."""
    if h <= 0:
        raise ValueError("step h must be positive")
    x = np.asarray(x, dtype=np.float64)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((np.asarray(grad(x + e)) - np.asarray(grad(x - e))) / (2 * h))
    jac = np.column_stack(cols)
    return 0.5 * (jac + jac.T)


def kink_distance(inst, x) -> float:
    """Smallest |(A1 x)_i|: how far x is from the nearest ReLU switch."""
    return float(np.min(np.abs(inst.a1 @ np.asarray(x, dtype=np.float64))))
