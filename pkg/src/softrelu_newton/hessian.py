"""Hessians of L, R and L_reg through the B-matrix decomposition.

Three computation paths are provided and kept deliberately separate:

* :func:`build_hessian` assembles ``C^T B C`` densely,
* :func:`hessian_entry` evaluates one entry as a quadratic form in the masked
  columns of ``A1`` without forming ``C``,
* :func:`hessian_six_term` evaluates one entry from the six inner products of
  the undecomposed second derivative.

Agreement between them is the numerical check of the decomposition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forward import EvalCache


@dataclass(frozen=True)
class HessianParts:
    c_matrix: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    b3: np.ndarray
    b4: np.ndarray
    b5: np.ndarray
    b_total: np.ndarray
    d_matrix: np.ndarray
    hess_L: np.ndarray
    hess_reg: np.ndarray
    hess_L_reg: np.ndarray


def b_terms(f: np.ndarray, c: np.ndarray):
    """The five m x m pieces of B(x) for softmax ``f`` and residual ``c``."""
    cf = c + f
    b1 = np.diag(f * cf)
    b2 = np.outer(f * cf, f)  # diag(f) (c+f) f^T
    b3 = np.outer(f, cf * f)  # f (c+f)^T diag(f)
    b4 = float((2 * c + f) @ f) * np.outer(f, f)
    b5 = float(c @ f) * np.diag(f)
    return b1, b2, b3, b4, b5


def b_matrix(f: np.ndarray, c: np.ndarray) -> np.ndarray:
    b1, b2, b3, b4, b5 = b_terms(f, c)
    return b1 - b2 - b3 + b4 - b5


def build_hessian(inst, cache: EvalCache) -> HessianParts:
    b1, b2, b3, b4, b5 = b_terms(cache.softmax, cache.residual)
    b = b1 - b2 - b3 + b4 - b5
    w2 = np.diag(inst.w**2)
    dmat = b + w2
    cmat = cache.c_matrix
    hess_L = cmat.T @ b @ cmat
    hess_reg = cmat.T @ w2 @ cmat
    hess_L_reg = cmat.T @ dmat @ cmat
    return HessianParts(
        c_matrix=cmat,
        b1=b1,
        b2=b2,
        b3=b3,
        b4=b4,
        b5=b5,
        b_total=b,
        d_matrix=dmat,
        hess_L=hess_L,
        hess_reg=hess_reg,
        hess_L_reg=hess_L_reg,
    )


def hess_L_reg(inst, cache: EvalCache) -> np.ndarray:
    return build_hessian(inst, cache).hess_L_reg


def _check_index(inst, i, j):
    for k in (i, j):
        if not 0 <= k < inst.d:
            raise IndexError(f"Hessian index {k} out of range for d={inst.d}")


def hessian_entry(inst, cache: EvalCache, i: int, j: int) -> float:
    """d^2 L / dx_i dx_j = A1_i^T diag(1) A2^T B A2 diag(1) A1_j."""
    _check_index(inst, i, j)
    ind = cache.indicator
    b = b_matrix(cache.softmax, cache.residual)
    left = inst.a2 @ (ind * inst.a1[:, i])
    right = inst.a2 @ (ind * inst.a1[:, j])
    return float(left @ b @ right)


def hessian_six_term(inst, cache: EvalCache, i: int, j: int) -> float:
    """The same entry from the six inner products before decomposition."""
    _check_index(inst, i, j)
    f, c, ind = cache.softmax, cache.residual, cache.indicator
    vi = inst.a2 @ (ind * inst.a1[:, i])
    vj = inst.a2 @ (ind * inst.a1[:, j])
    fvi, fvj = f * vi, f * vj
    f_dot_vi, f_dot_vj = float(f @ vi), float(f @ vj)
    t1 = float(fvi @ fvj)
    t2 = float(c @ (fvj * vi))
    t3 = float((c + f) @ fvi) * f_dot_vj
    t4 = float((c + f) @ fvj) * f_dot_vi
    t5 = float((2 * c + f) @ f) * f_dot_vj * f_dot_vi
    t6 = float(c @ f) * float(fvj @ vi)
    return t1 + t2 - t3 - t4 + t5 - t6
