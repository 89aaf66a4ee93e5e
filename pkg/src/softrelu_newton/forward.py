"""Point evaluation of h, u, alpha, f, c, L, R and L_reg."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

# exp(500) ~ 1.4e217 still fits in a double; beyond this u and alpha are not kept
EXACT_SCALE_LOGIT_MAX = 500.0


def relu_indicator(z: np.ndarray) -> np.ndarray:
    """0/1 float vector marking strictly positive entries (zero maps to 0)."""
    return (np.asarray(z) > 0).astype(np.float64)


def stable_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits)
    e = np.exp(shifted)
    return e / e.sum()


def log_sum_exp(logits: np.ndarray) -> float:
    top = np.max(logits)
    return float(top + np.log(np.exp(logits - top).sum()))


def _check_point(inst, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (inst.d,):
        raise DimensionError(f"x must have shape ({inst.d},), got {x.shape}")
    return x


def eval_c_matrix(inst, x) -> np.ndarray:
    """C = A2 diag(1[A1 x]) A1, with the diagonal applied as a row mask on A1."""
    x = _check_point(inst, x)
    ind = relu_indicator(inst.a1 @ x)
    return inst.a2 @ (ind[:, None] * inst.a1)


@dataclass(frozen=True)
class EvalCache:
    """Every per-point quantity, computed once.

    ``u`` and ``alpha`` are ``None`` when some logit exceeds
    ``EXACT_SCALE_LOGIT_MAX`` in magnitude (``exact_scale`` is then False);
    ``log_alpha`` and everything downstream of the softmax are always valid.
    """

    x: np.ndarray
    hidden: np.ndarray
    indicator: np.ndarray
    logits: np.ndarray
    u: np.ndarray | None
    alpha: float | None
    log_alpha: float
    softmax: np.ndarray
    residual: np.ndarray
    c_matrix: np.ndarray
    loss: float
    reg: float
    loss_reg: float

    @property
    def exact_scale(self) -> bool:
        return self.u is not None

    @property
    def active_count(self) -> int:
        return int(self.indicator.sum())


def eval_point(inst, x) -> EvalCache:
    x = _check_point(inst, x)
    pre = inst.a1 @ x
    ind = relu_indicator(pre)
    hidden = np.maximum(pre, 0.0)
    logits = inst.a2 @ hidden
    f = stable_softmax(logits)
    if np.max(np.abs(logits)) <= EXACT_SCALE_LOGIT_MAX:
        u = np.exp(logits)
        alpha = float(u.sum())
    else:
        u, alpha = None, None
    c = f - inst.b
    cmat = inst.a2 @ (ind[:, None] * inst.a1)
    loss = 0.5 * float(c @ c)
    wcx = inst.w * (cmat @ x)
    reg = 0.5 * float(wcx @ wcx)
    return EvalCache(
        x=x,
        hidden=hidden,
        indicator=ind,
        logits=logits,
        u=u,
        alpha=alpha,
        log_alpha=log_sum_exp(logits),
        softmax=f,
        residual=c,
        c_matrix=cmat,
        loss=loss,
        reg=reg,
        loss_reg=loss + reg,
    )


# the module-level name used throughout the docs and CLI
eval = eval_point  # noqa: A001


def loss(inst, x) -> float:
    return eval_point(inst, x).loss


def loss_reg(inst, x) -> float:
    return eval_point(inst, x).loss_reg
