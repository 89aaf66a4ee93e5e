"""Approximate Newton (sketched or exact, undamped by default) and damped Newton
measured in loss value, both on L_reg."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .bounds import compute_bounds
from .derivatives import grad_L_reg
from .errors import ConvergenceFailure, InvalidRange, NotPD
from .forward import eval_point
from .hessian import build_hessian
from .sketch import SketchConfig, sketch_pd_form

APPROX_RATE = 0.4
# relative tolerance when rounding an iteration bound up, so exact integers stay put
CEIL_RTOL = 1e-9
REFERENCE_GRAD_TOL = 1e-12
# the per-step gap ratio is meaningless once gaps reach the roundoff of L_reg
GAP_RATIO_FLOOR = 1e-12
TRACE_HEADER = ("t", "loss_reg", "grad_norm", "dist_to_opt", "loss_gap", "step_kind")


class Mode(str, enum.Enum):
    APPROX = "approx"
    LOSS = "loss"


class StepKind(str, enum.Enum):
    EXACT = "Exact"
    SKETCHED = "Sketched"


@dataclass(frozen=True)
class SolverConfig:
    """Solver hyperparameters.

    ``eta=None`` picks the default step: 1 for approximate Newton, ``1/N`` for
    loss Newton with ``N`` from :func:`bounds.compute_bounds` at ``pd_l``.
    """

    mode: Mode = Mode.APPROX
    eta: float | None = None
    max_iters: int = 100
    grad_tol: float = 1e-12
    eps: float = 1e-10
    sketch: SketchConfig | None = None
    seed: int = 0
    pd_l: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.eta is not None and not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.grad_tol < 0:
            raise ValueError("grad_tol must be non-negative")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not self.pd_l > 0:
            raise ValueError("pd_l must be positive")
        if self.sketch is not None and self.mode is not Mode.APPROX:
            raise ValueError("sketching is only supported in approx mode")

    def step_size(self, inst) -> float:
        if self.eta is not None:
            return float(self.eta)
        if self.mode is Mode.APPROX:
            return 1.0
        return 1.0 / compute_bounds(inst, self.pd_l, inst.radius).n_const


@dataclass(frozen=True)
class IterRecord:
    t: int
    x: np.ndarray
    loss_reg: float
    grad_norm: float
    dist_to_opt: float | None
    loss_gap: float | None
    step_kind: StepKind
    # g^T H^{-1} g with the matrix actually used; None on the final record
    decrement: float | None = None
    sketch_ok: bool | None = None


@dataclass
class ConvergenceTrace:
    iterates: list[IterRecord] = field(default_factory=list)
    converged: bool = False
    iterations_used: int = 0
    ball_exit: bool = False
    eta: float = 1.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for r in self.iterates:
            writer.writerow(
                [
                    r.t,
                    repr(r.loss_reg),
                    repr(r.grad_norm),
                    "" if r.dist_to_opt is None else repr(r.dist_to_opt),
                    "" if r.loss_gap is None else repr(r.loss_gap),
                    r.step_kind.value,
                ]
            )
        return buf.getvalue()


def solve_pd(h: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Solve H p = g by Cholesky; a failed factorization raises NotPD."""
    try:
        factor = scipy.linalg.cho_factor(h, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise NotPD(f"Hessian factorization failed: {exc}") from exc
    return scipy.linalg.cho_solve(factor, g)


def _iterate(inst, x0, cfg: SolverConfig, x_star, l_min) -> ConvergenceTrace:
    x = np.array(x0, dtype=np.float64)
    if x.shape != (inst.d,):
        raise ValueError(f"x0 must have length {inst.d}")
    eta = cfg.step_size(inst)
    kind = StepKind.SKETCHED if cfg.sketch is not None else StepKind.EXACT
    rng = np.random.default_rng(cfg.seed)
    trace = ConvergenceTrace(eta=eta)
    x_star = None if x_star is None else np.asarray(x_star, dtype=np.float64)

    t = 0
    while True:
        cache = eval_point(inst, x)
        g = grad_L_reg(inst, cache)
        gnorm = float(np.linalg.norm(g))
        dist = None if x_star is None else float(np.linalg.norm(x - x_star))
        gap = None if l_min is None else float(cache.loss_reg - l_min)
        if np.linalg.norm(x) > inst.radius:
            trace.ball_exit = True

        done = gnorm <= cfg.grad_tol
        if cfg.mode is Mode.LOSS and gap is not None and gap <= cfg.eps:
            done = True
        if done or t >= cfg.max_iters:
            trace.iterates.append(IterRecord(t, x.copy(), cache.loss_reg, gnorm, dist, gap, kind))
            trace.converged = done
            break

        parts = build_hessian(inst, cache)
        sketch_ok = None
        if cfg.sketch is None:
            h = parts.hess_L_reg
        else:
            res = sketch_pd_form(parts.c_matrix, parts.d_matrix, cfg.sketch, rng=rng)
            h, sketch_ok = res.h_tilde, res.sandwich_ok
        p = solve_pd(h, g)
        trace.iterates.append(
            IterRecord(t, x.copy(), cache.loss_reg, gnorm, dist, gap, kind, float(g @ p), sketch_ok)
        )
        x = x - eta * p
        t += 1
    trace.iterations_used = t
    return trace


def approx_newton_solve(inst, x0, cfg: SolverConfig, x_star=None, l_min=None) -> ConvergenceTrace:
    """x <- x - eta * H~^{-1} g, with H~ the sketched or exact Hessian of L_reg."""
    if cfg.mode is not Mode.APPROX:
        raise ValueError("config mode must be approx")
    return _iterate(inst, x0, cfg, x_star, l_min)


def loss_newton_solve(inst, x0, cfg: SolverConfig, x_star=None, l_min=None) -> ConvergenceTrace:
    """Damped exact Newton; also stops once ``loss_reg - l_min <= eps``."""
    if cfg.mode is not Mode.LOSS:
        raise ValueError("config mode must be loss")
    return _iterate(inst, x0, cfg, x_star, l_min)


def solve(inst, x0, cfg: SolverConfig, x_star=None, l_min=None) -> ConvergenceTrace:
    return _iterate(inst, x0, cfg, x_star, l_min)


def _ceil(v: float) -> int:
    return max(0, math.ceil(v - CEIL_RTOL * max(1.0, abs(v))))


def predict_iterations(mode, eps: float, dist0: float | None = None, gap0: float | None = None,
                       n_const: float | None = None) -> int:
    """Iteration bound from the proven rates.

    approx: ceil(log(dist0/eps) / log(1/0.4)); loss: ceil(N^2 ln(gap0/eps)).
    """
    mode = Mode(mode)
    if not eps > 0:
        raise InvalidRange("eps must be positive")
    if mode is Mode.APPROX:
        if dist0 is None:
            raise ValueError("approx mode needs dist0")
        if eps >= dist0:
            raise InvalidRange("eps must be smaller than dist0")
        return _ceil(math.log(dist0 / eps) / math.log(1.0 / APPROX_RATE))
    if gap0 is None or n_const is None:
        raise ValueError("loss mode needs gap0 and n_const")
    if n_const < 1:
        raise InvalidRange("N must be >= 1")
    if gap0 <= eps:
        return 0
    return _ceil(n_const**2 * math.log(gap0 / eps))


@dataclass(frozen=True)
class ReferenceOptimum:
    x: np.ndarray
    loss_reg: float
    grad_norm: float
    restarts_converged: int


def reference_optimum(inst, starts=None, restarts: int = 8, seed: int = 0,
                      tol: float = REFERENCE_GRAD_TOL, max_iters: int = 100) -> ReferenceOptimum:
    """Exact undamped Newton from several starts, keeping the lowest converged loss.

    Default starts: ``inst.x_ref`` (if set) followed by ``restarts`` random
    points inside half the ball.
    """
    if starts is None:
        rng = np.random.default_rng(seed)
        starts = [] if inst.x_ref is None else [inst.x_ref]
        for _ in range(restarts):
            v = rng.standard_normal(inst.d)
            starts.append(v / np.linalg.norm(v) * 0.5 * inst.radius * rng.random())
    cfg = SolverConfig(mode=Mode.APPROX, eta=1.0, max_iters=max_iters, grad_tol=tol)
    best = None
    hits = 0
    for x0 in starts:
        try:
            tr = approx_newton_solve(inst, x0, cfg)
        except NotPD:
            continue
        if not tr.converged:
            continue
        hits += 1
        last = tr.iterates[-1]
        if best is None or last.loss_reg < best.loss_reg:
            best = last
    if best is None:
        raise ConvergenceFailure(f"no start reached ||g|| <= {tol:g}")
    return ReferenceOptimum(best.x.copy(), float(best.loss_reg), float(best.grad_norm), hits)


@dataclass
class LossGuaranteeReport:
    """Violations of the three loss-Newton properties along one trace, as step indices."""

    n_const: float
    eta: float
    monotone: list[int] = field(default_factory=list)
    descent: list[int] = field(default_factory=list)
    ratio: list[int] = field(default_factory=list)
    sandwich: list[int] = field(default_factory=list)
    ratio_checked: int = 0
    worst_ratio: float = -math.inf

    @property
    def ok(self) -> bool:
        return not (self.monotone or self.descent or self.ratio or self.sandwich)


def check_loss_guarantees(trace: ConvergenceTrace, n_const: float, slack: float = 1e-9) -> LossGuaranteeReport:
    """Check monotone loss, the descent inequality, the gap ratio and the sandwich.

    Needs ``loss_gap`` on every record. The ratio is only checked while the
    current gap exceeds ``GAP_RATIO_FLOOR``.
    """
    eta = trace.eta
    rep = LossGuaranteeReport(n_const=n_const, eta=eta)
    recs = trace.iterates
    if any(r.loss_gap is None for r in recs):
        raise ValueError("trace has no loss gaps; pass l_min to the solver")
    rate = 1.0 - 1.0 / n_const**2
    for cur in recs:
        if cur.decrement is None:
            continue
        lo, hi = (2.0 / n_const) * cur.loss_gap, 2.0 * n_const * cur.loss_gap
        if not (lo - slack <= cur.decrement <= hi + slack):
            rep.sandwich.append(cur.t)
    for cur, nxt in zip(recs, recs[1:]):
        if nxt.loss_reg > cur.loss_reg:
            rep.monotone.append(cur.t)
        if nxt.loss_reg - cur.loss_reg > -(eta - 0.5 * n_const * eta**2) * cur.decrement + slack:
            rep.descent.append(cur.t)
        if cur.loss_gap > GAP_RATIO_FLOOR:
            rep.ratio_checked += 1
            r = nxt.loss_gap / cur.loss_gap
            rep.worst_ratio = max(rep.worst_ratio, r)
            if r > rate + slack:
                rep.ratio.append(cur.t)
    return rep
