"""Theoretical constants and their empirical verification.

Every constant is evaluated at ``R_eff = max(||A1||, ||A2||, probe radius)``
rather than at a nominal ``R > 4``: the proofs go through verbatim for the
actual norms and the constants are monotone in ``R``, whereas ``exp(5 R^3)``
at ``R > 4`` makes every check vacuous.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .derivatives import grad_L, grad_L_reg
from .forward import eval_point, loss, loss_reg
from .hessian import build_hessian, hessian_entry, hessian_six_term
from .instance import ProblemInstance, sigma_min

# relative slack on upper/lower bound comparisons, for roundoff only
ROUNDOFF_RTOL = 1e-12
PD_RTOL = 1e-8
DECOMP_TOL = 1e-10
FD_GRAD_RTOL = 1e-6
FD_HESS_RTOL = 5e-3
R_EFF_NOTE = (
    "all constants use R_eff = max(||A1||, ||A2||, ball radius) in place of the "
    "nominal R > 4"
)


DOUBLE_MAX = float(np.finfo(np.float64).max)


def _clamp(v: float) -> float:
    return min(v, DOUBLE_MAX)


def saturating_exp(v: float) -> tuple[float, bool]:
    """exp(v), clamped to the largest double with a flag instead of overflowing."""
    try:
        return math.exp(v), False
    except OverflowError:
        return DOUBLE_MAX, True


@dataclass(frozen=True)
class TheoreticalBounds:
    r_eff: float
    h_bound: float
    u_bound: float
    beta_bound: float
    f_bound: float
    c_bound: float
    b_norm_bound: float
    b_psd_bound: float
    lipschitz_m: float
    pd_l: float
    w_sq_max: float
    n_const: float
    f_lip: float
    saturated: tuple[str, ...] = ()

    @property
    def n_below_one(self) -> bool:
        return self.n_const < 1

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def compute_bounds(inst: ProblemInstance, l: float, probe_radius: float | None = None) -> TheoreticalBounds:
    if l <= 0:
        raise ValueError("l must be positive")
    if probe_radius is None:
        probe_radius = inst.radius
    r = max(np.linalg.norm(inst.a1, 2), np.linalg.norm(inst.a2, 2), probe_radius)
    n, m, d = inst.n, inst.m, inst.d
    sat = []
    e3, s = saturating_exp(r**3)
    if s:
        sat.append("u_bound")
    e4, s = saturating_exp(4 * r**3)
    if s:
        sat.append("f_lip")
    e5, s = saturating_exp(5 * r**3)
    if s:
        sat.append("lipschitz_m")
    poly = m**1.5 * math.sqrt(n * d)
    w_sq_max = inst.w_sq_max
    return TheoreticalBounds(
        r_eff=float(r),
        h_bound=float(r**2),
        u_bound=_clamp(math.sqrt(m) * e3),
        beta_bound=math.exp(-(r**3)),
        f_bound=1.0,
        c_bound=2.0,
        b_norm_bound=16.0,
        b_psd_bound=20.0,
        lipschitz_m=_clamp(poly * e5),
        pd_l=float(l),
        w_sq_max=w_sq_max,
        n_const=r**4 * (16.0 + w_sq_max) / l,
        f_lip=_clamp(2 * r**2 * poly * e4),
        saturated=tuple(sat),
    )


# -- empirical verification -----------------------------------------------------


@dataclass
class Check:
    """Running tally for one assertion.

    ``worst_margin`` is the smallest (bound - value) seen for upper bounds and
    (value - bound) for lower bounds; ``worst_ratio`` is value/bound (upper)
    or bound/value (lower), so a ratio above 1 is a violation.
    """

    name: str
    theoretical_constant: float
    upper: bool = True
    samples: int = 0
    passes: int = 0
    skipped: int = 0
    worst_margin: float = math.inf
    worst_ratio: float = -math.inf
    skip_reasons: dict[str, int] = field(default_factory=dict)

    def record(self, value: float, bound: float | None = None) -> bool:
        bound = self.theoretical_constant if bound is None else bound
        slack = ROUNDOFF_RTOL * max(abs(bound), 1.0)
        if self.upper:
            margin = bound - value
            ratio = value / bound if bound else math.inf
        else:
            margin = value - bound
            ratio = bound / value if value > 0 else math.inf
        ok = margin >= -slack
        self.samples += 1
        self.passes += int(ok)
        self.worst_margin = min(self.worst_margin, margin)
        self.worst_ratio = max(self.worst_ratio, ratio)
        return ok

    def skip(self, reason: str = "hypothesis"):
        self.skipped += 1
        self.skip_reasons[reason] = self.skip_reasons.get(reason, 0) + 1

    @property
    def failures(self) -> int:
        return self.samples - self.passes

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "samples": self.samples,
            "passes": self.passes,
            "skipped": self.skipped,
            "skip_reasons": dict(sorted(self.skip_reasons.items())),
            "worst_margin": None if self.samples == 0 else self.worst_margin,
            "worst_ratio": None if self.samples == 0 else self.worst_ratio,
            "theoretical_constant": self.theoretical_constant,
        }


@dataclass
class BoundsReport:
    bounds: TheoreticalBounds
    checks: dict[str, Check]
    note: str = R_EFF_NOTE

    @property
    def ok(self) -> bool:
        return all(c.failures == 0 for c in self.checks.values())

    def to_dict(self) -> dict:
        return {
            "note": self.note,
            "ok": self.ok,
            "bounds": self.bounds.to_dict(),
            "checks": [self.checks[k].to_dict() for k in sorted(self.checks)],
        }


def sample_ball(rng, d: int, radius: float, count: int) -> np.ndarray:
    """Uniform points in the d-ball: Gaussian direction, radius * U^(1/d)."""
    g = rng.standard_normal((count, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(count) ** (1.0 / d)
    return g * r[:, None]


def pd_qualifies(inst: ProblemInstance, cache, l: float) -> str | None:
    """Why the positive-definiteness hypotheses fail at this point, or None if they hold.

    Needs more than max(m, d) active units (theta > 1/xi), a full-rank C and
    w_i^2 >= 20 + l / sigma_min(C)^2 for every i.
    """
    smin = sigma_min(cache.c_matrix)
    if smin <= 1e-10 * np.linalg.norm(cache.c_matrix, 2) or smin == 0:
        return "rank"
    if cache.active_count <= max(inst.m, inst.d):
        return "theta"
    if np.any(inst.w**2 < 20.0 + l / smin**2):
        return "weights"
    return None


def verify_bounds(
    inst: ProblemInstance,
    samples: int = 100,
    seed: int = 0,
    l: float = 1.0,
    pair_shrink: float = 0.05,
) -> BoundsReport:
    """Sample the ball and test every proven bound at every sample.

    Lipschitz checks use pairs ``(x, x + delta)`` with the same ReLU pattern;
    the N-constant check pairs consecutive samples where the first satisfies
    the PD hypotheses. Hypothesis failures are counted as ``skipped``, never
    as violations.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    tb = compute_bounds(inst, l, inst.radius)
    rng = np.random.default_rng(seed)
    checks = {
        "h_norm": Check("h_norm", tb.h_bound),
        "alpha_lower": Check("alpha_lower", tb.beta_bound, upper=False),
        "f_norm": Check("f_norm", tb.f_bound),
        "c_norm": Check("c_norm", tb.c_bound),
        "b_norm": Check("b_norm", tb.b_norm_bound),
        "b_spectrum": Check("b_spectrum", tb.b_psd_bound),
        "hess_reg_pd": Check("hess_reg_pd", l * (1 - PD_RTOL), upper=False),
        "hess_lipschitz": Check("hess_lipschitz", tb.lipschitz_m),
        "f_lipschitz": Check("f_lipschitz", tb.f_lip),
        "hess_ratio_n": Check("hess_ratio_n", tb.n_const),
    }
    points = sample_ball(rng, inst.d, tb.r_eff, samples)
    prev_pd_hess = None
    for x in points:
        cache = eval_point(inst, x)
        parts = build_hessian(inst, cache)
        checks["h_norm"].record(float(np.linalg.norm(cache.hidden)))
        # compare in the log domain so large logits cannot overflow
        log_beta = -(tb.r_eff**3)
        checks["alpha_lower"].record(math.exp(cache.log_alpha - log_beta), 1.0)
        checks["f_norm"].record(float(np.linalg.norm(cache.softmax)))
        checks["c_norm"].record(float(np.linalg.norm(cache.residual)))
        b_eigs = np.linalg.eigvalsh(parts.b_total)
        checks["b_norm"].record(float(np.max(np.abs(b_eigs))))
        checks["b_spectrum"].record(float(max(-b_eigs[0], b_eigs[-1])))

        hess = parts.hess_L_reg
        why_not = pd_qualifies(inst, cache, l)
        if why_not is None:
            checks["hess_reg_pd"].record(float(np.linalg.eigvalsh(hess)[0]))
        else:
            checks["hess_reg_pd"].skip(why_not)

        # same-indicator partner
        partner = None
        step = pair_shrink * max(np.linalg.norm(x), 1e-12)
        for _ in range(20):
            y = x + step * rng.standard_normal(inst.d)
            if np.linalg.norm(y) <= tb.r_eff and np.array_equal(
                (inst.a1 @ y) > 0, cache.indicator > 0
            ):
                partner = y
                break
            step *= 0.5
        if partner is None:
            checks["hess_lipschitz"].skip("no_partner")
            checks["f_lipschitz"].skip("no_partner")
        else:
            cy = eval_point(inst, partner)
            dist = float(np.linalg.norm(x - partner))
            dh = np.linalg.norm(parts.hess_L - build_hessian(inst, cy).hess_L, 2)
            checks["hess_lipschitz"].record(dh, tb.lipschitz_m * dist)
            checks["f_lipschitz"].record(
                float(np.linalg.norm(cache.softmax - cy.softmax)), tb.f_lip * dist
            )

        if prev_pd_hess is None:
            checks["hess_ratio_n"].skip("first_not_pd")
        else:
            ratio = np.linalg.norm(np.linalg.solve(prev_pd_hess, hess), 2)
            checks["hess_ratio_n"].record(float(ratio))
        prev_pd_hess = hess if why_not is None else None

    return BoundsReport(bounds=tb, checks=checks)


def _rel_err(a, b) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def verify_derivatives(inst: ProblemInstance, samples: int = 10, seed: int = 0) -> dict[str, Check]:
    """Cross-check the closed forms against each other and against finite differences.

    Points closer than ten FD steps to a ReLU kink are skipped for the FD
    comparisons.
    """
    from .oracle import FD_GRAD_STEP, FD_HESS_STEP, fd_gradient, fd_hessian, kink_distance

    rng = np.random.default_rng(seed)
    r = max(np.linalg.norm(inst.a1, 2), np.linalg.norm(inst.a2, 2), inst.radius)
    checks = {
        "hessian_decomposition": Check("hessian_decomposition", DECOMP_TOL),
        "grad_fd": Check("grad_fd", FD_GRAD_RTOL),
        "grad_reg_fd": Check("grad_reg_fd", FD_GRAD_RTOL),
        "hessian_fd": Check("hessian_fd", FD_HESS_RTOL),
    }

    def g_of(x):
        return grad_L(inst, eval_point(inst, x))

    for x in sample_ball(rng, inst.d, r, samples):
        cache = eval_point(inst, x)
        hl = build_hessian(inst, cache).hess_L
        scale = max(float(np.max(np.abs(hl))), 1.0)
        worst = 0.0
        for i in range(inst.d):
            for j in range(inst.d):
                e, s6 = hessian_entry(inst, cache, i, j), hessian_six_term(inst, cache, i, j)
                worst = max(worst, abs(e - s6), abs(e - hl[i, j]), abs(s6 - hl[i, j]))
        checks["hessian_decomposition"].record(worst / scale)

        kd = kink_distance(inst, x)
        if kd <= 10 * FD_GRAD_STEP:
            checks["grad_fd"].skip("near_kink")
            checks["grad_reg_fd"].skip("near_kink")
        else:
            checks["grad_fd"].record(
                _rel_err(fd_gradient(lambda z: loss(inst, z), x), grad_L(inst, cache))
            )
            checks["grad_reg_fd"].record(
                _rel_err(fd_gradient(lambda z: loss_reg(inst, z), x), grad_L_reg(inst, cache))
            )
        if kd <= 10 * FD_HESS_STEP:
            checks["hessian_fd"].skip("near_kink")
        else:
            checks["hessian_fd"].record(_rel_err(fd_hessian(g_of, x), hl))
    return checks
