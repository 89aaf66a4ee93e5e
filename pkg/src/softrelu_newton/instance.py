"""Problem instances: generation, assumption checks, weights, JSON I/O."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, EmptyProbeSet, GenerationFailed, RankDeficient
from .forward import eval_c_matrix, relu_indicator, stable_softmax

# relative cutoff below which a singular value is treated as zero
RANK_RTOL = 1e-10
# fraction of the radius the generated operator norms (and ||b||) are scaled to
GEN_SCALE = 0.9
GEN_MATRIX_ATTEMPTS = 50
GEN_PROBE_ATTEMPTS = 200
# generated reference points sit at this fraction of the radius
PROBE_NORM_FRACTION = 0.5


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ProblemInstance:
    """One regression problem ``min L(x) + 0.5 * ||W C(x) x||^2`` over a ball.

    ``x_ref`` is the reference point used for the ``sigma_min(C)`` computations
    in :func:`choose_weights`; :func:`generate_instance` sets it to the probe
    point that met the activity target.
    """

    a1: np.ndarray
    a2: np.ndarray
    b: np.ndarray
    w: np.ndarray
    radius: float
    seed: int | None = None
    x_ref: np.ndarray | None = None

    def __post_init__(self):
        for name in ("a1", "a2", "b", "w"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if self.x_ref is not None:
            object.__setattr__(self, "x_ref", _frozen(self.x_ref))
        object.__setattr__(self, "radius", float(self.radius))

        if self.a1.ndim != 2 or self.a2.ndim != 2:
            raise DimensionError("a1 and a2 must be matrices")
        n, d = self.a1.shape
        m, n2 = self.a2.shape
        if n2 != n:
            raise DimensionError(f"a2 has {n2} columns, expected n={n}")
        if self.b.shape != (m,) or self.w.shape != (m,):
            raise DimensionError(f"b and w must have length m={m}")
        if self.x_ref is not None and self.x_ref.shape != (d,):
            raise DimensionError(f"x_ref must have length d={d}")
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    @property
    def n(self) -> int:
        return self.a1.shape[0]

    @property
    def m(self) -> int:
        return self.a2.shape[0]

    @property
    def d(self) -> int:
        return self.a1.shape[1]

    @property
    def w_sq_max(self) -> float:
        """max_i w_i^2, the scalar upper bound on the weights used in N."""
        return float(np.max(self.w**2))

    def replace(self, **changes) -> "ProblemInstance":
        return dataclasses.replace(self, **changes)

    def norm_violations(self) -> list[str]:
        """Names of the bounded-parameter conditions this instance breaks."""
        out = []
        if np.linalg.norm(self.a1, 2) > self.radius:
            out.append("a1_norm")
        if np.linalg.norm(self.a2, 2) > self.radius:
            out.append("a2_norm")
        if np.linalg.norm(self.b) > 1.0:
            out.append("b_norm")
        if np.any(self.w <= 0):
            out.append("w_positive")
        return out


@dataclass(frozen=True)
class AssumptionReport:
    a1_full_rank: bool
    a2_full_rank: bool
    xi: float
    theta: float
    sigma_min_c: float
    w_threshold: np.ndarray
    fixed_relu_state: bool
    pd_lower_bound_l: float

    @property
    def rank_condition_ok(self) -> bool:
        return (
            self.a1_full_rank
            and self.a2_full_rank
            and self.xi > 1
            and 1 > self.theta > 1 / self.xi
        )

    def weights_ok(self, w: np.ndarray) -> bool:
        return bool(np.all(np.asarray(w) ** 2 >= self.w_threshold))

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["w_threshold"] = [float(v) for v in self.w_threshold]
        out["rank_condition_ok"] = self.rank_condition_ok
        return out


def numerical_rank(mat: np.ndarray) -> int:
    s = np.linalg.svd(mat, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > RANK_RTOL * s[0]))


def sigma_min(mat: np.ndarray) -> float:
    """Smallest of the min(rows, cols) singular values."""
    return float(np.linalg.svd(mat, compute_uv=False)[-1])


def _scaled_gaussian(rng, shape, target_norm):
    mat = rng.standard_normal(shape)
    return mat * (target_norm / np.linalg.norm(mat, 2))


def _random_direction(rng, d):
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v)


def generate_instance(
    n: int,
    m: int,
    d: int,
    radius: float = 1.0,
    seed: int = 0,
    target_theta: float = 0.6,
) -> ProblemInstance:
    """Draw a random instance satisfying the norm and rank assumptions.

    Both matrices are i.i.d. standard normal, rescaled to spectral norm
    ``0.9 * radius``; ``b`` is a random direction of length 0.9 and ``w`` is
    all ones (call :func:`choose_weights` before solving). Matrices are
    redrawn until some probe point inside the ball activates at least
    ``target_theta * n`` ReLU units; that point becomes ``x_ref``.
    """
    if n < 2 * max(m, d):
        raise DimensionError(f"need n >= 2*max(m, d), got n={n}, m={m}, d={d}")
    if min(n, m, d) < 1:
        raise DimensionError("dimensions must be positive")
    if not radius > 0:
        raise ValueError("radius must be positive")
    if not 0 < target_theta < 1:
        raise ValueError("target_theta must lie in (0, 1)")

    rng = np.random.default_rng(seed)
    need = target_theta * n
    for _ in range(GEN_MATRIX_ATTEMPTS):
        a1 = _scaled_gaussian(rng, (n, d), GEN_SCALE * radius)
        a2 = _scaled_gaussian(rng, (m, n), GEN_SCALE * radius)
        b = _random_direction(rng, m) * GEN_SCALE
        for _ in range(GEN_PROBE_ATTEMPTS):
            x = _random_direction(rng, d) * (PROBE_NORM_FRACTION * radius)
            if relu_indicator(a1 @ x).sum() >= need:
                return ProblemInstance(
                    a1=a1, a2=a2, b=b, w=np.ones(m), radius=radius, seed=seed, x_ref=x
                )
    raise GenerationFailed(
        f"no probe point reached {target_theta:.3g}*n active units after "
        f"{GEN_MATRIX_ATTEMPTS * GEN_PROBE_ATTEMPTS} attempts"
    )


def validate_assumptions(
    inst: ProblemInstance, probe_points, l: float
) -> AssumptionReport:
    """Check the rank, activity and weight assumptions on a finite probe set.

    The fixed-ReLU-state assumption is only checked on ``probe_points``; a
    ``True`` here says nothing about the rest of the ball.
    """
    probes = [np.asarray(p, dtype=np.float64) for p in probe_points]
    if not probes:
        raise EmptyProbeSet("validate_assumptions needs at least one probe point")
    if l <= 0:
        raise ValueError("l must be positive")
    for p in probes:
        if p.shape != (inst.d,):
            raise DimensionError(f"probe point must have length d={inst.d}")
        if np.linalg.norm(p) > inst.radius:
            raise ValueError("probe point lies outside the ball")

    indicators = [relu_indicator(inst.a1 @ p) for p in probes]
    fixed = all(np.array_equal(indicators[0], ind) for ind in indicators[1:])
    smin = sigma_min(eval_c_matrix(inst, probes[0]))
    with np.errstate(divide="ignore"):
        thr = 20.0 + l / smin**2 if smin > 0 else math.inf
    return AssumptionReport(
        a1_full_rank=numerical_rank(inst.a1) == min(inst.a1.shape),
        a2_full_rank=numerical_rank(inst.a2) == min(inst.a2.shape),
        xi=inst.n / max(inst.m, inst.d),
        theta=float(indicators[0].sum()) / inst.n,
        sigma_min_c=smin,
        w_threshold=np.full(inst.m, thr),
        fixed_relu_state=fixed,
        pd_lower_bound_l=float(l),
    )


def weights_for(sigma_min_c: float, l: float, margin: float = 0.0) -> float:
    """The weight value sqrt(20 + l / sigma_min(C)^2 + margin)."""
    if sigma_min_c <= 0:
        raise RankDeficient("sigma_min(C) is zero; no finite weight gives a PD Hessian")
    return math.sqrt(20.0 + l / sigma_min_c**2 + margin)


def choose_weights(
    inst: ProblemInstance, l: float, margin: float = 0.0, x=None
) -> ProblemInstance:
    """Return a copy with every weight set to the smallest admissible value.

    ``sigma_min(C)`` is taken at ``x`` (default: ``inst.x_ref``).
    """
    if l <= 0:
        raise ValueError("l must be positive")
    if margin < 0:
        raise ValueError("margin must be non-negative")
    if x is None:
        if inst.x_ref is None:
            raise ValueError("instance has no reference point; pass x explicitly")
        x = inst.x_ref
    c = eval_c_matrix(inst, x)
    if numerical_rank(c) == 0:
        raise RankDeficient("C is zero at the reference point")
    wi = weights_for(sigma_min(c), l, margin)
    return inst.replace(w=np.full(inst.m, wi))


def fixed_state_minimizer(
    inst: ProblemInstance, c_matrix: np.ndarray, tol: float = 1e-14, max_iters: int = 100
) -> np.ndarray:
    """Minimize L_reg with the ReLU mask frozen, i.e. with C held fixed.

    The frozen problem is smooth and strongly convex once the weights satisfy
    the PD condition, so plain Newton from the origin converges.
    """
    from .hessian import b_matrix

    w2 = inst.w**2
    x = np.zeros(inst.d)
    for _ in range(max_iters):
        z = c_matrix @ x
        f = stable_softmax(z)
        c = f - inst.b
        g = c_matrix.T @ (f * c - float(c @ f) * f + w2 * z)
        if np.linalg.norm(g) <= tol:
            break
        h = c_matrix.T @ (b_matrix(f, c) + np.diag(w2)) @ c_matrix
        x = x - np.linalg.solve(h, g)
    return x


def _relative_kink_radius(a1: np.ndarray, x: np.ndarray) -> float:
    return float(np.min(np.abs(a1 @ x) / np.linalg.norm(a1, axis=1)))


def plant_optimum(
    inst: ProblemInstance,
    l: float,
    margin: float = 0.0,
    candidates: int = 64,
    seed: int = 0,
    target_theta: float = 0.6,
) -> ProblemInstance:
    """Weight the instance and move a strict local minimizer into a ReLU cone interior.

    Random instances almost never have a stationary point of L_reg strictly
    inside one ReLU region. For a chosen active set S (with C = C_S) this
    computes the minimizer x* of the frozen-mask problem, then flips the sign
    of every hidden unit whose pre-activation at x* disagrees with S: row k
    of A1 and column k of A2 together. A joint flip leaves C_S, both spectral
    norms, the ranks and b unchanged, and afterwards 1[A1 x*] = S, so x* is a
    stationary point of the true L_reg with a positive definite Hessian.

    Up to ``candidates`` activity patterns (the reference point's first, then
    random probes reaching ``target_theta * n`` active units) are tried; the
    one whose x* sits farthest from a kink, relative to its norm, wins. The
    returned instance has ``x_ref = x*`` and weights from ``choose_weights``.
    """
    if inst.x_ref is None:
        raise ValueError("instance has no reference point")
    rng = np.random.default_rng(seed)
    probes = [inst.x_ref]
    need = target_theta * inst.n
    for _ in range(50 * candidates):
        if len(probes) >= candidates:
            break
        x = _random_direction(rng, inst.d) * (PROBE_NORM_FRACTION * inst.radius)
        if relu_indicator(inst.a1 @ x).sum() >= need:
            probes.append(x)

    best = None
    for probe in probes:
        active = relu_indicator(inst.a1 @ probe)
        cmat = eval_c_matrix(inst, probe)
        if numerical_rank(cmat) < min(cmat.shape):
            continue
        weighted = inst.replace(w=np.full(inst.m, weights_for(sigma_min(cmat), l, margin)))
        x_star = fixed_state_minimizer(weighted, cmat)
        if not 0 < np.linalg.norm(x_star) < inst.radius:
            continue
        score = _relative_kink_radius(inst.a1, x_star) / np.linalg.norm(x_star)
        if best is None or score > best[0]:
            best = (score, weighted, active, x_star)
    if best is None:
        raise RankDeficient("no candidate activity pattern gives a full-rank C")

    _, weighted, active, x_star = best
    pre = weighted.a1 @ x_star
    flip = np.where((active > 0) != (pre > 0), -1.0, 1.0)
    return weighted.replace(
        a1=flip[:, None] * weighted.a1, a2=weighted.a2 * flip[None, :], x_ref=x_star
    )


# -- JSON I/O -----------------------------------------------------------------


def instance_to_dict(inst: ProblemInstance) -> dict:
    out = {
        "n": inst.n,
        "m": inst.m,
        "d": inst.d,
        "radius": inst.radius,
        "a1": inst.a1.tolist(),
        "a2": inst.a2.tolist(),
        "b": inst.b.tolist(),
        "w": inst.w.tolist(),
        "seed": inst.seed,
    }
    if inst.x_ref is not None:
        out["x_ref"] = inst.x_ref.tolist()
    return out


def instance_from_dict(doc: dict) -> ProblemInstance:
    x_ref = doc.get("x_ref")
    inst = ProblemInstance(
        a1=np.array(doc["a1"], dtype=np.float64).reshape(doc["n"], doc["d"]),
        a2=np.array(doc["a2"], dtype=np.float64).reshape(doc["m"], doc["n"]),
        b=np.array(doc["b"], dtype=np.float64),
        w=np.array(doc["w"], dtype=np.float64),
        radius=doc["radius"],
        seed=doc.get("seed"),
        x_ref=None if x_ref is None else np.array(x_ref, dtype=np.float64),
    )
    return inst


def dumps_instance(inst: ProblemInstance) -> str:
    # float repr is the shortest string that round-trips, so I/O is bit-exact
    return json.dumps(instance_to_dict(inst)) + "\n"


def loads_instance(text: str) -> ProblemInstance:
    return instance_from_dict(json.loads(text))


def save_instance(inst: ProblemInstance, path) -> None:
    Path(path).write_text(dumps_instance(inst))


def load_instance(path) -> ProblemInstance:
    return loads_instance(Path(path).read_text())
