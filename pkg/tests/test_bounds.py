import math

import numpy as np
import pytest

from softrelu_newton.bounds import (
    Check,
    compute_bounds,
    pd_qualifies,
    sample_ball,
    saturating_exp,
    verify_bounds,
    verify_derivatives,
)
from softrelu_newton.forward import eval_point


def _unit_instance(planted):
    """Same instance with both matrices rescaled to unit spectral norm."""
    return planted.replace(
        a1=planted.a1 / np.linalg.norm(planted.a1, 2), a2=planted.a2 / np.linalg.norm(planted.a2, 2)
    )


def test_unit_radius_constants(planted):
    tb = compute_bounds(_unit_instance(planted), 1.0, 1.0)
    assert tb.r_eff == pytest.approx(1.0)
    assert tb.h_bound == pytest.approx(1.0)
    assert tb.beta_bound == pytest.approx(math.exp(-1))
    assert tb.u_bound == pytest.approx(math.sqrt(8) * math.e)
    # 8^1.5 * sqrt(24 * 6) * e^5
    assert tb.lipschitz_m == pytest.approx(8**1.5 * 12 * math.exp(5), rel=1e-12)
    assert tb.lipschitz_m == pytest.approx(40298.48, rel=1e-6)
    assert (tb.f_bound, tb.c_bound, tb.b_norm_bound, tb.b_psd_bound) == (1.0, 2.0, 16.0, 20.0)


def test_n_constant(planted):
    inst = _unit_instance(planted).replace(w=np.full(8, math.sqrt(21)))
    tb = compute_bounds(inst, 1.0, 1.0)
    assert tb.w_sq_max == pytest.approx(21)
    assert tb.n_const == pytest.approx(37)
    assert not tb.n_below_one


def test_saturation_is_flagged(planted):
    big = planted.replace(radius=20.0)
    tb = compute_bounds(big, 1.0)
    assert "lipschitz_m" in tb.saturated and math.isfinite(tb.lipschitz_m)
    assert saturating_exp(1.0) == (math.e, False)


def test_check_tallies():
    c = Check("x", 2.0)
    assert c.record(1.0) and not c.record(3.0)
    assert c.failures == 1 and c.worst_ratio == 1.5 and c.worst_margin == -1.0
    lower = Check("y", 1.0, upper=False)
    assert lower.record(2.0) and lower.worst_ratio == 0.5


def test_ball_samples_stay_inside(rng):
    pts = sample_ball(rng, 6, 2.0, 500)
    assert np.all(np.linalg.norm(pts, axis=1) <= 2.0)


def test_planted_instance_passes(planted):
    rep = verify_bounds(planted, samples=100, seed=0, l=1.0)
    assert rep.ok
    for name in ("h_norm", "alpha_lower", "f_norm", "c_norm", "b_norm", "b_spectrum"):
        assert rep.checks[name].samples == 100
        assert rep.checks[name].worst_ratio < 1
    doc = rep.to_dict()
    assert [c["name"] for c in doc["checks"]] == sorted(c["name"] for c in doc["checks"])
    assert "R_eff" in doc["note"]


def test_dead_sample_reports_rank(planted):
    x = -planted.x_ref
    dead = planted.replace(a1=-np.sign(planted.a1 @ x)[:, None] * planted.a1)
    cache = eval_point(dead, x)
    assert cache.active_count == 0
    assert pd_qualifies(dead, cache, 1.0) == "rank"


def test_large_target_breaks_residual_bound(planted):
    bad = planted.replace(b=planted.b / np.linalg.norm(planted.b) * 3.0)
    rep = verify_bounds(bad, samples=50, seed=0)
    assert rep.checks["c_norm"].failures > 0 and not rep.ok


def test_derivative_cross_checks(planted):
    checks = verify_derivatives(planted, samples=10, seed=1)
    assert all(c.failures == 0 for c in checks.values())
    assert checks["hessian_decomposition"].samples == 10


def test_rejects_bad_arguments(planted):
    with pytest.raises(ValueError):
        compute_bounds(planted, 0.0)
    with pytest.raises(ValueError):
        verify_bounds(planted, samples=0)
