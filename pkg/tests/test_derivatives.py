import numpy as np
import pytest

from softrelu_newton.derivatives import grad_L, grad_L_literal, grad_L_reg, grad_R
from softrelu_newton.forward import eval_point, loss, loss_reg
from softrelu_newton.oracle import fd_gradient, kink_distance

from conftest import weighted_instance


def _interior_point(inst, rng, min_kink=1e-4):
    while True:
        x = rng.standard_normal(inst.d)
        x *= 0.8 * inst.radius * rng.random() / np.linalg.norm(x)
        if kink_distance(inst, x) > min_kink:
            return x


@pytest.mark.parametrize("seed", range(5))
def test_gradients_match_finite_differences(seed):
    inst = weighted_instance(seed)
    rng = np.random.default_rng(seed)
    for _ in range(5):
        x = _interior_point(inst, rng)
        cache = eval_point(inst, x)
        g = grad_L(inst, cache)
        fd = fd_gradient(lambda z: loss(inst, z), x)
        assert np.linalg.norm(fd - g) <= 1e-6 * np.linalg.norm(g)
        g_reg = grad_L_reg(inst, cache)
        fd_reg = fd_gradient(lambda z: loss_reg(inst, z), x)
        assert np.linalg.norm(fd_reg - g_reg) <= 1e-6 * np.linalg.norm(g_reg)


def test_literal_and_vectorized_agree(inst, rng):
    for _ in range(20):
        cache = eval_point(inst, rng.standard_normal(inst.d) * 0.5)
        np.testing.assert_allclose(grad_L_literal(inst, cache), grad_L(inst, cache), rtol=1e-12, atol=1e-15)


def test_regularizer_gradient_closed_form(inst, rng):
    x = rng.standard_normal(inst.d) * 0.5
    cache = eval_point(inst, x)
    c = cache.c_matrix
    expected = c.T @ np.diag(inst.w**2) @ c @ x
    np.testing.assert_allclose(grad_R(inst, cache), expected, rtol=1e-12)
    np.testing.assert_allclose(grad_L_reg(inst, cache), grad_L(inst, cache) + expected, rtol=1e-12)


def test_gradient_vanishes_on_dead_region(inst):
    x = -inst.x_ref
    dead = inst.replace(a1=-np.sign(inst.a1 @ x)[:, None] * inst.a1)
    cache = eval_point(dead, x)
    assert cache.active_count == 0
    np.testing.assert_array_equal(grad_L_reg(dead, cache), 0.0)
