import jax
import jax.numpy as jnp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import rel_err
from rqa_pinn import network
from rqa_pinn.derivatives import (
    EvaluationError,
    derivatives_at,
    divergence_form,
    flatten_params,
    parameter_gradient,
)
from rqa_pinn.geometry import sample_interior, substream
from rqa_pinn.verify import fd_bundle


def sq_norm(x, t):
    return jnp.sum(x * x)


def smooth(x, t):
    return jnp.sin(x[0]) * jnp.exp(0.3 * x[-1] - t) + jnp.cos(jnp.sum(x) * t)


def test_squared_norm_bundle():
    x = jnp.array([0.1, -0.4, 0.3])
    b = derivatives_at(sq_norm, x, 0.7)
    assert float(b.value) == pytest.approx(0.26)
    np.testing.assert_allclose(b.spatial_gradient, 2 * x)
    assert float(b.laplacian) == pytest.approx(6.0)
    assert float(b.time_derivative) == 0.0


def test_constant_field():
    b = derivatives_at(lambda x, t: 3.5 + 0.0 * t, jnp.array([0.2, 0.1]), 0.3)
    assert float(b.value) == 3.5
    np.testing.assert_array_equal(b.spatial_gradient, 0.0)
    assert float(b.laplacian) == 0.0
    assert float(b.time_derivative) == 0.0


def test_batched_matches_single():
    xs = sample_interior(5, 3, 1.0, substream(0, "interior")).x
    batch = derivatives_at(smooth, xs, 0.4)
    for i, x in enumerate(xs):
        single = derivatives_at(smooth, x, 0.4)
        assert float(single.laplacian) == pytest.approx(float(batch.laplacian[i]), rel=1e-14)


def test_non_finite_reports_point():
    with pytest.raises(EvaluationError) as err:
        derivatives_at(lambda x, t: jnp.exp(1e4 * x[0]), jnp.array([0.5, 0.0]), 0.0)
    assert err.value.point[0] == [0.5, 0.0]


@pytest.mark.parametrize("d", [1, 3, 5])
def test_random_network_against_finite_differences(d):
    params = network.init(11, d, True, 16)
    batch = sample_interior(20, d, 1.0, substream(2, "interior"))
    ad = derivatives_at(network.field(params), batch.x, batch.t)
    fd = fd_bundle(network.field(params), batch.x, batch.t, h=1e-4)
    for name, a, b in zip(ad._fields, ad, fd):
        assert rel_err(a, b).max() < 1e-4, name


def test_smooth_field_property_100_points():
    batch = sample_interior(100, 4, 1.0, substream(3, "interior"))
    ad = derivatives_at(smooth, batch.x, batch.t)
    fd = fd_bundle(smooth, batch.x, batch.t, h=1e-4)
    # gradient compared per point as a vector: single components of this field cross zero
    grad_err = np.linalg.norm(ad.spatial_gradient - fd[1], axis=1) / np.linalg.norm(fd[1], axis=1)
    assert grad_err.max() < 1e-4
    for name, a, b in [("value", ad.value, fd[0]), ("laplacian", ad.laplacian, fd[2]), ("dt", ad.time_derivative, fd[3])]:
        assert rel_err(a, b).max() < 1e-4, name


def test_laplacian_equals_trace_of_gradient_jacobian():
    params = network.init(4, 3, True, 12)
    u = network.field(params)
    batch = sample_interior(20, 3, 1.0, substream(4, "interior"))
    lap = np.asarray(derivatives_at(u, batch.x, batch.t).laplacian)
    # independent second route: full reverse-over-reverse Hessian
    hess = jax.vmap(jax.hessian(u, argnums=0))(jnp.asarray(batch.x), jnp.asarray(batch.t))
    trace = np.trace(np.asarray(hess), axis1=1, axis2=2)
    assert rel_err(lap, trace).max() < 1e-8


def test_bit_identical_repeat():
    params = network.init(1, 2, True, 8)
    x = jnp.array([0.3, -0.2])
    a = derivatives_at(network.field(params), x, 0.5)
    b = derivatives_at(network.field(params), x, 0.5)
    for u, v in zip(a, b):
        assert np.array_equal(np.asarray(u), np.asarray(v))


def coeff(x):
    return 1.0 + 0.5 * jnp.sum(x * x)


def test_divergence_form_unit_coefficient_is_laplacian():
    x = jnp.array([0.3, 0.1, -0.2])
    div = divergence_form(smooth, lambda x: 1.0, lambda x: jnp.zeros_like(x), x, 0.2)
    assert float(div) == pytest.approx(float(derivatives_at(smooth, x, 0.2).laplacian), rel=1e-14)


@given(st.floats(-0.6, 0.6), st.floats(-0.6, 0.6))
@settings(max_examples=25, deadline=None)
def test_divergence_form_hand_expansion(a, b):
    x = jnp.array([a, b])
    r2 = a * a + b * b
    expected = (1 + 0.5 * r2) * 4 + 2 * r2
    assert float(divergence_form(sq_norm, coeff, lambda x: x, x, 0.0)) == pytest.approx(expected, rel=1e-13)


def test_divergence_form_against_finite_differences():
    # div(a grad u) by nested central differences of the flux a * du/dx_i
    x = np.array([0.25, -0.35])
    h = 1e-4

    def flux(y, i):
        e = np.zeros(2)
        e[i] = h
        du = (float(smooth(jnp.asarray(y + e), 0.3)) - float(smooth(jnp.asarray(y - e), 0.3))) / (2 * h)
        return float(coeff(jnp.asarray(y))) * du

    fd = 0.0
    for i in range(2):
        e = np.zeros(2)
        e[i] = 1e-3
        fd += (flux(x + e, i) - flux(x - e, i)) / 2e-3
    ad = float(divergence_form(smooth, coeff, lambda y: y, jnp.asarray(x), 0.3))
    assert ad == pytest.approx(fd, rel=1e-5)


def test_divergence_form_of_constant_is_zero():
    x = jnp.array([0.1, 0.4])
    assert float(divergence_form(lambda x, t: 2.0 + 0 * t, coeff, lambda x: x, x, 0.0)) == 0.0


def test_parameter_gradient_zero_output_layer():
    params = network.init(0, 2, True, 6)
    w_out, b_out = params.layers[-1]
    layers = params.layers[:-1] + ((jnp.zeros_like(w_out), jnp.zeros_like(b_out)),)
    zeroed = network.MlpParams(layers, 0, True)
    x0 = jnp.array([0.2, 0.3, 0.5])
    g = parameter_gradient(lambda p: network.apply(p, x0) ** 2, zeroed)
    n_hidden = sum(int(w.size + b.size) for w, b in layers[:-1])
    np.testing.assert_array_equal(g[:n_hidden], 0.0)


def test_parameter_gradient_independent_loss_is_zero():
    params = network.init(0, 2, True, 4)
    g = parameter_gradient(lambda p: jnp.sum(jnp.zeros(3)) + 1.0, params)
    assert g.shape == (params.size,)
    np.testing.assert_array_equal(g, 0.0)


def test_parameter_gradient_rejects_non_finite_loss():
    params = network.init(0, 2, True, 4)
    with pytest.raises(EvaluationError):
        parameter_gradient(lambda p: jnp.inf * jnp.sum(p.layers[0][1]) + jnp.inf, params)


def test_parameter_ordering_documented():
    params = network.init(0, 2, False, 3)
    flat = flatten_params(params)
    w1, b1 = params.layers[0]
    np.testing.assert_array_equal(flat[: w1.size], np.ravel(w1))
    np.testing.assert_array_equal(flat[w1.size : w1.size + b1.size], b1)
