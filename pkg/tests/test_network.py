import jax
import jax.numpy as jnp
import numpy as np
import pytest
from scipy import stats

from rqa_pinn import network
from rqa_pinn.derivatives import EvaluationError


def tiny(w=1.0, b=0.0, out=1.0):
    layers = ((jnp.array([[w]]), jnp.array([b])), (jnp.array([[out]]), jnp.array([0.0])))
    return network.MlpParams(layers, None, False)


def test_activation_values():
    assert float(network.cubic_relu(-1.0)) == 0.0
    assert float(network.cubic_relu(2.0)) == 8.0
    assert float(network.cubic_relu(0.0)) == 0.0


@pytest.mark.parametrize("z", [-0.7, -1e-3, 0.0, 1e-3, 0.4, 1.3])
def test_activation_derivative_by_finite_differences(z):
    h = 1e-6
    fd = (float(network.cubic_relu(z + h)) - float(network.cubic_relu(z - h))) / (2 * h)
    ad = float(jax.grad(network.cubic_relu)(z))
    assert ad == (3 * z * z if z > 0 else 0.0)
    assert ad == pytest.approx(fd, abs=1e-9)


def test_hand_evaluated_tiny_network():
    assert network.forward(tiny(), [2.0]) == 8.0
    assert network.forward(tiny(), [-3.0]) == 0.0


def test_zero_network_outputs_zero():
    params = network.init(0, 3, True, 5)
    zero = jax.tree_util.tree_map(jnp.zeros_like, params)
    assert network.forward(zero, [0.1, 0.2, 0.3], 0.5) == 0.0


def test_layer_shapes():
    params = network.init(0, 4, True, 7)
    assert params.shapes == [[7, 5], [7, 7], [7, 7], [1, 7]]
    assert network.init(0, 4, False, 7).shapes[0] == [7, 4]
    for _, b in params.layers:
        np.testing.assert_array_equal(b, 0.0)


def test_init_determinism():
    a = network.init(5, 3, True, 10)
    b = network.init(5, 3, True, 10)
    c = network.init(6, 3, True, 10)
    for (wa, ba), (wb, bb) in zip(a.layers, b.layers):
        assert np.array_equal(wa, wb) and np.array_equal(ba, bb)
    assert any(not np.array_equal(wa, wc) for (wa, _), (wc, _) in zip(a.layers, c.layers))


def test_init_first_layer_mean_within_three_standard_errors():
    params = network.init(0, 2, False, 4)
    w = np.ravel(params.layers[0][0])
    sigma = np.sqrt(2.0 / (2 + 4))
    sd = stats.truncnorm(-3, 3, scale=sigma).std()
    assert abs(w.mean()) < 3 * sd / np.sqrt(w.size)


def test_init_distribution_matches_truncated_normal():
    w = np.ravel(network.init(1, 2, False, 100).layers[1][0])
    sigma = np.sqrt(2.0 / 200)
    assert np.abs(w).max() <= 3 * sigma
    assert stats.kstest(w, stats.truncnorm(-3, 3, scale=sigma).cdf).pvalue > 0.01


def test_invalid_init():
    with pytest.raises(ValueError):
        network.init(0, 0)
    with pytest.raises(ValueError):
        network.init(0, 2, width=0)


def test_forward_checks_dimensions_and_finiteness():
    params = network.init(0, 2, True, 4)
    with pytest.raises(ValueError):
        network.forward(params, [0.1, 0.2, 0.3], 0.1)
    with pytest.raises(ValueError):
        network.forward(params, [0.1, 0.2])
    with pytest.raises(EvaluationError):
        network.forward(tiny(w=1e200), [1.0])


def test_predict_matches_forward():
    params = network.init(2, 3, True, 8)
    xs = np.array([[0.1, 0.2, -0.3], [0.0, 0.5, 0.1]])
    ts = np.array([0.2, 0.9])
    batch = np.asarray(network.predict(params, xs, ts))
    for i in range(2):
        assert batch[i] == pytest.approx(network.forward(params, xs[i], ts[i]), rel=1e-14)


def test_checkpoint_round_trip(tmp_path):
    params = network.init(9, 2, True, 6)
    path = tmp_path / "params.bin"
    network.save(params, path)
    with open(path, "rb") as fh:
        header = fh.readline()
        body = fh.read()
    assert b'"shapes"' in header and b'"seed": 9' in header
    assert len(body) == 8 * params.size
    loaded = network.load(path)
    assert loaded.seed == 9 and loaded.time_dependent
    for (wa, ba), (wb, bb) in zip(params.layers, loaded.layers):
        assert np.array_equal(wa, wb) and np.array_equal(ba, bb)
    first = np.frombuffer(body[:8], dtype="<f8")[0]
    assert first == float(params.layers[0][0][0, 0])
