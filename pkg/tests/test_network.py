import json

import numpy as np
import pytest

from boxcert.errors import DimensionError, WeightFormatError
from boxcert.network import (
    IDENTITY,
    LEAKY_RELU,
    RELU,
    Network,
    chain,
    load_weights,
    make_layer,
    save_weights,
)
from tests.conftest import random_network


def test_forward_matches_manual_composition():
    w1 = np.array([[1.0, -2.0], [0.5, 0.5]])
    b1 = np.array([0.1, -0.1])
    w2 = np.array([[2.0, 1.0]])
    net = Network([make_layer(w1, b1, RELU), make_layer(w2)])
    x = np.array([[0.3, -0.4], [1.0, 2.0]])
    h = np.maximum(x @ w1.T + b1, 0.0)
    np.testing.assert_allclose(net.forward(x), h @ w2.T, rtol=1e-15)


def test_forward_single_point():
    net = Network([make_layer(np.array([[3.0]]), np.array([1.0]))])
    out = net.forward(np.array([2.0]))
    assert out.shape == (1,)
    assert out[0] == 7.0


def test_leaky_relu_slope():
    net = Network([
        make_layer(np.eye(1), activation=LEAKY_RELU, slope=0.2),
        make_layer(np.eye(1)),
    ])
    np.testing.assert_allclose(net.forward(np.array([[-2.0], [3.0]])),
                               [[-0.4], [3.0]])


def test_layer_validation():
    with pytest.raises(WeightFormatError):
        make_layer(np.zeros((2, 2)), np.zeros(3))
    with pytest.raises(WeightFormatError):
        make_layer(np.array([[np.nan, 0.0]]))
    with pytest.raises(WeightFormatError):
        make_layer(np.zeros((2, 2)), activation="softplus")
    with pytest.raises(WeightFormatError):
        make_layer(np.eye(2), activation=LEAKY_RELU, slope=1.5)
    with pytest.raises(WeightFormatError):
        make_layer(np.eye(2), activation=RELU, slope=0.1)


def test_network_shape_chain_validated():
    a = make_layer(np.zeros((3, 2)), activation=RELU)
    b = make_layer(np.zeros((1, 4)))
    with pytest.raises(WeightFormatError):
        Network([a, b])


def test_last_layer_must_be_affine():
    with pytest.raises(WeightFormatError):
        Network([make_layer(np.eye(2), activation=RELU)])


def test_chain_equals_sequential_forward(rng):
    f = random_network(rng, [2, 5, 3])
    g = random_network(rng, [3, 4, 2])
    both = chain(f, g)
    x = rng.uniform(-1, 1, size=(40, 2))
    np.testing.assert_allclose(both.forward(x), g.forward(f.forward(x)),
                               rtol=1e-12, atol=1e-14)
    assert both.n == 2 and both.m == 2


def test_chain_concatenates_layers(rng):
    f = random_network(rng, [2, 5, 3])
    g = random_network(rng, [3, 4, 2])
    assert len(chain(f, g).layers) == len(f.layers) + len(g.layers)


def test_chain_dimension_mismatch(rng):
    f = random_network(rng, [2, 4, 3])
    g = random_network(rng, [4, 4, 1])
    with pytest.raises(DimensionError):
        chain(f, g)


def test_save_load_round_trip(tmp_path, rng):
    net = random_network(rng, [3, 8, 8, 2], activation=LEAKY_RELU)
    p = tmp_path / "net.json"
    save_weights(net, p)
    back = load_weights(p)
    assert len(back.layers) == len(net.layers)
    x = rng.uniform(-2, 2, size=(100, 3))
    np.testing.assert_array_equal(back.forward(x), net.forward(x))
    for la, lb in zip(net.layers, back.layers):
        np.testing.assert_array_equal(la.weight, lb.weight)
        np.testing.assert_array_equal(la.bias, lb.bias)
        assert la.activation == lb.activation


def test_weight_file_is_versioned_json(tmp_path, rng):
    p = tmp_path / "net.json"
    save_weights(random_network(rng, [1, 2, 1]), p)
    doc = json.loads(p.read_text())
    assert doc["version"] == 1
    assert doc["n"] == 1 and doc["m"] == 1
    assert len(doc["layers"]) == 2


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.pop("layers"),
        lambda d: d.update(layers=[]),
        lambda d: d.update(n=7),
        lambda d: d["layers"][0].pop("weight"),
        lambda d: d["layers"][0].update(weight=[[1.0], [2.0, 3.0]]),
        lambda d: d["layers"][0].update(activation="tanh"),
        lambda d: d.update(version=99),
    ],
)
def test_load_rejects_malformed_documents(tmp_path, rng, mutate):
    p = tmp_path / "net.json"
    save_weights(random_network(rng, [1, 2, 1]), p)
    doc = json.loads(p.read_text())
    mutate(doc)
    p.write_text(json.dumps(doc))
    with pytest.raises(WeightFormatError):
        load_weights(p)


def test_load_missing_file(tmp_path):
    with pytest.raises(OSError):
        load_weights(tmp_path / "absent.json")
