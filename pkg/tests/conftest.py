import numpy as np
import pytest

from boxcert.network import IDENTITY, LEAKY_RELU, RELU, Network, make_layer


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_network(rng, sizes, activation=RELU, scale=0.8, slope=0.05):
    """Small random MLP; hidden layers share one activation, output affine."""
    layers = []
    for i in range(len(sizes) - 1):
        w = rng.normal(size=(sizes[i + 1], sizes[i])) * scale / np.sqrt(sizes[i])
        b = rng.normal(size=sizes[i + 1]) * 0.1
        last = i == len(sizes) - 2
        act = IDENTITY if last else activation
        kw = {"slope": slope} if act == LEAKY_RELU else {}
        layers.append(make_layer(w, b, act, **kw))
    return Network(layers)
