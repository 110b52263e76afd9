import numpy as np
import pytest

from emprank import CascadeNetwork, ParamModule


def random_first_order(rng, pole_cap=0.9):
    a = rng.uniform(-pole_cap, pole_cap)
    b = rng.uniform(0.5, 2.0)
    return ParamModule("first_order", (a, b))


def random_fir(rng, max_taps=6):
    n = rng.integers(1, max_taps + 1)
    taps = rng.uniform(-1.0, 1.0, n)
    if abs(taps[0]) < 0.1:
        taps[0] = 0.5
    return ParamModule("fir", tuple(taps))


def random_second_order(rng):
    r = np.sqrt(rng.uniform(0.05, 0.8))
    phi = rng.uniform(0.0, np.pi)
    t3 = -2 * r * np.cos(phi)
    t4 = r * r
    return ParamModule("second_order", (1.0, rng.uniform(-1.0, 1.0), t3, t4))


def random_network(rng, n, family="first_order"):
    draw = {
        "first_order": random_first_order,
        "fir": random_fir,
        "second_order": random_second_order,
    }[family]
    return CascadeNetwork([draw(rng) for _ in range(n - 1)])


def identical_network(rng, n, family="first_order"):
    draw = {
        "first_order": random_first_order,
        "fir": random_fir,
        "second_order": random_second_order,
    }[family]
    module = draw(rng)
    return CascadeNetwork([module] * (n - 1))


@pytest.fixture
def rng():
    return np.random.default_rng(20260815)
