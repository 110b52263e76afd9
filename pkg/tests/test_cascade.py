"""Chain topology: path gains and the lower-triangular node response map."""

import numpy as np
import pytest

from emprank import (
    CascadeNetwork,
    ParamModule,
    UnstableFilterError,
    impulse_response,
    realize,
    series,
)
from conftest import random_network


def test_node_count():
    net = CascadeNetwork([ParamModule("fir", (1.0,))] * 3)
    assert net.n == 4
    assert len(net.modules) == 3


def test_needs_at_least_one_module():
    with pytest.raises(ValueError):
        CascadeNetwork([])


def test_unstable_module_rejected():
    bad = ParamModule("first_order", (1.2, 1.0))
    with pytest.raises(UnstableFilterError, match="module 2"):
        CascadeNetwork([ParamModule("fir", (1.0,)), bad])


def test_identical_modules_flag():
    g = ParamModule("first_order", (0.2, 1.0))
    assert CascadeNetwork([g, g]).identical_modules
    h = ParamModule("first_order", (0.3, 1.0))
    assert not CascadeNetwork([g, h]).identical_modules


def test_module_tf_indexing():
    g1 = ParamModule("fir", (1.0, 0.5))
    g2 = ParamModule("first_order", (0.4, 2.0))
    net = CascadeNetwork([g1, g2])
    np.testing.assert_allclose(net.module_tf(1).num, [1.0, 0.5])
    np.testing.assert_allclose(net.module_tf(2).num, [2.0])
    with pytest.raises(ValueError):
        net.module_tf(3)


class TestPathGain:
    def test_self_path_is_unit(self, rng):
        net = random_network(rng, 4)
        tf = net.path_gain(2, 2)
        np.testing.assert_allclose(tf.num, [1.0])
        np.testing.assert_allclose(tf.den, [1.0])

    def test_adjacent_path_is_module(self, rng):
        net = random_network(rng, 4)
        tf = net.path_gain(2, 3)
        ref = realize(net.modules[1])
        np.testing.assert_allclose(tf.num, ref.num)
        np.testing.assert_allclose(tf.den, ref.den)

    def test_triple_product(self, rng):
        net = random_network(rng, 4)
        tfs = [realize(m) for m in net.modules]
        ref = series(series(tfs[0], tfs[1]), tfs[2])
        got = net.path_gain(1, 4)
        h_ref, _ = impulse_response(ref, max_len=2048)
        h_got, _ = impulse_response(got, max_len=2048)
        n = max(h_ref.size, h_got.size)
        np.testing.assert_allclose(
            np.pad(h_got, (0, n - h_got.size)),
            np.pad(h_ref, (0, n - h_ref.size)),
            atol=1e-10,
        )

    def test_backward_path_rejected(self, rng):
        net = random_network(rng, 3)
        with pytest.raises(ValueError):
            net.path_gain(3, 1)

    def test_out_of_range(self, rng):
        net = random_network(rng, 3)
        with pytest.raises(ValueError):
            net.path_gain(0, 2)
        with pytest.raises(ValueError):
            net.path_gain(1, 4)


class TestTransferMatrix:
    def test_two_nodes(self):
        net = CascadeNetwork([ParamModule("fir", (0.5, 0.1))])
        t = net.transfer_matrix()
        np.testing.assert_allclose(t[0][0].num, [1.0])
        np.testing.assert_allclose(t[1][0].num, [0.5, 0.1])
        h, _ = impulse_response(t[0][1])
        np.testing.assert_array_equal(h, [0.0])

    def test_frequency_domain_identity(self, rng):
        """(I - G(z)) T(z) = I pointwise, with G the subdiagonal module matrix.

        The node response map is the inverse of (I - G); checking the product
        at a few frequencies validates the structural product construction
        without ever forming a matrix inverse.
        """
        net = random_network(rng, 4)
        t = net.transfer_matrix()
        for w in (0.0, np.pi / 4, np.pi):
            z = np.exp(1j * w)
            tz = np.array([[t[r][c].evaluate(z) for c in range(4)] for r in range(4)])
            gz = np.zeros((4, 4), dtype=complex)
            for k, m in enumerate(net.modules):
                gz[k + 1, k] = realize(m).evaluate(z)
            np.testing.assert_allclose((np.eye(4) - gz) @ tz, np.eye(4), atol=1e-10)

    def test_matches_path_gains(self, rng):
        net = random_network(rng, 5)
        t = net.transfer_matrix()
        for j in range(1, 6):
            for i in range(1, j + 1):
                a = t[j - 1][i - 1]
                b = net.path_gain(i, j)
                np.testing.assert_allclose(a.num, b.num)
                np.testing.assert_allclose(a.den, b.den)


def test_path_gain_memoized(rng):
    net = random_network(rng, 6)
    first = net.path_gain(1, 6)
    again = net.path_gain(1, 6)
    assert first is again
