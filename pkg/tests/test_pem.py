"""Simulation, prediction-error fitting, empirical covariance checks."""

import numpy as np
import pytest
from scipy.signal import lfilter

from emprank import (
    CascadeNetwork,
    Emp,
    ParamModule,
    dataset_from_csv,
    dataset_to_csv,
    empirical_covariance,
    pem_fit,
    prediction_cost,
    simulate,
)
from emprank.pem import prediction_cost_gradient


def two_node_fir():
    return CascadeNetwork([ParamModule("fir", (0.8, -0.25, 0.1))])


def three_node_fo():
    return CascadeNetwork(
        [ParamModule("first_order", (-0.4, 1.2)), ParamModule("first_order", (0.3, 0.7))]
    )


class TestSimulate:
    def test_reproducible(self):
        net = three_node_fo()
        emp = Emp.uniform({1}, {2, 3}, 1.0, 0.1)
        a = simulate(net, emp, 200, seed=5)
        b = simulate(net, emp, 200, seed=5)
        np.testing.assert_array_equal(a.r[1], b.r[1])
        np.testing.assert_array_equal(a.y[3], b.y[3])
        assert a.n_samples == 200

    def test_cascade_recursion(self):
        net = three_node_fo()
        emp = Emp(frozenset({1, 3}), frozenset({2, 3}), {1: 1.0, 3: 2.0}, {2: 0.0, 3: 0.0})
        data = simulate(net, emp, 300, seed=1)
        w2 = lfilter(*net.module_tf(1).shift_coefficients(), data.r[1])
        w3 = lfilter(*net.module_tf(2).shift_coefficients(), w2) + data.r[3]
        np.testing.assert_allclose(data.y[2], w2, atol=1e-12)
        np.testing.assert_allclose(data.y[3], w3, atol=1e-12)

    def test_sensor_noise_variance(self):
        net = two_node_fir()
        lam = 0.2
        quiet = Emp(frozenset({1}), frozenset({2}), {1: 1.0}, {2: 0.0})
        noisy = Emp(frozenset({1}), frozenset({2}), {1: 1.0}, {2: lam})
        n = 200_000
        a = simulate(net, quiet, n, seed=9)
        b = simulate(net, noisy, n, seed=9)
        np.testing.assert_array_equal(a.r[1], b.r[1])
        noise = b.y[2] - a.y[2]
        assert np.var(noise) == pytest.approx(lam, rel=0.02)
        assert abs(np.mean(noise)) < 0.01


class TestPredictionCost:
    def test_zero_at_truth_without_noise(self):
        net = three_node_fo()
        emp = Emp(frozenset({1}), frozenset({2, 3}), {1: 1.0}, {2: 0.0, 3: 0.0})
        data = simulate(net, emp, 500, seed=2)
        assert prediction_cost(data, net.modules) == pytest.approx(0.0, abs=1e-18)

    def test_truth_beats_offset(self):
        net = two_node_fir()
        emp = Emp.uniform({1}, {2}, 1.0, 0.05)
        data = simulate(net, emp, 800, seed=3)
        off = [ParamModule("fir", (0.9, -0.25, 0.1))]
        assert prediction_cost(data, net.modules) < prediction_cost(data, off)

    def test_weighted_residuals_near_unit_variance(self):
        net = two_node_fir()
        emp = Emp.uniform({1}, {2}, 1.0, 0.3)
        n = 50_000
        data = simulate(net, emp, n, seed=4)
        cost = prediction_cost(data, net.modules, transient=50)
        assert cost / (n - 50) == pytest.approx(1.0, rel=0.03)

    def test_unstable_candidate_is_infinite(self):
        net = two_node_fir()
        data = simulate(net, Emp.uniform({1}, {2}, 1.0, 0.1), 300, seed=5)
        bad = [ParamModule("first_order", (1.2, 1.0))]
        assert prediction_cost(data, bad) == np.inf

    def test_gradient_matches_finite_differences(self):
        net = three_node_fo()
        emp = Emp.uniform({1, 2}, {3}, 1.0, 0.1)
        data = simulate(net, emp, 400, seed=6)
        theta0 = np.concatenate([m.theta for m in net.modules])
        grad = prediction_cost_gradient(data, net.modules)
        step = 1e-6
        fd = np.empty_like(theta0)
        for m in range(theta0.size):
            up, dn = theta0.copy(), theta0.copy()
            up[m] += step
            dn[m] -= step

            def rebuild(flat):
                return [
                    ParamModule("first_order", tuple(flat[2 * k : 2 * k + 2]))
                    for k in range(2)
                ]

            fd[m] = (
                prediction_cost(data, rebuild(up)) - prediction_cost(data, rebuild(dn))
            ) / (2 * step)
        np.testing.assert_allclose(grad, fd, rtol=1e-5, atol=1e-5)

    def test_gradient_rejects_unstable(self):
        net = two_node_fir()
        data = simulate(net, Emp.uniform({1}, {2}, 1.0, 0.1), 300, seed=7)
        with pytest.raises(ValueError, match="unstable"):
            prediction_cost_gradient(data, [ParamModule("first_order", (1.5, 1.0))])


class TestPemFit:
    def test_noiseless_recovery_fir(self):
        net = two_node_fir()
        emp = Emp(frozenset({1}), frozenset({2}), {1: 1.0}, {2: 0.0})
        data = simulate(net, emp, 600, seed=8)
        fit = pem_fit(data, net.modules, theta_init=[(0.5, 0.0, 0.0)])
        assert fit.converged
        np.testing.assert_allclose(fit.theta, (0.8, -0.25, 0.1), atol=1e-8)

    def test_fir_linear_problem_takes_one_step(self):
        net = two_node_fir()
        data = simulate(net, Emp.uniform({1}, {2}, 1.0, 0.05), 1000, seed=9)
        fit = pem_fit(data, net.modules, theta_init=[(0.7, -0.2, 0.05)])
        assert fit.status == "gradient"
        assert fit.n_iter == 1

    def test_noiseless_recovery_first_order(self):
        net = three_node_fo()
        emp = Emp(frozenset({1, 2}), frozenset({3}), {1: 1.0, 2: 1.0}, {3: 0.0})
        data = simulate(net, emp, 800, seed=10)
        init = [(-0.3, 1.0), (0.2, 0.9)]
        fit = pem_fit(data, net.modules, theta_init=init)
        assert fit.converged
        np.testing.assert_allclose(fit.theta, (-0.4, 1.2, 0.3, 0.7), atol=1e-6)

    def test_init_size_mismatch(self):
        net = two_node_fir()
        data = simulate(net, Emp.uniform({1}, {2}, 1.0, 0.1), 200, seed=11)
        with pytest.raises(ValueError, match="parameter count"):
            pem_fit(data, net.modules, theta_init=[(0.5, 0.1)])

    def test_unstable_init_rejected(self):
        net = three_node_fo()
        data = simulate(net, Emp.uniform({1}, {2, 3}, 1.0, 0.1), 200, seed=12)
        with pytest.raises(ValueError, match="unstable"):
            pem_fit(data, net.modules, theta_init=[(1.4, 1.0), (0.3, 0.7)])


class TestDatasetCsv:
    def test_round_trip_exact(self, tmp_path):
        net = three_node_fo()
        emp = Emp.uniform({1, 2}, {3}, 1.0, 0.1)
        data = simulate(net, emp, 64, seed=13)
        path = tmp_path / "record.csv"
        dataset_to_csv(data, path)
        r, y = dataset_from_csv(path)
        assert sorted(r) == [1, 2] and sorted(y) == [3]
        np.testing.assert_array_equal(r[1], data.r[1])
        np.testing.assert_array_equal(r[2], data.r[2])
        np.testing.assert_array_equal(y[3], data.y[3])


class TestEmpiricalCovariance:
    def test_replication_floor(self):
        net = two_node_fir()
        with pytest.raises(ValueError, match="replications"):
            empirical_covariance(net, Emp.uniform({1}, {2}, 1.0, 0.1), 500, 10)

    def test_two_node_fir_agrees_with_theory(self):
        net = two_node_fir()
        emp = Emp.uniform({1}, {2}, 1.0, 0.1)
        check = empirical_covariance(net, emp, n_samples=1500, replications=60, seed=21)
        assert check.reliable
        assert check.n_failed == 0
        assert check.scale_samples == 1450
        # 60 replications put the sampling noise of the trace around 15%
        assert check.rel_deviation < 0.35
