"""Simulate cascade experiments and identify the modules by prediction error.

The point of this module is an end-to-end check of the covariance engine:
simulate records under a pattern, fit the module parameters by weighted
least squares on the one-step predictions (damped Gauss-Newton with analytic
gradients, weights 1/lambda_j from the true noise variances), and compare the
sample covariance of sqrt(N)*(theta_hat - theta0) across replications with
the theoretical per-sample covariance P.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .cascade import CascadeNetwork
from .emp import Emp
from .fisher import criterion, gradient_stack, information_matrix
from .lti import ParamModule, is_stable, realize

__all__ = [
    "CovarianceCheck",
    "Dataset",
    "FitResult",
    "dataset_from_csv",
    "dataset_to_csv",
    "empirical_covariance",
    "pem_fit",
    "prediction_cost",
    "prediction_cost_gradient",
    "simulate",
]

TRANSIENT = 50
MIN_REPLICATIONS = 30


@dataclass
class Dataset:
    """One simulated record: excitations r per excited node, outputs y per
    measured node, plus the generating truth."""

    r: dict
    y: dict
    truth_net: CascadeNetwork
    truth_emp: Emp
    seed: object = None

    @property
    def n_samples(self):
        return len(next(iter(self.y.values())))


def simulate(net, emp, n_samples, seed=None):
    """Propagate white excitations down the cascade and add sensor noise.

    Node signals start at rest (zero initial conditions).  Excitations are
    drawn first for the excited nodes in ascending order, then the sensor
    noises in ascending order, all mutually independent Gaussians.
    """
    rng = np.random.default_rng(seed)
    n = net.n
    r = {
        i: rng.normal(0.0, np.sqrt(emp.sigma2[i]), n_samples)
        for i in sorted(emp.excited)
    }
    e = {
        j: rng.normal(0.0, np.sqrt(emp.lam[j]), n_samples) if emp.lam[j] > 0 else np.zeros(n_samples)
        for j in sorted(emp.measured)
    }
    w = np.zeros((n + 1, n_samples))
    if 1 in r:
        w[1] = r[1]
    for k in range(1, n):
        b, a = net.module_tf(k).shift_coefficients()
        w[k + 1] = lfilter(b, a, w[k])
        if k + 1 in r:
            w[k + 1] += r[k + 1]
    y = {j: w[j] + e[j] for j in sorted(emp.measured)}
    return Dataset(r=r, y=y, truth_net=net, truth_emp=emp, seed=seed)


def dataset_to_csv(dataset, path):
    """Write a record as columns t, r_<node>..., y_<node>... for external checks."""
    rs = sorted(dataset.r)
    ys = sorted(dataset.y)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"r_{i}" for i in rs] + [f"y_{j}" for j in ys])
        for t in range(dataset.n_samples):
            row = [t]
            row += [repr(float(dataset.r[i][t])) for i in rs]
            row += [repr(float(dataset.y[j][t])) for j in ys]
            writer.writerow(row)


def dataset_from_csv(path):
    """Read back the (r, y) signal dictionaries written by dataset_to_csv."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        columns = {name: [] for name in header}
        for row in reader:
            for name, value in zip(header, row):
                columns[name].append(float(value))
    r = {int(k[2:]): np.asarray(v) for k, v in columns.items() if k.startswith("r_")}
    y = {int(k[2:]): np.asarray(v) for k, v in columns.items() if k.startswith("y_")}
    return r, y


def _flatten(modules):
    return np.concatenate([np.asarray(m.theta) for m in modules])


def _rebuild(structure, flat):
    out = []
    pos = 0
    for m in structure:
        out.append(ParamModule(m.family, tuple(flat[pos: pos + m.n_params])))
        pos += m.n_params
    return out


def _try_network(modules):
    if any(not is_stable(realize(m)) for m in modules):
        return None
    return CascadeNetwork(modules)


def _predictions(net, data):
    yhat = {}
    for j in sorted(data.y):
        total = np.zeros(data.n_samples)
        for i in sorted(data.r):
            if i > j:
                continue
            b, a = net.path_gain(i, j).shift_coefficients()
            total += lfilter(b, a, data.r[i])
        yhat[j] = total
    return yhat


def _residual_weights(data, transient):
    # noise-free channels (lam == 0) keep unit weight instead of an
    # infinite one; their residuals vanish at the truth anyway
    emp = data.truth_emp
    return {
        j: 1.0 / np.sqrt(emp.lam[j]) if emp.lam[j] > 0 else 1.0
        for j in sorted(data.y)
    }


def prediction_cost(data, modules, transient=TRANSIENT):
    """Weighted prediction-error cost sum_j sum_t (y_j - yhat_j)^2 / lambda_j,
    skipping the first ``transient`` samples."""
    net = _try_network(modules)
    if net is None:
        return np.inf
    weights = _residual_weights(data, transient)
    yhat = _predictions(net, data)
    cost = 0.0
    for j in sorted(data.y):
        res = (data.y[j] - yhat[j])[transient:] * weights[j]
        cost += float(res @ res)
    return cost


def _linearize(data, net, transient):
    """Stacked weighted residuals and their Jacobian w.r.t. all parameters."""
    dims = [m.n_params for m in net.modules]
    offsets = np.concatenate([[0], np.cumsum(dims)]).astype(int)
    weights = _residual_weights(data, transient)
    yhat = _predictions(net, data)
    res_parts = []
    jac_parts = []
    for j in sorted(data.y):
        psi = np.zeros((data.n_samples, int(offsets[-1])))
        for i in sorted(data.r):
            if i >= j:
                continue
            stack = gradient_stack(net, i, j)
            for k, entries in stack.blocks.items():
                for m, tf in enumerate(entries):
                    b, a = tf.shift_coefficients()
                    psi[:, offsets[k - 1] + m] += lfilter(b, a, data.r[i])
        res_parts.append((data.y[j] - yhat[j])[transient:] * weights[j])
        jac_parts.append(-psi[transient:] * weights[j])
    return np.concatenate(res_parts), np.vstack(jac_parts)


def prediction_cost_gradient(data, modules, transient=TRANSIENT):
    """Analytic gradient of prediction_cost at the given modules."""
    net = _try_network(modules)
    if net is None:
        raise ValueError("gradient undefined for an unstable candidate")
    res, jac = _linearize(data, net, transient)
    return 2.0 * (jac.T @ res)


@dataclass
class FitResult:
    modules: list
    theta: np.ndarray
    cost: float
    converged: bool
    n_iter: int
    status: str


def pem_fit(
    data,
    structure,
    theta_init=None,
    max_iter=50,
    cost_tol=1e-12,
    grad_tol=1e-9,
    transient=TRANSIENT,
):
    """Damped Gauss-Newton prediction-error fit of the cascade modules.

    ``structure`` fixes the family and parameter count of each module;
    ``theta_init`` (list of per-module vectors, default: the structure's own
    parameters) is the starting point.  Steps are halved until the cost
    decreases, so the cost never increases along the iteration; candidates
    realizing an unstable module are rejected the same way.  Non-convergence
    within ``max_iter`` is reported, not raised.
    """
    structure = list(structure)
    if theta_init is None:
        flat = _flatten(structure)
    else:
        flat = np.concatenate([np.atleast_1d(np.asarray(t, float)) for t in theta_init])
        if flat.size != sum(m.n_params for m in structure):
            raise ValueError("theta_init does not match the structure's parameter count")
    modules = _rebuild(structure, flat)
    net = _try_network(modules)
    if net is None:
        raise ValueError("initial parameters realize an unstable module")
    res, jac = _linearize(data, net, transient)
    cost = float(res @ res)
    status = "max_iter"
    n_accepted = 0
    for _ in range(max_iter):
        grad = 2.0 * (jac.T @ res)
        if np.max(np.abs(grad)) <= grad_tol * max(1.0, cost):
            status = "gradient"
            break
        step, *_ = np.linalg.lstsq(jac, -res, rcond=None)
        alpha = 1.0
        accepted = False
        while alpha >= 2.0 ** -30:
            trial_flat = flat + alpha * step
            trial_modules = _rebuild(structure, trial_flat)
            trial_net = _try_network(trial_modules)
            if trial_net is not None:
                trial_res, trial_jac = _linearize(data, trial_net, transient)
                trial_cost = float(trial_res @ trial_res)
                if trial_cost < cost:
                    flat, modules, net = trial_flat, trial_modules, trial_net
                    res, jac = trial_res, trial_jac
                    improvement = cost - trial_cost
                    cost = trial_cost
                    accepted = True
                    n_accepted += 1
                    break
            alpha *= 0.5
        if not accepted:
            status = "stalled"
            break
        if improvement <= cost_tol * max(cost, 1.0):
            status = "cost"
            break
    converged = status in ("gradient", "cost") or (
        status == "stalled" and np.max(np.abs(2.0 * (jac.T @ res))) <= 1e-6 * max(1.0, cost)
    )
    return FitResult(
        modules=modules,
        theta=flat,
        cost=cost,
        converged=converged,
        n_iter=n_accepted,
        status=status,
    )


@dataclass
class CovarianceCheck:
    theoretical_trace: float
    empirical_trace: float
    rel_deviation: float
    replications: int
    n_failed: int
    reliable: bool
    scale_samples: int


def empirical_covariance(net, emp, n_samples, replications, seed=0, transient=TRANSIENT, max_iter=50):
    """Monte Carlo check of the theoretical covariance.

    Runs ``replications`` independent simulate/fit cycles initialized at the
    truth and compares the sample covariance trace of sqrt(N_eff) * (theta_hat
    - theta0), N_eff being the fitted sample count, with trace(P) from the
    information engine.  More than 5% failed fits marks the check unreliable.
    """
    if replications < MIN_REPLICATIONS:
        raise ValueError(f"need at least {MIN_REPLICATIONS} replications, got {replications}")
    theory = criterion(information_matrix(net, emp), "trace")
    truth = _flatten(net.modules)
    n_eff = n_samples - transient
    deviations = []
    failed = 0
    for rep in range(replications):
        data = simulate(net, emp, n_samples, seed=[seed, rep])
        fit = pem_fit(data, net.modules, transient=transient, max_iter=max_iter)
        if not fit.converged:
            failed += 1
            continue
        deviations.append(np.sqrt(n_eff) * (fit.theta - truth))
    dev = np.asarray(deviations)
    if dev.shape[0] < 2:
        empirical = float("nan")
    else:
        centered = dev - dev.mean(axis=0)
        sample_cov = centered.T @ centered / (dev.shape[0] - 1)
        empirical = float(np.trace(sample_cov))
    return CovarianceCheck(
        theoretical_trace=float(theory),
        empirical_trace=empirical,
        rel_deviation=abs(empirical - theory) / theory if np.isfinite(empirical) else float("inf"),
        replications=replications,
        n_failed=failed,
        reliable=bool(failed <= 0.05 * replications and np.isfinite(empirical)),
        scale_samples=n_eff,
    )
