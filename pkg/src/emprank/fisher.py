"""Asymptotic information and covariance of cascade module estimates.

For a measured node j fed from an excited node i < j, the prediction-error
gradient with respect to the parameters of module k (i <= k < j) is the
derivative filter of module k times the path gains on both sides of it:

    entry(k, m) = dG_k/dtheta_{k,m} * path(i, k) * path(k+1, j)

applied to the excitation at node i.  Stacking these entries over the modules
between i and j gives the gradient stack of the pair.  Because excitations
and sensor noises are white and mutually independent, the per-sample
information matrix is

    M = sum_{j measured} sum_{i excited, i < j} (sigma_i^2 / lambda_j) *
        Gram(stack_ij)

where Gram is the matrix of inner products of the stacked impulse responses.
The per-sample asymptotic covariance of the parameter estimates is P = M^-1,
computed through a symmetric eigendecomposition and only when the matrix is
numerically invertible; cov(theta_hat) over N samples is then P/N.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .lti import DEFAULT_MAX_LEN, DEFAULT_TAIL_TOL, impulse_response, param_jacobian, series

__all__ = [
    "Correlation",
    "GradientStack",
    "InfoResult",
    "NonInformativeError",
    "RCOND_THRESHOLD",
    "criterion",
    "gradient_stack",
    "information_matrix",
    "white_correlation",
]

RCOND_THRESHOLD = 1e-10
CRITERIA = ("trace", "logdet")


class NonInformativeError(RuntimeError):
    """The experiment does not carry enough information to invert M."""


@dataclass(frozen=True)
class GradientStack:
    """Per-module derivative filters for one excited/measured node pair.

    ``blocks[k]`` holds the tuple of entry filters for module k, present only
    for i <= k < j; other modules are structurally absent from the stack.
    """

    source: int
    sink: int
    blocks: dict


def gradient_stack(net, i, j):
    """Gradient stack of the pair excited node i -> measured node j.

    i >= j yields an empty stack: the direct feedthrough of a node into its
    own sensor carries no parameter information and reverse paths do not
    exist in a cascade.
    """
    if i >= j:
        return GradientStack(i, j, {})
    blocks = {}
    for k in range(i, j):
        base = series(net.path_gain(i, k), net.path_gain(k + 1, j))
        blocks[k] = tuple(series(d, base) for d in param_jacobian(net.modules[k - 1]))
    return GradientStack(i, j, blocks)


class Correlation(NamedTuple):
    matrix: np.ndarray
    converged: bool


def _response_matrix(filters, max_len, tail_tol):
    rows = []
    converged = True
    for tf in filters:
        h, ok = impulse_response(tf, max_len=max_len, tail_tol=tail_tol)
        converged &= ok
        rows.append(h)
    width = max(r.size for r in rows)
    out = np.zeros((len(rows), width))
    for r, h in zip(out, rows):
        r[: h.size] = h
    return out, converged


def white_correlation(a, b, variance, max_len=DEFAULT_MAX_LEN, tail_tol=DEFAULT_TAIL_TOL):
    """Steady-state correlation matrix of two filter banks driven by shared white noise.

    Entry (p, q) is variance * sum_t h_{a_p}(t) h_{b_q}(t), the expectation
    E[(a_p(q) r)(t) (b_q(q) r)(t)] for white r of the given variance.  The
    result is flagged non-converged if any truncation hit max_len first.
    """
    ha, ok_a = _response_matrix(a, max_len, tail_tol)
    hb, ok_b = _response_matrix(b, max_len, tail_tol)
    width = max(ha.shape[1], hb.shape[1])
    ha = np.pad(ha, ((0, 0), (0, width - ha.shape[1])))
    hb = np.pad(hb, ((0, 0), (0, width - hb.shape[1])))
    return Correlation(variance * (ha @ hb.T), ok_a and ok_b)


def _stack_gram(net, i, j, max_len, tail_tol):
    """Gram matrix of the (i, j) stack at unit variance, memoized per network."""
    key = ("gram", i, j, max_len, tail_tol)
    hit = net._scratch.get(key)
    if hit is None:
        stack = gradient_stack(net, i, j)
        filters = [tf for k in range(i, j) for tf in stack.blocks[k]]
        h, ok = _response_matrix(filters, max_len, tail_tol)
        hit = (h @ h.T, ok)
        net._scratch[key] = hit
    return hit


def _param_layout(net):
    dims = [m.n_params for m in net.modules]
    offsets = np.concatenate([[0], np.cumsum(dims)])
    slices = [slice(int(offsets[k]), int(offsets[k + 1])) for k in range(len(dims))]
    return slices, int(offsets[-1])


@dataclass
class InfoResult:
    """Information matrix M, covariance P (None when non-informative), and
    derived per-module diagnostics for one pattern on one network."""

    M: np.ndarray
    P: np.ndarray
    blocks: list
    rcond: float
    converged: bool
    param_slices: list
    criteria: dict
    asymmetry: float

    @property
    def informative(self):
        return self.P is not None

    def block_traces(self):
        if self.blocks is None:
            return None
        return [float(np.trace(b)) for b in self.blocks]


def information_matrix(
    net,
    emp,
    max_len=DEFAULT_MAX_LEN,
    tail_tol=DEFAULT_TAIL_TOL,
    rcond_threshold=RCOND_THRESHOLD,
):
    """Assemble the per-sample information matrix of a pattern and invert it.

    Parameters are ordered module-major (all of module 1, then module 2, ...).
    Only excited/measured pairs with i < j contribute.  The assembled matrix
    is symmetrized, and inverted only when the eigenvalue ratio clears
    ``rcond_threshold``; otherwise the result reports a non-informative
    pattern with P=None.
    """
    slices, dim = _param_layout(net)
    offsets = [s.start for s in slices] + [dim]
    M = np.zeros((dim, dim))
    converged = True
    for j in sorted(emp.measured):
        lam = emp.lam[j]
        for i in sorted(emp.excited):
            if i >= j:
                continue
            if lam <= 0:
                raise ValueError(
                    f"noise variance at measured node {j} must be positive to assemble M"
                )
            gram, ok = _stack_gram(net, i, j, max_len, tail_tol)
            converged &= ok
            sl = slice(offsets[i - 1], offsets[j - 1])
            M[sl, sl] += (emp.sigma2[i] / lam) * gram
    norm = np.linalg.norm(M)
    asymmetry = float(np.linalg.norm(M - M.T) / norm) if norm > 0 else 0.0
    M = 0.5 * (M + M.T)
    w, v = np.linalg.eigh(M)
    wmax = float(w[-1]) if dim else 0.0
    rcond = float(max(w[0], 0.0) / wmax) if wmax > 0 else 0.0
    if rcond <= rcond_threshold:
        return InfoResult(M, None, None, rcond, converged, slices, None, asymmetry)
    P = (v / w) @ v.T
    P = 0.5 * (P + P.T)
    blocks = [P[s, s] for s in slices]
    criteria = {
        "trace": float(np.sum(1.0 / w)),
        "logdet": float(-np.sum(np.log(w))),
    }
    return InfoResult(M, P, blocks, rcond, converged, slices, criteria, asymmetry)


def criterion(result, kind="trace"):
    """Scalar design criterion of a covariance result: trace(P) or logdet(P)."""
    if kind not in CRITERIA:
        raise ValueError(f"criterion must be one of {CRITERIA}, got {kind!r}")
    if not result.informative:
        raise NonInformativeError(
            f"pattern is non-informative (rcond={result.rcond:.3g}); no covariance exists"
        )
    return result.criteria[kind]
