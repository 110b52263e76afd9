"""Cascade network topology: n nodes chained by n-1 SISO modules.

Module k (1-indexed) sits on the edge from node k to node k+1, so the only
signal paths run forward along the chain and the node-to-node transfer matrix
is unit-lower-triangular.  Path gains are built structurally as products of
the edge filters; no matrix inversion is ever performed.
"""

from __future__ import annotations

from .lti import UnstableFilterError, is_stable, realize, series, unit_filter, zero_filter

__all__ = ["CascadeNetwork"]


class CascadeNetwork:
    """Immutable chain of stable modules.

    Parameters
    ----------
    modules : sequence of ParamModule
        Edge filters in chain order; module k connects node k to node k+1.

    Raises
    ------
    UnstableFilterError
        If any realized module fails the stability margin.  The message names
        the offending module.
    """

    def __init__(self, modules):
        modules = tuple(modules)
        if not modules:
            raise ValueError("a cascade needs at least one module (two nodes)")
        tfs = []
        for k, module in enumerate(modules, start=1):
            tf = realize(module)
            if not is_stable(tf):
                raise UnstableFilterError(
                    f"module {k} is unstable (pole magnitude {tf.pole_radius():.6g})"
                )
            tfs.append(tf)
        self._modules = modules
        self._tfs = tuple(tfs)
        self._paths = {}
        self._scratch = {}  # memo space for derived per-network quantities

    @property
    def n(self):
        """Number of nodes."""
        return len(self._modules) + 1

    @property
    def modules(self):
        return self._modules

    @property
    def identical_modules(self):
        return all(m == self._modules[0] for m in self._modules[1:])

    def module_tf(self, k):
        """Realized filter of module k (1-indexed)."""
        if not 1 <= k <= self.n - 1:
            raise ValueError(f"module index {k} outside 1..{self.n - 1}")
        return self._tfs[k - 1]

    def path_gain(self, i, j):
        """Product of the module filters along the path from node i to node j.

        path_gain(i, i) is the unit filter; i > j raises because a cascade has
        no reverse paths.
        """
        n = self.n
        if not (1 <= i <= n and 1 <= j <= n):
            raise ValueError(f"nodes must lie in 1..{n}, got ({i}, {j})")
        if i > j:
            raise ValueError(f"no path from node {i} back to node {j} in a cascade")
        if i == j:
            return unit_filter()
        key = (i, j)
        tf = self._paths.get(key)
        if tf is None:
            tf = series(self.path_gain(i, j - 1), self._tfs[j - 2])
            self._paths[key] = tf
        return tf

    def transfer_matrix(self):
        """Full node-to-node closed-loop map as an n x n grid of filters.

        Entry [j-1][i-1] carries node i into node j: unit on the diagonal,
        the path gain below it, zero above.
        """
        n = self.n
        zero = zero_filter()
        return [
            [self.path_gain(i, j) if i <= j else zero for i in range(1, n + 1)]
            for j in range(1, n + 1)
        ]

    def __repr__(self):
        return f"CascadeNetwork(n={self.n}, modules={list(self._modules)!r})"
