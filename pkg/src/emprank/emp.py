"""Excitation and measurement patterns (EMPs) on a cascade of n nodes.

A pattern is a pair of node sets: excited nodes carry a white excitation of
known variance, measured nodes carry a sensor with white measurement noise.
The identifiable patterns of least total cardinality partition the interior
nodes: node 1 is always excited, node n always measured, and every node in
between is either excited or measured but not both, giving 2^(n-2) minimal
patterns.
"""

from __future__ import annotations

from dataclasses import dataclass, field

__all__ = [
    "Emp",
    "direct_modules",
    "enumerate_minimal",
    "is_minimal",
    "mirror",
    "pattern_label",
]


@dataclass(frozen=True)
class Emp:
    """An excitation/measurement pattern with per-node variances.

    sigma2 maps every excited node to its excitation variance (> 0); lam maps
    every measured node to its noise variance (>= 0, zero meaning a noiseless
    sensor, usable in simulation but not in information assembly).
    """

    excited: frozenset
    measured: frozenset
    sigma2: dict = field(default_factory=dict)
    lam: dict = field(default_factory=dict)

    def __post_init__(self):
        excited = frozenset(int(i) for i in self.excited)
        measured = frozenset(int(j) for j in self.measured)
        if not excited or not measured:
            raise ValueError("a pattern needs at least one excited and one measured node")
        if min(excited | measured) < 1:
            raise ValueError("nodes are 1-indexed")
        sigma2 = {int(k): float(v) for k, v in self.sigma2.items()}
        lam = {int(k): float(v) for k, v in self.lam.items()}
        if set(sigma2) != set(excited):
            raise ValueError("sigma2 must be keyed exactly by the excited nodes")
        if set(lam) != set(measured):
            raise ValueError("lam must be keyed exactly by the measured nodes")
        if any(v <= 0 for v in sigma2.values()):
            raise ValueError("excitation variances must be positive")
        if any(v < 0 for v in lam.values()):
            raise ValueError("noise variances must be non-negative")
        object.__setattr__(self, "excited", excited)
        object.__setattr__(self, "measured", measured)
        object.__setattr__(self, "sigma2", sigma2)
        object.__setattr__(self, "lam", lam)

    @classmethod
    def uniform(cls, excited, measured, sigma2=1.0, lam=1.0):
        """Pattern with one shared excitation variance and one shared noise variance."""
        excited = frozenset(excited)
        measured = frozenset(measured)
        return cls(
            excited,
            measured,
            {i: sigma2 for i in excited},
            {j: lam for j in measured},
        )

    @property
    def pattern(self):
        return (self.excited, self.measured)

    @property
    def label(self):
        return pattern_label(self.pattern)


def pattern_label(pattern):
    b, c = pattern
    return "B={};C={}".format(
        ",".join(str(i) for i in sorted(b)),
        ",".join(str(j) for j in sorted(c)),
    )


def is_minimal(emp, n):
    """Whether the pattern is identifiable with the least possible cardinality.

    Requires node 1 excited, node n measured, every node covered, the two
    sets distinct, and total cardinality exactly n (so the interior nodes are
    partitioned between the sets).
    """
    if n < 2:
        raise ValueError("a cascade has at least 2 nodes")
    b, c = emp.excited, emp.measured
    if max(b | c) > n:
        raise ValueError(f"pattern references nodes beyond {n}")
    return (
        1 in b
        and n in c
        and b | c == frozenset(range(1, n + 1))
        and b != c
        and len(b) + len(c) == n
    )


def enumerate_minimal(n):
    """All minimal patterns of an n-node cascade in a fixed canonical order.

    Interior nodes 2..n-1 are assigned by a binary counter with node 2 as the
    least significant bit; a set bit excites the node, a clear bit measures
    it.  Node 1 is always excited and node n always measured, so the list has
    2^(n-2) entries (a single entry for n = 2).
    """
    if n < 2:
        raise ValueError("a cascade has at least 2 nodes")
    interior = list(range(2, n))
    patterns = []
    for code in range(1 << len(interior)):
        b = {1}
        c = {n}
        for bit, node in enumerate(interior):
            if code >> bit & 1:
                b.add(node)
            else:
                c.add(node)
        patterns.append((frozenset(b), frozenset(c)))
    return patterns


def mirror(emp, n):
    """Reflect a pattern end-for-end: node j maps to n - j + 1 and the roles swap.

    Excited nodes become measured ones and vice versa; each variance value
    travels with its node position, so sigma2 at node j becomes lam at node
    n - j + 1 and the other way around.
    """
    if max(emp.excited | emp.measured) > n:
        raise ValueError(f"pattern references nodes beyond {n}")
    return Emp(
        frozenset(n - j + 1 for j in emp.measured),
        frozenset(n - i + 1 for i in emp.excited),
        {n - j + 1: v for j, v in emp.lam.items()},
        {n - i + 1: v for i, v in emp.sigma2.items()},
    )


def direct_modules(emp):
    """Modules whose input node is excited and whose output node is measured."""
    return {i for i in emp.excited if i + 1 in emp.measured}
