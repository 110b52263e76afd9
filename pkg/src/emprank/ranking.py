"""Rank minimal patterns by estimation accuracy and check the structural
identities that accuracy obeys on a cascade.

The scalar criteria are trace(P) (A-optimality) and logdet(P) (D-optimality)
of the per-sample asymptotic covariance.  Besides plain ranking this module
carries the quick signal-to-noise decision rules for 3- and 4-node cascades,
the mirror-symmetry verifier, and the closed-form block identities that the
4-node covariances satisfy under identical modules and uniform variances.
SNR(j, i) denotes sigma_i^2 / lambda_j, the strength of the excitation at
node i against the sensor noise at node j.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .emp import Emp, direct_modules, enumerate_minimal, mirror, pattern_label
from .fisher import NonInformativeError, criterion, information_matrix, white_correlation
from .lti import param_jacobian, series

__all__ = [
    "EmpRanking",
    "MirrorPair",
    "MirrorReport",
    "ModuleAccuracyReport",
    "PairwisePreference",
    "RankEntry",
    "VarianceProfile",
    "covariance_block_identities",
    "mirror_permutation",
    "module_accuracy_report",
    "rank_emps",
    "snr_rule_3node",
    "snr_rule_4node",
    "verify_mirror",
]

TIE_REL = 1e-12


@dataclass(frozen=True)
class VarianceProfile:
    """Excitation/noise variances to apply to any pattern.

    Each field is either a scalar shared by all nodes or a node-keyed map;
    a map must cover every node the pattern assigns to that role.
    """

    sigma2: object = 1.0
    lam: object = 1.0

    def sigma2_at(self, node):
        return float(self.sigma2[node] if isinstance(self.sigma2, Mapping) else self.sigma2)

    def lam_at(self, node):
        return float(self.lam[node] if isinstance(self.lam, Mapping) else self.lam)

    @property
    def uniform(self):
        def spread(v):
            return len(set(v.values())) > 1 if isinstance(v, Mapping) else False

        return not spread(self.sigma2) and not spread(self.lam)

    def emp_for(self, pattern):
        b, c = pattern
        return Emp(
            frozenset(b),
            frozenset(c),
            {i: self.sigma2_at(i) for i in b},
            {j: self.lam_at(j) for j in c},
        )


@dataclass
class RankEntry:
    emp: Emp
    canonical_index: int
    value: float
    block_traces: list
    directs: set
    info: object


@dataclass
class EmpRanking:
    """Informative patterns sorted ascending by the chosen criterion.

    Near-ties (relative gap below 1e-12) are ordered by canonical enumeration
    index so the ranking is deterministic.  Patterns whose information matrix
    could not be inverted are kept aside in ``non_informative``.
    """

    kind: str
    entries: list
    non_informative: list

    @property
    def best(self):
        return self.entries[0]

    def runner_up_ratio(self):
        if len(self.entries) < 2:
            return None
        return self.entries[1].value / self.entries[0].value

    def worst_ratio(self):
        if len(self.entries) < 2:
            return None
        return self.entries[-1].value / self.entries[0].value


def rank_emps(net, profile, kind="trace", **info_kwargs):
    """Evaluate every minimal pattern of the network and sort by criterion."""
    entries = []
    dead = []
    for idx, pattern in enumerate(enumerate_minimal(net.n)):
        emp = profile.emp_for(pattern)
        res = information_matrix(net, emp, **info_kwargs)
        if not res.informative:
            dead.append((emp, idx, res.rcond))
            continue
        entries.append(
            RankEntry(
                emp=emp,
                canonical_index=idx,
                value=criterion(res, kind),
                block_traces=res.block_traces(),
                directs=direct_modules(emp),
                info=res,
            )
        )
    if not entries:
        raise NonInformativeError(
            "every minimal pattern is non-informative for this network"
        )
    entries.sort(key=lambda e: (e.value, e.canonical_index))
    ordered = []
    i = 0
    while i < len(entries):
        j = i + 1
        head = entries[i].value
        while j < len(entries) and entries[j].value <= head * (1.0 + TIE_REL):
            j += 1
        ordered.extend(sorted(entries[i:j], key=lambda e: e.canonical_index))
        i = j
    return EmpRanking(kind=kind, entries=ordered, non_informative=dead)


def snr_rule_3node(snr21, snr32):
    """Choose between the two minimal 3-node patterns from their direct-module SNRs.

    Exciting the middle node (pattern B={1,2}, C={3}) is strictly better when
    snr32 > snr21, strictly worse when snr32 < snr21, and an exact trace tie
    at equality.  Returns the winning (B, C) pair, or None for the tie.
    """
    if snr32 > snr21:
        return (frozenset({1, 2}), frozenset({3}))
    if snr32 < snr21:
        return (frozenset({1}), frozenset({2, 3}))
    return None


@dataclass(frozen=True)
class PairwisePreference:
    better: tuple
    worse: tuple
    status: str  # "holds" | "does not hold" | "inconclusive"
    margins: tuple  # (lhs, rhs) SNR pairs the rule compares

    @property
    def label(self):
        return f"{pattern_label(self.better)} beats {pattern_label(self.worse)}"


def snr_rule_4node(sigma2, lam):
    """Sufficient pairwise orderings of the 4-node minimal patterns from SNRs alone.

    Each record states that one pattern beats another whenever every listed
    SNR comparison holds strictly; equality anywhere makes the rule
    inconclusive.  The comparisons pit the direct-module SNR of the preferred
    pattern against that of the other, plus the cross pair for the two
    end-loaded patterns.  These are one-way tests: "does not hold" does not
    assert the reverse ordering.
    """
    end_excited = (frozenset({1}), frozenset({2, 3, 4}))
    end_measured = (frozenset({1, 2, 3}), frozenset({4}))
    balanced = (frozenset({1, 2}), frozenset({3, 4}))

    def snr(j, i):
        return sigma2[i] / lam[j]

    rules = [
        (end_measured, end_excited, ((snr(4, 3), snr(2, 1)), (snr(4, 2), snr(3, 1)))),
        (balanced, end_excited, ((snr(3, 2), snr(2, 1)),)),
        (balanced, end_measured, ((snr(3, 2), snr(4, 3)),)),
    ]
    out = []
    for better, worse, margins in rules:
        if any(lhs < rhs for lhs, rhs in margins):
            status = "does not hold"
        elif any(lhs == rhs for lhs, rhs in margins):
            status = "inconclusive"
        else:
            status = "holds"
        out.append(PairwisePreference(better, worse, status, margins))
    return out


def mirror_permutation(dims):
    """Index permutation that reverses module blocks while keeping each
    block's internal parameter order."""
    offsets = np.concatenate([[0], np.cumsum(dims)])
    return np.concatenate(
        [np.arange(offsets[k], offsets[k + 1]) for k in reversed(range(len(dims)))]
    ).astype(int)


@dataclass
class MirrorPair:
    pattern: tuple
    mirror_pattern: tuple
    trace_deviation: float
    m_deviation: float
    self_mirrored: bool


@dataclass
class MirrorReport:
    hypotheses_met: bool
    pairs: list
    excluded: list

    @property
    def max_trace_deviation(self):
        return max((p.trace_deviation for p in self.pairs), default=0.0)

    @property
    def max_m_deviation(self):
        return max((p.m_deviation for p in self.pairs), default=0.0)


def verify_mirror(net, profile=VarianceProfile(), **info_kwargs):
    """Check that mirrored patterns carry identical information.

    Under identical modules and uniform variances the information matrix of a
    mirrored pattern equals the original with its module blocks reversed, so
    criterion values coincide.  The report says whether those hypotheses hold
    for the given network/profile and lists the measured deviations either
    way (relative trace gap and relative block-reversed M gap per pair).

    Both members of a pair are evaluated under the same variance profile;
    only the node sets are reflected.
    """
    hypotheses = net.identical_modules and profile.uniform
    dims = [m.n_params for m in net.modules]
    perm = mirror_permutation(dims)
    seen = set()
    pairs = []
    excluded = []
    for pattern in enumerate_minimal(net.n):
        if pattern in seen:
            continue
        emp = profile.emp_for(pattern)
        mpattern = mirror(emp, net.n).pattern
        memp = profile.emp_for(mpattern)
        seen.add(pattern)
        seen.add(mpattern)
        res = information_matrix(net, emp, **info_kwargs)
        mres = information_matrix(net, memp, **info_kwargs)
        scale = max(np.linalg.norm(res.M), 1e-300)
        m_dev = float(np.linalg.norm(mres.M - res.M[np.ix_(perm, perm)]) / scale)
        if not (res.informative and mres.informative):
            excluded.append((pattern, mpattern, "non-informative"))
            continue
        t, mt = criterion(res, "trace"), criterion(mres, "trace")
        pairs.append(
            MirrorPair(
                pattern=pattern,
                mirror_pattern=mpattern,
                trace_deviation=abs(t - mt) / t,
                m_deviation=m_dev,
                self_mirrored=pattern == mpattern,
            )
        )
    return MirrorReport(hypotheses_met=hypotheses, pairs=pairs, excluded=excluded)


@dataclass
class ModuleAccuracyReport:
    """Per-module accuracy of one pattern: covariance block trace and whether
    the module is direct (excited input node, measured output node)."""

    emp: Emp
    rows: list  # (module index, block trace, is_direct)
    informative: bool
    hypotheses_met: bool  # identical modules and uniform variances
    directs_most_accurate: object  # bool under hypotheses, else None

    def block_trace(self, k):
        return self.rows[k - 1][1]


def module_accuracy_report(net, emp, **info_kwargs):
    res = information_matrix(net, emp, **info_kwargs)
    directs = direct_modules(emp)
    uniform = (
        len(set(emp.sigma2.values())) <= 1 and len(set(emp.lam.values())) <= 1
    )
    hypotheses = net.identical_modules and uniform
    if not res.informative:
        return ModuleAccuracyReport(emp, [], False, hypotheses, None)
    traces = res.block_traces()
    rows = [(k, traces[k - 1], k in directs) for k in range(1, net.n)]
    verdict = None
    if hypotheses and directs and len(directs) < net.n - 1:
        best_direct = min(traces[k - 1] for k in directs)
        rest = min(t for k, t, d in rows if not d)
        verdict = bool(best_direct <= rest * (1 + 1e-9))
    return ModuleAccuracyReport(emp, rows, True, hypotheses, verdict)


def covariance_block_identities(net, profile, **info_kwargs):
    """Closed-form check of the 4-node covariance blocks.

    With identical modules and uniform variances, the per-module covariance
    blocks of all four minimal patterns are explicit functions of the three
    elementary grams

        A = (s/l) E[d r x d r],  B = (s/l) E[dG r x dG r],
        C = (s/l) E[dGG r x dGG r]

    where d is the module derivative filter bank and G the module itself.
    Returns a report with, per pattern, the worst relative deviation of the
    assembled information matrix from its A/B/C block pattern and of the
    covariance diagonal blocks from their closed forms.
    """
    if net.n != 4:
        raise ValueError("closed-form block identities are specific to 4-node cascades")
    if not net.identical_modules:
        raise ValueError("closed forms require identical modules")
    if not profile.uniform:
        raise ValueError("closed forms require uniform variances")
    module = net.modules[0]
    g = net.module_tf(1)
    s = profile.sigma2_at(1)
    l = profile.lam_at(net.n)
    d = list(param_jacobian(module))
    dg = [series(f, g) for f in d]
    dgg = [series(f, series(g, g)) for f in d]
    a = (s / l) * white_correlation(d, d, 1.0, **info_kwargs).matrix
    b = (s / l) * white_correlation(dg, dg, 1.0, **info_kwargs).matrix
    c = (s / l) * white_correlation(dgg, dgg, 1.0, **info_kwargs).matrix
    inv = np.linalg.inv
    f_abc = inv(inv(inv(a) + inv(b)) + inv(inv(b) + inv(c)))
    blk = np.block
    expected = {
        (frozenset({1}), frozenset({2, 3, 4})): (
            blk([[a + b + c, b + c, c], [b + c, b + c, c], [c, c, c]]),
            [inv(a), inv(a) + inv(b), inv(b) + inv(c)],
        ),
        (frozenset({1, 2, 3}), frozenset({4})): (
            blk([[c, c, c], [c, c + b, c + b], [c, c + b, a + b + c]]),
            [inv(b) + inv(c), inv(a) + inv(b), inv(a)],
        ),
        (frozenset({1, 2}), frozenset({3, 4})): (
            blk([[b + c, b + c, c], [b + c, a + 2 * b + c, b + c], [c, b + c, b + c]]),
            [f_abc, inv(a + inv(2 * inv(b) + inv(c))), f_abc],
        ),
        (frozenset({1, 3}), frozenset({2, 4})): (
            blk([[a + c, c, c], [c, c, c], [c, c, a + c]]),
            [inv(a), 2 * inv(a) + inv(c), inv(a)],
        ),
    }
    report = {}
    for pattern, (m_expect, p_blocks) in expected.items():
        res = information_matrix(net, profile.emp_for(pattern), **info_kwargs)
        m_dev = np.linalg.norm(res.M - m_expect) / np.linalg.norm(m_expect)
        p_dev = max(
            np.linalg.norm(got - want) / max(np.linalg.norm(want), 1e-300)
            for got, want in zip(res.blocks, p_blocks)
        )
        report[pattern] = {"m_deviation": float(m_dev), "block_deviation": float(p_dev)}
    return report
