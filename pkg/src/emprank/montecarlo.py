"""Monte Carlo selection-frequency experiments over random cascades.

Each run draws a fresh network from one of three random module families,
applies an optional parameter perturbation, assigns variances, ranks every
minimal pattern, and records the winner.  Aggregated over many runs this
reproduces the selection-frequency tables and the accuracy-ratio statistics
used to judge how much choosing the right pattern matters.

Runs are reproducible independent of worker count: run r of a scenario with
master seed s uses the dedicated stream seeded by (s, r).
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.signal import butter, lfilter

from .cascade import CascadeNetwork
from .emp import pattern_label, enumerate_minimal
from .fisher import NonInformativeError
from .lti import FIR, FIRST_ORDER, SECOND_ORDER, ParamModule, is_stable, realize
from .ranking import VarianceProfile, rank_emps

__all__ = [
    "FIR_BUTTERWORTH",
    "MODULE_FAMILIES",
    "Perturbation",
    "RatioStats",
    "ScenarioConfig",
    "ScenarioReport",
    "ratio_stats",
    "run_scenario",
    "sample_fir_butterworth",
    "sample_first_order",
    "sample_second_order",
]

log = logging.getLogger(__name__)

FIR_BUTTERWORTH = "fir_butterworth"
MODULE_FAMILIES = (FIR_BUTTERWORTH, FIRST_ORDER, SECOND_ORDER)

FIR_TAP_CUTOFF = 1e-4
EQUAL_SIGMA2 = 1.0
EQUAL_LAMBDA = 0.01
RANDOM_LOW = 0.001
RANDOM_HIGH = 50.0


def sample_fir_butterworth(rng):
    """FIR module: truncated impulse response of a random lowpass Butterworth.

    A second-order lowpass Butterworth is designed by bilinear transform
    (cutoff prewarped) at 1 Hz sampling with cutoff drawn uniformly from
    [0.1, 0.4] cycles/sample, and its impulse response is kept up to the last
    tap of magnitude at least 1e-4.
    """
    cutoff = rng.uniform(0.1, 0.4)
    b, a = butter(2, cutoff, btype="low", fs=1.0)
    x = np.zeros(512)
    x[0] = 1.0
    h = lfilter(b, a, x)
    above = np.flatnonzero(np.abs(h) >= FIR_TAP_CUTOFF)
    taps = h[: int(above[-1]) + 1] if above.size else h[:1]
    return ParamModule(FIR, tuple(taps))


def sample_first_order(rng):
    """First-order module b/(q+a) with a ~ U(0.1, 0.9), b ~ U(0.5, 2)."""
    a = rng.uniform(0.1, 0.9)
    b = rng.uniform(0.5, 2.0)
    return ParamModule(FIRST_ORDER, (a, b))


def sample_second_order(rng):
    """Second-order module with poles from the right half of the unit disk.

    With probability 1/2 the poles are a complex-conjugate pair drawn
    area-uniformly from the upper-right quarter disk, otherwise two
    independent real poles uniform on [0, 1).  The single zero is real,
    uniform on [-3, 3], with the numerator left monic in q.
    """
    if rng.random() < 0.5:
        radius = np.sqrt(rng.uniform(0.0, 1.0))
        phase = rng.uniform(0.0, np.pi / 2)
        t3 = -2.0 * radius * np.cos(phase)
        t4 = radius * radius
    else:
        p1 = rng.uniform(0.0, 1.0)
        p2 = rng.uniform(0.0, 1.0)
        t3 = -(p1 + p2)
        t4 = p1 * p2
    zero = rng.uniform(-3.0, 3.0)
    return ParamModule(SECOND_ORDER, (1.0, -zero, t3, t4))


_SAMPLERS = {
    FIR_BUTTERWORTH: sample_fir_butterworth,
    FIRST_ORDER: sample_first_order,
    SECOND_ORDER: sample_second_order,
}


@dataclass(frozen=True)
class Perturbation:
    """Scale parameter ``param`` (0-indexed) of module ``module`` (1-indexed)."""

    module: int
    param: int = 0
    factor: float = 10.0


@dataclass(frozen=True)
class ScenarioConfig:
    n: int
    family: str
    runs: int
    variance_mode: str = "equal"  # "equal": sigma2=1, lambda=0.01; "random": U(0.001, 50)
    identical: bool = False  # draw one module and repeat it along the chain
    perturbation: Perturbation = None
    master_seed: int = 0
    criterion: str = "trace"

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("selection experiments need at least 3 nodes")
        if self.family not in MODULE_FAMILIES:
            raise ValueError(f"family must be one of {MODULE_FAMILIES}, got {self.family!r}")
        if self.runs < 1:
            raise ValueError("runs must be positive")
        if self.variance_mode not in ("equal", "random"):
            raise ValueError(f"variance_mode must be 'equal' or 'random', got {self.variance_mode!r}")
        if self.criterion not in ("trace", "logdet"):
            raise ValueError(f"criterion must be 'trace' or 'logdet', got {self.criterion!r}")
        if self.perturbation is not None:
            p = self.perturbation
            if not 1 <= p.module <= self.n - 1:
                raise ValueError(f"perturbation module {p.module} outside 1..{self.n - 1}")
            if p.param < 0:
                raise ValueError("perturbation parameter index must be >= 0")

    def to_dict(self):
        d = {
            "n": self.n,
            "family": self.family,
            "runs": self.runs,
            "variance_mode": self.variance_mode,
            "identical": self.identical,
            "master_seed": self.master_seed,
            "criterion": self.criterion,
        }
        if self.perturbation is not None:
            d["perturbation"] = {
                "module": self.perturbation.module,
                "param": self.perturbation.param,
                "factor": self.perturbation.factor,
            }
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        pert = d.pop("perturbation", None)
        if pert is not None:
            pert = Perturbation(
                module=int(pert["module"]),
                param=int(pert.get("param", 0)),
                factor=float(pert.get("factor", 10.0)),
            )
        known = {"n", "family", "runs", "variance_mode", "identical", "master_seed", "criterion"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown scenario fields: {sorted(unknown)}")
        return cls(perturbation=pert, **d)


@dataclass
class RunOutcome:
    winner: int = None  # canonical pattern index
    runner_up_ratio: float = None
    worst_ratio: float = None
    non_informative: int = 0
    rejected: bool = False
    reason: str = None


def _draw_modules(cfg, rng):
    sampler = _SAMPLERS[cfg.family]
    if cfg.identical:
        module = sampler(rng)
        modules = [module] * (cfg.n - 1)
    else:
        modules = [sampler(rng) for _ in range(cfg.n - 1)]
    if cfg.perturbation is not None:
        p = cfg.perturbation
        target = modules[p.module - 1]
        if p.param >= target.n_params:
            raise ValueError(
                f"perturbation parameter {p.param} outside module {p.module} "
                f"with {target.n_params} parameters"
            )
        theta = list(target.theta)
        theta[p.param] *= p.factor
        modules[p.module - 1] = ParamModule(target.family, tuple(theta))
    return modules


def _draw_profile(cfg, rng):
    if cfg.variance_mode == "equal":
        return VarianceProfile(EQUAL_SIGMA2, EQUAL_LAMBDA)
    nodes = range(1, cfg.n + 1)
    sigma2 = {i: rng.uniform(RANDOM_LOW, RANDOM_HIGH) for i in nodes}
    lam = {j: rng.uniform(RANDOM_LOW, RANDOM_HIGH) for j in nodes}
    return VarianceProfile(sigma2, lam)


def _run_one(cfg, run_index):
    rng = np.random.default_rng([cfg.master_seed, run_index])
    modules = _draw_modules(cfg, rng)
    profile = _draw_profile(cfg, rng)
    if any(not is_stable(realize(m)) for m in modules):
        return RunOutcome(rejected=True, reason="unstable draw")
    net = CascadeNetwork(modules)
    try:
        ranking = rank_emps(net, profile, cfg.criterion)
    except NonInformativeError:
        return RunOutcome(rejected=True, reason="no informative pattern")
    return RunOutcome(
        winner=ranking.best.canonical_index,
        runner_up_ratio=ranking.runner_up_ratio(),
        worst_ratio=ranking.worst_ratio(),
        non_informative=len(ranking.non_informative),
    )


def _run_chunk(args):
    cfg, indices = args
    return [_run_one(cfg, r) for r in indices]


@dataclass
class ScenarioReport:
    config: ScenarioConfig
    patterns: list
    counts: np.ndarray
    n_informative_runs: int
    n_rejected_runs: int
    n_noninformative_emps: int
    runner_up_ratios: np.ndarray
    worst_ratios: np.ndarray

    @property
    def percentages(self):
        total = max(self.n_informative_runs, 1)
        return 100.0 * self.counts / total

    @property
    def best_index(self):
        return int(np.argmax(self.counts))

    def to_dict(self):
        stats = ratio_stats(self)
        return {
            "config": self.config.to_dict(),
            "patterns": [pattern_label(p) for p in self.patterns],
            "counts": self.counts.tolist(),
            "percentages": self.percentages.tolist(),
            "n_informative_runs": self.n_informative_runs,
            "n_rejected_runs": self.n_rejected_runs,
            "n_noninformative_emps": self.n_noninformative_emps,
            "median_runner_up_ratio": stats.median_runner_up,
            "median_worst_ratio": stats.median_worst,
        }


def run_scenario(cfg, workers=1, log_every=None):
    """Execute every run of a scenario and aggregate selection frequencies.

    ``workers`` > 1 fans runs out over processes; results are identical to a
    serial execution because every run owns its seed stream.
    """
    patterns = enumerate_minimal(cfg.n)
    outcomes = []
    if workers and workers > 1:
        indices = np.array_split(np.arange(cfg.runs), workers * 8)
        chunks = [(cfg, idx.tolist()) for idx in indices if idx.size]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for done, part in enumerate(pool.map(_run_chunk, chunks), start=1):
                outcomes.extend(part)
                log.info("scenario progress: %d/%d chunks", done, len(chunks))
    else:
        step = log_every or max(1, cfg.runs // 10)
        for r in range(cfg.runs):
            outcomes.append(_run_one(cfg, r))
            if (r + 1) % step == 0:
                log.info("scenario progress: %d/%d runs", r + 1, cfg.runs)
    counts = np.zeros(len(patterns), dtype=int)
    runner, worst = [], []
    rejected = 0
    dead_emps = 0
    for out in outcomes:
        if out.rejected:
            rejected += 1
            continue
        counts[out.winner] += 1
        dead_emps += out.non_informative
        if out.runner_up_ratio is not None:
            runner.append(out.runner_up_ratio)
            worst.append(out.worst_ratio)
    return ScenarioReport(
        config=cfg,
        patterns=patterns,
        counts=counts,
        n_informative_runs=int(counts.sum()),
        n_rejected_runs=rejected,
        n_noninformative_emps=dead_emps,
        runner_up_ratios=np.asarray(runner),
        worst_ratios=np.asarray(worst),
    )


@dataclass(frozen=True)
class RatioStats:
    median_runner_up: float
    median_worst: float


def ratio_stats(report):
    """Median accuracy loss of the runner-up and of the worst pattern, both
    relative to the per-run best (ratios >= 1)."""
    if report.runner_up_ratios.size == 0:
        return RatioStats(None, None)
    return RatioStats(
        float(np.median(report.runner_up_ratios)),
        float(np.median(report.worst_ratios)),
    )
