"""Experiment design for cascade networks.

Given a chain of dynamic modules driven through known excitations and read
out through noisy sensors, this package enumerates every minimal
excitation/measurement pattern, computes the asymptotic covariance of the
module-parameter estimates each pattern yields, and ranks the patterns by
scalar accuracy criteria.  A Monte Carlo layer reproduces selection-frequency
experiments over random networks, and a prediction-error fitting layer checks
the asymptotic covariance against simulated data.
"""

from .cascade import CascadeNetwork
from .emp import (
    Emp,
    direct_modules,
    enumerate_minimal,
    is_minimal,
    mirror,
    pattern_label,
)
from .fisher import (
    GradientStack,
    InfoResult,
    NonInformativeError,
    criterion,
    gradient_stack,
    information_matrix,
    white_correlation,
)
from .lti import (
    ParamModule,
    StructureError,
    TransferFunction,
    UnstableFilterError,
    impulse_response,
    is_stable,
    param_jacobian,
    realize,
    series,
    unit_filter,
    zero_filter,
)
from .montecarlo import (
    Perturbation,
    ScenarioConfig,
    ScenarioReport,
    ratio_stats,
    run_scenario,
)
from .pem import (
    CovarianceCheck,
    Dataset,
    FitResult,
    dataset_from_csv,
    dataset_to_csv,
    empirical_covariance,
    pem_fit,
    prediction_cost,
    simulate,
)
from .ranking import (
    EmpRanking,
    MirrorReport,
    VarianceProfile,
    covariance_block_identities,
    mirror_permutation,
    module_accuracy_report,
    rank_emps,
    snr_rule_3node,
    snr_rule_4node,
    verify_mirror,
)

__version__ = "0.1.0"

__all__ = [
    "CascadeNetwork",
    "CovarianceCheck",
    "Dataset",
    "Emp",
    "EmpRanking",
    "FitResult",
    "GradientStack",
    "InfoResult",
    "MirrorReport",
    "NonInformativeError",
    "ParamModule",
    "Perturbation",
    "ScenarioConfig",
    "ScenarioReport",
    "StructureError",
    "TransferFunction",
    "UnstableFilterError",
    "VarianceProfile",
    "covariance_block_identities",
    "criterion",
    "dataset_from_csv",
    "dataset_to_csv",
    "direct_modules",
    "empirical_covariance",
    "enumerate_minimal",
    "gradient_stack",
    "impulse_response",
    "information_matrix",
    "is_minimal",
    "is_stable",
    "mirror",
    "mirror_permutation",
    "module_accuracy_report",
    "param_jacobian",
    "pattern_label",
    "pem_fit",
    "prediction_cost",
    "rank_emps",
    "ratio_stats",
    "realize",
    "run_scenario",
    "series",
    "simulate",
    "snr_rule_3node",
    "snr_rule_4node",
    "unit_filter",
    "verify_mirror",
    "zero_filter",
]
