"""Permutation two-sample tests from entropic optimal transport on k-means partitions."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    InvalidInputError,
    InvalidParameterError,
    KernelUnderflowError,
)
from .otcore import (
    CostMatrix,
    DivergenceVariant,
    FixedIterations,
    MarginalTolerance,
    ProbVector,
    SinkhornSolution,
    TransportPlan,
    cost_matrix,
    divergence,
    exact_ot,
    shannon_entropy,
    sinkhorn_solve,
)
from .partition import (
    DoubleCentersSetup,
    FrequencyPair,
    KMeansConfig,
    KMeansResult,
    assign_voronoi,
    double_centers,
    frequencies,
    kmeans,
)
from .twosample import (
    PartitionMode,
    StatisticKind,
    StatisticSpec,
    TestResult,
    permutation_test,
    schilling_statistic,
    sinkhorn_statistic,
)
from .distributions import (
    Family,
    Scenario,
    sample_bounded_burr,
    sample_dirichlet,
    sample_mvg,
    sample_scenario_pair,
    scenario_by_id,
    scenario_catalog,
)
from .asymptotics import (
    CltEstimate,
    NuSample,
    block_cov,
    clt_estimate,
    estimate_iteration_bound,
    fd_gradient,
    multinomial_cov,
    normality_check,
    nu_statistic,
)
from .harness import (
    ExperimentConfig,
    PowerRow,
    build_specs,
    run_clt_study,
    run_power_study,
    run_pvalue_histogram,
)

__all__ = [name for name in dir() if not name.startswith("_")]
