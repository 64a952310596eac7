"""Seeded generators for the simulation families and the scenario catalog.

Three families: multivariate Gaussian, the Burr-type ratio family built from
exponentials over a shared gamma denominator, and the Dirichlet.  Every
generator is a deterministic function of (parameters, n, seed); streams are
PCG64 via ``SeedSequence`` so datasets reproduce across platforms.
"""

import csv
import enum
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidParameterError
from .seeding import derive_seed, spawn_rng


class Family(enum.Enum):
    MVG = "MVG"
    BOUNDED_BURR = "BOUNDED_BURR"
    DIRICHLET = "DIRICHLET"


@dataclass(frozen=True, eq=False)
class MvgParams:
    mean: np.ndarray
    cov: np.ndarray


@dataclass(frozen=True)
class BurrParams:
    alpha: float
    dim: int


@dataclass(frozen=True, eq=False)
class DirichletParams:
    beta: np.ndarray


@dataclass(frozen=True, eq=False)
class Scenario:
    scenario_id: str
    family: Family
    null_params: object
    alt_params: object
    dim: int
    is_null: bool


def sample_mvg(mean, cov, n: int, seed: int) -> np.ndarray:
    """n Gaussian draws with the given mean and covariance.

    The covariance is applied through its Cholesky factor; a matrix that does
    not factor (not symmetric positive-definite) is rejected.
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
        raise InvalidInputError("mean must be a d-vector and cov a d x d matrix")
    if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12):
        raise InvalidParameterError("covariance matrix must be symmetric")
    try:
        factor = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise InvalidParameterError("covariance matrix is not positive-definite") from exc
    rng = spawn_rng(seed)
    return mean + rng.standard_normal((n, mean.size)) @ factor.T


def sample_bounded_burr(
    alpha: float, d: int, n: int, seed: int, *, unit_interval: bool = False
) -> np.ndarray:
    """Rows (E_1/G, ..., E_d/G) with E_i ~ Exp(1) i.i.d. and G ~ Gamma(alpha, 1).

    ``unit_interval=True`` additionally maps every ratio r to r/(1+r), i.e.
    E_i/(E_i+G), compactifying the support into the d-dimensional unit cube
    while keeping the same dependence through the shared denominator.
    """
    if alpha <= 0.0:
        raise InvalidParameterError("alpha must be positive")
    if d < 1 or n < 1:
        raise InvalidInputError("d and n must be >= 1")
    rng = spawn_rng(seed)
    e = rng.standard_exponential((n, d))
    g = rng.gamma(alpha, 1.0, size=n)
    ratio = e / g[:, None]
    if unit_interval:
        return ratio / (1.0 + ratio)
    return ratio


def sample_dirichlet(beta, n: int, seed: int) -> np.ndarray:
    """Dirichlet draws via normalized gamma variates, one row per draw."""
    beta = np.asarray(beta, dtype=float)
    if beta.ndim != 1 or beta.size < 1:
        raise InvalidInputError("beta must be a nonempty vector")
    if np.any(beta <= 0.0):
        raise InvalidParameterError("all concentration components must be positive")
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    rng = spawn_rng(seed)
    g = rng.gamma(beta, 1.0, size=(n, beta.size))
    return g / g.sum(axis=1)[:, None]


_MU_NULL = np.zeros(5)
_MU_1 = np.array([0.05, 0.01, -0.05, 0.0, 0.101])
_MU_2 = np.array([0.11, 0.022, -0.011, 0.0, 0.222])
_MU_3 = np.array([0.5, 0.1, -0.5, 0.0, 1.01])

_SIGMA_1 = np.array(
    [
        [1.065, 0.044, -0.036, 0.01, 0.019],
        [0.044, 1.081, 0.006, 0.023, -0.016],
        [-0.036, 0.006, 1.066, -0.016, -0.024],
        [0.01, 0.023, -0.016, 1.046, -0.026],
        [0.019, -0.016, -0.024, -0.026, 1.039],
    ]
)
_SIGMA_2 = np.array(
    [
        [1.1475, 0.066, -0.054, 0.015, 0.0285],
        [0.066, 1.1715, 0.009, 0.0345, -0.024],
        [-0.054, 0.009, 1.149, -0.024, -0.036],
        [0.0150, 0.0345, -0.024, 1.1190, -0.039],
        [0.0285, -0.024, -0.036, -0.039, 1.1085],
    ]
)
_SIGMA_3 = np.array(
    [
        [1.65, 0.44, -0.36, 0.1, 0.19],
        [0.44, 1.81, 0.6, 0.23, -0.16],
        [-0.36, 0.6, 1.66, -0.16, -0.24],
        [0.1, 0.23, -0.16, 1.46, -0.26],
        [0.19, -0.16, -0.24, -0.26, 1.39],
    ]
)

_BURR_ALPHAS = (1.0, 1.25, 1.5, 1.75, 2.0, 0.75, 0.5)

_BETA_1 = np.ones(5)
_DIRICHLET_BETAS = (
    _BETA_1,
    1.5 * np.ones(5),
    0.5 * np.ones(5),
    np.array([1.015, 0.95, 1.043, 0.975, 0.98]),
    np.array([1.27, 0.59, 1.55, 1.23, 0.36]),
    2.0 * np.ones(5),
)


def scenario_catalog() -> list[Scenario]:
    """All null/alternative pairs used in the simulation studies.

    The X sample always comes from the family's null parameters; the Y sample
    comes from the row's alternative (equal to the null for the level rows).
    """
    scenarios: list[Scenario] = []
    mvg_null = MvgParams(mean=_MU_NULL, cov=np.eye(5))
    mvg_alts = [
        ("mvg-null", mvg_null),
        ("mvg-mu1", MvgParams(mean=_MU_1, cov=np.eye(5))),
        ("mvg-mu2", MvgParams(mean=_MU_2, cov=np.eye(5))),
        ("mvg-mu3", MvgParams(mean=_MU_3, cov=np.eye(5))),
        ("mvg-sigma1", MvgParams(mean=_MU_NULL, cov=_SIGMA_1)),
        ("mvg-sigma2", MvgParams(mean=_MU_NULL, cov=_SIGMA_2)),
        ("mvg-sigma3", MvgParams(mean=_MU_NULL, cov=_SIGMA_3)),
    ]
    for sid, alt in mvg_alts:
        scenarios.append(
            Scenario(sid, Family.MVG, mvg_null, alt, dim=5, is_null=sid == "mvg-null")
        )
    burr_null = BurrParams(alpha=1.0, dim=5)
    for i, alpha in enumerate(_BURR_ALPHAS, start=1):
        scenarios.append(
            Scenario(
                f"burr-alpha{i}",
                Family.BOUNDED_BURR,
                burr_null,
                BurrParams(alpha=alpha, dim=5),
                dim=5,
                is_null=i == 1,
            )
        )
    dirichlet_null = DirichletParams(beta=_BETA_1)
    for i, beta in enumerate(_DIRICHLET_BETAS, start=1):
        scenarios.append(
            Scenario(
                f"dirichlet-beta{i}",
                Family.DIRICHLET,
                dirichlet_null,
                DirichletParams(beta=beta),
                dim=5,
                is_null=i == 1,
            )
        )
    return scenarios


def scenario_by_id(scenario_id: str) -> Scenario:
    for scen in scenario_catalog():
        if scen.scenario_id == scenario_id:
            return scen
    raise KeyError(scenario_id)


def scenario_with_dim(scenario: Scenario, dim: int) -> Scenario:
    """Same scenario in another dimension (ratio family only)."""
    if scenario.family is not Family.BOUNDED_BURR:
        raise InvalidParameterError(
            "only the Burr-type scenarios support a dimension override"
        )
    if dim < 1:
        raise InvalidInputError("dim must be >= 1")
    return Scenario(
        scenario_id=scenario.scenario_id,
        family=scenario.family,
        null_params=BurrParams(alpha=scenario.null_params.alpha, dim=dim),
        alt_params=BurrParams(alpha=scenario.alt_params.alpha, dim=dim),
        dim=dim,
        is_null=scenario.is_null,
    )


def _sample_params(family: Family, params, n: int, seed: int) -> np.ndarray:
    if family is Family.MVG:
        return sample_mvg(params.mean, params.cov, n, seed)
    if family is Family.BOUNDED_BURR:
        return sample_bounded_burr(params.alpha, params.dim, n, seed)
    return sample_dirichlet(params.beta, n, seed)


def sample_scenario_pair(
    scenario: Scenario, n: int, m: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Independent (X, Y) pair: X from the null, Y from the alternative."""
    x = _sample_params(scenario.family, scenario.null_params, n, derive_seed(seed, 0))
    y = _sample_params(scenario.family, scenario.alt_params, m, derive_seed(seed, 1))
    return x, y


def export_csv(data: np.ndarray, path, *, header: bool = False) -> None:
    """Write a dataset as a d-column CSV, optionally with an x1..xd header."""
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise InvalidInputError("dataset must be 2-d")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if header:
            writer.writerow([f"x{j + 1}" for j in range(data.shape[1])])
        for row in data:
            writer.writerow([format(v, ".17g") for v in row])
