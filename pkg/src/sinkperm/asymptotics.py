"""Numerical apparatus for the Gaussian limit of the fixed-iteration statistic.

Builds the multinomial covariance of the cell indicators, the block
covariance for the two independent samples, a finite-difference gradient of
the fixed-iteration transport cost, and the centered, effective-size-scaled
statistic whose distribution the limit describes.  The normality check is
Shapiro-Wilk (Royston's approximation, valid up to n = 5000).
"""

from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import otcore
from .errors import InvalidInputError, InvalidParameterError
from .otcore import FixedIterations, MarginalTolerance, as_prob_vector, cost_matrix
from .partition import KMeansConfig, KMeansResult, as_dataset, assign_voronoi, kmeans
from .seeding import spawn_rng


@dataclass(frozen=True, eq=False)
class CltEstimate:
    """Plug-in estimate of the limiting Gaussian variance.

    ``predicted_var`` is the quadratic form of ``j_grad`` against the block
    covariance ``c_matrix``.
    """

    a_star: otcore.ProbVector
    sigma: np.ndarray
    c_matrix: np.ndarray
    j_grad: np.ndarray
    alpha_ratio: float
    i_fixed: int
    predicted_var: float


@dataclass(frozen=True, eq=False)
class NuSample:
    values: np.ndarray
    n: int
    m: int
    n_e: float


def multinomial_cov(a_star) -> np.ndarray:
    """Covariance of the first k-1 cell indicators under cell weights a_star."""
    a = as_prob_vector(a_star).weights
    if a.size < 2:
        raise InvalidInputError("need at least two cells")
    t = a[:-1]
    return np.diag(t) - np.outer(t, t)


def block_cov(sigma: np.ndarray, alpha_ratio: float) -> np.ndarray:
    """Block-diagonal [(1-alpha) Sigma, alpha Sigma] covariance."""
    if not 0.0 < alpha_ratio < 1.0:
        raise InvalidParameterError("alpha_ratio must lie strictly between 0 and 1")
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise InvalidInputError("sigma must be square")
    z = np.zeros_like(sigma)
    return np.block([[(1.0 - alpha_ratio) * sigma, z], [z, alpha_ratio * sigma]])


def _fixed_s_hat(a: np.ndarray, b: np.ndarray, d: np.ndarray, kernel: np.ndarray, i_fixed: int) -> float:
    u, v, _, _ = otcore._scalings(a, b, kernel, FixedIterations(i_fixed))
    return otcore._transport_cost(d, otcore._plan_from_scalings(u, kernel, v))


def fd_gradient(a_star, cost, lam: float, i_fixed: int, epsilon: float = 1e-7) -> np.ndarray:
    """One-sided difference quotients of the fixed-iteration transport cost.

    Coordinate i < k-1 moves mass epsilon from component i to the last
    component of the first argument; the second half of the output does the
    same on the second argument.  Evaluated at (a_star, a_star).
    """
    a = as_prob_vector(a_star).weights
    cost = otcore.as_cost_matrix(cost)
    k = a.size
    if k < 2:
        raise InvalidInputError("need at least two cells")
    if len(cost) != k:
        raise InvalidInputError("cost matrix dimension must match a_star")
    if epsilon <= 0.0:
        raise InvalidParameterError("epsilon must be positive")
    if np.any(a[:-1] <= epsilon):
        raise InvalidParameterError("every perturbed coordinate must exceed epsilon")
    if a[-1] + epsilon > 1.0:
        raise InvalidParameterError("last coordinate cannot absorb epsilon")
    kernel = otcore._kernel(cost.entries, lam)
    d = cost.entries
    base = _fixed_s_hat(a, a, d, kernel, i_fixed)
    grad = np.empty(2 * (k - 1))
    for i in range(k - 1):
        perturbed = a.copy()
        perturbed[i] -= epsilon
        perturbed[-1] += epsilon
        grad[i] = (base - _fixed_s_hat(perturbed, a, d, kernel, i_fixed)) / epsilon
        grad[k - 1 + i] = (base - _fixed_s_hat(a, perturbed, d, kernel, i_fixed)) / epsilon
    return grad


def clt_estimate(
    a_star, cost, lam: float, i_fixed: int, alpha_ratio: float, epsilon: float = 1e-7
) -> CltEstimate:
    """Assemble the plug-in variance J C J' from the cell weights and cost."""
    a_star = as_prob_vector(a_star)
    sigma = multinomial_cov(a_star)
    c_matrix = block_cov(sigma, alpha_ratio)
    j_grad = fd_gradient(a_star, cost, lam, i_fixed, epsilon)
    predicted = max(float(j_grad @ c_matrix @ j_grad), 0.0)
    return CltEstimate(
        a_star=a_star,
        sigma=sigma,
        c_matrix=c_matrix,
        j_grad=j_grad,
        alpha_ratio=alpha_ratio,
        i_fixed=i_fixed,
        predicted_var=predicted,
    )


def nu_statistic(
    x,
    y,
    k: int,
    lam: float,
    i_fixed: int,
    reference,
    *,
    partition: KMeansResult | None = None,
    kmeans_cfg: KMeansConfig | None = None,
) -> float:
    """Centered, scaled fixed-iteration statistic on the pooled partition.

    The pooled (x, y) k-means cells carry three frequency vectors: the two
    sample frequencies and the reference-sample frequencies standing in for
    the population cell probabilities.  Both transport costs run the same
    fixed iteration count on the inter-center cost matrix.
    """
    x = as_dataset(x)
    y = as_dataset(y)
    reference = as_dataset(reference)
    n, m = x.shape[0], y.shape[0]
    if partition is None:
        partition = kmeans(np.vstack([x, y]), k, kmeans_cfg or KMeansConfig())
    centers = partition.centers
    d = cost_matrix(centers).entries
    kernel = otcore._kernel(d, lam)
    kk = centers.shape[0]
    a_hat = np.bincount(assign_voronoi(x, centers), minlength=kk) / n
    b_hat = np.bincount(assign_voronoi(y, centers), minlength=kk) / m
    a_star = np.bincount(assign_voronoi(reference, centers), minlength=kk) / reference.shape[0]
    s_ab = _fixed_s_hat(a_hat, b_hat, d, kernel, i_fixed)
    s_star = _fixed_s_hat(a_star, a_star, d, kernel, i_fixed)
    n_e = n * m / (n + m)
    return float(np.sqrt(n_e) * (s_ab - s_star))


def estimate_iteration_bound(
    x,
    y,
    k: int,
    lam: float,
    seed: int,
    *,
    replicas: int = 100,
    partition: KMeansResult | None = None,
    kmeans_cfg: KMeansConfig | None = None,
    stop: MarginalTolerance | None = None,
) -> int:
    """Largest tolerance-stopped iteration count over random relabelings.

    Mirrors the permutation engine's replica streams so the bound reflects
    the vectors the fixed-iteration runs will actually see.
    """
    x = as_dataset(x)
    y = as_dataset(y)
    n, m = x.shape[0], y.shape[0]
    pooled = np.vstack([x, y])
    if partition is None:
        partition = kmeans(pooled, k, kmeans_cfg or KMeansConfig())
    centers = partition.centers
    kk = centers.shape[0]
    d = cost_matrix(centers).entries
    kernel = otcore._kernel(d, lam)
    stop = stop or MarginalTolerance()
    labels = assign_voronoi(pooled, centers)

    def iterations(idx: np.ndarray) -> int:
        a = np.bincount(labels[idx[:n]], minlength=kk) / n
        b = np.bincount(labels[idx[n:]], minlength=kk) / m
        return otcore._scalings(a, b, kernel, stop)[2]

    bound = iterations(np.arange(n + m))
    for b_i in range(replicas):
        bound = max(bound, iterations(spawn_rng(seed, b_i).permutation(n + m)))
    return bound


def normality_check(values) -> tuple[float, float]:
    """Shapiro-Wilk statistic and p-value for 20 <= len <= 5000 values."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or not 20 <= v.size <= 5000:
        raise InvalidInputError("normality check needs between 20 and 5000 values")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("values must be finite")
    if np.all(v == v[0]):
        raise InvalidInputError("values are constant; statistic undefined")
    res = stats.shapiro(v)
    return float(res.statistic), float(res.pvalue)
