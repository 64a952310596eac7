"""Permutation two-sample tests.

The engine pools the two samples, freezes the pooled-sample partition, and
re-evaluates the chosen statistic over random relabelings.  The p-value is
the fraction of replicas at or above the observed value.

Statistics:

* ``W``        exact transport cost between the cell-frequency vectors,
* ``S`` / ``S_HAT`` / ``S_BAR``   entropic divergences between them,
* ``SCHILLING``  same-sample fraction among k-nearest-neighbor pairs of the
  pooled sample.

The transport statistics run either on the pooled k-means cells with the
inter-center cost matrix (``BASIC``) or on per-cell per-sample centers with
zero-padded frequencies (``DOUBLE_CENTERS``).
"""

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import otcore
from .errors import InvalidInputError, InvalidParameterError
from .otcore import (
    DivergenceVariant,
    MarginalTolerance,
    StoppingRule,
    cost_matrix,
)
from .partition import (
    KMeansConfig,
    KMeansResult,
    as_dataset,
    assign_voronoi,
    double_centers,
    kmeans,
)
from .seeding import derive_seed, spawn_rng


class StatisticKind(enum.Enum):
    W = "W"
    S = "S"
    S_HAT = "S_HAT"
    S_BAR = "S_BAR"
    SCHILLING = "SCHILLING"


class PartitionMode(enum.Enum):
    BASIC = "BASIC"
    DOUBLE_CENTERS = "DOUBLE_CENTERS"


_VARIANTS = {
    StatisticKind.S: DivergenceVariant.S,
    StatisticKind.S_HAT: DivergenceVariant.S_HAT,
    StatisticKind.S_BAR: DivergenceVariant.S_BAR,
}


@dataclass(frozen=True)
class StatisticSpec:
    """Which statistic to run and on what reduction of the data.

    ``lam`` is ignored for W and SCHILLING, ``mode`` and ``k_clusters`` for
    SCHILLING, ``knn_k`` for everything but SCHILLING.
    """

    kind: StatisticKind
    lam: float = 1.0
    mode: PartitionMode = PartitionMode.DOUBLE_CENTERS
    k_clusters: int = 10
    knn_k: int = 4

    def __post_init__(self):
        object.__setattr__(self, "kind", StatisticKind(self.kind))
        object.__setattr__(self, "mode", PartitionMode(self.mode))
        if self.kind in _VARIANTS and self.lam <= 0.0:
            raise InvalidParameterError("lambda must be positive")
        if self.kind is not StatisticKind.SCHILLING and self.k_clusters < 2:
            raise InvalidParameterError("k_clusters must be >= 2")
        if self.kind is StatisticKind.SCHILLING and self.knn_k < 1:
            raise InvalidParameterError("knn_k must be >= 1")


@dataclass(frozen=True, eq=False)
class TestResult:
    observed: float
    replicas: np.ndarray
    p_value: float
    b_used: int


def _knn_neighbors(points: np.ndarray, knn_k: int) -> np.ndarray:
    """Indices of the knn_k nearest neighbors per row, self excluded.

    Distance ties resolve to the lower index (stable sort order).
    """
    d2 = (
        (points * points).sum(axis=1)[:, None]
        + (points * points).sum(axis=1)[None, :]
        - 2.0 * (points @ points.T)
    )
    np.fill_diagonal(d2, np.inf)
    order = np.argsort(d2, axis=1, kind="stable")
    return order[:, :knn_k]


def _same_sample_fraction(neighbors: np.ndarray, member: np.ndarray) -> float:
    return float(np.mean(member[neighbors] == member[:, None]))


def schilling_statistic(x, y, knn_k: int = 4) -> float:
    """Fraction of pooled k-NN (point, neighbor) pairs within one sample."""
    x = as_dataset(x)
    y = as_dataset(y)
    n, m = x.shape[0], y.shape[0]
    if knn_k >= n + m:
        raise InvalidInputError("knn_k must be smaller than the pooled size")
    if knn_k < 1:
        raise InvalidParameterError("knn_k must be >= 1")
    pooled = np.vstack([x, y])
    neighbors = _knn_neighbors(pooled, knn_k)
    member = np.zeros(n + m, dtype=bool)
    member[:n] = True
    return _same_sample_fraction(neighbors, member)


def _ot_value(
    spec: StatisticSpec,
    stop: StoppingRule,
    a: np.ndarray,
    b: np.ndarray,
    d: np.ndarray,
    kernel: np.ndarray | None,
) -> float:
    if spec.kind is StatisticKind.W:
        return otcore._exact_ot_arrays(a, b, d)[0]
    if kernel is None:
        kernel = otcore._kernel(d, spec.lam)

    def s_hat(p, q):
        u, v, _, _ = otcore._scalings(p, q, kernel, stop)
        return otcore._plan_from_scalings(u, kernel, v)

    plan = s_hat(a, b)
    cost_ab = otcore._transport_cost(d, plan)
    if spec.kind is StatisticKind.S_HAT:
        return cost_ab
    if spec.kind is StatisticKind.S:
        return cost_ab - spec.lam * otcore._entropy(plan)
    self_a = otcore._transport_cost(d, s_hat(a, a))
    self_b = otcore._transport_cost(d, s_hat(b, b))
    return cost_ab - 0.5 * (self_a + self_b)


def _make_ot_evaluator(
    pooled: np.ndarray,
    labels: np.ndarray,
    n: int,
    partition: KMeansResult,
    spec: StatisticSpec,
    stop: StoppingRule,
) -> Callable[[np.ndarray], float]:
    k = partition.centers.shape[0]
    m = pooled.shape[0] - n
    if spec.mode is PartitionMode.BASIC:
        d = cost_matrix(partition.centers).entries
        kernel = None
        if spec.kind in _VARIANTS:
            kernel = otcore._kernel(d, spec.lam)

        def evaluate(perm: np.ndarray) -> float:
            a = np.bincount(labels[perm[:n]], minlength=k) / n
            b = np.bincount(labels[perm[n:]], minlength=k) / m
            return _ot_value(spec, stop, a, b, d, kernel)

    else:

        def evaluate(perm: np.ndarray) -> float:
            xi, yi = perm[:n], perm[n:]
            dc = double_centers(pooled[xi], pooled[yi], labels[xi], labels[yi], k)
            return _ot_value(
                spec, stop, dc.a_pad.weights, dc.b_pad.weights, dc.cost.entries, None
            )

    return evaluate


def sinkhorn_statistic(
    x, y, partition: KMeansResult, spec: StatisticSpec, stop: StoppingRule | None = None
) -> float:
    """Transport statistic of the (x, y) split on a frozen pooled partition."""
    if spec.kind is StatisticKind.SCHILLING:
        raise InvalidInputError("sinkhorn_statistic expects a transport statistic kind")
    x = as_dataset(x)
    y = as_dataset(y)
    pooled = np.vstack([x, y])
    labels = assign_voronoi(pooled, partition.centers)
    evaluate = _make_ot_evaluator(
        pooled, labels, x.shape[0], partition, spec, stop or MarginalTolerance()
    )
    return evaluate(np.arange(pooled.shape[0]))


def permutation_test(
    x,
    y,
    spec: StatisticSpec,
    B: int,
    seed: int,
    *,
    partition: KMeansResult | None = None,
    kmeans_cfg: KMeansConfig | None = None,
    stop: StoppingRule | None = None,
    conservative: bool = False,
) -> TestResult:
    """Permutation p-value of the chosen statistic on samples x and y.

    The pooled sample is formed once.  For transport statistics the pooled
    k-means partition (passed in via ``partition`` or fitted here) is reused
    by every replica; replica ``b`` draws its n/m relabeling from the stream
    (seed, b).  ``conservative`` switches the p-value to (count+1)/(B+1).
    """
    if B < 1:
        raise InvalidParameterError("number of permutations B must be >= 1")
    x = as_dataset(x)
    y = as_dataset(y)
    if x.shape[1] != y.shape[1]:
        raise InvalidInputError("samples must share the same dimension")
    n, m = x.shape[0], y.shape[0]
    total = n + m
    pooled = np.vstack([x, y])

    if spec.kind is StatisticKind.SCHILLING:
        if spec.knn_k >= total:
            raise InvalidInputError("knn_k must be smaller than the pooled size")
        neighbors = _knn_neighbors(pooled, spec.knn_k)
        base_member = np.zeros(total, dtype=bool)
        base_member[:n] = True
        observed = _same_sample_fraction(neighbors, base_member)

        def evaluate(perm: np.ndarray) -> float:
            member = np.zeros(total, dtype=bool)
            member[perm[:n]] = True
            return _same_sample_fraction(neighbors, member)

    else:
        if spec.k_clusters > total:
            raise InvalidInputError("k_clusters cannot exceed the pooled size")
        if partition is None:
            cfg = kmeans_cfg or KMeansConfig(seed=derive_seed(seed, 0xC1))
            partition = kmeans(pooled, spec.k_clusters, cfg)
        labels = assign_voronoi(pooled, partition.centers)
        evaluate = _make_ot_evaluator(
            pooled, labels, n, partition, spec, stop or MarginalTolerance()
        )
        observed = evaluate(np.arange(total))

    replicas = np.empty(B)
    for b_i in range(B):
        perm = spawn_rng(seed, b_i).permutation(total)
        replicas[b_i] = evaluate(perm)
    count = int(np.sum(replicas >= observed))
    p_value = (count + 1) / (B + 1) if conservative else count / B
    replicas.flags.writeable = False
    return TestResult(observed=float(observed), replicas=replicas, p_value=p_value, b_used=B)
