"""Pooled-sample clustering and frequency-vector extraction.

The two-sample statistics live on a partition of the pooled sample: Lloyd's
algorithm with distance-proportional seeding produces the cells, and the two
samples are reduced to their cell-occupancy frequencies.  The double-centers
construction additionally keeps one center per (cell, sample) pair.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .otcore import CostMatrix, ProbVector, cost_matrix
from .seeding import spawn_rng


@dataclass(frozen=True)
class KMeansConfig:
    restarts: int = 10
    max_iter: int = 300
    seed: int = 0


@dataclass(frozen=True, eq=False)
class KMeansResult:
    centers: np.ndarray
    assignments: np.ndarray
    wss: float


@dataclass(frozen=True, eq=False)
class FrequencyPair:
    a_n: ProbVector
    b_n: ProbVector


@dataclass(frozen=True, eq=False)
class DoubleCentersSetup:
    """Per-cell per-sample centers with zero-padded frequency vectors.

    ``omega`` stacks the X-sample centers then the Y-sample centers; ``a_pad``
    carries the X frequencies followed by zeros, ``b_pad`` zeros followed by
    the Y frequencies; ``cost`` is the squared-distance matrix on ``omega``.
    """

    omega: np.ndarray
    a_pad: ProbVector
    b_pad: ProbVector
    cost: CostMatrix


def as_dataset(data) -> np.ndarray:
    """Validate an n x d matrix of observations (1-d input becomes one column)."""
    x = np.asarray(data, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] < 1:
        raise InvalidInputError("dataset must be a nonempty n x d matrix")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("dataset contains non-finite entries")
    return x


def _sq_dists(data: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # (n, k) squared distances via the expanded form; cheaper than pairwise diffs
    return (
        (data * data).sum(axis=1)[:, None]
        + (centers * centers).sum(axis=1)[None, :]
        - 2.0 * (data @ centers.T)
    )


def assign_voronoi(data, centers) -> np.ndarray:
    """Index of the nearest center for every row, ties to the lowest index."""
    data = as_dataset(data)
    centers = np.asarray(centers, dtype=float)
    if centers.ndim != 2 or centers.shape[1] != data.shape[1]:
        raise InvalidInputError("centers must be a k x d matrix matching the data")
    return np.argmin(_sq_dists(data, centers), axis=1)


def _plusplus_init(data: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = data.shape[0]
    centers = np.empty((k, data.shape[1]))
    centers[0] = data[rng.integers(n)]
    d2 = ((data - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = float(d2.sum())
        if total > 0.0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centers[j] = data[idx]
        d2 = np.minimum(d2, ((data - centers[j]) ** 2).sum(axis=1))
    return centers


def _centroids(
    data: np.ndarray, labels: np.ndarray, previous: np.ndarray, k: int
) -> np.ndarray:
    n, d = data.shape
    counts = np.bincount(labels, minlength=k)
    sums = np.empty((k, d))
    for j in range(d):
        sums[:, j] = np.bincount(labels, weights=data[:, j], minlength=k)
    centers = np.where(counts[:, None] > 0, sums / np.maximum(counts, 1)[:, None], previous)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        # re-seed each empty cluster at the point farthest from its own center
        resid = ((data - centers[labels]) ** 2).sum(axis=1)
        for j in empty:
            far = int(np.argmax(resid))
            centers[j] = data[far]
            resid[far] = -1.0
    return centers


def _lloyd(
    data: np.ndarray,
    centers: np.ndarray,
    max_iter: int,
    wss_trace: list | None = None,
) -> tuple[np.ndarray, np.ndarray, float]:
    k = centers.shape[0]
    labels = np.argmin(_sq_dists(data, centers), axis=1)
    for _ in range(max_iter):
        centers = _centroids(data, labels, centers, k)
        if wss_trace is not None:
            wss_trace.append(float(((data - centers[labels]) ** 2).sum()))
        new_labels = np.argmin(_sq_dists(data, centers), axis=1)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    wss = float(((data - centers[labels]) ** 2).sum())
    return centers, labels, wss


def kmeans(data, k: int, cfg: KMeansConfig = KMeansConfig()) -> KMeansResult:
    """Best-of-``cfg.restarts`` Lloyd clustering, deterministic per seed.

    Each restart draws a distance-proportional initialization from its own
    derived stream; the run with the smallest within-cluster sum of squares
    wins (first one on ties).
    """
    data = as_dataset(data)
    if k < 1 or k > data.shape[0]:
        raise InvalidInputError(f"k must be in [1, n]; got k={k}, n={data.shape[0]}")
    best: tuple[np.ndarray, np.ndarray, float] | None = None
    for r in range(cfg.restarts):
        init = _plusplus_init(data, k, spawn_rng(cfg.seed, r))
        centers, labels, wss = _lloyd(data, init, cfg.max_iter)
        if best is None or wss < best[2]:
            best = (centers, labels, wss)
    centers, labels, wss = best
    return KMeansResult(centers=centers, assignments=labels, wss=wss)


def frequencies(labels_x, labels_y, k: int) -> FrequencyPair:
    """Per-cell occupancy fractions of the two samples."""
    labels_x = _as_labels(labels_x, k)
    labels_y = _as_labels(labels_y, k)
    a = np.bincount(labels_x, minlength=k) / labels_x.size
    b = np.bincount(labels_y, minlength=k) / labels_y.size
    return FrequencyPair(a_n=ProbVector(a), b_n=ProbVector(b))


def _as_labels(labels, k: int) -> np.ndarray:
    lab = np.asarray(labels)
    if lab.ndim != 1 or lab.size < 1:
        raise InvalidInputError("labels must be a nonempty 1-d integer array")
    if not np.issubdtype(lab.dtype, np.integer):
        raise InvalidInputError("labels must be integers")
    if lab.min() < 0 or lab.max() >= k:
        raise InvalidInputError(f"labels out of range [0, {k})")
    return lab


def _per_cell_means(points: np.ndarray, labels: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    counts = np.bincount(labels, minlength=k)
    sums = np.empty((k, points.shape[1]))
    for j in range(points.shape[1]):
        sums[:, j] = np.bincount(labels, weights=points[:, j], minlength=k)
    means = sums / np.maximum(counts, 1)[:, None]
    return means, counts


def double_centers(x, y, labels_x, labels_y, k: int) -> DoubleCentersSetup:
    """Stack per-cell X-means and Y-means into one support with padded weights.

    A cell missing one sample borrows that sample's center from the cell whose
    own center (of the other sample) is closest; a cell missing both samples
    is dropped, shrinking the effective cell count.
    """
    x = as_dataset(x)
    y = as_dataset(y)
    labels_x = _as_labels(labels_x, k)
    labels_y = _as_labels(labels_y, k)
    if labels_x.size != x.shape[0] or labels_y.size != y.shape[0]:
        raise InvalidInputError("labels must match the datasets row for row")
    mx, cx = _per_cell_means(x, labels_x, k)
    my, cy = _per_cell_means(y, labels_y, k)

    keep = np.flatnonzero((cx + cy) > 0)
    mx, my = mx[keep], my[keep]
    cx, cy = cx[keep], cy[keep]
    has_x = cx > 0
    has_y = cy > 0
    for j in np.flatnonzero(~has_y):
        donors = np.flatnonzero(has_y)
        my[j] = my[donors[np.argmin(((my[donors] - mx[j]) ** 2).sum(axis=1))]]
    for j in np.flatnonzero(~has_x):
        donors = np.flatnonzero(has_x)
        mx[j] = mx[donors[np.argmin(((mx[donors] - my[j]) ** 2).sum(axis=1))]]

    kk = keep.size
    omega = np.vstack([mx, my])
    zeros = np.zeros(kk)
    a_pad = np.concatenate([np.bincount(labels_x, minlength=k)[keep] / labels_x.size, zeros])
    b_pad = np.concatenate([zeros, np.bincount(labels_y, minlength=k)[keep] / labels_y.size])
    return DoubleCentersSetup(
        omega=omega,
        a_pad=ProbVector(a_pad),
        b_pad=ProbVector(b_pad),
        cost=cost_matrix(omega),
    )
