"""Discrete optimal-transport kernels.

Exact transportation solver and the entropic-regularized scaling solver with
its three divergence readings:

* ``S``      objective value ``<D,T> - lambda*H(T)`` at the entropic optimum
  (can go negative for large lambda),
* ``S_HAT``  plain transport cost ``<D,T>`` at the entropic optimum
  (nonnegative, but not zero at equal marginals),
* ``S_BAR``  debiased cost ``S_HAT(a,b) - (S_HAT(a,a)+S_HAT(b,b))/2``
  (nonnegative and zero at equal marginals).

Everything here is a pure function of its inputs; fixed inputs give
bit-identical outputs.
"""

import enum
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import InvalidInputError, InvalidParameterError, KernelUnderflowError

_SUM_TOL = 1e-12
_MASS_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ProbVector:
    """Nonnegative weights over L support points, summing to one."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size < 1:
            raise InvalidInputError("probability vector must be a nonempty 1-d array")
        if not np.all(np.isfinite(w)):
            raise InvalidInputError("probability vector contains non-finite entries")
        if np.any(w < 0.0):
            raise InvalidInputError("probability vector contains negative entries")
        if abs(float(w.sum()) - 1.0) > _SUM_TOL:
            raise InvalidInputError(
                f"probability vector sums to {float(w.sum()):.17g}, not 1"
            )
        w = w.copy()
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.weights.size


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """Symmetric nonnegative cost matrix with zero diagonal.

    ``support_points`` optionally keeps the coordinates the entries were
    derived from (one row per support point).
    """

    entries: np.ndarray
    support_points: np.ndarray | None = None

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        if e.ndim != 2 or e.shape[0] != e.shape[1] or e.shape[0] < 1:
            raise InvalidInputError("cost matrix must be square and nonempty")
        if not np.all(np.isfinite(e)):
            raise InvalidInputError("cost matrix contains non-finite entries")
        if np.any(e < 0.0):
            raise InvalidInputError("cost matrix contains negative entries")
        if np.any(e.diagonal() != 0.0):
            raise InvalidInputError("cost matrix diagonal must be exactly zero")
        if not np.array_equal(e, e.T):
            raise InvalidInputError("cost matrix must be symmetric")
        e = e.copy()
        e.flags.writeable = False
        object.__setattr__(self, "entries", e)
        if self.support_points is not None:
            p = np.asarray(self.support_points, dtype=float)
            if p.ndim != 2 or p.shape[0] != e.shape[0]:
                raise InvalidInputError("support points must be one row per support point")
            p = p.copy()
            p.flags.writeable = False
            object.__setattr__(self, "support_points", p)

    def __len__(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Joint nonnegative mass matrix with total mass one."""

    matrix: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.matrix, dtype=float)
        if t.ndim != 2 or t.shape[0] != t.shape[1] or t.shape[0] < 1:
            raise InvalidInputError("transport plan must be a square matrix")
        if not np.all(np.isfinite(t)):
            raise InvalidInputError("transport plan contains non-finite entries")
        if np.any(t < 0.0):
            raise InvalidInputError("transport plan contains negative entries")
        if abs(float(t.sum()) - 1.0) > _MASS_TOL:
            raise InvalidInputError("transport plan total mass is not 1")
        t = t.copy()
        t.flags.writeable = False
        object.__setattr__(self, "matrix", t)

    def row_sums(self) -> np.ndarray:
        return self.matrix.sum(axis=1)

    def col_sums(self) -> np.ndarray:
        return self.matrix.sum(axis=0)

    def marginal_error(self, a, b) -> float:
        """Largest per-coordinate deviation of the marginals from (a, b)."""
        a = as_prob_vector(a).weights
        b = as_prob_vector(b).weights
        return float(
            max(
                np.max(np.abs(self.row_sums() - a)),
                np.max(np.abs(self.col_sums() - b)),
            )
        )


@dataclass(frozen=True)
class FixedIterations:
    """Run exactly ``count`` full scaling sweeps."""

    count: int

    def __post_init__(self):
        if self.count < 1:
            raise InvalidParameterError("iteration count must be >= 1")


@dataclass(frozen=True)
class MarginalTolerance:
    """Iterate until the plan marginals deviate from (a, b) by at most ``tol``."""

    tol: float = 1e-9
    max_iter: int = 10_000

    def __post_init__(self):
        if self.tol <= 0.0:
            raise InvalidParameterError("marginal tolerance must be positive")
        if self.max_iter < 1:
            raise InvalidParameterError("max_iter must be >= 1")


StoppingRule = FixedIterations | MarginalTolerance


@dataclass(frozen=True, eq=False)
class SinkhornSolution:
    plan: TransportPlan
    u: np.ndarray
    v: np.ndarray
    iterations: int
    converged: bool
    s_lambda: float
    s_hat: float
    s_bar_self_terms: tuple[float, float] | None = None


class DivergenceVariant(enum.Enum):
    S = "S"
    S_HAT = "S_HAT"
    S_BAR = "S_BAR"


def as_prob_vector(a) -> ProbVector:
    return a if isinstance(a, ProbVector) else ProbVector(np.asarray(a, dtype=float))


def as_cost_matrix(d) -> CostMatrix:
    return d if isinstance(d, CostMatrix) else CostMatrix(np.asarray(d, dtype=float))


def cost_matrix(points) -> CostMatrix:
    """Pairwise squared Euclidean distances between the rows of ``points``."""
    p = np.asarray(points, dtype=float)
    if p.ndim == 1:
        p = p[:, None]
    if p.ndim != 2 or p.shape[0] < 1 or p.shape[1] < 1:
        raise InvalidInputError("points must form a nonempty 2-d array")
    if not np.all(np.isfinite(p)):
        raise InvalidInputError("points contain non-finite coordinates")
    diff = p[:, None, :] - p[None, :, :]
    entries = np.einsum("ijk,ijk->ij", diff, diff)
    return CostMatrix(entries=entries, support_points=p)


def _kernel(d: np.ndarray, lam: float) -> np.ndarray:
    """Gibbs kernel exp(-D/lambda); refuses to return underflowed entries."""
    k = np.exp(-d / lam)
    if np.any(k == 0.0):
        raise KernelUnderflowError(
            "exp(-D/lambda) underflowed to zero; use a larger lambda or rescale "
            f"the data (max cost {float(d.max()):.6g}, lambda {lam:.6g})"
        )
    return k


def _scalings(
    a: np.ndarray, b: np.ndarray, kernel: np.ndarray, stop: StoppingRule
) -> tuple[np.ndarray, np.ndarray, int, bool]:
    """Alternating scaling updates u <- a/(Kv), v <- b/(K'u).

    Zero entries of a (or b) stay at exactly zero through 0/positive = 0,
    forcing the matching plan rows (columns) to zero.  After every sweep the
    column marginals match b to rounding, so convergence is checked on the
    row marginals of the current (u, v) pair.
    """
    u = np.ones_like(a)
    v = np.ones_like(b)
    if isinstance(stop, FixedIterations):
        for _ in range(stop.count):
            u = a / (kernel @ v)
            v = b / (kernel.T @ u)
        return u, v, stop.count, True
    it = 0
    while True:
        kv = kernel @ v
        if it > 0:
            err = float(np.max(np.abs(u * kv - a)))
            if err <= stop.tol:
                return u, v, it, True
            if it >= stop.max_iter:
                return u, v, it, False
        u = a / kv
        v = b / (kernel.T @ u)
        it += 1


def _plan_from_scalings(u: np.ndarray, kernel: np.ndarray, v: np.ndarray) -> np.ndarray:
    return (u[:, None] * kernel) * v[None, :]


def _entropy(plan: np.ndarray) -> float:
    t = plan[plan > 0.0]
    return float(-(t * np.log(t)).sum())


def _transport_cost(d: np.ndarray, plan: np.ndarray) -> float:
    return float((d * plan).sum())


def sinkhorn_solve(
    a,
    b,
    cost,
    lam: float,
    stop: StoppingRule | None = None,
    *,
    with_self_terms: bool = False,
) -> SinkhornSolution:
    """Solve the entropic transport problem between a and b under ``cost``.

    Parameters
    ----------
    a, b : ProbVector or array-like
        Marginals on the shared support.
    cost : CostMatrix or array-like
        Squared-distance cost matrix of matching dimension.
    lam : float
        Entropy weight, > 0.
    stop : StoppingRule
        ``FixedIterations`` or ``MarginalTolerance`` (the default,
        tol 1e-9 / 10000 sweeps).
    with_self_terms : bool
        Also solve (a, a) and (b, b) and report their transport costs,
        as needed by the debiased divergence.
    """
    if lam <= 0.0:
        raise InvalidParameterError("lambda must be positive")
    a = as_prob_vector(a)
    b = as_prob_vector(b)
    cost = as_cost_matrix(cost)
    if not (len(a) == len(b) == len(cost)):
        raise InvalidInputError(
            f"dimension mismatch: a has {len(a)}, b has {len(b)}, cost has {len(cost)}"
        )
    if stop is None:
        stop = MarginalTolerance()
    kernel = _kernel(cost.entries, lam)
    u, v, iterations, converged = _scalings(a.weights, b.weights, kernel, stop)
    plan = _plan_from_scalings(u, kernel, v)
    s_hat = _transport_cost(cost.entries, plan)
    s_lambda = s_hat - lam * _entropy(plan)
    self_terms = None
    if with_self_terms:
        self_terms = (
            sinkhorn_solve(a, a, cost, lam, stop).s_hat,
            sinkhorn_solve(b, b, cost, lam, stop).s_hat,
        )
    return SinkhornSolution(
        plan=TransportPlan(plan),
        u=u,
        v=v,
        iterations=iterations,
        converged=converged,
        s_lambda=s_lambda,
        s_hat=s_hat,
        s_bar_self_terms=self_terms,
    )


def divergence(
    a,
    b,
    cost,
    lam: float,
    variant: DivergenceVariant,
    stop: StoppingRule | None = None,
) -> float:
    """Entropic divergence between a and b in the requested reading."""
    variant = DivergenceVariant(variant)
    if variant is DivergenceVariant.S_BAR:
        sol = sinkhorn_solve(a, b, cost, lam, stop, with_self_terms=True)
        self_a, self_b = sol.s_bar_self_terms
        return sol.s_hat - 0.5 * (self_a + self_b)
    sol = sinkhorn_solve(a, b, cost, lam, stop)
    return sol.s_lambda if variant is DivergenceVariant.S else sol.s_hat


def _exact_ot_arrays(a: np.ndarray, b: np.ndarray, d: np.ndarray) -> tuple[float, np.ndarray]:
    """Transportation linear program restricted to the positive-mass support."""
    rows = np.flatnonzero(a > 0.0)
    cols = np.flatnonzero(b > 0.0)
    r, c = rows.size, cols.size
    d_red = d[np.ix_(rows, cols)]
    a_eq = np.vstack(
        [
            np.kron(np.eye(r), np.ones((1, c))),
            np.kron(np.ones((1, r)), np.eye(c)),
        ]
    )
    b_eq = np.concatenate([a[rows], b[cols]])
    res = linprog(d_red.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"transportation solve failed: {res.message}")
    plan = np.zeros_like(d)
    plan[np.ix_(rows, cols)] = np.maximum(res.x.reshape(r, c), 0.0)
    return max(float(res.fun), 0.0), plan


def exact_ot(a, b, cost) -> tuple[float, TransportPlan]:
    """Optimal value and plan of the unregularized transport problem.

    Intended for small supports (the partition-cell scale); returns the
    squared transport distance between the two weight vectors.
    """
    a = as_prob_vector(a)
    b = as_prob_vector(b)
    cost = as_cost_matrix(cost)
    if not (len(a) == len(b) == len(cost)):
        raise InvalidInputError(
            f"dimension mismatch: a has {len(a)}, b has {len(b)}, cost has {len(cost)}"
        )
    value, plan = _exact_ot_arrays(a.weights, b.weights, cost.entries)
    return value, TransportPlan(plan)


def shannon_entropy(plan) -> float:
    """Entropy of a plan, zero entries contributing zero."""
    t = plan.matrix if isinstance(plan, TransportPlan) else TransportPlan(np.asarray(plan, dtype=float)).matrix
    return _entropy(t)
