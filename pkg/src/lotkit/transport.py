"""Discrete optimal transport: cost matrices, exact and entropic solvers, W2.

The exact solver targets the transportation polytope {G >= 0, G 1 = a,
G^T 1 = b} and minimizes <G, M>.  Two interchangeable backends sit behind the
same contract: for uniform marginals with a small lcm(m, n) the problem is
expanded to an assignment problem and solved exactly; everything else goes
through the HiGHS dual-simplex LP.  Both return deterministic vertex
solutions, so m = n uniform instances yield permutation plans.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linear_sum_assignment, linprog
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from .errors import (
    DimensionError,
    InvalidCost,
    InvalidMarginals,
    InvalidParameter,
    KernelUnderflow,
    NonConvergenceWarning,
    SolverFailure,
)
from .measures import MASS_TOL, DiscreteMeasure, _frozen

#: Largest lcm(m, n) expanded into an assignment problem; beyond this the
#: LP backend is used (memory for the expanded cost grows as lcm^2).
ASSIGNMENT_CAP = 2048

#: Marginal tolerance baked into the TransportPlan invariants.
PLAN_MARGINAL_TOL = 1e-6


@dataclass(frozen=True)
class CostMatrix:
    """Pairwise Euclidean costs between two supports.

    entries[i][j] = ||x_i - y_j||^exponent with exponent 1 (distances) or
    2 (squared distances, the default everywhere else in the library).
    """

    entries: np.ndarray
    exponent: int

    def __post_init__(self):
        M = np.asarray(self.entries, dtype=float)
        if M.ndim != 2 or M.size == 0:
            raise InvalidCost(f"cost matrix must be 2-D and nonempty, got shape {M.shape}")
        if not np.isfinite(M).all():
            raise InvalidCost("cost matrix contains non-finite entries")
        if (M < 0).any():
            raise InvalidCost("cost matrix contains negative entries")
        if self.exponent not in (1, 2):
            raise InvalidParameter(f"cost exponent must be 1 or 2, got {self.exponent!r}")
        object.__setattr__(self, "entries", _frozen(M))

    @property
    def shape(self):
        return self.entries.shape


@dataclass(frozen=True)
class SinkhornConfig:
    """Entropic-regularization settings.

    lambd is the regularization strength; iterations stop once both marginal
    violations fall below marginal_tol or max_iters rounds elapse.
    """

    lambd: float
    max_iters: int = 10000
    marginal_tol: float = 1e-9

    def __post_init__(self):
        if not (math.isfinite(self.lambd) and self.lambd > 0):
            raise InvalidParameter(f"lambd must be positive, got {self.lambd!r}")
        if self.max_iters < 1:
            raise InvalidParameter(f"max_iters must be >= 1, got {self.max_iters!r}")
        if not (math.isfinite(self.marginal_tol) and self.marginal_tol > 0):
            raise InvalidParameter(f"marginal_tol must be positive, got {self.marginal_tol!r}")


@dataclass(frozen=True)
class TransportPlan:
    """A coupling between two discrete measures plus its transport cost.

    coupling : (m, n) nonnegative matrix whose row sums are source_masses and
        column sums are target_masses (within PLAN_MARGINAL_TOL whenever
        converged is True).
    objective : <coupling, M> for the cost matrix it was solved against.
    method : "exact" or "sinkhorn(lambd=...)".
    converged : False only for Sinkhorn runs that hit the iteration cap; the
        best iterate is kept and a NonConvergenceWarning is emitted.
    """

    coupling: np.ndarray
    objective: float
    method: str
    source_masses: np.ndarray
    target_masses: np.ndarray
    converged: bool = True

    def __post_init__(self):
        G = np.asarray(self.coupling, dtype=float)
        a = np.asarray(self.source_masses, dtype=float)
        b = np.asarray(self.target_masses, dtype=float)
        if G.ndim != 2 or G.shape != (a.shape[0], b.shape[0]):
            raise DimensionError(
                f"coupling shape {G.shape} does not match marginals ({a.shape[0]}, {b.shape[0]})"
            )
        if (G < 0).any():
            raise InvalidMarginals("coupling has negative entries")
        if not math.isfinite(self.objective):
            raise InvalidCost(f"objective is not finite: {self.objective!r}")
        if self.converged:
            row_err = np.abs(G.sum(axis=1) - a).max()
            col_err = np.abs(G.sum(axis=0) - b).max()
            if max(row_err, col_err) > PLAN_MARGINAL_TOL:
                raise InvalidMarginals(
                    f"marginal violation {max(row_err, col_err):.3e} exceeds {PLAN_MARGINAL_TOL}"
                )
        object.__setattr__(self, "coupling", _frozen(G))
        object.__setattr__(self, "source_masses", _frozen(a))
        object.__setattr__(self, "target_masses", _frozen(b))

    @property
    def shape(self):
        return self.coupling.shape


def cost_matrix(source: DiscreteMeasure, target: DiscreteMeasure, exponent: int = 2) -> CostMatrix:
    """Pairwise cost matrix between two clouds in the same ambient space."""
    if source.dim != target.dim:
        raise DimensionError(
            f"source dimension {source.dim} != target dimension {target.dim}"
        )
    if exponent == 2:
        M = cdist(source.points, target.points, "sqeuclidean")
    elif exponent == 1:
        M = cdist(source.points, target.points, "euclidean")
    else:
        raise InvalidParameter(f"cost exponent must be 1 or 2, got {exponent!r}")
    return CostMatrix(M, exponent)


def _check_marginals(a, b, M: CostMatrix):
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    m, n = M.shape
    if a.shape[0] != m or b.shape[0] != n:
        raise DimensionError(
            f"marginals ({a.shape[0]}, {b.shape[0]}) do not match cost shape {M.shape}"
        )
    if (a <= 0).any() or (b <= 0).any():
        raise InvalidMarginals("marginals must be strictly positive")
    if abs(a.sum() - 1.0) > MASS_TOL or abs(b.sum() - 1.0) > MASS_TOL:
        raise InvalidMarginals(
            f"marginals must each sum to 1 within {MASS_TOL} "
            f"(got {a.sum()!r} and {b.sum()!r})"
        )
    return a / a.sum(), b / b.sum()


def _uniform(w) -> bool:
    return np.abs(w - 1.0 / w.shape[0]).max() <= 1e-12


def _solve_assignment(M: np.ndarray) -> np.ndarray:
    """Exact plan for uniform marginals via lcm-expansion to an assignment.

    Each source point splits into L/m unit chunks and each target into L/n,
    with L = lcm(m, n); an optimal chunk assignment collapses back to an
    optimal transportation plan with entries k/L.
    """
    m, n = M.shape
    L = math.lcm(m, n)
    C = np.repeat(np.repeat(M, L // m, axis=0), L // n, axis=1)
    rows, cols = linear_sum_assignment(C)
    G = np.zeros((m, n))
    np.add.at(G, (rows // (L // m), cols // (L // n)), 1.0 / L)
    return G

def _solve_lp(a: np.ndarray, b: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Transportation LP over flattened plan variables, HiGHS dual simplex."""
    m, n = M.shape
    var = np.arange(m * n)
    rows = np.concatenate([np.repeat(np.arange(m), n), m + np.tile(np.arange(n), m)])
    A_eq = sp.coo_matrix(
        (np.ones(2 * m * n), (rows, np.concatenate([var, var]))), shape=(m + n, m * n)
    ).tocsr()
    res = linprog(
        M.ravel(),
        A_eq=A_eq,
        b_eq=np.concatenate([a, b]),
        bounds=(0, None),
        method="highs-ds",
    )
    if res.status != 0 or res.x is None:
        raise SolverFailure(f"transportation LP failed (status {res.status}): {res.message}")
    G = res.x.reshape(m, n)
    # dual simplex can leave epsilon-negative entries
    return np.clip(G, 0.0, None)


def solve_exact(a, b, M: CostMatrix) -> TransportPlan:
    """Optimal plan for the transportation LP min <G, M>.

    Deterministic given input order; ties between optimal vertices are broken
    by the backend's fixed pivoting, so only the objective and feasibility are
    contractual when the optimum is not unique.
    """
    a, b = _check_marginals(a, b, M)
    m, n = M.shape
    if _uniform(a) and _uniform(b) and math.lcm(m, n) <= ASSIGNMENT_CAP:
        G = _solve_assignment(M.entries)
    else:
        G = _solve_lp(a, b, M.entries)
    return TransportPlan(
        coupling=G,
        objective=float(np.vdot(G, M.entries)),
        method="exact",
        source_masses=a,
        target_masses=b,
    )


def _sinkhorn_scaling(a, b, M, cfg):
    K = np.exp(-M / cfg.lambd)
    if (K.sum(axis=1) == 0).any() or (K.sum(axis=0) == 0).any():
        raise KernelUnderflow(
            f"exp(-M/lambd) underflowed at lambd={cfg.lambd}; increase lambd "
            "(the log-domain path engages once lambd <= 0.05 * median(M))"
        )
    v = np.ones_like(b)
    for it in range(cfg.max_iters):
        Kv = K @ v
        if (Kv == 0).any():
            raise KernelUnderflow(f"scaling underflow at iteration {it}; increase lambd")
        u = a / Kv
        Ktu = K.T @ u
        if (Ktu == 0).any():
            raise KernelUnderflow(f"scaling underflow at iteration {it}; increase lambd")
        v = b / Ktu
        row_err = np.abs(u * (K @ v) - a).max()
        if row_err <= cfg.marginal_tol:
            return u[:, None] * K * v[None, :], True, it + 1
    return u[:, None] * K * v[None, :], False, cfg.max_iters


def _sinkhorn_log(a, b, M, cfg):
    lam = cfg.lambd
    log_a, log_b = np.log(a), np.log(b)
    f = np.zeros_like(a)
    g = np.zeros_like(b)
    for it in range(cfg.max_iters):
        f = lam * (log_a - logsumexp((g[None, :] - M) / lam, axis=1))
        g = lam * (log_b - logsumexp((f[:, None] - M) / lam, axis=0))
        G = np.exp((f[:, None] + g[None, :] - M) / lam)
        row_err = np.abs(G.sum(axis=1) - a).max()
        col_err = np.abs(G.sum(axis=0) - b).max()
        if max(row_err, col_err) <= cfg.marginal_tol:
            return G, True, it + 1
    return G, False, cfg.max_iters


def solve_sinkhorn(a, b, M: CostMatrix, cfg: SinkhornConfig) -> TransportPlan:
    """Entropically regularized plan via alternating scaling.

    Runs in the log domain when lambd <= 0.05 * median(M) (small
    regularization would underflow the Gibbs kernel there); plain scaling
    otherwise.  If max_iters is hit before both marginals are within
    marginal_tol, the best iterate is returned with converged=False and a
    NonConvergenceWarning.
    """
    a, b = _check_marginals(a, b, M)
    Mv = M.entries
    if cfg.lambd <= 0.05 * float(np.median(Mv)):
        G, ok, iters = _sinkhorn_log(a, b, Mv, cfg)
    else:
        G, ok, iters = _sinkhorn_scaling(a, b, Mv, cfg)
    if not ok:
        warnings.warn(
            f"Sinkhorn did not reach marginal_tol={cfg.marginal_tol} in "
            f"{cfg.max_iters} iterations (lambd={cfg.lambd}); returning best iterate",
            NonConvergenceWarning,
            stacklevel=2,
        )
    return TransportPlan(
        coupling=G,
        objective=float(np.vdot(G, Mv)),
        method=f"sinkhorn(lambd={cfg.lambd})",
        source_masses=a,
        target_masses=b,
        converged=ok,
    )


def solve(a, b, M: CostMatrix, method="exact") -> TransportPlan:
    """Dispatch to solve_exact ("exact") or solve_sinkhorn (a SinkhornConfig)."""
    if isinstance(method, SinkhornConfig):
        return solve_sinkhorn(a, b, M, method)
    if method == "exact":
        return solve_exact(a, b, M)
    raise InvalidParameter(
        f"method must be 'exact' or a SinkhornConfig, got {method!r}"
    )


def barycentric_projection(plan: TransportPlan, target_points, eps: float = 1e-12,
                           reference_id: str = ""):
    """Convert a plan into a map: row i is the plan-weighted average target.

    Row i of the output is sum_j Gt[i, j] * y_j with Gt the row-normalized
    plan diag(G 1 + eps)^-1 G.  eps only guards against division by zero;
    feasible plans over positive source masses never have empty rows.
    """
    from .embedding import LotEmbedding  # deferred: embedding imports transport

    y = np.asarray(target_points, dtype=float)
    if y.ndim == 1:
        y = y.reshape(-1, 1)
    G = plan.coupling
    if y.shape[0] != G.shape[1]:
        raise DimensionError(
            f"plan has {G.shape[1]} columns but target has {y.shape[0]} points"
        )
    if eps <= 0:
        raise InvalidParameter(f"eps must be positive, got {eps!r}")
    T = (G / (G.sum(axis=1) + eps)[:, None]) @ y
    return LotEmbedding(
        map=T, normalized=False, reference_id=reference_id, objective=plan.objective
    )


def w2_distance(source: DiscreteMeasure, target: DiscreteMeasure, method="exact") -> float:
    """Wasserstein-2 distance: sqrt of the optimal squared-cost objective."""
    plan = solve(source.masses, target.masses, cost_matrix(source, target, 2), method)
    return math.sqrt(max(plan.objective, 0.0))


# ---------------------------------------------------------------------------
# Debug CSV dumps (row-major; not a stability-guaranteed format)
# ---------------------------------------------------------------------------


def _write_matrix_csv(path, values: np.ndarray, tag: str) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["rows", "cols", tag])
        writer.writerow([values.shape[0], values.shape[1], ""])
        for row in values:
            writer.writerow([repr(float(v)) for v in row])


def write_cost_csv(M: CostMatrix, path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["rows", "cols", "exponent"])
        writer.writerow([M.shape[0], M.shape[1], M.exponent])
        for row in M.entries:
            writer.writerow([repr(float(v)) for v in row])


def write_plan_csv(plan: TransportPlan, path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["rows", "cols", "method"])
        writer.writerow([plan.shape[0], plan.shape[1], plan.method])
        for row in plan.coupling:
            writer.writerow([repr(float(v)) for v in row])
