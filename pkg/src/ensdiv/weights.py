"""Optimal ensemble weights.

The bias of the plug-in estimate at neighborhood index ``l`` expands in the
basis ``psi_i(l) = l**(i/d)`` for ``i = 1..d-1``. Weights summing to one
either cancel every basis term with minimum Euclidean norm (``exact``) or
minimize the largest scaled residual ``|gamma_i| * T**(1/2 - i/(2d))`` under
the budget ``||w||^2 <= eta`` (``relaxed``).
"""

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .exceptions import DegenerateBasisError, DomainError, InfeasibleBudgetError, ParameterError

_FEAS_TOL = 1e-12


@dataclass(frozen=True)
class BasisMatrix:
    """``entries[i-1, j] = l_bar[j] ** (i/d)`` for ``i`` in ``J = 1..d-1``."""

    entries: np.ndarray
    l_bar: tuple
    d: int

    @property
    def J(self):
        return list(range(1, self.d))

    @property
    def L(self):
        return len(self.l_bar)


@dataclass
class WeightSolution:
    w: np.ndarray
    epsilon: Optional[float]
    gamma_residuals: np.ndarray
    norm_sq: float
    mode: str

    def to_dict(self):
        return {
            "mode": self.mode,
            "w": [float(v) for v in self.w],
            "epsilon": None if self.epsilon is None else float(self.epsilon),
            "gamma_residuals": [float(v) for v in self.gamma_residuals],
            "norm_sq": float(self.norm_sq),
            "sum_w": float(np.sum(self.w)),
        }


def basis_matrix(l_bar, d):
    l = np.asarray(l_bar, dtype=np.float64).ravel()
    if int(d) != d or d < 1:
        raise DomainError(f"dimension must be a positive integer, got {d!r}")
    d = int(d)
    if l.size == 0:
        raise DomainError("l_bar is empty")
    if not np.all(np.isfinite(l)) or np.any(l <= 0):
        raise DomainError("every index value in l_bar must be positive")
    powers = np.arange(1, d, dtype=np.float64)[:, None] / d
    entries = l[None, :] ** powers
    entries.setflags(write=False)
    return BasisMatrix(entries.reshape(d - 1, l.size), tuple(float(v) for v in l), d)


def residual_scales(d, T):
    i = np.arange(1, d, dtype=np.float64)
    return float(T) ** (0.5 - i / (2.0 * d))


def solve_exact_weights(basis):
    """Minimum-norm weights with ``sum(w) = 1`` and every basis term zeroed."""
    L, d = basis.L, basis.d
    if L < d:
        raise DegenerateBasisError(f"need more than d-1={d - 1} index values, got L={L}")
    if len(set(basis.l_bar)) != L:
        raise DegenerateBasisError("l_bar contains duplicate values")
    A = np.vstack([np.ones(L), basis.entries])
    b = np.zeros(d)
    b[0] = 1.0
    w, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    if rank < d:
        raise DegenerateBasisError(f"constraint matrix has rank {rank} < {d}")
    gamma = basis.entries @ w
    return WeightSolution(w, None, np.abs(gamma), float(w @ w), "exact")


def _pattern_lines(C, sel, signs):
    """Minimum-norm point on ``{sum w = 1, C[sel] w = signs * eps}`` as ``a + eps * b``."""
    L = C.shape[1]
    A = np.vstack([np.ones(L), C[list(sel)]]) if sel else np.ones((1, L))
    rhs = np.zeros((A.shape[0], 2))
    rhs[0, 0] = 1.0
    rhs[1:, 1] = signs
    sol = np.linalg.lstsq(A, rhs, rcond=None)[0]
    if np.max(np.abs(A @ sol - rhs)) > 1e-9 * max(1.0, np.max(np.abs(sol))):
        return None
    return sol[:, 0], sol[:, 1]


def _feasible_interval(C, free, a, b):
    """Range of ``eps >= 0`` with ``|C[j] (a + eps b)| <= eps`` for ``j`` in ``free``."""
    lo, hi = 0.0, np.inf
    for j in free:
        p, q = C[j] @ a, C[j] @ b
        # p + eps q <= eps  and  -(p + eps q) <= eps, i.e. alpha <= eps * beta
        for alpha, beta in ((p, 1.0 - q), (-p, 1.0 + q)):
            if beta > 0:
                lo = max(lo, alpha / beta)
            elif beta < 0:
                hi = min(hi, alpha / beta)
            elif alpha > _FEAS_TOL:
                return None
    if lo > hi + _FEAS_TOL:
        return None
    return lo, max(lo, hi)


def _smallest_eps_within_budget(a, b, lo, hi, eta):
    qa, qb, qc = b @ b, 2.0 * (a @ b), a @ a - eta
    at_lo = qa * lo * lo + qb * lo + qc
    if at_lo <= 1e-12:
        return lo
    if qa == 0.0:
        if qb < 0.0:
            root = -qc / qb
            return root if root <= hi else None
        return None
    disc = qb * qb - 4.0 * qa * qc
    if disc < 0.0:
        return None
    sq = np.sqrt(disc)
    r1 = (-qb - sq) / (2.0 * qa)
    r2 = (-qb + sq) / (2.0 * qa)
    if lo < r1 <= hi:
        return r1
    return None


@lru_cache(maxsize=4096)
def _patterns(n_rows, max_active):
    out = []
    for signs in itertools.product((0, 1, -1), repeat=n_rows):
        sel = tuple(j for j, s in enumerate(signs) if s)
        if len(sel) <= max_active:
            out.append((sel, np.array([signs[j] for j in sel], dtype=np.float64)))
    return tuple(out)


def solve_relaxed_weights(basis, T, eta):
    """Minimize the largest scaled bias residual subject to ``||w||^2 <= eta``.

    Every optimal point is the minimum-norm point of some face of the
    constraint polytope at the optimal ``eps``. For a fixed set of active
    residual constraints (with signs) that point moves affinely in ``eps``,
    so its feasibility is an interval and its squared norm a quadratic.
    Enumerating faces gives the optimum exactly; ties are broken by the
    smallest ``||w||``. Cost grows as ``3**(d-1)``.
    """
    L, d = basis.L, basis.d
    if T < 2:
        raise ParameterError(f"T must be at least 2, got {T}")
    if eta < 1.0 / L:
        raise InfeasibleBudgetError(
            f"eta={eta} is below the 1/L = {1.0 / L:.6g} floor; sum(w)=1 is unreachable")
    C = basis.entries * residual_scales(d, T)[:, None]
    rows = d - 1
    lines = []
    best = np.inf
    for sel, signs in _patterns(rows, L - 1):
        line = _pattern_lines(C, sel, signs)
        if line is None:
            continue
        a, b = line
        free = [j for j in range(rows) if j not in sel]
        interval = _feasible_interval(C, free, a, b)
        if interval is None:
            continue
        eps = _smallest_eps_within_budget(a, b, interval[0], interval[1], eta)
        if eps is None:
            continue
        lines.append((a, b))
        best = min(best, eps)
    if not np.isfinite(best):
        raise InfeasibleBudgetError("no feasible weights found for this budget")

    w_best, n_best = None, np.inf
    for a, b in lines:
        w = a + best * b
        if rows and np.max(np.abs(C @ w)) > best + 1e-10:
            continue
        n = w @ w
        if n <= eta + 1e-10 and n < n_best:
            w_best, n_best = w, n
    gamma = basis.entries @ w_best
    eps = float(np.max(np.abs(C @ w_best))) if rows else 0.0
    return WeightSolution(w_best, eps, np.abs(gamma), float(n_best), "relaxed")


@lru_cache(maxsize=256)
def _cached_weights(l_bar, d, T, eta, mode):
    basis = basis_matrix(l_bar, d)
    if mode == "exact":
        return solve_exact_weights(basis)
    if mode == "relaxed":
        return solve_relaxed_weights(basis, T, eta)
    raise ParameterError(f"weight mode must be 'exact' or 'relaxed', got {mode!r}")


def optimal_weights(l_bar, d, T, eta=1.0, mode="relaxed"):
    """Memoized weight solve; the result depends only on these arguments."""
    sol = _cached_weights(tuple(float(v) for v in l_bar), int(d), int(T), float(eta), mode)
    return WeightSolution(sol.w.copy(), sol.epsilon, sol.gamma_residuals.copy(),
                          sol.norm_sq, sol.mode)
