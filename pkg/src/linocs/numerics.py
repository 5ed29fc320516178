"""Shared numerical kernels: regularized least squares, l1-regularized
regression via proximal gradient, eigenvalues, and minimum-cost assignment.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.optimize


@dataclass(frozen=True)
class RidgeProblem:
    """min_W ||targets - design @ W||_F^2 + ridge * ||W||_F^2"""

    design: np.ndarray   # (n, m)
    targets: np.ndarray  # (n, q) or (n,)
    ridge: float = 0.0

    def __post_init__(self):
        D = np.asarray(self.design, dtype=float)
        Y = np.asarray(self.targets, dtype=float)
        if D.ndim != 2 or D.shape[0] < 1:
            raise ValueError(f"design must be a 2-D matrix, got shape {D.shape}")
        if Y.shape[0] != D.shape[0]:
            raise ValueError(f"targets rows {Y.shape[0]} != design rows {D.shape[0]}")
        if not (np.all(np.isfinite(D)) and np.all(np.isfinite(Y))):
            raise ValueError("design and targets must be finite")
        if self.ridge < 0:
            raise ValueError(f"ridge must be >= 0, got {self.ridge}")
        object.__setattr__(self, "design", D)
        object.__setattr__(self, "targets", Y)


def solve_least_squares(problem: RidgeProblem) -> np.ndarray:
    """Solve the ridge problem through an SVD route (never normal equations).

    Ridge terms are folded in as sqrt(ridge) * I rows so the factorization sees
    the regularized system directly; rank-deficient designs resolve to the
    minimum-norm solution.
    """
    D, Y = problem.design, problem.targets
    if problem.ridge > 0:
        m = D.shape[1]
        D = np.vstack([D, np.sqrt(problem.ridge) * np.eye(m)])
        pad = np.zeros((m,) + Y.shape[1:])
        Y = np.concatenate([Y, pad], axis=0)
    W, *_ = np.linalg.lstsq(D, Y, rcond=None)
    return W


class L1Result(NamedTuple):
    coef: np.ndarray
    converged: bool
    n_iters: int
    objective: float


def l1_objective(design, targets, coef, l1_weight, l2_weight) -> float:
    r = targets - design @ coef
    return float(
        0.5 * np.dot(r, r)
        + l1_weight * np.sum(np.abs(coef))
        + l2_weight * np.dot(coef, coef)
    )


def _soft_threshold(v: np.ndarray, thr: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - thr, 0.0)


def solve_l1(
    design: np.ndarray,
    targets: np.ndarray,
    l1_weight: float = 0.0,
    l2_weight: float = 0.0,
    warm_start: np.ndarray | None = None,
    max_iters: int = 2000,
    tol: float = 1e-8,
    accelerated: bool = True,
    objective_history: list | None = None,
) -> L1Result:
    """Minimize 0.5||y - Dc||^2 + l1*||c||_1 + l2*||c||^2 by proximal gradient.

    Fixed step 1/L with L the squared top singular value of D (plus the l2
    curvature); Nesterov acceleration by default, plain ISTA (monotone in the
    objective) when ``accelerated`` is False.  Stops once successive iterates
    move less than ``tol`` in the infinity norm; if the budget runs out the
    best iterate seen is returned with ``converged=False``.
    """
    D = np.asarray(design, dtype=float)
    y = np.asarray(targets, dtype=float).reshape(-1)
    if D.ndim != 2 or D.shape[0] != y.shape[0]:
        raise ValueError(f"design {D.shape} incompatible with targets of length {y.shape[0]}")
    if not (np.isfinite(l1_weight) and np.isfinite(l2_weight)) or l1_weight < 0 or l2_weight < 0:
        raise ValueError("l1_weight and l2_weight must be finite and >= 0")
    m = D.shape[1]
    G = D.T @ D              # gram form keeps per-iteration cost at O(m^2)
    h = D.T @ y
    L = float(np.linalg.norm(D, 2)) ** 2 + 2.0 * l2_weight
    c = np.zeros(m) if warm_start is None else np.asarray(warm_start, dtype=float).reshape(m).copy()
    if L <= 0.0:
        return L1Result(np.zeros(m), True, 0, l1_objective(D, y, np.zeros(m), l1_weight, l2_weight))
    step = 1.0 / L

    def smooth_grad(v):
        return G @ v - h + 2.0 * l2_weight * v

    best = c.copy()
    best_obj = l1_objective(D, y, c, l1_weight, l2_weight)
    z = c.copy()
    t_acc = 1.0
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        c_new = _soft_threshold(z - step * smooth_grad(z), step * l1_weight)
        if accelerated:
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_acc * t_acc))
            z = c_new + ((t_acc - 1.0) / t_next) * (c_new - c)
            t_acc = t_next
        else:
            z = c_new
        delta = float(np.max(np.abs(c_new - c))) if m else 0.0
        c = c_new
        obj = l1_objective(D, y, c, l1_weight, l2_weight)
        if objective_history is not None:
            objective_history.append(obj)
        if obj < best_obj:
            best_obj = obj
            best = c.copy()
        if delta < tol:
            converged = True
            break
    return L1Result(best, converged, it, best_obj)


def eigenvalues(matrix: np.ndarray) -> np.ndarray:
    """Complex spectrum of a square matrix (unordered)."""
    M = np.asarray(matrix, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"matrix must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix must be finite")
    return np.linalg.eigvals(M)


def linear_sum_assignment(cost: np.ndarray) -> np.ndarray:
    """Permutation pi minimizing sum_i cost[i, pi[i]].

    Among cost-minimal assignments the lexicographically smallest permutation
    is returned, obtained by greedily fixing each row to the smallest column
    that still admits an optimal completion.
    """
    C = np.asarray(cost, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError(f"cost must be a square matrix, got shape {C.shape}")
    if not np.all(np.isfinite(C)):
        raise ValueError("cost entries must be finite")
    J = C.shape[0]
    rows, cols = scipy.optimize.linear_sum_assignment(C)
    best_total = float(C[rows, cols].sum())
    tol = 1e-9 * max(1.0, abs(best_total))

    remaining = list(range(J))
    perm = np.empty(J, dtype=int)
    prefix = 0.0
    for i in range(J):
        for j in remaining:
            rest = [c for c in remaining if c != j]
            if rest:
                sub = C[np.ix_(range(i + 1, J), rest)]
                r2, c2 = scipy.optimize.linear_sum_assignment(sub)
                tail = float(sub[r2, c2].sum())
            else:
                tail = 0.0
            if prefix + C[i, j] + tail <= best_total + tol:
                perm[i] = j
                prefix += C[i, j]
                remaining.remove(j)
                break
        else:  # pragma: no cover - optimal completion always exists
            raise RuntimeError("assignment refinement failed to find an optimal column")
    return perm
