"""Fixed points of discounted min-plus Bellman operators.

Every scheme in this package reduces to a finite Markov decision problem

    u_i = min_k ( cost[i, k] + sum_s weight[i, k, s] * u[index[i, k, s]] ),

with nonnegative weights summing to less than one.  Inadmissible options
carry ``cost = inf``.  :func:`solve_howard` computes the fixed point by
policy iteration (each step is one sparse linear solve);
:func:`solve_jacobi` is plain Jacobi value iteration and serves as the
reference on small problems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from ..errors import NoAdmissibleControl, NonConvergence


@dataclass
class DecisionModel:
    cost: np.ndarray    # (n, k)
    index: np.ndarray   # (n, k, s)
    weight: np.ndarray  # (n, k, s)

    def __post_init__(self):
        self.cost = np.asarray(self.cost, dtype=float)
        self.index = np.asarray(self.index, dtype=np.int64)
        self.weight = np.asarray(self.weight, dtype=float)
        if not np.all(np.isfinite(self.cost).any(axis=1)):
            bad = np.flatnonzero(~np.isfinite(self.cost).any(axis=1))
            raise NoAdmissibleControl(f"{bad.size} node(s) have no admissible option, first at index {bad[0]}")

    @property
    def size(self):
        return self.cost.shape[0]

    def q_values(self, u):
        return self.cost + (self.weight * u[self.index]).sum(axis=-1)

    def bellman(self, u):
        """Apply the operator once; returns ``(Tu, argmin)`` with lowest-index ties."""
        q = self.q_values(u)
        k = np.argmin(q, axis=1)
        return q[np.arange(q.shape[0]), k], k

    def contraction_factor(self):
        w = self.weight.sum(axis=-1)
        return float(np.max(np.where(np.isfinite(self.cost), w, 0.0)))


@dataclass
class MDPSolution:
    values: np.ndarray
    policy: np.ndarray
    iterations: int
    residual: float
    method: str


def _policy_system(model, policy):
    n, _, s = model.index.shape
    rows = np.arange(n)
    idx = model.index[rows, policy]
    w = model.weight[rows, policy]
    mat = sparse.coo_matrix((-w.ravel(), (np.repeat(rows, s), idx.ravel())), shape=(n, n)).tocsr()
    mat = mat + sparse.identity(n, format="csr")
    return mat, model.cost[rows, policy]


def solve_howard(model, policy=None, max_iter=1000, rel_tol=1e-12):
    """Policy iteration.

    A node switches option only when the gain exceeds
    ``rel_tol * (1 + |u_i|)``; this keeps the iteration finite in floating
    point and makes ties resolve toward the current (then lowest) index.
    """
    n = model.size
    rows = np.arange(n)
    if policy is None:
        policy = np.argmin(model.cost, axis=1)
    else:
        policy = np.asarray(policy, dtype=np.int64).copy()
        bad = ~np.isfinite(model.cost[rows, policy])
        policy[bad] = np.argmin(model.cost[bad], axis=1)
    for it in range(1, max_iter + 1):
        mat, rhs = _policy_system(model, policy)
        u = spsolve(mat.tocsc(), rhs)
        q = model.q_values(u)
        best = np.argmin(q, axis=1)
        gain = q[rows, policy] - q[rows, best]
        switch = gain > rel_tol * (1.0 + np.abs(u))
        if not switch.any():
            tu = q[rows, best]
            return MDPSolution(u, policy, it, float(np.max(np.abs(tu - u))), "howard")
        policy = np.where(switch, best, policy)
    raise NonConvergence(f"policy iteration did not settle in {max_iter} steps")


def solve_jacobi(model, u0=None, tol=1e-10, max_iter=1_000_000):
    """Jacobi value iteration, stopped when the sup-norm update is below ``tol``."""
    u = np.zeros(model.size) if u0 is None else np.asarray(u0, dtype=float).copy()
    for it in range(1, max_iter + 1):
        tu, k = model.bellman(u)
        step = float(np.max(np.abs(tu - u)))
        u = tu
        if step <= tol:
            return MDPSolution(u, k, it, step, "jacobi")
    raise NonConvergence(f"value iteration did not converge in {max_iter} sweeps (last update {step:.3g})")


def solve(model, method="howard", **kwargs):
    if method == "howard":
        return solve_howard(model, **kwargs)
    if method == "jacobi":
        return solve_jacobi(model, **kwargs)
    raise ValueError(f"unknown method {method!r}")
