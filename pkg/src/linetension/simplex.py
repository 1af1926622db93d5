# SPDX-FileCopyrightText: 2026 The linetension developers
#
# SPDX-License-Identifier: LGPL-2.1-or-later

"""Two-phase revised simplex method for small dense standard-form LPs.

Solves ``min c x`` subject to ``A x = b``, ``x >= 0`` and returns a basic
(vertex) solution, so at most ``rank(A)`` entries of x are nonzero. Pricing
starts with Dantzig's rule and switches permanently to Bland's rule after a
run of degenerate pivots, which rules out cycling.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InfeasibleError, SimplexError, UnboundedError

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-9

# Consecutive degenerate pivots tolerated before switching to Bland's rule
DEGENERATE_RUN = 50


class Pricing(Enum):
    """Entering-variable rule."""

    DANTZIG = "dantzig"
    BLAND = "bland"


@dataclass(frozen=True, eq=False)
class SimplexResult:
    """Optimal basic solution.

    Attributes
    ----------
    x : np.ndarray
        Solution vector.
    value : float
        Objective ``c x``.
    basis : tuple[int, ...]
        Basic column indices.
    iterations : int
        Pivots over both phases.
    switched_to_bland : bool
        Whether Bland's rule was in effect at termination.
    """

    x: np.ndarray
    value: float
    basis: tuple[int, ...]
    iterations: int
    switched_to_bland: bool = False

    @property
    def support(self) -> np.ndarray:
        """Indices of the nonzero entries of x."""
        return np.flatnonzero(self.x)


class _Tableau:
    """Basis bookkeeping shared by both phases."""

    def __init__(
        self,
        a: np.ndarray,
        b: np.ndarray,
        basis: list[int],
        tol: float,
        pricing: Pricing,
        max_iter: int,
    ) -> None:
        self.a = a
        self.b = b
        self.basis = basis
        self.tol = tol
        self.pricing = pricing
        self.max_iter = max_iter
        self.iterations = 0
        self.degenerate_run = 0

    def basic_solution(self) -> np.ndarray:
        return np.linalg.solve(self.a[:, self.basis], self.b)

    def optimize(self, c: np.ndarray, allowed: np.ndarray) -> None:
        """Pivot until no allowed column has a negative reduced cost."""
        while True:
            if self.iterations >= self.max_iter:
                raise SimplexError(f"Simplex iteration cap {self.max_iter} reached")
            basis_matrix = self.a[:, self.basis]
            try:
                x_b = np.maximum(np.linalg.solve(basis_matrix, self.b), 0.0)
                y = np.linalg.solve(basis_matrix.T, c[self.basis])
            except np.linalg.LinAlgError as e:
                raise SimplexError("Singular basis matrix", original_error=e) from e
            reduced = c - self.a.T @ y
            reduced[~allowed] = 0.0
            reduced[self.basis] = 0.0
            candidates = np.flatnonzero(reduced < -self.tol)
            if len(candidates) == 0:
                return
            if self.pricing is Pricing.BLAND:
                entering = int(candidates[0])
            else:
                entering = int(candidates[np.argmin(reduced[candidates])])

            direction = np.linalg.solve(basis_matrix, self.a[:, entering])
            rows = np.flatnonzero(direction > self.tol)
            if len(rows) == 0:
                raise UnboundedError(f"Objective unbounded along column {entering}")
            ratios = x_b[rows] / direction[rows]
            step = float(ratios.min())
            # ties go to the smallest basic index
            tied = rows[ratios <= step + self.tol * max(1.0, abs(step))]
            leaving = int(min(tied, key=lambda r: self.basis[r]))

            self.basis[leaving] = entering
            self.iterations += 1
            if step <= self.tol:
                self.degenerate_run += 1
                if self.pricing is Pricing.DANTZIG and self.degenerate_run >= DEGENERATE_RUN:
                    logger.debug(f"{self.degenerate_run} degenerate pivots, switching to Bland")
                    self.pricing = Pricing.BLAND
            else:
                self.degenerate_run = 0


def solve_lp(
    c: np.ndarray,
    a_eq: np.ndarray,
    b_eq: np.ndarray,
    pricing: Pricing | str = Pricing.DANTZIG,
    tol: float = DEFAULT_TOLERANCE,
    max_iter: int = 10_000,
) -> SimplexResult:
    """Minimize ``c x`` subject to ``a_eq x = b_eq`` and ``x >= 0``.

    Parameters
    ----------
    c : np.ndarray
        Costs, shape ``(n,)``.
    a_eq : np.ndarray
        Constraint matrix, shape ``(m, n)``.
    b_eq : np.ndarray
        Right-hand side, shape ``(m,)``.
    pricing : Pricing or str
        ``dantzig`` or ``bland``. Dantzig pricing (most negative reduced cost)
        is a hybrid: after ``DEGENERATE_RUN`` consecutive degenerate pivots it
        switches to Bland's rule (smallest improving index) for the rest of the
        solve, so it cannot cycle; ``SimplexResult.switched_to_bland`` records
        the switch. ``bland`` uses Bland's rule from the first pivot. Both
        return a vertex optimum.
    tol : float
        Feasibility and optimality tolerance.
    max_iter : int
        Pivot cap over both phases.

    Returns
    -------
    SimplexResult
        A vertex solution.

    Raises
    ------
    InfeasibleError
        If no x satisfies the constraints.
    UnboundedError
        If the objective is unbounded below.
    SimplexError
        If the iteration cap is reached or a basis becomes singular.

    Examples
    --------
    >>> res = solve_lp(np.array([1.0, 2.0]), np.array([[1.0, 1.0]]), np.array([1.0]))
    >>> res.x.tolist(), res.value
    ([1.0, 0.0], 1.0)
    """
    pricing = Pricing(pricing)
    cost = np.asarray(c, dtype=float).reshape(-1)
    a = np.array(a_eq, dtype=float, ndmin=2)
    b = np.array(b_eq, dtype=float).reshape(-1)
    m, n = a.shape
    if len(cost) != n or len(b) != m:
        raise ValueError(f"Inconsistent LP shapes: c {cost.shape}, A {a.shape}, b {b.shape}")

    negative = b < 0
    a[negative] *= -1.0
    b[negative] *= -1.0

    # Phase 1 on [A | I] with the artificial columns n .. n+m-1 basic
    extended = np.hstack([a, np.eye(m)])
    tableau = _Tableau(extended, b, list(range(n, n + m)), tol, pricing, max_iter)
    phase1_cost = np.concatenate([np.zeros(n), np.ones(m)])
    tableau.optimize(phase1_cost, np.ones(n + m, dtype=bool))
    x_b = tableau.basic_solution()
    infeasibility = float(np.sum(x_b[np.array(tableau.basis) >= n]))
    if infeasibility > tol * max(1.0, float(np.abs(b).max(initial=0.0))):
        raise InfeasibleError(f"LP is infeasible (phase 1 residual {infeasibility:.3e})")

    # Drive artificial columns out of the basis, dropping redundant rows
    row = 0
    while row < len(tableau.basis):
        if tableau.basis[row] < n:
            row += 1
            continue
        tableau_rows = np.linalg.solve(tableau.a[:, tableau.basis], tableau.a[:, :n])[row]
        usable = [j for j in np.flatnonzero(np.abs(tableau_rows) > tol) if j not in tableau.basis]
        if usable:
            tableau.basis[row] = int(usable[0])
            row += 1
            continue
        # the artificial column is a unit vector marking the redundant constraint
        redundant = int(np.argmax(tableau.a[:, tableau.basis[row]] != 0.0))
        logger.debug(f"Dropping redundant constraint row {redundant}")
        tableau.a = np.delete(tableau.a, redundant, axis=0)
        tableau.b = np.delete(tableau.b, redundant)
        del tableau.basis[row]

    # Phase 2 on the original columns; artificial columns stay out of the basis
    phase2_cost = np.concatenate([cost, np.zeros(tableau.a.shape[1] - n)])
    allowed = np.arange(tableau.a.shape[1]) < n
    tableau.optimize(phase2_cost, allowed)

    x = np.zeros(n)
    x_b = tableau.basic_solution()
    basis = np.array(tableau.basis)
    x[basis] = np.where(x_b > tol, x_b, 0.0)
    value = float(cost @ x)
    logger.debug(
        f"LP solved: {m}x{n}, value {value:.6g}, {tableau.iterations} pivots, "
        f"pricing {tableau.pricing.value}"
    )
    return SimplexResult(
        x=x,
        value=value,
        basis=tuple(int(j) for j in basis),
        iterations=tableau.iterations,
        switched_to_bland=tableau.pricing is Pricing.BLAND,
    )
