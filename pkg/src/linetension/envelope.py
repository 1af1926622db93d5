# SPDX-FileCopyrightText: 2026 The linetension developers
#
# SPDX-License-Identifier: LGPL-2.1-or-later

"""Convex envelope of the rank-one recession energy by linear programming.

The envelope ``g(A)`` is approximated from above by

    min sum_d c_d psi_inf(z_d, t_d)  subject to  sum_d c_d z_d (x) t_d = A, c >= 0

over a finite dictionary of integer directions z_d and unit tangents t_d. The
dictionary always contains the signed coordinate columns ``e_i (x) e_j``, so
every A is representable, and the singular directions of A, so the isotropic
optimum (the nuclear norm) is reached exactly. A vertex solution of the LP is
a rank-one decomposition of A with at most 3N terms.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .densities import (
    DensitySpec,
    PropertyCheck,
    RecessionEvaluator,
    g_infinity,
    recession_columns,
)
from .errors import EnvelopeError, InfeasibleError
from .fields import RankOneDecomposition
from .geometry import fibonacci_sphere
from .simplex import DEFAULT_TOLERANCE, Pricing, solve_lp

logger = logging.getLogger(__name__)

# Largest multiple used for integer approximants of singular directions
APPROXIMANT_MULTIPLES = 12


def primitive_vectors(n: int, z_max: int) -> np.ndarray:
    """Nonzero integer vectors with ``|z|_inf <= z_max`` and coprime entries.

    Both signs of every direction are included, in lexicographic order.
    """
    if z_max < 1:
        raise ValueError(f"z_max must be at least 1, got {z_max}")
    out = [
        z
        for z in itertools.product(range(-z_max, z_max + 1), repeat=n)
        if any(z) and reduce(math.gcd, (abs(x) for x in z)) == 1
    ]
    return np.array(out, dtype=np.int64)


def ladder_parameters(z_max: int, directions: int) -> list[tuple[int, int]]:
    """``(z_max, directions)`` of the nested refinement levels, coarsest first."""
    return [
        (1, max(8, directions // 16)),
        (max(1, z_max - 1), max(16, directions // 4)),
        (z_max, directions),
    ]


@dataclass(frozen=True, eq=False)
class Dictionary:
    """Finite set of rank-one columns ``z (x) t`` with their costs.

    Attributes
    ----------
    z : np.ndarray
        Integer directions, shape ``(C, N)``.
    t : np.ndarray
        Unit tangents, shape ``(C, 3)``.
    costs : np.ndarray
        ``psi_inf(z, t)``, shape ``(C,)``.
    """

    z: np.ndarray
    t: np.ndarray
    costs: np.ndarray

    def __len__(self) -> int:
        return len(self.z)

    @property
    def n(self) -> int:
        """Dimension N."""
        return self.z.shape[1]

    def columns(self) -> np.ndarray:
        """Constraint matrix with column d equal to ``vec(z_d (x) t_d)``, shape ``(3N, C)``."""
        return np.einsum("ci,cj->ijc", self.z.astype(float), self.t).reshape(3 * self.n, -1)

    def union(self, other: Dictionary) -> Dictionary:
        """Columns of both dictionaries without duplicates, in first-seen order."""
        z = np.vstack([self.z, other.z])
        t = np.vstack([self.t, other.t])
        costs = np.concatenate([self.costs, other.costs])
        _, first = np.unique(np.hstack([z.astype(float), t]), axis=0, return_index=True)
        first = np.sort(first)
        return Dictionary(z[first], t[first], costs[first])


def build_dictionary(
    psi: DensitySpec, n: int, z_max: int, directions: int, s_max: int = 64
) -> Dictionary:
    """All primitive z with ``|z|_inf <= z_max`` crossed with a Fibonacci direction sample."""
    z = primitive_vectors(n, z_max)
    t = fibonacci_sphere(directions)
    zz = np.repeat(z, len(t), axis=0)
    tt = np.tile(t, (len(z), 1))
    return Dictionary(zz, tt, recession_columns(psi, zz, tt, s_max))


def _primitive(z: np.ndarray) -> np.ndarray:
    g = np.gcd.reduce(np.abs(z), axis=1)
    return z // np.maximum(g, 1)[:, None]


def target_columns(
    matrix: np.ndarray, base_z: np.ndarray, psi: DensitySpec, s_max: int = 64
) -> Dictionary:
    """Columns injected for a particular target A.

    The signed coordinate columns ``+-e_i (x) +-e_j`` guarantee feasibility.
    For every nonzero singular triple (s_k, u_k, v_k) the tangents ``+-v_k`` are
    crossed with all of ``base_z`` and with the integer approximants
    ``round(m u_k)`` for m up to 12.
    """
    a = np.asarray(matrix, dtype=float)
    n = a.shape[0]
    eye_n = np.eye(n, dtype=np.int64)
    eye_3 = np.eye(3)
    zs = []
    ts = []
    for sz, st in itertools.product((1, -1), repeat=2):
        for i, j in itertools.product(range(n), range(3)):
            zs.append(sz * eye_n[i][None])
            ts.append(st * eye_3[j][None])

    u, s, vt = np.linalg.svd(a)
    for k in range(len(s)):
        if s[k] <= 1e-12 * s[0]:
            continue
        approximants = np.round(np.outer(np.arange(1, APPROXIMANT_MULTIPLES + 1), u[:, k]))
        approximants = approximants.astype(np.int64)
        approximants = approximants[np.any(approximants != 0, axis=1)]
        candidates = np.vstack([base_z, _primitive(approximants), -_primitive(approximants)])
        for sign in (1.0, -1.0):
            zs.append(candidates)
            ts.append(np.tile(sign * vt[k], (len(candidates), 1)))

    z = np.vstack(zs)
    t = np.vstack(ts)
    return Dictionary(z, t, recession_columns(psi, z, t, s_max))


@dataclass(frozen=True, eq=False)
class EnvelopeResult:
    """Envelope value with its certificate.

    Attributes
    ----------
    value : float
        Upper bound on g(A).
    certificate : RankOneDecomposition
        Vertex solution, at most 3N terms.
    residual : float
        Max-norm error of the certificate re-sum.
    columns : int
        Dictionary size.
    level : int
        Refinement level that produced the result (-1 for a one-off dictionary).
    """

    value: float
    certificate: RankOneDecomposition
    residual: float
    columns: int = 0
    level: int = -1


def solve_envelope(
    matrix: np.ndarray,
    dictionary: Dictionary,
    psi: DensitySpec,
    s_max: int = 64,
    tol: float = DEFAULT_TOLERANCE,
    pricing: Pricing | str = Pricing.DANTZIG,
    level: int = -1,
) -> EnvelopeResult:
    """Solve the envelope LP over a dictionary plus the target's own columns.

    Raises
    ------
    EnvelopeError
        If the LP is infeasible.
    """
    a = np.asarray(matrix, dtype=float)
    if not np.any(a):
        empty = RankOneDecomposition(np.zeros((0, a.shape[0])), np.zeros((0, 3)), a, 0.0)
        return EnvelopeResult(0.0, empty, 0.0, len(dictionary), level)
    if len(dictionary):
        base_z = np.unique(dictionary.z, axis=0)
    else:
        base_z = primitive_vectors(a.shape[0], 1)
    full = dictionary.union(target_columns(a, base_z, psi, s_max))
    try:
        result = solve_lp(full.costs, full.columns(), a.ravel(), pricing=pricing, tol=tol)
    except InfeasibleError as e:
        raise EnvelopeError(
            "Dictionary cannot express the target matrix; increase z_max or directions",
            original_error=e,
        ) from e
    support = np.flatnonzero(result.x)
    certificate = RankOneDecomposition(
        result.x[support, None] * full.z[support], full.t[support], a, result.value
    )
    return EnvelopeResult(
        value=result.value,
        certificate=certificate,
        residual=certificate.residual(),
        columns=len(full),
        level=level,
    )


def convex_envelope(
    matrix: np.ndarray,
    psi: DensitySpec,
    z_max: int = 3,
    directions: int = 256,
    s_max: int = 64,
    tol: float = DEFAULT_TOLERANCE,
    pricing: Pricing | str = Pricing.DANTZIG,
) -> EnvelopeResult:
    """Upper approximation of the convex envelope g at one matrix.

    Parameters
    ----------
    matrix : np.ndarray
        Target A, shape ``(N, 3)``.
    psi : DensitySpec
        Line-tension density; columns cost ``psi_inf``.
    z_max : int
        Bound on the integer directions.
    directions : int
        Size of the tangent sample.
    s_max : int
        Recession sampling depth.
    tol : float
        LP tolerance.
    pricing : Pricing or str
        Simplex pricing rule.

    Returns
    -------
    EnvelopeResult
        Value, certificate (``A = 0`` gives 0 and an empty certificate) and residual.

    Raises
    ------
    EnvelopeError
        If the dictionary cannot express A.
    """
    a = np.asarray(matrix, dtype=float)
    dictionary = build_dictionary(psi, a.shape[0], z_max, directions, s_max)
    return solve_envelope(a, dictionary, psi, s_max, tol, pricing)


class EnvelopeEvaluator:
    """Cached envelope solves on a ladder of nested dictionaries.

    Level l is the union of the dictionaries of all levels up to l, so values
    are nonincreasing along the ladder (up to LP tolerance).

    Parameters
    ----------
    psi : DensitySpec
        Line-tension density.
    n : int
        Dimension N.
    z_max, directions : int
        Parameters of the finest level.
    s_max : int
        Recession sampling depth.
    tol : float
        LP tolerance.
    """

    def __init__(
        self,
        psi: DensitySpec,
        n: int,
        z_max: int = 3,
        directions: int = 256,
        s_max: int = 64,
        tol: float = DEFAULT_TOLERANCE,
    ) -> None:
        self.psi = psi
        self.n = n
        self.s_max = s_max
        self.tol = tol
        self.levels = ladder_parameters(z_max, directions)
        self.recession = RecessionEvaluator(psi, s_max)
        self._dictionaries: list[Dictionary] = []
        self._cache: dict[tuple[bytes, int], EnvelopeResult] = {}

    def dictionary(self, level: int = -1) -> Dictionary:
        """Dictionary of a refinement level (built on first use)."""
        index = level % len(self.levels)
        while len(self._dictionaries) <= index:
            z_max, directions = self.levels[len(self._dictionaries)]
            current = build_dictionary(self.psi, self.n, z_max, directions, self.s_max)
            if self._dictionaries:
                current = self._dictionaries[-1].union(current)
            logger.info(
                f"Envelope dictionary level {len(self._dictionaries)}: z_max={z_max}, "
                f"directions={directions}, {len(current)} columns"
            )
            self._dictionaries.append(current)
        return self._dictionaries[index]

    def solve(self, matrix: np.ndarray, level: int = -1) -> EnvelopeResult:
        """Envelope result at one level."""
        a = np.ascontiguousarray(matrix, dtype=float)
        index = level % len(self.levels)
        key = (a.tobytes(), index)
        if key not in self._cache:
            self._cache[key] = solve_envelope(
                a, self.dictionary(index), self.psi, self.s_max, self.tol, level=index
            )
        return self._cache[key]

    def __call__(self, matrix: np.ndarray) -> float:
        return self.solve(matrix).value

    def ladder(self, matrix: np.ndarray) -> list[float]:
        """Values at every level, coarsest first."""
        return [self.solve(matrix, level).value for level in range(len(self.levels))]

    def certificate(self, matrix: np.ndarray, epsilon: float) -> EnvelopeResult:
        """Coarsest-level result whose value is within ``epsilon`` of the finest level."""
        if epsilon < 0:
            raise ValueError(f"epsilon must be nonnegative, got {epsilon}")
        finest = self.solve(matrix).value
        for level in range(len(self.levels)):
            result = self.solve(matrix, level)
            if result.value <= finest + epsilon:
                return result
        return self.solve(matrix)


@dataclass
class EnvelopeReport:
    """Results of :func:`check_envelope_properties`."""

    checks: list[PropertyCheck] = field(default_factory=list)
    growth_lower: float = 0.0
    growth_upper: float = 0.0

    @property
    def passed(self) -> bool:
        """Whether every property holds."""
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> PropertyCheck:
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)


def check_envelope_properties(
    evaluator: EnvelopeEvaluator,
    samples: int = 6,
    seed: int = 0,
    convexity_tol: float = 0.02,
) -> EnvelopeReport:
    """Sample convexity, homogeneity, the rank-one bound and growth of the envelope.

    Midpoint convexity is checked with a relative tolerance because each
    target injects its own singular directions into the dictionary.

    Parameters
    ----------
    evaluator : EnvelopeEvaluator
        The envelope.
    samples : int
        Number of random matrices (and rank-one samples).
    seed : int
        Seed of the random generator.
    convexity_tol : float
        Relative slack for midpoint convexity.
    """
    rng = np.random.default_rng(seed)
    n = evaluator.n
    mats = rng.standard_normal((samples, n, 3))
    values = np.array([evaluator(a) for a in mats])
    norms = np.linalg.norm(mats, axis=(1, 2))
    report = EnvelopeReport(
        growth_lower=float((values / norms).min()), growth_upper=float((values / norms).max())
    )

    worst, witness = -math.inf, ()
    for a, v in zip(mats, values):
        gap = abs(evaluator(2.0 * a) - 2.0 * v) - 1e-9 * (1.0 + v)
        if gap > worst:
            worst, witness = gap, (float(v),)
    report.checks.append(PropertyCheck("homogeneity", worst <= 0.0, worst, witness))

    worst, witness = -math.inf, ()
    for i in range(samples - 1):
        a, b = mats[i], mats[i + 1]
        mid = evaluator(0.5 * (a + b))
        bound = 0.5 * (values[i] + values[i + 1])
        gap = mid - bound - convexity_tol * bound
        if gap > worst:
            worst, witness = gap, (float(mid), float(bound))
    report.checks.append(PropertyCheck("convexity", worst <= 0.0, worst, witness))

    worst, witness = -math.inf, ()
    z_bound = evaluator.levels[-1][0]
    for _ in range(samples):
        z = rng.integers(-z_bound, z_bound + 1, size=n)
        if not np.any(z):
            z[0] = 1
        t = rng.standard_normal(3)
        t /= np.linalg.norm(t)
        a = np.outer(z, t)
        rank_one = g_infinity(a, evaluator.recession)
        gap = evaluator(a) - rank_one - evaluator.tol * (1.0 + rank_one)
        if gap > worst:
            worst, witness = gap, (tuple(int(x) for x in z), tuple(float(x) for x in t))
    report.checks.append(PropertyCheck("rank_one_bound", worst <= 0.0, worst, witness))

    worst, witness = -math.inf, ()
    for a in mats:
        result = evaluator.solve(a)
        over = max(result.residual - 1e-8, len(result.certificate) - 3 * n)
        if over > worst:
            worst, witness = over, (result.residual, len(result.certificate))
    report.checks.append(PropertyCheck("certificate", worst <= 0.0, float(worst), witness))
    logger.info(
        f"Envelope growth constants c1={report.growth_lower:.4f}, c2={report.growth_upper:.4f}"
    )
    return report
