# SPDX-FileCopyrightText: 2026 The linetension developers
#
# SPDX-License-Identifier: LGPL-2.1-or-later

"""Line-tension densities psi(z, t) and their recession functions.

A density maps a Burgers vector z in Z^N and a unit tangent t to a
nonnegative energy per unit length. The recession function
``psi_inf(b, t) = liminf psi(s b, t) / s`` is finite only on the cone of
positive multiples of integer vectors; :func:`rational_direction` decides
membership in that cone numerically.
"""

from __future__ import annotations

import csv
import logging
import math
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError
from .geometry import fibonacci_sphere

logger = logging.getLogger(__name__)

ANISO_PATTERN = re.compile(r"^aniso(?::e([123]))?$")

BUILTIN_DENSITIES = ("iso", "aniso:e1", "aniso:e2", "aniso:e3", "offset", "quadratic")


class DensitySpec(ABC):
    """Abstract line-tension density.

    Subclasses implement :meth:`evaluate` on stacked arrays and declare the
    growth constants c (``lower``) and c-bar (``upper``).
    """

    name: str = "density"
    lower: float = 1.0
    upper: float = 1.0
    assumed_elliptic: bool = False

    @abstractmethod
    def evaluate(self, z: np.ndarray, t: np.ndarray) -> np.ndarray:
        """Evaluate on ``z`` of shape ``(M, N)`` and ``t`` of shape ``(M, 3)``."""

    def __call__(self, z: np.ndarray, t: np.ndarray) -> np.ndarray | float:
        """Evaluate on single vectors or stacked arrays (broadcasting rows)."""
        za = np.asarray(z, dtype=float)
        ta = np.asarray(t, dtype=float)
        if za.ndim == 1 and ta.ndim == 1:
            return float(self.evaluate(za[None], ta[None])[0])
        za = np.atleast_2d(za)
        ta = np.atleast_2d(ta)
        rows = max(len(za), len(ta))
        return self.evaluate(
            np.broadcast_to(za, (rows, za.shape[1])), np.broadcast_to(ta, (rows, 3))
        )

    def __repr__(self) -> str:
        return f"{type(self).__name__}(name={self.name!r}, c={self.lower}, c_bar={self.upper})"


class IsotropicDensity(DensitySpec):
    """``psi(z, t) = |z|``."""

    name = "iso"

    def evaluate(self, z: np.ndarray, t: np.ndarray) -> np.ndarray:
        return np.linalg.norm(z, axis=-1)


class AnisotropicDensity(DensitySpec):
    """``psi(z, t) = (2 - |<t, e_axis>|) |z|``, cheapest along the axis.

    Parameters
    ----------
    axis : int
        Index of the preferred axis (0, 1 or 2).
    """

    lower = 1.0
    upper = 2.0

    def __init__(self, axis: int = 2) -> None:
        if axis not in (0, 1, 2):
            raise ValueError(f"axis must be 0, 1 or 2, got {axis}")
        self.axis = axis
        self.name = f"aniso:e{axis + 1}"

    def evaluate(self, z: np.ndarray, t: np.ndarray) -> np.ndarray:
        return (2.0 - np.abs(t[..., self.axis])) * np.linalg.norm(z, axis=-1)


class OffsetDensity(DensitySpec):
    """``psi(z, t) = |z| + 1`` for z != 0 (core energy offset), 0 at z = 0."""

    name = "offset"
    lower = 1.0
    upper = 2.0

    def evaluate(self, z: np.ndarray, t: np.ndarray) -> np.ndarray:
        norm = np.linalg.norm(z, axis=-1)
        return np.where(norm > 0.0, norm + 1.0, 0.0)


class QuadraticDensity(DensitySpec):
    """``psi(z, t) = |z|^2``; neither subadditive nor of linear growth."""

    name = "quadratic"
    lower = 1.0
    upper = math.inf

    def evaluate(self, z: np.ndarray, t: np.ndarray) -> np.ndarray:
        return np.sum(np.square(z), axis=-1)


class TableDensity(DensitySpec):
    """Density sampled on a table of (z, direction) pairs.

    Rows are ``z1..zN, theta, phi, value`` with t given by its polar angle
    theta (from e3) and azimuth phi. A query (z, t) takes the value of the
    nearest tabulated direction for the same z; Burgers vectors missing from
    the table use the 1-homogeneous extension ``slope * |z|`` with the largest
    tabulated ``value / |z|``.

    Parameters
    ----------
    path : str or Path
        CSV file, with or without header.
    n : int
        Dimension N.

    Raises
    ------
    ConfigError
        Naming every malformed row.
    """

    assumed_elliptic = True

    def __init__(self, path: str | Path, n: int) -> None:
        self.path = Path(path)
        self.name = str(path)
        self.n = n
        rows: dict[tuple[int, ...], list[tuple[np.ndarray, float]]] = {}
        problems = []
        try:
            handle = open(self.path, newline="", encoding="utf-8")
        except OSError as e:
            raise ConfigError([f"{path}: cannot read density table"], original_error=e) from e
        with handle:
            for lineno, row in enumerate(csv.reader(handle), start=1):
                if not row or row[0].startswith("#") or row[0].strip() == "z1":
                    continue
                if len(row) != n + 3:
                    problems.append(f"{path}:{lineno}: expected {n + 3} columns, got {len(row)}")
                    continue
                try:
                    z = tuple(int(x) for x in row[:n])
                    theta, phi, value = (float(x) for x in row[n:])
                except ValueError:
                    problems.append(f"{path}:{lineno}: z must be integers, angles and value floats")
                    continue
                if not any(z):
                    problems.append(f"{path}:{lineno}: z must be nonzero")
                    continue
                if not math.isfinite(value) or value < 0.0:
                    problems.append(f"{path}:{lineno}: value must be finite and nonnegative")
                    continue
                sin_theta = math.sin(theta)
                direction = np.array(
                    [sin_theta * math.cos(phi), sin_theta * math.sin(phi), math.cos(theta)]
                )
                rows.setdefault(z, []).append((direction, value))
        if not rows and not problems:
            problems.append(f"{path}: table is empty")
        if problems:
            raise ConfigError(problems)

        self._trees: dict[tuple[int, ...], tuple[cKDTree, np.ndarray]] = {}
        ratios = []
        for z, entries in rows.items():
            dirs = np.array([d for d, _ in entries])
            values = np.array([v for _, v in entries])
            self._trees[z] = (cKDTree(dirs), values)
            ratios.extend(values / np.linalg.norm(z))
        self.slope = float(max(ratios))
        self.lower = float(min(ratios))
        self.upper = self.slope
        logger.info(f"Loaded density table {path} with {len(rows)} Burgers vectors")

    def evaluate(self, z: np.ndarray, t: np.ndarray) -> np.ndarray:
        out = self.slope * np.linalg.norm(z, axis=-1)
        keys = np.round(z).astype(np.int64)
        exact = np.all(np.abs(z - keys) <= 1e-12, axis=-1)
        for i in np.flatnonzero(exact):
            entry = self._trees.get(tuple(int(x) for x in keys[i]))
            if entry is not None:
                tree, values = entry
                _, nearest = tree.query(t[i])
                out[i] = values[nearest]
        return out


def parse_density(name: str, n: int) -> DensitySpec:
    """Build a density from a name or a table path.

    Parameters
    ----------
    name : str
        ``iso``, ``aniso`` / ``aniso:e1`` .. ``aniso:e3``, ``offset``,
        ``quadratic`` or the path of a table CSV.
    n : int
        Dimension N (needed for tables).

    Raises
    ------
    ConfigError
        For unknown names or malformed tables.
    """
    if name in ("iso", "isotropic"):
        return IsotropicDensity()
    match = ANISO_PATTERN.match(name)
    if match:
        return AnisotropicDensity(int(match.group(1) or 3) - 1)
    if name == "offset":
        return OffsetDensity()
    if name == "quadratic":
        return QuadraticDensity()
    if Path(name).is_file():
        return TableDensity(name, n)
    raise ConfigError(
        [f"Unknown density '{name}'. Built-in densities: {', '.join(BUILTIN_DENSITIES)}"]
    )


@dataclass(frozen=True)
class PropertyCheck:
    """Outcome of one sampled inequality.

    Attributes
    ----------
    name : str
        Property name.
    passed : bool
        Whether no sample violated it beyond tolerance.
    worst : float
        Largest violation (negative when all samples hold with slack).
    witness : tuple
        Arguments of the worst sample.
    """

    name: str
    passed: bool
    worst: float
    witness: tuple = ()


@dataclass
class DensityReport:
    """Results of :func:`check_density_properties`."""

    density: str
    checks: list[PropertyCheck] = field(default_factory=list)
    fitted_lower: float = 0.0
    fitted_upper: float = 0.0
    assumed_elliptic: bool = False

    @property
    def passed(self) -> bool:
        """Whether every property holds."""
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> PropertyCheck:
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)


def _witness(*arrays: np.ndarray) -> tuple:
    return tuple(tuple(float(x) for x in np.atleast_1d(a)) for a in arrays)


def check_density_properties(
    psi: DensitySpec,
    n: int,
    samples: int = 2000,
    directions: int = 1000,
    z_bound: int = 10,
    seed: int = 0,
    tol: float = 1e-9,
) -> DensityReport:
    """Sample the growth bounds and subadditivity of a density.

    Random integer vectors with ``|z|_inf <= z_bound`` are paired with a
    Fibonacci sample of at least ``directions`` unit vectors. Subadditivity
    checks ``(e_i, e_i)`` before the random pairs.

    Parameters
    ----------
    psi : DensitySpec
        The density.
    n : int
        Dimension N.
    samples : int
        Number of random (z, z', t) triples (raised to ``directions``).
    directions : int
        Size of the direction sample (at least 1000 is recommended).
    z_bound : int
        Bound on the integer entries.
    seed : int
        Seed of the random generator.
    tol : float
        Absolute slack allowed in every inequality.

    Returns
    -------
    DensityReport
        Checks ``lower_bound``, ``upper_bound`` and ``subadditivity`` with witnesses.
    """
    rng = np.random.default_rng(seed)
    dirs = fibonacci_sphere(directions)
    count = max(samples, directions)
    t = dirs[np.arange(count) % directions]
    z = rng.integers(-z_bound, z_bound + 1, size=(count, n))
    z[~np.any(z, axis=1), 0] = 1
    zp = rng.integers(-z_bound, z_bound + 1, size=(count, n))

    eye = np.eye(n, dtype=np.int64)
    axis_t = np.tile(np.eye(3), (n, 1))
    axis_z = np.repeat(eye, 3, axis=0)
    z_sub = np.vstack([axis_z, z])
    zp_sub = np.vstack([axis_z, zp])
    t_sub = np.vstack([axis_t, t])

    norms = np.linalg.norm(z, axis=1)
    values = psi.evaluate(z.astype(float), t)
    ratios = values / norms
    report = DensityReport(
        density=psi.name,
        fitted_lower=float(ratios.min()),
        fitted_upper=float(ratios.max()),
        assumed_elliptic=psi.assumed_elliptic,
    )

    gap = psi.lower * norms - values
    worst = int(np.argmax(gap))
    report.checks.append(
        PropertyCheck(
            "lower_bound", bool(gap[worst] <= tol), float(gap[worst]), _witness(z[worst], t[worst])
        )
    )

    if math.isinf(psi.upper):
        worst = int(np.argmax(ratios))
        report.checks.append(
            PropertyCheck("upper_bound", False, math.inf, _witness(z[worst], t[worst]))
        )
    else:
        gap = values - psi.upper * norms
        worst = int(np.argmax(gap))
        witness = _witness(z[worst], t[worst])
        report.checks.append(
            PropertyCheck("upper_bound", bool(gap[worst] <= tol), float(gap[worst]), witness)
        )

    total = psi.evaluate((z_sub + zp_sub).astype(float), t_sub)
    parts = psi.evaluate(z_sub.astype(float), t_sub) + psi.evaluate(zp_sub.astype(float), t_sub)
    gap = total - parts
    worst = int(np.argmax(gap))
    witness = _witness(z_sub[worst], zp_sub[worst], t_sub[worst])
    report.checks.append(
        PropertyCheck("subadditivity", bool(gap[worst] <= tol), float(gap[worst]), witness)
    )
    logger.info(
        f"Density {psi.name}: "
        + ", ".join(f"{c.name}={'ok' if c.passed else 'FAIL'}" for c in report.checks)
    )
    return report


def rational_direction(
    b: np.ndarray, tol: float = 1e-9, q_max: int = 10_000, z_cap: int = 1_000_000
) -> tuple[np.ndarray, float] | None:
    """Write b as ``lam * z`` with z a primitive integer vector and lam > 0.

    Ratios to the largest component are approximated by fractions with
    denominator at most ``q_max``.

    Parameters
    ----------
    b : np.ndarray
        Vector in R^N.
    tol : float
        Relative tolerance on the reconstruction ``|lam z - b| <= tol |b|``.
    q_max : int
        Largest denominator tried.
    z_cap : int
        Largest admissible integer entry.

    Returns
    -------
    tuple[np.ndarray, float] or None
        ``(z, lam)``, or None when b is zero or has no integer direction within
        tolerance.

    Examples
    --------
    >>> z, lam = rational_direction(np.array([0.5, -1.0]))
    >>> z.tolist(), lam
    ([1, -2], 0.5)
    """
    v = np.asarray(b, dtype=float).reshape(-1)
    if not np.all(np.isfinite(v)):
        return None
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        return None
    j = int(np.argmax(np.abs(v)))
    fractions = [Fraction(float(x / v[j])).limit_denominator(q_max) for x in v]
    common = math.lcm(*(f.denominator for f in fractions))
    ints = [int(f * common) for f in fractions]
    divisor = math.gcd(*ints)
    z = np.array([x // divisor for x in ints], dtype=np.int64)
    if np.abs(z).max() > z_cap:
        return None
    if v[j] < 0:
        z = -z
    lam = abs(float(v[j])) / abs(int(z[j]))
    if np.linalg.norm(lam * z - v) > tol * norm:
        return None
    return z, lam


@dataclass(frozen=True)
class RecessionEstimate:
    """Estimate of ``psi_inf(b, t)``.

    Attributes
    ----------
    value : float
        ``lam * min_{s <= s_max} psi(s z, t) / s``; ``math.inf`` off the cone.
    oscillation : float
        Spread of ``lam * psi(s z, t) / s`` over the last quarter of the samples.
    direction : tuple[int, ...]
        Primitive integer direction z (empty off the cone).
    scale : float
        lam with ``b = lam z``.
    """

    value: float
    oscillation: float
    direction: tuple[int, ...] = ()
    scale: float = 0.0

    @property
    def finite(self) -> bool:
        """Whether b lies in the cone."""
        return math.isfinite(self.value)


def recession(
    psi: DensitySpec, b: np.ndarray, t: np.ndarray, s_max: int = 64, tol: float = 1e-9
) -> RecessionEstimate:
    """Estimate the recession function along integer multiples.

    Parameters
    ----------
    psi : DensitySpec
        The density.
    b : np.ndarray
        Nonzero vector in R^N.
    t : np.ndarray
        Unit tangent.
    s_max : int
        Number of multiples sampled.
    tol : float
        Tolerance for recognizing b as a multiple of an integer vector.

    Raises
    ------
    ValueError
        If b is zero or ``s_max < 1``.
    """
    if s_max < 1:
        raise ValueError(f"s_max must be at least 1, got {s_max}")
    v = np.asarray(b, dtype=float).reshape(-1)
    if not np.any(v):
        raise ValueError("b must be nonzero")
    found = rational_direction(v, tol=tol)
    if found is None:
        return RecessionEstimate(math.inf, 0.0)
    z, lam = found
    s = np.arange(1, s_max + 1, dtype=float)
    tangent = np.broadcast_to(np.asarray(t, dtype=float), (s_max, 3))
    quotients = lam * psi.evaluate(s[:, None] * z[None, :], tangent) / s
    tail = quotients[-max(1, s_max // 4):]
    return RecessionEstimate(
        value=float(quotients.min()),
        oscillation=float(tail.max() - tail.min()),
        direction=tuple(int(x) for x in z),
        scale=lam,
    )


def recession_columns(
    psi: DensitySpec, z: np.ndarray, t: np.ndarray, s_max: int = 64
) -> np.ndarray:
    """Vectorized recession function on integer columns.

    Each z is reduced to ``g * z0`` with z0 primitive, and
    ``g * min_s psi(s z0, t) / s`` is returned, which agrees with
    :func:`recession` on the same vectors.
    """
    zi = np.asarray(z, dtype=np.int64)
    g = np.gcd.reduce(np.abs(zi), axis=1)
    if np.any(g == 0):
        raise ValueError("Dictionary columns must have nonzero z")
    z0 = (zi // g[:, None]).astype(float)
    best = np.full(len(zi), math.inf)
    for s in range(1, s_max + 1):
        best = np.minimum(best, psi.evaluate(s * z0, t) / s)
    return g * best


class RecessionEvaluator:
    """Callable ``psi_inf(b, t)`` with fixed sampling parameters.

    Parameters
    ----------
    psi : DensitySpec
        The base density.
    s_max : int
        Number of multiples sampled.
    tol : float
        Cone-membership tolerance.
    """

    def __init__(self, psi: DensitySpec, s_max: int = 64, tol: float = 1e-9) -> None:
        if s_max < 1:
            raise ValueError(f"s_max must be at least 1, got {s_max}")
        self.psi = psi
        self.s_max = s_max
        self.tol = tol

    def estimate(self, b: np.ndarray, t: np.ndarray) -> RecessionEstimate:
        """Full estimate with oscillation."""
        return recession(self.psi, b, t, self.s_max, self.tol)

    def __call__(self, b: np.ndarray, t: np.ndarray) -> float:
        if not np.any(b):
            return 0.0
        return self.estimate(b, t).value


def g_infinity(matrix: np.ndarray, psi_inf: RecessionEvaluator, rank_tol: float = 1e-10) -> float:
    """``psi_inf(b, t)`` when ``A = b (x) t`` is rank one, ``math.inf`` otherwise.

    Parameters
    ----------
    matrix : np.ndarray
        Matrix A of shape ``(N, 3)``.
    psi_inf : RecessionEvaluator
        Recession function.
    rank_tol : float
        A counts as rank one when ``s_2 <= rank_tol * s_1``.

    Notes
    -----
    ``b (x) t`` and ``(-b) (x) (-t)`` are the same matrix. The pair passed to
    ``psi_inf`` has the first entry of t above ``1e-8`` in magnitude positive,
    so densities that are not even in (b, t) get a well-defined value.
    """
    a = np.asarray(matrix, dtype=float)
    if not np.any(a):
        return 0.0
    u, s, vt = np.linalg.svd(a)
    if len(s) > 1 and s[1] > rank_tol * s[0]:
        return math.inf
    b, t = s[0] * u[:, 0], vt[0]
    lead = int(np.flatnonzero(np.abs(t) > 1e-8)[0])
    if t[lead] < 0.0:
        b, t = -b, -t
    return psi_inf(b, t)


@dataclass
class ChainReport:
    """Results of :func:`inequality_chain_check`.

    Attributes
    ----------
    monotone_violation : float
        Largest ``psi(k s z, t) / (k s) - psi(s z, t) / s``.
    recession_violation : float
        Largest ``psi_inf(z, t) - psi(z, t)``.
    envelope_violation : float
        Largest ``g(z (x) t) - psi_inf(z, t)``.
    samples : int
        Number of (z, t) samples.
    tolerance : float
        Slack allowed in the envelope comparison.
    """

    monotone_violation: float
    recession_violation: float
    envelope_violation: float
    samples: int
    tolerance: float

    @property
    def passed(self) -> bool:
        """Whether the chain holds on every sample."""
        return (
            self.monotone_violation <= 1e-9
            and self.recession_violation <= 1e-9
            and self.envelope_violation <= self.tolerance
        )


def inequality_chain_check(
    psi: DensitySpec,
    n: int,
    envelope: Callable[[np.ndarray], float],
    samples: int = 12,
    z_bound: int = 3,
    multiples: tuple[int, ...] = (1, 2, 3),
    factors: tuple[int, ...] = (2, 3),
    s_max: int = 64,
    lp_tol: float = 1e-9,
    seed: int = 0,
) -> ChainReport:
    """Check ``psi(s z)/s >= psi(k s z)/(k s)`` and ``psi >= psi_inf >= g``.

    Parameters
    ----------
    psi : DensitySpec
        The density.
    n : int
        Dimension N.
    envelope : callable
        Evaluator of the convex envelope on ``(N, 3)`` matrices.
    samples : int
        Number of random (z, t) pairs.
    z_bound : int
        Bound on the integer entries of z.
    multiples, factors : tuple[int, ...]
        Values of s and k in the monotonicity check.
    s_max : int
        Recession sampling depth.
    lp_tol : float
        Slack for the envelope comparison.
    seed : int
        Seed of the random generator.
    """
    rng = np.random.default_rng(seed)
    rec = RecessionEvaluator(psi, s_max)
    z = rng.integers(-z_bound, z_bound + 1, size=(samples, n))
    z[~np.any(z, axis=1), 0] = 1
    t = rng.standard_normal((samples, 3))
    t /= np.linalg.norm(t, axis=1, keepdims=True)

    monotone = -math.inf
    for s in multiples:
        base = psi.evaluate(s * z.astype(float), t) / s
        for k in factors:
            longer = psi.evaluate(k * s * z.astype(float), t) / (k * s)
            monotone = max(monotone, float(np.max(longer - base)))

    values = psi.evaluate(z.astype(float), t)
    rec_worst = -math.inf
    env_worst = -math.inf
    for zi, ti, value in zip(z, t, values):
        r = rec(zi.astype(float), ti)
        g = envelope(np.outer(zi, ti))
        rec_worst = max(rec_worst, r - float(value))
        env_worst = max(env_worst, g - r)
    report = ChainReport(monotone, rec_worst, env_worst, samples, lp_tol * max(1.0, z_bound))
    logger.info(
        f"Inequality chain for {psi.name}: monotone {monotone:.2e}, "
        f"recession {rec_worst:.2e}, envelope {env_worst:.2e}"
    )
    return report
