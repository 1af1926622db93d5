# SPDX-FileCopyrightText: 2026 The linetension developers
#
# SPDX-License-Identifier: LGPL-2.1-or-later

"""Piecewise-constant divergence-free fields on tetrahedral meshes.

Fields are built as the row-wise curl of the piecewise-affine interpolant of a
polynomial vector potential, or read as explicit per-tetrahedron matrices and
validated through the normal-jump condition ``A_i n = A_j n``.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import ConfigError, DegenerateGeometryError, NormalJumpError
from .geometry import Box, Triangulation, tet_box_volume
from .meshes import kuhn_subdivision

logger = logging.getLogger(__name__)

DEFAULT_JUMP_TOLERANCE = 1e-10


@dataclass(frozen=True, eq=False)
class PolynomialMap:
    """Tensor-valued polynomial on R^3 given by a coefficient table.

    Parameters
    ----------
    exponents : array_like
        Monomial exponents, shape ``(T, 3)``.
    coefficients : array_like
        Coefficient tensors, shape ``(T, *shape)``.

    Examples
    --------
    >>> p = PolynomialMap([[1, 0, 0]], [[2.0]])  # 2 x, scalar in a 1-vector
    >>> p(np.array([[3.0, 0.0, 0.0]])).tolist()
    [[6.0]]
    """

    exponents: np.ndarray
    coefficients: np.ndarray

    def __post_init__(self) -> None:
        exps = np.array(self.exponents, dtype=np.int64).reshape(-1, 3)
        coeffs = np.array(self.coefficients, dtype=float)
        if len(coeffs) != len(exps):
            raise ValueError("exponents and coefficients must have the same number of terms")
        if np.any(exps < 0):
            raise ValueError("Monomial exponents must be nonnegative")
        object.__setattr__(self, "exponents", exps)
        object.__setattr__(self, "coefficients", coeffs)

    @classmethod
    def from_terms(
        cls, terms: Iterable[tuple[tuple[int, ...], tuple[int, int, int], float]], shape: tuple
    ) -> PolynomialMap:
        """Build a map from ``(output index, exponents, coefficient)`` triples."""
        exps = []
        coeffs = []
        for index, exponent, value in terms:
            c = np.zeros(shape)
            c[tuple(index)] = value
            exps.append(exponent)
            coeffs.append(c)
        if not exps:
            return cls(np.zeros((0, 3)), np.zeros((0, *shape)))
        return cls(np.array(exps), np.array(coeffs))

    @classmethod
    def constant(cls, value: np.ndarray) -> PolynomialMap:
        """Constant map."""
        v = np.asarray(value, dtype=float)
        return cls(np.zeros((1, 3)), v[None])

    @classmethod
    def random(
        cls, rng: np.random.Generator, shape: tuple, degree: int, scale: float = 1.0
    ) -> PolynomialMap:
        """Random polynomial with every monomial of total degree at most ``degree``."""
        exps = [
            (a, b, c)
            for a in range(degree + 1)
            for b in range(degree + 1 - a)
            for c in range(degree + 1 - a - b)
        ]
        return cls(np.array(exps), scale * rng.standard_normal((len(exps), *shape)))

    @property
    def shape(self) -> tuple[int, ...]:
        """Shape of the values."""
        return self.coefficients.shape[1:]

    @property
    def degree(self) -> int:
        """Total degree (0 for the zero map)."""
        if len(self.exponents) == 0:
            return 0
        return int(self.exponents.sum(axis=1).max())

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        monomials = np.prod(pts[..., None, :] ** self.exponents, axis=-1)
        return np.tensordot(monomials, self.coefficients, axes=([-1], [0]))

    def derivative(self, axis: int) -> PolynomialMap:
        """Exact partial derivative along ``axis``."""
        factor = self.exponents[:, axis]
        keep = factor > 0
        exps = self.exponents[keep].copy()
        exps[:, axis] -= 1
        coeffs = self.coefficients[keep] * factor[keep].reshape(-1, *([1] * len(self.shape)))
        return PolynomialMap(exps, coeffs)

    @cached_property
    def _partials(self) -> tuple[PolynomialMap, PolynomialMap, PolynomialMap]:
        return self.derivative(0), self.derivative(1), self.derivative(2)

    def gradient(self, points: np.ndarray) -> np.ndarray:
        """Jacobian, shape ``(..., *shape, 3)``."""
        return np.stack([d(points) for d in self._partials], axis=-1)


def _curl_from_jacobian(jac: np.ndarray) -> np.ndarray:
    """Curl of each row given the Jacobian ``jac[..., component, axis]``."""
    return np.stack(
        [
            jac[..., 2, 1] - jac[..., 1, 2],
            jac[..., 0, 2] - jac[..., 2, 0],
            jac[..., 1, 0] - jac[..., 0, 1],
        ],
        axis=-1,
    )


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """Row-wise vector potential phi: R^3 -> R^{N x 3}.

    Row i of ``phi`` is a vector potential whose curl is row i of the field.

    Parameters
    ----------
    phi : PolynomialMap
        Polynomial with values of shape ``(N, 3)``.
    max_degree : int
        Largest accepted total degree.
    """

    phi: PolynomialMap
    max_degree: int = 6

    def __post_init__(self) -> None:
        if len(self.phi.shape) != 2 or self.phi.shape[1] != 3:
            raise ValueError(f"Potential values must have shape (N, 3), got {self.phi.shape}")
        if self.phi.degree > self.max_degree:
            raise ValueError(
                f"Potential degree {self.phi.degree} exceeds the bound {self.max_degree}"
            )

    @property
    def n(self) -> int:
        """Number of rows N."""
        return self.phi.shape[0]

    def curl(self, points: np.ndarray) -> np.ndarray:
        """Exact row-wise curl, shape ``(..., N, 3)``."""
        return _curl_from_jacobian(self.phi.gradient(points))

    @classmethod
    def read(cls, path: str | Path, n: int) -> PotentialSpec:
        """Read a coefficient list ``row,component,px,py,pz,coefficient``.

        Raises
        ------
        ConfigError
            Naming every malformed row.
        """
        terms = []
        problems = []
        with open(path, newline="", encoding="utf-8") as handle:
            for lineno, row in enumerate(csv.reader(handle), start=1):
                if not row or row[0].startswith("#") or row[0].strip() == "row":
                    continue
                try:
                    i, comp, a, b, c = (int(x) for x in row[:5])
                    value = float(row[5])
                except (ValueError, IndexError):
                    problems.append(f"{path}:{lineno}: expected row,component,px,py,pz,coefficient")
                    continue
                if not (0 <= i < n and 0 <= comp < 3) or min(a, b, c) < 0:
                    problems.append(f"{path}:{lineno}: index out of range")
                    continue
                terms.append(((i, comp), (a, b, c), value))
        if problems:
            raise ConfigError(problems)
        return cls(PolynomialMap.from_terms(terms, (n, 3)))


@dataclass(frozen=True, eq=False)
class PiecewiseConstantField:
    """One constant N x 3 matrix per tetrahedron.

    Parameters
    ----------
    mesh : Triangulation
        The mesh.
    matrices : np.ndarray
        Shape ``(T, N, 3)``.
    """

    mesh: Triangulation
    matrices: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.matrices, dtype=float)
        if m.ndim != 3 or m.shape[0] != len(self.mesh) or m.shape[2] != 3:
            raise ValueError(
                f"Expected matrices of shape ({len(self.mesh)}, N, 3), got {m.shape}"
            )
        m.setflags(write=False)
        object.__setattr__(self, "matrices", m)

    @classmethod
    def constant(cls, mesh: Triangulation, matrix: np.ndarray) -> PiecewiseConstantField:
        """Same matrix on every tetrahedron."""
        a = np.asarray(matrix, dtype=float)
        return cls(mesh, np.broadcast_to(a, (len(mesh), *a.shape)))

    @property
    def n(self) -> int:
        """Number of rows N."""
        return self.matrices.shape[1]

    @property
    def is_zero(self) -> bool:
        """Whether every matrix vanishes."""
        return not np.any(self.matrices)

    @property
    def volumes(self) -> np.ndarray:
        """Tetrahedron volumes."""
        return np.array([t.volume for t in self.mesh.tets])

    def l1_norm(self) -> float:
        """``sum_i |A_i|_F L^3(T_i)``."""
        return float(np.sum(np.linalg.norm(self.matrices, axis=(1, 2)) * self.volumes))

    def with_matrix(self, index: int, matrix: np.ndarray) -> PiecewiseConstantField:
        """Copy with the matrix of one tetrahedron replaced."""
        m = self.matrices.copy()
        m[index] = matrix
        return PiecewiseConstantField(self.mesh, m)

    def scaled(self, factor: float) -> PiecewiseConstantField:
        """Copy with every matrix multiplied by ``factor``."""
        return PiecewiseConstantField(self.mesh, factor * self.matrices)


@dataclass(frozen=True, eq=False)
class RankOneDecomposition:
    """Finite sum ``A = sum_j b_j (x) t_j`` with unit directions t_j.

    Attributes
    ----------
    burgers : np.ndarray
        Vectors b_j, shape ``(M, N)``.
    directions : np.ndarray
        Unit vectors t_j, shape ``(M, 3)``.
    target : np.ndarray
        The decomposed matrix, shape ``(N, 3)``.
    value : float | None
        Cost ``sum_j psi_inf(b_j, t_j)`` when produced by the envelope LP.
    """

    burgers: np.ndarray
    directions: np.ndarray
    target: np.ndarray
    value: float | None = None

    def __post_init__(self) -> None:
        target = np.array(self.target, dtype=float)
        b = np.array(self.burgers, dtype=float).reshape(-1, target.shape[0])
        t = np.array(self.directions, dtype=float).reshape(-1, 3)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "burgers", b)
        object.__setattr__(self, "directions", t)

    def __len__(self) -> int:
        return len(self.burgers)

    def terms(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """List of ``(b_j, t_j)`` pairs."""
        return list(zip(self.burgers, self.directions))

    def reconstruct(self) -> np.ndarray:
        """``sum_j b_j (x) t_j``."""
        if len(self) == 0:
            return np.zeros_like(self.target)
        return np.einsum("mi,mj->ij", self.burgers, self.directions)

    def residual(self) -> float:
        """Max-norm distance between the reconstruction and the target."""
        return float(np.abs(self.reconstruct() - self.target).max(initial=0.0))


def coordinate_rank_one_decomposition(matrix: np.ndarray) -> RankOneDecomposition:
    """Split A into at most 3N terms ``(|A_ij| e_i) (x) (sign(A_ij) e_j)``.

    The magnitude goes into the (integer-direction) multiplicity and the sign into
    the unit direction; zero entries are skipped.

    Parameters
    ----------
    matrix : np.ndarray
        Matrix A of shape ``(N, 3)``.

    Returns
    -------
    RankOneDecomposition
        Exact decomposition (empty for A = 0).
    """
    a = np.asarray(matrix, dtype=float)
    n = a.shape[0]
    rows, cols = np.nonzero(a)
    burgers = np.zeros((len(rows), n))
    directions = np.zeros((len(rows), 3))
    values = a[rows, cols]
    burgers[np.arange(len(rows)), rows] = np.abs(values)
    directions[np.arange(len(rows)), cols] = np.sign(values)
    return RankOneDecomposition(burgers, directions, a)


def curl_of_interpolated_potential(
    potential: PotentialSpec, mesh: Triangulation
) -> PiecewiseConstantField:
    """Row-wise curl of the piecewise-affine interpolant of a potential.

    On each tetrahedron the affine interpolant of phi at the four vertices has
    a constant gradient; its curl is the field matrix. Tangential traces of the
    interpolants agree across shared faces, so the normal-jump condition holds
    up to rounding.

    Raises
    ------
    DegenerateGeometryError
        If an interpolation system is singular.
    """
    vertices = mesh.vertex_array
    values = potential.phi(vertices)  # (T, 4, N, 3)
    edges = vertices[:, 1:] - vertices[:, :1]
    increments = (values[:, 1:] - values[:, :1]).reshape(len(mesh), 3, -1)
    try:
        grads = np.linalg.solve(edges, increments)  # (T, axis, N*3)
    except np.linalg.LinAlgError as e:
        raise DegenerateGeometryError("Singular interpolation matrix", original_error=e) from e
    jac = grads.reshape(len(mesh), 3, potential.n, 3).transpose(0, 2, 3, 1)
    logger.info(f"Interpolated potential of degree {potential.phi.degree} on {len(mesh)} tets")
    return PiecewiseConstantField(mesh, _curl_from_jacobian(jac))


@dataclass(frozen=True)
class NormalJumpReport:
    """Result of :func:`check_normal_jumps`.

    Attributes
    ----------
    passed : bool
        Whether every interior face satisfies the condition.
    max_violation : float
        Largest ``|A_i n - A_j n|`` over interior faces.
    face : tuple[int, int] | None
        Tetrahedra sharing the worst face.
    tolerance : float
        Absolute tolerance that was applied.
    """

    passed: bool
    max_violation: float
    face: tuple[int, int] | None
    tolerance: float

    def __bool__(self) -> bool:
        return self.passed


def check_normal_jumps(
    field: PiecewiseConstantField, tol: float = DEFAULT_JUMP_TOLERANCE
) -> NormalJumpReport:
    """Measure ``|A_i n - A_j n|`` on every interior face.

    Parameters
    ----------
    field : PiecewiseConstantField
        The field.
    tol : float
        Tolerance relative to ``max_i |A_i|``.
    """
    scale = float(np.linalg.norm(field.matrices, axis=(1, 2)).max(initial=0.0))
    worst = 0.0
    worst_face = None
    for face in field.mesh.interior_faces:
        a, b = face.tets
        n = np.array(face.normal)
        violation = float(np.linalg.norm(field.matrices[a] @ n - field.matrices[b] @ n))
        if worst_face is None or violation > worst:
            worst, worst_face = violation, (a, b)
    tolerance = tol * scale
    return NormalJumpReport(worst <= tolerance, worst, worst_face, tolerance)


def require_normal_jumps(
    field: PiecewiseConstantField, tol: float = DEFAULT_JUMP_TOLERANCE
) -> None:
    """Raise :class:`NormalJumpError` when the field is not divergence-free."""
    report = check_normal_jumps(field, tol)
    if not report.passed:
        raise NormalJumpError(
            f"Normal jump {report.max_violation:.3e} across the face between tetrahedra "
            f"{report.face} exceeds {report.tolerance:.3e}",
            face=report.face,
            violation=report.max_violation,
        )


def tet_quadrature(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Collapsed Gauss-Legendre rule on the reference tetrahedron (volume 1/6).

    Returns
    -------
    tuple[np.ndarray, np.ndarray]
        Reference points ``(Q, 3)`` and weights ``(Q,)``.
    """
    x, w = leggauss(order)
    s = 0.5 * (x + 1.0)
    w = 0.5 * w
    u, v, t = np.meshgrid(s, s, s, indexing="ij")
    wu, wv, wt = np.meshgrid(w, w, w, indexing="ij")
    points = np.column_stack(
        [u.ravel(), (v * (1 - u)).ravel(), (t * (1 - u) * (1 - v)).ravel()]
    )
    weights = (wu * wv * wt * (1 - u) ** 2 * (1 - v)).ravel()
    return points, weights


def _physical_quadrature(
    mesh: Triangulation, order: int
) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature points ``(T, Q, 3)`` and weights ``(T, Q)`` on every tetrahedron."""
    ref, w = tet_quadrature(order)
    v = mesh.vertex_array
    edges = v[:, 1:] - v[:, :1]
    points = v[:, :1] + np.einsum("qk,tkd->tqd", ref, edges)
    volumes = np.array([t.volume for t in mesh.tets])
    return points, 6.0 * volumes[:, None] * w[None, :]


def integrate_field_pairing(
    field: PiecewiseConstantField,
    phi: Callable[[np.ndarray], np.ndarray],
    order: int = 4,
    window: Box | None = None,
) -> float:
    """Approximate ``int <phi(x), A(x)> dx`` over the mesh (restricted to a window).

    Quadrature points outside the closed window get zero weight, which is exact
    for tetrahedra entirely inside or outside it.
    """
    points, weights = _physical_quadrature(field.mesh, order)
    if window is not None:
        inside = np.all((points >= window.lo) & (points <= window.hi), axis=-1)
        weights = weights * inside
    values = phi(points.reshape(-1, 3)).reshape(*points.shape[:2], field.n, 3)
    return float(np.einsum("tqij,tij,tq->", values, field.matrices, weights))


def field_l1_error(
    field: PiecewiseConstantField, potential: PotentialSpec, order: int = 4
) -> float:
    """``int |A - curl phi| dx`` (Frobenius norm) over the mesh."""
    points, weights = _physical_quadrature(field.mesh, order)
    exact = potential.curl(points)
    diff = np.linalg.norm(exact - field.matrices[:, None], axis=(2, 3))
    return float(np.sum(diff * weights))


def interpolation_rate(
    potential: PotentialSpec, levels: Iterable[int] = (1, 2, 4, 8)
) -> tuple[np.ndarray, np.ndarray, float]:
    """Fit the L1 interpolation error of the curl against the mesh size.

    Kuhn subdivisions of the unit cube are used for the refinements.

    Returns
    -------
    tuple[np.ndarray, np.ndarray, float]
        Mesh sizes, errors and the fitted log-log slope.
    """
    sizes = []
    errors = []
    for level in levels:
        mesh = kuhn_subdivision(level)
        field = curl_of_interpolated_potential(potential, mesh)
        sizes.append(mesh.size)
        errors.append(field_l1_error(field, potential))
    slope, _ = np.polyfit(np.log(sizes), np.log(errors), 1)
    return np.array(sizes), np.array(errors), float(slope)


def e0_energy(
    field: PiecewiseConstantField,
    g: Callable[[np.ndarray], float],
    window: Box | None = None,
) -> float:
    """Limit energy ``sum_i g(A_i) L^3(T_i intersected with Omega)``.

    Parameters
    ----------
    field : PiecewiseConstantField
        The field.
    g : callable
        Convex envelope evaluator mapping an ``(N, 3)`` matrix to a value.
    window : Box, optional
        Omega; defaults to the mesh domain.
    """
    box = field.mesh.domain if window is None else window
    total = 0.0
    for tet, a in zip(field.mesh.tets, field.matrices):
        if not np.any(a):
            continue
        volume = tet_box_volume(tet, box)
        if volume > 0.0:
            total += float(g(a)) * volume
    return total


def write_field(field: PiecewiseConstantField, path: str | Path) -> None:
    """Write per-tetrahedron matrices as CSV rows ``tet,a11,a12,a13,a21,...``."""
    n = field.n
    header = ["tet"] + [f"a{i + 1}{j + 1}" for i in range(n) for j in range(3)]
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for t, a in enumerate(field.matrices):
            writer.writerow([t] + [repr(float(x)) for x in a.ravel()])


def read_field(path: str | Path, mesh: Triangulation, n: int) -> PiecewiseConstantField:
    """Read matrices written by :func:`write_field`.

    Raises
    ------
    ConfigError
        Naming every malformed row and every tetrahedron without a matrix.
    """
    matrices = np.full((len(mesh), n, 3), np.nan)
    problems = []
    with open(path, newline="", encoding="utf-8") as handle:
        for lineno, row in enumerate(csv.reader(handle), start=1):
            if not row or row[0].strip() in ("tet", "") or row[0].startswith("#"):
                continue
            if len(row) != 1 + 3 * n:
                problems.append(f"{path}:{lineno}: expected {1 + 3 * n} columns, got {len(row)}")
                continue
            try:
                t = int(row[0])
                values = np.array([float(x) for x in row[1:]]).reshape(n, 3)
            except ValueError:
                problems.append(f"{path}:{lineno}: not numeric")
                continue
            if not 0 <= t < len(mesh):
                problems.append(f"{path}:{lineno}: tetrahedron index {t} out of range")
                continue
            matrices[t] = values
    missing = np.flatnonzero(np.isnan(matrices).any(axis=(1, 2)))
    problems.extend(f"{path}: no matrix for tetrahedron {t}" for t in missing)
    if problems:
        raise ConfigError(problems)
    return PiecewiseConstantField(mesh, matrices)
