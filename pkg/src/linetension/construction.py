# SPDX-FileCopyrightText: 2026 The linetension developers
#
# SPDX-License-Identifier: LGPL-2.1-or-later

"""Polyhedral approximation of constant and piecewise-constant fields.

For one tetrahedron T, a constant matrix ``A = sum_j b_j (x) t_j`` and a
resolution k, the measure ``mu_k = nu_k + omega_k + rho_k`` is built from

- ``nu_k``: lattice lines parallel to t_j with spacing ``1/k**2`` and weight
  ``b_j / k**4``, clipped to the shrunk tetrahedron ``T_k = (1 - 1/k**2) T``;
- ``omega_k``: connectors joining every crossing of ``dT_k`` to the barycenter
  of the boundary triangle above it;
- ``rho_k``: truncated rays from each barycenter correcting the deposited
  mass B to the averaged mass ``area * A n``.

Gluing the per-tetrahedron measures over a mesh whose field satisfies the
normal-jump condition gives a current that is divergence-free inside the
domain. The boundary ledger convention is the one of :mod:`.currents`:
``nu_k + omega_k`` has mass ``-B`` at each barycenter, ``mu_k`` has ``-B_hat``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .currents import (
    PolyhedralCurrent,
    boundary_ledger,
    check_divergence_free,
    pair_with_matrix_field,
    total_variation,
    total_variation_on,
)
from .errors import LatticeError, RayDirectionError
from .fields import (
    PiecewiseConstantField,
    RankOneDecomposition,
    coordinate_rank_one_decomposition,
    integrate_field_pairing,
    require_normal_jumps,
)
from .geometry import (
    DEFAULT_EPS,
    Box,
    FaceGrid,
    Tetra,
    Triangulation,
    shrink_and_project,
    subdivide_boundary,
)
from .testfunctions import random_matrix_tests

logger = logging.getLogger(__name__)

# Seed stream tag separating ray directions from lattice offsets
RAY_STREAM = 0x5241

# Below this |<t, n>| a line counts as parallel to a plane
PARALLEL_TOL = 1e-12


@dataclass(frozen=True)
class ConstructionOptions:
    """Tunable constants of the construction.

    Attributes
    ----------
    eps : float
        Degeneracy distance relative to the tetrahedron diameter.
    ray_angle : float
        Minimum angle (radians) between a ray and forbidden planes or other rays.
    offset_retries : int
        Lattice re-seeds allowed when culling exceeds twice the budget.
    ray_tries : int
        Random direction draws allowed per ray.
    truncation_factor : float
        Rays end on the sphere of this many domain circumradii.
    mass_tolerance : float
        Ray multiplicities below this (relative to the largest averaged mass)
        are dropped.
    """

    eps: float = DEFAULT_EPS
    ray_angle: float = 1e-3
    offset_retries: int = 32
    ray_tries: int = 64
    truncation_factor: float = 4.0
    mass_tolerance: float = 1e-13


@dataclass(frozen=True, eq=False)
class PlaneFamily:
    """Finite family of planes ``{x : n . (x - p) = 0}`` rays must not run inside.

    Attributes
    ----------
    points : np.ndarray
        A point on each plane, shape ``(P, 3)``.
    normals : np.ndarray
        Unit normals, shape ``(P, 3)``.
    """

    points: np.ndarray
    normals: np.ndarray

    def __len__(self) -> int:
        return len(self.points)

    @classmethod
    def empty(cls) -> PlaneFamily:
        """Family without planes."""
        return cls(np.zeros((0, 3)), np.zeros((0, 3)))

    @classmethod
    def from_mesh(cls, mesh: Triangulation) -> PlaneFamily:
        """Every distinct face plane of a mesh."""
        normals = np.vstack([t.face_normals for t in mesh.tets])
        offsets = np.concatenate([t.face_offsets for t in mesh.tets])
        first = np.argmax(np.abs(normals) > 1e-12, axis=1)
        sign = np.sign(normals[np.arange(len(normals)), first])
        normals = normals * sign[:, None]
        offsets = offsets * sign
        scale = max(mesh.domain.diameter, 1.0)
        keys = np.hstack(
            [np.round(normals * 1e9), np.round(offsets[:, None] / scale * 1e9)]
        ).astype(np.int64)
        _, unique = np.unique(keys, axis=0, return_index=True)
        unique = np.sort(unique)
        return cls(offsets[unique, None] * normals[unique], normals[unique])

    def through(self, point: np.ndarray, eps: float) -> np.ndarray:
        """Normals of the planes passing within ``eps`` of a point."""
        if len(self) == 0:
            return self.normals
        dist = np.abs(np.einsum("pd,pd->p", self.normals, point - self.points))
        return self.normals[dist <= eps]

    def contains_lines(self, origins: np.ndarray, direction: np.ndarray, eps: float) -> np.ndarray:
        """Mask of lines ``origin + R direction`` lying within ``eps`` of some plane."""
        if len(self) == 0:
            return np.zeros(len(origins), dtype=bool)
        parallel = np.abs(self.normals @ direction) <= PARALLEL_TOL
        if not np.any(parallel):
            return np.zeros(len(origins), dtype=bool)
        normals = self.normals[parallel]
        offsets = np.einsum("pd,pd->p", normals, self.points[parallel])
        dist = np.abs(origins @ normals.T - offsets)
        return np.any(dist <= eps, axis=1)


def plane_basis(direction: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal basis (v1, v2) of the plane orthogonal to t.

    ``v1 = normalize(t x a)`` with a the first standard basis vector
    minimizing ``|<t, a>|``, and ``v2 = t x v1``.
    """
    t = np.asarray(direction, dtype=float)
    a = np.eye(3)[int(np.argmin(np.abs(t)))]
    v1 = np.cross(t, a)
    v1 /= np.linalg.norm(v1)
    return v1, np.cross(t, v1)


@dataclass(frozen=True, eq=False)
class LineLattice:
    """Lines ``origin + ((m + o1) v1 + (n + o2) v2) / k**2 + R t`` for integer m, n.

    Attributes
    ----------
    burgers : np.ndarray
        Multiplicity b; each line carries ``b / k**4``.
    direction : np.ndarray
        Unit direction t.
    k : int
        Resolution.
    offset : np.ndarray
        Shift (o1, o2) in the unit cell.
    origin : np.ndarray
        Reference point of the lattice.
    v1, v2 : np.ndarray
        Orthonormal basis of the plane orthogonal to t.
    """

    burgers: np.ndarray
    direction: np.ndarray
    k: int
    offset: np.ndarray
    origin: np.ndarray
    v1: np.ndarray
    v2: np.ndarray

    @property
    def spacing(self) -> float:
        """Lattice spacing ``1/k**2``."""
        return 1.0 / self.k**2

    @property
    def cell_area(self) -> float:
        """Area ``1/k**4`` of the elementary cell."""
        return self.spacing**2

    @property
    def weight(self) -> np.ndarray:
        """Multiplicity ``b / k**4`` of every line."""
        return self.burgers / self.k**4

    def indices_covering(self, points: np.ndarray) -> np.ndarray:
        """Integer pairs (m, n) of all lines that can meet the convex hull of ``points``."""
        rel = np.asarray(points, dtype=float) - self.origin
        a = rel @ self.v1 / self.spacing - self.offset[0]
        b = rel @ self.v2 / self.spacing - self.offset[1]
        ms = np.arange(math.floor(a.min()) - 1, math.ceil(a.max()) + 2)
        ns = np.arange(math.floor(b.min()) - 1, math.ceil(b.max()) + 2)
        mm, nn = np.meshgrid(ms, ns, indexing="ij")
        return np.column_stack([mm.ravel(), nn.ravel()])

    def origins(self, indices: np.ndarray) -> np.ndarray:
        """Foot points of the lines in the plane through ``origin``."""
        shifted = np.asarray(indices, dtype=float) + self.offset
        return self.origin + self.spacing * (
            shifted[:, 0:1] * self.v1 + shifted[:, 1:2] * self.v2
        )

    def lines_meeting_box(self, box: Box) -> np.ndarray:
        """Foot points of the lines crossing the interior of a box."""
        corners = np.array(
            [[x, y, z] for x in (box.lo[0], box.hi[0]) for y in (box.lo[1], box.hi[1])
             for z in (box.lo[2], box.hi[2])]
        )
        feet = self.origins(self.indices_covering(corners))
        reach = 2.0 * box.diameter + float(np.linalg.norm(self.origin - box.center))
        t = box.clip_parameters(feet - reach * self.direction, feet + reach * self.direction)
        return feet[t[:, 1] > t[:, 0]]


def build_line_lattice(
    b: np.ndarray,
    t: np.ndarray,
    k: int,
    offset: Sequence[float] = (0.0, 0.0),
    origin: np.ndarray | None = None,
) -> LineLattice:
    """Build the lattice of lines parallel to t for one rank-one term.

    Parameters
    ----------
    b : np.ndarray
        Multiplicity in R^N.
    t : np.ndarray
        Unit direction.
    k : int
        Resolution (>= 2).
    offset : sequence of float
        Shift in the unit cell.
    origin : np.ndarray, optional
        Reference point; defaults to 0.

    Raises
    ------
    ValueError
        If ``k < 2`` or t is not a unit vector.
    """
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    direction = np.asarray(t, dtype=float).reshape(3)
    if abs(np.linalg.norm(direction) - 1.0) > 1e-9:
        raise ValueError("t must be a unit vector")
    v1, v2 = plane_basis(direction)
    return LineLattice(
        burgers=np.asarray(b, dtype=float).reshape(-1),
        direction=direction,
        k=k,
        offset=np.asarray(offset, dtype=float).reshape(2),
        origin=np.zeros(3) if origin is None else np.asarray(origin, dtype=float).reshape(3),
        v1=v1,
        v2=v2,
    )


@dataclass(frozen=True, eq=False)
class LineIncidence:
    """Lines of one lattice that cross the shrunk tetrahedron.

    Attributes
    ----------
    entries, exits : np.ndarray
        Crossing points of dT_k, shape ``(L, 3)``; ``nu`` runs entry -> exit.
    entry_triangles, exit_triangles : np.ndarray
        Grid rows h of the inner triangles hit.
    counts : np.ndarray
        N(k, j, h) for every grid row.
    culled : int
        Lines removed for a degenerate incidence.
    examined : int
        Lines tested.
    """

    entries: np.ndarray
    exits: np.ndarray
    entry_triangles: np.ndarray
    exit_triangles: np.ndarray
    counts: np.ndarray
    culled: int
    examined: int

    def __len__(self) -> int:
        return len(self.entries)


def _locate(
    grid: FaceGrid, faces: np.ndarray, points: np.ndarray, eps: float
) -> tuple[np.ndarray, np.ndarray]:
    """Grid rows of the inner triangles containing points on local faces.

    Returns the rows and a mask of points at least ``eps`` away from every
    triangle contour.
    """
    k = grid.k
    frames = grid.inner_frames[faces]
    q0 = frames[:, 0]
    e1 = frames[:, 1] - q0
    e2 = frames[:, 2] - q0
    w = points - q0
    d11 = np.einsum("ij,ij->i", e1, e1)
    d12 = np.einsum("ij,ij->i", e1, e2)
    d22 = np.einsum("ij,ij->i", e2, e2)
    w1 = np.einsum("ij,ij->i", w, e1)
    w2 = np.einsum("ij,ij->i", w, e2)
    gram = d11 * d22 - d12 * d12
    uu = k * (d22 * w1 - d12 * w2) / gram
    vv = k * (d11 * w2 - d12 * w1) / gram
    i = np.clip(np.floor(uu), 0, k - 1).astype(np.int64)
    j = np.clip(np.floor(vv), 0, k - 1).astype(np.int64)
    fu = uu - i
    fv = vv - j
    upper = fu + fv > 1.0
    alt = grid.altitudes[faces] * grid.scale
    lower_dist = np.minimum.reduce([fu * alt[:, 1], fv * alt[:, 2], (1.0 - fu - fv) * alt[:, 0]])
    upper_dist = np.minimum.reduce(
        [(1.0 - fu) * alt[:, 1], (1.0 - fv) * alt[:, 2], (fu + fv - 1.0) * alt[:, 0]]
    )
    dist = np.where(upper, upper_dist, lower_dist) / k
    rows = grid.index[faces, i, j, upper.astype(np.int64)]
    return rows, (rows >= 0) & (dist >= eps)


def clip_cull_and_count(
    lattice: LineLattice,
    grid: FaceGrid,
    planes: PlaneFamily,
    eps: float,
) -> LineIncidence:
    """Clip lattice lines to T_k and assign crossings to inner triangles.

    A line survives when it crosses T_k along a chord longer than ``eps``,
    enters and exits farther than ``eps`` from every inner-triangle contour and
    does not run within ``eps`` of a plane of the family or a face of T_k.

    Parameters
    ----------
    lattice : LineLattice
        Lines of one rank-one term.
    grid : FaceGrid
        Boundary grid with inner triangles (see :func:`shrink_and_project`).
    planes : PlaneFamily
        Forbidden planes.
    eps : float
        Absolute degeneracy distance.

    Returns
    -------
    LineIncidence
        Surviving chords, triangle assignments and counts.
    """
    if not grid.has_inner:
        raise ValueError("The face grid has no inner triangles; call shrink_and_project first")
    tet = grid.parent
    t = lattice.direction
    c = tet.barycenter
    normals = tet.face_normals
    center_offsets = normals @ c
    offsets = center_offsets + grid.scale * (tet.face_offsets - center_offsets)

    inner_vertices = c + grid.scale * (tet.vertices - c)
    origins = lattice.origins(lattice.indices_covering(inner_vertices))
    denom = normals @ t
    num = offsets[None, :] - origins @ normals.T
    parallel = np.abs(denom) <= PARALLEL_TOL
    with np.errstate(divide="ignore", invalid="ignore"):
        params = num / np.where(parallel, 1.0, denom)[None, :]
    entry_params = np.where((denom < -PARALLEL_TOL)[None, :], params, -np.inf)
    exit_params = np.where((denom > PARALLEL_TOL)[None, :], params, np.inf)
    face_in = np.argmax(entry_params, axis=1)
    face_out = np.argmin(exit_params, axis=1)
    rows = np.arange(len(origins))
    s_in = entry_params[rows, face_in]
    s_out = exit_params[rows, face_out]
    chord = s_out - s_in

    outside = np.any(parallel[None, :] & (num < -eps), axis=1) | (chord < -eps)
    touching = np.any(parallel[None, :] & (np.abs(num) <= eps), axis=1) | (np.abs(chord) <= eps)
    candidate = ~outside & ~touching
    culled = int(np.sum(~outside & touching))

    idx = np.flatnonzero(candidate)
    entries = origins[idx] + s_in[idx, None] * t
    exits = origins[idx] + s_out[idx, None] * t
    tri_in, ok_in = _locate(grid, face_in[idx], entries, eps)
    tri_out, ok_out = _locate(grid, face_out[idx], exits, eps)
    ok = ok_in & ok_out & ~planes.contains_lines(origins[idx], t, eps)
    culled += int(np.sum(~ok))

    counts = np.bincount(tri_in[ok], minlength=len(grid)) + np.bincount(
        tri_out[ok], minlength=len(grid)
    )
    return LineIncidence(
        entries=entries[ok],
        exits=exits[ok],
        entry_triangles=tri_in[ok],
        exit_triangles=tri_out[ok],
        counts=counts,
        culled=culled,
        examined=len(origins),
    )


def enumerate_crossings(lattice: LineLattice, triangles: np.ndarray) -> np.ndarray:
    """Count the lattice lines through each triangle by enumerating lattice points.

    Each triangle is projected along the line direction onto the lattice plane,
    where the lines are the integer points (m, n); every point of the bounding
    box is tested against the projected triangle. Triangles parallel to the
    lines count zero.

    Parameters
    ----------
    lattice : LineLattice
        Lines of one rank-one term.
    triangles : np.ndarray
        Triangle vertices, shape ``(H, 3, 3)``.

    Returns
    -------
    np.ndarray
        Integer counts, shape ``(H,)``.
    """
    tri = np.asarray(triangles, dtype=float)
    rel = tri - lattice.origin
    u = rel @ lattice.v1 / lattice.spacing - lattice.offset[0]
    v = rel @ lattice.v2 / lattice.spacing - lattice.offset[1]
    counts = np.zeros(len(tri), dtype=np.int64)
    for h in range(len(tri)):
        p = np.column_stack([u[h], v[h]])
        e1 = p[1] - p[0]
        e2 = p[2] - p[0]
        det = e1[0] * e2[1] - e1[1] * e2[0]
        if abs(det) <= PARALLEL_TOL * max(1.0, float(np.abs(p).max())) ** 2:
            continue
        ms = np.arange(math.ceil(p[:, 0].min()), math.floor(p[:, 0].max()) + 1)
        ns = np.arange(math.ceil(p[:, 1].min()), math.floor(p[:, 1].max()) + 1)
        if len(ms) == 0 or len(ns) == 0:
            continue
        mm, nn = np.meshgrid(ms, ns, indexing="ij")
        w0 = mm.ravel() - p[0, 0]
        w1 = nn.ravel() - p[0, 1]
        s = (w0 * e2[1] - w1 * e2[0]) / det
        r = (e1[0] * w1 - e1[1] * w0) / det
        counts[h] = int(np.count_nonzero((s >= 0.0) & (r >= 0.0) & (s + r <= 1.0)))
    return counts


def connect_to_barycenters(
    incidence: LineIncidence, grid: FaceGrid, b: np.ndarray, k: int
) -> PolyhedralCurrent:
    """Connectors ``omega``: exit point -> barycenter and barycenter -> entry point.

    Each connector carries ``b / k**4``, so its orientation follows
    ``sign(<t, n_h>)`` and the lattice line flows into and out of d(T, k, h).
    """
    weight = np.asarray(b, dtype=float) / k**4
    if len(incidence) == 0:
        return PolyhedralCurrent.empty(len(weight))
    d = grid.barycenters
    starts = np.vstack([incidence.exits, d[incidence.entry_triangles]])
    ends = np.vstack([d[incidence.exit_triangles], incidence.entries])
    return PolyhedralCurrent(starts, ends, np.tile(weight, (len(starts), 1)))


def exact_and_averaged_mass(
    counts: np.ndarray,
    burgers: np.ndarray,
    directions: np.ndarray,
    grid: FaceGrid,
    matrix: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Exact masses B(T, k, h) and averaged masses ``area(Delta_h) A n_h``.

    Parameters
    ----------
    counts : np.ndarray
        N(k, j, h), shape ``(M, H)``.
    burgers, directions : np.ndarray
        Decomposition terms, shapes ``(M, N)`` and ``(M, 3)``.
    grid : FaceGrid
        Boundary grid.
    matrix : np.ndarray
        A, shape ``(N, 3)``.

    Returns
    -------
    tuple[np.ndarray, np.ndarray]
        B and B_hat, both of shape ``(H, N)``.
    """
    k = grid.k
    a = np.asarray(matrix, dtype=float)
    signs = np.sign(np.asarray(directions, dtype=float) @ grid.normals.T)  # (M, H)
    exact = np.einsum("mh,mh,mi->hi", np.asarray(counts, dtype=float), signs, burgers) / k**4
    averaged = grid.areas[:, None] * (grid.normals @ a.T)
    return exact, averaged


def inner_target_mass(grid: FaceGrid, matrix: np.ndarray) -> np.ndarray:
    """``area(delta_h) A n_h``, the mass B approximates, shape ``(H, N)``."""
    return grid.inner_areas[:, None] * (grid.normals @ np.asarray(matrix, dtype=float).T)


def _draw_ray(
    rng: np.random.Generator,
    normal: np.ndarray,
    forbidden_planes: np.ndarray,
    avoid: list[np.ndarray],
    options: ConstructionOptions,
) -> np.ndarray:
    sin_delta = math.sin(options.ray_angle)
    cos_delta = math.cos(options.ray_angle)
    for _ in range(options.ray_tries):
        tau = rng.standard_normal(3)
        tau /= np.linalg.norm(tau)
        if tau @ normal < 0:
            tau = -tau
        if tau @ normal < sin_delta:
            continue
        if len(forbidden_planes) and np.any(np.abs(forbidden_planes @ tau) < sin_delta):
            continue
        if any(abs(float(tau @ other)) > cos_delta for other in avoid):
            continue
        return tau
    raise RayDirectionError(
        f"No admissible ray direction after {options.ray_tries} draws "
        f"(angle {options.ray_angle:.2e} rad)"
    )


def correction_rays(
    exact: np.ndarray,
    averaged: np.ndarray,
    grid: FaceGrid,
    planes: PlaneFamily,
    domain: Box,
    rng: np.random.Generator,
    options: ConstructionOptions | None = None,
    avoid: Sequence[np.ndarray] = (),
) -> tuple[PolyhedralCurrent, np.ndarray]:
    """Truncated rays ``rho`` carrying ``B_hat - B`` away from each barycenter.

    Every nonzero coordinate of ``B_hat(h) - B(h)`` gets its own ray from the
    truncation sphere (radius ``truncation_factor`` domain circumradii about the
    domain center) to d(T, k, h), so each multiplicity is a multiple of a
    coordinate vector. Directions point out of T, avoid the planes through d
    and keep an angle from each other and from the ``avoid`` directions.

    Returns
    -------
    tuple[PolyhedralCurrent, np.ndarray]
        The rays and their unit directions (pointing away from d).

    Raises
    ------
    RayDirectionError
        If no admissible direction is found.
    """
    options = options or ConstructionOptions()
    n = exact.shape[1]
    diff = averaged - exact
    threshold = options.mass_tolerance * max(float(np.abs(averaged).max(initial=0.0)), 1e-300)
    center = domain.center
    radius = options.truncation_factor * domain.circumradius
    eps = options.eps * grid.parent.diam
    avoid_dirs = [np.asarray(a, dtype=float) for a in avoid]

    starts, ends, burgers, directions = [], [], [], []
    for h in range(len(grid)):
        comps = np.flatnonzero(np.abs(diff[h]) > threshold)
        if len(comps) == 0:
            continue
        d = grid.barycenters[h]
        forbidden = planes.through(d, eps)
        used: list[np.ndarray] = []
        for i in comps:
            tau = _draw_ray(rng, grid.normals[h], forbidden, avoid_dirs + used, options)
            used.append(tau)
            rel = d - center
            proj = float(rel @ tau)
            length = -proj + math.sqrt(proj * proj - float(rel @ rel) + radius * radius)
            multiplicity = np.zeros(n)
            multiplicity[i] = diff[h, i]
            starts.append(d + length * tau)
            ends.append(d)
            burgers.append(multiplicity)
            directions.append(tau)
    if not starts:
        return PolyhedralCurrent.empty(n), np.zeros((0, 3))
    return (
        PolyhedralCurrent(np.array(starts), np.array(ends), np.array(burgers)),
        np.array(directions),
    )


@dataclass(frozen=True, eq=False)
class TetraConstruction:
    """Measure ``nu_k + omega_k + rho_k`` of one tetrahedron with its bookkeeping.

    Attributes
    ----------
    tet_index : int
        Position of the tetrahedron in the mesh.
    k : int
        Resolution.
    matrix : np.ndarray
        The constant field A on the tetrahedron.
    decomposition : RankOneDecomposition
        Terms the lattices were built from.
    nu, omega, rho : PolyhedralCurrent
        Lattice chords, connectors and correction rays.
    grid : FaceGrid
        Boundary grid with inner triangles (None for A = 0).
    exact_mass, averaged_mass, inner_mass : np.ndarray
        B, B_hat and ``area(delta) A n`` per grid row, shape ``(H, N)``.
    counts : np.ndarray
        N(k, j, h), shape ``(M, H)``.
    incidences : tuple[LineIncidence, ...]
        Crossing points R(k, j, h) per term.
    culled : tuple[int, ...]
        Culled lines per term.
    retries : tuple[int, ...]
        Lattice re-seeds per term.
    ray_directions : np.ndarray
        Unit directions of the rays.
    """

    tet_index: int
    k: int
    matrix: np.ndarray
    decomposition: RankOneDecomposition
    nu: PolyhedralCurrent
    omega: PolyhedralCurrent
    rho: PolyhedralCurrent
    grid: FaceGrid | None = None
    exact_mass: np.ndarray | None = None
    averaged_mass: np.ndarray | None = None
    inner_mass: np.ndarray | None = None
    counts: np.ndarray | None = None
    incidences: tuple[LineIncidence, ...] = ()
    culled: tuple[int, ...] = ()
    retries: tuple[int, ...] = ()
    ray_directions: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))

    @property
    def measure(self) -> PolyhedralCurrent:
        """``mu_k = nu_k + omega_k + rho_k``."""
        return PolyhedralCurrent.concatenate([self.nu, self.omega, self.rho], self.nu.n)

    @property
    def eta(self) -> PolyhedralCurrent:
        """``omega_k + rho_k``."""
        return PolyhedralCurrent.concatenate([self.omega, self.rho], self.nu.n)

    def mass_gap(self) -> float:
        """``max_h |B - area(delta_h) A n_h|``."""
        if self.exact_mass is None:
            return 0.0
        return float(np.linalg.norm(self.exact_mass - self.inner_mass, axis=1).max())

    def summary(self) -> dict[str, Any]:
        """Plain-data dump of counts, masses and culling."""
        out: dict[str, Any] = {
            "tet": self.tet_index,
            "k": self.k,
            "terms": len(self.decomposition),
            "segments": {"nu": len(self.nu), "omega": len(self.omega), "rho": len(self.rho)},
            "culled": list(self.culled),
            "retries": list(self.retries),
        }
        if self.counts is not None:
            out["crossings"] = [int(c) for c in self.counts.sum(axis=1)]
            out["exact_mass"] = self.exact_mass.tolist()
            out["averaged_mass"] = self.averaged_mass.tolist()
            out["mass_gap"] = self.mass_gap()
        return out


def _lattice_for_term(
    tet: Tetra,
    grid: FaceGrid,
    b: np.ndarray,
    t: np.ndarray,
    k: int,
    planes: PlaneFamily,
    seeds: tuple[int, int, int],
    options: ConstructionOptions,
) -> tuple[LineIncidence, int]:
    seed, tet_index, j = seeds
    eps = options.eps * tet.diam
    budget = math.ceil(tet.diam**2 * k**3) + 1
    for attempt in range(options.offset_retries + 1):
        rng = np.random.default_rng(np.random.SeedSequence([seed, tet_index, j, k, attempt]))
        lattice = build_line_lattice(b, t, k, rng.random(2), tet.barycenter)
        incidence = clip_cull_and_count(lattice, grid, planes, eps)
        if incidence.culled <= 2 * budget:
            if incidence.culled:
                logger.debug(
                    f"tet {tet_index} term {j}: culled {incidence.culled} of "
                    f"{incidence.examined} lines"
                )
            return incidence, attempt
        logger.debug(f"tet {tet_index} term {j}: {incidence.culled} culled lines, re-seeding")
    raise LatticeError(
        f"Tetrahedron {tet_index}, term {j}: culling exceeded {2 * budget} lines after "
        f"{options.offset_retries} re-seeds"
    )


def build_tetra_measure(
    tet: Tetra,
    decomposition: RankOneDecomposition,
    k: int,
    planes: PlaneFamily,
    domain: Box | None = None,
    tet_index: int = 0,
    seed: int = 0,
    options: ConstructionOptions | None = None,
) -> TetraConstruction:
    """Build ``mu_k`` for a constant field on one tetrahedron.

    Parameters
    ----------
    tet : Tetra
        The tetrahedron.
    decomposition : RankOneDecomposition
        ``A = sum_j b_j (x) t_j`` with each b_j a multiple of an integer vector.
    k : int
        Resolution (>= 2).
    planes : PlaneFamily
        Forbidden planes for rays and lattice lines.
    domain : Box, optional
        Domain used for the ray truncation sphere; defaults to the bounding box
        of the tetrahedron.
    tet_index : int
        Index used for seeding.
    seed : int
        Run seed.
    options : ConstructionOptions, optional
        Construction constants.

    Returns
    -------
    TetraConstruction
        The measure and its bookkeeping (empty for A = 0).
    """
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    options = options or ConstructionOptions()
    domain = domain or Box(tet.vertices.min(axis=0), tet.vertices.max(axis=0))
    a = decomposition.target
    n = a.shape[0]
    if not np.any(a) or len(decomposition) == 0:
        empty = PolyhedralCurrent.empty(n)
        return TetraConstruction(tet_index, k, a, decomposition, empty, empty, empty)

    grid = shrink_and_project(tet, subdivide_boundary(tet, k))
    incidences = []
    retries = []
    nus = []
    omegas = []
    for j, (b, t) in enumerate(decomposition.terms()):
        incidence, attempt = _lattice_for_term(
            tet, grid, b, t, k, planes, (seed, tet_index, j), options
        )
        incidences.append(incidence)
        retries.append(attempt)
        if len(incidence):
            weight = np.tile(b / k**4, (len(incidence), 1))
            nus.append(PolyhedralCurrent(incidence.entries, incidence.exits, weight))
        omegas.append(connect_to_barycenters(incidence, grid, b, k))

    counts = np.array([inc.counts for inc in incidences])
    exact, averaged = exact_and_averaged_mass(
        counts, decomposition.burgers, decomposition.directions, grid, a
    )
    rng = np.random.default_rng(np.random.SeedSequence([seed, tet_index, k, RAY_STREAM]))
    rho, ray_dirs = correction_rays(
        exact, averaged, grid, planes, domain, rng, options, list(decomposition.directions)
    )
    construction = TetraConstruction(
        tet_index=tet_index,
        k=k,
        matrix=a,
        decomposition=decomposition,
        nu=PolyhedralCurrent.concatenate(nus, n),
        omega=PolyhedralCurrent.concatenate(omegas, n),
        rho=rho,
        grid=grid,
        exact_mass=exact,
        averaged_mass=averaged,
        inner_mass=inner_target_mass(grid, a),
        counts=counts,
        incidences=tuple(incidences),
        culled=tuple(inc.culled for inc in incidences),
        retries=tuple(retries),
        ray_directions=ray_dirs,
    )
    logger.debug(
        f"tet {tet_index}, k={k}: {len(construction.nu)} chords, "
        f"{len(construction.omega)} connectors, {len(rho)} rays"
    )
    return construction


@dataclass(frozen=True, eq=False)
class GluedMeasure:
    """Global approximant of a piecewise-constant field at one resolution.

    Attributes
    ----------
    k : int
        Resolution.
    measure : PolyhedralCurrent
        ``mu_k``, the union of the per-tetrahedron measures.
    eta : PolyhedralCurrent
        ``eta_k``, the union of connectors and rays.
    constructions : tuple[TetraConstruction, ...]
        Per-tetrahedron results ordered by tetrahedron index.
    """

    k: int
    measure: PolyhedralCurrent
    eta: PolyhedralCurrent
    constructions: tuple[TetraConstruction, ...]

    @property
    def nu(self) -> PolyhedralCurrent:
        """Union of the lattice chords."""
        parts = [c.nu for c in self.constructions]
        return PolyhedralCurrent.concatenate(parts, self.measure.n)

    def part(self, name: str) -> PolyhedralCurrent:
        """Union of ``nu``, ``omega`` or ``rho`` over all tetrahedra."""
        if name not in ("nu", "omega", "rho"):
            raise ValueError(f"Unknown part '{name}'")
        parts = [getattr(c, name) for c in self.constructions]
        return PolyhedralCurrent.concatenate(parts, self.measure.n)


def glue(
    field: PiecewiseConstantField,
    k: int,
    decompositions: Sequence[RankOneDecomposition] | None = None,
    seed: int = 0,
    options: ConstructionOptions | None = None,
    workers: int = 1,
    jump_tolerance: float = 1e-10,
) -> GluedMeasure:
    """Build and glue the per-tetrahedron measures of a field.

    Parameters
    ----------
    field : PiecewiseConstantField
        Field satisfying the normal-jump condition.
    k : int
        Resolution shared by all tetrahedra.
    decompositions : sequence of RankOneDecomposition, optional
        One decomposition per tetrahedron; coordinate decompositions by default.
    seed : int
        Run seed.
    options : ConstructionOptions, optional
        Construction constants.
    workers : int
        Threads building tetrahedra concurrently.
    jump_tolerance : float
        Relative normal-jump tolerance.

    Raises
    ------
    MeshError
        If the mesh is not conforming.
    NormalJumpError
        If the field has a normal jump above tolerance.
    """
    mesh = field.mesh
    mesh.check_conformity()
    require_normal_jumps(field, jump_tolerance)
    if decompositions is None:
        decompositions = [coordinate_rank_one_decomposition(a) for a in field.matrices]
    if len(decompositions) != len(mesh):
        raise ValueError(f"Expected {len(mesh)} decompositions, got {len(decompositions)}")
    planes = PlaneFamily.from_mesh(mesh)

    def build(index: int) -> TetraConstruction:
        return build_tetra_measure(
            mesh.tets[index],
            decompositions[index],
            k,
            planes,
            mesh.domain,
            tet_index=index,
            seed=seed,
            options=options,
        )

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        constructions = tuple(pool.map(build, range(len(mesh))))
    n = field.n
    measure = PolyhedralCurrent.concatenate([c.measure for c in constructions], n)
    eta = PolyhedralCurrent.concatenate([c.eta for c in constructions], n)
    logger.info(f"Glued {len(mesh)} tetrahedra at k={k}: {len(measure)} segments")
    return GluedMeasure(k, measure, eta, constructions)


@dataclass(frozen=True)
class ConvergenceRow:
    """Diagnostics of one resolution."""

    k: int
    segments: int
    mass_nu: float
    mass_omega: float
    mass_rho: float
    mass_total: float
    ledger_residual: float
    weak_gap: float
    culled: int
    mass_constant: float


@dataclass
class ConvergenceReport:
    """Per-resolution diagnostics with fitted log-log rates.

    Attributes
    ----------
    window : Box | None
        Evaluation window Omega (masses of rays are measured there).
    field_mass : float
        ``int |A| dx``.
    rows : list[ConvergenceRow]
        One row per k.
    rates : dict[str, float]
        Fitted slopes of ``log(quantity)`` against ``log(k)``.
    """

    window: Box | None = None
    field_mass: float = 0.0
    rows: list[ConvergenceRow] = field(default_factory=list)
    rates: dict[str, float] = field(default_factory=dict)

    def to_rows(self) -> list[dict[str, float]]:
        """Rows as plain dictionaries."""
        return [dict(row.__dict__) for row in self.rows]


def _fit_rate(ks: Sequence[int], values: Sequence[float]) -> float:
    x = np.log(np.asarray(ks, dtype=float))
    y = np.asarray(values, dtype=float)
    keep = y > 0
    if keep.sum() < 2:
        return math.nan
    slope, _ = np.polyfit(x[keep], np.log(y[keep]), 1)
    return float(slope)


def approximate_measure_pipeline(
    field: PiecewiseConstantField,
    ks: Sequence[int],
    decompositions: Sequence[RankOneDecomposition] | None = None,
    seed: int = 0,
    options: ConstructionOptions | None = None,
    workers: int = 1,
    test_functions: int = 10,
    ledger_tolerance: float = 1e-10,
) -> tuple[list[GluedMeasure], ConvergenceReport]:
    """Glue the field at every k and report convergence diagnostics.

    The weak* gap is the largest ``|<mu_k, phi> - int <phi, A> dx|`` over
    random quadratic matrix-valued test functions, both sides restricted to
    the domain, relative to ``int |A| dx``.

    Returns
    -------
    tuple[list[GluedMeasure], ConvergenceReport]
        One measure per k (empty for the zero field) and the report.
    """
    window = field.mesh.domain
    report = ConvergenceReport(window=window, field_mass=field.l1_norm())
    if field.is_zero:
        logger.info("Zero field: nothing to approximate")
        return [], report

    rng = np.random.default_rng(np.random.SeedSequence([seed, len(ks)]))
    tests = random_matrix_tests(rng, field.n, test_functions)
    targets = [integrate_field_pairing(field, phi, window=window) for phi in tests]
    mesh = field.mesh
    volume_sum = sum(t.volume for t in mesh.tets)
    decs = decompositions or [coordinate_rank_one_decomposition(a) for a in field.matrices]
    burgers_sum = max(
        sum(float(np.linalg.norm(d.burgers, axis=1).sum()) for d in decs), 1e-300
    )

    measures = []
    for k in ks:
        glued = glue(field, k, decs, seed=seed, options=options, workers=workers)
        mu = glued.measure
        gaps = [
            abs(pair_with_matrix_field(mu, phi, window=window) - target)
            for phi, target in zip(tests, targets)
        ]
        divergence = check_divergence_free(mu, region=mesh, tolerance=ledger_tolerance)
        mass_total = total_variation_on(mu, window)
        scale = volume_sum + sum(
            t.diam * (window.diameter + t.diam**2) / k for t in mesh.tets
        )
        row = ConvergenceRow(
            k=k,
            segments=len(mu),
            mass_nu=total_variation(glued.part("nu")),
            mass_omega=total_variation(glued.part("omega")),
            mass_rho=total_variation_on(glued.part("rho"), window),
            mass_total=mass_total,
            ledger_residual=divergence.worst_mass / max(total_variation(mu), 1e-300),
            weak_gap=max(gaps) / max(report.field_mass, 1e-300),
            culled=sum(sum(c.culled) for c in glued.constructions),
            mass_constant=mass_total / (scale * burgers_sum),
        )
        report.rows.append(row)
        measures.append(glued)
        logger.info(
            f"k={k}: mass {row.mass_total:.4g}, omega {row.mass_omega:.3g}, "
            f"rho {row.mass_rho:.3g}, weak gap {row.weak_gap:.3g}"
        )

    ks_done = [row.k for row in report.rows]
    for name in ("mass_omega", "mass_rho", "weak_gap"):
        report.rates[name] = _fit_rate(ks_done, [getattr(r, name) for r in report.rows])
    return measures, report


def ledger_at_barycenters(construction: TetraConstruction) -> np.ndarray:
    """Ledger masses of ``nu + omega`` read at the barycenters, shape ``(H, N)``."""
    part = PolyhedralCurrent.concatenate([construction.nu, construction.omega], construction.nu.n)
    ledger = boundary_ledger(part)
    return np.array([ledger.mass_at(d) for d in construction.grid.barycenters])
