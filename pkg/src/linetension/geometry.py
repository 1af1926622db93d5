# SPDX-FileCopyrightText: 2026 The linetension developers
#
# SPDX-License-Identifier: LGPL-2.1-or-later

"""Tetrahedra, conforming triangulations and boundary face grids.

A :class:`FaceGrid` splits each face of a tetrahedron into ``k**2`` congruent
triangles. Face vertices are put in lexicographic order before splitting, so two
tetrahedra sharing a face produce bit-identical sub-triangles and barycenters.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError, cKDTree

from .errors import DegenerateGeometryError, MeshError

logger = logging.getLogger(__name__)

# Relative tolerance (times diam) used for degeneracy decisions
DEFAULT_EPS = 1e-9

# Local faces, face f is opposite vertex f and is listed with outward orientation
FACE_VERTICES = ((1, 2, 3), (0, 3, 2), (0, 1, 3), (0, 2, 1))


def _lexicographic_order(points: np.ndarray) -> np.ndarray:
    """Return the permutation sorting ``points`` lexicographically by (x, y, z)."""
    return np.lexsort(points.T[::-1])


def fibonacci_sphere(n: int) -> np.ndarray:
    """Return ``n`` nearly uniform unit vectors on the sphere.

    Parameters
    ----------
    n : int
        Number of directions.

    Returns
    -------
    np.ndarray
        Array of shape ``(n, 3)``.
    """
    if n < 1:
        raise ValueError(f"Number of directions must be positive, got {n}")
    i = np.arange(n, dtype=float) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = np.pi * (3.0 - np.sqrt(5.0)) * i
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


@dataclass(frozen=True, eq=False)
class Tetra:
    """Tetrahedron with positive orientation.

    Vertices given with negative orientation are reordered (vertices 2 and 3
    swapped), so ``signed_volume`` is always strictly positive.

    Parameters
    ----------
    vertices : array_like
        Four points in R^3, shape ``(4, 3)``.

    Raises
    ------
    DegenerateGeometryError
        If the volume is below ``DEFAULT_EPS * diam**3``.
    """

    vertices: np.ndarray

    def __post_init__(self) -> None:
        v = np.array(self.vertices, dtype=float).reshape(4, 3)
        diam = max(float(np.linalg.norm(v[i] - v[j])) for i in range(4) for j in range(i))
        det = float(np.linalg.det(v[1:] - v[0]))
        if not np.isfinite(det) or abs(det) <= DEFAULT_EPS * diam**3:
            raise DegenerateGeometryError(
                f"Degenerate tetrahedron (6*volume={det:.3e}, diam={diam:.3e})"
            )
        if det < 0:
            v = v[[0, 1, 3, 2]]
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @cached_property
    def barycenter(self) -> np.ndarray:
        """Arithmetic mean of the vertices."""
        return self.vertices.mean(axis=0)

    @cached_property
    def signed_volume(self) -> float:
        """Signed volume, positive by construction."""
        return float(np.linalg.det(self.vertices[1:] - self.vertices[0])) / 6.0

    @property
    def volume(self) -> float:
        """Lebesgue measure of the tetrahedron."""
        return abs(self.signed_volume)

    @cached_property
    def diam(self) -> float:
        """Largest edge length."""
        v = self.vertices
        return max(float(np.linalg.norm(v[i] - v[j])) for i in range(4) for j in range(i))

    @cached_property
    def face_normals(self) -> np.ndarray:
        """Outward unit normals, shape ``(4, 3)``; row f belongs to the face opposite vertex f."""
        v = self.vertices
        normals = np.array(
            [np.cross(v[b] - v[a], v[c] - v[a]) for a, b, c in FACE_VERTICES], dtype=float
        )
        return normals / np.linalg.norm(normals, axis=1)[:, None]

    @cached_property
    def face_offsets(self) -> np.ndarray:
        """Offsets ``c_f`` such that the tetrahedron is ``{x : n_f . x <= c_f}``."""
        anchors = self.vertices[[f[0] for f in FACE_VERTICES]]
        return np.einsum("ij,ij->i", self.face_normals, anchors)

    @cached_property
    def face_areas(self) -> np.ndarray:
        """Areas of the four faces."""
        v = self.vertices
        return np.array(
            [0.5 * np.linalg.norm(np.cross(v[b] - v[a], v[c] - v[a])) for a, b, c in FACE_VERTICES]
        )

    @property
    def boundary_area(self) -> float:
        """Total area of the boundary."""
        return float(self.face_areas.sum())

    @property
    def inradius(self) -> float:
        """Radius of the inscribed ball."""
        return 3.0 * self.volume / self.boundary_area

    @property
    def outer_radius(self) -> float:
        """Largest distance from the barycenter to a vertex."""
        return float(np.linalg.norm(self.vertices - self.barycenter, axis=1).max())

    def contains(self, points: np.ndarray, tol: float = 0.0) -> np.ndarray:
        """Test whether points lie in the closed tetrahedron (inflated by ``tol``).

        Parameters
        ----------
        points : np.ndarray
            Points of shape ``(..., 3)``.
        tol : float
            Distance by which every face is pushed outward.

        Returns
        -------
        np.ndarray
            Boolean array of shape ``(...)``.
        """
        pts = np.asarray(points, dtype=float)
        slack = pts @ self.face_normals.T - self.face_offsets
        return np.all(slack <= tol, axis=-1)

    def scaled(self, factor: float) -> Tetra:
        """Return the homothetic copy ``c + factor (T - c)`` about the barycenter."""
        c = self.barycenter
        return Tetra(c + factor * (self.vertices - c))


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned box used as evaluation window and as domain description.

    Parameters
    ----------
    lo, hi : array_like
        Lower and upper corners.
    """

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self) -> None:
        lo = np.array(self.lo, dtype=float).reshape(3)
        hi = np.array(self.hi, dtype=float).reshape(3)
        if np.any(hi <= lo):
            raise ValueError(f"Box corners must satisfy lo < hi, got {lo} and {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def center(self) -> np.ndarray:
        """Center of the box."""
        return 0.5 * (self.lo + self.hi)

    @property
    def diameter(self) -> float:
        """Length of the diagonal."""
        return float(np.linalg.norm(self.hi - self.lo))

    @property
    def circumradius(self) -> float:
        """Radius of the smallest ball centered at ``center`` containing the box."""
        return 0.5 * self.diameter

    @property
    def volume(self) -> float:
        """Volume of the box."""
        return float(np.prod(self.hi - self.lo))

    def contains(self, points: np.ndarray, margin: float = 0.0) -> np.ndarray:
        """Test membership in the open box shrunk by ``margin``."""
        pts = np.asarray(points, dtype=float)
        return np.all((pts > self.lo + margin) & (pts < self.hi - margin), axis=-1)

    def clip_parameters(self, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
        """Return the fraction of each segment lying in the closed box.

        Liang-Barsky clipping, vectorized over segments.

        Parameters
        ----------
        starts, ends : np.ndarray
            Segment endpoints, shape ``(M, 3)``.

        Returns
        -------
        np.ndarray
            Array of shape ``(M, 2)`` with the clipped parameter interval ``[t0, t1]``
            in ``[0, 1]``; empty intersections have ``t1 <= t0``.
        """
        s = np.asarray(starts, dtype=float).reshape(-1, 3)
        d = np.asarray(ends, dtype=float).reshape(-1, 3) - s
        t0 = np.zeros(len(s))
        t1 = np.ones(len(s))
        with np.errstate(divide="ignore", invalid="ignore"):
            for axis in range(3):
                da = d[:, axis]
                sa = s[:, axis]
                moving = da != 0.0
                ta = (self.lo[axis] - sa) / da
                tb = (self.hi[axis] - sa) / da
                lower = np.where(moving, np.minimum(ta, tb), -np.inf)
                upper = np.where(moving, np.maximum(ta, tb), np.inf)
                outside = ~moving & ((sa < self.lo[axis]) | (sa > self.hi[axis]))
                upper = np.where(outside, -np.inf, upper)
                t0 = np.maximum(t0, lower)
                t1 = np.minimum(t1, upper)
        return np.column_stack([t0, t1])

    def clipped_fraction(self, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
        """Fraction of each segment's length inside the closed box."""
        t = self.clip_parameters(starts, ends)
        return np.clip(t[:, 1] - t[:, 0], 0.0, 1.0)

    def halfspaces(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(normals, offsets)`` with the box equal to ``{x : normals x <= offsets}``."""
        eye = np.eye(3)
        return np.vstack([eye, -eye]), np.concatenate([self.hi, -self.lo])


@dataclass(frozen=True)
class InteriorFace:
    """Face shared by two tetrahedra.

    Attributes
    ----------
    tets : tuple[int, int]
        Indices of the two tetrahedra.
    local : tuple[int, int]
        Local face index in each tetrahedron.
    normal : tuple[float, float, float]
        Unit normal pointing out of ``tets[0]``.
    """

    tets: tuple[int, int]
    local: tuple[int, int]
    normal: tuple[float, float, float]


@dataclass(frozen=True, eq=False)
class Triangulation:
    """Finite family of tetrahedra covering a box domain.

    Parameters
    ----------
    tets : Sequence[Tetra]
        The tetrahedra.
    domain : Box, optional
        Domain Omega; defaults to the bounding box of all vertices.
    """

    tets: tuple[Tetra, ...]
    domain: Box | None = None

    def __post_init__(self) -> None:
        tets = tuple(self.tets)
        if not tets:
            raise MeshError("A triangulation needs at least one tetrahedron")
        object.__setattr__(self, "tets", tets)
        if self.domain is None:
            pts = self.vertex_array.reshape(-1, 3)
            object.__setattr__(self, "domain", Box(pts.min(axis=0), pts.max(axis=0)))

    def __len__(self) -> int:
        return len(self.tets)

    @cached_property
    def vertex_array(self) -> np.ndarray:
        """Vertices of every tetrahedron, shape ``(T, 4, 3)``."""
        return np.stack([t.vertices for t in self.tets])

    @property
    def size(self) -> float:
        """Mesh size r, the largest tetrahedron diameter."""
        return max(t.diam for t in self.tets)

    @property
    def aspect_ratio(self) -> float:
        """Constant C0 such that every tetrahedron contains a ball of radius C0 * r."""
        return min(t.inradius for t in self.tets) / self.size

    @property
    def volume(self) -> float:
        """Sum of tetrahedron volumes."""
        return float(sum(t.volume for t in self.tets))

    @cached_property
    def vertex_ids(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(unique_points, ids)`` with ``ids`` of shape ``(T, 4)``."""
        pts = self.vertex_array.reshape(-1, 3)
        quantum = 2.0**-30 * max(self.domain.diameter, 1.0)
        keys = np.round(pts / quantum).astype(np.int64)
        _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
        return pts[first], inverse.reshape(-1, 4)

    @cached_property
    def _face_map(self) -> dict[tuple[int, int, int], list[tuple[int, int]]]:
        _, ids = self.vertex_ids
        faces: dict[tuple[int, int, int], list[tuple[int, int]]] = {}
        for t, row in enumerate(ids):
            for f, local in enumerate(FACE_VERTICES):
                key = tuple(sorted(int(row[i]) for i in local))
                faces.setdefault(key, []).append((t, f))
        return faces

    @cached_property
    def interior_faces(self) -> list[InteriorFace]:
        """Faces shared by exactly two tetrahedra, in deterministic order."""
        result = []
        for key in sorted(self._face_map):
            owners = self._face_map[key]
            if len(owners) == 2:
                (ta, fa), (tb, fb) = owners
                n = self.tets[ta].face_normals[fa]
                result.append(InteriorFace((ta, tb), (fa, fb), tuple(float(x) for x in n)))
        return result

    @cached_property
    def boundary_faces(self) -> list[tuple[int, int]]:
        """``(tet, local face)`` pairs of faces owned by a single tetrahedron."""
        return sorted(
            owners[0] for owners in self._face_map.values() if len(owners) == 1
        )

    def contains(self, points: np.ndarray, margin: float = 0.0) -> np.ndarray:
        """Test membership in the open union of the tetrahedra shrunk by ``margin``.

        Points within ``margin`` of a boundary face count as outside, so nodes
        on the boundary of a mesh that does not fill its domain box are exempt
        from divergence checks.
        """
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        inside = np.zeros(len(pts), dtype=bool)
        for tet in self.tets:
            inside |= tet.contains(pts, tol=margin)
        for t, f in self.boundary_faces:
            tet = self.tets[t]
            on_plane = np.abs(pts @ tet.face_normals[f] - tet.face_offsets[f]) <= margin
            inside &= ~(on_plane & tet.contains(pts, tol=margin))
        return inside

    def check_conformity(self) -> None:
        """Verify that tetrahedra meet face-to-face.

        Raises
        ------
        MeshError
            If a face is shared by more than two tetrahedra, or a vertex of one
            tetrahedron lies in another one without being one of its vertices.
        """
        for key, owners in self._face_map.items():
            if len(owners) > 2:
                raise MeshError(
                    f"Face {key} is shared by {len(owners)} tetrahedra",
                    tets=[t for t, _ in owners],
                )
        points, ids = self.vertex_ids
        tree = cKDTree(points)
        for t, tet in enumerate(self.tets):
            tol = 1e-12 * tet.diam
            own = set(int(i) for i in ids[t])
            near = tree.query_ball_point(tet.barycenter, tet.outer_radius + tol)
            for i in sorted(near):
                if i not in own and tet.contains(points[i], tol=tol):
                    owners = [s for s in range(len(self.tets)) if i in ids[s]]
                    raise MeshError(
                        f"Vertex {points[i].tolist()} of tetrahedra {owners} "
                        f"lies in tetrahedron {t} (hanging node)",
                        tets=[t, *owners],
                    )

    def quality(self) -> dict[str, float]:
        """Summary numbers of the mesh."""
        return {
            "tets": float(len(self.tets)),
            "size": self.size,
            "aspect_ratio": self.aspect_ratio,
            "volume": self.volume,
            "interior_faces": float(len(self.interior_faces)),
            "boundary_faces": float(len(self.boundary_faces)),
        }


@dataclass(frozen=True, eq=False)
class FaceGrid:
    """Subdivision of the boundary of a tetrahedron into ``4 k**2`` triangles.

    Triangles of face f occupy rows ``f*k**2 .. (f+1)*k**2 - 1``. The inner
    triangles on the boundary of the shrunk tetrahedron are only present after
    :func:`shrink_and_project`.

    Attributes
    ----------
    parent : Tetra
        The subdivided tetrahedron.
    k : int
        Number of segments per edge.
    frames : np.ndarray
        Face vertices in lexicographic order, shape ``(4, 3, 3)``.
    triangles : np.ndarray
        Outer triangles Delta(k, h), shape ``(4k^2, 3, 3)``.
    barycenters : np.ndarray
        Barycenters d(T, k, h), shape ``(4k^2, 3)``.
    normals : np.ndarray
        Outward unit normals n_h, shape ``(4k^2, 3)``.
    areas : np.ndarray
        Areas of the outer triangles.
    face_of : np.ndarray
        Local face index of each triangle.
    index : np.ndarray
        Lookup ``index[f, i, j, upper]`` of triangle rows (-1 where unused).
    """

    parent: Tetra
    k: int
    frames: np.ndarray
    triangles: np.ndarray
    barycenters: np.ndarray
    normals: np.ndarray
    areas: np.ndarray
    face_of: np.ndarray
    index: np.ndarray
    scale: float = 1.0
    inner_frames: np.ndarray | None = None
    inner_triangles: np.ndarray | None = None
    inner_areas: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.triangles)

    @property
    def has_inner(self) -> bool:
        """Whether the inner triangles delta(k, h) are available."""
        return self.inner_triangles is not None

    @property
    def max_projection_gap(self) -> float:
        """Largest distance between matching vertices of Delta(k, h) and delta(k, h)."""
        if self.inner_triangles is None:
            return 0.0
        return float(np.linalg.norm(self.triangles - self.inner_triangles, axis=-1).max())

    @cached_property
    def altitudes(self) -> np.ndarray:
        """Altitudes ``(h0, h1, h2)`` of each (outer) face frame, shape ``(4, 3)``.

        ``h_m`` is the distance from frame vertex m to the opposite edge.
        """
        out = np.empty((4, 3))
        for f, (q0, q1, q2) in enumerate(self.frames):
            twice_area = np.linalg.norm(np.cross(q1 - q0, q2 - q0))
            out[f, 0] = twice_area / np.linalg.norm(q2 - q1)
            out[f, 1] = twice_area / np.linalg.norm(q2 - q0)
            out[f, 2] = twice_area / np.linalg.norm(q1 - q0)
        return out


def subdivide_boundary(tet: Tetra, k: int) -> FaceGrid:
    """Split every face of ``tet`` into ``k**2`` congruent triangles.

    Parameters
    ----------
    tet : Tetra
        Non-degenerate tetrahedron.
    k : int
        Number of segments each edge is divided into (k >= 1).

    Returns
    -------
    FaceGrid
        Grid with ``4 k**2`` triangles, barycenters, outward normals and areas.

    Raises
    ------
    ValueError
        If ``k < 1``.

    Examples
    --------
    >>> grid = subdivide_boundary(Tetra([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]), 2)
    >>> len(grid)
    16
    """
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    frames = np.empty((4, 3, 3))
    for f, local in enumerate(FACE_VERTICES):
        pts = tet.vertices[list(local)]
        frames[f] = pts[_lexicographic_order(pts)]

    lower = [(i, j) for i in range(k) for j in range(k - i)]
    upper = [(i, j) for i in range(k - 1) for j in range(k - 1 - i)]
    per_face = len(lower) + len(upper)

    index = np.full((4, k, k, 2), -1, dtype=np.int64)
    corners = []  # (i, j) grid coordinates of each sub-triangle's three vertices
    for i, j in lower:
        corners.append(((i, j), (i + 1, j), (i, j + 1)))
    for i, j in upper:
        corners.append(((i + 1, j + 1), (i, j + 1), (i + 1, j)))
    uv = np.array(corners, dtype=float) / k  # (k^2, 3, 2)

    triangles = np.empty((4 * per_face, 3, 3))
    normals = np.empty((4 * per_face, 3))
    areas = np.empty(4 * per_face)
    face_of = np.repeat(np.arange(4), per_face)
    centroid = tet.barycenter
    for f in range(4):
        q0, q1, q2 = frames[f]
        rows = slice(f * per_face, (f + 1) * per_face)
        triangles[rows] = q0 + uv[..., 0:1] * (q1 - q0) + uv[..., 1:2] * (q2 - q0)
        n = np.cross(q1 - q0, q2 - q0)
        twice_area = float(np.linalg.norm(n))
        n = n / twice_area
        if np.dot(n, (q0 + q1 + q2) / 3.0 - centroid) < 0:
            n = -n
        normals[rows] = n
        areas[rows] = 0.5 * twice_area / k**2
        for r, (i, j) in enumerate(lower):
            index[f, i, j, 0] = f * per_face + r
        for r, (i, j) in enumerate(upper):
            index[f, i, j, 1] = f * per_face + len(lower) + r

    logger.debug(f"Subdivided boundary into {len(triangles)} triangles (k={k})")
    return FaceGrid(
        parent=tet,
        k=k,
        frames=frames,
        triangles=triangles,
        barycenters=triangles.mean(axis=1),
        normals=normals,
        areas=areas,
        face_of=face_of,
        index=index,
    )


def shrink_and_project(tet: Tetra, grid: FaceGrid, k: int | None = None) -> FaceGrid:
    """Add the inner triangles delta(k, h) on the boundary of T_k = (1 - 1/k^2) T.

    Shrinking is done about the barycenter, so delta(k, h) is the radial
    projection of Delta(k, h) from the barycenter onto the boundary of T_k.

    Parameters
    ----------
    tet : Tetra
        The tetrahedron ``grid`` was built from.
    grid : FaceGrid
        Output of :func:`subdivide_boundary`.
    k : int, optional
        Defaults to ``grid.k``.

    Returns
    -------
    FaceGrid
        Copy of ``grid`` with inner triangles, frames and areas populated.

    Raises
    ------
    DegenerateGeometryError
        If ``k < 2`` (the shrunk tetrahedron collapses to a point).
    """
    k = grid.k if k is None else k
    if k < 2:
        raise DegenerateGeometryError(f"Shrinking needs k >= 2, got k={k}")
    scale = 1.0 - 1.0 / k**2
    c = tet.barycenter
    return replace(
        grid,
        scale=scale,
        inner_frames=c + scale * (grid.frames - c),
        inner_triangles=c + scale * (grid.triangles - c),
        inner_areas=scale**2 * grid.areas,
    )


def projection_gap_exponent(tet: Tetra, ks: list[int]) -> float:
    """Fit the exponent p in ``max |x - y| ~ k**p`` between Delta(k, h) and delta(k, h)."""
    gaps = [shrink_and_project(tet, subdivide_boundary(tet, k)).max_projection_gap for k in ks]
    slope, _ = np.polyfit(np.log(ks), np.log(gaps), 1)
    return float(slope)


class IntersectionKind(Enum):
    """Classification of a line against a triangle."""

    POINT = "point"
    EMPTY = "empty"
    DEGENERATE = "degenerate"


@dataclass(frozen=True, eq=False)
class IntersectionResult:
    """Outcome of :func:`line_triangle_intersection`."""

    kind: IntersectionKind
    point: np.ndarray | None = None


def line_triangle_intersection(
    origin: np.ndarray,
    direction: np.ndarray,
    triangle: np.ndarray,
    eps: float,
) -> IntersectionResult:
    """Intersect an infinite line with a closed triangle.

    Parameters
    ----------
    origin : np.ndarray
        A point on the line.
    direction : np.ndarray
        Unit direction of the line.
    triangle : np.ndarray
        Triangle vertices, shape ``(3, 3)``.
    eps : float
        Distance below which an incidence counts as degenerate.

    Returns
    -------
    IntersectionResult
        ``POINT`` with the crossing point when the line crosses the open triangle
        farther than ``eps`` from its contour, ``DEGENERATE`` when the line runs
        within ``eps`` of the triangle's plane or crosses within ``eps`` of the
        contour, ``EMPTY`` otherwise.

    Raises
    ------
    ValueError
        If ``direction`` is not a unit vector.
    """
    o = np.asarray(origin, dtype=float)
    t = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(t) - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    p0, p1, p2 = np.asarray(triangle, dtype=float)
    e1 = p1 - p0
    e2 = p2 - p0
    normal = np.cross(e1, e2)
    twice_area = float(np.linalg.norm(normal))
    if twice_area == 0.0:
        raise DegenerateGeometryError("Triangle has zero area")
    normal = normal / twice_area
    extent = max(np.linalg.norm(e1), np.linalg.norm(e2), np.linalg.norm(p2 - p1))
    denom = float(np.dot(t, normal))
    offset = float(np.dot(p0 - o, normal))

    # Line (nearly) parallel to the plane over the whole triangle
    if abs(denom) * extent <= eps:
        if abs(offset) <= eps + abs(denom) * extent:
            return IntersectionResult(IntersectionKind.DEGENERATE)
        return IntersectionResult(IntersectionKind.EMPTY)

    x = o + (offset / denom) * t
    # Signed distances to the three edges, positive inside
    w = x - p0
    d11, d12, d22 = np.dot(e1, e1), np.dot(e1, e2), np.dot(e2, e2)
    gram = d11 * d22 - d12 * d12
    u = (d22 * np.dot(w, e1) - d12 * np.dot(w, e2)) / gram
    v = (d11 * np.dot(w, e2) - d12 * np.dot(w, e1)) / gram
    bary = np.array([1.0 - u - v, u, v])
    altitudes = twice_area / np.array(
        [np.linalg.norm(p2 - p1), np.linalg.norm(p2 - p0), np.linalg.norm(p1 - p0)]
    )
    distance = float(np.min(bary * altitudes))
    if distance > eps:
        return IntersectionResult(IntersectionKind.POINT, x)
    if distance >= -eps:
        return IntersectionResult(IntersectionKind.DEGENERATE)
    return IntersectionResult(IntersectionKind.EMPTY)


def tet_box_volume(tet: Tetra, box: Box) -> float:
    """Volume of ``tet`` intersected with ``box``.

    Parameters
    ----------
    tet : Tetra
        The tetrahedron.
    box : Box
        The window.

    Returns
    -------
    float
        L^3(T intersected with box).
    """
    v = tet.vertices
    if np.all(v >= box.lo) and np.all(v <= box.hi):
        return tet.volume
    if np.any(v.max(axis=0) <= box.lo) or np.any(v.min(axis=0) >= box.hi):
        return 0.0
    bn, bo = box.halfspaces()
    normals = np.vstack([tet.face_normals, bn])
    offsets = np.concatenate([tet.face_offsets, bo])
    # Chebyshev center gives a strictly interior point for qhull
    lengths = np.linalg.norm(normals, axis=1)
    res = linprog(
        c=[0.0, 0.0, 0.0, -1.0],
        A_ub=np.column_stack([normals, lengths]),
        b_ub=offsets,
        bounds=[(None, None)] * 3 + [(0.0, None)],
        method="highs",
    )
    if not res.success or res.x[3] <= 1e-12 * tet.diam:
        return 0.0
    halfspaces = np.column_stack([normals, -offsets])
    try:
        hs = HalfspaceIntersection(halfspaces, res.x[:3])
        return float(ConvexHull(hs.intersections).volume)
    except QhullError as e:
        raise DegenerateGeometryError(
            "Could not intersect tetrahedron with box", original_error=e
        ) from e
