# SPDX-FileCopyrightText: 2026 The linetension developers
#
# SPDX-License-Identifier: LGPL-2.1-or-later

"""Built-in triangulations and the plain-text mesh format.

The text format holds one tetrahedron per line as 12 floats (four vertices,
x y z each). Blank lines and lines starting with ``#`` are ignored.
"""

import itertools
import logging
import re
from pathlib import Path

import numpy as np

from .errors import DegenerateGeometryError, MeshError
from .geometry import Tetra, Triangulation

logger = logging.getLogger(__name__)

KUHN_PATTERN = re.compile(r"^kuhn-subdivision\((\d+)\)$")

BUILTIN_MESHES = ("single-tet", "regular-tet", "unit-cube-6tet", "kuhn-subdivision(n)")


def single_tet() -> Triangulation:
    """Return the reference tetrahedron with vertices 0, e1, e2, e3."""
    return Triangulation((Tetra(np.vstack([np.zeros(3), np.eye(3)])),))


def regular_tet(edge: float = 1.0) -> Triangulation:
    """Return a regular tetrahedron with the given edge length."""
    v = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    v *= edge / (2.0 * np.sqrt(2.0))
    return Triangulation((Tetra(v),))


def kuhn_subdivision(n: int) -> Triangulation:
    """Split the unit cube into ``n**3`` cells of 6 tetrahedra each.

    Every cell is cut along the paths of its main diagonal (Kuhn/Freudenthal
    subdivision). The result is conforming, and vertex coordinates are computed
    by the same expression everywhere, so shared vertices are bit-identical.

    Parameters
    ----------
    n : int
        Number of cells per axis.

    Returns
    -------
    Triangulation
        ``6 n**3`` tetrahedra covering ``[0, 1]**3``.
    """
    if n < 1:
        raise ValueError(f"Subdivision level must be positive, got {n}")
    eye = np.eye(3, dtype=np.int64)
    tets = []
    for corner in itertools.product(range(n), repeat=3):
        for perm in itertools.permutations(range(3)):
            idx = [np.array(corner, dtype=np.int64)]
            for axis in perm:
                idx.append(idx[-1] + eye[axis])
            tets.append(Tetra(np.array(idx, dtype=float) / n))
    logger.debug(f"Built Kuhn subdivision with {len(tets)} tetrahedra")
    return Triangulation(tuple(tets))


def unit_cube_6tet() -> Triangulation:
    """Return the unit cube split into 6 tetrahedra."""
    return kuhn_subdivision(1)


def random_tet(rng: np.random.Generator, min_quality: float = 0.05) -> Tetra:
    """Draw a random tetrahedron with vertices in the unit cube.

    Parameters
    ----------
    rng : np.random.Generator
        Source of randomness.
    min_quality : float
        Lower bound for inradius / diam; poorer shapes are redrawn.
    """
    while True:
        try:
            tet = Tetra(rng.random((4, 3)))
        except DegenerateGeometryError:
            continue
        if tet.inradius / tet.diam >= min_quality:
            return tet


def read_mesh(path: str | Path) -> Triangulation:
    """Read a triangulation from the plain-text format.

    Raises
    ------
    MeshError
        If a line does not hold exactly 12 floats or a tetrahedron is degenerate.
    """
    tets = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            try:
                values = [float(x) for x in text.replace(",", " ").split()]
            except ValueError as e:
                raise MeshError(f"{path}:{lineno}: not a list of floats", original_error=e) from e
            if len(values) != 12:
                raise MeshError(f"{path}:{lineno}: expected 12 floats, got {len(values)}")
            try:
                tets.append(Tetra(np.array(values).reshape(4, 3)))
            except DegenerateGeometryError as e:
                raise MeshError(
                    f"{path}:{lineno}: degenerate tetrahedron", tets=[len(tets)], original_error=e
                ) from e
    return Triangulation(tuple(tets))


def write_mesh(mesh: Triangulation, path: str | Path) -> None:
    """Write a triangulation in the plain-text format (round-trips exactly)."""
    with open(path, "w", encoding="utf-8") as handle:
        for tet in mesh.tets:
            handle.write(" ".join(repr(float(x)) for x in tet.vertices.ravel()) + "\n")


def load_mesh(spec: str) -> Triangulation:
    """Build a mesh from a built-in name or a file path.

    Parameters
    ----------
    spec : str
        One of ``single-tet``, ``regular-tet``, ``unit-cube-6tet``,
        ``kuhn-subdivision(n)`` or a path to a mesh file.

    Raises
    ------
    MeshError
        If the name is unknown and no such file exists.
    """
    if spec == "single-tet":
        return single_tet()
    if spec == "regular-tet":
        return regular_tet()
    if spec == "unit-cube-6tet":
        return unit_cube_6tet()
    match = KUHN_PATTERN.match(spec)
    if match:
        return kuhn_subdivision(int(match.group(1)))
    if Path(spec).is_file():
        return read_mesh(spec)
    raise MeshError(f"Unknown mesh '{spec}'. Built-in meshes: {', '.join(BUILTIN_MESHES)}")
